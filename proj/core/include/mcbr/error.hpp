#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mcbr {

enum class ErrorCode {
    CatalogMismatch,
    Parse,
    EmptyCaseBase,
    Configuration,
    Precondition,
    StateOrder,
    OutOfRange,
    Validation,
    Schema,
    IdCollision,
    MissingFile,
    Storage,
    NotFound,
};

/// Stable machine-readable name, used in API error bodies and CLI output.
std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(message), code_(code), line_(line) {}

    ErrorCode code() const noexcept { return code_; }
    // 1-based line (or record) number for parse and schema errors.
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> line_;
};

} // namespace mcbr
