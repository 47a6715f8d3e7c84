#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcbr/error.hpp"

namespace mcbr {

/// Index of a symptom within a SymptomCatalog.
struct SymptomId {
    std::uint32_t value = 0;
    auto operator<=>(const SymptomId&) const = default;
};

using CaseId = std::uint64_t;

/// ABM and its eight differential diagnoses. The label set is closed.
enum class Diagnosis : std::uint8_t {
    ABM,
    AcuteViralMeningitis,
    TuberculousMeningitis,
    Encephalitis,
    BrainAbscess,
    Meningism,
    MeningealReactionNearbyInflammation,
    MeningealHaemorrhage,
    BrainTumor,
};

inline constexpr std::size_t kDiagnosisCount = 9;

inline constexpr std::array<Diagnosis, kDiagnosisCount> kAllDiagnoses = {
    Diagnosis::ABM,
    Diagnosis::AcuteViralMeningitis,
    Diagnosis::TuberculousMeningitis,
    Diagnosis::Encephalitis,
    Diagnosis::BrainAbscess,
    Diagnosis::Meningism,
    Diagnosis::MeningealReactionNearbyInflammation,
    Diagnosis::MeningealHaemorrhage,
    Diagnosis::BrainTumor,
};

constexpr std::size_t index_of(Diagnosis d) noexcept { return static_cast<std::size_t>(d); }

std::string_view to_string(Diagnosis d) noexcept;
std::optional<Diagnosis> parse_diagnosis(std::string_view name) noexcept;

/// Ordered list of named symptoms plus the subset that adaptation-case
/// similarity looks at.
class SymptomCatalog {
public:
    struct Entry {
        std::string name;
        bool influential = false;
        bool operator==(const Entry&) const = default;
    };

    SymptomCatalog() = default;
    /// Throws Validation on an empty list or duplicate names.
    explicit SymptomCatalog(std::vector<Entry> entries);

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const std::string& name(SymptomId id) const;
    std::optional<SymptomId> find(std::string_view name) const;
    /// Like find() but throws NotFound.
    SymptomId id(std::string_view name) const;

    bool influential(SymptomId id) const;
    std::vector<SymptomId> influential_ids() const;
    bool has_explicit_influential() const;
    /// Replaces the influential flags with exactly `ids`.
    void set_influential(std::span<const SymptomId> ids);

    bool operator==(const SymptomCatalog& other) const { return entries_ == other.entries_; }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::uint32_t> by_name_;
};

/// Presence/absence profile over a catalog. Unreported means absent.
class SymptomVector {
public:
    SymptomVector() = default;
    explicit SymptomVector(std::size_t size) : bits_(size, false) {}
    explicit SymptomVector(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static SymptomVector with_present(std::size_t size, std::span<const SymptomId> present);

    std::size_t size() const noexcept { return bits_.size(); }
    bool test(SymptomId id) const { return bits_.at(id.value); }
    void set(SymptomId id, bool present = true) { bits_.at(id.value) = present; }
    std::size_t count() const noexcept;
    std::vector<SymptomId> present() const;

    /// '0'/'1' per position.
    std::string to_bitstring() const;
    static SymptomVector from_bitstring(std::string_view bits);

    bool operator==(const SymptomVector&) const = default;

private:
    std::vector<bool> bits_;
};

/// One primary diagnosis plus up to two differentials, all distinct.
/// An empty Solution means "undetermined".
class Solution {
public:
    static constexpr std::size_t kMaxDifferentials = 2;

    Solution() = default;
    /// Throws Validation when the invariants do not hold.
    explicit Solution(Diagnosis primary, std::vector<Diagnosis> differentials = {});
    static Solution from_parts(std::optional<Diagnosis> primary, std::vector<Diagnosis> differentials);

    bool empty() const noexcept { return !primary_.has_value(); }
    const std::optional<Diagnosis>& primary() const noexcept { return primary_; }
    const std::vector<Diagnosis>& differentials() const noexcept { return differentials_; }
    bool contains(Diagnosis d) const noexcept;
    /// Primary first, then differentials.
    std::vector<Diagnosis> ranked() const;

    /// "ABM;Encephalitis,Meningism" or "" for empty.
    std::string to_string() const;
    static Solution parse(std::string_view text);

    bool operator==(const Solution&) const = default;

private:
    std::optional<Diagnosis> primary_;
    std::vector<Diagnosis> differentials_;
};

/// Role- and order-sensitive equality.
inline bool solution_equal(const Solution& a, const Solution& b) { return a == b; }

struct DiagnosticCase {
    CaseId id = 0;
    SymptomVector description;
    Solution solution;
    bool success = false;

    /// Throws Validation if success is set on an empty solution.
    void validate() const;
    bool operator==(const DiagnosticCase&) const = default;
};

enum class DeltaValue : std::uint8_t { Same, AddedInCurrent, RemovedInCurrent };

/// Per-symptom difference between the current problem and a retrieved one.
class DeltaVector {
public:
    DeltaVector() = default;
    explicit DeltaVector(std::size_t size) : entries_(size, DeltaValue::Same) {}
    explicit DeltaVector(std::vector<DeltaValue> entries) : entries_(std::move(entries)) {}

    std::size_t size() const noexcept { return entries_.size(); }
    DeltaValue at(SymptomId id) const { return entries_.at(id.value); }
    void set(SymptomId id, DeltaValue v) { entries_.at(id.value) = v; }
    const std::vector<DeltaValue>& entries() const noexcept { return entries_; }

    bool is_null() const noexcept;
    /// Added and Removed exchanged.
    DeltaVector swapped() const;

    /// '=' Same, '+' AddedInCurrent, '-' RemovedInCurrent.
    std::string to_string() const;
    static DeltaVector parse(std::string_view text);

    bool operator==(const DeltaVector&) const = default;

private:
    std::vector<DeltaValue> entries_;
};

/// A stored change experience: applying `delta` to `s1` gave `s2`.
struct AdaptationCase {
    CaseId id = 0;
    DeltaVector delta;
    Solution s1;
    Solution s2;

    void validate() const;
    bool operator==(const AdaptationCase&) const = default;
};

/// Fraction of positions on which the two vectors agree.
double similarity(const SymptomVector& a, const SymptomVector& b);

std::size_t hamming(const SymptomVector& a, const SymptomVector& b);

DeltaVector delta(const SymptomVector& current, const SymptomVector& retrieved);

/// Inverse of delta(): rebuilds the current vector from the retrieved one.
SymptomVector apply_delta(const SymptomVector& retrieved, const DeltaVector& d);

} // namespace mcbr

template <>
struct std::hash<mcbr::SymptomId> {
    std::size_t operator()(const mcbr::SymptomId& id) const noexcept { return id.value; }
};
