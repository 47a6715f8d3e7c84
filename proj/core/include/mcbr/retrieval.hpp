#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "mcbr/domain.hpp"

namespace mcbr {

/// Diagnostic cases keyed by id, all bound to one catalog size.
class CaseBase {
public:
    CaseBase() = default;
    explicit CaseBase(std::size_t catalog_size) : catalog_size_(catalog_size) {}

    std::size_t catalog_size() const noexcept { return catalog_size_; }
    std::size_t size() const noexcept { return cases_.size(); }
    bool empty() const noexcept { return cases_.empty(); }

    /// Inserts a case with its own id. Throws IdCollision, CatalogMismatch or
    /// Validation.
    void insert(DiagnosticCase c);
    /// Assigns the next id (max + 1) and inserts.
    CaseId add(SymptomVector description, Solution solution, bool success);
    CaseId next_id() const noexcept;

    const DiagnosticCase* find(CaseId id) const;
    const DiagnosticCase& at(CaseId id) const;
    bool erase(CaseId id);

    /// Cases in ascending id order.
    const std::map<CaseId, DiagnosticCase>& cases() const noexcept { return cases_; }

    bool operator==(const CaseBase&) const = default;

private:
    std::size_t catalog_size_ = 0;
    std::map<CaseId, DiagnosticCase> cases_;
};

struct ScoredCase {
    CaseId case_id = 0;
    double score = 0.0;
    bool operator==(const ScoredCase&) const = default;
};

struct RetrievalResult {
    /// Descending by score, ties by ascending case id.
    std::vector<ScoredCase> ranked;
    std::size_t k = 3;
    bool operator==(const RetrievalResult&) const = default;
};

struct RetrievalOptions {
    std::size_t k = 3;
    /// Cases whose success flag is false are skipped unless set.
    bool include_failed = false;
};

/// Linear nearest-neighbour scan with equality-based local similarity.
/// Throws EmptyCaseBase when no case is eligible.
RetrievalResult retrieve(const CaseBase& base, const SymptomVector& query, const RetrievalOptions& options = {});

enum class ReuseDecision { Reuse, Adapt };

/// Reuse iff top_score >= tau_reuse (inclusive).
constexpr ReuseDecision reuse_decision(double top_score, double tau_reuse) noexcept {
    return top_score >= tau_reuse ? ReuseDecision::Reuse : ReuseDecision::Adapt;
}

} // namespace mcbr
