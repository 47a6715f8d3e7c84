#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcbr/domain.hpp"
#include "mcbr/rules.hpp"

namespace mcbr {

class AdaptationCaseBase {
public:
    AdaptationCaseBase() = default;
    explicit AdaptationCaseBase(std::size_t catalog_size) : catalog_size_(catalog_size) {}

    std::size_t catalog_size() const noexcept { return catalog_size_; }
    std::size_t size() const noexcept { return cases_.size(); }
    bool empty() const noexcept { return cases_.empty(); }

    void insert(AdaptationCase c);
    CaseId add(DeltaVector d, Solution s1, Solution s2);
    CaseId next_id() const noexcept;

    const AdaptationCase* find(CaseId id) const;
    const std::map<CaseId, AdaptationCase>& cases() const noexcept { return cases_; }

    bool operator==(const AdaptationCaseBase&) const = default;

private:
    std::size_t catalog_size_ = 0;
    std::map<CaseId, AdaptationCase> cases_;
};

/// Share of influential positions on which both deltas carry the same value.
/// Throws Configuration if `influential` is empty.
double delta_similarity(const DeltaVector& d1, const DeltaVector& d2, std::span<const SymptomId> influential);

struct AdaptationMatch {
    CaseId case_id = 0;
    double score = 0.0;
    bool operator==(const AdaptationMatch&) const = default;
};

/// Best stored adaptation case whose s1 equals `s1` exactly (ties by lowest id).
std::optional<AdaptationMatch> retrieve_adaptation(const AdaptationCaseBase& base, const DeltaVector& d,
                                                   const Solution& s1, std::span<const SymptomId> influential);

struct RuleAdaptation {
    Solution s2;
    std::vector<TraceEntry> trace;
    std::vector<std::string> fired;
    /// Differential moved up because no primary survived the rules: the first
    /// one not demoted during the run, else the first.
    std::optional<Diagnosis> promoted_on_readback;
    /// Differentials beyond the two-slot limit, dropped on read-back.
    std::vector<Diagnosis> dropped_on_readback;
    /// Nothing survived; the outcome needs a manual diagnosis.
    bool undetermined = false;
};

/// Seeds working memory with the non-Same deltas and the roles of s1, runs the
/// adaptation rules, and reads the resulting solution back.
RuleAdaptation apply_adaptation_rules(const RuleBase& rules, const DeltaVector& d, const Solution& s1);

enum class AdaptationSource { CaseReused, RuleDerived };

std::string_view to_string(AdaptationSource s) noexcept;

struct AdaptationOutcome {
    Solution s2;
    AdaptationSource source = AdaptationSource::RuleDerived;
    /// Set when source is CaseReused.
    std::optional<AdaptationMatch> reused;
    /// Closest eligible adaptation case even when it missed the threshold.
    std::optional<AdaptationMatch> best_candidate;
    /// Set when source is RuleDerived.
    std::optional<RuleAdaptation> rules;
    DeltaVector delta_used;
    Solution s1_used;

    bool undetermined() const noexcept { return s2.empty(); }
};

/// Reuses the best adaptation case when it scores at least `tau_adapt`,
/// otherwise falls back to the adaptation rules. A null delta returns s1
/// unchanged without consulting either. Throws Precondition on an empty s1.
AdaptationOutcome adapt(const DeltaVector& d, const Solution& s1, const AdaptationCaseBase& base,
                        const RuleBase& rules, double tau_adapt, std::span<const SymptomId> influential);

} // namespace mcbr
