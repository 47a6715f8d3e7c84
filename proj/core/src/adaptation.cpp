#include "mcbr/adaptation.hpp"

#include <algorithm>

namespace mcbr {

std::string_view to_string(AdaptationSource s) noexcept {
    return s == AdaptationSource::CaseReused ? "case_reused" : "rule_derived";
}

void AdaptationCaseBase::insert(AdaptationCase c) {
    if (c.delta.size() != catalog_size_)
        throw Error(ErrorCode::CatalogMismatch, "adaptation case " + std::to_string(c.id) + " has " +
                                                    std::to_string(c.delta.size()) + " delta entries, catalog has " +
                                                    std::to_string(catalog_size_));
    c.validate();
    if (cases_.count(c.id))
        throw Error(ErrorCode::IdCollision, "adaptation case id " + std::to_string(c.id) + " already exists");
    const CaseId id = c.id;
    cases_.emplace(id, std::move(c));
}

CaseId AdaptationCaseBase::next_id() const noexcept { return cases_.empty() ? 1 : cases_.rbegin()->first + 1; }

CaseId AdaptationCaseBase::add(DeltaVector d, Solution s1, Solution s2) {
    AdaptationCase c{next_id(), std::move(d), std::move(s1), std::move(s2)};
    const CaseId id = c.id;
    insert(std::move(c));
    return id;
}

const AdaptationCase* AdaptationCaseBase::find(CaseId id) const {
    auto it = cases_.find(id);
    return it == cases_.end() ? nullptr : &it->second;
}

double delta_similarity(const DeltaVector& d1, const DeltaVector& d2, std::span<const SymptomId> influential) {
    if (influential.empty()) throw Error(ErrorCode::Configuration, "influential symptom set is empty");
    if (d1.size() != d2.size())
        throw Error(ErrorCode::CatalogMismatch, "delta vectors differ in length");
    std::size_t agree = 0;
    for (auto id : influential) {
        if (id.value >= d1.size())
            throw Error(ErrorCode::CatalogMismatch, "influential symptom " + std::to_string(id.value) + " out of range");
        if (d1.at(id) == d2.at(id)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(influential.size());
}

std::optional<AdaptationMatch> retrieve_adaptation(const AdaptationCaseBase& base, const DeltaVector& d,
                                                   const Solution& s1, std::span<const SymptomId> influential) {
    std::optional<AdaptationMatch> best;
    for (const auto& [id, c] : base.cases()) {
        if (!solution_equal(c.s1, s1)) continue;
        const double score = delta_similarity(d, c.delta, influential);
        // Ascending id iteration: strict > keeps the lowest id on ties.
        if (!best || score > best->score) best = AdaptationMatch{id, score};
    }
    return best;
}

RuleAdaptation apply_adaptation_rules(const RuleBase& rules, const DeltaVector& d, const Solution& s1) {
    if (s1.empty()) throw Error(ErrorCode::Precondition, "cannot adapt an empty solution");
    InferenceResult run = infer(rules, WorkingMemory::for_adaptation(d, s1), RuleKind::Adaptation);

    RuleAdaptation out;
    std::vector<Diagnosis> diffs = run.memory.differentials();
    std::optional<Diagnosis> primary = run.memory.primary();
    if (!primary && !diffs.empty()) {
        // A diagnosis a rule just demoted is not put straight back on top.
        auto demoted = [&](Diagnosis x) {
            return std::any_of(run.trace.begin(), run.trace.end(), [&](const TraceEntry& t) {
                return t.status == ActionStatus::Applied && t.action.kind == ActionKind::Demote && t.action.target == x;
            });
        };
        auto pick = std::find_if(diffs.begin(), diffs.end(), [&](Diagnosis x) { return !demoted(x); });
        if (pick == diffs.end()) pick = diffs.begin();
        primary = *pick;
        out.promoted_on_readback = *pick;
        diffs.erase(pick);
    }
    while (diffs.size() > Solution::kMaxDifferentials) {
        out.dropped_on_readback.push_back(diffs.back());
        diffs.pop_back();
    }
    out.s2 = Solution::from_parts(primary, std::move(diffs));
    out.undetermined = out.s2.empty();
    out.trace = std::move(run.trace);
    out.fired = std::move(run.fired);
    return out;
}

AdaptationOutcome adapt(const DeltaVector& d, const Solution& s1, const AdaptationCaseBase& base,
                        const RuleBase& rules, double tau_adapt, std::span<const SymptomId> influential) {
    if (s1.empty()) throw Error(ErrorCode::Precondition, "cannot adapt an empty solution");

    AdaptationOutcome out;
    out.delta_used = d;
    out.s1_used = s1;
    if (d.is_null()) {
        // Nothing differs, so nothing to adapt.
        out.source = AdaptationSource::RuleDerived;
        out.rules = RuleAdaptation{};
        out.rules->s2 = s1;
        out.s2 = s1;
        return out;
    }
    out.best_candidate = retrieve_adaptation(base, d, s1, influential);
    if (out.best_candidate && out.best_candidate->score >= tau_adapt) {
        out.source = AdaptationSource::CaseReused;
        out.reused = out.best_candidate;
        out.s2 = base.find(out.reused->case_id)->s2;
        return out;
    }
    out.source = AdaptationSource::RuleDerived;
    out.rules = apply_adaptation_rules(rules, d, s1);
    out.s2 = out.rules->s2;
    return out;
}

} // namespace mcbr
