#pragma once

#include <array>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcbr/domain.hpp"

namespace mcbr {

enum class Role : std::uint8_t { Primary, Differential };

std::string_view to_string(Role r) noexcept;

struct SymptomPresent {
    SymptomId symptom;
    auto operator<=>(const SymptomPresent&) const = default;
};

/// Only AddedInCurrent and RemovedInCurrent are ever asserted; Same
/// positions produce no fact.
struct DeltaIs {
    SymptomId symptom;
    DeltaValue change = DeltaValue::AddedInCurrent;
    auto operator<=>(const DeltaIs&) const = default;
};

struct HasRole {
    Diagnosis diagnosis;
    Role role;
    auto operator<=>(const HasRole&) const = default;
};

struct Discarded {
    Diagnosis diagnosis;
    auto operator<=>(const Discarded&) const = default;
};

using Fact = std::variant<SymptomPresent, DeltaIs, HasRole, Discarded>;

enum class RuleKind : std::uint8_t { PreDiagnosis, Adaptation };

enum class ActionKind : std::uint8_t { AssertPrimary, AssertDifferential, Discard, Demote, Promote };

std::string_view to_string(ActionKind k) noexcept;

struct Action {
    ActionKind kind;
    Diagnosis target;
    bool operator==(const Action&) const = default;
};

/// A pattern that must match a fact. Positive conditions are matched against
/// the current working memory; negated ones against the seed memory.
struct Condition {
    Fact pattern;
    bool negated = false;
    bool operator==(const Condition&) const = default;
};

struct Rule {
    std::string id;
    RuleKind kind = RuleKind::PreDiagnosis;
    std::vector<Condition> conditions;
    std::vector<Action> actions;
    int order = 0;

    /// Throws Validation if the rule breaks the kind/condition constraints.
    void validate() const;
    bool operator==(const Rule&) const = default;
};

class RuleBase {
public:
    RuleBase() = default;
    explicit RuleBase(std::vector<Rule> rules);

    /// Appends a rule; assigns `order` after the current last rule when the
    /// rule's order is not larger. Throws Validation on a duplicate id.
    void add(Rule rule);
    void merge(const RuleBase& other);

    const std::vector<Rule>& rules() const noexcept { return rules_; }
    std::size_t size() const noexcept { return rules_.size(); }
    bool empty() const noexcept { return rules_.empty(); }
    std::size_t count(RuleKind kind) const noexcept;

    /// Symptom ids tested by any adaptation rule condition, ascending.
    std::vector<SymptomId> referenced_symptoms() const;

    bool operator==(const RuleBase&) const = default;

private:
    std::vector<Rule> rules_;
};

enum class ActionStatus : std::uint8_t { Applied, Skipped };

struct ActionOutcome {
    ActionStatus status = ActionStatus::Applied;
    /// Former primary moved to differential by an assert/promote.
    std::optional<Diagnosis> displaced;
    std::string note;
};

/// Fact set with the role/discard exclusivity invariants enforced on every
/// mutation. Differential order is kept for solution read-back.
class WorkingMemory {
public:
    WorkingMemory() = default;

    static WorkingMemory from_symptoms(const SymptomVector& symptoms);
    /// DeltaIs facts for every non-Same position plus HasRole facts for s1.
    static WorkingMemory for_adaptation(const DeltaVector& d, const Solution& s1);

    /// Throws Precondition when the fact would break an invariant.
    void insert(const Fact& fact);
    bool contains(const Fact& fact) const;
    /// All facts in canonical (sorted) order.
    std::vector<Fact> facts() const;
    std::size_t size() const;

    std::optional<Diagnosis> primary() const noexcept { return primary_; }
    const std::vector<Diagnosis>& differentials() const noexcept { return differentials_; }
    bool discarded(Diagnosis d) const noexcept { return discarded_[index_of(d)]; }

    ActionOutcome apply(const Action& action);

    /// Throws if any invariant is violated; used by tests after each step.
    void check_invariants() const;

    bool operator==(const WorkingMemory&) const = default;

private:
    void demote_primary_into_differentials();

    std::set<SymptomId> present_;
    std::set<DeltaIs> deltas_;
    std::optional<Diagnosis> primary_;
    std::vector<Diagnosis> differentials_;
    std::array<bool, kDiagnosisCount> discarded_{};
};

struct TraceEntry {
    std::string rule_id;
    Action action;
    ActionStatus status = ActionStatus::Applied;
    std::optional<Diagnosis> displaced;
    std::string note;
};

struct InferenceResult {
    WorkingMemory memory;
    std::vector<TraceEntry> trace;
    /// Rule ids in firing order; each at most once.
    std::vector<std::string> fired;
};

/// Forward chaining to fixpoint. Scans rules in file order, fires the first
/// enabled rule that has not fired yet, then rescans from the top. Each rule
/// fires at most once, so the run ends after at most |rules| firings.
/// `only` restricts the run to one rule kind.
InferenceResult infer(const RuleBase& rules, WorkingMemory memory, std::optional<RuleKind> only = std::nullopt);

/// True when every condition of `rule` holds.
bool rule_enabled(const Rule& rule, const WorkingMemory& current, const WorkingMemory& seed);

struct PreDiagnosisResult {
    std::optional<Solution> solution;
    std::vector<TraceEntry> trace;
    std::vector<std::string> fired;
    /// Distinct primaries asserted by fired rules.
    std::vector<Diagnosis> asserted_primaries;
};

/// Runs the pre-diagnosis rules. A solution is produced only when at least one
/// rule fired and the fired rules agree on a single primary diagnosis.
PreDiagnosisResult prediagnose(const RuleBase& rules, const SymptomVector& symptoms);

/// Parses the rule DSL. One rule per line, `#` starts a comment:
///
///   [label:] PREDIAG IF present(s) [AND absent(s)]* THEN primary(dx) [AND differential(dx)]*
///   [label:] ADAPT IF added(s)|removed(s)|role(dx,primary|differential) [AND ...]*
///            THEN discard(dx)|demote(dx)|promote(dx)|differential(dx)|primary(dx) [AND ...]*
///
/// Any condition may be prefixed by `not`. Unlabelled rules get the id
/// "<source>.<line>" (`source` defaults to "rules"). Throws Error{Parse}
/// with the 1-based line number.
RuleBase parse_rules(std::string_view text, const SymptomCatalog& catalog, std::string_view source = "rules");

/// Inverse of parse_rules (labels always emitted).
std::string format_rules(const RuleBase& rules, const SymptomCatalog& catalog);

} // namespace mcbr
