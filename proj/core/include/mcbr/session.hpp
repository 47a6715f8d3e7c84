#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcbr/adaptation.hpp"
#include "mcbr/domain.hpp"
#include "mcbr/retrieval.hpp"
#include "mcbr/rules.hpp"

namespace mcbr {

/// Everything a diagnosis episode reads, and what retain() writes to.
struct Knowledge {
    SymptomCatalog catalog;
    CaseBase cases;
    AdaptationCaseBase adaptation_cases;
    RuleBase prediagnosis_rules;
    RuleBase adaptation_rules;
    /// Symptoms scored by adaptation-case similarity.
    std::vector<SymptomId> influential;

    /// Uses the catalog's explicit influential flags when any are set,
    /// otherwise the symptoms referenced by the adaptation rules.
    void resolve_influential();
};

struct EngineConfig {
    double tau_reuse = 0.95;
    double tau_adapt = 0.90;
    std::size_t k = 3;
    bool include_failed_cases = false;

    void validate() const;
    bool operator==(const EngineConfig&) const = default;
};

enum class SessionState { New, PreDiagnosed, AwaitingSelection, Solved, Revised, Retained };

std::string_view to_string(SessionState s) noexcept;

enum class ProvenanceKind { None, PreDiagnosis, DirectReuse, Adapted, Undetermined };

std::string_view to_string(ProvenanceKind k) noexcept;

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::None;
    std::optional<PreDiagnosisResult> prediagnosis;
    /// Retrieved case the solution was derived from.
    std::optional<ScoredCase> source;
    std::optional<AdaptationOutcome> adaptation;
};

struct Verdict {
    bool success = true;
    std::optional<Solution> repaired;
};

/// One pipeline step, in order.
struct SessionEvent {
    std::string stage;
    std::string detail;
};

struct Session {
    std::string id;
    SymptomVector query;
    SessionState state = SessionState::New;

    std::optional<RetrievalResult> retrieval;
    std::optional<std::size_t> selected_rank;
    Provenance provenance;
    Solution proposed;
    bool needs_manual_diagnosis = false;

    std::optional<Verdict> verdict;
    Solution final_solution;
    bool final_success = false;

    std::optional<CaseId> retained_case;
    std::optional<CaseId> retained_adaptation_case;

    std::vector<SessionEvent> trace;

    std::size_t count_events(std::string_view stage) const;
};

enum class SelectionMode {
    /// Rank 1 is selected and the session ends Solved.
    Auto,
    /// The session stops in AwaitingSelection after retrieval.
    Interactive,
};

/// Pre-diagnosis, then retrieval, selection and reuse/adapt.
Session diagnose(const Knowledge& kb, const SymptomVector& query, const EngineConfig& config,
                 SelectionMode mode = SelectionMode::Auto);

/// Picks a retrieved candidate (1-based rank) and reruns reuse/adapt against
/// it. Allowed while awaiting selection and on a retrieval-solved session that
/// has not been revised.
void select(Session& session, const Knowledge& kb, std::size_t rank, const EngineConfig& config);

/// Records the user's verdict. A repair replaces the proposal and counts as a
/// success.
void revise(Session& session, const Verdict& verdict);

struct RetainResult {
    std::optional<CaseId> case_id;
    std::optional<CaseId> adaptation_case_id;
    std::vector<std::string> notes;
};

/// Stores the revised episode. The adaptation case is only learned from an
/// adapted session whose final solution was accepted or repaired.
RetainResult retain(Session& session, Knowledge& kb, bool retain_diagnostic, bool retain_adaptation);

} // namespace mcbr
