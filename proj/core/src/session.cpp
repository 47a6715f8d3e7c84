#include "mcbr/session.hpp"

#include <algorithm>
#include <sstream>

namespace mcbr {

void Knowledge::resolve_influential() {
    influential = catalog.has_explicit_influential() ? catalog.influential_ids() : adaptation_rules.referenced_symptoms();
}

void EngineConfig::validate() const {
    if (!(tau_reuse >= 0.0 && tau_reuse <= 1.0)) throw Error(ErrorCode::Configuration, "tau_reuse must lie in [0,1]");
    if (!(tau_adapt >= 0.0 && tau_adapt <= 1.0)) throw Error(ErrorCode::Configuration, "tau_adapt must lie in [0,1]");
    if (k == 0) throw Error(ErrorCode::Configuration, "k must be positive");
}

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
    case SessionState::New: return "new";
    case SessionState::PreDiagnosed: return "prediagnosed";
    case SessionState::AwaitingSelection: return "awaiting_selection";
    case SessionState::Solved: return "solved";
    case SessionState::Revised: return "revised";
    case SessionState::Retained: return "retained";
    }
    return "?";
}

std::string_view to_string(ProvenanceKind k) noexcept {
    switch (k) {
    case ProvenanceKind::None: return "none";
    case ProvenanceKind::PreDiagnosis: return "prediagnosis";
    case ProvenanceKind::DirectReuse: return "direct_reuse";
    case ProvenanceKind::Adapted: return "adapted";
    case ProvenanceKind::Undetermined: return "undetermined";
    }
    return "?";
}

std::size_t Session::count_events(std::string_view stage) const {
    return static_cast<std::size_t>(
        std::count_if(trace.begin(), trace.end(), [stage](const SessionEvent& e) { return e.stage == stage; }));
}

namespace {

std::string show(const Solution& s) { return s.empty() ? std::string("(undetermined)") : s.to_string(); }

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& i : items) {
        if (!out.empty()) out += ",";
        out += i;
    }
    return out;
}

[[noreturn]] void state_error(const Session& s, std::string_view op) {
    throw Error(ErrorCode::StateOrder,
                std::string(op) + " is not allowed in state " + std::string(to_string(s.state)));
}

void apply_selection(Session& session, const Knowledge& kb, std::size_t rank, const EngineConfig& config) {
    const auto& ranked = session.retrieval->ranked;
    if (rank < 1 || rank > ranked.size())
        throw Error(ErrorCode::OutOfRange,
                    "selection " + std::to_string(rank) + " outside 1.." + std::to_string(ranked.size()));

    const ScoredCase chosen = ranked[rank - 1];
    const DiagnosticCase& source = kb.cases.at(chosen.case_id);
    session.selected_rank = rank;
    session.provenance = Provenance{};
    session.provenance.source = chosen;
    session.needs_manual_diagnosis = false;

    std::ostringstream sel;
    sel << "rank " << rank << " case " << chosen.case_id << " similarity " << chosen.score;
    session.trace.push_back({"selection", sel.str()});

    const ReuseDecision decision = reuse_decision(chosen.score, config.tau_reuse);
    session.trace.push_back(
        {"reuse_decision", std::string(decision == ReuseDecision::Reuse ? "reuse" : "adapt") + " (tau_reuse " +
                               std::to_string(config.tau_reuse) + ")"});

    if (decision == ReuseDecision::Reuse || source.solution.empty()) {
        session.provenance.kind = source.solution.empty() ? ProvenanceKind::Undetermined : ProvenanceKind::DirectReuse;
        session.proposed = source.solution;
    } else {
        AdaptationOutcome outcome = adapt(delta(session.query, source.description), source.solution,
                                          kb.adaptation_cases, kb.adaptation_rules, config.tau_adapt, kb.influential);
        std::ostringstream ad;
        ad << to_string(outcome.source);
        if (outcome.reused) ad << " adaptation case " << outcome.reused->case_id << " score " << outcome.reused->score;
        if (outcome.rules) ad << " fired [" << join(outcome.rules->fired) << "]";
        ad << " " << show(outcome.s1_used) << " -> " << show(outcome.s2);
        session.trace.push_back({"adaptation", ad.str()});
        session.proposed = outcome.s2;
        session.provenance.kind = ProvenanceKind::Adapted;
        session.provenance.adaptation = std::move(outcome);
    }
    session.needs_manual_diagnosis = session.proposed.empty();
    session.state = SessionState::Solved;
    session.trace.push_back({"solved", show(session.proposed)});
}

} // namespace

Session diagnose(const Knowledge& kb, const SymptomVector& query, const EngineConfig& config, SelectionMode mode) {
    config.validate();
    if (query.size() != kb.catalog.size())
        throw Error(ErrorCode::CatalogMismatch, "query has " + std::to_string(query.size()) +
                                                    " symptoms, catalog has " + std::to_string(kb.catalog.size()));
    Session session;
    session.query = query;

    PreDiagnosisResult pre = prediagnose(kb.prediagnosis_rules, query);
    if (pre.solution) {
        session.trace.push_back(
            {"prediagnosis", "fired [" + join(pre.fired) + "] -> " + show(*pre.solution) + "; retrieval bypassed"});
        session.proposed = *pre.solution;
        session.provenance.kind = ProvenanceKind::PreDiagnosis;
        session.provenance.prediagnosis = std::move(pre);
        session.state = SessionState::PreDiagnosed;
        return session;
    }
    session.trace.push_back({"prediagnosis", "inconclusive (fired [" + join(pre.fired) + "])"});

    RetrievalOptions options;
    options.k = config.k;
    options.include_failed = config.include_failed_cases;
    try {
        session.retrieval = retrieve(kb.cases, query, options);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyCaseBase) throw;
        session.trace.push_back({"retrieval", "no retrievable cases; manual diagnosis required"});
        session.provenance.kind = ProvenanceKind::Undetermined;
        session.needs_manual_diagnosis = true;
        session.state = SessionState::Solved;
        return session;
    }
    std::ostringstream rt;
    for (std::size_t i = 0; i < session.retrieval->ranked.size(); ++i) {
        const auto& r = session.retrieval->ranked[i];
        if (i) rt << "; ";
        rt << "#" << (i + 1) << " case " << r.case_id << " " << r.score;
    }
    session.trace.push_back({"retrieval", rt.str()});

    if (mode == SelectionMode::Interactive) {
        session.state = SessionState::AwaitingSelection;
        return session;
    }
    apply_selection(session, kb, 1, config);
    return session;
}

void select(Session& session, const Knowledge& kb, std::size_t rank, const EngineConfig& config) {
    const bool reselect = session.state == SessionState::Solved && session.retrieval.has_value();
    if (session.state != SessionState::AwaitingSelection && !reselect) state_error(session, "select");
    config.validate();
    apply_selection(session, kb, rank, config);
}

void revise(Session& session, const Verdict& verdict) {
    if (session.state != SessionState::Solved && session.state != SessionState::PreDiagnosed)
        state_error(session, "revise");
    if (verdict.repaired) {
        if (verdict.repaired->empty())
            throw Error(ErrorCode::Validation, "a repaired solution must name a primary diagnosis");
        session.final_solution = *verdict.repaired;
        session.final_success = true;
    } else {
        if (verdict.success && session.proposed.empty())
            throw Error(ErrorCode::Validation, "an undetermined proposal cannot be accepted; repair it instead");
        session.final_solution = session.proposed;
        session.final_success = verdict.success;
    }
    session.verdict = verdict;
    session.state = SessionState::Revised;
    session.trace.push_back({"revise", std::string(verdict.repaired ? "repaired" : verdict.success ? "accepted" : "rejected") +
                                           " -> " + show(session.final_solution)});
}

RetainResult retain(Session& session, Knowledge& kb, bool retain_diagnostic, bool retain_adaptation) {
    if (session.state != SessionState::Revised) state_error(session, "retain");
    RetainResult result;
    if (retain_diagnostic) {
        result.case_id = kb.cases.add(session.query, session.final_solution, session.final_success);
        session.retained_case = result.case_id;
        result.notes.push_back("diagnostic case " + std::to_string(*result.case_id) + " stored");
    }
    if (retain_adaptation) {
        const auto& adaptation = session.provenance.adaptation;
        if (session.provenance.kind != ProvenanceKind::Adapted || !adaptation) {
            result.notes.push_back("adaptation not retained: no adaptation took place");
        } else if (!session.final_success || session.final_solution.empty()) {
            result.notes.push_back("adaptation not retained: solution was rejected without repair");
        } else {
            result.adaptation_case_id =
                kb.adaptation_cases.add(adaptation->delta_used, adaptation->s1_used, session.final_solution);
            session.retained_adaptation_case = result.adaptation_case_id;
            result.notes.push_back("adaptation case " + std::to_string(*result.adaptation_case_id) + " stored");
        }
    }
    for (const auto& n : result.notes) session.trace.push_back({"retain", n});
    if (result.notes.empty()) session.trace.push_back({"retain", "nothing retained"});
    session.state = SessionState::Retained;
    return result;
}

} // namespace mcbr
