#include "mcbr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mcbr {

std::string_view to_string(ExperimentKind k) noexcept {
    switch (k) {
    case ExperimentKind::Accuracy: return "accuracy";
    case ExperimentKind::Robustness: return "robustness";
    case ExperimentKind::Learning: return "learning";
    }
    return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) noexcept {
    if (s == "accuracy") return ExperimentKind::Accuracy;
    if (s == "robustness") return ExperimentKind::Robustness;
    if (s == "learning") return ExperimentKind::Learning;
    return std::nullopt;
}

namespace {

bool strict_hit(const Solution& proposed, const Solution& oracle) {
    return !oracle.empty() && proposed.primary() == oracle.primary();
}

bool lenient_hit(const Solution& proposed, const Solution& oracle) {
    return !oracle.empty() && proposed.contains(*oracle.primary());
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

CaseRecord make_record(const Session& s, CaseId query_id, const Solution& oracle) {
    CaseRecord r;
    r.query_id = query_id;
    r.proposed = s.proposed;
    r.oracle = oracle;
    r.strict_hit = strict_hit(s.proposed, oracle);
    r.lenient_hit = lenient_hit(s.proposed, oracle);
    r.provenance = s.provenance.kind;
    if (s.provenance.adaptation) r.adaptation_source = s.provenance.adaptation->source;
    return r;
}

std::vector<CaseId> choose_sample(const CaseBase& base, const ExperimentConfig& config) {
    std::vector<CaseId> ids;
    for (const auto& [id, c] : base.cases())
        if (c.success && !c.solution.empty()) ids.push_back(id);
    if (config.leave_one_out) {
        if (!config.keep_sample_in_base && ids.size() < 2)
            throw Error(ErrorCode::Configuration, "leave-one-out needs at least two labelled cases");
        return ids;
    }
    if (config.sample_size == 0) throw Error(ErrorCode::Configuration, "sample size must be positive");
    if (config.sample_size > ids.size() || (!config.keep_sample_in_base && config.sample_size >= base.size()))
        throw Error(ErrorCode::Configuration, "sample of " + std::to_string(config.sample_size) +
                                                  " does not fit a base of " + std::to_string(base.size()) +
                                                  " labelled cases");
    CaseStream stream(config.seed, 0);
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(stream.uniform() * static_cast<double>(i + 1));
        std::swap(ids[i], ids[std::min(j, i)]);
    }
    ids.resize(config.sample_size);
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Runs every sample query once with `masked` symptoms forced absent.
std::vector<CaseRecord> run_sample(Knowledge& kb, const std::vector<CaseId>& sample,
                                   const std::set<SymptomId>& masked, const ExperimentConfig& config,
                                   std::size_t iteration) {
    std::vector<DiagnosticCase> held;
    for (auto id : sample) held.push_back(kb.cases.at(id));

    auto diagnose_one = [&](const DiagnosticCase& c) {
        SymptomVector query = c.description;
        for (auto id : masked) query.set(id, false);
        Session s = diagnose(kb, query, config.engine);
        CaseRecord r = make_record(s, c.id, c.solution);
        r.iteration = iteration;
        return r;
    };

    std::vector<CaseRecord> out;
    out.reserve(held.size());
    if (config.keep_sample_in_base) {
        for (const auto& c : held) out.push_back(diagnose_one(c));
    } else if (config.leave_one_out) {
        for (const auto& c : held) {
            kb.cases.erase(c.id);
            out.push_back(diagnose_one(c));
            kb.cases.insert(c);
        }
    } else {
        for (const auto& c : held) kb.cases.erase(c.id);
        for (const auto& c : held) out.push_back(diagnose_one(c));
        for (const auto& c : held) kb.cases.insert(c);
    }
    return out;
}

void summarize_iteration0(ExperimentReport& report) {
    std::vector<Solution> oracles;
    report.hits_strict = report.hits_lenient = report.evaluated = 0;
    for (const auto& r : report.records) {
        if (r.iteration != 0) continue;
        ++report.evaluated;
        report.hits_strict += r.strict_hit;
        report.hits_lenient += r.lenient_hit;
        oracles.push_back(r.oracle);
    }
    report.accuracy = ratio(report.hits_strict, report.evaluated);
    report.accuracy_lenient = ratio(report.hits_lenient, report.evaluated);
    report.majority_baseline = majority_baseline(oracles);
}

PhaseSummary summarize_phase(const std::vector<CaseRecord>& records, std::size_t phase) {
    PhaseSummary p;
    p.phase = phase;
    std::size_t hits = 0;
    for (const auto& r : records) {
        if (r.phase != phase) continue;
        ++p.queries;
        hits += r.strict_hit;
        switch (r.provenance) {
        case ProvenanceKind::PreDiagnosis: ++p.prediagnosis; break;
        case ProvenanceKind::DirectReuse: ++p.direct_reuse; break;
        case ProvenanceKind::Adapted:
            if (r.adaptation_source == AdaptationSource::CaseReused) ++p.case_reused;
            else ++p.rule_derived;
            break;
        default: ++p.undetermined; break;
        }
    }
    p.accuracy = ratio(hits, p.queries);
    p.case_reused_fraction = ratio(p.case_reused, p.case_reused + p.rule_derived);
    return p;
}

[[noreturn]] void inconsistent(const std::string& what) {
    throw Error(ErrorCode::Validation, "experiment report is inconsistent: " + what);
}

} // namespace

double majority_baseline(const std::vector<Solution>& oracles) {
    std::array<std::size_t, kDiagnosisCount> counts{};
    for (const auto& s : oracles)
        if (!s.empty()) ++counts[index_of(*s.primary())];
    if (oracles.empty()) return 0.0;
    return ratio(*std::max_element(counts.begin(), counts.end()), oracles.size());
}

void ExperimentReport::check_consistency() const {
    ExperimentReport copy = *this;
    if (kind == ExperimentKind::Learning) {
        std::size_t hs = 0, hl = 0;
        std::vector<Solution> oracles;
        for (const auto& r : records) {
            hs += r.strict_hit;
            hl += r.lenient_hit;
            oracles.push_back(r.oracle);
        }
        if (hs != hits_strict || hl != hits_lenient || records.size() != evaluated) inconsistent("hit counts");
        if (accuracy != ratio(hs, records.size()) || accuracy_lenient != ratio(hl, records.size()))
            inconsistent("accuracy");
        if (majority_baseline != mcbr::majority_baseline(oracles)) inconsistent("majority baseline");
        for (const auto& p : phases) {
            PhaseSummary again = summarize_phase(records, p.phase);
            again.case_base_size = p.case_base_size;
            again.adaptation_base_size = p.adaptation_base_size;
            if (!(again == p)) inconsistent("phase " + std::to_string(p.phase));
        }
    } else {
        summarize_iteration0(copy);
        if (copy.hits_strict != hits_strict || copy.hits_lenient != hits_lenient || copy.evaluated != evaluated ||
            copy.accuracy != accuracy || copy.accuracy_lenient != accuracy_lenient ||
            copy.majority_baseline != majority_baseline)
            inconsistent("iteration-0 aggregates");
        for (const auto& r : records) {
            if (r.strict_hit != strict_hit(r.proposed, r.oracle) || r.lenient_hit != lenient_hit(r.proposed, r.oracle))
                inconsistent("hit flag of query " + std::to_string(r.query_id));
        }
        for (const auto& point : curve) {
            std::size_t n = 0, hs = 0, hl = 0;
            for (const auto& r : records) {
                if (r.iteration != point.iteration) continue;
                ++n;
                hs += r.strict_hit;
                hl += r.lenient_hit;
            }
            if (n != point.cases || ratio(hs, n) != point.accuracy || ratio(hl, n) != point.accuracy_lenient)
                inconsistent("curve point " + std::to_string(point.iteration));
        }
    }
}

ExperimentReport accuracy_experiment(const Knowledge& kb, const ExperimentConfig& config) {
    config.engine.validate();
    Knowledge work = kb;
    ExperimentReport report;
    report.kind = ExperimentKind::Accuracy;
    report.config = config;
    report.sample_ids = choose_sample(work.cases, config);
    report.records = run_sample(work, report.sample_ids, {}, config, 0);
    summarize_iteration0(report);
    report.curve.push_back({0, std::nullopt, report.accuracy, report.accuracy_lenient, report.evaluated});
    report.reference_accuracy = 0.97;
    report.reference_sample_size = 30;
    return report;
}

ExperimentReport robustness_experiment(const Knowledge& kb, const ExperimentConfig& config) {
    config.engine.validate();
    for (auto id : config.removal_schedule)
        if (id.value >= kb.catalog.size())
            throw Error(ErrorCode::Configuration, "removal schedule names symptom " + std::to_string(id.value) +
                                                      " outside the catalog");
    Knowledge work = kb;
    ExperimentReport report;
    report.kind = ExperimentKind::Robustness;
    report.config = config;
    report.sample_ids = choose_sample(work.cases, config);

    std::set<SymptomId> masked;
    for (std::size_t iteration = 0; iteration <= config.removal_schedule.size(); ++iteration) {
        std::optional<SymptomId> removed;
        if (iteration > 0) {
            removed = config.removal_schedule[iteration - 1];
            masked.insert(*removed);
        }
        auto records = run_sample(work, report.sample_ids, masked, config, iteration);
        std::size_t hs = 0, hl = 0;
        for (const auto& r : records) {
            hs += r.strict_hit;
            hl += r.lenient_hit;
        }
        report.curve.push_back({iteration, removed, ratio(hs, records.size()), ratio(hl, records.size()), records.size()});
        report.records.insert(report.records.end(), records.begin(), records.end());
    }
    summarize_iteration0(report);
    report.reference_plateau = 0.80;
    return report;
}

ExperimentReport learning_experiment(const Knowledge& kb, const std::vector<std::vector<LabeledQuery>>& phases,
                                     const ExperimentConfig& config) {
    config.engine.validate();
    Knowledge work = kb;
    ExperimentReport report;
    report.kind = ExperimentKind::Learning;
    report.config = config;

    for (std::size_t p = 0; p < phases.size(); ++p) {
        for (const auto& q : phases[p]) {
            Session s = diagnose(work, q.description, config.engine);
            CaseRecord r = make_record(s, q.id, q.oracle);
            r.phase = p + 1;
            Verdict verdict;
            verdict.success = r.strict_hit;
            if (!r.strict_hit && !q.oracle.empty()) verdict.repaired = q.oracle;
            revise(s, verdict);
            retain(s, work, config.retain_diagnostic, config.retain_adaptation);
            report.records.push_back(std::move(r));
        }
        PhaseSummary summary = summarize_phase(report.records, p + 1);
        summary.case_base_size = work.cases.size();
        summary.adaptation_base_size = work.adaptation_cases.size();
        report.phases.push_back(summary);
    }

    std::vector<Solution> oracles;
    for (const auto& r : report.records) {
        report.hits_strict += r.strict_hit;
        report.hits_lenient += r.lenient_hit;
        oracles.push_back(r.oracle);
    }
    report.evaluated = report.records.size();
    report.accuracy = ratio(report.hits_strict, report.evaluated);
    report.accuracy_lenient = ratio(report.hits_lenient, report.evaluated);
    report.majority_baseline = majority_baseline(oracles);
    return report;
}

std::vector<SymptomId> default_removal_schedule(const SymptomCatalog& catalog) {
    static const char* const kOrder[] = {
        "csf_crystalline_aspect", "bacteria_in_csf",       "koch_bacillus",         "haemocultivation_with_bacteria",
        "hydrocephaly_in_ecography", "tumors_in_tomography", "hypertense_fontanelle", "cervical_adenopathies",
        "muscular_hypotonicity",  "facial_paralysis",      "trunk_stiffness",       "nape_stiffness",
    };
    std::vector<SymptomId> out;
    for (const char* name : kOrder)
        if (auto id = catalog.find(name)) out.push_back(*id);
    return out;
}

CaseBase synthetic_case_base(const SymptomCatalog& catalog, const ProbabilityTable& table,
                             const GeneratorConfig& config) {
    if (table.symptom_count() != catalog.size())
        throw Error(ErrorCode::CatalogMismatch, "probability table and catalog sizes differ");
    const CullResult culled = cull(generate(table, config), default_predicates(catalog));
    CaseBase base(catalog.size());
    for (const auto& c : culled.kept) base.add(c.description, oracle_label(table, c.description), true);
    return base;
}

std::vector<std::vector<LabeledQuery>> synthetic_stream(const SymptomCatalog& catalog, const ProbabilityTable& table,
                                                        std::size_t phases, std::size_t per_phase,
                                                        std::uint64_t seed, bool repeat_first) {
    std::vector<std::vector<LabeledQuery>> out;
    if (phases == 0 || per_phase == 0) return out;
    GeneratorConfig gen;
    // Offset so a stream never replays the base generated from the same seed.
    gen.seed = seed ^ kStreamSeedSalt;
    gen.n_cases = repeat_first ? per_phase : phases * per_phase;
    const CullResult culled = cull(generate(table, gen), default_predicates(catalog));

    std::vector<LabeledQuery> all;
    CaseId next = 1;
    for (const auto& c : culled.kept) all.push_back({next++, c.description, oracle_label(table, c.description)});

    if (repeat_first) {
        out.push_back(all);
        for (std::size_t p = 1; p < phases; ++p) {
            std::vector<LabeledQuery> copy = all;
            CaseStream stream(seed, p);
            for (std::size_t i = copy.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(stream.uniform() * static_cast<double>(i));
                std::swap(copy[i - 1], copy[std::min(j, i - 1)]);
            }
            out.push_back(std::move(copy));
        }
        return out;
    }
    // Culling removes a few cases; split what is left as evenly as possible.
    const std::size_t n = all.size();
    for (std::size_t p = 0; p < phases; ++p) {
        const std::size_t begin = p * n / phases;
        const std::size_t end = (p + 1) * n / phases;
        out.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(begin), all.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

} // namespace mcbr
