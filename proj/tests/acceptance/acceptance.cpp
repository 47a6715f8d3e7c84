// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Every limit and tolerance is fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "support.hpp"

using namespace mcbr;
using namespace mcbr::test;
namespace fs = std::filesystem;

namespace {

// Pinned limits.
constexpr double kRulesLimitS = 1.0;
constexpr double kRetrievalLimitS = 10.0;
constexpr double kEngineLimitS = 5.0;
constexpr double kAdaptationLimitS = 10.0;
constexpr double kLearningLimitS = 1.0;
constexpr double kGeneratorLimitS = 30.0;
constexpr double kOracleLimitS = 5.0;
constexpr double kAccuracyLimitS = 60.0;
constexpr double kRobustnessLimitS = 120.0;
constexpr double kStoreLimitS = 120.0;

constexpr std::size_t kRetrievalInstances = 1000;
constexpr std::size_t kRetrievalMaxBase = 500;
constexpr std::size_t kRandomRulebases = 100;
constexpr std::size_t kNullDeltaSolutions = 1000;
constexpr std::size_t kMaxExhaustiveRules = 5;
constexpr std::size_t kGeneratorPerDisease = 10000;
constexpr double kGeneratorSigmas = 4.0;
constexpr double kOracleTolerance = 1e-9;
constexpr std::size_t kAccuracyBase = 200;
constexpr double kAccuracyMargin = 0.10;
constexpr std::size_t kMinRobustnessIterations = 8;

/// Collects failures for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    void note(std::string n) { notes_.push_back(std::move(n)); }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::ostringstream os;
        os << checks_ << " checks";
        if (failed_) os << ", " << failed_ << " failed";
        for (const auto& n : notes_) os << "; " << n;
        for (const auto& f : failures_) os << "\n      failed: " << f;
        return os.str();
    }

private:
    std::size_t checks_ = 0, failed_ = 0;
    std::vector<std::string> failures_, notes_;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << x;
    return os.str();
}

SymptomVector with(const SymptomCatalog& cat, std::initializer_list<const char*> names) {
    SymptomVector v(cat.size());
    for (auto n : names) v.set(cat.id(n));
    return v;
}

DeltaVector added(const SymptomCatalog& cat, const char* name) {
    DeltaVector d(cat.size());
    d.set(cat.id(name), DeltaValue::AddedInCurrent);
    return d;
}

/// Oracle-labelled base of exactly `size` cases, ids 1..size.
const Knowledge& desk_kb() {
    static const Knowledge kb = [] {
        Knowledge k = shipped_rules_only();
        GeneratorConfig gen;
        gen.seed = 1;
        gen.n_cases = kAccuracyBase + kAccuracyBase / 10;
        CaseBase all = synthetic_case_base(k.catalog, shipped_table(), gen);
        CaseBase base(k.catalog.size());
        for (const auto& [id, c] : all.cases())
            if (id <= kAccuracyBase) base.insert(c);
        k.cases = std::move(base);
        return k;
    }();
    return kb;
}

// ---------------------------------------------------------------------------

void rule_reproduction(Check& c) {
    Knowledge kb = shipped_rules_only();
    const auto& cat = kb.catalog;
    kb.cases.add(with(cat, {"fever"}), Solution(Diagnosis::Meningism), true);

    const Session s = diagnose(kb, with(cat, {"fever", "csf_cloudy_aspect"}), EngineConfig{});
    c.expect(s.state == SessionState::PreDiagnosed, "cloudy CSF session is pre-diagnosed");
    c.expect(s.provenance.kind == ProvenanceKind::PreDiagnosis, "provenance is pre-diagnosis");
    c.expect(s.proposed.primary() == Diagnosis::ABM, "cloudy CSF proposes ABM");
    c.expect(!s.retrieval && s.count_events("retrieval") == 0, "retrieval bypassed");

    for (const Solution& s1 : {Solution(Diagnosis::ABM), Solution(Diagnosis::ABM, {Diagnosis::Encephalitis}),
                               Solution(Diagnosis::Meningism, {Diagnosis::ABM})}) {
        const auto r = apply_adaptation_rules(kb.adaptation_rules, added(cat, "koch_bacillus"), s1);
        c.expect(!r.s2.contains(Diagnosis::ABM), "Koch removes ABM from " + s1.to_string());
        c.expect(std::find(r.fired.begin(), r.fired.end(), "koch_discards_abm") != r.fired.end(),
                 "koch rule fired for " + s1.to_string());
    }
    for (const Solution& s1 : {Solution(Diagnosis::ABM), Solution(Diagnosis::ABM, {Diagnosis::Encephalitis}),
                               Solution(Diagnosis::ABM, {Diagnosis::Encephalitis, Diagnosis::Meningism})}) {
        const auto r = apply_adaptation_rules(kb.adaptation_rules, added(cat, "csf_crystalline_aspect"), s1);
        const auto& d = r.s2.differentials();
        c.expect(r.s2.primary() != Diagnosis::ABM, "crystalline ABM no longer primary for " + s1.to_string());
        c.expect(std::find(d.begin(), d.end(), Diagnosis::ABM) != d.end(),
                 "crystalline ABM differential for " + s1.to_string());
    }
    c.expect(apply_adaptation_rules(kb.adaptation_rules, added(cat, "csf_crystalline_aspect"),
                                    Solution(Diagnosis::ABM, {Diagnosis::Encephalitis}))
                     .s2 == Solution(Diagnosis::Encephalitis, {Diagnosis::ABM}),
             "crystalline exact outcome");
}

void retrieval_equivalence(Check& c) {
    Rng rng(20240601);
    std::size_t largest = 0;
    for (std::size_t t = 0; t < kRetrievalInstances; ++t) {
        // Mix wide vectors with short ones that force ties.
        const std::size_t n = coin(rng, 0.5) ? 81 : 1 + pick(rng, 12);
        const std::size_t size = 1 + pick(rng, kRetrievalMaxBase);
        largest = std::max(largest, size);
        CaseBase base(n);
        for (std::size_t i = 0; i < size; ++i)
            base.add(random_vector(rng, n, 0.1 + 0.8 * coin(rng)), random_solution(rng), coin(rng, 0.9));
        const SymptomVector q = random_vector(rng, n);
        const auto want = oracle::retrieval(base, q, 3, false);
        if (want.empty()) {
            bool threw = false;
            try {
                retrieve(base, q);
            } catch (const Error& e) {
                threw = e.code() == ErrorCode::EmptyCaseBase;
            }
            c.expect(threw, "empty eligible base throws");
            continue;
        }
        c.expect(retrieve(base, q).ranked == want, "instance " + std::to_string(t));
    }
    c.note(std::to_string(kRetrievalInstances) + " instances, largest base " + std::to_string(largest));
}

void engine_determinism(Check& c) {
    Rng rng(99);
    std::size_t total_fired = 0;
    for (std::size_t t = 0; t < kRandomRulebases; ++t) {
        const RuleBase rb = random_rulebase(rng, 1 + pick(rng, 20), 8);
        const WorkingMemory seed = coin(rng) ? WorkingMemory::for_adaptation(random_delta(rng, 8), random_solution(rng))
                                             : WorkingMemory::from_symptoms(random_vector(rng, 8));
        const auto a = infer(rb, seed);
        const auto b = infer(rb, seed);
        c.expect(a.memory == b.memory && a.fired == b.fired && trace_equal(a.trace, b.trace),
                 "rulebase " + std::to_string(t) + " deterministic");
        c.expect(a.fired.size() <= rb.size(), "rulebase " + std::to_string(t) + " refraction bound");
        std::set<std::string> unique(a.fired.begin(), a.fired.end());
        c.expect(unique.size() == a.fired.size(), "each rule fires at most once");
        bool invariants = true;
        try {
            a.memory.check_invariants();
        } catch (const Error&) {
            invariants = false;
        }
        c.expect(invariants, "memory invariants");
        total_fired += a.fired.size();
    }
    c.note(std::to_string(kRandomRulebases) + " rulebases, " + std::to_string(total_fired) + " firings");
}

void adaptation_algebra(Check& c) {
    const Knowledge kb = shipped_rules_only();
    Rng rng(5);
    for (std::size_t t = 0; t < kNullDeltaSolutions; ++t) {
        const Solution s1 = random_solution(rng);
        const auto out = adapt(DeltaVector(kb.catalog.size()), s1, kb.adaptation_cases, kb.adaptation_rules, 0.9,
                               kb.influential);
        c.expect(out.s2 == s1, "null delta keeps " + s1.to_string());
        c.expect(apply_adaptation_rules(kb.adaptation_rules, DeltaVector(kb.catalog.size()), s1).s2 == s1,
                 "shipped rules ignore a null delta");
    }

    const SymptomCatalog cat2 = numbered_catalog(2);
    const std::vector<std::string> pool = {
        "p0: ADAPT IF added(s0) THEN discard(ABM)",
        "p1: ADAPT IF role(ABM,primary) AND added(s1) THEN demote(ABM)",
        "p2: ADAPT IF added(s1) AND not role(TuberculousMeningitis,primary) THEN differential(TuberculousMeningitis)",
        "p3: ADAPT IF removed(s0) THEN primary(Encephalitis)",
        "p4: ADAPT IF role(Encephalitis,differential) THEN promote(Encephalitis)",
        "p5: ADAPT IF not added(s1) AND role(ABM,differential) THEN primary(ABM) AND differential(Meningism)",
    };
    const std::vector<Solution> s1s = {
        Solution(Diagnosis::ABM),
        Solution(Diagnosis::ABM, {Diagnosis::Encephalitis}),
        Solution(Diagnosis::Encephalitis, {Diagnosis::ABM}),
        Solution(Diagnosis::TuberculousMeningitis, {Diagnosis::ABM, Diagnosis::Encephalitis}),
        Solution(Diagnosis::Meningism, {Diagnosis::Encephalitis}),
        Solution(Diagnosis::BrainTumor, {Diagnosis::ABM, Diagnosis::Meningism}),
    };
    std::vector<DeltaVector> deltas;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) deltas.push_back(DeltaVector({static_cast<DeltaValue>(a), static_cast<DeltaValue>(b)}));

    std::size_t rulebases = 0, compared = 0;
    std::vector<std::size_t> chosen;
    std::function<void()> walk = [&] {
        if (!chosen.empty()) {
            std::string text;
            for (auto i : chosen) text += pool[i] + "\n";
            const RuleBase rb = parse_rules(text, cat2);
            ++rulebases;
            for (const auto& d : deltas)
                for (const auto& s1 : s1s) {
                    const auto got = apply_adaptation_rules(rb, d, s1);
                    const auto want = oracle::AdaptationSimulator::run(rb, d, s1);
                    c.expect(got.s2 == want.s2 && got.fired == want.fired, text + " delta " + d.to_string());
                    ++compared;
                }
        }
        if (chosen.size() == kMaxExhaustiveRules) return;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            chosen.push_back(i);
            walk();
            chosen.pop_back();
        }
    };
    walk();
    c.note(std::to_string(rulebases) + " ordered rulebases, " + std::to_string(compared) + " comparisons");
}

void learning_loop(Check& c) {
    const Knowledge& base = desk_kb();
    const auto stream = synthetic_stream(base.catalog, shipped_table(), 1, 60, 11, false);
    std::size_t adapted = 0, direct = 0;
    for (const auto& q : stream.at(0)) {
        const Session first = diagnose(base, q.description, EngineConfig{});
        if (first.provenance.kind == ProvenanceKind::PreDiagnosis) continue;

        if (first.provenance.adaptation && first.provenance.adaptation->source == AdaptationSource::RuleDerived &&
            !first.proposed.empty()) {
            Knowledge kb = base;
            Session s = first;
            revise(s, Verdict{});
            const auto r = retain(s, kb, false, true);
            const Session replay = diagnose(kb, q.description, EngineConfig{});
            const auto& ad = replay.provenance.adaptation;
            c.expect(r.adaptation_case_id.has_value(), "adaptation case stored");
            c.expect(ad && ad->source == AdaptationSource::CaseReused, "replay reuses the adaptation case");
            c.expect(ad && ad->reused && ad->reused->score == 1.0, "delta similarity 1.0");
            c.expect(replay.proposed == first.proposed, "identical s2");
            ++adapted;
        }

        Knowledge kb = base;
        Session s = first;
        revise(s, first.proposed.empty() ? Verdict{true, q.oracle} : Verdict{});
        const auto r = retain(s, kb, true, false);
        const Session replay = diagnose(kb, q.description, EngineConfig{});
        c.expect(replay.provenance.kind == ProvenanceKind::DirectReuse, "replay is a direct reuse");
        c.expect(replay.provenance.source && replay.provenance.source->case_id == r.case_id &&
                     replay.provenance.source->score == 1.0,
                 "retrieved the retained case at similarity 1.0");
        ++direct;
    }
    c.expect(adapted > 0, "at least one rule-derived adaptation in the stream");
    c.note(std::to_string(adapted) + " adaptation replays, " + std::to_string(direct) + " diagnostic replays");
}

void generator_statistics(Check& c) {
    const auto& table = shipped_table();
    GeneratorConfig cfg;
    cfg.n_cases = kGeneratorPerDisease;
    cfg.seed = 2025;
    double worst = 0.0;
    std::string first_dump;
    for (auto d : kAllDiagnoses) {
        const auto cases = generate_for(table, d, cfg);
        std::vector<std::size_t> hits(table.symptom_count(), 0);
        for (const auto& gc : cases)
            for (std::uint32_t s = 0; s < table.symptom_count(); ++s) hits[s] += gc.description.test(SymptomId{s});
        for (std::uint32_t s = 0; s < table.symptom_count(); ++s) {
            const double p = table.conditional(d, SymptomId{s});
            const double f = static_cast<double>(hits[s]) / static_cast<double>(cfg.n_cases);
            const double bound = kGeneratorSigmas * std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.n_cases));
            c.expect(std::abs(f - p) <= bound, std::string(to_string(d)) + " symptom " + std::to_string(s));
            if (bound > 0) worst = std::max(worst, std::abs(f - p) / (bound / kGeneratorSigmas));
        }
    }
    // Byte-exact determinism of the serialised base.
    GeneratorConfig gen;
    gen.seed = 7;
    gen.n_cases = 2000;
    const std::string a = format_case_file(synthetic_case_base(shipped_catalog(), table, gen));
    const std::string b = format_case_file(synthetic_case_base(shipped_catalog(), table, gen));
    c.expect(a == b, "same seed gives identical bytes");
    gen.seed = 8;
    c.expect(format_case_file(synthetic_case_base(shipped_catalog(), table, gen)) != a, "other seed differs");
    c.note("worst deviation " + fmt(worst, 2) + " sigma");
}

void oracle_equivalence(Check& c) {
    Rng rng(31337);
    std::size_t tables = 0;
    double worst = 0.0;
    for (std::size_t diseases = 1; diseases <= 3; ++diseases)
        for (std::size_t n = 1; n <= 4; ++n)
            for (int t = 0; t < 150; ++t) {
                // Random disease subset, random priors, conditionals including 0 and 1.
                std::vector<Diagnosis> pool(kAllDiagnoses.begin(), kAllDiagnoses.end());
                std::shuffle(pool.begin(), pool.end(), rng);
                ProbabilityTable table(n);
                double left = 1.0;
                for (std::size_t i = 0; i < diseases; ++i) {
                    const double p = i + 1 == diseases ? left : left * (0.1 + 0.8 * coin(rng));
                    left -= p;
                    table.set_prior(pool[i], p);
                    for (std::uint32_t s = 0; s < n; ++s) {
                        double v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                        if (coin(rng, 0.2)) v = coin(rng) ? 0.0 : 1.0;
                        if (t % 25 == 0) v = 0.5; // ties
                        table.set_conditional(pool[i], SymptomId{s}, v);
                    }
                }
                ++tables;
                for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                    SymptomVector v(n);
                    for (std::uint32_t s = 0; s < n; ++s) v.set(SymptomId{s}, (mask >> s) & 1u);
                    const auto got = log_posteriors(table, v);
                    const auto want = oracle::posterior(table, v, kOracleFloor);
                    for (std::size_t i = 0; i < kDiagnosisCount; ++i) {
                        c.expect(got[i].has_value() == want.log_score[i].has_value(), "score presence");
                        if (got[i] && want.log_score[i]) {
                            const double diff = std::abs(*got[i] - *want.log_score[i]);
                            worst = std::max(worst, diff);
                            c.expect(diff <= kOracleTolerance, "log posterior within tolerance");
                        }
                    }
                    c.expect(oracle_label(table, v) == want.label, "label");
                }
            }
    std::ostringstream os;
    os << tables << " tables, worst |diff| " << std::scientific << std::setprecision(1) << worst;
    c.note(os.str());
}

void accuracy(Check& c) {
    const Knowledge& kb = desk_kb();
    c.expect(kb.cases.size() == kAccuracyBase, "base has " + std::to_string(kAccuracyBase) + " cases");
    ExperimentConfig cfg;
    cfg.leave_one_out = true;
    const auto r = accuracy_experiment(kb, cfg);
    c.expect(r.evaluated == kAccuracyBase, "every case evaluated");
    c.expect(r.accuracy >= r.majority_baseline + kAccuracyMargin, "margin over the majority baseline");
    cfg.keep_sample_in_base = true;
    const auto twin = accuracy_experiment(kb, cfg);
    c.expect(twin.accuracy == 1.0, "exact-twin run is 100%");
    c.expect(r.reference_accuracy.has_value(), "reference figure carried in the report");
    c.note("strict " + fmt(r.accuracy) + " vs baseline " + fmt(r.majority_baseline) + ", twin " + fmt(twin.accuracy));
}

void robustness(Check& c) {
    const Knowledge& kb = desk_kb();
    ExperimentConfig cfg;
    cfg.leave_one_out = true;
    cfg.removal_schedule = default_removal_schedule(kb.catalog);
    const auto r = robustness_experiment(kb, cfg);
    c.expect(r.curve.size() >= kMinRobustnessIterations, "at least 8 iterations");
    c.expect(!r.curve.empty() && r.curve.front().accuracy >= r.curve.back().accuracy, "iteration 0 >= final");

    // The curve file parses as header + numeric rows.
    std::istringstream csv(format_curve_csv(r, kb.catalog));
    std::string line;
    std::getline(csv, line);
    c.expect(line == "iteration,accuracy,accuracy_lenient,removed_symptom", "csv header");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream f(line);
        std::string it, acc, len, name;
        std::getline(f, it, ',');
        std::getline(f, acc, ',');
        std::getline(f, len, ',');
        std::getline(f, name);
        bool parsed = true;
        try {
            const double a = std::stod(acc), l = std::stod(len);
            parsed = std::stoul(it) == rows && a >= 0 && a <= 1 && l >= a && l <= 1 &&
                     (rows == 0 ? name.empty() : kb.catalog.find(name).has_value());
        } catch (const std::exception&) {
            parsed = false;
        }
        c.expect(parsed, "csv row " + std::to_string(rows));
        ++rows;
    }
    c.expect(rows == r.curve.size(), "one csv row per iteration");
    c.note(std::to_string(r.curve.size()) + " iterations, " + fmt(r.curve.front().accuracy) + " -> " +
           fmt(r.curve.back().accuracy));
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const fs::path& data, const std::string& args, const fs::path& log) {
    const std::string cmd = "'" + cli + "' --data '" + data.string() + "' " + args + " >> '" + log.string() + "' 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void store_and_cli(Check& c, const std::string& cli) {
    Rng rng(77);
    const auto& cat = shipped_catalog();
    for (int t = 0; t < 50; ++t) {
        CaseBase base(cat.size());
        AdaptationCaseBase abase(cat.size());
        const std::size_t size = pick(rng, 120);
        for (std::size_t i = 0; i < size; ++i) {
            base.add(random_vector(rng, cat.size()), random_solution(rng), coin(rng, 0.9));
            abase.add(random_delta(rng, cat.size()), random_solution(rng), random_solution(rng));
        }
        c.expect(parse_case_file(format_case_file(base), cat.size()) == base, "case file round trip");
        c.expect(parse_adaptation_file(format_adaptation_file(abase), cat.size()) == abase, "adaptation round trip");
    }
    c.expect(parse_catalog(format_catalog(cat)) == cat, "catalog round trip");
    c.expect(parse_probability_table(format_probability_table(shipped_table(), cat), cat) == shipped_table(),
             "probability table round trip");
    {
        // Sessions in every state reachable from the desk base: JSON fixed point.
        const Knowledge& kb = desk_kb();
        const auto stream = synthetic_stream(cat, shipped_table(), 1, 20, 3, false);
        for (const auto& q : stream.at(0)) {
            Session s = diagnose(kb, q.description, EngineConfig{}, SelectionMode::Interactive);
            const auto j0 = session_to_json(s, cat);
            c.expect(session_to_json(session_from_json(j0, cat), cat) == j0, "awaiting session round trip");
            if (s.state == SessionState::AwaitingSelection) select(s, kb, 1, EngineConfig{});
            revise(s, Verdict{});
            const auto j1 = session_to_json(s, cat);
            c.expect(session_to_json(session_from_json(j1, cat), cat) == j1, "revised session round trip");
        }
    }
    {
        ExperimentConfig cfg;
        cfg.sample_size = 40;
        cfg.removal_schedule = default_removal_schedule(cat);
        const auto rep = robustness_experiment(desk_kb(), cfg);
        c.expect(report_from_json(report_to_json(rep, cat), cat) == rep, "report round trip");
    }

    // Atomic append: a crash at either stage leaves the file as it was.
    TempDir dir;
    copy_shipped_repo(dir.path());
    {
        Repository repo(dir.path());
        const SymptomVector v = with(cat, {"fever"});
        repo.add_case(v, Solution(Diagnosis::ABM), true);
        const std::string before = read_file(dir.path() / "cases.jsonl");
        for (const char* stage : {"partial", "before_rename"}) {
            repo.set_fault_hook([stage](std::string_view s) {
                if (s == stage) throw Error(ErrorCode::Storage, "injected crash");
            });
            bool threw = false;
            try {
                repo.add_case(v, Solution(Diagnosis::Meningism), true);
            } catch (const Error&) {
                threw = true;
            }
            c.expect(threw, std::string("crash at ") + stage + " surfaces");
            c.expect(read_file(dir.path() / "cases.jsonl") == before, std::string("file intact after ") + stage);
            c.expect(!fs::exists(dir.path() / "cases.jsonl.tmp"), "no temp file left");
        }
        repo.set_fault_hook({});
        bool collided = false;
        try {
            repo.append_case({1, v, Solution(Diagnosis::Meningism), true});
        } catch (const Error& e) {
            collided = e.code() == ErrorCode::IdCollision;
        }
        c.expect(collided && read_file(dir.path() / "cases.jsonl") == before, "id collision leaves the file as is");

        std::vector<std::thread> threads;
        for (int t = 0; t < 4; ++t)
            threads.emplace_back([&] {
                for (int i = 0; i < 25; ++i) repo.add_case(v, Solution(Diagnosis::ABM), true);
            });
        for (auto& th : threads) th.join();
        c.expect(Repository(dir.path()).snapshot().cases.size() == 101, "concurrent appends all persisted");
    }

    // The whole flow through the command line, no UI involved.
    if (cli.empty()) {
        c.expect(false, "CLI path not provided (--cli)");
        return;
    }
    TempDir cdir;
    copy_shipped_repo(cdir.path());
    const fs::path log = cdir.path() / "cli.log";
    c.expect(run_cli(cli, cdir.path(), "gen --seed 1 -n 220", log) == 0, "cli gen");
    c.expect(run_cli(cli, cdir.path(), "diagnose --present fever,csf_cloudy_aspect -s " + (cdir.path() / "s.json").string(), log) == 0,
             "cli diagnose");
    c.expect(run_cli(cli, cdir.path(), "revise -s " + (cdir.path() / "s.json").string(), log) == 0, "cli revise");
    c.expect(run_cli(cli, cdir.path(), "retain -s " + (cdir.path() / "s.json").string(), log) == 0, "cli retain");
    c.expect(run_cli(cli, cdir.path(), "eval accuracy --loo", log) == 0, "cli eval accuracy");
    c.expect(run_cli(cli, cdir.path(), "eval accuracy --loo --keep-sample", log) == 0, "cli eval accuracy twin");
    c.expect(run_cli(cli, cdir.path(), "eval robustness --loo", log) == 0, "cli eval robustness");
    c.expect(run_cli(cli, cdir.path(), "eval learning --phases 2 --per-phase 20", log) == 0, "cli eval learning");
    c.expect(run_cli(cli, cdir.path(), "retain -s " + (cdir.path() / "s.json").string(), log) == 2,
             "cli reports a state-order error with exit code 2");

    const std::string out = fs::exists(log) ? read_file(log) : std::string();
    c.expect(out.find("prediagnosis") != std::string::npos, "cli shows the pre-diagnosis");
    Repository repo(cdir.path());
    const auto ids = repo.report_ids();
    c.expect(ids.size() == 4, "four reports written");
    if (ids.size() == 4) {
        const auto twin = repo.load_report("accuracy-0002");
        c.expect(twin.accuracy == 1.0, "cli twin run is 100%");
        const auto acc = repo.load_report("accuracy-0001");
        c.expect(acc.accuracy >= acc.majority_baseline + kAccuracyMargin, "cli accuracy margin");
        const auto rob = repo.load_report("robustness-0001");
        c.expect(rob.curve.size() >= kMinRobustnessIterations, "cli robustness iterations");
        c.expect(fs::exists(cdir.path() / "reports" / "robustness-0001.csv"), "cli curve csv");

        // Same numbers as an in-process run over the knowledge the CLI used
        // (the retained cloudy case included).
        ExperimentConfig cfg;
        cfg.leave_one_out = true;
        const auto local = accuracy_experiment(repo.snapshot(), cfg);
        c.expect(local.accuracy == acc.accuracy && local.evaluated == acc.evaluated, "cli matches in-process accuracy");
        c.note("cli strict " + fmt(acc.accuracy) + " over " + std::to_string(acc.evaluated) + " cases");
    }
}

struct Criterion {
    const char* name;
    double limit_s;
    std::function<void(Check&)> run;
};

} // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

    const std::vector<Criterion> criteria = {
        {"rule reproduction", kRulesLimitS, rule_reproduction},
        {"retrieval oracle equivalence", kRetrievalLimitS, retrieval_equivalence},
        {"rule engine determinism and termination", kEngineLimitS, engine_determinism},
        {"adaptation algebra", kAdaptationLimitS, adaptation_algebra},
        {"learning loop", kLearningLimitS, learning_loop},
        {"generator statistics", kGeneratorLimitS, generator_statistics},
        {"oracle equivalence", kOracleLimitS, oracle_equivalence},
        {"desk-scale accuracy", kAccuracyLimitS, accuracy},
        {"desk-scale robustness", kRobustnessLimitS, robustness},
        {"store round trip, atomic append, CLI", kStoreLimitS, [&](Check& c) { store_and_cli(c, cli); }},
    };

    // Shared fixture built outside the timed sections.
    desk_kb();

    std::size_t failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& cr = criteria[i];
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < cr.limit_s;
        if (!in_time) check.expect(false, "runtime " + fmt(secs, 3) + " s over the limit");
        const bool pass = check.ok();
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << i + 1 << "] " << cr.name << "  ("
                  << fmt(secs, 3) << " s < " << fmt(cr.limit_s, 0) << " s)  " << check.summary() << std::endl;
    }
    std::cout << (failed ? "FAILED: " : "ALL PASSED: ") << criteria.size() - failed << " of " << criteria.size()
              << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
