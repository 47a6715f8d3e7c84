// mcbr: command-line front end. Subcommands mirror the HTTP API.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "mcbr/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcbr;

namespace {

struct Common {
    std::string data_dir = "data";
    std::optional<std::uint64_t> seed;
    std::optional<double> tau_reuse;
    std::optional<double> tau_adapt;
    std::string config_file;
};

void add_batch_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--tau-reuse", c.tau_reuse, "Direct reuse threshold on case similarity");
    cmd->add_option("--tau-adapt", c.tau_adapt, "Adaptation case reuse threshold");
    cmd->add_option("--config", c.config_file, "JSON config file; flags override it")->check(CLI::ExistingFile);
}

json load_config(const Common& c) {
    if (c.config_file.empty()) return json::object();
    try {
        json j = json::parse(read_file(c.config_file));
        if (!j.is_object()) throw Error(ErrorCode::Configuration, "config file must hold a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Configuration, c.config_file + ": " + e.what());
    }
}

/// Config file first, then explicit flags.
ExperimentConfig experiment_config(const Common& c, const SymptomCatalog& catalog, ExperimentConfig base = {}) {
    ExperimentConfig cfg = experiment_config_from_json(load_config(c), catalog, std::move(base));
    if (c.seed) cfg.seed = *c.seed;
    if (c.tau_reuse) cfg.engine.tau_reuse = *c.tau_reuse;
    if (c.tau_adapt) cfg.engine.tau_adapt = *c.tau_adapt;
    cfg.engine.validate();
    return cfg;
}

Session load_session(const std::string& path, const SymptomCatalog& catalog) {
    try {
        return session_from_json(json::parse(read_file(path)), catalog);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, path + ": " + e.what());
    }
}

void save_session(const std::string& path, const Session& s, const SymptomCatalog& catalog) {
    atomic_write_file(path, session_to_json(s, catalog).dump(2) + "\n");
}

std::string show(const Solution& s) { return s.empty() ? "(undetermined)" : s.to_string(); }

void print_session(const Session& s, const Knowledge& kb) {
    std::cout << "state:      " << to_string(s.state) << "\n";
    std::cout << "provenance: " << to_string(s.provenance.kind);
    if (s.provenance.adaptation) std::cout << " (" << to_string(s.provenance.adaptation->source) << ")";
    std::cout << "\n";
    if (s.retrieval) {
        std::cout << "candidates:\n";
        for (std::size_t i = 0; i < s.retrieval->ranked.size(); ++i) {
            const auto& r = s.retrieval->ranked[i];
            const auto* c = kb.cases.find(r.case_id);
            std::cout << "  " << i + 1 << ". case " << r.case_id << "  similarity " << std::fixed
                      << std::setprecision(4) << r.score << "  " << (c ? show(c->solution) : "?") << "\n";
        }
        std::cout.unsetf(std::ios::floatfield);
    }
    std::cout << "proposed:   " << show(s.proposed) << "\n";
    if (s.needs_manual_diagnosis) std::cout << "note:       manual diagnosis required\n";
    if (s.verdict) std::cout << "final:      " << show(s.final_solution) << (s.final_success ? " (success)" : " (failure)") << "\n";
    std::cout << "trace:\n";
    for (const auto& e : s.trace) std::cout << "  [" << e.stage << "] " << e.detail << "\n";
}

void print_report(const ExperimentReport& r, const SymptomCatalog& catalog, const std::string& id) {
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "report:            " << id << "\n";
    std::cout << "experiment:        " << to_string(r.kind) << "\n";
    std::cout << "evaluated:         " << r.evaluated << "\n";
    std::cout << "accuracy (strict): " << r.accuracy << "  (" << r.hits_strict << "/" << r.evaluated << ")\n";
    std::cout << "accuracy (lenient):" << ' ' << r.accuracy_lenient << "\n";
    std::cout << "majority baseline: " << r.majority_baseline << "\n";
    if (r.reference_accuracy)
        std::cout << "reference figure:  " << *r.reference_accuracy << " (reference only, not reproducible)\n";
    if (r.curve.size() > 1) {
        std::cout << "\niteration  accuracy  lenient   removed\n";
        for (const auto& p : r.curve)
            std::cout << std::setw(9) << p.iteration << "  " << p.accuracy << "    " << p.accuracy_lenient << "    "
                      << (p.removed ? catalog.name(*p.removed) : "-") << "\n";
    }
    if (!r.phases.empty()) {
        std::cout << "\nphase  queries  cases  adapt_cases  prediag  reuse  case_reused  rule_derived  accuracy\n";
        for (const auto& p : r.phases)
            std::cout << std::setw(5) << p.phase << std::setw(9) << p.queries << std::setw(7) << p.case_base_size
                      << std::setw(13) << p.adaptation_base_size << std::setw(9) << p.prediagnosis << std::setw(7)
                      << p.direct_reuse << std::setw(13) << p.case_reused << std::setw(14) << p.rule_derived << "  "
                      << p.accuracy << "\n";
    }
    std::cout.unsetf(std::ios::floatfield);
}

SymptomVector parse_query(const SymptomCatalog& catalog, const std::string& bits, const std::vector<std::string>& present) {
    if (!bits.empty()) {
        if (bits.size() != catalog.size())
            throw Error(ErrorCode::CatalogMismatch, "--symptoms has " + std::to_string(bits.size()) +
                                                        " entries, catalog has " + std::to_string(catalog.size()));
        return SymptomVector::from_bitstring(bits);
    }
    SymptomVector v(catalog.size());
    for (const auto& name : present) v.set(catalog.id(name), true);
    return v;
}

const ProbabilityTable& require_table(const Repository& repo) {
    if (!repo.probability_table())
        throw Error(ErrorCode::MissingFile, "no " + repo.layout().probability_table + " in " + repo.root().string());
    return *repo.probability_table();
}

HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Case-based and rule-based diagnosis engine"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--data", common.data_dir, "Repository directory")->capture_default_str();

    // gen
    auto* gen = app.add_subcommand("gen", "Generate an oracle-labelled synthetic case base from the probability table");
    add_batch_flags(gen, common);
    std::size_t n_cases = 200;
    double jitter = 0.0;
    std::string mode_name = "uniform";
    std::string gen_out;
    gen->add_option("-n,--cases", n_cases, "Cases to simulate before culling")->capture_default_str();
    gen->add_option("--jitter", jitter, "Gaussian sigma on conditionals (normal_jitter mode)");
    gen->add_option("--mode", mode_name, "uniform | normal_jitter")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "Write here instead of replacing the repository case file");

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "Diagnose a symptom vector and write a session file");
    add_batch_flags(diag, common);
    std::string bits;
    std::vector<std::string> present;
    std::string session_file = "session.json";
    bool interactive = false;
    diag->add_option("--symptoms", bits, "Bit string, one char per catalog symptom");
    diag->add_option("--present", present, "Names of present symptoms")->delimiter(',');
    diag->add_option("-s,--session", session_file, "Session file to write")->capture_default_str();
    diag->add_flag("--interactive", interactive, "Stop after retrieval and wait for `select`");

    // select
    auto* sel = app.add_subcommand("select", "Pick a retrieved candidate by rank");
    add_batch_flags(sel, common);
    std::size_t rank = 1;
    sel->add_option("-s,--session", session_file, "Session file")->capture_default_str();
    sel->add_option("--rank", rank, "1-based candidate rank")->required();

    // revise
    auto* rev = app.add_subcommand("revise", "Record the verdict on the proposed solution");
    rev->add_option("-s,--session", session_file, "Session file")->capture_default_str();
    bool failure = false;
    std::string repair;
    rev->add_flag("--failure", failure, "The proposal was wrong");
    rev->add_option("--repair", repair, "Corrected solution, e.g. 'Encephalitis;ABM'");

    // retain
    auto* ret = app.add_subcommand("retain", "Store the revised session in the case bases");
    ret->add_option("-s,--session", session_file, "Session file")->capture_default_str();
    bool no_diag = false, no_adapt = false;
    ret->add_flag("--no-diagnostic", no_diag, "Do not store the diagnostic case");
    ret->add_flag("--no-adaptation", no_adapt, "Do not store the adaptation case");

    // eval
    auto* ev = app.add_subcommand("eval", "Run an experiment and save its report");
    add_batch_flags(ev, common);
    std::string kind_name;
    std::size_t synthetic = 0;
    bool loo = false, keep = false;
    std::optional<std::size_t> sample;
    std::size_t phases = 3, per_phase = 30;
    bool fresh_phases = false;
    std::string report_dir;
    ev->add_option("kind", kind_name, "accuracy | robustness | learning")
        ->required()
        ->check(CLI::IsMember({"accuracy", "robustness", "learning"}));
    ev->add_option("--synthetic", synthetic, "Use a fresh synthetic base of this many simulated cases");
    ev->add_flag("--loo", loo, "Leave-one-out over the whole base");
    ev->add_flag("--keep-sample", keep, "Leave the sample in the base (exact-twin ceiling)");
    ev->add_option("--sample-size", sample, "Held-out sample size");
    ev->add_option("--phases", phases, "Learning phases")->capture_default_str();
    ev->add_option("--per-phase", per_phase, "Simulated queries per learning phase")->capture_default_str();
    ev->add_flag("--fresh-phases", fresh_phases, "Draw new queries per phase instead of replaying phase 1");
    ev->add_option("--reports", report_dir, "Report directory (default <data>/reports)");

    // serve
    auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
    std::string host = "127.0.0.1";
    int port = 8080;
    int idle = 1800;
    srv->add_option("--host", host)->capture_default_str();
    srv->add_option("--port", port)->capture_default_str();
    srv->add_option("--idle-timeout", idle, "Session idle timeout in seconds")->capture_default_str();
    add_batch_flags(srv, common);

    CLI11_PARSE(app, argc, argv);

    try {
        RepositoryLayout layout;
        if (!report_dir.empty()) layout.reports = fs::absolute(report_dir).string();
        Repository repo(common.data_dir, layout);
        for (const auto& w : repo.warnings()) std::cerr << "warning: " << w << "\n";
        const auto& catalog = repo.catalog();

        if (*gen) {
            const json cfg = load_config(common);
            GeneratorConfig g;
            g.n_cases = cfg.value("n_cases", n_cases);
            g.seed = cfg.value("seed", g.seed);
            g.jitter_sigma = cfg.value("jitter_sigma", jitter);
            mode_name = cfg.value("mode", mode_name);
            if (gen->count("--cases")) g.n_cases = n_cases;
            if (gen->count("--jitter")) g.jitter_sigma = jitter;
            if (gen->count("--mode")) mode_name = gen->get_option("--mode")->as<std::string>();
            if (common.seed) g.seed = *common.seed;
            auto mode = parse_sampling_mode(mode_name);
            if (!mode) throw Error(ErrorCode::Configuration, "unknown mode '" + mode_name + "'");
            g.mode = *mode;
            CaseBase base = synthetic_case_base(catalog, require_table(repo), g);
            if (gen_out.empty()) {
                repo.replace_cases(base);
                std::cout << "wrote " << base.size() << " cases to " << repo.path_of(layout.cases).string() << "\n";
            } else {
                atomic_write_file(gen_out, format_case_file(base));
                std::cout << "wrote " << base.size() << " cases to " << gen_out << "\n";
            }
            std::cout << "culled " << g.n_cases - base.size() << " implausible cases\n";
            return 0;
        }

        if (*diag) {
            if (bits.empty() && present.empty()) throw Error(ErrorCode::Validation, "give --symptoms or --present");
            ExperimentConfig cfg = experiment_config(common, catalog);
            const Knowledge kb = repo.snapshot();
            Session s = diagnose(kb, parse_query(catalog, bits, present), cfg.engine,
                                 interactive ? SelectionMode::Interactive : SelectionMode::Auto);
            s.id = fs::path(session_file).stem().string();
            save_session(session_file, s, catalog);
            print_session(s, kb);
            return 0;
        }

        if (*sel) {
            ExperimentConfig cfg = experiment_config(common, catalog);
            Session s = load_session(session_file, catalog);
            const Knowledge kb = repo.snapshot();
            select(s, kb, rank, cfg.engine);
            save_session(session_file, s, catalog);
            print_session(s, kb);
            return 0;
        }

        if (*rev) {
            Session s = load_session(session_file, catalog);
            Verdict v;
            v.success = !failure;
            if (!repair.empty()) v.repaired = Solution::parse(repair);
            revise(s, v);
            save_session(session_file, s, catalog);
            std::cout << "final: " << show(s.final_solution) << (s.final_success ? " (success)" : " (failure)") << "\n";
            return 0;
        }

        if (*ret) {
            Session s = load_session(session_file, catalog);
            const auto before = repo.read([](const Knowledge& kb) { return std::pair(kb.cases.size(), kb.adaptation_cases.size()); });
            const RetainResult r = repo.retain(s, !no_diag, !no_adapt);
            save_session(session_file, s, catalog);
            const auto after = repo.read([](const Knowledge& kb) { return std::pair(kb.cases.size(), kb.adaptation_cases.size()); });
            if (r.case_id) std::cout << "stored diagnostic case " << *r.case_id << "\n";
            if (r.adaptation_case_id) std::cout << "stored adaptation case " << *r.adaptation_case_id << "\n";
            for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
            std::cout << "cases " << before.first << " -> " << after.first << ", adaptation cases " << before.second
                      << " -> " << after.second << "\n";
            return 0;
        }

        if (*ev) {
            const ExperimentKind kind = *parse_experiment_kind(kind_name);
            ExperimentConfig base;
            if (kind == ExperimentKind::Robustness) base.removal_schedule = default_removal_schedule(catalog);
            ExperimentConfig cfg = experiment_config(common, catalog, base);
            if (loo) cfg.leave_one_out = true;
            if (keep) cfg.keep_sample_in_base = true;
            if (sample) cfg.sample_size = *sample;

            Knowledge kb = repo.snapshot();
            if (synthetic) {
                GeneratorConfig g;
                g.n_cases = synthetic;
                g.seed = cfg.seed;
                kb.cases = synthetic_case_base(catalog, require_table(repo), g);
            }
            ExperimentReport report;
            if (kind == ExperimentKind::Accuracy) report = accuracy_experiment(kb, cfg);
            else if (kind == ExperimentKind::Robustness) report = robustness_experiment(kb, cfg);
            else
                report = learning_experiment(
                    kb, synthetic_stream(catalog, require_table(repo), phases, per_phase, cfg.seed, !fresh_phases), cfg);
            const std::string id = repo.save_report(report);
            print_report(report, catalog, id);
            std::cout << "\nwrote " << (repo.path_of(layout.reports) / (id + ".json")).string() << " and "
                      << (repo.path_of(layout.reports) / (id + ".csv")).string() << "\n";
            return 0;
        }

        if (*srv) {
            ServiceConfig sc;
            sc.engine = experiment_config(common, catalog).engine;
            sc.idle_timeout = std::chrono::seconds(idle);
            ApiService api(repo, sc);
            HttpServer server(api);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            server.listen();
            g_server = nullptr;
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << code_name(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
