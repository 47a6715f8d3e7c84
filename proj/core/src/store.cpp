#include "mcbr/store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace mcbr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema_error(const std::string& what, std::size_t line) {
    throw Error(ErrorCode::Schema, (line ? "record " + std::to_string(line) + ": " : std::string()) + what, line);
}

std::string_view trim(std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    return v;
}

std::string_view strip_comment(std::string_view line) {
    const auto hash = line.find('#');
    return trim(hash == std::string_view::npos ? line : line.substr(0, hash));
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Calls fn(line, 1-based line number) for every line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        fn(text.substr(0, nl), line_no);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
}

double parse_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) schema_error("'" + std::string(s) + "' is not a number", line);
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Diagnosis diagnosis_field(const json& j, std::size_t line) {
    if (!j.is_string()) schema_error("diagnosis must be a string", line);
    if (auto d = parse_diagnosis(j.get<std::string>())) return *d;
    schema_error("unknown diagnosis '" + j.get<std::string>() + "'", line);
}

json optional_diag(const std::optional<Diagnosis>& d) { return d ? json(std::string(to_string(*d))) : json(nullptr); }

std::optional<Diagnosis> optional_diag_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return diagnosis_field(j, 0);
}

/// POSIX advisory lock on "<path>.lock", held for the object's lifetime.
class FileLock {
public:
    explicit FileLock(const fs::path& target) {
        const std::string lock_path = target.string() + ".lock";
        fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::Storage, "cannot open lock file " + lock_path);
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error(ErrorCode::Storage, "cannot lock " + lock_path);
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

} // namespace

// ---------------------------------------------------------------------------
// Catalog

SymptomCatalog parse_catalog(std::string_view text) {
    std::vector<SymptomCatalog::Entry> entries;
    for_each_line(text, [&](std::string_view raw, std::size_t line) {
        const auto body = strip_comment(raw);
        if (body.empty()) return;
        const auto fields = split_ws(body);
        if (fields.size() != 3) schema_error("expected '<index> <name> <influential>'", line);
        std::size_t index = 0;
        auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
        if (ec != std::errc{} || p != fields[0].data() + fields[0].size()) schema_error("bad symptom index", line);
        if (index != entries.size())
            schema_error("symptom index " + std::to_string(index) + " out of sequence (expected " +
                             std::to_string(entries.size()) + ")",
                         line);
        if (fields[2] != "0" && fields[2] != "1") schema_error("influential flag must be 0 or 1", line);
        entries.push_back({std::string(fields[1]), fields[2] == "1"});
    });
    try {
        return SymptomCatalog(std::move(entries));
    } catch (const Error& e) {
        throw Error(ErrorCode::Schema, std::string("catalog: ") + e.what());
    }
}

std::string format_catalog(const SymptomCatalog& catalog) {
    std::ostringstream os;
    os << "# index name influential\n";
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& e = catalog.entries()[i];
        os << i << ' ' << e.name << ' ' << (e.influential ? 1 : 0) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Solutions and case records

json solution_to_json(const Solution& s) {
    json diffs = json::array();
    for (auto d : s.differentials()) diffs.push_back(std::string(to_string(d)));
    return {{"primary", optional_diag(s.primary())}, {"differentials", diffs}};
}

Solution solution_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Schema, "solution must be an object");
    std::optional<Diagnosis> primary = optional_diag_from(j.value("primary", json(nullptr)));
    std::vector<Diagnosis> diffs;
    for (const auto& d : j.value("differentials", json::array())) diffs.push_back(diagnosis_field(d, 0));
    try {
        return Solution::from_parts(primary, std::move(diffs));
    } catch (const Error& e) {
        throw Error(ErrorCode::Schema, e.what());
    }
}

std::string format_case_record(const DiagnosticCase& c) {
    json j = solution_to_json(c.solution);
    j["id"] = c.id;
    j["symptoms"] = c.description.to_bitstring();
    j["success"] = c.success;
    return json{{"id", c.id},
                {"symptoms", c.description.to_bitstring()},
                {"primary", j["primary"]},
                {"differentials", j["differentials"]},
                {"success", c.success}}
        .dump();
}

DiagnosticCase parse_case_record(std::string_view line, std::size_t catalog_size, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        schema_error(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
        DiagnosticCase c;
        c.id = j.at("id").get<CaseId>();
        const auto bits = j.at("symptoms").get<std::string>();
        if (bits.size() != catalog_size)
            schema_error("case " + std::to_string(c.id) + " has " + std::to_string(bits.size()) +
                             " symptoms, catalog has " + std::to_string(catalog_size),
                         line_no);
        c.description = SymptomVector::from_bitstring(bits);
        c.solution = solution_from_json(j);
        c.success = j.at("success").get<bool>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        schema_error(std::string("bad case record: ") + e.what(), line_no);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Schema && e.line()) throw;
        schema_error(e.what(), line_no);
    }
}

CaseBase parse_case_file(std::string_view text, std::size_t catalog_size) {
    CaseBase base(catalog_size);
    for_each_line(text, [&](std::string_view raw, std::size_t line) {
        if (trim(raw).empty()) return;
        DiagnosticCase c = parse_case_record(raw, catalog_size, line);
        if (base.find(c.id)) schema_error("duplicate case id " + std::to_string(c.id), line);
        base.insert(std::move(c));
    });
    return base;
}

std::string format_case_file(const CaseBase& base) {
    std::string out;
    for (const auto& [id, c] : base.cases()) out += format_case_record(c) + "\n";
    return out;
}

std::string format_adaptation_record(const AdaptationCase& c) {
    return json{{"id", c.id}, {"delta", c.delta.to_string()}, {"s1", solution_to_json(c.s1)}, {"s2", solution_to_json(c.s2)}}
        .dump();
}

AdaptationCase parse_adaptation_record(std::string_view line, std::size_t catalog_size, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        schema_error(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
        AdaptationCase c;
        c.id = j.at("id").get<CaseId>();
        const auto d = j.at("delta").get<std::string>();
        if (d.size() != catalog_size)
            schema_error("adaptation case " + std::to_string(c.id) + " has " + std::to_string(d.size()) +
                             " delta entries, catalog has " + std::to_string(catalog_size),
                         line_no);
        c.delta = DeltaVector::parse(d);
        c.s1 = solution_from_json(j.at("s1"));
        c.s2 = solution_from_json(j.at("s2"));
        c.validate();
        return c;
    } catch (const json::exception& e) {
        schema_error(std::string("bad adaptation record: ") + e.what(), line_no);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Schema && e.line()) throw;
        schema_error(e.what(), line_no);
    }
}

AdaptationCaseBase parse_adaptation_file(std::string_view text, std::size_t catalog_size) {
    AdaptationCaseBase base(catalog_size);
    for_each_line(text, [&](std::string_view raw, std::size_t line) {
        if (trim(raw).empty()) return;
        AdaptationCase c = parse_adaptation_record(raw, catalog_size, line);
        if (base.find(c.id)) schema_error("duplicate adaptation case id " + std::to_string(c.id), line);
        base.insert(std::move(c));
    });
    return base;
}

std::string format_adaptation_file(const AdaptationCaseBase& base) {
    std::string out;
    for (const auto& [id, c] : base.cases()) out += format_adaptation_record(c) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Probability table

ProbabilityTable parse_probability_table(std::string_view text, const SymptomCatalog& catalog,
                                         std::vector<std::string>* warnings) {
    ProbabilityTable table(catalog.size());
    enum class Section { None, Priors, Conditionals } section = Section::None;
    std::array<bool, kDiagnosisCount> prior_seen{};
    std::vector<bool> row_seen(catalog.size(), false);
    std::vector<Diagnosis> columns;
    bool header_seen = false;

    for_each_line(text, [&](std::string_view raw, std::size_t line) {
        const auto body = strip_comment(raw);
        if (body.empty()) return;
        if (body == "[priors]") { section = Section::Priors; return; }
        if (body == "[conditionals]") { section = Section::Conditionals; return; }
        const auto fields = split_ws(body);
        auto diag = [&](std::string_view name) {
            if (auto d = parse_diagnosis(name)) return *d;
            schema_error("unknown diagnosis '" + std::string(name) + "'", line);
        };
        switch (section) {
        case Section::None: schema_error("data before [priors] or [conditionals]", line);
        case Section::Priors: {
            if (fields.size() != 2) schema_error("expected '<diagnosis> <probability>'", line);
            const Diagnosis d = diag(fields[0]);
            if (prior_seen[index_of(d)]) schema_error("prior of " + std::string(fields[0]) + " given twice", line);
            prior_seen[index_of(d)] = true;
            table.set_prior(d, parse_double(fields[1], line));
            break;
        }
        case Section::Conditionals: {
            if (!header_seen) {
                if (fields.empty() || fields[0] != "symptom") schema_error("expected 'symptom <diagnosis>...' header", line);
                for (std::size_t i = 1; i < fields.size(); ++i) {
                    const Diagnosis d = diag(fields[i]);
                    if (std::find(columns.begin(), columns.end(), d) != columns.end())
                        schema_error("column " + std::string(fields[i]) + " repeated", line);
                    columns.push_back(d);
                }
                header_seen = true;
                break;
            }
            if (fields.size() != columns.size() + 1)
                schema_error("expected " + std::to_string(columns.size()) + " probabilities", line);
            const auto id = catalog.find(fields[0]);
            if (!id) schema_error("unknown symptom '" + std::string(fields[0]) + "'", line);
            if (row_seen[id->value]) schema_error("symptom " + std::string(fields[0]) + " given twice", line);
            row_seen[id->value] = true;
            for (std::size_t i = 0; i < columns.size(); ++i)
                table.set_conditional(columns[i], *id, parse_double(fields[i + 1], line));
            break;
        }
        }
    });

    if (warnings) {
        for (auto d : kAllDiagnoses) {
            if (!prior_seen[index_of(d)]) warnings->push_back("no prior for " + std::string(to_string(d)) + "; using 0");
            if (std::find(columns.begin(), columns.end(), d) == columns.end())
                warnings->push_back("no conditional column for " + std::string(to_string(d)) + "; using 0");
        }
        for (std::uint32_t s = 0; s < catalog.size(); ++s)
            if (!row_seen[s])
                warnings->push_back("no conditional row for " + catalog.name(SymptomId{s}) + "; using 0");
    }
    return table;
}

std::string format_probability_table(const ProbabilityTable& table, const SymptomCatalog& catalog) {
    std::ostringstream os;
    os << "[priors]\n";
    for (auto d : kAllDiagnoses) os << to_string(d) << ' ' << format_double(table.prior(d)) << '\n';
    os << "\n[conditionals]\nsymptom";
    for (auto d : kAllDiagnoses) os << ' ' << to_string(d);
    os << '\n';
    for (std::uint32_t s = 0; s < catalog.size(); ++s) {
        os << catalog.name(SymptomId{s});
        for (auto d : kAllDiagnoses) os << ' ' << format_double(table.conditional(d, SymptomId{s}));
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Experiment config and reports

json experiment_config_to_json(const ExperimentConfig& c, const SymptomCatalog& catalog) {
    json schedule = json::array();
    for (auto id : c.removal_schedule) schedule.push_back(catalog.name(id));
    return {{"seed", c.seed},
            {"tau_reuse", c.engine.tau_reuse},
            {"tau_adapt", c.engine.tau_adapt},
            {"k", c.engine.k},
            {"include_failed_cases", c.engine.include_failed_cases},
            {"sample_size", c.sample_size},
            {"leave_one_out", c.leave_one_out},
            {"keep_sample_in_base", c.keep_sample_in_base},
            {"removal_schedule", schedule},
            {"retain_diagnostic", c.retain_diagnostic},
            {"retain_adaptation", c.retain_adaptation}};
}

ExperimentConfig experiment_config_from_json(const json& j, const SymptomCatalog& catalog, ExperimentConfig c) {
    if (!j.is_object()) throw Error(ErrorCode::Configuration, "experiment config must be a JSON object");
    try {
        c.seed = j.value("seed", c.seed);
        c.engine.tau_reuse = j.value("tau_reuse", c.engine.tau_reuse);
        c.engine.tau_adapt = j.value("tau_adapt", c.engine.tau_adapt);
        c.engine.k = j.value("k", c.engine.k);
        c.engine.include_failed_cases = j.value("include_failed_cases", c.engine.include_failed_cases);
        c.sample_size = j.value("sample_size", c.sample_size);
        c.leave_one_out = j.value("leave_one_out", c.leave_one_out);
        c.keep_sample_in_base = j.value("keep_sample_in_base", c.keep_sample_in_base);
        c.retain_diagnostic = j.value("retain_diagnostic", c.retain_diagnostic);
        c.retain_adaptation = j.value("retain_adaptation", c.retain_adaptation);
        if (j.contains("removal_schedule")) {
            c.removal_schedule.clear();
            for (const auto& name : j.at("removal_schedule")) {
                auto id = catalog.find(name.get<std::string>());
                if (!id) throw Error(ErrorCode::Configuration, "unknown symptom '" + name.get<std::string>() + "' in removal schedule");
                c.removal_schedule.push_back(*id);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Configuration, std::string("bad experiment config: ") + e.what());
    }
    c.engine.validate();
    return c;
}

json report_to_json(const ExperimentReport& r, const SymptomCatalog& catalog) {
    json records = json::array();
    for (const auto& rec : r.records) {
        records.push_back({{"iteration", rec.iteration},
                           {"phase", rec.phase},
                           {"query_id", rec.query_id},
                           {"proposed", solution_to_json(rec.proposed)},
                           {"oracle", solution_to_json(rec.oracle)},
                           {"strict_hit", rec.strict_hit},
                           {"lenient_hit", rec.lenient_hit},
                           {"provenance", std::string(to_string(rec.provenance))},
                           {"adaptation_source", rec.adaptation_source
                                                     ? json(std::string(to_string(*rec.adaptation_source)))
                                                     : json(nullptr)}});
    }
    json curve = json::array();
    for (const auto& p : r.curve) {
        curve.push_back({{"iteration", p.iteration},
                         {"removed", p.removed ? json(catalog.name(*p.removed)) : json(nullptr)},
                         {"accuracy", p.accuracy},
                         {"accuracy_lenient", p.accuracy_lenient},
                         {"cases", p.cases}});
    }
    json phases = json::array();
    for (const auto& p : r.phases) {
        phases.push_back({{"phase", p.phase},
                          {"queries", p.queries},
                          {"case_base_size", p.case_base_size},
                          {"adaptation_base_size", p.adaptation_base_size},
                          {"prediagnosis", p.prediagnosis},
                          {"direct_reuse", p.direct_reuse},
                          {"case_reused", p.case_reused},
                          {"rule_derived", p.rule_derived},
                          {"undetermined", p.undetermined},
                          {"accuracy", p.accuracy},
                          {"case_reused_fraction", p.case_reused_fraction}});
    }
    json reference = json::object();
    if (r.reference_accuracy) reference["accuracy"] = *r.reference_accuracy;
    if (r.reference_sample_size) reference["sample_size"] = *r.reference_sample_size;
    if (r.reference_plateau) reference["plateau_accuracy"] = *r.reference_plateau;
    if (!reference.empty()) reference["reproducible"] = false;

    return {{"kind", std::string(to_string(r.kind))},
            {"config", experiment_config_to_json(r.config, catalog)},
            {"sample_ids", r.sample_ids},
            {"metrics",
             {{"evaluated", r.evaluated},
              {"hits_strict", r.hits_strict},
              {"hits_lenient", r.hits_lenient},
              {"accuracy", r.accuracy},
              {"accuracy_lenient", r.accuracy_lenient},
              {"majority_baseline", r.majority_baseline}}},
            {"curve", curve},
            {"phases", phases},
            {"reference", reference},
            {"records", records}};
}

ExperimentReport report_from_json(const json& j, const SymptomCatalog& catalog) {
    ExperimentReport r;
    try {
        auto kind = parse_experiment_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::Schema, "unknown experiment kind");
        r.kind = *kind;
        r.config = experiment_config_from_json(j.at("config"), catalog);
        r.sample_ids = j.at("sample_ids").get<std::vector<CaseId>>();
        const auto& m = j.at("metrics");
        r.evaluated = m.at("evaluated").get<std::size_t>();
        r.hits_strict = m.at("hits_strict").get<std::size_t>();
        r.hits_lenient = m.at("hits_lenient").get<std::size_t>();
        r.accuracy = m.at("accuracy").get<double>();
        r.accuracy_lenient = m.at("accuracy_lenient").get<double>();
        r.majority_baseline = m.at("majority_baseline").get<double>();
        for (const auto& p : j.at("curve")) {
            CurvePoint c;
            c.iteration = p.at("iteration").get<std::size_t>();
            if (!p.at("removed").is_null()) c.removed = catalog.id(p.at("removed").get<std::string>());
            c.accuracy = p.at("accuracy").get<double>();
            c.accuracy_lenient = p.at("accuracy_lenient").get<double>();
            c.cases = p.at("cases").get<std::size_t>();
            r.curve.push_back(c);
        }
        for (const auto& p : j.at("phases")) {
            PhaseSummary s;
            s.phase = p.at("phase").get<std::size_t>();
            s.queries = p.at("queries").get<std::size_t>();
            s.case_base_size = p.at("case_base_size").get<std::size_t>();
            s.adaptation_base_size = p.at("adaptation_base_size").get<std::size_t>();
            s.prediagnosis = p.at("prediagnosis").get<std::size_t>();
            s.direct_reuse = p.at("direct_reuse").get<std::size_t>();
            s.case_reused = p.at("case_reused").get<std::size_t>();
            s.rule_derived = p.at("rule_derived").get<std::size_t>();
            s.undetermined = p.at("undetermined").get<std::size_t>();
            s.accuracy = p.at("accuracy").get<double>();
            s.case_reused_fraction = p.at("case_reused_fraction").get<double>();
            r.phases.push_back(s);
        }
        const auto& ref = j.at("reference");
        if (ref.contains("accuracy")) r.reference_accuracy = ref["accuracy"].get<double>();
        if (ref.contains("sample_size"))
            r.reference_sample_size = ref["sample_size"].get<std::size_t>();
        if (ref.contains("plateau_accuracy"))
            r.reference_plateau = ref["plateau_accuracy"].get<double>();
        for (const auto& rec : j.at("records")) {
            CaseRecord c;
            c.iteration = rec.at("iteration").get<std::size_t>();
            c.phase = rec.at("phase").get<std::size_t>();
            c.query_id = rec.at("query_id").get<CaseId>();
            c.proposed = solution_from_json(rec.at("proposed"));
            c.oracle = solution_from_json(rec.at("oracle"));
            c.strict_hit = rec.at("strict_hit").get<bool>();
            c.lenient_hit = rec.at("lenient_hit").get<bool>();
            const auto prov = rec.at("provenance").get<std::string>();
            bool known = false;
            for (auto k : {ProvenanceKind::None, ProvenanceKind::PreDiagnosis, ProvenanceKind::DirectReuse,
                           ProvenanceKind::Adapted, ProvenanceKind::Undetermined})
                if (to_string(k) == prov) { c.provenance = k; known = true; }
            if (!known) throw Error(ErrorCode::Schema, "unknown provenance '" + prov + "'");
            if (!rec.at("adaptation_source").is_null()) {
                const auto src = rec.at("adaptation_source").get<std::string>();
                c.adaptation_source = src == "case_reused" ? AdaptationSource::CaseReused : AdaptationSource::RuleDerived;
            }
            r.records.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("bad report: ") + e.what());
    }
    r.check_consistency();
    return r;
}

std::string format_curve_csv(const ExperimentReport& r, const SymptomCatalog& catalog) {
    std::ostringstream os;
    os << "iteration,accuracy,accuracy_lenient,removed_symptom\n";
    for (const auto& p : r.curve)
        os << p.iteration << ',' << format_double(p.accuracy) << ',' << format_double(p.accuracy_lenient) << ','
           << (p.removed ? catalog.name(*p.removed) : std::string()) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

json trace_to_json(const std::vector<TraceEntry>& trace) {
    json out = json::array();
    for (const auto& t : trace)
        out.push_back({{"rule", t.rule_id},
                       {"action", std::string(to_string(t.action.kind))},
                       {"target", std::string(to_string(t.action.target))},
                       {"status", t.status == ActionStatus::Applied ? "applied" : "skipped"},
                       {"displaced", optional_diag(t.displaced)},
                       {"note", t.note}});
    return out;
}

std::vector<TraceEntry> trace_from_json(const json& j) {
    std::vector<TraceEntry> out;
    for (const auto& t : j) {
        TraceEntry e;
        e.rule_id = t.at("rule").get<std::string>();
        const auto action = t.at("action").get<std::string>();
        bool known = false;
        for (auto k : {ActionKind::AssertPrimary, ActionKind::AssertDifferential, ActionKind::Discard,
                       ActionKind::Demote, ActionKind::Promote})
            if (to_string(k) == action) { e.action.kind = k; known = true; }
        if (!known) throw Error(ErrorCode::Schema, "unknown action '" + action + "'");
        e.action.target = diagnosis_field(t.at("target"), 0);
        e.status = t.at("status").get<std::string>() == "applied" ? ActionStatus::Applied : ActionStatus::Skipped;
        e.displaced = optional_diag_from(t.at("displaced"));
        e.note = t.at("note").get<std::string>();
        out.push_back(std::move(e));
    }
    return out;
}

json match_to_json(const std::optional<AdaptationMatch>& m) {
    if (!m) return nullptr;
    return {{"case_id", m->case_id}, {"score", m->score}};
}

std::optional<AdaptationMatch> match_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return AdaptationMatch{j.at("case_id").get<CaseId>(), j.at("score").get<double>()};
}

json diag_list(const std::vector<Diagnosis>& ds) {
    json out = json::array();
    for (auto d : ds) out.push_back(std::string(to_string(d)));
    return out;
}

std::vector<Diagnosis> diag_list_from(const json& j) {
    std::vector<Diagnosis> out;
    for (const auto& d : j) out.push_back(diagnosis_field(d, 0));
    return out;
}

template <typename Enum, std::size_t N>
Enum enum_from(const std::string& s, const std::array<Enum, N>& values, const char* what) {
    for (auto v : values)
        if (to_string(v) == s) return v;
    throw Error(ErrorCode::Schema, std::string("unknown ") + what + " '" + s + "'");
}

constexpr std::array<SessionState, 6> kStates = {SessionState::New,    SessionState::PreDiagnosed,
                                                 SessionState::AwaitingSelection, SessionState::Solved,
                                                 SessionState::Revised, SessionState::Retained};
constexpr std::array<ProvenanceKind, 5> kProvenance = {ProvenanceKind::None, ProvenanceKind::PreDiagnosis,
                                                       ProvenanceKind::DirectReuse, ProvenanceKind::Adapted,
                                                       ProvenanceKind::Undetermined};

} // namespace

json session_to_json(const Session& s, const SymptomCatalog& catalog) {
    json present = json::array();
    for (auto id : s.query.present()) present.push_back(catalog.name(id));

    json retrieval = nullptr;
    if (s.retrieval) {
        json ranked = json::array();
        for (const auto& r : s.retrieval->ranked) ranked.push_back({{"case_id", r.case_id}, {"score", r.score}});
        retrieval = {{"k", s.retrieval->k}, {"ranked", ranked}};
    }

    json prov = {{"kind", std::string(to_string(s.provenance.kind))}};
    if (s.provenance.prediagnosis) {
        const auto& p = *s.provenance.prediagnosis;
        prov["prediagnosis"] = {{"solution", p.solution ? solution_to_json(*p.solution) : json(nullptr)},
                                {"fired", p.fired},
                                {"trace", trace_to_json(p.trace)},
                                {"asserted_primaries", diag_list(p.asserted_primaries)}};
    }
    if (s.provenance.source)
        prov["source"] = {{"case_id", s.provenance.source->case_id}, {"score", s.provenance.source->score}};
    if (s.provenance.adaptation) {
        const auto& a = *s.provenance.adaptation;
        json rules = nullptr;
        if (a.rules) {
            rules = {{"s2", solution_to_json(a.rules->s2)},
                     {"trace", trace_to_json(a.rules->trace)},
                     {"fired", a.rules->fired},
                     {"promoted_on_readback", optional_diag(a.rules->promoted_on_readback)},
                     {"dropped_on_readback", diag_list(a.rules->dropped_on_readback)},
                     {"undetermined", a.rules->undetermined}};
        }
        prov["adaptation"] = {{"s2", solution_to_json(a.s2)},
                              {"source", std::string(to_string(a.source))},
                              {"reused", match_to_json(a.reused)},
                              {"best_candidate", match_to_json(a.best_candidate)},
                              {"rules", rules},
                              {"delta", a.delta_used.to_string()},
                              {"s1", solution_to_json(a.s1_used)}};
    }

    json verdict = nullptr;
    if (s.verdict)
        verdict = {{"success", s.verdict->success},
                   {"repaired", s.verdict->repaired ? solution_to_json(*s.verdict->repaired) : json(nullptr)}};

    json trace = json::array();
    for (const auto& e : s.trace) trace.push_back({{"stage", e.stage}, {"detail", e.detail}});

    return {{"id", s.id},
            {"symptoms", s.query.to_bitstring()},
            {"present", present},
            {"state", std::string(to_string(s.state))},
            {"retrieval", retrieval},
            {"selected_rank", s.selected_rank ? json(*s.selected_rank) : json(nullptr)},
            {"provenance", prov},
            {"proposed", solution_to_json(s.proposed)},
            {"needs_manual_diagnosis", s.needs_manual_diagnosis},
            {"verdict", verdict},
            {"final_solution", solution_to_json(s.final_solution)},
            {"final_success", s.final_success},
            {"retained_case", s.retained_case ? json(*s.retained_case) : json(nullptr)},
            {"retained_adaptation_case",
             s.retained_adaptation_case ? json(*s.retained_adaptation_case) : json(nullptr)},
            {"trace", trace}};
}

Session session_from_json(const json& j, const SymptomCatalog& catalog) {
    Session s;
    try {
        s.id = j.at("id").get<std::string>();
        s.query = SymptomVector::from_bitstring(j.at("symptoms").get<std::string>());
        if (s.query.size() != catalog.size())
            throw Error(ErrorCode::CatalogMismatch, "session query does not match the catalog size");
        s.state = enum_from(j.at("state").get<std::string>(), kStates, "session state");
        if (!j.at("retrieval").is_null()) {
            RetrievalResult r;
            r.k = j["retrieval"].at("k").get<std::size_t>();
            for (const auto& x : j["retrieval"].at("ranked"))
                r.ranked.push_back({x.at("case_id").get<CaseId>(), x.at("score").get<double>()});
            s.retrieval = std::move(r);
        }
        if (!j.at("selected_rank").is_null()) s.selected_rank = j["selected_rank"].get<std::size_t>();

        const auto& prov = j.at("provenance");
        s.provenance.kind = enum_from(prov.at("kind").get<std::string>(), kProvenance, "provenance");
        if (prov.contains("prediagnosis")) {
            const auto& p = prov["prediagnosis"];
            PreDiagnosisResult pr;
            if (!p.at("solution").is_null()) pr.solution = solution_from_json(p["solution"]);
            pr.fired = p.at("fired").get<std::vector<std::string>>();
            pr.trace = trace_from_json(p.at("trace"));
            pr.asserted_primaries = diag_list_from(p.at("asserted_primaries"));
            s.provenance.prediagnosis = std::move(pr);
        }
        if (prov.contains("source"))
            s.provenance.source = ScoredCase{prov["source"].at("case_id").get<CaseId>(),
                                             prov["source"].at("score").get<double>()};
        if (prov.contains("adaptation")) {
            const auto& a = prov["adaptation"];
            AdaptationOutcome out;
            out.s2 = solution_from_json(a.at("s2"));
            out.source = a.at("source").get<std::string>() == "case_reused" ? AdaptationSource::CaseReused
                                                                            : AdaptationSource::RuleDerived;
            out.reused = match_from_json(a.at("reused"));
            out.best_candidate = match_from_json(a.at("best_candidate"));
            if (!a.at("rules").is_null()) {
                const auto& r = a["rules"];
                RuleAdaptation ra;
                ra.s2 = solution_from_json(r.at("s2"));
                ra.trace = trace_from_json(r.at("trace"));
                ra.fired = r.at("fired").get<std::vector<std::string>>();
                ra.promoted_on_readback = optional_diag_from(r.at("promoted_on_readback"));
                ra.dropped_on_readback = diag_list_from(r.at("dropped_on_readback"));
                ra.undetermined = r.at("undetermined").get<bool>();
                out.rules = std::move(ra);
            }
            out.delta_used = DeltaVector::parse(a.at("delta").get<std::string>());
            out.s1_used = solution_from_json(a.at("s1"));
            s.provenance.adaptation = std::move(out);
        }
        s.proposed = solution_from_json(j.at("proposed"));
        s.needs_manual_diagnosis = j.at("needs_manual_diagnosis").get<bool>();
        if (!j.at("verdict").is_null()) {
            Verdict v;
            v.success = j["verdict"].at("success").get<bool>();
            if (!j["verdict"].at("repaired").is_null()) v.repaired = solution_from_json(j["verdict"]["repaired"]);
            s.verdict = std::move(v);
        }
        s.final_solution = solution_from_json(j.at("final_solution"));
        s.final_success = j.at("final_success").get<bool>();
        if (!j.at("retained_case").is_null()) s.retained_case = j["retained_case"].get<CaseId>();
        if (!j.at("retained_adaptation_case").is_null())
            s.retained_adaptation_case = j["retained_adaptation_case"].get<CaseId>();
        for (const auto& e : j.at("trace"))
            s.trace.push_back({e.at("stage").get<std::string>(), e.at("detail").get<std::string>()});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("bad session: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void atomic_write_file(const fs::path& path, std::string_view content, const FaultHook& hook) {
    const fs::path tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::Storage, "cannot create " + tmp.string());
    auto write_all = [&](std::string_view chunk) {
        while (!chunk.empty()) {
            const auto n = ::write(fd, chunk.data(), chunk.size());
            if (n <= 0) throw Error(ErrorCode::Storage, "write to " + tmp.string() + " failed");
            chunk.remove_prefix(static_cast<std::size_t>(n));
        }
    };
    try {
        const std::size_t half = content.size() / 2;
        write_all(content.substr(0, half));
        if (hook) hook("partial");
        write_all(content.substr(half));
        if (::fsync(fd) != 0) throw Error(ErrorCode::Storage, "fsync of " + tmp.string() + " failed");
        ::close(fd);
        if (hook) hook("before_rename");
    } catch (...) {
        ::close(fd);
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::Storage, "cannot replace " + path.string());
    }
}

// ---------------------------------------------------------------------------
// Repository

Repository::Repository(fs::path root, RepositoryLayout layout) : root_(std::move(root)), layout_(std::move(layout)) {
    const auto catalog_path = path_of(layout_.catalog);
    if (!fs::exists(catalog_path)) throw Error(ErrorCode::MissingFile, "missing catalog " + catalog_path.string());
    catalog_ = parse_catalog(read_file(catalog_path));

    kb_.catalog = catalog_;
    kb_.cases = CaseBase(catalog_.size());
    kb_.adaptation_cases = AdaptationCaseBase(catalog_.size());
    if (auto p = path_of(layout_.prediagnosis_rules); fs::exists(p))
        kb_.prediagnosis_rules = parse_rules(read_file(p), catalog_, "prediagnosis");
    if (auto p = path_of(layout_.adaptation_rules); fs::exists(p))
        kb_.adaptation_rules = parse_rules(read_file(p), catalog_, "adaptation");
    if (auto p = path_of(layout_.cases); fs::exists(p)) kb_.cases = parse_case_file(read_file(p), catalog_.size());
    if (auto p = path_of(layout_.adaptation_cases); fs::exists(p))
        kb_.adaptation_cases = parse_adaptation_file(read_file(p), catalog_.size());
    if (auto p = path_of(layout_.probability_table); fs::exists(p)) {
        table_ = parse_probability_table(read_file(p), catalog_, &warnings_);
        table_->validate();
    }
    kb_.resolve_influential();
}

Knowledge Repository::snapshot() const {
    std::shared_lock lock(mutex_);
    return kb_;
}

std::uint64_t Repository::cases_revision() const noexcept {
    std::shared_lock lock(mutex_);
    return cases_revision_;
}

std::uint64_t Repository::adaptation_revision() const noexcept {
    std::shared_lock lock(mutex_);
    return adaptation_revision_;
}

void Repository::persist_cases_locked(const CaseBase& next) {
    const auto path = path_of(layout_.cases);
    FileLock lock(path);
    atomic_write_file(path, format_case_file(next), hook_);
}

void Repository::persist_adaptation_locked(const AdaptationCaseBase& next) {
    const auto path = path_of(layout_.adaptation_cases);
    FileLock lock(path);
    atomic_write_file(path, format_adaptation_file(next), hook_);
}

void Repository::append_case(const DiagnosticCase& c) {
    std::unique_lock lock(mutex_);
    if (kb_.cases.find(c.id)) throw Error(ErrorCode::IdCollision, "case id " + std::to_string(c.id) + " already exists");
    CaseBase next = kb_.cases;
    next.insert(c);
    persist_cases_locked(next);
    kb_.cases = std::move(next);
    ++cases_revision_;
}

CaseId Repository::add_case(SymptomVector description, Solution solution, bool success) {
    std::unique_lock lock(mutex_);
    CaseBase next = kb_.cases;
    const CaseId id = next.add(std::move(description), std::move(solution), success);
    persist_cases_locked(next);
    kb_.cases = std::move(next);
    ++cases_revision_;
    return id;
}

void Repository::append_adaptation_case(const AdaptationCase& c) {
    std::unique_lock lock(mutex_);
    if (kb_.adaptation_cases.find(c.id))
        throw Error(ErrorCode::IdCollision, "adaptation case id " + std::to_string(c.id) + " already exists");
    AdaptationCaseBase next = kb_.adaptation_cases;
    next.insert(c);
    persist_adaptation_locked(next);
    kb_.adaptation_cases = std::move(next);
    ++adaptation_revision_;
}

CaseId Repository::add_adaptation_case(DeltaVector d, Solution s1, Solution s2) {
    std::unique_lock lock(mutex_);
    AdaptationCaseBase next = kb_.adaptation_cases;
    const CaseId id = next.add(std::move(d), std::move(s1), std::move(s2));
    persist_adaptation_locked(next);
    kb_.adaptation_cases = std::move(next);
    ++adaptation_revision_;
    return id;
}

RetainResult Repository::retain(Session& session, bool retain_diagnostic, bool retain_adaptation) {
    std::unique_lock lock(mutex_);
    Knowledge work = kb_;
    Session draft = session;
    RetainResult result = mcbr::retain(draft, work, retain_diagnostic, retain_adaptation);
    if (result.case_id) persist_cases_locked(work.cases);
    if (result.adaptation_case_id) {
        try {
            persist_adaptation_locked(work.adaptation_cases);
        } catch (...) {
            // Keep both files in step: undo the diagnostic append.
            if (result.case_id) persist_cases_locked(kb_.cases);
            throw;
        }
    }
    kb_.cases = std::move(work.cases);
    kb_.adaptation_cases = std::move(work.adaptation_cases);
    if (result.case_id) ++cases_revision_;
    if (result.adaptation_case_id) ++adaptation_revision_;
    session = std::move(draft);
    return result;
}

void Repository::replace_cases(CaseBase base) {
    if (base.catalog_size() != catalog_.size())
        throw Error(ErrorCode::CatalogMismatch, "case base does not match the repository catalog");
    std::unique_lock lock(mutex_);
    persist_cases_locked(base);
    kb_.cases = std::move(base);
    ++cases_revision_;
}

std::string Repository::save_report(const ExperimentReport& report) {
    report.check_consistency();
    std::unique_lock lock(mutex_);
    const fs::path dir = path_of(layout_.reports);
    fs::create_directories(dir);
    // Held across picking the id and writing, so other processes cannot take it.
    FileLock dir_lock(dir / "reports");
    std::string id;
    for (std::size_t n = 1;; ++n) {
        std::ostringstream os;
        os << to_string(report.kind) << '-';
        os.width(4);
        os.fill('0');
        os << n;
        id = os.str();
        if (!fs::exists(dir / (id + ".json"))) break;
    }
    atomic_write_file(dir / (id + ".csv"), format_curve_csv(report, catalog_), hook_);
    atomic_write_file(dir / (id + ".json"), report_to_json(report, catalog_).dump(2) + "\n", hook_);
    return id;
}

ExperimentReport Repository::load_report(std::string_view id) const {
    const fs::path p = path_of(layout_.reports) / (std::string(id) + ".json");
    if (!fs::exists(p)) throw Error(ErrorCode::NotFound, "no report '" + std::string(id) + "'");
    try {
        return report_from_json(json::parse(read_file(p)), catalog_);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("report ") + std::string(id) + ": " + e.what());
    }
}

std::vector<std::string> Repository::report_ids() const {
    std::vector<std::string> out;
    const fs::path dir = path_of(layout_.reports);
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

Knowledge load_knowledge(const fs::path& root, const RepositoryLayout& layout) {
    Repository repo(root, layout);
    return repo.snapshot();
}

} // namespace mcbr
