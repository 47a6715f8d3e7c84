#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcbr/casegen.hpp"
#include "mcbr/eval.hpp"
#include "mcbr/session.hpp"

namespace mcbr {

// ---------------------------------------------------------------------------
// File formats. Every parser reports the offending 1-based line or record in
// Error::line().
//
// catalog.txt             "<index> <name> <influential 0|1>" per line
// cases.jsonl             {"id","symptoms":"0101..","primary","differentials","success"}
// adaptation_cases.jsonl  {"id","delta":"=+-..","s1":{..},"s2":{..}}
// probabilities.tbl       [priors] "<Diagnosis> <p>" lines, then [conditionals]
//                         with a "symptom <Diagnosis>..." header and one row per symptom
// reports/<id>.json       experiment report; reports/<id>.csv the curve table

SymptomCatalog parse_catalog(std::string_view text);
std::string format_catalog(const SymptomCatalog& catalog);

nlohmann::json solution_to_json(const Solution& s);
Solution solution_from_json(const nlohmann::json& j);

std::string format_case_record(const DiagnosticCase& c);
DiagnosticCase parse_case_record(std::string_view line, std::size_t catalog_size, std::size_t line_no = 0);
CaseBase parse_case_file(std::string_view text, std::size_t catalog_size);
std::string format_case_file(const CaseBase& base);

std::string format_adaptation_record(const AdaptationCase& c);
AdaptationCase parse_adaptation_record(std::string_view line, std::size_t catalog_size, std::size_t line_no = 0);
AdaptationCaseBase parse_adaptation_file(std::string_view text, std::size_t catalog_size);
std::string format_adaptation_file(const AdaptationCaseBase& base);

/// Missing symptom rows or disease columns default to 0 and are reported in
/// `warnings` when given.
ProbabilityTable parse_probability_table(std::string_view text, const SymptomCatalog& catalog,
                                         std::vector<std::string>* warnings = nullptr);
std::string format_probability_table(const ProbabilityTable& table, const SymptomCatalog& catalog);

nlohmann::json report_to_json(const ExperimentReport& report, const SymptomCatalog& catalog);
/// Also runs ExperimentReport::check_consistency().
ExperimentReport report_from_json(const nlohmann::json& j, const SymptomCatalog& catalog);
/// "iteration,accuracy,accuracy_lenient,removed_symptom" rows.
std::string format_curve_csv(const ExperimentReport& report, const SymptomCatalog& catalog);

nlohmann::json session_to_json(const Session& session, const SymptomCatalog& catalog);
Session session_from_json(const nlohmann::json& j, const SymptomCatalog& catalog);

nlohmann::json experiment_config_to_json(const ExperimentConfig& config, const SymptomCatalog& catalog);
/// Fields not present in `j` keep their value in `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const SymptomCatalog& catalog,
                                             ExperimentConfig base = {});

std::string read_file(const std::filesystem::path& path);

/// Called at named points of an atomic write ("partial", "before_rename");
/// a throwing hook simulates a crash at that point.
using FaultHook = std::function<void(std::string_view stage)>;

/// Writes to a temporary sibling, flushes, then renames over `path`.
void atomic_write_file(const std::filesystem::path& path, std::string_view content, const FaultHook& hook = {});

// ---------------------------------------------------------------------------

struct RepositoryLayout {
    std::string catalog = "catalog.txt";
    std::string cases = "cases.jsonl";
    std::string adaptation_cases = "adaptation_cases.jsonl";
    std::string prediagnosis_rules = "prediagnosis.rules";
    std::string adaptation_rules = "adaptation.rules";
    std::string probability_table = "probabilities.tbl";
    std::string reports = "reports";
};

/// On-disk knowledge: catalog, both case bases, both rule files and the
/// probability table under one root directory. Only the catalog is required;
/// absent case files load as empty bases and are created on first append.
///
/// Readers take a shared lock; appends and report writes are serialised per
/// repository and guarded by an advisory file lock.
class Repository {
public:
    explicit Repository(std::filesystem::path root, RepositoryLayout layout = {});

    Repository(const Repository&) = delete;
    Repository& operator=(const Repository&) = delete;

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path path_of(std::string_view file) const { return root_ / std::string(file); }
    const RepositoryLayout& layout() const noexcept { return layout_; }

    /// Copy of the current knowledge.
    Knowledge snapshot() const;
    const SymptomCatalog& catalog() const noexcept { return catalog_; }
    const std::optional<ProbabilityTable>& probability_table() const noexcept { return table_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    /// Runs `fn` with a shared lock held.
    template <typename Fn>
    auto read(Fn&& fn) const {
        std::shared_lock lock(mutex_);
        return fn(kb_);
    }

    /// Appends a case carrying its own id. Throws IdCollision (file unchanged).
    void append_case(const DiagnosticCase& c);
    /// Assigns max + 1 and appends.
    CaseId add_case(SymptomVector description, Solution solution, bool success);
    void append_adaptation_case(const AdaptationCase& c);
    CaseId add_adaptation_case(DeltaVector d, Solution s1, Solution s2);

    /// Runs session retain against the in-memory bases and persists whatever
    /// it stored. A storage failure rolls the in-memory bases back.
    RetainResult retain(Session& session, bool retain_diagnostic, bool retain_adaptation);

    /// Replaces the diagnostic case file (used by `gen`).
    void replace_cases(CaseBase base);

    /// Writes reports/<id>.json and reports/<id>.csv; returns the id.
    std::string save_report(const ExperimentReport& report);
    ExperimentReport load_report(std::string_view id) const;
    std::vector<std::string> report_ids() const;

    /// Bumped on every successful write to the respective base.
    std::uint64_t cases_revision() const noexcept;
    std::uint64_t adaptation_revision() const noexcept;

    void set_fault_hook(FaultHook hook) { hook_ = std::move(hook); }

private:
    void persist_cases_locked(const CaseBase& next);
    void persist_adaptation_locked(const AdaptationCaseBase& next);

    std::filesystem::path root_;
    RepositoryLayout layout_;
    SymptomCatalog catalog_;
    std::optional<ProbabilityTable> table_;
    std::vector<std::string> warnings_;
    Knowledge kb_;
    std::uint64_t cases_revision_ = 0;
    std::uint64_t adaptation_revision_ = 0;
    FaultHook hook_;
    mutable std::shared_mutex mutex_;
};

/// Knowledge from a repository-shaped directory without keeping it open.
Knowledge load_knowledge(const std::filesystem::path& root, const RepositoryLayout& layout = {});

} // namespace mcbr
