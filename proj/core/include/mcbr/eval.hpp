#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcbr/casegen.hpp"
#include "mcbr/session.hpp"

namespace mcbr {

enum class ExperimentKind { Accuracy, Robustness, Learning };

std::string_view to_string(ExperimentKind k) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) noexcept;

struct ExperimentConfig {
    EngineConfig engine;
    std::uint64_t seed = 1;
    /// Held-out sample size when not running leave-one-out.
    std::size_t sample_size = 30;
    bool leave_one_out = false;
    /// Leave the sample in the base (exact-twin ceiling run).
    bool keep_sample_in_base = false;
    /// Symptoms forced absent, one more per robustness iteration.
    std::vector<SymptomId> removal_schedule;
    /// Learning loop retention switches.
    bool retain_diagnostic = true;
    bool retain_adaptation = true;
    bool operator==(const ExperimentConfig&) const = default;
};

struct CaseRecord {
    std::size_t iteration = 0;
    std::size_t phase = 0;
    CaseId query_id = 0;
    Solution proposed;
    Solution oracle;
    bool strict_hit = false;
    bool lenient_hit = false;
    ProvenanceKind provenance = ProvenanceKind::None;
    std::optional<AdaptationSource> adaptation_source;
    bool operator==(const CaseRecord&) const = default;
};

struct CurvePoint {
    std::size_t iteration = 0;
    /// Symptom newly removed at this iteration (none for iteration 0).
    std::optional<SymptomId> removed;
    double accuracy = 0.0;
    double accuracy_lenient = 0.0;
    std::size_t cases = 0;
    bool operator==(const CurvePoint&) const = default;
};

struct PhaseSummary {
    std::size_t phase = 0;
    std::size_t queries = 0;
    std::size_t case_base_size = 0;
    std::size_t adaptation_base_size = 0;
    std::size_t prediagnosis = 0;
    std::size_t direct_reuse = 0;
    std::size_t case_reused = 0;
    std::size_t rule_derived = 0;
    std::size_t undetermined = 0;
    double accuracy = 0.0;
    /// case_reused / (case_reused + rule_derived); 0 when no adaptation ran.
    double case_reused_fraction = 0.0;
    bool operator==(const PhaseSummary&) const = default;
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::Accuracy;
    ExperimentConfig config;
    std::vector<CaseId> sample_ids;

    std::vector<CaseRecord> records;

    // Aggregates over iteration 0 (accuracy/robustness) or the whole stream.
    std::size_t hits_strict = 0;
    std::size_t hits_lenient = 0;
    std::size_t evaluated = 0;
    double accuracy = 0.0;
    double accuracy_lenient = 0.0;
    double majority_baseline = 0.0;

    std::vector<CurvePoint> curve;
    std::vector<PhaseSummary> phases;

    /// Reference figures the synthetic setup cannot reproduce; kept for
    /// side-by-side reading only.
    std::optional<double> reference_accuracy;
    std::optional<std::size_t> reference_sample_size;
    std::optional<double> reference_plateau;

    /// Recomputes every aggregate from the per-case records and throws
    /// Validation on any mismatch.
    void check_consistency() const;

    bool operator==(const ExperimentReport&) const = default;
};

/// Each sample case is diagnosed against the base without it (or with it,
/// when keep_sample_in_base is set) and scored against its stored solution.
ExperimentReport accuracy_experiment(const Knowledge& kb, const ExperimentConfig& config);

/// Iteration 0 is the accuracy baseline; iteration i forces the first i
/// scheduled symptoms absent in every query. Stored cases are untouched.
ExperimentReport robustness_experiment(const Knowledge& kb, const ExperimentConfig& config);

struct LabeledQuery {
    CaseId id = 0;
    SymptomVector description;
    Solution oracle;
};

/// diagnose -> revise (the oracle plays the clinician) -> retain over each
/// phase in order, against a private copy of `kb`.
ExperimentReport learning_experiment(const Knowledge& kb, const std::vector<std::vector<LabeledQuery>>& phases,
                                     const ExperimentConfig& config);

/// Fraction of `oracles` whose primary equals the most frequent primary.
double majority_baseline(const std::vector<Solution>& oracles);

/// Default removal order: subtle laboratory and imaging findings first, then
/// finer clinical signs, then overt ones. Names missing from the catalog are
/// skipped.
std::vector<SymptomId> default_removal_schedule(const SymptomCatalog& catalog);

/// Cases generated from `table`, culled with the default predicates, labelled
/// by the oracle and numbered from 1.
CaseBase synthetic_case_base(const SymptomCatalog& catalog, const ProbabilityTable& table,
                             const GeneratorConfig& config);

inline constexpr std::uint64_t kStreamSeedSalt = 0x9e3779b97f4a7c15ULL;

/// Phases of oracle-labelled queries for the learning experiment. With
/// `repeat_first`, every phase after the first is a shuffled copy of it.
/// Generation uses `seed ^ kStreamSeedSalt`.
std::vector<std::vector<LabeledQuery>> synthetic_stream(const SymptomCatalog& catalog, const ProbabilityTable& table,
                                                        std::size_t phases, std::size_t per_phase,
                                                        std::uint64_t seed, bool repeat_first);

} // namespace mcbr
