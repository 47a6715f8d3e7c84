#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcbr/domain.hpp"

namespace mcbr {

/// Disease priors and per-disease symptom presence probabilities.
class ProbabilityTable {
public:
    ProbabilityTable() = default;
    explicit ProbabilityTable(std::size_t symptom_count);

    std::size_t symptom_count() const noexcept { return symptom_count_; }

    double prior(Diagnosis d) const noexcept { return priors_[index_of(d)]; }
    void set_prior(Diagnosis d, double p) { priors_[index_of(d)] = p; }

    double conditional(Diagnosis d, SymptomId s) const { return conditionals_.at(offset(d, s)); }
    void set_conditional(Diagnosis d, SymptomId s, double p) { conditionals_.at(offset(d, s)) = p; }

    /// Human-readable list of invariant violations; empty when valid.
    std::vector<std::string> issues() const;
    /// Throws Validation listing every issue.
    void validate() const;

    bool operator==(const ProbabilityTable&) const = default;

private:
    std::size_t offset(Diagnosis d, SymptomId s) const { return index_of(d) * symptom_count_ + s.value; }

    std::size_t symptom_count_ = 0;
    std::array<double, kDiagnosisCount> priors_{};
    std::vector<double> conditionals_;
};

enum class SamplingMode { Uniform, NormalJitter };

std::string_view to_string(SamplingMode m) noexcept;
std::optional<SamplingMode> parse_sampling_mode(std::string_view s) noexcept;

struct GeneratorConfig {
    std::size_t n_cases = 200;
    std::uint64_t seed = 1;
    double jitter_sigma = 0.0;
    SamplingMode mode = SamplingMode::Uniform;
};

struct GeneratedCase {
    Diagnosis true_disease = Diagnosis::ABM;
    SymptomVector description;
    bool operator==(const GeneratedCase&) const = default;
};

/// Random stream for one generated case, derived from (seed, case index) so
/// cases can be produced independently and in any order.
class CaseStream {
public:
    CaseStream(std::uint64_t seed, std::uint64_t index);
    /// Uniform in [0,1) with 53 random bits; identical on every platform.
    double uniform();
    /// Standard normal via Box-Muller over uniform().
    double gaussian();

private:
    std::mt19937_64 engine_;
};

/// Samples the disease from the priors, then each symptom as an independent
/// coin with the disease's conditional probability.
std::vector<GeneratedCase> generate(const ProbabilityTable& table, const GeneratorConfig& config);

/// Same, with the disease fixed.
std::vector<GeneratedCase> generate_for(const ProbabilityTable& table, Diagnosis disease,
                                        const GeneratorConfig& config);

struct Implausibility {
    std::string name;
    std::function<bool(const SymptomVector&)> matches;
};

Implausibility no_symptoms_predicate();
Implausibility exclusive_pair_predicate(const SymptomCatalog& catalog, std::string_view a, std::string_view b);

/// Pairs of CSF aspects that cannot be observed together.
std::vector<std::pair<std::string, std::string>> default_exclusive_pairs();

/// The no-symptom predicate plus one predicate per default exclusive pair
/// present in the catalog.
std::vector<Implausibility> default_predicates(const SymptomCatalog& catalog);

struct CullResult {
    std::vector<GeneratedCase> kept;
    std::vector<std::pair<GeneratedCase, std::vector<std::string>>> removed;
};

CullResult cull(const std::vector<GeneratedCase>& cases, const std::vector<Implausibility>& predicates);

inline constexpr double kOracleFloor = 1e-6;

/// Unnormalised naive-Bayes log joint per disease; empty for zero-prior diseases.
std::array<std::optional<double>, kDiagnosisCount> log_posteriors(const ProbabilityTable& table,
                                                                  const SymptomVector& description);

/// Top posterior as primary, next two as differentials. Ties follow label order;
/// zero-prior diseases are never proposed.
Solution oracle_label(const ProbabilityTable& table, const SymptomVector& description);

} // namespace mcbr
