#include "mcbr/casegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mcbr {

ProbabilityTable::ProbabilityTable(std::size_t symptom_count)
    : symptom_count_(symptom_count), conditionals_(kDiagnosisCount * symptom_count, 0.0) {}

std::vector<std::string> ProbabilityTable::issues() const {
    std::vector<std::string> out;
    auto bad = [](double p) { return !(p >= 0.0 && p <= 1.0); };
    double sum = 0.0;
    for (auto d : kAllDiagnoses) {
        const double p = prior(d);
        if (bad(p)) out.push_back("prior of " + std::string(to_string(d)) + " is " + std::to_string(p));
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os.precision(12);
        os << "priors sum to " << sum;
        out.push_back(os.str());
    }
    if (conditionals_.size() != kDiagnosisCount * symptom_count_) out.push_back("conditional matrix has wrong size");
    for (auto d : kAllDiagnoses)
        for (std::uint32_t s = 0; s < symptom_count_; ++s) {
            const double p = conditional(d, SymptomId{s});
            if (bad(p))
                out.push_back("conditional of symptom " + std::to_string(s) + " under " + std::string(to_string(d)) +
                              " is " + std::to_string(p));
        }
    return out;
}

void ProbabilityTable::validate() const {
    const auto list = issues();
    if (list.empty()) return;
    std::string msg = "invalid probability table:";
    for (const auto& i : list) msg += "\n  " + i;
    throw Error(ErrorCode::Validation, msg);
}

std::string_view to_string(SamplingMode m) noexcept { return m == SamplingMode::Uniform ? "uniform" : "normal_jitter"; }

std::optional<SamplingMode> parse_sampling_mode(std::string_view s) noexcept {
    if (s == "uniform") return SamplingMode::Uniform;
    if (s == "normal_jitter" || s == "jitter") return SamplingMode::NormalJitter;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

CaseStream::CaseStream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
}

double CaseStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double CaseStream::gaussian() {
    const double u1 = 1.0 - uniform(); // (0,1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

SymptomVector sample_description(const ProbabilityTable& table, Diagnosis disease, const GeneratorConfig& config,
                                 CaseStream& stream) {
    SymptomVector v(table.symptom_count());
    for (std::uint32_t s = 0; s < table.symptom_count(); ++s) {
        double p = table.conditional(disease, SymptomId{s});
        if (config.mode == SamplingMode::NormalJitter)
            p = std::clamp(p + config.jitter_sigma * stream.gaussian(), 0.0, 1.0);
        v.set(SymptomId{s}, stream.uniform() < p);
    }
    return v;
}

Diagnosis sample_disease(const ProbabilityTable& table, CaseStream& stream) {
    const double u = stream.uniform();
    double cumulative = 0.0;
    std::optional<Diagnosis> last_nonzero;
    for (auto d : kAllDiagnoses) {
        if (table.prior(d) <= 0.0) continue;
        cumulative += table.prior(d);
        last_nonzero = d;
        if (u < cumulative) return d;
    }
    // Rounding can leave the cumulative sum a hair below 1.
    return *last_nonzero;
}

void check_config(const GeneratorConfig& config) {
    if (config.n_cases == 0) throw Error(ErrorCode::Configuration, "n_cases must be positive");
    if (!(config.jitter_sigma >= 0.0)) throw Error(ErrorCode::Configuration, "jitter_sigma must be >= 0");
}

} // namespace

std::vector<GeneratedCase> generate(const ProbabilityTable& table, const GeneratorConfig& config) {
    table.validate();
    check_config(config);
    std::vector<GeneratedCase> out;
    out.reserve(config.n_cases);
    for (std::size_t i = 0; i < config.n_cases; ++i) {
        CaseStream stream(config.seed, i);
        const Diagnosis d = sample_disease(table, stream);
        out.push_back({d, sample_description(table, d, config, stream)});
    }
    return out;
}

std::vector<GeneratedCase> generate_for(const ProbabilityTable& table, Diagnosis disease,
                                        const GeneratorConfig& config) {
    table.validate();
    check_config(config);
    std::vector<GeneratedCase> out;
    out.reserve(config.n_cases);
    for (std::size_t i = 0; i < config.n_cases; ++i) {
        CaseStream stream(config.seed, i);
        out.push_back({disease, sample_description(table, disease, config, stream)});
    }
    return out;
}

// ---------------------------------------------------------------------------

Implausibility no_symptoms_predicate() {
    return {"no_symptoms", [](const SymptomVector& v) { return v.count() == 0; }};
}

Implausibility exclusive_pair_predicate(const SymptomCatalog& catalog, std::string_view a, std::string_view b) {
    const SymptomId ia = catalog.id(a);
    const SymptomId ib = catalog.id(b);
    return {"exclusive:" + std::string(a) + "+" + std::string(b),
            [ia, ib](const SymptomVector& v) { return v.test(ia) && v.test(ib); }};
}

std::vector<std::pair<std::string, std::string>> default_exclusive_pairs() {
    return {{"csf_cloudy_aspect", "csf_clear_aspect"}, {"csf_cloudy_aspect", "csf_crystalline_aspect"}};
}

std::vector<Implausibility> default_predicates(const SymptomCatalog& catalog) {
    std::vector<Implausibility> out{no_symptoms_predicate()};
    for (const auto& [a, b] : default_exclusive_pairs())
        if (catalog.find(a) && catalog.find(b)) out.push_back(exclusive_pair_predicate(catalog, a, b));
    return out;
}

CullResult cull(const std::vector<GeneratedCase>& cases, const std::vector<Implausibility>& predicates) {
    CullResult result;
    for (const auto& c : cases) {
        std::vector<std::string> reasons;
        for (const auto& p : predicates)
            if (p.matches(c.description)) reasons.push_back(p.name);
        if (reasons.empty()) result.kept.push_back(c);
        else result.removed.emplace_back(c, std::move(reasons));
    }
    return result;
}

// ---------------------------------------------------------------------------

std::array<std::optional<double>, kDiagnosisCount> log_posteriors(const ProbabilityTable& table,
                                                                  const SymptomVector& description) {
    if (description.size() != table.symptom_count())
        throw Error(ErrorCode::CatalogMismatch, "description length does not match the probability table");
    std::array<std::optional<double>, kDiagnosisCount> out{};
    for (auto d : kAllDiagnoses) {
        const double prior = table.prior(d);
        if (prior <= 0.0) continue;
        double score = std::log(prior);
        for (std::uint32_t s = 0; s < table.symptom_count(); ++s) {
            const double p = table.conditional(d, SymptomId{s});
            score += description.test(SymptomId{s}) ? std::log(std::max(p, kOracleFloor))
                                                    : std::log(std::max(1.0 - p, kOracleFloor));
        }
        out[index_of(d)] = score;
    }
    return out;
}

Solution oracle_label(const ProbabilityTable& table, const SymptomVector& description) {
    const auto scores = log_posteriors(table, description);
    std::vector<Diagnosis> order;
    for (auto d : kAllDiagnoses)
        if (scores[index_of(d)]) order.push_back(d);
    std::stable_sort(order.begin(), order.end(),
                     [&](Diagnosis a, Diagnosis b) { return *scores[index_of(a)] > *scores[index_of(b)]; });
    if (order.empty()) return Solution{};
    std::vector<Diagnosis> diffs(order.begin() + 1, order.begin() + std::min<std::ptrdiff_t>(3, order.size()));
    return Solution(order.front(), std::move(diffs));
}

} // namespace mcbr
