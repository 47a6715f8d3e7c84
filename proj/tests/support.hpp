#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mcbr/store.hpp"

namespace mcbr::test {

inline std::filesystem::path data_dir() { return MCBR_TEST_DATA_DIR; }

inline const SymptomCatalog& shipped_catalog() {
    static const SymptomCatalog c = parse_catalog(read_file(data_dir() / "catalog.txt"));
    return c;
}

inline const ProbabilityTable& shipped_table() {
    static const ProbabilityTable t = parse_probability_table(read_file(data_dir() / "probabilities.tbl"), shipped_catalog());
    return t;
}

/// Shipped catalog and rules with empty case bases.
inline Knowledge shipped_rules_only() {
    Knowledge kb;
    kb.catalog = shipped_catalog();
    kb.cases = CaseBase(kb.catalog.size());
    kb.adaptation_cases = AdaptationCaseBase(kb.catalog.size());
    kb.prediagnosis_rules = parse_rules(read_file(data_dir() / "prediagnosis.rules"), kb.catalog, "prediagnosis");
    kb.adaptation_rules = parse_rules(read_file(data_dir() / "adaptation.rules"), kb.catalog, "adaptation");
    kb.resolve_influential();
    return kb;
}

inline SymptomCatalog numbered_catalog(std::size_t n) {
    std::vector<SymptomCatalog::Entry> e;
    for (std::size_t i = 0; i < n; ++i) e.push_back({"s" + std::to_string(i), false});
    return SymptomCatalog(std::move(e));
}

/// Removes the directory on scope exit.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "mcbr-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Copies the shipped data files (without cases or reports) into `dir`.
inline void copy_shipped_repo(const std::filesystem::path& dir) {
    for (const char* f : {"catalog.txt", "prediagnosis.rules", "adaptation.rules", "probabilities.tbl"})
        std::filesystem::copy_file(data_dir() / f, dir / f);
}

using Rng = std::mt19937_64;

inline bool coin(Rng& rng, double p = 0.5) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

inline SymptomVector random_vector(Rng& rng, std::size_t n, double p = 0.5) {
    SymptomVector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v.set(SymptomId{i}, coin(rng, p));
    return v;
}

inline Diagnosis random_diagnosis(Rng& rng) { return kAllDiagnoses[pick(rng, kDiagnosisCount)]; }

/// Non-empty solution with 0..2 distinct differentials.
inline Solution random_solution(Rng& rng) {
    std::vector<Diagnosis> all(kAllDiagnoses.begin(), kAllDiagnoses.end());
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t diffs = pick(rng, 3);
    return Solution(all[0], std::vector<Diagnosis>(all.begin() + 1, all.begin() + 1 + static_cast<std::ptrdiff_t>(diffs)));
}

inline DeltaVector random_delta(Rng& rng, std::size_t n) {
    DeltaVector d(n);
    for (std::uint32_t i = 0; i < n; ++i) d.set(SymptomId{i}, static_cast<DeltaValue>(pick(rng, 3)));
    return d;
}

/// Random rule over the first `symptoms` catalog entries.
inline Rule random_rule(Rng& rng, int id, std::size_t symptoms) {
    Rule r;
    r.id = "r" + std::to_string(id);
    r.kind = coin(rng, 0.3) ? RuleKind::PreDiagnosis : RuleKind::Adaptation;
    const std::size_t nc = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < nc; ++i) {
        Condition c;
        c.negated = coin(rng, 0.25);
        const SymptomId s{static_cast<std::uint32_t>(pick(rng, symptoms))};
        if (r.kind == RuleKind::PreDiagnosis) c.pattern = SymptomPresent{s};
        else if (coin(rng)) c.pattern = DeltaIs{s, coin(rng) ? DeltaValue::AddedInCurrent : DeltaValue::RemovedInCurrent};
        else c.pattern = HasRole{random_diagnosis(rng), coin(rng) ? Role::Primary : Role::Differential};
        r.conditions.push_back(c);
    }
    const std::size_t na = 1 + pick(rng, 2);
    for (std::size_t i = 0; i < na; ++i) {
        const auto k = r.kind == RuleKind::PreDiagnosis ? static_cast<ActionKind>(pick(rng, 2))
                                                        : static_cast<ActionKind>(pick(rng, 5));
        r.actions.push_back({k, random_diagnosis(rng)});
    }
    return r;
}

inline RuleBase random_rulebase(Rng& rng, std::size_t n, std::size_t symptoms) {
    RuleBase rb;
    for (std::size_t i = 0; i < n; ++i) rb.add(random_rule(rng, static_cast<int>(i), symptoms));
    return rb;
}

inline bool trace_equal(const std::vector<TraceEntry>& a, const std::vector<TraceEntry>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].rule_id != b[i].rule_id || !(a[i].action == b[i].action) || a[i].status != b[i].status ||
            a[i].displaced != b[i].displaced || a[i].note != b[i].note)
            return false;
    return true;
}

} // namespace mcbr::test
