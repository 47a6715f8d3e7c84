#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "mcbr/store.hpp"

using namespace mcbr;

namespace {

const ProbabilityTable& bench_table() {
    static const ProbabilityTable t = Repository(MCBR_BENCH_DATA_DIR).probability_table().value();
    return t;
}

const Knowledge& bench_kb(std::size_t cases) {
    static std::map<std::size_t, Knowledge> cache;
    auto it = cache.find(cases);
    if (it != cache.end()) return it->second;
    Knowledge kb = load_knowledge(MCBR_BENCH_DATA_DIR);
    GeneratorConfig gen;
    gen.seed = 3;
    gen.n_cases = cases;
    kb.cases = synthetic_case_base(kb.catalog, bench_table(), gen);
    return cache.emplace(cases, std::move(kb)).first->second;
}

SymptomVector random_query(std::size_t n, std::mt19937_64& rng) {
    SymptomVector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v.set(SymptomId{i}, rng() % 5 == 0);
    return v;
}

void BM_Retrieve(benchmark::State& state) {
    const Knowledge& kb = bench_kb(static_cast<std::size_t>(state.range(0)));
    std::mt19937_64 rng(1);
    const SymptomVector q = random_query(kb.catalog.size(), rng);
    for (auto _ : state) benchmark::DoNotOptimize(retrieve(kb.cases, q));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kb.cases.size()));
}
BENCHMARK(BM_Retrieve)->Arg(200)->Arg(2000)->Arg(20000);

void BM_Diagnose(benchmark::State& state) {
    const Knowledge& kb = bench_kb(2000);
    std::mt19937_64 rng(2);
    const SymptomVector q = random_query(kb.catalog.size(), rng);
    for (auto _ : state) benchmark::DoNotOptimize(diagnose(kb, q, EngineConfig{}));
}
BENCHMARK(BM_Diagnose);

void BM_AdaptationRules(benchmark::State& state) {
    const Knowledge& kb = bench_kb(200);
    DeltaVector d(kb.catalog.size());
    d.set(kb.catalog.id("koch_bacillus"), DeltaValue::AddedInCurrent);
    const Solution s1(Diagnosis::ABM, {Diagnosis::Encephalitis});
    for (auto _ : state) benchmark::DoNotOptimize(apply_adaptation_rules(kb.adaptation_rules, d, s1));
}
BENCHMARK(BM_AdaptationRules);

void BM_Generate(benchmark::State& state) {
    const Knowledge& kb = bench_kb(200);
    GeneratorConfig gen;
    gen.n_cases = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(generate(bench_table(), gen));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(1000)->Arg(10000);

void BM_OracleLabel(benchmark::State& state) {
    const Knowledge& kb = bench_kb(200);
    std::mt19937_64 rng(4);
    const SymptomVector q = random_query(kb.catalog.size(), rng);
    for (auto _ : state) benchmark::DoNotOptimize(oracle_label(bench_table(), q));
}
BENCHMARK(BM_OracleLabel);

} // namespace
