#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace mcbr;
using namespace mcbr::test;

namespace {

const SymptomCatalog& cat() { return shipped_catalog(); }

DeltaVector added(std::initializer_list<const char*> names) {
    DeltaVector d(cat().size());
    for (auto n : names) d.set(cat().id(n), DeltaValue::AddedInCurrent);
    return d;
}

const Solution abm_enc(Diagnosis::ABM, {Diagnosis::Encephalitis});

} // namespace

TEST_CASE("delta similarity only looks at influential symptoms") {
    DeltaVector a(6), b(6);
    a.set(SymptomId{0}, DeltaValue::AddedInCurrent);
    b.set(SymptomId{0}, DeltaValue::AddedInCurrent);
    a.set(SymptomId{1}, DeltaValue::RemovedInCurrent);
    a.set(SymptomId{5}, DeltaValue::AddedInCurrent); // not influential
    const std::vector<SymptomId> infl{SymptomId{0}, SymptomId{1}, SymptomId{2}, SymptomId{3}};
    CHECK(delta_similarity(a, b, infl) == 0.75);
    CHECK(delta_similarity(a, a, infl) == 1.0);
    CHECK_THROWS_AS(delta_similarity(a, b, {}), Error);
}

TEST_CASE("adaptation retrieval requires an identical s1 and breaks ties by id") {
    AdaptationCaseBase base(4);
    const DeltaVector d = DeltaVector::parse("+===");
    base.insert({4, d, abm_enc, Solution(Diagnosis::Encephalitis)});
    base.insert({2, d, abm_enc, Solution(Diagnosis::Meningism)});
    base.insert({1, d, Solution(Diagnosis::ABM), Solution(Diagnosis::BrainTumor)});
    const std::vector<SymptomId> infl{SymptomId{0}, SymptomId{1}};
    const auto m = retrieve_adaptation(base, d, abm_enc, infl);
    REQUIRE(m);
    CHECK(m->case_id == 2);
    CHECK(m->score == 1.0);
    CHECK_FALSE(retrieve_adaptation(base, d, Solution(Diagnosis::Meningism), infl));
    // Role order matters.
    CHECK_FALSE(retrieve_adaptation(base, d, Solution(Diagnosis::Encephalitis, {Diagnosis::ABM}), infl));
}

TEST_CASE("reference rule effects through the adaptation rules") {
    const Knowledge kb = shipped_rules_only();

    SUBCASE("Koch's bacillus added discards ABM") {
        const auto r = apply_adaptation_rules(kb.adaptation_rules, added({"koch_bacillus"}), abm_enc);
        CHECK_FALSE(r.s2.contains(Diagnosis::ABM));
        CHECK(r.s2 == Solution(Diagnosis::TuberculousMeningitis, {Diagnosis::Encephalitis}));
        CHECK(r.fired == std::vector<std::string>{"koch_discards_abm", "koch_suggests_tbm"});
    }
    SUBCASE("crystalline CSF added demotes a primary ABM") {
        const auto r = apply_adaptation_rules(kb.adaptation_rules, added({"csf_crystalline_aspect"}), abm_enc);
        CHECK(r.s2 == Solution(Diagnosis::Encephalitis, {Diagnosis::ABM}));
        CHECK(r.promoted_on_readback == Diagnosis::Encephalitis);

        const auto bare = apply_adaptation_rules(kb.adaptation_rules, added({"csf_crystalline_aspect"}),
                                                 Solution(Diagnosis::ABM));
        CHECK(bare.s2 == Solution(Diagnosis::TuberculousMeningitis, {Diagnosis::ABM}));
    }
    SUBCASE("crystalline CSF with ABM only a differential") {
        const Solution s1(Diagnosis::Meningism, {Diagnosis::ABM});
        const auto r = apply_adaptation_rules(kb.adaptation_rules, added({"csf_crystalline_aspect"}), s1);
        CHECK(r.s2 == Solution(Diagnosis::Meningism, {Diagnosis::ABM, Diagnosis::TuberculousMeningitis}));
    }
}

TEST_CASE("read-back") {
    const SymptomCatalog c = numbered_catalog(2);
    SUBCASE("everything discarded is undetermined") {
        const RuleBase rb = parse_rules("ADAPT IF added(s0) THEN discard(ABM) AND discard(Meningism)\n", c);
        const auto r = apply_adaptation_rules(rb, DeltaVector::parse("+="), Solution(Diagnosis::ABM, {Diagnosis::Meningism}));
        CHECK(r.undetermined);
        CHECK(r.s2.empty());
    }
    SUBCASE("a third differential is dropped") {
        const RuleBase rb = parse_rules("ADAPT IF added(s0) THEN primary(BrainTumor)\n", c);
        const auto r = apply_adaptation_rules(rb, DeltaVector::parse("+="),
                                              Solution(Diagnosis::ABM, {Diagnosis::Meningism, Diagnosis::Encephalitis}));
        CHECK(r.s2 == Solution(Diagnosis::BrainTumor, {Diagnosis::Meningism, Diagnosis::Encephalitis}));
        CHECK(r.dropped_on_readback == std::vector<Diagnosis>{Diagnosis::ABM});
    }
    SUBCASE("a lone demoted primary comes back") {
        const RuleBase rb = parse_rules("ADAPT IF added(s0) THEN demote(ABM)\n", c);
        const auto r = apply_adaptation_rules(rb, DeltaVector::parse("+="), Solution(Diagnosis::ABM));
        CHECK(r.s2 == Solution(Diagnosis::ABM));
    }
    SUBCASE("empty s1 is rejected") {
        const RuleBase rb;
        CHECK_THROWS_AS(apply_adaptation_rules(rb, DeltaVector(2), Solution{}), Error);
    }
}

TEST_CASE("null delta leaves the solution unchanged") {
    const Knowledge kb = shipped_rules_only();
    Rng rng(31);
    for (int t = 0; t < 1000; ++t) {
        const Solution s1 = random_solution(rng);
        const AdaptationOutcome out =
            adapt(DeltaVector(cat().size()), s1, kb.adaptation_cases, kb.adaptation_rules, 0.9, kb.influential);
        CHECK(out.s2 == s1);
        CHECK(out.source == AdaptationSource::RuleDerived);
    }
    // Also with rules that only test roles and would fire on any delta.
    const RuleBase eager = parse_rules("ADAPT IF role(ABM,primary) THEN discard(ABM)\n", cat());
    const auto out = adapt(DeltaVector(cat().size()), abm_enc, kb.adaptation_cases, eager, 0.9, kb.influential);
    CHECK(out.s2 == abm_enc);
    REQUIRE(out.rules);
    CHECK(out.rules->fired.empty());
}

TEST_CASE("adapt reuses a stored case at or above tau_adapt") {
    Knowledge kb = shipped_rules_only();
    const DeltaVector d = added({"koch_bacillus"});
    const Solution s2(Diagnosis::Meningism);
    kb.adaptation_cases.add(d, abm_enc, s2);

    auto out = adapt(d, abm_enc, kb.adaptation_cases, kb.adaptation_rules, 0.9, kb.influential);
    CHECK(out.source == AdaptationSource::CaseReused);
    CHECK(out.s2 == s2);
    REQUIRE(out.reused);
    CHECK(out.reused->score == 1.0);

    // Influential = symptoms the rules mention: Koch, crystalline, tomography.
    // One of the three differs: 2/3 < 0.9.
    DeltaVector d2 = d;
    d2.set(cat().id("tumors_in_tomography"), DeltaValue::AddedInCurrent);
    REQUIRE(kb.influential.size() == 3);
    out = adapt(d2, abm_enc, kb.adaptation_cases, kb.adaptation_rules, 0.9, kb.influential);
    CHECK(out.source == AdaptationSource::RuleDerived);
    REQUIRE(out.best_candidate);
    CHECK(out.best_candidate->score == 2.0 / 3.0);
    out = adapt(d2, abm_enc, kb.adaptation_cases, kb.adaptation_rules, 2.0 / 3.0, kb.influential);
    CHECK(out.source == AdaptationSource::CaseReused);
}

TEST_CASE("rule path equals the step-by-step simulator") {
    const SymptomCatalog c = numbered_catalog(2);
    const std::vector<std::string> pool = {
        "p0: ADAPT IF added(s0) THEN discard(ABM)",
        "p1: ADAPT IF role(ABM,primary) AND added(s1) THEN demote(ABM)",
        "p2: ADAPT IF added(s1) AND not role(TuberculousMeningitis,primary) THEN differential(TuberculousMeningitis)",
        "p3: ADAPT IF removed(s0) THEN primary(Encephalitis)",
        "p4: ADAPT IF role(Encephalitis,differential) THEN promote(Encephalitis)",
        "p5: ADAPT IF not added(s1) AND role(ABM,differential) THEN primary(ABM) AND differential(Meningism)",
    };
    const std::vector<Solution> s1s = {
        Solution(Diagnosis::ABM), abm_enc, Solution(Diagnosis::Encephalitis, {Diagnosis::ABM}),
        Solution(Diagnosis::TuberculousMeningitis, {Diagnosis::ABM, Diagnosis::Encephalitis}),
        Solution(Diagnosis::Meningism, {Diagnosis::Encephalitis})};
    std::vector<DeltaVector> deltas;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            deltas.push_back(DeltaVector({static_cast<DeltaValue>(a), static_cast<DeltaValue>(b)}));

    std::size_t checked = 0;
    // Every ordered selection of up to three pool rules.
    std::vector<std::size_t> pick_idx;
    std::function<void()> walk = [&] {
        if (!pick_idx.empty()) {
            std::string text;
            for (auto i : pick_idx) text += pool[i] + "\n";
            const RuleBase rb = parse_rules(text, c);
            for (const auto& d : deltas)
                for (const auto& s1 : s1s) {
                    const auto got = apply_adaptation_rules(rb, d, s1);
                    const auto want = oracle::AdaptationSimulator::run(rb, d, s1);
                    CHECK(got.s2 == want.s2);
                    CHECK(got.fired == want.fired);
                    ++checked;
                }
        }
        if (pick_idx.size() == 3) return;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (std::find(pick_idx.begin(), pick_idx.end(), i) != pick_idx.end()) continue;
            pick_idx.push_back(i);
            walk();
            pick_idx.pop_back();
        }
    };
    walk();
    CHECK(checked == (6 + 30 + 120) * deltas.size() * s1s.size());
}
