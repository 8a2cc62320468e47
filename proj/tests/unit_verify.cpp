#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "posecgame/verify.hpp"

using namespace posecgame;
using testutil::GameBuilder;

namespace {

ObservationSpec observing(std::set<std::string> actions) {
    ObservationSpec obs;
    obs.observable_actions = std::move(actions);
    return obs;
}

}  // namespace

TEST_CASE("weak_closure: fully observable games move one step") {
    GameBuilder b({"x"});
    auto s0 = b.add_state({{"x", false}}, Player::Attacker);
    auto s1 = b.add_state({{"x", true}}, Player::Attacker);
    b.add_action(s0, "go", {{s1, 1.0}});
    b.add_action(s1, "stop", {{s1, 1.0}});
    StochasticGame g = b.build();
    WeakMoves moves = weak_closure(g, observing({"go", "stop"}));
    CHECK(moves.targets[s0] == std::vector<std::size_t>{s1});
    CHECK(moves.targets[s1] == std::vector<std::size_t>{s1});
}

TEST_CASE("weak_closure: two hidden steps then one observable collapse") {
    GameBuilder b({"x"});
    auto s0 = b.add_state({{"x", false}}, Player::Attacker);
    auto s1 = b.add_state({{"x", false}}, Player::Attacker);
    auto s2 = b.add_state({{"x", false}}, Player::Attacker);
    auto s3 = b.add_state({{"x", true}}, Player::Attacker);
    b.add_action(s0, "h1", {{s1, 1.0}});
    b.add_action(s1, "h2", {{s2, 1.0}});
    b.add_action(s2, "seen", {{s3, 1.0}});
    b.add_action(s3, "seen2", {{s3, 1.0}});
    StochasticGame g = b.build();
    WeakMoves moves = weak_closure(g, observing({"seen", "seen2"}));
    // the tau closure is reflexive, so every prefix completes with `seen`
    CHECK(moves.targets[s0] == std::vector<std::size_t>{s3});
    CHECK(moves.targets[s1] == std::vector<std::size_t>{s3});
    CHECK(moves.targets[s2] == std::vector<std::size_t>{s3});
}

TEST_CASE("check_weak_bisim: identity relation on a game against itself") {
    GameBuilder b({"x"});
    auto s0 = b.add_state({{"x", false}}, Player::Attacker);
    auto s1 = b.add_state({{"x", true}}, Player::Defender);
    b.add_action(s0, "go", {{s1, 1.0}});
    b.add_action(s1, "back", {{s0, 1.0}});
    StochasticGame g = b.build();
    Relation identity;
    identity.pairs = {{s0, s0}, {s1, s1}};
    ObservationSpec obs = observing({"go"});
    CHECK(check_weak_bisim(g, obs, g, obs, identity).holds);

    Relation missing_init;
    missing_init.pairs = {{s1, s1}};
    BisimResult r = check_weak_bisim(g, obs, g, obs, missing_init);
    CHECK_FALSE(r.holds);
    REQUIRE(r.counterexample);
    CHECK(r.counterexample->reason.find("initial") != std::string::npos);
}

TEST_CASE("check_weak_bisim: value disagreement on common variables is caught") {
    GameBuilder b({"x"});
    auto s0 = b.add_state({{"x", false}}, Player::Attacker);
    auto s1 = b.add_state({{"x", true}}, Player::Attacker);
    b.add_action(s0, "go", {{s1, 1.0}});
    b.add_action(s1, "stop", {{s1, 1.0}});
    StochasticGame g = b.build();
    Relation wrong;
    wrong.pairs = {{s0, s1}};
    ObservationSpec obs = observing({"go", "stop"});
    BisimResult r = check_weak_bisim(g, obs, g, obs, wrong);
    CHECK_FALSE(r.holds);
}

namespace {

struct Harness {
    OdtInstance inst;
    PoGame po;
    StochasticGame perfect;
};

Harness make_harness(uint64_t seed) {
    Harness h;
    h.inst = generate_odt_instance(seed);
    h.po = build_po_game(h.inst.graph, h.inst.rule_probs, h.inst.defender,
                         h.inst.observation, h.inst.scheduler, h.inst.rewards);
    h.perfect = transform(h.po);
    return h;
}

}  // namespace

TEST_CASE("generator: instances are valid ODT games") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        OdtInstance inst = generate_odt_instance(seed);
        CHECK(validate_graph(inst.graph).empty());
        CHECK(inst.goal_var == "goal");
        PoGame po = build_po_game(inst.graph, inst.rule_probs, inst.defender,
                                  inst.observation, inst.scheduler, inst.rewards);
        CHECK(odt_check(po));
        // same seed regenerates the same instance
        OdtInstance again = generate_odt_instance(seed);
        CHECK(again.graph.nodes.size() == inst.graph.nodes.size());
        CHECK(again.rule_probs == inst.rule_probs);
    }
}

TEST_CASE("candidate_relation: fully observable transformation is a bijection") {
    Harness h = make_harness(11);
    // force full observation on the same graph
    ObservationSpec all;
    for (const auto& [r, label] : rule_action_labels(h.inst.graph))
        all.observable_actions.insert(label);
    PoGame po = build_po_game(h.inst.graph, h.inst.rule_probs, h.inst.defender, all,
                              h.inst.scheduler, h.inst.rewards);
    StochasticGame perfect = transform(po);
    Relation r = candidate_relation(po, perfect);
    CHECK(r.pairs.size() == po.game.state_count());
    CHECK(po.game.state_count() == perfect.state_count());
    bool init_related = false;
    for (const auto& [a, b] : r.pairs)
        if (a == po.game.init && b == perfect.init) init_related = true;
    CHECK(init_related);
}

TEST_CASE("candidate relation witnesses the weak bisimulation on generated games") {
    for (uint64_t seed : {5ull, 6ull, 7ull}) {
        Harness h = make_harness(seed);
        Relation r = candidate_relation(h.po, h.perfect);
        BisimResult bisim =
            check_weak_bisim(h.po.game, h.po.observation, h.perfect, h.po.observation, r);
        CHECK(bisim.holds);
    }
}

TEST_CASE("dual_check: agreement on the probability fragment, X skipped") {
    Harness h = make_harness(8);
    std::vector<std::string> formulas = {
        "<<def>> Pmax=? [ F \"goal\" ]",
        "<<def>> Pmin=? [ F \"goal\" ]",
        "<<def>> Pmax=? [ X \"goal\" ]",
    };
    AgreementReport report =
        dual_check(h.po, h.perfect, formulas, ValueIterationSettings{1e-12, 1'000'000});
    REQUIRE(report.formulas.size() == 3);
    CHECK_FALSE(report.formulas[0].skipped);
    CHECK(report.formulas[0].pass);
    CHECK(report.formulas[1].pass);
    CHECK(report.formulas[2].skipped);
    CHECK(report.formulas[2].skip_reason.find("fragment") != std::string::npos);
    CHECK(report.to_json().find("formulas") != std::string::npos);
}

TEST_CASE("aggregated rewards do not preserve expected costs under retries") {
    // two-rule hidden chain: per-step retries charge c1/p1 + c2/p2 in the
    // PO game but (c1+c2)/(p1*p2) after aggregation; the step-unbounded
    // fragment of the dual harness therefore covers probabilities only
    AttackGraph g;
    g.nodes = {{1, NodeKind::Derived, "goal", {}},
               {2, NodeKind::Rule, "finish", {}},
               {3, NodeKind::Derived, "mid", {}},
               {4, NodeKind::Rule, "sneak", {}},
               {5, NodeKind::Condition, "c0", {}}};
    g.edges = {{5, 4}, {4, 3}, {3, 2}, {2, 1}};
    g.goal = 1;
    std::map<int, double> p{{2, 0.5}, {4, 0.5}};
    Smdp attacker = attacker_smdp(g, p);
    Smdp defender = defender_smdp(DefenseSpec{}, attacker, {});
    RewardStructure costs{"aCosts", {{"finish", 1.0}, {"sneak", 1.0}}};
    ObservationSpec obs;
    obs.observable_actions.insert("finish");
    PoGame po = build_po_game(g, p, defender, obs, Scheduler::trigger_set({"finish"}),
                              {costs});
    StochasticGame perfect = transform(po);
    ValueIterationSettings tight{1e-12, 1'000'000};
    FormulaPtr f = parse_rpatl("<<att>> R{aCosts}min=? [ F \"goal\" ]");
    double po_cost = check(po.game, f, tight).values[po.game.init];
    double perfect_cost = check(perfect, f, tight).values[perfect.init];
    CHECK(po_cost == doctest::Approx(4.0).epsilon(1e-9));       // 1/.5 + 1/.5
    CHECK(perfect_cost == doctest::Approx(8.0).epsilon(1e-9));  // 2/.25
}

TEST_CASE("strategy_equiv: lifted strategies reproduce the value") {
    for (uint64_t seed : {21ull, 22ull}) {
        Harness h = make_harness(seed);
        AgreementReport report =
            strategy_equiv(h.po, h.perfect, "<<def>> Pmin=? [ F \"goal\" ]",
                           ValueIterationSettings{1e-12, 1'000'000});
        CHECK(report.all_pass);
    }
}

TEST_CASE("strategy_equiv: fully observable strategies agree pointwise") {
    Harness h = make_harness(23);
    ObservationSpec all;
    for (const auto& [r, label] : rule_action_labels(h.inst.graph))
        all.observable_actions.insert(label);
    PoGame po = build_po_game(h.inst.graph, h.inst.rule_probs, h.inst.defender, all,
                              h.inst.scheduler, h.inst.rewards);
    StochasticGame perfect = transform(po);
    AgreementReport report = strategy_equiv(po, perfect, "<<def>> Pmin=? [ F \"goal\" ]",
                                            ValueIterationSettings{1e-12, 1'000'000});
    CHECK(report.all_pass);
    CHECK(report.formulas.front().delta <= 1e-9);
}

TEST_CASE("monte_carlo: deterministic win estimates exactly one") {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    b.add_action(s0, "go", {{s1, 1.0}});
    b.add_action(s1, "stay", {{s1, 1.0}});
    StochasticGame g = b.build();
    Strategy none;
    MonteCarloResult r =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 2000, 16, 42);
    CHECK(r.estimate == 1.0);
    CHECK(r.ci_high <= 1.0);
}

TEST_CASE("monte_carlo: reproducible per seed and close to the exact value") {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    auto s2 = b.add_state({{"goal", false}}, Player::Attacker);
    b.add_action(s0, "try", {{s1, 0.74}, {s2, 0.26}});
    b.add_action(s1, "w", {{s1, 1.0}});
    b.add_action(s2, "l", {{s2, 1.0}});
    StochasticGame g = b.build();
    Strategy none;
    MonteCarloResult a =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 100000, 8, 7);
    MonteCarloResult b2 =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 100000, 8, 7);
    CHECK(a.estimate == b2.estimate);
    double se = std::sqrt(0.74 * 0.26 / 100000.0);
    CHECK(std::abs(a.estimate - 0.74) <= 3 * se);
    CHECK(a.ci_low <= 0.74);
    CHECK(a.ci_high >= 0.74);

    MonteCarloResult other =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 100000, 8, 8);
    CHECK(other.estimate != a.estimate);  // a different seed resamples
}

TEST_CASE("monte_carlo: tenfold runs shrink the interval about sqrt(10)") {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    auto s2 = b.add_state({{"goal", false}}, Player::Attacker);
    b.add_action(s0, "try", {{s1, 0.5}, {s2, 0.5}});
    b.add_action(s1, "w", {{s1, 1.0}});
    b.add_action(s2, "l", {{s2, 1.0}});
    StochasticGame g = b.build();
    Strategy none;
    MonteCarloResult narrow =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 100000, 8, 3);
    MonteCarloResult wide =
        monte_carlo(g, none, AttackerPolicy::Uniform, "goal", 10000, 8, 3);
    double ratio = (wide.ci_high - wide.ci_low) / (narrow.ci_high - narrow.ci_low);
    CHECK(ratio > 2.5);
    CHECK(ratio < 4.0);
}

TEST_CASE("verify_soundness: a small seeded batch passes") {
    SoundnessReport report =
        verify_soundness(6, 100, GeneratorOptions{}, ValueIterationSettings{1e-12, 1'000'000});
    CHECK(report.instances == 6);
    CHECK(report.all_pass());
}
