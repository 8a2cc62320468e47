#include <doctest.h>

#include "fixtures.hpp"
#include "posecgame/game.hpp"

using namespace posecgame;

namespace {

AttackGraph one_rule_graph() {
    AttackGraph g;
    g.nodes = {{1, NodeKind::Derived, "e", {}},
               {2, NodeKind::Rule, "strike", {}},
               {3, NodeKind::Condition, "c", {}}};
    g.edges = {{2, 1}, {3, 2}};
    g.goal = 1;
    return g;
}

Smdp patch_defender(const Smdp& attacker, double prob) {
    DefenseSpec spec = parse_defense_spec(
        R"([{"name": "patch", "guard": "e",
             "updates": [{"assign": {"e": false}, "prob": )" +
        std::to_string(prob) + R"(}, {"assign": {}, "prob": )" +
        std::to_string(1.0 - prob) + R"(}], "cost": 5}])");
    return defender_smdp(spec, attacker, {"e"});
}

Smdp deterministic_patch(const Smdp& attacker) {
    DefenseSpec spec = parse_defense_spec(
        R"([{"name": "patch", "guard": "e",
             "updates": [{"assign": {"e": false}, "prob": 1.0}], "cost": 5}])");
    return defender_smdp(spec, attacker, {"e"});
}

}  // namespace

TEST_CASE("scheduler: alternation and trigger sets") {
    Scheduler alt = Scheduler::strict_alternation();
    CHECK(alt.next(Player::Attacker, "x") == Player::Defender);
    CHECK(alt.next(Player::Defender, "y") == Player::Attacker);

    Scheduler trig = Scheduler::trigger_set({"remote_DOS"});
    CHECK(trig.next(Player::Attacker, "remote_DOS") == Player::Defender);
    CHECK(trig.next(Player::Attacker, "remote_DOS#7") == Player::Defender);  // by type
    CHECK(trig.next(Player::Attacker, "other") == Player::Attacker);
    CHECK(trig.next(Player::Defender, "patch") == Player::Attacker);
}

TEST_CASE("compose: observer defender gets a synthetic idle loop") {
    Smdp attacker = attacker_smdp(one_rule_graph(), {{2, 0.74}});
    Smdp defender = defender_smdp(DefenseSpec{}, attacker, {"e"});
    StochasticGame g = compose(expand(attacker), expand(defender),
                               Scheduler::strict_alternation(), {});
    bool saw_idle = false;
    for (std::size_t s = 0; s < g.state_count(); ++s) {
        if (g.turn(s) != Player::Defender) continue;
        REQUIRE(g.trans[s].size() == 1);
        CHECK(g.trans[s].front().first == kIdleDefender);
        saw_idle = true;
    }
    CHECK(saw_idle);
    CHECK(g.defender_actions.count(kIdleDefender) == 1);
}

TEST_CASE("compose: hand-enumerated product with a deterministic patch") {
    Smdp attacker = attacker_smdp(one_rule_graph(), {{2, 0.74}});
    StochasticGame g = compose(expand(attacker), expand(deterministic_patch(attacker)),
                               Scheduler::strict_alternation(), {});
    // states: (e=0,A), (e=0,D), (e=1,D); the patch always clears e
    CHECK(g.state_count() == 3);
    CHECK(g.transition_count() == 3);
    CHECK(g.check_deterministic());
}

TEST_CASE("compose: failing patch reaches the blocked attacker state") {
    Smdp attacker = attacker_smdp(one_rule_graph(), {{2, 0.74}});
    StochasticGame g = compose(expand(attacker), expand(patch_defender(attacker, 0.85)),
                               Scheduler::strict_alternation(), {});
    // adds (e=1,A), where the attacker holds everything and is blocked
    CHECK(g.state_count() == 4);
    CHECK(g.transition_count() == 4);
    std::size_t blocked = 0;
    for (std::size_t s = 0; s < g.state_count(); ++s)
        if (g.state_blocked[s]) {
            ++blocked;
            CHECK(g.turn(s) == Player::Attacker);
            CHECK(g.label_true(s, kAttackerBlockedLabel));
        }
    CHECK(blocked == 1);
}

TEST_CASE("compose: trigger-set scheduler passes control only on triggers") {
    AttackGraph g = testutil::fig3();
    Smdp attacker = attacker_smdp(g, testutil::fig3_probs());
    Smdp defender = defender_smdp(DefenseSpec{}, attacker, {"systemDown_plycent03"});
    StochasticGame game = compose(expand(attacker), expand(defender),
                                  Scheduler::trigger_set({"remote_DOS"}), {});
    for (std::size_t s = 0; s < game.state_count(); ++s) {
        for (const auto& [action, dist] : game.trans[s]) {
            if (game.turn(s) != Player::Attacker) continue;
            for (const auto& [succ, p] : dist) {
                if (action_type(action) == "remote_DOS")
                    CHECK(game.turn(succ) == Player::Defender);
                else
                    CHECK(game.turn(succ) == Player::Attacker);
            }
        }
    }
}

TEST_CASE("compose: turn correctness and the frame condition") {
    Smdp attacker = attacker_smdp(testutil::fig3(), testutil::fig3_probs());
    DefenseSpec spec = parse_defense_spec(R"([
      {"name": "recover", "guard": "systemDown_plycent03",
       "updates": [{"assign": {"systemDown_plycent03": false, "recovered": true}, "prob": 0.9},
                   {"assign": {}, "prob": 0.1}], "cost": 12}
    ])");
    Smdp defender = defender_smdp(spec, attacker, {"systemDown_plycent03"});
    StochasticGame game = compose(expand(attacker), expand(defender),
                                  Scheduler::strict_alternation(), {defense_costs(spec)});

    std::set<std::string> attacker_only, defender_only;
    for (const auto& v : attacker.vars.names())
        if (!defender.vars.contains(v)) attacker_only.insert(v);
    for (const auto& v : defender.vars.names())
        if (!attacker.vars.contains(v)) defender_only.insert(v);
    REQUIRE(!attacker_only.empty());
    REQUIRE(defender_only == std::set<std::string>{"recovered"});

    for (std::size_t s = 0; s < game.state_count(); ++s) {
        for (const auto& [action, dist] : game.trans[s]) {
            bool is_attacker_action = game.attacker_actions.count(action) > 0;
            CHECK(is_attacker_action == (game.turn(s) == Player::Attacker));
            // a move never writes the other player's exclusive variables
            const auto& frozen =
                game.turn(s) == Player::Attacker ? defender_only : attacker_only;
            for (const auto& [succ, p] : dist)
                for (const auto& v : frozen)
                    CHECK(game.state_vals[succ].bits.get(*game.vars.index(v)) ==
                          game.state_vals[s].bits.get(*game.vars.index(v)));
        }
    }
    CHECK(game.check_deterministic());
    // revocations drive players outside their solo-reachable sets, so the
    // bound is over the full variable space
    CHECK(game.state_count() <= (std::size_t(1) << game.vars.size()) * 2);
}

TEST_CASE("compose: observer defender keeps the solo-reachable product bound") {
    Smdp attacker = attacker_smdp(testutil::fig3(), testutil::fig3_probs());
    Smdp defender = defender_smdp(DefenseSpec{}, attacker, {"systemDown_plycent03"});
    Mdp ma = expand(attacker), md = expand(defender);
    StochasticGame game =
        compose(ma, md, Scheduler::strict_alternation(), {});
    CHECK(game.state_count() <= ma.state_count() * md.state_count() * 2);
}

TEST_CASE("check_deterministic: duplicate state-action pairs are caught") {
    testutil::GameBuilder b({"x"});
    auto s0 = b.add_state({{"x", false}}, Player::Attacker);
    auto s1 = b.add_state({{"x", true}}, Player::Attacker);
    b.add_action(s0, "go", {{s1, 1.0}});
    b.add_action(s0, "go", {{s0, 1.0}});
    StochasticGame g = b.build();
    CHECK_FALSE(g.check_deterministic());
}

TEST_CASE("compose: initial disagreement on shared variables is rejected") {
    Smdp attacker = attacker_smdp(one_rule_graph(), {{2, 0.74}});
    Smdp defender = defender_smdp(DefenseSpec{}, attacker, {"e"});
    // flip the defender's copy of e
    defender.init.bits.set(*defender.vars.index("e"), true);
    CHECK_THROWS_AS(compose(expand(attacker), expand(defender),
                            Scheduler::strict_alternation(), {}),
                    Error);
}
