#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "rational_oracle.hpp"
#include "posecgame/rpatl.hpp"

using namespace posecgame;
using testutil::GameBuilder;

TEST_CASE("parse: the evaluation properties") {
    FormulaPtr p3 = parse_rpatl("<<def>> Pmax=? [ F \"attackerBlocked\" ]");
    CHECK(p3->kind == RpatlFormula::Kind::ProbQuery);
    CHECK(p3->numeric);
    CHECK(p3->opt == Opt::Max);
    CHECK(p3->coalition.players == std::set<Player>{Player::Defender});
    CHECK(p3->path->op == PathOp::Until);
    CHECK(p3->path->left->kind == RpatlFormula::Kind::True);

    FormulaPtr p2 = parse_rpatl("<<att>> Rmax=? [ F \"DoS_plycent02\" ]");
    CHECK(p2->kind == RpatlFormula::Kind::RewardQuery);
    CHECK(p2->coalition.players == std::set<Player>{Player::Attacker});

    FormulaPtr named = parse_rpatl("<<def>> R{dCosts}min=? [ F \"attackerBlocked\" ]");
    CHECK(named->reward_name == "dCosts");

    FormulaPtr top = parse_rpatl("true");
    CHECK(top->kind == RpatlFormula::Kind::True);

    FormulaPtr bounded = parse_rpatl("<<def>> P>=0.5 [ \"a\" U<=3 \"b\" ]");
    CHECK(bounded->path->op == PathOp::BoundedUntil);
    CHECK(bounded->path->bound == 3);

    FormulaPtr next = parse_rpatl("<<def,att>> P<0.1 [ X !\"a\" & \"b\" ]");
    CHECK(next->coalition.players.size() == 2);
    CHECK(next->path->op == PathOp::Next);
}

TEST_CASE("parse: malformed formulas carry positions") {
    CHECK_THROWS_AS(parse_rpatl("<<def>> P>=1.5 [ F \"x\" ]"), ParseError);
    CHECK_THROWS_AS(parse_rpatl("<<wizard>> Pmax=? [ F \"x\" ]"), ParseError);
    CHECK_THROWS_AS(parse_rpatl("<<def>> Pmax=? [ F \"x\" ] trailing"), ParseError);
    CHECK_THROWS_AS(parse_rpatl("<<def>> Rmax=? [ X \"x\" ]"), ParseError);
    CHECK_THROWS_AS(parse_rpatl("\"unterminated"), ParseError);
    CHECK_THROWS_AS(parse_rpatl(""), ParseError);
}

TEST_CASE("sat: propositional layer") {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    b.add_action(s0, "stay", {{s0, 1.0}});
    b.add_action(s1, "stay2", {{s1, 1.0}});
    StochasticGame g = b.build();

    CHECK(sat(g, parse_rpatl("true")) == std::vector<bool>{true, true});
    CHECK(sat(g, parse_rpatl("\"goal\"")) == std::vector<bool>{false, true});
    CHECK(sat(g, parse_rpatl("!\"goal\"")) == std::vector<bool>{true, false});
    CHECK(sat(g, parse_rpatl("\"goal\" & !\"goal\"")) == std::vector<bool>{false, false});
    CHECK_THROWS_AS(sat(g, parse_rpatl("\"missing\"")), Error);
}

namespace {

// one attacker action that reaches the goal w.p. 0.74, retrying on failure
StochasticGame retry_game(bool retry) {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    auto dead = b.add_state({{"goal", false}}, Player::Attacker);
    b.add_action(s0, "strike", {{s1, 0.74}, {retry ? s0 : dead, 0.26}});
    b.add_action(s1, "idle_A", {{s1, 1.0}});
    b.add_action(dead, "idle_A", {{dead, 1.0}});
    return b.build();
}

}  // namespace

TEST_CASE("prob_path: retry loop reaches the goal almost surely") {
    StochasticGame g = retry_game(true);
    CheckResult r = check(g, parse_rpatl("<<att>> Pmax=? [ F \"goal\" ]"));
    CHECK(r.values[g.init] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r.converged);
}

TEST_CASE("prob_path: self-disabling attempt gives exactly 0.74") {
    StochasticGame g = retry_game(false);
    CheckResult r = check(g, parse_rpatl("<<att>> Pmax=? [ F \"goal\" ]"));
    CHECK(r.values[g.init] == doctest::Approx(0.74).epsilon(1e-12));
}

TEST_CASE("prob_path: bounded-until base cases") {
    StochasticGame g = retry_game(false);
    Coalition att{{Player::Attacker}};
    auto sat_goal = sat(g, parse_rpatl("\"goal\""));

    PathFormula psi;
    psi.op = PathOp::BoundedUntil;
    psi.left = make_true();
    psi.right = make_atom("goal");
    psi.bound = 0;
    CheckResult r0 = prob_path(g, att, Opt::Max, psi);
    CHECK(r0.values[1] == 1.0);  // already in Sat(phi2)
    CHECK(r0.values[0] == 0.0);  // k = 0 outside Sat(phi2)

    psi.bound = 1;
    CheckResult r1 = prob_path(g, att, Opt::Max, psi);
    CHECK(r1.values[0] == 0.74);

    // state outside Sat(phi1) and Sat(phi2) stays zero
    PathFormula hard;
    hard.op = PathOp::BoundedUntil;
    hard.left = make_atom("goal");
    hard.right = make_not(make_true());
    hard.bound = 5;
    CheckResult r2 = prob_path(g, att, Opt::Max, hard);
    CHECK(r2.values[0] == 0.0);
}

TEST_CASE("prob_path: next operator") {
    StochasticGame g = retry_game(false);
    Coalition att{{Player::Attacker}};
    PathFormula psi;
    psi.op = PathOp::Next;
    psi.right = make_atom("goal");
    CheckResult r = prob_path(g, att, Opt::Max, psi);
    CHECK(r.values[g.init] == 0.74);
}

TEST_CASE("bounded-until values are monotone in the bound") {
    StochasticGame g = retry_game(true);
    Coalition att{{Player::Attacker}};
    double prev = -1.0;
    for (int k = 0; k <= 12; ++k) {
        PathFormula psi;
        psi.op = PathOp::BoundedUntil;
        psi.left = make_true();
        psi.right = make_atom("goal");
        psi.bound = k;
        CheckResult r = prob_path(g, att, Opt::Max, psi);
        CHECK(r.values[g.init] >= prev - 1e-15);
        prev = r.values[g.init];
    }
}

TEST_CASE("expected_reward: the three textbook cases") {
    GameBuilder b({"goal"});
    auto s0 = b.add_state({{"goal", false}}, Player::Attacker);
    auto s1 = b.add_state({{"goal", true}}, Player::Attacker);
    b.add_action(s0, "pay", {{s1, 1.0}});
    b.add_action(s1, "idle_A", {{s1, 1.0}});
    b.set_reward("aCosts", "pay", 5.0);
    StochasticGame g = b.build();

    CheckResult direct = check(g, parse_rpatl("<<att>> R{aCosts}min=? [ F \"goal\" ]"));
    CHECK(direct.values[s1] == 0.0);            // already at the target
    CHECK(direct.values[s0] == doctest::Approx(5.0));

    // success probability 0.5 with a free retry: geometric expectation 10
    GameBuilder b2({"goal"});
    auto t0 = b2.add_state({{"goal", false}}, Player::Attacker);
    auto t1 = b2.add_state({{"goal", true}}, Player::Attacker);
    b2.add_action(t0, "pay", {{t1, 0.5}, {t0, 0.5}});
    b2.add_action(t1, "idle_A", {{t1, 1.0}});
    b2.set_reward("aCosts", "pay", 5.0);
    StochasticGame g2 = b2.build();
    CheckResult geo = check(g2, parse_rpatl("<<att>> R{aCosts}min=? [ F \"goal\" ]"));
    CHECK(geo.values[t0] == doctest::Approx(10.0).epsilon(1e-6));

    // unreachable target diverges
    GameBuilder b3({"goal"});
    auto u0 = b3.add_state({{"goal", false}}, Player::Attacker);
    b3.add_action(u0, "idle_A", {{u0, 1.0}});
    b3.set_reward("aCosts", "idle_A", 0.0);
    StochasticGame g3 = b3.build();
    CheckResult inf = check(g3, parse_rpatl("<<att>> R{aCosts}min=? [ F \"goal\" ]"));
    CHECK(std::isinf(inf.values[u0]));
}

TEST_CASE("expected_reward: scaling rewards scales values") {
    std::mt19937_64 rng(99);
    StochasticGame g = testutil::random_dyadic_game(rng);
    FormulaPtr f = parse_rpatl("<<def>> R{r}min=? [ F \"a\" ]");
    CheckResult base = check(g, f);
    StochasticGame scaled = g;
    for (auto& [action, v] : scaled.rewards.front().rewards) v *= 3.0;
    CheckResult tripled = check(scaled, f);
    for (std::size_t s = 0; s < g.state_count(); ++s) {
        if (std::isinf(base.values[s])) {
            CHECK(std::isinf(tripled.values[s]));
        } else {
            CHECK(tripled.values[s] == doctest::Approx(3.0 * base.values[s]).epsilon(1e-9));
        }
    }
}

TEST_CASE("sat: probabilistic operator against its bound") {
    StochasticGame g = retry_game(false);
    auto in = sat(g, parse_rpatl("<<att>> P>=0.5 [ F \"goal\" ]"));
    CHECK(in[g.init]);  // value 0.74 >= 0.5
    auto out = sat(g, parse_rpatl("<<att>> P>=0.8 [ F \"goal\" ]"));
    CHECK_FALSE(out[g.init]);
    auto low = sat(g, parse_rpatl("<<att>> P<=0.8 [ F \"goal\" ]"));
    CHECK(low[g.init]);
}

TEST_CASE("duality: reaching a complements avoiding it into the sinks") {
    // plays absorb in the final layer, so F a and !a U (sink & !a)
    // partition the path space and the optima are complementary
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 25; ++i) {
        StochasticGame g = testutil::random_dyadic_game(rng);
        double reach = check(g, parse_rpatl("<<def>> Pmax=? [ F \"a\" ]")).values[g.init];
        double avoid =
            check(g, parse_rpatl("<<def>> Pmin=? [ !\"a\" U (\"sink\" & !\"a\") ]"))
                .values[g.init];
        CHECK(reach == doctest::Approx(1.0 - avoid).epsilon(1e-9));
    }
}

TEST_CASE("synthesize: pick the action with the better backup") {
    GameBuilder b({"goal"});
    auto d0 = b.add_state({{"goal", false}}, Player::Defender);
    auto win = b.add_state({{"goal", true}}, Player::Defender);
    auto lose = b.add_state({{"goal", false}}, Player::Defender);
    b.add_action(d0, "block", {{win, 1.0}});
    b.add_action(d0, "idle", {{lose, 0.8}, {win, 0.2}});
    b.add_action(win, "w", {{win, 1.0}});
    b.add_action(lose, "l", {{lose, 1.0}});
    StochasticGame g = b.build();
    Strategy s = synthesize(g, parse_rpatl("<<def>> Pmax=? [ F \"goal\" ]"));
    CHECK(s.choice.at(d0) == "block");
    CHECK(s.value == doctest::Approx(1.0));
}

TEST_CASE("synthesize: cheap patch beats the expensive shutdown") {
    GameBuilder b({"blocked"});
    auto d0 = b.add_state({{"blocked", false}}, Player::Defender);
    auto done = b.add_state({{"blocked", true}}, Player::Defender);
    b.add_action(d0, "patch", {{done, 1.0}});
    b.add_action(d0, "shutdown", {{done, 1.0}});
    b.add_action(done, "w", {{done, 1.0}});
    b.set_reward("dCosts", "patch", 10.0);
    b.set_reward("dCosts", "shutdown", 500.0);
    StochasticGame g = b.build();
    Strategy s = synthesize(g, parse_rpatl("<<def>> R{dCosts}min=? [ F \"blocked\" ]"));
    CHECK(s.choice.at(d0) == "patch");
    CHECK(s.value == doctest::Approx(10.0));
}

TEST_CASE("synthesize: single-action states take that action") {
    GameBuilder b({"goal"});
    auto d0 = b.add_state({{"goal", false}}, Player::Defender);
    auto s1 = b.add_state({{"goal", true}}, Player::Defender);
    b.add_action(d0, "only", {{s1, 1.0}});
    b.add_action(s1, "w", {{s1, 1.0}});
    StochasticGame g = b.build();
    Strategy s = synthesize(g, parse_rpatl("<<def>> Pmax=? [ F \"goal\" ]"));
    CHECK(s.choice.at(d0) == "only");
    CHECK(s.choice.at(s1) == "w");  // decided state takes the first enabled action
}

TEST_CASE("synthesize rejects non-defender coalitions") {
    StochasticGame g = retry_game(false);
    CHECK_THROWS_AS(synthesize(g, parse_rpatl("<<att>> Pmax=? [ F \"goal\" ]")), Error);
}

TEST_CASE("apply_strategy: re-check reproduces the synthesized value") {
    std::mt19937_64 rng(321);
    for (int i = 0; i < 25; ++i) {
        StochasticGame g = testutil::random_dyadic_game(rng);
        FormulaPtr f = parse_rpatl("<<def>> Pmax=? [ F \"a\" ]");
        Strategy s = synthesize(g, f);
        StochasticGame induced = apply_strategy(g, s);
        CheckResult again = check(induced, f);
        CHECK(again.values[induced.init] == doctest::Approx(s.value).epsilon(1e-7));
        // opponent optimum on the induced game still meets the bound
        CheckResult adversarial =
            check(induced, parse_rpatl("<<att>> Pmin=? [ F \"a\" ]"));
        CHECK(adversarial.values[induced.init] >= s.value - 1e-7);
    }
}

TEST_CASE("apply_strategy: missing defender state is an error") {
    GameBuilder b({"goal"});
    auto d0 = b.add_state({{"goal", false}}, Player::Defender);
    b.add_action(d0, "x", {{d0, 1.0}});
    StochasticGame g = b.build();
    Strategy empty;
    CHECK_THROWS_AS(apply_strategy(g, empty), Error);
}

TEST_CASE("strategy JSON lists valuations with the chosen action") {
    GameBuilder b({"goal"});
    auto d0 = b.add_state({{"goal", false}}, Player::Defender);
    auto s1 = b.add_state({{"goal", true}}, Player::Defender);
    b.add_action(d0, "only", {{s1, 1.0}});
    b.add_action(s1, "w", {{s1, 1.0}});
    StochasticGame g = b.build();
    Strategy s = synthesize(g, parse_rpatl("<<def>> Pmax=? [ F \"goal\" ]"));
    std::string json = s.to_json(g);
    CHECK(json.find("\"only\"") != std::string::npos);
    CHECK(json.find("\"goal\"") != std::string::npos);
}
