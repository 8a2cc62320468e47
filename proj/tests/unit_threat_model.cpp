#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "posecgame/threat_model.hpp"

using namespace posecgame;

namespace {

const char* kIllegalAccessRule = R"(
illegalAccessToFile(fs, Write, Ex) :-
    accessService(host, fs, ptcl, port),
    nfsExportInfo(fs, dir, ar, host),
    execCode(host, service),
    nfsConfiguration(fs, dir, 'rootsquash'),
    vulExists(fs, 'CVE-2018-1000028', Mountd). [score=0.74, cost=10, damage=5.9]
)";

}  // namespace

TEST_CASE("parse: five-body illegalAccessToFile rule") {
    AttackModel m = parse_attack_model(kIllegalAccessRule);
    REQUIRE(m.rules.size() == 1);
    const HornRule& r = m.rules.front();
    CHECK(r.body.size() == 5);
    CHECK(r.head.name == "illegalAccessToFile");
    CHECK(r.head.args.size() == 3);
    CHECK(r.base_score == doctest::Approx(0.74));
    CHECK(r.attack_cost == doctest::Approx(10));
    CHECK(r.damage == doctest::Approx(5.9));
    CHECK(m.derived.count("illegalAccessToFile") == 1);
    CHECK(m.primitives.count("accessService") == 1);
}

TEST_CASE("parse: empty rule set with one primitive fact") {
    AttackModel m = parse_attack_model("accessService(Host1, Fs, Tcp, P2049).\n");
    CHECK(m.rules.empty());
    CHECK(m.facts.size() == 1);
    CHECK(m.primitives.count("accessService") == 1);
    CHECK(m.derived.empty());
}

TEST_CASE("parse: head variable absent from body is a safety error") {
    CHECK_THROWS_AS(parse_attack_model("bad(x, y) :- some(x)."), ParseError);
}

TEST_CASE("parse: arity mismatch is rejected with a position") {
    try {
        parse_attack_model("p(A).\np(A, B).\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.message()).find("arity") != std::string::npos);
    }
}

TEST_CASE("parse: fact clashing with a derived predicate") {
    CHECK_THROWS_AS(parse_attack_model("d(A).\nd(x) :- p(x)."), ParseError);
}

TEST_CASE("parse: comments and blank lines are skipped") {
    AttackModel m = parse_attack_model("% comment\n\np(A). % trailing\n");
    CHECK(m.facts.size() == 1);
}

TEST_CASE("ground: hand fixpoint of the single illegalAccessToFile rule") {
    std::string text = std::string(kIllegalAccessRule) +
                       "accessService(Host1, Fileserver, Rpc, P2049).\n"
                       "nfsExportInfo(Fileserver, ExportDir, Rw, Host1).\n"
                       "execCode(Host1, NfsService).\n"
                       "nfsConfiguration(Fileserver, ExportDir, 'rootsquash').\n"
                       "vulExists(Fileserver, 'CVE-2018-1000028', Mountd).\n";
    AttackModel m = parse_attack_model(text);
    GroundResult gr = ground(m, {}, parse_ground_predicate(
                                        "illegalAccessToFile(Fileserver, Write, Ex)"));
    REQUIRE(gr.derivable);
    const AttackGraph& g = gr.graph;
    int conditions = 0, rules = 0, derived = 0;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::Condition) ++conditions;
        if (n.kind == NodeKind::Rule) ++rules;
        if (n.kind == NodeKind::Derived) ++derived;
    }
    CHECK(conditions == 5);
    CHECK(rules == 1);
    CHECK(derived == 1);
    CHECK(g.edges.size() == 6);  // five body edges plus the head edge
    CHECK(validate_graph(g).empty());
}

TEST_CASE("ground: nothing derivable from empty facts") {
    AttackModel m = parse_attack_model("goal(h) :- base(h).");
    GroundResult gr = ground(m, {}, parse_ground_predicate("goal(H1)"));
    CHECK_FALSE(gr.derivable);
}

TEST_CASE("ground: two alternative rules give in-degree 2") {
    AttackModel m = parse_attack_model(
        "goal(h) :- left(h). [id=viaLeft]\n"
        "goal(h) :- right(h). [id=viaRight]\n"
        "left(H1).\nright(H1).\n");
    GroundResult gr = ground(m, {}, parse_ground_predicate("goal(H1)"));
    REQUIRE(gr.derivable);
    const AttackGraph& g = gr.graph;
    CHECK(g.predecessors(g.goal).size() == 2);
    CHECK(validate_graph(g).empty());
}

TEST_CASE("ground: goal must be a derived predicate") {
    AttackModel m = parse_attack_model("goal(h) :- base(h).\nbase(H1).\n");
    CHECK_THROWS_AS(ground(m, {}, parse_ground_predicate("base(H1)")), Error);
}

TEST_CASE("ground: non-ground fact input is rejected") {
    AttackModel m = parse_attack_model("goal(h) :- base(h).");
    Predicate open{"base", {Term{Term::Kind::Variable, "x"}}};
    CHECK_THROWS_AS(ground(m, {open}, parse_ground_predicate("goal(H1)")), Error);
}

TEST_CASE("import_mulval: the running 15-node example") {
    AttackGraph g = testutil::fig3();
    CHECK(g.nodes.size() == 15);
    CHECK(g.rule_nodes() == std::vector<int>{2, 5, 8, 11});
    CHECK(g.goal == 1);
    CHECK(g.node(4).label == "netAccess_plycent03_tcp_22");
    CHECK(validate_graph(g).empty());
    auto pred2 = g.predecessors(2);
    std::sort(pred2.begin(), pred2.end());
    CHECK(pred2 == std::vector<int>{3, 4, 14, 15});
}

TEST_CASE("import_mulval: 50-node fixture with 18 attack steps") {
    // 18 rule chain: goal <- r1 <- d1 <- r2 <- ... with 14 shared conditions
    std::ostringstream vertices, arcs;
    vertices << "1,\"goal_cap\",\"OR\",0\n";
    int next = 1;
    for (int i = 0; i < 14; ++i)
        vertices << (50 - i) << ",\"cond" << i << "\",\"LEAF\",1\n";
    int prev_derived = 1;
    for (int step = 0; step < 18; ++step) {
        int rule = ++next;
        vertices << rule << ",\"step" << step << "\",\"AND\",0.5\n";
        arcs << prev_derived << "," << rule << ",-1\n";
        int cond = 50 - (step % 14);
        arcs << rule << "," << cond << ",-1\n";
        if (step < 17) {
            int derived = ++next;
            vertices << derived << ",\"cap" << step << "\",\"OR\",0\n";
            arcs << rule << "," << derived << ",-1\n";
            prev_derived = derived;
        }
    }
    std::istringstream vin(vertices.str()), ain(arcs.str());
    AttackGraph g = import_mulval(vin, ain);
    CHECK(g.nodes.size() == 50);
    CHECK(g.rule_nodes().size() == 18);
    CHECK(validate_graph(g).empty());
}

TEST_CASE("import_mulval: empty files are rejected") {
    std::istringstream v(""), a("");
    CHECK_THROWS_AS(import_mulval(v, a), ParseError);
}

TEST_CASE("import_mulval: dangling arc endpoint") {
    std::istringstream v("1,\"goal\",\"OR\",0\n2,\"r\",\"AND\",0.5\n");
    std::istringstream a("1,2,-1\n2,99,-1\n");
    CHECK_THROWS_AS(import_mulval(v, a), ParseError);
}

TEST_CASE("import_mulval: rule with two successors is rejected") {
    std::istringstream v(
        "1,\"g1\",\"OR\",0\n2,\"g2\",\"OR\",0\n3,\"r\",\"AND\",0.5\n4,\"c\",\"LEAF\",1\n");
    std::istringstream a("1,3,-1\n2,3,-1\n3,4,-1\n");
    CHECK_THROWS(import_mulval(v, a));
}

TEST_CASE("export/import round-trips node and edge structure exactly") {
    AttackGraph g = testutil::fig3();
    std::ostringstream v1, a1;
    export_mulval(g, v1, a1);
    std::istringstream vin(v1.str()), ain(a1.str());
    AttackGraph g2 = import_mulval(vin, ain);
    REQUIRE(g2.nodes.size() == g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(g2.nodes[i].id == g.nodes[i].id);
        CHECK(g2.nodes[i].kind == g.nodes[i].kind);
        CHECK(g2.nodes[i].label == g.nodes[i].label);
    }
    CHECK(g2.edges == g.edges);
    CHECK(g2.goal == g.goal);
    // export is byte-stable across the round trip
    std::ostringstream v2, a2;
    export_mulval(g2, v2, a2);
    CHECK(v2.str() == v1.str());
    CHECK(a2.str() == a1.str());
}

TEST_CASE("attack-graph JSON round-trip is byte-stable") {
    AttackGraph g = testutil::fig3();
    std::string once = attack_graph_to_json(g);
    std::string twice = attack_graph_to_json(attack_graph_from_json(once));
    CHECK(once == twice);
}

TEST_CASE("agp: chain through rule11 and rule2 multiplies base scores") {
    // rule11 (0.92) -> derived -> rule2 (0.74), fact scores 1.0
    std::istringstream v(
        "1,\"goal\",\"OR\",0\n"
        "2,\"rule2\",\"AND\",0.74\n"
        "3,\"mid\",\"OR\",0\n"
        "4,\"rule11\",\"AND\",0.92\n"
        "5,\"fact\",\"LEAF\",1\n");
    std::istringstream a("1,2,-1\n2,3,-1\n3,4,-1\n4,5,-1\n");
    AttackGraph g = import_mulval(v, a);
    auto scores = agp(g, {}, {});
    CHECK(scores.at(2) == doctest::Approx(0.74 * 0.92).epsilon(1e-12));
    CHECK(scores.at(1) == doctest::Approx(0.6808).epsilon(1e-12));
}

TEST_CASE("agp: condition without explicit score defaults to 1.0") {
    AttackGraph g = testutil::fig3();
    auto scores = agp(g, testutil::fig3_probs(), {});
    CHECK(scores.at(14) == doctest::Approx(1.0));
    for (const auto& [id, v] : scores) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("agp: two incoming rules at 0.5 combine noisy-OR to 0.75") {
    std::istringstream v(
        "1,\"goal\",\"OR\",0\n"
        "2,\"ra\",\"AND\",0.5\n"
        "3,\"rb\",\"AND\",0.5\n"
        "4,\"c\",\"LEAF\",1\n");
    std::istringstream a("1,2,-1\n1,3,-1\n2,4,-1\n3,4,-1\n");
    AttackGraph g = import_mulval(v, a);
    auto scores = agp(g, {}, {});
    CHECK(scores.at(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("agp: monotone in the base scores") {
    AttackGraph g = testutil::fig3();
    auto base = testutil::fig3_probs();
    auto low = agp(g, base, {});
    base[8] = 0.9;  // raise one rule
    auto high = agp(g, base, {});
    for (const auto& [id, v] : low) CHECK(high.at(id) >= v - 1e-15);
}

TEST_CASE("agp: cycles are a hard error") {
    AttackGraph g;
    g.nodes = {{1, NodeKind::Derived, "a", {}},
               {2, NodeKind::Rule, "r1", 0.5},
               {3, NodeKind::Derived, "b", {}},
               {4, NodeKind::Rule, "r2", 0.5}};
    g.edges = {{1, 4}, {2, 1}, {3, 2}, {4, 3}};
    g.goal = 1;
    CHECK_THROWS_AS(agp(g, {}, {}), Error);
}

TEST_CASE("validate_graph: diagnostics for broken shapes") {
    AttackGraph g = testutil::fig3();
    CHECK(validate_graph(g).empty());

    AttackGraph two_succ = g;
    two_succ.edges.push_back({2, 4});  // rule 2 now derives nodes 1 and 4
    two_succ.sort_canonical();
    auto d1 = validate_graph(two_succ);
    CHECK_FALSE(d1.empty());

    AttackGraph disconnected = g;
    disconnected.nodes.push_back({99, NodeKind::Condition, "stray", 1.0});
    disconnected.sort_canonical();
    auto d2 = validate_graph(disconnected);
    REQUIRE_FALSE(d2.empty());
    CHECK(d2.front().find("connected") != std::string::npos);
}
