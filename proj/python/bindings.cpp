#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "posecgame/pipeline.hpp"
#include "posecgame/pogame.hpp"
#include "posecgame/prism.hpp"
#include "posecgame/verify.hpp"

namespace py = pybind11;
using namespace posecgame;

namespace {

ValueIterationSettings settings_of(double epsilon, std::size_t max_iters) {
    return ValueIterationSettings{epsilon, max_iters};
}

Scheduler make_scheduler(const std::string& kind, const std::set<std::string>& triggers,
                         const std::string& initial) {
    Player first = initial == "D" ? Player::Defender : Player::Attacker;
    if (kind == "strict-alternation") return Scheduler::strict_alternation(first);
    if (kind == "trigger-set") return Scheduler::trigger_set(triggers, first);
    throw Error("unknown scheduler kind '" + kind + "'");
}

py::dict check_to_dict(const StochasticGame& game, const CheckResult& r) {
    py::dict out;
    out["value"] = r.values[game.init];
    out["converged"] = r.converged;
    out["iterations"] = r.iterations;
    if (!r.sat.empty()) out["satisfied"] = static_cast<bool>(r.sat[game.init]);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "attack-defense analysis with partially observable stochastic games";

    py::register_exception<Error>(m, "PosecgameError");

    py::class_<AttackModel>(m, "AttackModel")
        .def_property_readonly("rule_count",
                               [](const AttackModel& a) { return a.rules.size(); })
        .def_property_readonly("fact_count",
                               [](const AttackModel& a) { return a.facts.size(); })
        .def_property_readonly("primitives",
                               [](const AttackModel& a) { return a.primitives; })
        .def_property_readonly("derived", [](const AttackModel& a) { return a.derived; });

    py::class_<AttackGraph>(m, "AttackGraph")
        .def_property_readonly("node_count",
                               [](const AttackGraph& g) { return g.nodes.size(); })
        .def_property_readonly("edge_count",
                               [](const AttackGraph& g) { return g.edges.size(); })
        .def_property_readonly("goal", [](const AttackGraph& g) { return g.goal; })
        .def("rule_nodes", &AttackGraph::rule_nodes)
        .def("node_label", [](const AttackGraph& g, int id) { return g.node(id).label; })
        .def("to_json", &attack_graph_to_json);

    py::class_<Smdp>(m, "Smdp")
        .def_property_readonly("variables", [](const Smdp& s) { return s.vars.names(); })
        .def_property_readonly("transition_count",
                               [](const Smdp& s) { return s.transitions.size(); })
        .def_property_readonly("actions", [](const Smdp& s) { return s.actions; });

    py::class_<Mdp>(m, "Mdp")
        .def_property_readonly("state_count", &Mdp::state_count)
        .def_property_readonly("transition_count", &Mdp::transition_count);

    py::class_<Scheduler>(m, "Scheduler");

    py::class_<StochasticGame>(m, "StochasticGame")
        .def_property_readonly("state_count", &StochasticGame::state_count)
        .def_property_readonly("transition_count", &StochasticGame::transition_count)
        .def("check_deterministic", &StochasticGame::check_deterministic)
        .def("labels",
             [](const StochasticGame& g, std::size_t s) { return g.labels(s); })
        .def("check",
             [](const StochasticGame& g, const std::string& formula, double epsilon,
                std::size_t max_iters) {
                 return check_to_dict(g, check(g, parse_rpatl(formula),
                                               settings_of(epsilon, max_iters)));
             },
             py::arg("formula"), py::arg("epsilon") = 1e-8,
             py::arg("max_iters") = 1'000'000);

    py::class_<Strategy>(m, "Strategy")
        .def_property_readonly("value", [](const Strategy& s) { return s.value; })
        .def_property_readonly("objective", [](const Strategy& s) { return s.objective; })
        .def_property_readonly("size", [](const Strategy& s) { return s.choice.size(); })
        .def("to_json", &Strategy::to_json);

    py::class_<PoGame>(m, "PoGame")
        .def_property_readonly("state_count",
                               [](const PoGame& p) { return p.game.state_count(); })
        .def_property_readonly("transition_count",
                               [](const PoGame& p) { return p.game.transition_count(); })
        .def_property_readonly("game", [](const PoGame& p) { return p.game; })
        .def_property_readonly("observable_vars",
                               [](const PoGame& p) { return p.observable_vars; });

    m.def("parse_attack_model", &parse_attack_model, py::arg("text"));
    m.def(
        "ground",
        [](const AttackModel& model, const std::vector<std::string>& facts,
           const std::string& goal) {
            std::vector<Predicate> parsed;
            for (const auto& f : facts) parsed.push_back(parse_ground_predicate(f));
            GroundResult gr = ground(model, parsed, parse_ground_predicate(goal));
            if (!gr.derivable) throw Error("goal '" + goal + "' is not derivable");
            return gr.graph;
        },
        py::arg("model"), py::arg("facts"), py::arg("goal"));
    m.def("import_mulval", &import_mulval_files, py::arg("vertices"), py::arg("arcs"));
    m.def("attack_graph_from_json", &attack_graph_from_json, py::arg("text"));
    m.def("agp", &agp, py::arg("graph"), py::arg("base") = std::map<int, double>{},
          py::arg("fact_scores") = std::map<int, double>{});
    m.def("validate_graph", &validate_graph, py::arg("graph"));

    m.def("attacker_smdp", &attacker_smdp, py::arg("graph"), py::arg("probabilities"));
    m.def(
        "defender_smdp",
        [](const std::string& defenses_json, const Smdp& attacker,
           const std::set<std::string>& triggers) {
            return defender_smdp(parse_defense_spec(defenses_json), attacker, triggers);
        },
        py::arg("defenses_json"), py::arg("attacker"), py::arg("triggers"));
    m.def("expand", &expand, py::arg("smdp"), py::arg("state_cap") = kDefaultStateCap);
    m.def("scheduler", &make_scheduler, py::arg("kind"),
          py::arg("triggers") = std::set<std::string>{}, py::arg("initial") = "A");
    m.def(
        "compose",
        [](const Mdp& attacker, const Mdp& defender, const Scheduler& sched,
           const std::map<std::string, std::map<std::string, double>>& rewards,
           std::size_t state_cap) {
            std::vector<RewardStructure> structures;
            for (const auto& [name, table] : rewards)
                structures.push_back(RewardStructure{name, table});
            return compose(attacker, defender, sched, std::move(structures), state_cap);
        },
        py::arg("attacker"), py::arg("defender"), py::arg("scheduler"),
        py::arg("rewards") = std::map<std::string, std::map<std::string, double>>{},
        py::arg("state_cap") = kDefaultStateCap);

    m.def(
        "do_prerequisites",
        [](const AttackGraph& g, int rule, const std::set<std::string>& observable) {
            ObservationSpec obs;
            obs.observable_actions = observable;
            py::list out;
            for (const auto& dop : do_prerequisites(g, rule, obs))
                out.append(py::make_tuple(dop.prereqs, dop.path_rules));
            return out;
        },
        py::arg("graph"), py::arg("rule"), py::arg("observable_actions"));
    m.def(
        "build_po_game",
        [](const AttackGraph& g, const std::map<int, double>& probs, const Smdp& defender,
           const std::set<std::string>& observable, const Scheduler& sched,
           const std::map<std::string, std::map<std::string, double>>& rewards,
           std::size_t state_cap) {
            ObservationSpec obs;
            obs.observable_actions = observable;
            std::vector<RewardStructure> structures;
            for (const auto& [name, table] : rewards)
                structures.push_back(RewardStructure{name, table});
            return build_po_game(g, probs, defender, obs, sched, std::move(structures),
                                 state_cap);
        },
        py::arg("graph"), py::arg("probabilities"), py::arg("defender"),
        py::arg("observable_actions"), py::arg("scheduler"),
        py::arg("rewards") = std::map<std::string, std::map<std::string, double>>{},
        py::arg("state_cap") = kDefaultStateCap);
    m.def("odt_check", &odt_check, py::arg("po_game"));
    m.def(
        "transform",
        [](const PoGame& po) {
            TransformReport report;
            StochasticGame game = transform(po, &report);
            return py::make_tuple(game, report.to_json());
        },
        py::arg("po_game"));

    m.def(
        "synthesize",
        [](const StochasticGame& g, const std::string& objective, double epsilon,
           std::size_t max_iters) {
            return synthesize(g, parse_rpatl(objective), settings_of(epsilon, max_iters));
        },
        py::arg("game"), py::arg("objective"), py::arg("epsilon") = 1e-8,
        py::arg("max_iters") = 1'000'000);
    m.def("apply_strategy", &apply_strategy, py::arg("game"), py::arg("strategy"));
    m.def(
        "monte_carlo",
        [](const StochasticGame& g, const Strategy& defender, const std::string& policy,
           const std::string& target, std::size_t runs, std::size_t horizon, uint64_t seed,
           const std::string& objective) {
            AttackerPolicy p = policy == "uniform" ? AttackerPolicy::Uniform
                                                   : AttackerPolicy::SynthesizedOpt;
            FormulaPtr obj = objective.empty() ? nullptr : parse_rpatl(objective);
            MonteCarloResult r = monte_carlo(g, defender, p, target, runs, horizon, seed, obj);
            py::dict out;
            out["estimate"] = r.estimate;
            out["ci_low"] = r.ci_low;
            out["ci_high"] = r.ci_high;
            out["runs"] = r.runs;
            out["hits"] = r.hits;
            return out;
        },
        py::arg("game"), py::arg("defender"), py::arg("attacker_policy"), py::arg("target"),
        py::arg("runs"), py::arg("horizon"), py::arg("seed"), py::arg("objective") = "");

    m.def(
        "verify_soundness",
        [](std::size_t instances, uint64_t seed, double epsilon) {
            SoundnessReport r = verify_soundness(instances, seed, GeneratorOptions{},
                                                 ValueIterationSettings{epsilon, 1'000'000});
            py::dict out;
            out["instances"] = r.instances;
            out["dual_failures"] = r.dual_failures;
            out["bisim_failures"] = r.bisim_failures;
            out["strategy_failures"] = r.strategy_failures;
            out["all_pass"] = r.all_pass();
            out["details"] = r.details;
            return out;
        },
        py::arg("instances") = 50, py::arg("seed") = 0, py::arg("epsilon") = 1e-12);

    m.def("export_prism_model", &export_prism_model, py::arg("attacker"), py::arg("defender"),
          py::arg("scheduler"), py::arg("rewards") = std::vector<RewardStructure>{},
          py::arg("goal_var") = "");
    m.def(
        "run_pipeline",
        [](const std::string& config_path, const std::string& out_dir) {
            RunResult r = run_pipeline(PipelineConfig::from_file(config_path), out_dir);
            py::dict out;
            out["ok"] = r.ok;
            out["checks_pass"] = r.checks_pass;
            out["outputs"] = r.outputs;
            if (!r.ok) {
                out["failed_stage"] = r.failed_stage;
                out["error"] = r.error;
            }
            return out;
        },
        py::arg("config_path"), py::arg("out_dir"));

    m.attr("__version__") = "0.1.0";
}
