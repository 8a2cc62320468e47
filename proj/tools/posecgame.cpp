#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "posecgame/pipeline.hpp"
#include "posecgame/prism.hpp"
#include "posecgame/verify.hpp"

namespace fs = std::filesystem;
using namespace posecgame;
using nlohmann::ordered_json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 0;
    double epsilon = 1e-8;
    std::size_t max_iters = 1'000'000;
    bool export_prism = false;
    bool seed_set = false, epsilon_set = false, max_iters_set = false;
};

PipelineConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw Error("--config <file> is required for this command");
    PipelineConfig c = PipelineConfig::from_file(g.config_path);
    if (g.seed_set) c.seed = g.seed;
    if (g.epsilon_set) c.epsilon = g.epsilon;
    if (g.max_iters_set) c.max_iters = g.max_iters;
    if (g.export_prism) c.export_prism = true;
    return c;
}

void write_output(const GlobalOpts& g, const std::string& name, const std::string& content) {
    fs::create_directories(g.out_dir);
    std::string path = (fs::path(g.out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
    std::cout << "wrote " << path << "\n";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attack-defense analysis with partially observable stochastic games"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline config file (JSON)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "random seed")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--epsilon", g.epsilon, "value-iteration convergence threshold")
        ->each([&](const std::string&) { g.epsilon_set = true; });
    app.add_option("--max-iters", g.max_iters, "value-iteration iteration cap")
        ->each([&](const std::string&) { g.max_iters_set = true; });
    app.add_flag("--export-prism", g.export_prism, "also write PRISM-games model files");

    // model check
    auto* model_cmd = app.add_subcommand("model", "attack-model commands");
    std::string model_file;
    auto* model_check = model_cmd->add_subcommand("check", "parse and validate an attack model");
    model_check->add_option("file", model_file, "attack-model source")->required();

    // graph gen|import|score
    auto* graph_cmd = app.add_subcommand("graph", "attack-graph commands");
    auto* graph_gen = graph_cmd->add_subcommand("gen", "ground a model into an attack graph");
    auto* graph_import = graph_cmd->add_subcommand("import", "import MulVAL CSV files");
    std::string vertices_file, arcs_file;
    graph_import->add_option("--vertices", vertices_file, "VERTICES.CSV (overrides config)");
    graph_import->add_option("--arcs", arcs_file, "ARCS.CSV (overrides config)");
    auto* graph_score = graph_cmd->add_subcommand("score", "cumulative AGP scores");

    // game build
    auto* game_cmd = app.add_subcommand("game", "game commands");
    auto* game_build = game_cmd->add_subcommand("build", "compose the stochastic game");

    // po transform
    auto* po_cmd = app.add_subcommand("po", "partial-observation commands");
    auto* po_transform =
        po_cmd->add_subcommand("transform", "transform the PO game into a perfect game");

    auto* check_cmd = app.add_subcommand("check", "model-check the configured formulas");
    auto* synth_cmd = app.add_subcommand("synthesize", "synthesize a defender strategy");

    auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo simulation of the strategy");
    std::size_t sim_runs = 0, sim_horizon = 0;
    std::string sim_target;
    sim_cmd->add_option("--runs", sim_runs, "episodes");
    sim_cmd->add_option("--horizon", sim_horizon, "steps per episode");
    sim_cmd->add_option("--target", sim_target, "target atom");

    // verify soundness
    auto* verify_cmd = app.add_subcommand("verify", "soundness harnesses");
    auto* verify_soundness_cmd = verify_cmd->add_subcommand(
        "soundness", "dual checking, weak bisimulation and strategy lifting on random games");
    std::size_t instances = 50;
    verify_soundness_cmd->add_option("--instances", instances, "number of generated games");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweeps over the pipeline");
    std::string strength_list, unobs_list, vuln_list;
    sweep_cmd->add_option("--defense-strength", strength_list, "comma list, e.g. 0,0.5,1");
    sweep_cmd->add_option("--unobservable", unobs_list, "comma list, e.g. 0,1,2,3,4");
    sweep_cmd->add_option("--vuln-count", vuln_list, "comma list of kept vulnerability facts");

    // export prism
    auto* export_cmd = app.add_subcommand("export", "export commands");
    auto* export_prism_cmd = export_cmd->add_subcommand("prism", "PRISM-games model + props");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*model_check) {
            AttackModel model = parse_attack_model(slurp(model_file));
            std::cout << "ok: " << model.rules.size() << " rules, " << model.facts.size()
                      << " facts, " << model.primitives.size() << " primitive and "
                      << model.derived.size() << " derived predicates\n";
            return 0;
        }
        if (*graph_gen) {
            StageArtifacts a = build_stages(load_config(g), false);
            write_output(g, "graph.json", attack_graph_to_json(a.graph));
            return 0;
        }
        if (*graph_import) {
            AttackGraph graph;
            if (vertices_file.empty() != arcs_file.empty())
                throw Error("graph import needs both --vertices and --arcs");
            if (!vertices_file.empty()) {
                graph = import_mulval_files(vertices_file, arcs_file);
            } else {
                StageArtifacts a = build_stages(load_config(g), false);
                graph = a.graph;
            }
            auto diagnostics = validate_graph(graph);
            for (const auto& d : diagnostics) std::cerr << "warning: " << d << "\n";
            write_output(g, "graph.json", attack_graph_to_json(graph));
            return 0;
        }
        if (*graph_score) {
            StageArtifacts a = build_stages(load_config(g), false);
            std::map<int, double> scores = agp(a.graph, a.rule_probs, {});
            ordered_json doc;
            for (const auto& [id, v] : scores) doc[std::to_string(id)] = v;
            write_output(g, "graph_scored.json", doc.dump(2) + "\n");
            return 0;
        }
        if (*game_build || *po_transform) {
            PipelineConfig config = load_config(g);
            if (*po_transform && !config.observation)
                throw Error("po transform needs an observation spec in the config");
            StageArtifacts a = build_stages(config, false);
            ordered_json doc;
            doc["states"] = a.game.state_count();
            doc["transitions"] = a.game.transition_count();
            doc["deterministic"] = a.game.check_deterministic();
            write_output(g, "game_stats.json", doc.dump(2) + "\n");
            if (a.po) {
                TransformReport report;
                (void)transform(*a.po, &report);
                write_output(g, "transform_report.json", report.to_json());
            }
            if (config.export_prism) {
                const Smdp& att = a.po
                                      ? observable_attacker(a.graph, a.po->observation,
                                                            a.rule_probs, a.rewards)
                                            .smdp
                                      : a.attacker;
                write_output(g, "model.prism",
                             export_prism_model(att, a.defender, config.scheduler,
                                                a.game.rewards,
                                                a.graph.node(a.graph.goal).label));
                write_output(g, "model.props", export_prism_properties(config.formulas));
            }
            return 0;
        }
        if (*check_cmd || *synth_cmd || *sim_cmd) {
            PipelineConfig config = load_config(g);
            if (*sim_cmd) {
                if (sim_runs) config.simulate_runs = sim_runs;
                if (config.simulate_runs == 0) config.simulate_runs = 10000;
                if (sim_horizon) config.simulate_horizon = sim_horizon;
                if (!sim_target.empty()) config.simulate_target = sim_target;
            }
            RunResult r = run_pipeline(config, g.out_dir);
            if (!r.ok) {
                std::cerr << "error in stage '" << r.failed_stage << "': " << r.error << "\n";
                return 1;
            }
            for (const auto& f : r.outputs) std::cout << "wrote " << f << "\n";
            return r.checks_pass ? 0 : 1;
        }
        if (*verify_soundness_cmd) {
            // agreement is judged at 1e-6, so the solver runs well below it
            double epsilon = g.epsilon_set ? g.epsilon : 1e-12;
            SoundnessReport report = verify_soundness(
                instances, g.seed, GeneratorOptions{},
                ValueIterationSettings{epsilon, g.max_iters});
            write_output(g, "soundness_report.json", report.to_json());
            std::cout << (report.all_pass() ? "all checks passed" : "FAILURES") << " on "
                      << report.instances << " instances\n";
            return report.all_pass() ? 0 : 1;
        }
        if (*sweep_cmd) {
            SweepAxes axes;
            if (!strength_list.empty()) axes.defense_strength = parse_double_list(strength_list);
            if (!unobs_list.empty()) axes.unobservable_count = parse_int_list(unobs_list);
            if (!vuln_list.empty()) axes.vuln_count = parse_int_list(vuln_list);
            write_output(g, "sweep.csv", sweep(load_config(g), axes));
            return 0;
        }
        if (*export_prism_cmd) {
            PipelineConfig config = load_config(g);
            StageArtifacts a = build_stages(config, false);
            const Smdp& att = a.po ? observable_attacker(a.graph, a.po->observation,
                                                         a.rule_probs, a.rewards)
                                         .smdp
                                   : a.attacker;
            write_output(g, "model.prism",
                         export_prism_model(att, a.defender, config.scheduler, a.game.rewards,
                                            a.graph.node(a.graph.goal).label));
            write_output(g, "model.props", export_prism_properties(config.formulas));
            return 0;
        }
        std::cerr << "no command selected\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
