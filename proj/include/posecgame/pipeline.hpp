#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "posecgame/game.hpp"
#include "posecgame/pogame.hpp"
#include "posecgame/rpatl.hpp"
#include "posecgame/smdp.hpp"
#include "posecgame/threat_model.hpp"

namespace posecgame {

/// End-to-end pipeline configuration (JSON file). Exactly one of
/// {model+facts+goal, mulval import} selects the graph source.
struct PipelineConfig {
    std::string base_dir;  // directory of the config file, for relative paths

    std::string model_path;
    std::string facts_path;  // optional extra ground facts, one per line
    std::string goal;        // ground predicate text
    std::string mulval_vertices;
    std::string mulval_arcs;

    std::map<std::string, double> base_scores;  // rule label -> probability
    std::map<std::string, double> fact_scores;  // condition label -> score

    // extra action rewards merged over the model-derived structures
    std::map<std::string, std::map<std::string, double>> rewards;

    std::string defenses_path;
    std::set<std::string> triggers;             // defense trigger variables; default: guard vars
    Scheduler scheduler = Scheduler::strict_alternation();
    std::optional<ObservationSpec> observation;
    std::vector<std::string> formulas;

    double epsilon = 1e-8;
    std::size_t max_iters = 1'000'000;
    std::size_t state_cap = kDefaultStateCap;
    uint64_t seed = 0;
    bool export_prism = false;

    std::size_t simulate_runs = 0;      // when > 0, run Monte Carlo on the strategy
    std::size_t simulate_horizon = 1024;
    std::string simulate_target;

    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_json(const std::string& text, const std::string& base_dir);
};

struct StageArtifacts {
    AttackGraph graph;
    std::map<int, double> rule_probs;
    Smdp attacker;
    Smdp defender;
    std::vector<RewardStructure> rewards;
    StochasticGame game;           // perfect game (or transformed, when PO)
    std::optional<PoGame> po;
    std::vector<std::pair<std::string, CheckResult>> checks;
    std::optional<Strategy> strategy;
};

struct RunResult {
    bool ok = true;
    std::string failed_stage;
    std::string error;
    std::vector<std::string> outputs;  // files written
    bool checks_pass = true;
};

/// Run the pipeline: graph -> game -> optional PO transform -> check /
/// synthesize, persisting each stage's output under out_dir plus a summary
/// CSV of model sizes and values.
RunResult run_pipeline(const PipelineConfig& config, const std::string& out_dir);

/// Build the stages in memory (shared by run_pipeline and the CLI verbs).
StageArtifacts build_stages(const PipelineConfig& config, bool run_checks = true);

struct SweepAxes {
    std::vector<double> defense_strength;   // fraction of defenses enabled
    std::vector<int> unobservable_count;    // attacker action types hidden
    std::vector<int> vuln_count;            // vulnerability facts kept
};

/// Per-cell model sizes, check values and wall times, written as CSV.
/// Cell failures are recorded in the CSV and the sweep continues.
std::string sweep(const PipelineConfig& config, const SweepAxes& axes);

}  // namespace posecgame
