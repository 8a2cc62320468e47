#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "posecgame/pogame.hpp"
#include "posecgame/rpatl.hpp"

namespace posecgame {

/// Relation between states of two games.
struct Relation {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// Weak-move relation: tau-closure over unobservable attacker edges,
/// composed with one observable or defender edge.
struct WeakMoves {
    // per state: targets reachable by (unobservable)* (observable|defender)
    std::vector<std::vector<std::size_t>> targets;
};

WeakMoves weak_closure(const StochasticGame& game, const ObservationSpec& observation);

struct BisimCounterexample {
    std::size_t left = 0, right = 0;
    std::size_t move_target = 0;
    bool in_left_game = true;
    std::string reason;
};

struct BisimResult {
    bool holds = true;
    std::optional<BisimCounterexample> counterexample;
};

/// Check that R is a weak bisimulation between the games: related states
/// agree on common variables and mutually transfer their weak moves into R;
/// the initial states must be related.
BisimResult check_weak_bisim(const StochasticGame& g, const ObservationSpec& obs_g,
                             const StochasticGame& g2, const ObservationSpec& obs_g2,
                             const Relation& r);

/// Witness candidate for a PO game and its transformation: all pairs whose
/// projections on attacker-local observable variables, defender variables
/// and the turn coincide.
Relation candidate_relation(const PoGame& po, const StochasticGame& transformed);

struct FormulaAgreement {
    std::string formula;
    bool skipped = false;
    std::string skip_reason;
    double value_po = 0.0;
    double value_perfect = 0.0;
    double delta = 0.0;
    bool pass = true;
};

struct AgreementReport {
    std::vector<FormulaAgreement> formulas;
    bool all_pass = true;
    double tolerance = 1e-6;

    std::string to_json() const;
};

/// Check each formula on the PO game (as a perfect game over its full
/// state space) and on the transformed game; report value agreement.
/// Formulas outside the observable step-unbounded fragment are skipped.
AgreementReport dual_check(const PoGame& po, const StochasticGame& transformed,
                           const std::vector<std::string>& formulas,
                           const ValueIterationSettings& settings = {},
                           double tolerance = 1e-6);

/// Synthesize on the transformed game, lift the strategy to the PO game
/// through the candidate relation, re-check there and compare values.
AgreementReport strategy_equiv(const PoGame& po, const StochasticGame& transformed,
                               const std::string& objective,
                               const ValueIterationSettings& settings = {},
                               double tolerance = 1e-6);

enum class AttackerPolicy { SynthesizedOpt, Uniform };

struct MonteCarloResult {
    double estimate = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // 95% Wilson interval
    std::size_t runs = 0;
    std::size_t hits = 0;
};

/// Fraction of episodes reaching the target atom within the horizon, under
/// the given defender strategy. Episodes are seeded per index so results
/// are order-independent and reproducible.
MonteCarloResult monte_carlo(const StochasticGame& game, const Strategy& defender,
                             AttackerPolicy attacker_policy, const std::string& target,
                             std::size_t runs, std::size_t horizon, uint64_t seed,
                             const FormulaPtr& objective_for_opt = nullptr,
                             const ValueIterationSettings& settings = {});

/// Randomly generated ODT instance: layered DAG attack graph, defenses on
/// observable consequences, trigger-set scheduler.
struct OdtInstance {
    AttackGraph graph;
    std::map<int, double> rule_probs;
    DefenseSpec defenses;
    Smdp defender;
    ObservationSpec observation;
    Scheduler scheduler;
    std::vector<RewardStructure> rewards;
    std::string goal_var;
    uint64_t seed = 0;
};

struct GeneratorOptions {
    int min_layers = 3, max_layers = 6;
    int max_fanin = 3;
    double min_prob = 0.3, max_prob = 0.95;
    int max_defenses = 4;
    std::size_t state_cap = 50'000;
};

OdtInstance generate_odt_instance(uint64_t seed, const GeneratorOptions& opts = {});

struct SoundnessReport {
    std::size_t instances = 0;
    std::size_t dual_failures = 0;
    std::size_t bisim_failures = 0;
    std::size_t strategy_failures = 0;
    std::vector<std::string> details;
    bool all_pass() const {
        return dual_failures == 0 && bisim_failures == 0 && strategy_failures == 0;
    }
    std::string to_json() const;
};

/// Randomized soundness harness: dual model checking, witnessing weak
/// bisimulation and strategy lifting on generated ODT instances.
SoundnessReport verify_soundness(std::size_t instances, uint64_t seed,
                                 const GeneratorOptions& opts = {},
                                 const ValueIterationSettings& settings = {});

}  // namespace posecgame
