#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "posecgame/game.hpp"
#include "posecgame/rpatl.hpp"
#include "posecgame/smdp.hpp"
#include "posecgame/threat_model.hpp"

namespace posecgame {

/// Suffix of the attacker's private copy of a shared variable in a
/// partially observable game state.
inline const std::string kAttackerCopySuffix = "__att";

/// Which attacker actions the defender can observe. The observable variable
/// set is derived from it: condition capabilities plus the consequences of
/// observable actions.
struct ObservationSpec {
    std::set<std::string> observable_actions;  // attacker action labels

    bool is_observable(const std::string& action) const {
        return observable_actions.count(action_type(action)) > 0 ||
               observable_actions.count(action) > 0;
    }

    static ObservationSpec from_json(const std::string& text, const AttackGraph& g);
    std::string to_json() const;
};

/// Observable variables of an attack graph under an observation spec.
std::set<std::string> observable_variables(const AttackGraph& g, const ObservationSpec& obs);

/// One distinct set of observable prerequisites of an observable rule,
/// together with the rule path whose probabilities/rewards it aggregates.
struct Dop {
    std::set<int> prereqs;      // node ids, all observable
    std::vector<int> path_rules;  // traversed unobservable rules + target rule last

    auto operator<=>(const Dop&) const = default;
};

using DopSet = std::vector<Dop>;  // canonically sorted

/// Distinct observable prerequisites of rule r (r must be observable).
/// Unobservable-only cyclic regions are cut by the visited set.
DopSet do_prerequisites(const AttackGraph& g, int rule_node, const ObservationSpec& obs);

/// Observable attacker behavior: per observable rule and each of its DOPs,
/// one transition guarded on the DOP, labeled act(dop) = "<rule>#<k>", whose
/// success probability multiplies the rule probabilities along the recorded
/// path. Each action reward structure is aggregated by summing along the
/// same path.
struct ObservableAttacker {
    Smdp smdp;
    std::vector<RewardStructure> rewards;
    std::map<std::string, Dop> action_dops;     // act(dop) -> dop
    std::vector<std::string> warnings;          // rules with empty DOP sets
};

ObservableAttacker observable_attacker(const AttackGraph& g, const ObservationSpec& obs,
                                       const std::map<int, double>& p,
                                       const std::vector<RewardStructure>& rewards);

/// One-sided partially observable security game: the underlying explicit
/// game duplicates the shared variables (defender copy under the plain
/// name, attacker copy suffixed) and applies unobservable updates to the
/// attacker copies only.
struct PoGame {
    StochasticGame game;
    ObservationSpec observation;
    std::set<std::string> shared_vars;       // V_AD, plain names
    std::set<std::string> observable_vars;   // V_O, plain names
    // construction inputs, kept for transform()
    AttackGraph graph;
    std::map<int, double> rule_probs;
    Smdp attacker;
    Smdp defender;
    Scheduler scheduler;
    std::vector<RewardStructure> base_rewards;
    std::size_t state_cap = kDefaultStateCap;
};

struct Observation {
    std::map<std::string, bool> vars;  // defender variables, plain names
    Player turn = Player::Attacker;

    bool operator==(const Observation&) const = default;
};

/// Projection of a PO-game state onto the defender's variables and the turn.
Observation obs(const PoGame& po, std::size_t state);

/// Effective update under the observation semantics: unobservable attacker
/// actions update only the attacker copies of shared variables; observable
/// and defender actions update both copies.
Update up(const Update& u, const std::string& action, const std::set<std::string>& shared,
          const ObservationSpec& observation, bool defender_action);

/// Build the PO game from an attack graph, defense behavior and scheduler.
PoGame build_po_game(const AttackGraph& g, const std::map<int, double>& p,
                     const Smdp& defender, const ObservationSpec& observation,
                     const Scheduler& sched, std::vector<RewardStructure> rewards,
                     std::size_t state_cap = kDefaultStateCap);

/// All defense-triggering capabilities observable (V_AD subset of V_O).
bool odt_check(const PoGame& po);

/// Observable step-unbounded defense objective: atoms over V_O and the
/// defender's variables, no X, no bounded until, coalitions within {D}.
bool classify_objective(const FormulaPtr& f, const std::set<std::string>& observable_vars,
                        const std::set<std::string>& defender_vars);

struct TransformReport {
    std::map<std::string, std::size_t> dop_counts;  // per observable rule
    std::vector<std::string> warnings;
    std::size_t po_states = 0, po_transitions = 0;
    std::size_t perfect_states = 0, perfect_transitions = 0;

    std::string to_json() const;
};

/// Transformation of an ODT game to a perfect game over the observable
/// attacker behavior; the defender is preserved verbatim.
StochasticGame transform(const PoGame& po, TransformReport* report = nullptr);

}  // namespace posecgame
