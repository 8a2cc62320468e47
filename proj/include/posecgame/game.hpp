#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "posecgame/common.hpp"
#include "posecgame/smdp.hpp"

namespace posecgame {

enum class Player { Attacker, Defender };

const char* player_name(Player p);
Player other(Player p);

inline const std::string kIdleAttacker = "idle_A";
inline const std::string kIdleDefender = "idle_D";
inline const std::string kAttackerBlockedLabel = "attackerBlocked";

/// Action labels carry an optional "#k" suffix distinguishing multiple
/// instantiations; the part before it is the action type schedulers match on.
std::string action_type(const std::string& action_label);

/// Turn scheduler. Strict alternation flips the active player after every
/// move; a trigger-set scheduler hands control to the defender exactly after
/// attacker actions whose type is in the set (and back to the attacker after
/// every defender move).
struct Scheduler {
    enum class Kind { StrictAlternation, TriggerSet };
    Kind kind = Kind::StrictAlternation;
    Player initial = Player::Attacker;
    std::set<std::string> triggers;  // action types, TriggerSet only

    static Scheduler strict_alternation(Player initial = Player::Attacker);
    static Scheduler trigger_set(std::set<std::string> triggers,
                                 Player initial = Player::Attacker);

    Player next(Player actor, const std::string& action) const;
};

/// Turn-based two-player stochastic game, explicit-state.
struct StochasticGame {
    VariableTable vars;          // union of both players' variables
    std::vector<Valuation> state_vals;
    std::vector<Player> state_turn;
    std::vector<bool> state_blocked;  // attackerBlocked label per state
    std::size_t init = 0;
    std::set<std::string> attacker_actions;
    std::set<std::string> defender_actions;
    // per state: (action, distribution over successor state indices)
    std::vector<std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>>> trans;
    std::vector<RewardStructure> rewards;

    std::size_t state_count() const { return state_vals.size(); }
    std::size_t transition_count() const;
    Player turn(std::size_t s) const { return state_turn[s]; }

    bool label_true(std::size_t s, const std::string& atom) const;
    bool known_atom(const std::string& atom) const;
    std::set<std::string> labels(std::size_t s) const;

    const RewardStructure& reward_structure(const std::string& name) const;
    bool has_reward_structure(const std::string& name) const;

    /// At most one distribution per (state, action).
    bool check_deterministic() const;
};

/// Reachable product of the two players' behaviors under a scheduler.
/// Each player's substate moves per its own (symbolically re-evaluable)
/// MDP; states whose active player has no enabled action get a synthetic
/// zero-reward idle self-loop so value iteration is well defined.
StochasticGame compose(const Mdp& attacker, const Mdp& defender, const Scheduler& sched,
                       std::vector<RewardStructure> rewards,
                       std::size_t state_cap = kDefaultStateCap);

}  // namespace posecgame
