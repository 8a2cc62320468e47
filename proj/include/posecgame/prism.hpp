#pragma once

#include <string>
#include <vector>

#include "posecgame/game.hpp"
#include "posecgame/smdp.hpp"

namespace posecgame {

/// PRISM-games SMG model text: a single module with both players' guarded
/// commands gated on the turn variable, player blocks partitioning the
/// actions, label definitions and one rewards block per structure. Output
/// is byte-stable given the fixed variable and transition orderings.
std::string export_prism_model(const Smdp& attacker, const Smdp& defender,
                               const Scheduler& sched,
                               const std::vector<RewardStructure>& rewards,
                               const std::string& goal_var);

/// Companion .props file for a list of rPATL formulas.
std::string export_prism_properties(const std::vector<std::string>& formulas);

}  // namespace posecgame
