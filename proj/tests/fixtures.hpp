#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "posecgame/game.hpp"
#include "posecgame/threat_model.hpp"

#ifndef POSECGAME_FIXTURES
#error "POSECGAME_FIXTURES must point at the fixture directory"
#endif

namespace testutil {

inline std::string fixture_path(const std::string& rel) {
    return std::string(POSECGAME_FIXTURES) + "/" + rel;
}

inline std::string read_fixture(const std::string& rel) {
    std::ifstream in(fixture_path(rel), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline posecgame::AttackGraph fig3() {
    return posecgame::import_mulval_files(fixture_path("fig3/VERTICES.CSV"),
                                          fixture_path("fig3/ARCS.CSV"));
}

inline std::map<int, double> fig3_probs() {
    return {{2, 0.74}, {5, 0.8}, {8, 0.45}, {11, 0.92}};
}

/// Hand-built explicit games for the value-engine tests.
class GameBuilder {
  public:
    explicit GameBuilder(std::set<std::string> var_names)
        : vars_(std::move(var_names)) {}

    std::size_t add_state(const std::map<std::string, bool>& vals, posecgame::Player turn,
                          bool blocked = false) {
        game_.state_vals.push_back(posecgame::valuation_from_map(vars_, vals));
        game_.state_turn.push_back(turn);
        game_.state_blocked.push_back(blocked);
        game_.trans.emplace_back();
        return game_.state_vals.size() - 1;
    }

    void add_action(std::size_t from, const std::string& action,
                    std::vector<std::pair<std::size_t, double>> dist) {
        if (game_.state_turn[from] == posecgame::Player::Attacker)
            game_.attacker_actions.insert(action);
        else
            game_.defender_actions.insert(action);
        game_.trans[from].push_back({action, std::move(dist)});
    }

    void set_reward(const std::string& structure, const std::string& action, double value) {
        for (auto& r : game_.rewards)
            if (r.name == structure) {
                r.rewards[action] = value;
                return;
            }
        game_.rewards.push_back(posecgame::RewardStructure{structure, {{action, value}}});
    }

    posecgame::StochasticGame build(std::size_t init = 0) {
        game_.vars = vars_;
        game_.init = init;
        return game_;
    }

  private:
    posecgame::VariableTable vars_;
    posecgame::StochasticGame game_;
};

}  // namespace testutil
