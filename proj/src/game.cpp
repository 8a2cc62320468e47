#include "posecgame/game.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace posecgame {

const char* player_name(Player p) { return p == Player::Attacker ? "A" : "D"; }

Player other(Player p) { return p == Player::Attacker ? Player::Defender : Player::Attacker; }

std::string action_type(const std::string& action_label) {
    auto pos = action_label.find('#');
    return pos == std::string::npos ? action_label : action_label.substr(0, pos);
}

Scheduler Scheduler::strict_alternation(Player initial) {
    Scheduler s;
    s.kind = Kind::StrictAlternation;
    s.initial = initial;
    return s;
}

Scheduler Scheduler::trigger_set(std::set<std::string> triggers, Player initial) {
    Scheduler s;
    s.kind = Kind::TriggerSet;
    s.initial = initial;
    s.triggers = std::move(triggers);
    return s;
}

Player Scheduler::next(Player actor, const std::string& action) const {
    if (kind == Kind::StrictAlternation) return other(actor);
    if (actor == Player::Defender) return Player::Attacker;
    return triggers.count(action_type(action)) ? Player::Defender : Player::Attacker;
}

std::size_t StochasticGame::transition_count() const {
    std::size_t n = 0;
    for (const auto& row : trans) n += row.size();
    return n;
}

bool StochasticGame::known_atom(const std::string& atom) const {
    return atom == kAttackerBlockedLabel || vars.contains(atom);
}

bool StochasticGame::label_true(std::size_t s, const std::string& atom) const {
    if (atom == kAttackerBlockedLabel) return state_blocked[s];
    auto idx = vars.index(atom);
    if (!idx) throw Error("unresolvable atom '" + atom + "'");
    return state_vals[s].bits.get(*idx);
}

std::set<std::string> StochasticGame::labels(std::size_t s) const {
    std::set<std::string> out;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (state_vals[s].bits.get(i)) out.insert(vars.name(i));
    if (state_blocked[s]) out.insert(kAttackerBlockedLabel);
    return out;
}

const RewardStructure& StochasticGame::reward_structure(const std::string& name) const {
    for (const auto& r : rewards)
        if (r.name == name) return r;
    throw Error("unknown reward structure '" + name + "'");
}

bool StochasticGame::has_reward_structure(const std::string& name) const {
    for (const auto& r : rewards)
        if (r.name == name) return true;
    return false;
}

bool StochasticGame::check_deterministic() const {
    for (const auto& row : trans) {
        std::set<std::string> seen;
        for (const auto& [action, dist] : row)
            if (!seen.insert(action).second) return false;
    }
    return true;
}

namespace {

struct GameKey {
    BitVec bits;
    Player turn;
    bool operator==(const GameKey& o) const { return turn == o.turn && bits == o.bits; }
};

struct GameKeyHash {
    std::size_t operator()(const GameKey& k) const {
        return k.bits.hash() * 2 + (k.turn == Player::Defender ? 1 : 0);
    }
};

}  // namespace

StochasticGame compose(const Mdp& attacker, const Mdp& defender, const Scheduler& sched,
                       std::vector<RewardStructure> rewards, std::size_t state_cap) {
    for (const auto& a : attacker.actions)
        if (defender.actions.count(a))
            throw Error("compose: action '" + a + "' belongs to both players");

    std::set<std::string> names(attacker.vars.names().begin(), attacker.vars.names().end());
    names.insert(defender.vars.names().begin(), defender.vars.names().end());

    StochasticGame g;
    g.vars = VariableTable(names);
    g.attacker_actions = attacker.actions;
    g.defender_actions = defender.actions;
    g.rewards = std::move(rewards);

    // projections between the union vector and the players' own vectors
    auto projection = [&](const Mdp& m) {
        std::vector<std::size_t> map(m.vars.size());
        for (std::size_t i = 0; i < m.vars.size(); ++i) map[i] = *g.vars.index(m.vars.name(i));
        return map;
    };
    const std::vector<std::size_t> attacker_map = projection(attacker);
    const std::vector<std::size_t> defender_map = projection(defender);

    Valuation init = Valuation::zeros(g.vars);
    for (std::size_t i = 0; i < attacker.vars.size(); ++i)
        init.bits.set(attacker_map[i], attacker.states[attacker.init].bits.get(i));
    for (std::size_t i = 0; i < defender.vars.size(); ++i) {
        bool dv = defender.states[defender.init].bits.get(i);
        const std::string& name = defender.vars.name(i);
        if (attacker.vars.contains(name)) {
            if (init.bits.get(defender_map[i]) != dv)
                throw Error("compose: initial values of shared variable '" + name +
                            "' disagree between the players");
        } else {
            init.bits.set(defender_map[i], dv);
        }
    }

    std::unordered_map<GameKey, std::size_t, GameKeyHash> index;
    auto intern = [&](const Valuation& v, Player t) {
        GameKey key{v.bits, t};
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        std::size_t id = g.state_vals.size();
        if (id >= state_cap)
            throw Error("compose: state cap of " + std::to_string(state_cap) + " exceeded");
        index[key] = id;
        g.state_vals.push_back(v);
        g.state_turn.push_back(t);
        g.state_blocked.push_back(false);
        g.trans.emplace_back();
        return id;
    };

    g.init = intern(init, sched.initial);
    std::deque<std::size_t> frontier{g.init};
    bool used_idle_a = false, used_idle_d = false;

    while (!frontier.empty()) {
        std::size_t s = frontier.front();
        frontier.pop_front();
        const Player turn = g.state_turn[s];
        const Mdp& active = turn == Player::Attacker ? attacker : defender;
        const auto& map = turn == Player::Attacker ? attacker_map : defender_map;

        Valuation proj = Valuation::zeros(active.vars);
        for (std::size_t i = 0; i < active.vars.size(); ++i)
            proj.bits.set(i, g.state_vals[s].bits.get(map[i]));

        auto moves = active.moves(proj);
        if (moves.empty()) {
            const std::string& idle = turn == Player::Attacker ? kIdleAttacker : kIdleDefender;
            (turn == Player::Attacker ? used_idle_a : used_idle_d) = true;
            if (turn == Player::Attacker) g.state_blocked[s] = true;
            std::size_t before = g.state_vals.size();
            std::size_t succ = intern(g.state_vals[s], sched.next(turn, idle));
            if (succ == before) frontier.push_back(succ);
            g.trans[s].push_back({idle, {{succ, 1.0}}});
            continue;
        }
        for (auto& [action, dist] : moves) {
            Player next_turn = sched.next(turn, action);
            std::vector<std::pair<std::size_t, double>> row;
            for (auto& [succ_proj, p] : dist) {
                Valuation succ = g.state_vals[s];
                for (std::size_t i = 0; i < active.vars.size(); ++i)
                    succ.bits.set(map[i], succ_proj.bits.get(i));
                std::size_t before = g.state_vals.size();
                std::size_t id = intern(succ, next_turn);
                if (id == before) frontier.push_back(id);
                row.push_back({id, p});
            }
            g.trans[s].push_back({action, std::move(row)});
        }
    }

    if (used_idle_a) g.attacker_actions.insert(kIdleAttacker);
    if (used_idle_d) g.defender_actions.insert(kIdleDefender);
    return g;
}

}  // namespace posecgame
