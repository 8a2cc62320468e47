#pragma once

// Exact rational brute-force evaluator, independent of the value-iteration
// path it checks. Works on layered acyclic games whose probabilities are
// dyadic (eighths), so both sides are exact in double precision.

#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "posecgame/game.hpp"
#include "posecgame/rpatl.hpp"

namespace testutil {

struct Rat {
    long long num = 0;
    long long den = 1;

    static Rat of(long long n, long long d = 1) {
        Rat r{n, d};
        r.normalize();
        return r;
    }

    void normalize() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    static long long checked_mul(long long a, long long b) {
        __int128 w = static_cast<__int128>(a) * b;
        if (w > INT64_MAX || w < INT64_MIN) throw std::overflow_error("rational overflow");
        return static_cast<long long>(w);
    }

    Rat operator+(const Rat& o) const {
        Rat r{checked_mul(num, o.den) + checked_mul(o.num, den), checked_mul(den, o.den)};
        r.normalize();
        return r;
    }
    Rat operator*(const Rat& o) const {
        Rat r{checked_mul(num, o.num), checked_mul(den, o.den)};
        r.normalize();
        return r;
    }
    bool operator<(const Rat& o) const {
        return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
    }
    bool operator==(const Rat& o) const { return num == o.num && den == o.den; }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    // exact conversion of a dyadic double
    static Rat from_dyadic(double v) {
        Rat r{0, 1};
        long long den = 1;
        while (v != static_cast<double>(static_cast<long long>(v))) {
            v *= 2;
            den *= 2;
            if (den > (1LL << 40)) throw std::overflow_error("not dyadic");
        }
        r = Rat{static_cast<long long>(v), den};
        r.normalize();
        return r;
    }
};

inline bool oracle_maximizes(const posecgame::StochasticGame& g, std::size_t s,
                             const posecgame::Coalition& coalition, posecgame::Opt opt) {
    bool in_coalition = coalition.contains(g.turn(s));
    return in_coalition == (opt == posecgame::Opt::Max);
}

/// Bounded-until probability by plain tree enumeration (no memoization).
inline Rat oracle_bounded_until(const posecgame::StochasticGame& g,
                                const posecgame::Coalition& coalition, posecgame::Opt opt,
                                const std::vector<bool>& sat1, const std::vector<bool>& sat2,
                                int k, std::size_t s) {
    if (sat2[s]) return Rat::of(1);
    if (!sat1[s]) return Rat::of(0);
    if (k == 0) return Rat::of(0);
    bool maximize = oracle_maximizes(g, s, coalition, opt);
    std::optional<Rat> best;
    for (const auto& [action, dist] : g.trans[s]) {
        Rat total = Rat::of(0);
        for (const auto& [succ, p] : dist)
            total = total + Rat::from_dyadic(p) *
                                oracle_bounded_until(g, coalition, opt, sat1, sat2, k - 1, succ);
        if (!best || (maximize ? *best < total : total < *best)) best = total;
    }
    return best ? *best : Rat::of(0);
}

/// Unbounded until on a layered acyclic game: every action either moves
/// strictly forward or self-loops in an absorbing sink, so depth bounds it.
inline Rat oracle_until_acyclic(const posecgame::StochasticGame& g,
                                const posecgame::Coalition& coalition, posecgame::Opt opt,
                                const std::vector<bool>& sat1, const std::vector<bool>& sat2,
                                std::size_t s) {
    if (sat2[s]) return Rat::of(1);
    if (!sat1[s]) return Rat::of(0);
    bool absorbing = true;
    for (const auto& [action, dist] : g.trans[s])
        for (const auto& [succ, p] : dist)
            if (succ != s) absorbing = false;
    if (absorbing) return Rat::of(0);
    bool maximize = oracle_maximizes(g, s, coalition, opt);
    std::optional<Rat> best;
    for (const auto& [action, dist] : g.trans[s]) {
        Rat total = Rat::of(0);
        for (const auto& [succ, p] : dist)
            total = total + Rat::from_dyadic(p) *
                                oracle_until_acyclic(g, coalition, opt, sat1, sat2, succ);
        if (!best || (maximize ? *best < total : total < *best)) best = total;
    }
    return best ? *best : Rat::of(0);
}

/// Expected accumulated reward until the target; nullopt is infinity.
inline std::optional<Rat> oracle_reward_acyclic(const posecgame::StochasticGame& g,
                                                const posecgame::Coalition& coalition,
                                                posecgame::Opt opt,
                                                const posecgame::RewardStructure& rew,
                                                const std::vector<bool>& target,
                                                std::size_t s) {
    if (target[s]) return Rat::of(0);
    bool absorbing = true;
    for (const auto& [action, dist] : g.trans[s])
        for (const auto& [succ, p] : dist)
            if (succ != s) absorbing = false;
    if (absorbing) return std::nullopt;
    bool maximize = oracle_maximizes(g, s, coalition, opt);
    std::optional<Rat> best;
    bool best_set = false;
    for (const auto& [action, dist] : g.trans[s]) {
        std::optional<Rat> total = Rat::from_dyadic(rew.reward(action));
        for (const auto& [succ, p] : dist) {
            auto sub = oracle_reward_acyclic(g, coalition, opt, rew, target, succ);
            if (!sub) {
                total = std::nullopt;
                break;
            }
            total = *total + Rat::from_dyadic(p) * *sub;
        }
        if (!total) {
            if (maximize) return std::nullopt;  // a maximizer diverges when it can
            continue;
        }
        if (!best_set || (maximize ? *best < *total : *total < *best)) {
            best = total;
            best_set = true;
        }
    }
    if (!best_set) return std::nullopt;
    return best;
}

/// Random layered acyclic game with dyadic probabilities (eighths), up to
/// `max_layers` steps and `max_actions` actions per state. Labels: variable
/// "a" marks target states, "b" marks constraint states.
inline posecgame::StochasticGame random_dyadic_game(std::mt19937_64& rng, int max_layers = 6,
                                                    int max_actions = 4) {
    using namespace posecgame;
    auto rand_int = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };

    StochasticGame g;
    g.vars = VariableTable({"a", "b", "sink"});
    const int layers = rand_int(2, max_layers);
    std::vector<std::vector<std::size_t>> layer_states(layers);
    for (int l = 0; l < layers; ++l) {
        int width = rand_int(1, 3);
        for (int i = 0; i < width; ++i) {
            Valuation v = Valuation::zeros(g.vars);
            // targets concentrate toward the end so paths have depth
            bool a = rand_int(0, 9) < (l == layers - 1 ? 5 : 1);
            bool b = rand_int(0, 9) < 8;
            v.bits.set(*g.vars.index("a"), a);
            v.bits.set(*g.vars.index("b"), b);
            v.bits.set(*g.vars.index("sink"), l == layers - 1);
            g.state_vals.push_back(v);
            g.state_turn.push_back(rand_int(0, 1) ? Player::Attacker : Player::Defender);
            g.state_blocked.push_back(false);
            g.trans.emplace_back();
            layer_states[l].push_back(g.state_vals.size() - 1);
        }
    }
    RewardStructure rew{"r", {}};
    int action_counter = 0;
    for (int l = 0; l < layers; ++l) {
        for (std::size_t s : layer_states[l]) {
            if (l == layers - 1) {
                std::string a = "loop" + std::to_string(action_counter++);
                g.trans[s].push_back({a, {{s, 1.0}}});
                (g.turn(s) == Player::Attacker ? g.attacker_actions : g.defender_actions)
                    .insert(a);
                continue;
            }
            int n_actions = rand_int(1, max_actions);
            for (int k = 0; k < n_actions; ++k) {
                std::string a = "act" + std::to_string(action_counter++);
                // dyadic distribution over next-layer states: eighths
                const auto& next = layer_states[l + 1];
                std::vector<int> eighths(next.size(), 0);
                for (int piece = 0; piece < 8; ++piece)
                    eighths[static_cast<std::size_t>(
                        rand_int(0, static_cast<int>(next.size()) - 1))]++;
                std::vector<std::pair<std::size_t, double>> dist;
                for (std::size_t i = 0; i < next.size(); ++i)
                    if (eighths[i] > 0) dist.push_back({next[i], eighths[i] / 8.0});
                g.trans[s].push_back({a, std::move(dist)});
                (g.turn(s) == Player::Attacker ? g.attacker_actions : g.defender_actions)
                    .insert(a);
                rew.rewards[a] = rand_int(0, 5);
            }
        }
    }
    g.rewards = {rew};
    g.init = layer_states[0].front();
    return g;
}

}  // namespace testutil
