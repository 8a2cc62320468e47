#include "posecgame/pogame.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include <json.hpp>

namespace posecgame {

using nlohmann::json;
using nlohmann::ordered_json;

ObservationSpec ObservationSpec::from_json(const std::string& text, const AttackGraph& g) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid observation JSON: ") + e.what(), 1, 1);
    }
    ObservationSpec spec;
    const auto labels = rule_action_labels(g);
    try {
        for (const auto& entry : doc.at("observable_actions")) {
            if (entry.is_number_integer()) {
                int id = entry.get<int>();
                auto it = labels.find(id);
                if (it == labels.end())
                    throw Error("observable_actions: node " + std::to_string(id) +
                                " is not a rule node");
                spec.observable_actions.insert(it->second);
            } else {
                spec.observable_actions.insert(entry.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("observation spec: ") + e.what(), 1, 1);
    }
    return spec;
}

std::string ObservationSpec::to_json() const {
    ordered_json doc;
    doc["observable_actions"] = ordered_json::array();
    for (const auto& a : observable_actions) doc["observable_actions"].push_back(a);
    return doc.dump(2) + "\n";
}

std::set<std::string> observable_variables(const AttackGraph& g, const ObservationSpec& obs) {
    std::set<std::string> out;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::Condition) out.insert(n.label);
    const auto labels = rule_action_labels(g);
    for (const auto& [r, label] : labels) {
        if (!obs.is_observable(label)) continue;
        for (int s : g.successors(r)) out.insert(g.node(s).label);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Algorithm: distinct observable prerequisites
// ---------------------------------------------------------------------------

namespace {

struct DopKey {
    std::set<int> prereqs;
    std::set<int> rules;
    auto operator<=>(const DopKey&) const = default;
};

std::vector<DopKey> dop_rec(const AttackGraph& g, int rule, std::set<int> visited,
                            const ObservationSpec& obs,
                            const std::map<int, std::string>& labels) {
    std::vector<std::vector<DopKey>> per_prereq;
    auto prereqs = g.predecessors(rule);
    std::sort(prereqs.begin(), prereqs.end());
    for (int n : prereqs) {
        std::set<DopKey> alts;
        if (g.node(n).kind == NodeKind::Condition) {
            alts.insert(DopKey{{n}, {}});
        } else {
            auto deriving = g.predecessors(n);
            std::sort(deriving.begin(), deriving.end());
            for (int r2 : deriving) {
                if (visited.count(r2)) continue;
                if (obs.is_observable(labels.at(r2))) {
                    alts.insert(DopKey{{n}, {}});
                } else {
                    auto nested = visited;
                    nested.insert(rule);
                    for (auto sub : dop_rec(g, r2, nested, obs, labels)) {
                        sub.rules.insert(r2);
                        alts.insert(std::move(sub));
                    }
                }
            }
        }
        if (alts.empty()) return {};  // no observable support through this prerequisite
        per_prereq.push_back({alts.begin(), alts.end()});
    }

    std::vector<DopKey> combined{DopKey{}};
    for (const auto& alts : per_prereq) {
        std::set<DopKey> grown;
        for (const auto& partial : combined) {
            for (const auto& choice : alts) {
                DopKey merged = partial;
                merged.prereqs.insert(choice.prereqs.begin(), choice.prereqs.end());
                merged.rules.insert(choice.rules.begin(), choice.rules.end());
                grown.insert(std::move(merged));
            }
        }
        combined.assign(grown.begin(), grown.end());
        if (combined.size() > 100000)
            throw Error("do_prerequisites: combination blow-up past 100000 sets");
    }
    return combined;
}

}  // namespace

DopSet do_prerequisites(const AttackGraph& g, int rule_node, const ObservationSpec& obs) {
    const auto labels = rule_action_labels(g);
    if (!labels.count(rule_node))
        throw Error("do_prerequisites: node " + std::to_string(rule_node) + " is not a rule");
    if (!obs.is_observable(labels.at(rule_node)))
        throw Error("do_prerequisites: rule " + std::to_string(rule_node) +
                    " is not observable");
    DopSet out;
    for (const auto& key : dop_rec(g, rule_node, {}, obs, labels)) {
        Dop d;
        d.prereqs = key.prereqs;
        d.path_rules.assign(key.rules.begin(), key.rules.end());
        d.path_rules.push_back(rule_node);
        out.push_back(std::move(d));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Observable attacker behavior
// ---------------------------------------------------------------------------

ObservableAttacker observable_attacker(const AttackGraph& g, const ObservationSpec& obs,
                                       const std::map<int, double>& p,
                                       const std::vector<RewardStructure>& rewards) {
    const auto labels = rule_action_labels(g);
    ObservableAttacker out;

    std::set<std::string> vars = observable_variables(g, obs);
    std::set<std::string> condition_vars;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::Condition) condition_vars.insert(n.label);

    Smdp& m = out.smdp;
    m.vars = VariableTable(vars);
    m.init = Valuation::zeros(m.vars);
    for (const auto& v : condition_vars) m.init.bits.set(*m.vars.index(v), true);

    // aggregated reward structures start from the input ones minus the
    // original attacker rule actions
    std::set<std::string> rule_labels;
    for (const auto& [r, label] : labels) rule_labels.insert(label);
    for (const auto& rs : rewards) {
        RewardStructure agg;
        agg.name = rs.name;
        for (const auto& [action, value] : rs.rewards)
            if (!rule_labels.count(action)) agg.rewards[action] = value;
        out.rewards.push_back(std::move(agg));
    }

    for (const auto& [r, label] : labels) {
        if (!obs.is_observable(label)) continue;
        DopSet dops = do_prerequisites(g, r, obs);
        if (dops.empty()) {
            out.warnings.push_back("rule '" + label +
                                   "' has no observable prerequisite set; transition omitted");
            continue;
        }
        auto succ = g.successors(r);
        if (succ.size() != 1)
            throw Error("observable_attacker: rule node " + std::to_string(r) +
                        " must have exactly one successor");
        const std::string& consequence = g.node(succ.front()).label;

        for (std::size_t k = 0; k < dops.size(); ++k) {
            const Dop& dop = dops[k];
            double prob = 1.0;
            for (int ri : dop.path_rules) {
                auto it = p.find(ri);
                if (it == p.end())
                    throw Error("observable_attacker: no probability for rule node " +
                                std::to_string(ri));
                prob *= it->second;
            }
            std::vector<std::string> pos;
            for (int n : dop.prereqs) pos.push_back(g.node(n).label);
            std::sort(pos.begin(), pos.end());
            pos.erase(std::unique(pos.begin(), pos.end()), pos.end());

            SymbolicTransition t;
            t.guard = BoolExpr::literal_conjunction(pos, {consequence});
            t.action = label + "#" + std::to_string(k);
            if (prob > 0.0) t.branches.push_back({Update{{{consequence, true}}}, prob});
            if (prob < 1.0) t.branches.push_back({Update{}, 1.0 - prob});
            m.actions.insert(t.action);
            m.transitions.push_back(t);
            out.action_dops[t.action] = dop;

            for (std::size_t i = 0; i < rewards.size(); ++i) {
                double sum = 0.0;
                for (int ri : dop.path_rules) sum += rewards[i].reward(labels.at(ri));
                if (sum != 0.0) out.rewards[i].rewards[t.action] = sum;
            }
        }
    }
    std::stable_sort(m.transitions.begin(), m.transitions.end(),
                     [](const SymbolicTransition& a, const SymbolicTransition& b) {
                         return a.action < b.action;
                     });
    m.validate();
    return out;
}

// ---------------------------------------------------------------------------
// PO game construction
// ---------------------------------------------------------------------------

Update up(const Update& u, const std::string& action, const std::set<std::string>& shared,
          const ObservationSpec& observation, bool defender_action) {
    Update out;
    bool lifted = defender_action || observation.is_observable(action);
    for (const auto& [var, value] : u.assign) {
        if (defender_action) {
            // defender writes its own copy; shared variables also reach the
            // attacker's copy
            out.assign[var] = value;
            if (shared.count(var)) out.assign[var + kAttackerCopySuffix] = value;
        } else {
            // attacker writes its own side; observable actions also reach
            // the defender's copy of shared variables
            out.assign[shared.count(var) ? var + kAttackerCopySuffix : var] = value;
            if (lifted && shared.count(var)) out.assign[var] = value;
        }
    }
    return out;
}

namespace {

struct PoKey {
    BitVec bits;
    Player turn;
    bool operator==(const PoKey& o) const { return turn == o.turn && bits == o.bits; }
};
struct PoKeyHash {
    std::size_t operator()(const PoKey& k) const {
        return k.bits.hash() * 2 + (k.turn == Player::Defender ? 1 : 0);
    }
};

}  // namespace

PoGame build_po_game(const AttackGraph& g, const std::map<int, double>& p,
                     const Smdp& defender, const ObservationSpec& observation,
                     const Scheduler& sched, std::vector<RewardStructure> rewards,
                     std::size_t state_cap) {
    PoGame po;
    po.graph = g;
    po.rule_probs = p;
    po.observation = observation;
    po.defender = defender;
    po.scheduler = sched;
    po.base_rewards = rewards;
    po.state_cap = state_cap;
    po.attacker = attacker_smdp(g, p);
    po.observable_vars = observable_variables(g, observation);

    for (const auto& name : defender.vars.names())
        if (po.attacker.vars.contains(name)) po.shared_vars.insert(name);

    for (const auto& a : po.attacker.actions)
        if (defender.actions.count(a))
            throw Error("build_po_game: action '" + a + "' belongs to both players");

    // game variables: attacker side (shared names suffixed) plus defender side
    std::set<std::string> names;
    auto attacker_side = [&](const std::string& v) {
        return po.shared_vars.count(v) ? v + kAttackerCopySuffix : v;
    };
    for (const auto& v : po.attacker.vars.names()) names.insert(attacker_side(v));
    for (const auto& v : defender.vars.names()) names.insert(v);

    StochasticGame& game = po.game;
    game.vars = VariableTable(names);
    game.attacker_actions = po.attacker.actions;
    game.defender_actions = defender.actions;
    game.rewards = std::move(rewards);

    Valuation init = Valuation::zeros(game.vars);
    for (std::size_t i = 0; i < po.attacker.vars.size(); ++i)
        init.bits.set(*game.vars.index(attacker_side(po.attacker.vars.name(i))),
                      po.attacker.init.bits.get(i));
    for (std::size_t i = 0; i < defender.vars.size(); ++i) {
        const std::string& v = defender.vars.name(i);
        bool dv = defender.init.bits.get(i);
        if (po.shared_vars.count(v) &&
            po.attacker.init.bits.get(*po.attacker.vars.index(v)) != dv)
            throw Error("build_po_game: initial value of shared variable '" + v +
                        "' disagrees between the players");
        init.bits.set(*game.vars.index(v), dv);
    }

    std::unordered_map<PoKey, std::size_t, PoKeyHash> index;
    auto intern = [&](const Valuation& v, Player t) -> std::pair<std::size_t, bool> {
        PoKey key{v.bits, t};
        auto it = index.find(key);
        if (it != index.end()) return {it->second, false};
        std::size_t id = game.state_vals.size();
        if (id >= state_cap)
            throw Error("build_po_game: state cap of " + std::to_string(state_cap) +
                        " exceeded");
        index[key] = id;
        game.state_vals.push_back(v);
        game.state_turn.push_back(t);
        game.state_blocked.push_back(false);
        game.trans.emplace_back();
        return {id, true};
    };

    game.init = intern(init, sched.initial).first;
    std::deque<std::size_t> frontier{game.init};
    bool used_idle_a = false, used_idle_d = false;

    while (!frontier.empty()) {
        std::size_t s = frontier.front();
        frontier.pop_front();
        const Player turn = game.state_turn[s];
        const Smdp& active = turn == Player::Attacker ? po.attacker : defender;
        const bool is_defender = turn == Player::Defender;

        // the attacker reads the true state (its own copies); the defender
        // reads only its observation
        auto lookup = [&](const std::string& name) {
            std::string resolved = is_defender ? name : attacker_side(name);
            return game.state_vals[s].bits.get(*game.vars.index(resolved));
        };

        bool any = false;
        for (const auto& t : active.transitions) {
            if (!t.guard.eval(lookup)) continue;
            any = true;
            Player next_turn = sched.next(turn, t.action);
            std::vector<std::pair<std::size_t, double>> row;
            std::vector<std::pair<Valuation, double>> dist;
            for (const auto& b : t.branches) {
                Update eff = up(b.update, t.action, po.shared_vars, observation, is_defender);
                Valuation succ = game.state_vals[s];
                for (const auto& [var, value] : eff.assign)
                    succ.bits.set(*game.vars.index(var), value);
                bool merged = false;
                for (auto& [sv, pr] : dist)
                    if (sv == succ) {
                        pr += b.prob;
                        merged = true;
                        break;
                    }
                if (!merged) dist.push_back({std::move(succ), b.prob});
            }
            for (auto& [sv, pr] : dist) {
                auto [id, is_new] = intern(sv, next_turn);
                if (is_new) frontier.push_back(id);
                row.push_back({id, pr});
            }
            game.trans[s].push_back({t.action, std::move(row)});
        }
        if (!any) {
            const std::string& idle = turn == Player::Attacker ? kIdleAttacker : kIdleDefender;
            (turn == Player::Attacker ? used_idle_a : used_idle_d) = true;
            if (turn == Player::Attacker) game.state_blocked[s] = true;
            auto [id, is_new] = intern(game.state_vals[s], sched.next(turn, idle));
            if (is_new) frontier.push_back(id);
            game.trans[s].push_back({idle, {{id, 1.0}}});
        }
    }
    if (used_idle_a) game.attacker_actions.insert(kIdleAttacker);
    if (used_idle_d) game.defender_actions.insert(kIdleDefender);
    return po;
}

Observation obs(const PoGame& po, std::size_t state) {
    Observation out;
    out.turn = po.game.turn(state);
    for (const auto& v : po.defender.vars.names())
        out.vars[v] = po.game.state_vals[state].bits.get(*po.game.vars.index(v));
    return out;
}

bool odt_check(const PoGame& po) {
    for (const auto& v : po.shared_vars)
        if (!po.observable_vars.count(v)) return false;
    return true;
}

bool classify_objective(const FormulaPtr& f, const std::set<std::string>& observable_vars,
                        const std::set<std::string>& defender_vars) {
    switch (f->kind) {
        case RpatlFormula::Kind::True:
            return true;
        case RpatlFormula::Kind::Atom:
            return f->atom == kAttackerBlockedLabel || observable_vars.count(f->atom) > 0 ||
                   defender_vars.count(f->atom) > 0;
        case RpatlFormula::Kind::Not:
            return classify_objective(f->left, observable_vars, defender_vars);
        case RpatlFormula::Kind::And:
            return classify_objective(f->left, observable_vars, defender_vars) &&
                   classify_objective(f->right, observable_vars, defender_vars);
        case RpatlFormula::Kind::ProbQuery:
        case RpatlFormula::Kind::RewardQuery: {
            for (Player p : f->coalition.players)
                if (p != Player::Defender) return false;
            const PathFormula& path = *f->path;
            if (path.op == PathOp::Next || path.op == PathOp::BoundedUntil) return false;
            if (path.left && !classify_objective(path.left, observable_vars, defender_vars))
                return false;
            return classify_objective(path.right, observable_vars, defender_vars);
        }
    }
    return false;
}

std::string TransformReport::to_json() const {
    ordered_json doc;
    doc["dop_counts"] = ordered_json::object();
    for (const auto& [rule, count] : dop_counts) doc["dop_counts"][rule] = count;
    doc["warnings"] = warnings;
    doc["po_states"] = po_states;
    doc["po_transitions"] = po_transitions;
    doc["perfect_states"] = perfect_states;
    doc["perfect_transitions"] = perfect_transitions;
    return doc.dump(2) + "\n";
}

StochasticGame transform(const PoGame& po, TransformReport* report) {
    if (!odt_check(po))
        throw Error("transform: game is not ODT (a defense trigger is unobservable)");
    ObservableAttacker oa =
        observable_attacker(po.graph, po.observation, po.rule_probs, po.base_rewards);

    // scheduler projection: both scheduler kinds depend only on the acting
    // player and the action type, which act(dop) labels preserve
    StochasticGame out = compose(expand(oa.smdp, po.state_cap), expand(po.defender, po.state_cap),
                                 po.scheduler, oa.rewards, po.state_cap);
    if (report) {
        const auto labels = rule_action_labels(po.graph);
        for (const auto& [r, label] : labels)
            if (po.observation.is_observable(label)) report->dop_counts[label] = 0;
        for (const auto& [action, dop] : oa.action_dops)
            report->dop_counts[labels.at(dop.path_rules.back())]++;
        report->warnings = oa.warnings;
        report->po_states = po.game.state_count();
        report->po_transitions = po.game.transition_count();
        report->perfect_states = out.state_count();
        report->perfect_transitions = out.transition_count();
    }
    return out;
}

}  // namespace posecgame
