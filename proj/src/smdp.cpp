#include "posecgame/smdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace posecgame {

using nlohmann::json;

VariableTable::VariableTable(std::set<std::string> names)
    : names_(names.begin(), names.end()) {
    for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = i;
}

std::optional<std::size_t> VariableTable::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, bool> valuation_to_map(const VariableTable& vars, const Valuation& v) {
    std::map<std::string, bool> out;
    for (std::size_t i = 0; i < vars.size(); ++i) out[vars.name(i)] = v.bits.get(i);
    return out;
}

Valuation valuation_from_map(const VariableTable& vars, const std::map<std::string, bool>& m) {
    Valuation v = Valuation::zeros(vars);
    for (const auto& [name, value] : m) {
        auto idx = vars.index(name);
        if (!idx) throw Error("valuation assigns undeclared variable '" + name + "'");
        v.bits.set(*idx, value);
    }
    return v;
}

std::string Update::str() const {
    if (assign.empty()) return "{}";
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : assign) {
        if (!first) out += ", ";
        first = false;
        out += k + (v ? "=true" : "=false");
    }
    return out + "}";
}

void Smdp::validate() const {
    if (init.bits.size() != vars.size()) throw Error("smdp: init does not cover the variables");
    for (const auto& t : transitions) {
        if (!actions.count(t.action))
            throw Error("smdp: transition action '" + t.action + "' not declared");
        for (const auto& v : t.guard.vars())
            if (!vars.contains(v))
                throw Error("smdp: guard references undeclared variable '" + v + "'");
        double total = 0.0;
        for (const auto& b : t.branches) {
            if (!(b.prob > 0.0) || b.prob > 1.0)
                throw Error("smdp: branch probability " + std::to_string(b.prob) +
                            " outside (0,1] on action '" + t.action + "'");
            for (const auto& [v, val] : b.update.assign)
                if (!vars.contains(v))
                    throw Error("smdp: update assigns undeclared variable '" + v + "'");
            total += b.prob;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw Error("smdp: branch probabilities of action '" + t.action + "' sum to " +
                        std::to_string(total));
    }
}

namespace {

void sort_transitions(std::vector<SymbolicTransition>& ts) {
    std::stable_sort(ts.begin(), ts.end(),
                     [](const SymbolicTransition& a, const SymbolicTransition& b) {
                         return a.action < b.action;
                     });
}

}  // namespace

std::map<int, std::string> rule_action_labels(const AttackGraph& g) {
    std::map<std::string, int> label_uses;
    for (int r : g.rule_nodes()) label_uses[g.node(r).label]++;
    std::map<int, std::string> out;
    for (int r : g.rule_nodes()) {
        const std::string& label = g.node(r).label;
        out[r] = label_uses[label] > 1 ? label + "#" + std::to_string(r) : label;
    }
    return out;
}

Smdp attacker_smdp(const AttackGraph& g, const std::map<int, double>& p) {
    Smdp m;
    std::set<std::string> names;
    std::set<std::string> derived_names;
    std::map<int, std::string> var_of;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::Rule) continue;
        var_of[n.id] = n.label;
        names.insert(n.label);
        if (n.kind == NodeKind::Derived) derived_names.insert(n.label);
    }
    m.vars = VariableTable(names);
    m.init = Valuation::zeros(m.vars);
    // condition capabilities hold initially, derived ones do not
    for (const auto& name : names)
        if (!derived_names.count(name)) m.init.bits.set(*m.vars.index(name), true);

    const auto labels = rule_action_labels(g);
    for (int r : g.rule_nodes()) {
        auto pit = p.find(r);
        if (pit == p.end())
            throw Error("attacker_smdp: rule node " + std::to_string(r) +
                        " has no success probability");
        double prob = pit->second;
        if (prob < 0.0 || prob > 1.0)
            throw Error("attacker_smdp: probability for rule " + std::to_string(r) +
                        " out of [0,1]");
        auto succ = g.successors(r);
        if (succ.size() != 1)
            throw Error("attacker_smdp: rule node " + std::to_string(r) + " has " +
                        std::to_string(succ.size()) + " successors");
        const std::string& consequence = var_of.at(succ.front());

        std::vector<std::string> pos;
        for (int q : g.predecessors(r)) pos.push_back(var_of.at(q));
        std::sort(pos.begin(), pos.end());
        pos.erase(std::unique(pos.begin(), pos.end()), pos.end());

        SymbolicTransition t;
        t.guard = BoolExpr::literal_conjunction(pos, {consequence});
        t.action = labels.at(r);
        if (prob > 0.0) t.branches.push_back({Update{{{consequence, true}}}, prob});
        if (prob < 1.0) t.branches.push_back({Update{}, 1.0 - prob});
        m.actions.insert(t.action);
        m.transitions.push_back(std::move(t));
    }
    sort_transitions(m.transitions);
    m.validate();
    return m;
}

DefenseSpec parse_defense_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid defense JSON: ") + e.what(), 1, 1);
    }
    if (!doc.is_array()) throw ParseError("defense spec must be a JSON array", 1, 1);
    DefenseSpec spec;
    std::set<std::string> names;
    for (const auto& jr : doc) {
        DefenseRule rule;
        try {
            rule.name = jr.at("name").get<std::string>();
            rule.guard = parse_bool_expr(jr.at("guard").get<std::string>());
            for (const auto& ju : jr.at("updates")) {
                UpdateBranch b;
                for (const auto& [var, val] : ju.at("assign").items())
                    b.update.assign[var] = val.get<bool>();
                b.prob = ju.at("prob").get<double>();
                rule.updates.push_back(std::move(b));
            }
            rule.cost = jr.value("cost", 0.0);
        } catch (const json::exception& e) {
            throw ParseError(std::string("defense rule: ") + e.what(), 1, 1);
        }
        if (rule.cost < 0.0)
            throw ParseError("defense '" + rule.name + "': cost must be nonnegative", 1, 1);
        double total = 0.0;
        for (const auto& b : rule.updates) {
            if (!(b.prob > 0.0) || b.prob > 1.0)
                throw ParseError("defense '" + rule.name + "': branch probability out of (0,1]",
                                 1, 1);
            total += b.prob;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ParseError("defense '" + rule.name + "': branch probabilities sum to " +
                                 std::to_string(total) + ", expected 1",
                             1, 1);
        if (!names.insert(rule.name).second)
            throw ParseError("duplicate defense name '" + rule.name + "'", 1, 1);
        spec.rules.push_back(std::move(rule));
    }
    return spec;
}

Smdp defender_smdp(const DefenseSpec& spec, const Smdp& attacker,
                   const std::set<std::string>& triggers) {
    for (const auto& v : triggers)
        if (!attacker.vars.contains(v))
            throw Error("defender_smdp: trigger variable '" + v +
                        "' is not an attacker variable");

    std::set<std::string> names = triggers;
    for (const auto& rule : spec.rules) {
        for (const auto& v : rule.guard.vars()) names.insert(v);
        for (const auto& b : rule.updates)
            for (const auto& [v, val] : b.update.assign) names.insert(v);
        if (attacker.actions.count(rule.name))
            throw Error("defender_smdp: action label '" + rule.name +
                        "' collides with an attacker action");
    }
    // shared variables must be attacker variables; the rest are internal
    std::set<std::string> shared;
    for (const auto& v : names)
        if (attacker.vars.contains(v)) shared.insert(v);
    for (const auto& v : triggers)
        if (!shared.count(v))
            throw Error("defender_smdp: trigger '" + v + "' dropped");

    Smdp m;
    m.vars = VariableTable(names);
    m.init = Valuation::zeros(m.vars);
    // initial valuation agrees with the attacker on shared variables,
    // internal variables start false
    for (const auto& v : shared)
        m.init.bits.set(*m.vars.index(v), attacker.init.bits.get(*attacker.vars.index(v)));

    for (const auto& rule : spec.rules) {
        SymbolicTransition t;
        t.guard = rule.guard;
        t.action = rule.name;
        t.branches = rule.updates;
        m.actions.insert(t.action);
        m.transitions.push_back(std::move(t));
    }
    sort_transitions(m.transitions);
    m.validate();
    return m;
}

RewardStructure defense_costs(const DefenseSpec& spec) {
    RewardStructure r;
    r.name = "dCosts";
    for (const auto& rule : spec.rules) r.rewards[rule.name] = rule.cost;
    return r;
}

std::size_t Mdp::transition_count() const {
    std::size_t n = 0;
    for (const auto& row : trans) n += row.size();
    return n;
}

std::vector<std::pair<std::string, std::vector<std::pair<Valuation, double>>>>
Mdp::moves(const Valuation& v) const {
    std::vector<std::pair<std::string, std::vector<std::pair<Valuation, double>>>> out;
    auto lookup = [&](const std::string& name) {
        auto idx = vars.index(name);
        if (!idx) throw Error("guard references unknown variable '" + name + "'");
        return v.bits.get(*idx);
    };
    for (const auto& t : symbolic.transitions) {
        if (!t.guard.eval(lookup)) continue;
        std::vector<std::pair<Valuation, double>> dist;
        for (const auto& b : t.branches) {
            Valuation succ = v;
            for (const auto& [name, value] : b.update.assign)
                succ.bits.set(*vars.index(name), value);
            // merge branches that land on the same valuation
            bool merged = false;
            for (auto& [sv, p] : dist)
                if (sv == succ) {
                    p += b.prob;
                    merged = true;
                    break;
                }
            if (!merged) dist.push_back({std::move(succ), b.prob});
        }
        for (const auto& existing : out)
            if (existing.first == t.action)
                throw Error("mdp: two enabled transitions share action '" + t.action + "'");
        out.push_back({t.action, std::move(dist)});
    }
    return out;
}

Mdp expand(const Smdp& smdp, std::size_t state_cap) {
    smdp.validate();
    Mdp m;
    m.vars = smdp.vars;
    m.actions = smdp.actions;
    m.symbolic = smdp;

    std::unordered_map<BitVec, std::size_t, BitVecHash> index;
    m.states.push_back(smdp.init);
    index[smdp.init.bits] = 0;
    m.init = 0;
    m.trans.emplace_back();

    std::deque<std::size_t> frontier{0};
    while (!frontier.empty()) {
        std::size_t s = frontier.front();
        frontier.pop_front();
        Valuation v = m.states[s];
        for (auto& [action, dist] : m.moves(v)) {
            std::vector<std::pair<std::size_t, double>> row;
            for (auto& [succ, p] : dist) {
                auto it = index.find(succ.bits);
                std::size_t id;
                if (it == index.end()) {
                    id = m.states.size();
                    if (id >= state_cap)
                        throw Error("expand: state cap of " + std::to_string(state_cap) +
                                    " exceeded");
                    index[succ.bits] = id;
                    m.states.push_back(succ);
                    m.trans.emplace_back();
                    frontier.push_back(id);
                } else {
                    id = it->second;
                }
                row.push_back({id, p});
            }
            m.trans[s].push_back({action, std::move(row)});
        }
    }
    return m;
}

}  // namespace posecgame
