#include "posecgame/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace posecgame {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Weak moves and bisimulation
// ---------------------------------------------------------------------------

namespace {

bool is_weak_final_edge(const StochasticGame& game, const ObservationSpec& obs,
                        const std::string& action) {
    if (game.defender_actions.count(action)) return true;
    return obs.is_observable(action);
}

bool is_tau_edge(const StochasticGame& game, const ObservationSpec& obs,
                 const std::string& action) {
    return game.attacker_actions.count(action) > 0 && !obs.is_observable(action);
}

}  // namespace

WeakMoves weak_closure(const StochasticGame& game, const ObservationSpec& observation) {
    const std::size_t n = game.state_count();
    WeakMoves out;
    out.targets.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        // tau closure: reflexive-transitive over unobservable attacker edges
        std::vector<std::size_t> closure{s};
        std::unordered_set<std::size_t> seen{s};
        std::deque<std::size_t> work{s};
        while (!work.empty()) {
            std::size_t cur = work.front();
            work.pop_front();
            for (const auto& [action, dist] : game.trans[cur]) {
                if (!is_tau_edge(game, observation, action)) continue;
                for (const auto& [succ, p] : dist) {
                    if (p > 0.0 && seen.insert(succ).second) {
                        closure.push_back(succ);
                        work.push_back(succ);
                    }
                }
            }
        }
        // one observable or defender edge completes the weak move
        std::unordered_set<std::size_t> targets;
        for (std::size_t cur : closure) {
            for (const auto& [action, dist] : game.trans[cur]) {
                if (!is_weak_final_edge(game, observation, action)) continue;
                for (const auto& [succ, p] : dist)
                    if (p > 0.0) targets.insert(succ);
            }
        }
        out.targets[s].assign(targets.begin(), targets.end());
        std::sort(out.targets[s].begin(), out.targets[s].end());
    }
    return out;
}

namespace {

struct PairHash {
    std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const {
        return p.first * 1000003 + p.second;
    }
};

std::vector<std::pair<std::size_t, std::size_t>> common_var_indices(
    const StochasticGame& a, const StochasticGame& b) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < a.vars.size(); ++i) {
        auto j = b.vars.index(a.vars.name(i));
        if (j) out.push_back({i, *j});
    }
    return out;
}

}  // namespace

BisimResult check_weak_bisim(const StochasticGame& g, const ObservationSpec& obs_g,
                             const StochasticGame& g2, const ObservationSpec& obs_g2,
                             const Relation& r) {
    BisimResult result;
    std::unordered_set<std::pair<std::size_t, std::size_t>, PairHash> pairs(r.pairs.begin(),
                                                                            r.pairs.end());
    if (!pairs.count({g.init, g2.init})) {
        result.holds = false;
        result.counterexample =
            BisimCounterexample{g.init, g2.init, 0, true, "initial states not related"};
        return result;
    }
    const auto common = common_var_indices(g, g2);
    const WeakMoves moves_g = weak_closure(g, obs_g);
    const WeakMoves moves_g2 = weak_closure(g2, obs_g2);

    for (const auto& [a, b] : r.pairs) {
        for (const auto& [ia, ib] : common) {
            if (g.state_vals[a].bits.get(ia) != g2.state_vals[b].bits.get(ib)) {
                result.holds = false;
                result.counterexample = BisimCounterexample{
                    a, b, 0, true,
                    "related states disagree on variable '" + g.vars.name(ia) + "'"};
                return result;
            }
        }
        if (g.turn(a) != g2.turn(b)) {
            result.holds = false;
            result.counterexample =
                BisimCounterexample{a, b, 0, true, "related states disagree on the turn"};
            return result;
        }
        for (std::size_t t : moves_g.targets[a]) {
            bool matched = false;
            for (std::size_t t2 : moves_g2.targets[b])
                if (pairs.count({t, t2})) {
                    matched = true;
                    break;
                }
            if (!matched) {
                result.holds = false;
                result.counterexample = BisimCounterexample{
                    a, b, t, true, "weak move has no matching move in the second game"};
                return result;
            }
        }
        for (std::size_t t2 : moves_g2.targets[b]) {
            bool matched = false;
            for (std::size_t t : moves_g.targets[a])
                if (pairs.count({t, t2})) {
                    matched = true;
                    break;
                }
            if (!matched) {
                result.holds = false;
                result.counterexample = BisimCounterexample{
                    a, b, t2, false, "weak move has no matching move in the first game"};
                return result;
            }
        }
    }
    return result;
}

namespace {

BitVec project_key(const StochasticGame& game, std::size_t s,
                   const std::vector<std::size_t>& indices, Player turn) {
    BitVec key(indices.size() + 1);
    for (std::size_t i = 0; i < indices.size(); ++i)
        key.set(i, game.state_vals[s].bits.get(indices[i]));
    key.set(indices.size(), turn == Player::Defender);
    return key;
}

}  // namespace

Relation candidate_relation(const PoGame& po, const StochasticGame& transformed) {
    // shared projection: attacker-local observable variables, defender
    // variables and the turn; these are exactly the common variable names
    std::vector<std::string> names;
    for (const auto& n : po.game.vars.names())
        if (transformed.vars.contains(n)) names.push_back(n);

    std::vector<std::size_t> idx_po, idx_tr;
    for (const auto& n : names) {
        idx_po.push_back(*po.game.vars.index(n));
        idx_tr.push_back(*transformed.vars.index(n));
    }

    std::unordered_map<BitVec, std::vector<std::size_t>, BitVecHash> by_key;
    for (std::size_t s = 0; s < transformed.state_count(); ++s)
        by_key[project_key(transformed, s, idx_tr, transformed.turn(s))].push_back(s);

    Relation r;
    for (std::size_t s = 0; s < po.game.state_count(); ++s) {
        auto it = by_key.find(project_key(po.game, s, idx_po, po.game.turn(s)));
        if (it == by_key.end()) continue;
        for (std::size_t s2 : it->second) r.pairs.push_back({s, s2});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Dual model checking and strategy lifting
// ---------------------------------------------------------------------------

std::string AgreementReport::to_json() const {
    ordered_json doc;
    doc["tolerance"] = tolerance;
    doc["all_pass"] = all_pass;
    doc["formulas"] = ordered_json::array();
    for (const auto& f : formulas) {
        ordered_json jf;
        jf["formula"] = f.formula;
        if (f.skipped) {
            jf["skipped"] = true;
            jf["reason"] = f.skip_reason;
        } else {
            jf["value_po"] = f.value_po;
            jf["value_perfect"] = f.value_perfect;
            jf["delta"] = f.delta;
            jf["pass"] = f.pass;
        }
        doc["formulas"].push_back(std::move(jf));
    }
    return doc.dump(2) + "\n";
}

namespace {

bool is_numeric_query(const FormulaPtr& f) {
    return (f->kind == RpatlFormula::Kind::ProbQuery ||
            f->kind == RpatlFormula::Kind::RewardQuery) &&
           f->numeric;
}

double query_value(const StochasticGame& game, const FormulaPtr& f,
                   const ValueIterationSettings& settings) {
    CheckResult r = check(game, f, settings);
    if (is_numeric_query(f)) return r.values[game.init];
    return r.sat[game.init] ? 1.0 : 0.0;
}

double agreement_delta(double a, double b) {
    if (std::isinf(a) && std::isinf(b)) return 0.0;
    if (std::isinf(a) || std::isinf(b)) return kInfValue;
    return std::abs(a - b);
}

}  // namespace

AgreementReport dual_check(const PoGame& po, const StochasticGame& transformed,
                           const std::vector<std::string>& formulas,
                           const ValueIterationSettings& settings, double tolerance) {
    AgreementReport report;
    report.tolerance = tolerance;
    std::set<std::string> defender_vars(po.defender.vars.names().begin(),
                                        po.defender.vars.names().end());
    for (const auto& text : formulas) {
        FormulaAgreement fa;
        fa.formula = text;
        FormulaPtr f = parse_rpatl(text);
        if (!classify_objective(f, po.observable_vars, defender_vars)) {
            fa.skipped = true;
            fa.skip_reason = "outside the observable step-unbounded defense fragment";
            report.formulas.push_back(std::move(fa));
            continue;
        }
        fa.value_po = query_value(po.game, f, settings);
        fa.value_perfect = query_value(transformed, f, settings);
        fa.delta = agreement_delta(fa.value_po, fa.value_perfect);
        fa.pass = fa.delta <= tolerance;
        if (!fa.pass) report.all_pass = false;
        report.formulas.push_back(std::move(fa));
    }
    return report;
}

AgreementReport strategy_equiv(const PoGame& po, const StochasticGame& transformed,
                               const std::string& objective,
                               const ValueIterationSettings& settings, double tolerance) {
    AgreementReport report;
    report.tolerance = tolerance;
    FormulaPtr f = parse_rpatl(objective);
    Strategy synthesized = synthesize(transformed, f, settings);

    // the common projection determines a transformed state completely, so
    // the lift maps each PO defender state to its unique related state
    std::vector<std::string> names;
    for (const auto& n : po.game.vars.names())
        if (transformed.vars.contains(n)) names.push_back(n);
    std::vector<std::size_t> idx_po, idx_tr;
    for (const auto& n : names) {
        idx_po.push_back(*po.game.vars.index(n));
        idx_tr.push_back(*transformed.vars.index(n));
    }
    std::unordered_map<BitVec, std::size_t, BitVecHash> tr_by_key;
    for (std::size_t s = 0; s < transformed.state_count(); ++s)
        tr_by_key[project_key(transformed, s, idx_tr, transformed.turn(s))] = s;

    Strategy lifted;
    lifted.objective = objective;
    for (std::size_t s = 0; s < po.game.state_count(); ++s) {
        if (po.game.turn(s) != Player::Defender) continue;
        auto it = tr_by_key.find(project_key(po.game, s, idx_po, Player::Defender));
        if (it == tr_by_key.end())
            throw Error("strategy_equiv: lift undefined for a PO defender state "
                        "(game is not ODT)");
        auto cit = synthesized.choice.find(it->second);
        if (cit == synthesized.choice.end())
            throw Error("strategy_equiv: synthesized strategy misses a defender state");
        lifted.choice[s] = cit->second;
    }

    StochasticGame induced = apply_strategy(po.game, lifted);
    CheckResult recheck = check(induced, f, settings);

    FormulaAgreement fa;
    fa.formula = objective;
    fa.value_perfect = synthesized.value;
    fa.value_po = recheck.values[induced.init];
    fa.delta = agreement_delta(fa.value_po, fa.value_perfect);
    fa.pass = fa.delta <= tolerance;
    report.all_pass = fa.pass;
    report.formulas.push_back(std::move(fa));
    return report;
}

// ---------------------------------------------------------------------------
// Monte-Carlo simulation
// ---------------------------------------------------------------------------

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

MonteCarloResult monte_carlo(const StochasticGame& game, const Strategy& defender,
                             AttackerPolicy attacker_policy, const std::string& target,
                             std::size_t runs, std::size_t horizon, uint64_t seed,
                             const FormulaPtr& objective_for_opt,
                             const ValueIterationSettings& settings) {
    if (runs < 1) throw Error("monte_carlo: runs must be >= 1");
    if (!game.known_atom(target)) throw Error("monte_carlo: unknown target '" + target + "'");

    std::map<std::size_t, std::string> opt_profile;
    if (attacker_policy == AttackerPolicy::SynthesizedOpt) {
        if (!objective_for_opt)
            throw Error("monte_carlo: synthesized-opt attacker needs an objective");
        opt_profile = synthesize_profile(game, objective_for_opt, settings);
    }

    std::size_t hits = 0;
    for (std::size_t episode = 0; episode < runs; ++episode) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(episode + 1)));
        std::size_t s = game.init;
        for (std::size_t step = 0; step <= horizon; ++step) {
            if (game.label_true(s, target)) {
                ++hits;
                break;
            }
            if (step == horizon) break;
            const auto& row = game.trans[s];
            if (row.empty()) break;
            const std::string* action = nullptr;
            if (game.turn(s) == Player::Defender) {
                auto it = defender.choice.find(s);
                if (it == defender.choice.end())
                    throw Error("monte_carlo: defender strategy not total");
                action = &it->second;
            } else if (attacker_policy == AttackerPolicy::SynthesizedOpt) {
                action = &opt_profile.at(s);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, row.size() - 1);
                action = &row[pick(rng)].first;
            }
            const std::vector<std::pair<std::size_t, double>>* dist = nullptr;
            for (const auto& [a, d] : row)
                if (a == *action) {
                    dist = &d;
                    break;
                }
            if (!dist) throw Error("monte_carlo: chosen action '" + *action + "' not enabled");
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double x = u(rng), acc = 0.0;
            std::size_t succ = dist->back().first;
            for (const auto& [t, p] : *dist) {
                acc += p;
                if (x < acc) {
                    succ = t;
                    break;
                }
            }
            s = succ;
        }
    }

    MonteCarloResult result;
    result.runs = runs;
    result.hits = hits;
    result.estimate = static_cast<double>(hits) / static_cast<double>(runs);
    const double z = 1.959963984540054;  // 95%
    double n = static_cast<double>(runs), ph = result.estimate;
    double denom = 1.0 + z * z / n;
    double center = (ph + z * z / (2 * n)) / denom;
    double half = z * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom;
    result.ci_low = std::max(0.0, center - half);
    result.ci_high = std::min(1.0, center + half);
    return result;
}

// ---------------------------------------------------------------------------
// Random ODT instance generation
// ---------------------------------------------------------------------------

namespace {

struct GenRule {
    std::string label;
    std::vector<int> prereqs;
    int consequence = 0;
    double prob = 0.8;
    double attack_cost = 1.0;
    double damage = 1.0;
};

}  // namespace

OdtInstance generate_odt_instance(uint64_t seed, const GeneratorOptions& opts) {
    for (uint64_t attempt = 0;; ++attempt) {
        uint64_t derived_seed = splitmix64(seed + attempt * 0x632BE59BD9B4E019ULL);
        std::mt19937_64 rng(derived_seed);
        auto rand_int = [&](int lo, int hi) {
            return std::uniform_int_distribution<int>(lo, hi)(rng);
        };
        auto rand_prob = [&](double lo, double hi) {
            return std::uniform_real_distribution<double>(lo, hi)(rng);
        };

        const int layers = rand_int(opts.min_layers, opts.max_layers);
        const int n_conditions = rand_int(3, 6);

        // node ids: 1..n, conditions first, then derived per layer, rules last
        int next_id = 0;
        std::vector<int> conditions;
        std::map<int, std::string> label_of;
        std::map<int, int> layer_of;
        for (int i = 0; i < n_conditions; ++i) {
            int id = ++next_id;
            conditions.push_back(id);
            label_of[id] = "c" + std::to_string(i);
            layer_of[id] = 0;
        }
        std::vector<int> derived;
        std::vector<int> goal_candidates;
        for (int l = 1; l < layers; ++l) {
            int count = l == layers - 1 ? 1 : rand_int(1, 3);
            for (int i = 0; i < count; ++i) {
                int id = ++next_id;
                derived.push_back(id);
                label_of[id] = l == layers - 1
                                   ? "goal"
                                   : "d" + std::to_string(l) + "_" + std::to_string(i);
                layer_of[id] = l;
                if (l == layers - 1) goal_candidates.push_back(id);
            }
        }
        const int goal = goal_candidates.front();

        std::vector<GenRule> rules;
        std::map<int, std::vector<std::size_t>> deriving;  // derived id -> rule indices
        int rule_counter = 0;
        for (int d : derived) {
            int n_rules = rand_int(1, 2);
            for (int k = 0; k < n_rules; ++k) {
                GenRule r;
                r.label = "step" + std::to_string(rule_counter++);
                r.consequence = d;
                // at least one prerequisite from the previous layer
                std::vector<int> lower, prev;
                for (int c : conditions)
                    if (layer_of[c] < layer_of[d]) lower.push_back(c);
                for (int d2 : derived)
                    if (layer_of[d2] < layer_of[d]) lower.push_back(d2);
                for (int cand : lower)
                    if (layer_of[cand] == layer_of[d] - 1) prev.push_back(cand);
                if (prev.empty()) prev = lower;
                std::set<int> picked{prev[static_cast<std::size_t>(
                    rand_int(0, static_cast<int>(prev.size()) - 1))]};
                int extra = rand_int(0, opts.max_fanin - 1);
                for (int e = 0; e < extra && picked.size() < lower.size(); ++e)
                    picked.insert(lower[static_cast<std::size_t>(
                        rand_int(0, static_cast<int>(lower.size()) - 1))]);
                r.prereqs.assign(picked.begin(), picked.end());
                r.prob = rand_prob(opts.min_prob, opts.max_prob);
                r.attack_cost = rand_int(1, 10);
                r.damage = rand_int(0, 8);
                deriving[d].push_back(rules.size());
                rules.push_back(std::move(r));
            }
        }

        // backward slice from the goal so every node feeds a goal derivation
        std::set<int> keep_nodes{goal};
        std::set<std::size_t> keep_rules;
        std::deque<int> work{goal};
        while (!work.empty()) {
            int d = work.front();
            work.pop_front();
            for (std::size_t ri : deriving[d]) {
                if (!keep_rules.insert(ri).second) continue;
                for (int q : rules[ri].prereqs)
                    if (keep_nodes.insert(q).second &&
                        std::find(derived.begin(), derived.end(), q) != derived.end())
                        work.push_back(q);
            }
        }

        AttackGraph g;
        for (int c : conditions)
            if (keep_nodes.count(c))
                g.nodes.push_back(AttackGraphNode{c, NodeKind::Condition, label_of[c], 1.0});
        for (int d : derived)
            if (keep_nodes.count(d))
                g.nodes.push_back(AttackGraphNode{d, NodeKind::Derived, label_of[d], {}});
        std::map<std::size_t, int> rule_node_id;
        std::map<int, double> rule_probs;
        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            if (!keep_rules.count(ri)) continue;
            int id = ++next_id;
            rule_node_id[ri] = id;
            g.nodes.push_back(AttackGraphNode{id, NodeKind::Rule, rules[ri].label,
                                              rules[ri].prob});
            rule_probs[id] = rules[ri].prob;
            for (int q : rules[ri].prereqs) g.edges.push_back({q, id});
            g.edges.push_back({id, rules[ri].consequence});
        }
        g.goal = goal;
        g.sort_canonical();
        if (!validate_graph(g).empty()) continue;  // re-draw malformed shapes

        // hide derived variables bottom-up; a variable is hidable when all
        // of its rules depend only on conditions and already hidden variables
        std::set<int> hidden_vars;
        std::set<std::size_t> hidden_rules;
        for (int d : derived) {
            if (!keep_nodes.count(d) || d == goal) continue;
            bool eligible = true;
            for (std::size_t ri : deriving[d]) {
                if (!keep_rules.count(ri)) continue;
                for (int q : rules[ri].prereqs) {
                    bool is_condition =
                        std::find(conditions.begin(), conditions.end(), q) != conditions.end();
                    if (!is_condition && !hidden_vars.count(q)) eligible = false;
                }
            }
            if (eligible && rand_int(0, 1) == 0) {
                hidden_vars.insert(d);
                for (std::size_t ri : deriving[d])
                    if (keep_rules.count(ri)) hidden_rules.insert(ri);
            }
        }

        OdtInstance inst;
        inst.seed = derived_seed;
        inst.graph = g;
        inst.rule_probs = rule_probs;
        inst.goal_var = label_of[goal];
        for (std::size_t ri = 0; ri < rules.size(); ++ri)
            if (keep_rules.count(ri) && !hidden_rules.count(ri))
                inst.observation.observable_actions.insert(rules[ri].label);

        // defenses trigger on observable derived capabilities and revoke them
        std::vector<std::string> observable_derived;
        for (int d : derived)
            if (keep_nodes.count(d) && !hidden_vars.count(d))
                observable_derived.push_back(label_of[d]);
        std::sort(observable_derived.begin(), observable_derived.end());
        int n_defenses = observable_derived.empty() ? 0 : rand_int(1, opts.max_defenses);
        std::set<std::string> trigger_vars;
        for (int i = 0; i < n_defenses; ++i) {
            const std::string& var = observable_derived[static_cast<std::size_t>(
                rand_int(0, static_cast<int>(observable_derived.size()) - 1))];
            DefenseRule rule;
            rule.name = "defend" + std::to_string(i);
            bool one_shot = rand_int(0, 1) == 1;
            std::string flag = "applied" + std::to_string(i);
            rule.guard = one_shot
                             ? BoolExpr::conj(BoolExpr::var(var),
                                              BoolExpr::negate(BoolExpr::var(flag)))
                             : BoolExpr::var(var);
            double q = rand_prob(0.6, 0.95);
            UpdateBranch success;
            success.update.assign[var] = false;
            if (one_shot) success.update.assign[flag] = true;
            success.prob = q;
            rule.updates.push_back(std::move(success));
            if (q < 1.0) rule.updates.push_back({Update{}, 1.0 - q});
            rule.cost = rand_int(5, 50);
            trigger_vars.insert(var);
            inst.defenses.rules.push_back(std::move(rule));
        }

        Smdp attacker = attacker_smdp(inst.graph, inst.rule_probs);
        inst.defender = defender_smdp(inst.defenses, attacker, trigger_vars);

        RewardStructure acosts{"aCosts", {}};
        RewardStructure dcosts = defense_costs(inst.defenses);
        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            if (!keep_rules.count(ri)) continue;
            acosts.rewards[rules[ri].label] = rules[ri].attack_cost;
            if (rules[ri].damage > 0) dcosts.rewards[rules[ri].label] += rules[ri].damage;
        }
        inst.rewards = {acosts, dcosts};

        // trigger-set scheduler over observable action types
        std::vector<std::string> observable_sorted(inst.observation.observable_actions.begin(),
                                                   inst.observation.observable_actions.end());
        int n_triggers = rand_int(1, std::min<int>(3, static_cast<int>(observable_sorted.size())));
        std::set<std::string> sched_triggers;
        while (static_cast<int>(sched_triggers.size()) < n_triggers)
            sched_triggers.insert(observable_sorted[static_cast<std::size_t>(
                rand_int(0, static_cast<int>(observable_sorted.size()) - 1))]);
        inst.scheduler = Scheduler::trigger_set(sched_triggers);

        // keep instances below the state cap (deterministic re-draw otherwise)
        try {
            PoGame po = build_po_game(inst.graph, inst.rule_probs, inst.defender,
                                      inst.observation, inst.scheduler, inst.rewards,
                                      opts.state_cap);
            (void)transform(po);
        } catch (const Error&) {
            continue;
        }
        return inst;
    }
}

// ---------------------------------------------------------------------------
// Soundness harness
// ---------------------------------------------------------------------------

std::string SoundnessReport::to_json() const {
    ordered_json doc;
    doc["instances"] = instances;
    doc["dual_failures"] = dual_failures;
    doc["bisim_failures"] = bisim_failures;
    doc["strategy_failures"] = strategy_failures;
    doc["all_pass"] = all_pass();
    doc["details"] = details;
    return doc.dump(2) + "\n";
}

SoundnessReport verify_soundness(std::size_t instances, uint64_t seed,
                                 const GeneratorOptions& opts,
                                 const ValueIterationSettings& settings) {
    SoundnessReport report;
    report.instances = instances;
    std::vector<std::string> details(instances);
    std::vector<int> dual_fail(instances, 0), bisim_fail(instances, 0),
        strat_fail(instances, 0);

    auto run_one = [&](std::size_t i) {
        std::ostringstream log;
        try {
            OdtInstance inst = generate_odt_instance(seed + i, opts);
            PoGame po = build_po_game(inst.graph, inst.rule_probs, inst.defender,
                                      inst.observation, inst.scheduler, inst.rewards,
                                      opts.state_cap);
            StochasticGame perfect = transform(po);

            // probability-objective shapes; accumulated rewards are weighted
            // step counts and step-dependent values are not preserved by the
            // aggregation (see the reward-divergence unit test)
            std::vector<std::string> formulas = {
                "<<def>> Pmax=? [ F \"" + inst.goal_var + "\" ]",
                "<<def>> Pmin=? [ F \"" + inst.goal_var + "\" ]",
                "<<def>> P>=0.3 [ true U \"" + inst.goal_var + "\" ]",
                "<<def>> Pmin=? [ !\"" + inst.goal_var + "\" U \"" + inst.goal_var + "\" ]",
            };
            AgreementReport dual = dual_check(po, perfect, formulas, settings);
            if (!dual.all_pass) {
                dual_fail[i] = 1;
                for (const auto& f : dual.formulas)
                    if (!f.skipped && !f.pass)
                        log << "instance " << i << ": dual check failed on " << f.formula
                            << " (delta " << f.delta << "); ";
            }

            Relation r = candidate_relation(po, perfect);
            BisimResult bisim =
                check_weak_bisim(po.game, po.observation, perfect, po.observation, r);
            if (!bisim.holds) {
                bisim_fail[i] = 1;
                log << "instance " << i << ": weak bisimulation failed ("
                    << (bisim.counterexample ? bisim.counterexample->reason : "?") << "); ";
            }

            AgreementReport strat = strategy_equiv(
                po, perfect, "<<def>> Pmin=? [ F \"" + inst.goal_var + "\" ]", settings);
            if (!strat.all_pass) {
                strat_fail[i] = 1;
                log << "instance " << i << ": lifted strategy value delta "
                    << strat.formulas.front().delta << "; ";
            }
        } catch (const std::exception& e) {
            dual_fail[i] = bisim_fail[i] = strat_fail[i] = 1;
            log << "instance " << i << ": exception: " << e.what();
        }
        details[i] = log.str();
    };

    const unsigned workers = std::min<unsigned>(worker_count(),
                                                static_cast<unsigned>(std::max<std::size_t>(
                                                    instances, 1)));
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= instances) return;
                run_one(i);
            }
        });
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < instances; ++i) {
        report.dual_failures += dual_fail[i];
        report.bisim_failures += bisim_fail[i];
        report.strategy_failures += strat_fail[i];
        if (!details[i].empty()) report.details.push_back(details[i]);
    }
    return report;
}

}  // namespace posecgame
