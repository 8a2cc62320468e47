#include "posecgame/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "posecgame/prism.hpp"
#include "posecgame/verify.hpp"

namespace posecgame {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

std::string resolve(const std::string& base, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
    return (fs::path(base) / path).string();
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_value(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_json(read_file(path), fs::path(path).parent_path().string());
}

PipelineConfig PipelineConfig::from_json(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid config JSON: ") + e.what(), 1, 1);
    }
    PipelineConfig c;
    c.base_dir = base_dir;
    try {
        c.model_path = doc.value("model", "");
        c.facts_path = doc.value("facts", "");
        c.goal = doc.value("goal", "");
        c.mulval_vertices = doc.value("mulval_vertices", "");
        c.mulval_arcs = doc.value("mulval_arcs", "");
        if (doc.contains("base_scores"))
            for (const auto& [k, v] : doc.at("base_scores").items())
                c.base_scores[k] = v.get<double>();
        if (doc.contains("fact_scores"))
            for (const auto& [k, v] : doc.at("fact_scores").items())
                c.fact_scores[k] = v.get<double>();
        c.defenses_path = doc.value("defenses", "");
        if (doc.contains("rewards"))
            for (const auto& [name, table] : doc.at("rewards").items())
                for (const auto& [action, value] : table.items())
                    c.rewards[name][action] = value.get<double>();
        if (doc.contains("triggers"))
            for (const auto& t : doc.at("triggers")) c.triggers.insert(t.get<std::string>());
        if (doc.contains("scheduler")) {
            const auto& js = doc.at("scheduler");
            std::string kind = js.value("kind", "strict-alternation");
            Player initial = js.value("initial", "A") == "D" ? Player::Defender
                                                             : Player::Attacker;
            if (kind == "strict-alternation") {
                c.scheduler = Scheduler::strict_alternation(initial);
            } else if (kind == "trigger-set") {
                std::set<std::string> triggers;
                for (const auto& t : js.at("triggers")) triggers.insert(t.get<std::string>());
                c.scheduler = Scheduler::trigger_set(std::move(triggers), initial);
            } else {
                throw Error("unknown scheduler kind '" + kind + "'");
            }
        }
        if (doc.contains("observation")) {
            ObservationSpec obs;
            for (const auto& a : doc.at("observation").at("observable_actions"))
                obs.observable_actions.insert(a.is_number_integer()
                                                  ? std::to_string(a.get<int>())
                                                  : a.get<std::string>());
            c.observation = std::move(obs);
        }
        if (doc.contains("formulas"))
            for (const auto& f : doc.at("formulas")) c.formulas.push_back(f.get<std::string>());
        c.epsilon = doc.value("epsilon", 1e-8);
        c.max_iters = doc.value("max_iters", std::size_t(1'000'000));
        c.state_cap = doc.value("state_cap", kDefaultStateCap);
        c.seed = doc.value("seed", uint64_t(0));
        c.export_prism = doc.value("export_prism", false);
        c.simulate_runs = doc.value("simulate_runs", std::size_t(0));
        c.simulate_horizon = doc.value("simulate_horizon", std::size_t(1024));
        c.simulate_target = doc.value("simulate_target", "");
    } catch (const json::exception& e) {
        throw ParseError(std::string("pipeline config: ") + e.what(), 1, 1);
    }

    bool has_model = !c.model_path.empty();
    bool has_mulval = !c.mulval_vertices.empty() || !c.mulval_arcs.empty();
    if (has_model == has_mulval)
        throw Error("config must reference exactly one of {model, mulval import}");
    if (has_mulval && (c.mulval_vertices.empty() || c.mulval_arcs.empty()))
        throw Error("mulval import needs both mulval_vertices and mulval_arcs");
    if (has_model && c.goal.empty()) throw Error("model input needs a goal predicate");
    return c;
}

StageArtifacts build_stages(const PipelineConfig& config, bool run_checks) {
    StageArtifacts a;

    // stage: attack graph
    if (!config.model_path.empty()) {
        AttackModel model = parse_attack_model(read_file(resolve(config.base_dir,
                                                                 config.model_path)));
        std::vector<Predicate> facts;
        if (!config.facts_path.empty()) {
            std::istringstream in(read_file(resolve(config.base_dir, config.facts_path)));
            std::string line;
            while (std::getline(in, line)) {
                std::string trimmed = line;
                trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
                if (trimmed.empty() || trimmed[0] == '%') continue;
                facts.push_back(parse_ground_predicate(trimmed));
            }
        }
        GroundResult gr = ground(model, facts, parse_ground_predicate(config.goal));
        if (!gr.derivable) throw Error("goal '" + config.goal + "' is not derivable");
        a.graph = std::move(gr.graph);

        // rule costs and damages flow into the reward structures
        RewardStructure acosts{"aCosts", {}};
        RewardStructure dcosts{"dCosts", {}};
        const auto labels = rule_action_labels(a.graph);
        std::map<std::string, const HornRule*> by_id;
        for (const auto& r : model.rules) by_id[r.id] = &r;
        for (const auto& [node, action] : labels) {
            auto it = by_id.find(a.graph.node(node).label);
            if (it == by_id.end()) continue;
            if (it->second->attack_cost > 0) acosts.rewards[action] = it->second->attack_cost;
            if (it->second->damage > 0) dcosts.rewards[action] = it->second->damage;
        }
        a.rewards = {acosts, dcosts};
    } else {
        a.graph = import_mulval_files(resolve(config.base_dir, config.mulval_vertices),
                                      resolve(config.base_dir, config.mulval_arcs));
        a.rewards = {RewardStructure{"aCosts", {}}, RewardStructure{"dCosts", {}}};
    }

    // stage: rule probabilities (node score, overridable by label)
    for (int r : a.graph.rule_nodes()) {
        const auto& node = a.graph.node(r);
        auto it = config.base_scores.find(node.label);
        if (it != config.base_scores.end())
            a.rule_probs[r] = it->second;
        else if (node.score)
            a.rule_probs[r] = *node.score;
        else
            throw Error("rule node " + std::to_string(r) + " ('" + node.label +
                        "') has no base score");
    }

    // stage: players
    a.attacker = attacker_smdp(a.graph, a.rule_probs);
    DefenseSpec defenses;
    if (!config.defenses_path.empty())
        defenses = parse_defense_spec(read_file(resolve(config.base_dir,
                                                        config.defenses_path)));
    std::set<std::string> triggers = config.triggers;
    if (triggers.empty()) {
        for (const auto& rule : defenses.rules)
            for (const auto& v : rule.guard.vars())
                if (a.attacker.vars.contains(v)) triggers.insert(v);
    }
    a.defender = defender_smdp(defenses, a.attacker, triggers);
    RewardStructure dc = defense_costs(defenses);
    for (auto& r : a.rewards)
        if (r.name == "dCosts")
            for (const auto& [action, value] : dc.rewards) r.rewards[action] = value;
    for (const auto& [name, table] : config.rewards) {
        RewardStructure* existing = nullptr;
        for (auto& r : a.rewards)
            if (r.name == name) existing = &r;
        if (!existing) {
            a.rewards.push_back(RewardStructure{name, {}});
            existing = &a.rewards.back();
        }
        for (const auto& [action, value] : table) existing->rewards[action] = value;
    }

    // stage: game (perfect or PO + transformation)
    if (config.observation) {
        // numeric entries are rule-node ids, resolvable only against the graph
        ObservationSpec obs;
        const auto labels = rule_action_labels(a.graph);
        for (const auto& entry : config.observation->observable_actions) {
            if (!entry.empty() &&
                std::all_of(entry.begin(), entry.end(),
                            [](unsigned char ch) { return std::isdigit(ch); })) {
                auto it = labels.find(std::stoi(entry));
                if (it == labels.end())
                    throw Error("observable_actions: node " + entry + " is not a rule node");
                obs.observable_actions.insert(it->second);
            } else {
                obs.observable_actions.insert(entry);
            }
        }
        a.po = build_po_game(a.graph, a.rule_probs, a.defender, obs, config.scheduler,
                             a.rewards, config.state_cap);
        a.game = transform(*a.po);
    } else {
        a.game = compose(expand(a.attacker, config.state_cap),
                         expand(a.defender, config.state_cap), config.scheduler, a.rewards,
                         config.state_cap);
    }

    // stage: checks and synthesis
    if (!run_checks) return a;
    ValueIterationSettings settings{config.epsilon, config.max_iters};
    for (const auto& text : config.formulas) {
        FormulaPtr f = parse_rpatl(text);
        a.checks.push_back({text, check(a.game, f, settings)});
        if (!a.strategy && (f->kind == RpatlFormula::Kind::ProbQuery ||
                            f->kind == RpatlFormula::Kind::RewardQuery)) {
            bool defender_only = !f->coalition.players.empty();
            for (Player p : f->coalition.players)
                if (p != Player::Defender) defender_only = false;
            if (defender_only && f->path->op != PathOp::BoundedUntil)
                a.strategy = synthesize(a.game, f, settings);
        }
    }
    return a;
}

RunResult run_pipeline(const PipelineConfig& config, const std::string& out_dir) {
    RunResult result;
    std::string stage = "config";
    try {
        stage = "build";
        auto t0 = std::chrono::steady_clock::now();
        StageArtifacts a = build_stages(config);
        auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();

        stage = "write";
        fs::create_directories(out_dir);
        auto emit = [&](const std::string& name, const std::string& content) {
            std::string path = (fs::path(out_dir) / name).string();
            write_file(path, content);
            result.outputs.push_back(path);
        };

        emit("graph.json", attack_graph_to_json(a.graph));
        {
            std::map<int, double> scores = agp(a.graph, a.rule_probs, {});
            ordered_json doc;
            for (const auto& [id, v] : scores) doc[std::to_string(id)] = v;
            emit("graph_scored.json", doc.dump(2) + "\n");
        }
        {
            ordered_json doc;
            doc["states"] = a.game.state_count();
            doc["transitions"] = a.game.transition_count();
            doc["attacker_actions"] = a.game.attacker_actions.size();
            doc["defender_actions"] = a.game.defender_actions.size();
            doc["deterministic"] = a.game.check_deterministic();
            emit("game_stats.json", doc.dump(2) + "\n");
        }
        if (a.po) {
            TransformReport report;
            (void)transform(*a.po, &report);
            emit("transform_report.json", report.to_json());
        }
        {
            ordered_json doc = ordered_json::array();
            for (const auto& [text, r] : a.checks) {
                ordered_json entry;
                entry["formula"] = text;
                double v = r.values[a.game.init];
                if (std::isinf(v))
                    entry["value"] = "inf";
                else
                    entry["value"] = v;
                if (!r.sat.empty()) entry["satisfied"] = static_cast<bool>(r.sat[a.game.init]);
                entry["converged"] = r.converged;
                entry["iterations"] = r.iterations;
                doc.push_back(std::move(entry));
                FormulaPtr f = parse_rpatl(text);
                bool numeric = (f->kind == RpatlFormula::Kind::ProbQuery ||
                                f->kind == RpatlFormula::Kind::RewardQuery) &&
                               f->numeric;
                if (!numeric && !r.sat.empty() && !r.sat[a.game.init])
                    result.checks_pass = false;
            }
            emit("check_results.json", doc.dump(2) + "\n");
        }
        if (a.strategy) emit("strategy.json", a.strategy->to_json(a.game));
        if (a.strategy && config.simulate_runs > 0) {
            std::string target = config.simulate_target.empty()
                                     ? a.graph.node(a.graph.goal).label
                                     : config.simulate_target;
            FormulaPtr objective = parse_rpatl("<<att>> Pmax=? [ F \"" + target + "\" ]");
            MonteCarloResult mc = monte_carlo(
                a.game, *a.strategy, AttackerPolicy::SynthesizedOpt, target,
                config.simulate_runs, config.simulate_horizon, config.seed, objective,
                ValueIterationSettings{config.epsilon, config.max_iters});
            ordered_json doc;
            doc["target"] = target;
            doc["estimate"] = mc.estimate;
            doc["ci_low"] = mc.ci_low;
            doc["ci_high"] = mc.ci_high;
            doc["runs"] = mc.runs;
            emit("simulation.json", doc.dump(2) + "\n");
        }
        if (config.export_prism) {
            const Smdp& att = a.po ? observable_attacker(a.graph, a.po->observation,
                                                         a.rule_probs, a.rewards)
                                         .smdp
                                   : a.attacker;
            emit("model.prism",
                 export_prism_model(att, a.defender, config.scheduler, a.game.rewards,
                                    a.graph.node(a.graph.goal).label));
            emit("model.props", export_prism_properties(config.formulas));
        }
        {
            std::ostringstream csv;
            csv << "states,transitions,wall_ms";
            for (const auto& [text, r] : a.checks) csv << "," << csv_quote(text);
            csv << "\n";
            csv << a.game.state_count() << "," << a.game.transition_count() << "," << elapsed;
            for (const auto& [text, r] : a.checks)
                csv << "," << format_value(r.values[a.game.init]);
            csv << "\n";
            emit("summary.csv", csv.str());
        }
    } catch (const std::exception& e) {
        result.ok = false;
        result.failed_stage = stage;
        result.error = e.what();
    }
    return result;
}

std::string sweep(const PipelineConfig& config, const SweepAxes& axes) {
    std::vector<double> strengths = axes.defense_strength.empty()
                                        ? std::vector<double>{1.0}
                                        : axes.defense_strength;
    std::vector<int> unobs = axes.unobservable_count.empty() ? std::vector<int>{0}
                                                             : axes.unobservable_count;
    std::vector<int> vulns = axes.vuln_count.empty() ? std::vector<int>{-1} : axes.vuln_count;

    std::ostringstream csv;
    csv << "defense_strength,unobservable_count,vuln_count,states,transitions,wall_ms";
    for (const auto& f : config.formulas) csv << "," << csv_quote(f);
    csv << ",error\n";

    DefenseSpec all_defenses;
    if (!config.defenses_path.empty())
        all_defenses =
            parse_defense_spec(read_file(resolve(config.base_dir, config.defenses_path)));
    std::sort(all_defenses.rules.begin(), all_defenses.rules.end(),
              [](const DefenseRule& a, const DefenseRule& b) { return a.name < b.name; });
    const StageArtifacts base = build_stages(config, false);

    // cells run in parallel; rows are keyed by their coordinates and
    // concatenated in order
    struct Cell {
        double strength;
        int hidden, vuln;
    };
    std::vector<Cell> cells;
    for (double strength : strengths)
        for (int hidden : unobs)
            for (int vuln : vulns) cells.push_back({strength, hidden, vuln});
    std::vector<std::string> rows(cells.size());

    parallel_for(
        cells.size(),
        [&](std::size_t cell_index) {
            const auto [strength, hidden, vuln] = cells[cell_index];
            std::ostringstream row;
            row << strength << "," << hidden << "," << vuln << ",";
            try {
                // defense strength: the first fraction of defenses, by name
                DefenseSpec defs = all_defenses;
                std::size_t keep = static_cast<std::size_t>(
                    strength * static_cast<double>(defs.rules.size()) + 1e-9);
                defs.rules.resize(std::min(defs.rules.size(), keep));

                // vuln_count: keep the first n vulExists condition nodes,
                // dropping rules that need the removed ones
                AttackGraph graph = base.graph;
                if (vuln >= 0) {
                    std::vector<int> vuln_nodes;
                    for (const auto& n : graph.nodes)
                        if (n.kind == NodeKind::Condition &&
                            n.label.rfind("vulExists", 0) == 0)
                            vuln_nodes.push_back(n.id);
                    std::set<int> removed(vuln_nodes.begin() + std::min<std::size_t>(
                                              vuln_nodes.size(), std::size_t(vuln)),
                                          vuln_nodes.end());
                    if (!removed.empty()) {
                        AttackGraph cut;
                        std::set<int> dropped_rules;
                        for (const auto& [f, t] : graph.edges)
                            if (removed.count(f)) dropped_rules.insert(t);
                        for (const auto& n : graph.nodes)
                            if (!removed.count(n.id) && !dropped_rules.count(n.id))
                                cut.nodes.push_back(n);
                        for (const auto& [f, t] : graph.edges)
                            if (!removed.count(f) && !dropped_rules.count(f) &&
                                !dropped_rules.count(t))
                                cut.edges.push_back({f, t});
                        cut.goal = graph.goal;
                        cut.sort_canonical();
                        graph = std::move(cut);
                    }
                }

                // unobservable_count: hide the highest-id non-goal rules
                std::map<int, double> probs;
                for (int r : graph.rule_nodes()) probs[r] = base.rule_probs.at(r);
                ObservationSpec obs;
                const auto labels = rule_action_labels(graph);
                std::vector<int> rule_ids = graph.rule_nodes();
                std::sort(rule_ids.rbegin(), rule_ids.rend());
                std::set<int> hidden_nodes;
                auto goal_rules = graph.predecessors(graph.goal);
                for (int r : rule_ids) {
                    if (static_cast<int>(hidden_nodes.size()) >= hidden) break;
                    if (std::find(goal_rules.begin(), goal_rules.end(), r) !=
                        goal_rules.end())
                        continue;
                    hidden_nodes.insert(r);
                }
                for (const auto& [r, label] : labels)
                    if (!hidden_nodes.count(r)) obs.observable_actions.insert(label);

                Smdp attacker = attacker_smdp(graph, probs);

                // defenses triggered by now-unobservable capabilities are
                // dropped so the cell stays an ODT game
                if (hidden > 0) {
                    std::set<std::string> visible = observable_variables(graph, obs);
                    DefenseSpec kept;
                    for (const auto& rule : defs.rules) {
                        bool ok = true;
                        for (const auto& v : rule.guard.vars())
                            if (attacker.vars.contains(v) && !visible.count(v)) ok = false;
                        for (const auto& b : rule.updates)
                            for (const auto& [v, val] : b.update.assign)
                                if (attacker.vars.contains(v) && !visible.count(v))
                                    ok = false;
                        if (ok) kept.rules.push_back(rule);
                    }
                    defs = std::move(kept);
                }

                std::set<std::string> triggers;
                for (const auto& rule : defs.rules)
                    for (const auto& v : rule.guard.vars())
                        if (attacker.vars.contains(v)) triggers.insert(v);
                Smdp defender = defender_smdp(defs, attacker, triggers);
                std::vector<RewardStructure> rewards = base.rewards;
                for (auto& r : rewards)
                    if (r.name == "dCosts")
                        for (const auto& rule : defs.rules)
                            r.rewards[rule.name] = rule.cost;

                auto t0 = std::chrono::steady_clock::now();
                StochasticGame game;
                if (hidden > 0) {
                    PoGame po = build_po_game(graph, probs, defender, obs, config.scheduler,
                                              rewards, config.state_cap);
                    game = transform(po);
                } else {
                    game = compose(expand(attacker, config.state_cap),
                                   expand(defender, config.state_cap), config.scheduler,
                                   rewards, config.state_cap);
                }
                double wall = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();

                row << game.state_count() << "," << game.transition_count() << "," << wall;
                ValueIterationSettings settings{config.epsilon, config.max_iters};
                for (const auto& text : config.formulas) {
                    CheckResult r = check(game, parse_rpatl(text), settings);
                    row << "," << format_value(r.values[game.init]);
                }
                row << ",\n";
            } catch (const std::exception& e) {
                std::string msg = e.what();
                for (auto& ch : msg)
                    if (ch == ',' || ch == '\n') ch = ';';
                row << std::string(3 + config.formulas.size(), ',') << msg << "\n";
            }
            rows[cell_index] = row.str();
        },
        2);
    for (const auto& row : rows) csv << row;

    return csv.str();
}

}  // namespace posecgame
