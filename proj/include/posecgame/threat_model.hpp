#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "posecgame/common.hpp"

namespace posecgame {

/// A term is either a constant or a variable. Constants start with a capital
/// letter, a digit, or are quoted; variables start with a small letter.
struct Term {
    enum class Kind { Constant, Variable };
    Kind kind = Kind::Constant;
    std::string name;

    bool operator==(const Term&) const = default;
    auto operator<=>(const Term&) const = default;
};

struct Predicate {
    std::string name;
    std::vector<Term> args;

    bool is_ground() const;
    std::string str() const;

    bool operator==(const Predicate&) const = default;
    auto operator<=>(const Predicate&) const = default;
};

/// Safe Horn rule: every variable of the head occurs in the body.
struct HornRule {
    std::string id;
    std::vector<Predicate> body;
    Predicate head;
    double base_score = 1.0;  // probability of success given the body holds
    double attack_cost = 0.0;
    double damage = 0.0;
    int line = 0;  // source line for diagnostics
};

/// Horn-clause attack model: primitive predicate names, derived predicate
/// names, action rules, plus ground facts stated inline in the source.
struct AttackModel {
    std::set<std::string> primitives;
    std::set<std::string> derived;
    std::vector<HornRule> rules;
    std::vector<Predicate> facts;
};

enum class NodeKind { Condition, Derived, Rule };

const char* node_kind_name(NodeKind k);

struct AttackGraphNode {
    int id = 0;
    NodeKind kind = NodeKind::Condition;
    std::string label;
    std::optional<double> score;  // base score (rule) or fact score (condition)
};

/// AND/OR derivation graph. Edges run (condition|derived) -> rule and
/// rule -> derived; every rule node has exactly one successor.
struct AttackGraph {
    std::vector<AttackGraphNode> nodes;           // sorted by id
    std::vector<std::pair<int, int>> edges;       // (from, to), sorted
    int goal = 0;

    bool empty() const { return nodes.empty(); }
    const AttackGraphNode& node(int id) const;
    bool has_node(int id) const;
    std::vector<int> predecessors(int id) const;
    std::vector<int> successors(int id) const;
    std::vector<int> rule_nodes() const;

    void sort_canonical();
};

/// Parse the attack-model text format: one clause per line,
///   head :- body1, ..., bodyk. [score=0.74, cost=10, damage=5.9]
/// facts are body-less clauses; '%' starts a line comment.
AttackModel parse_attack_model(const std::string& text);

/// Result of grounding: either a graph or a not-derivable signal.
struct GroundResult {
    bool derivable = false;
    AttackGraph graph;
};

/// Forward-chaining fixpoint over the constants of facts and rules, then a
/// backward slice to the derivations reaching the goal.
GroundResult ground(const AttackModel& model, const std::vector<Predicate>& facts,
                    const Predicate& goal);

/// MulVAL CSV import. VERTICES rows: id,"label","type",score with type in
/// {LEAF, OR, AND}; ARCS rows: dst,src,weight (arcs point toward
/// prerequisites and are reversed on import).
AttackGraph import_mulval(std::istream& vertices, std::istream& arcs);
AttackGraph import_mulval_files(const std::string& vertices_path,
                                const std::string& arcs_path);

/// Inverse of import_mulval; round-trips node/edge structure exactly.
void export_mulval(const AttackGraph& g, std::ostream& vertices, std::ostream& arcs);

/// Cumulative attack-graph probabilities: rule nodes multiply their base
/// score with all predecessor values, derived nodes combine incoming rules
/// noisy-OR style, condition nodes take their fact score (default 1.0).
/// The graph must be acyclic.
std::map<int, double> agp(const AttackGraph& g, const std::map<int, double>& base,
                          const std::map<int, double>& fact_scores);

/// Structural diagnostics; empty result means the graph is valid.
std::vector<std::string> validate_graph(const AttackGraph& g);

/// Attack-graph JSON ({"nodes":[...],"edges":[[f,t],...],"goal":id}).
std::string attack_graph_to_json(const AttackGraph& g);
AttackGraph attack_graph_from_json(const std::string& text);

/// Ground predicate -> boolean state-variable name (plycent03, 'CVE-X' ->
/// pred_plycent03_cve_x style flattening). Nodes imported from MulVAL keep
/// their label verbatim.
std::string atom_variable_name(const Predicate& p);

/// Parse a single ground predicate such as dos(Plycent02).
Predicate parse_ground_predicate(const std::string& text);

}  // namespace posecgame
