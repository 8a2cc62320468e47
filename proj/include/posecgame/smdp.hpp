#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "posecgame/boolexpr.hpp"
#include "posecgame/common.hpp"
#include "posecgame/threat_model.hpp"

namespace posecgame {

/// Ordered boolean variable vector. Names are kept sorted so state identity
/// and exports are byte-stable.
class VariableTable {
  public:
    VariableTable() = default;
    explicit VariableTable(std::set<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    std::optional<std::size_t> index(const std::string& name) const;
    bool contains(const std::string& name) const { return index(name).has_value(); }

    bool operator==(const VariableTable&) const = default;

  private:
    std::vector<std::string> names_;  // sorted
    std::unordered_map<std::string, std::size_t> index_;
};

/// Valuation of a VariableTable, packed into a BitVec.
struct Valuation {
    BitVec bits;

    static Valuation zeros(const VariableTable& vars) {
        return Valuation{BitVec(vars.size())};
    }
    bool operator==(const Valuation&) const = default;
};

std::map<std::string, bool> valuation_to_map(const VariableTable& vars, const Valuation& v);
Valuation valuation_from_map(const VariableTable& vars, const std::map<std::string, bool>& m);

/// Set of assignments; the empty update is the identity.
struct Update {
    std::map<std::string, bool> assign;

    bool empty() const { return assign.empty(); }
    bool operator==(const Update&) const = default;
    auto operator<=>(const Update&) const = default;
    std::string str() const;
};

struct UpdateBranch {
    Update update;
    double prob = 1.0;
};

struct SymbolicTransition {
    BoolExpr guard;
    std::string action;
    std::vector<UpdateBranch> branches;  // probs in (0,1], sum to 1
};

/// Symbolic MDP: guarded probabilistic transitions over boolean variables.
struct Smdp {
    VariableTable vars;
    Valuation init;
    std::set<std::string> actions;
    std::vector<SymbolicTransition> transitions;  // sorted by action label

    void validate() const;  // checks the structural invariants, throws Error
};

/// Explicit MDP: the reachable expansion of an SMDP. The defining SMDP is
/// kept so that the transition function stays evaluable on valuations
/// outside the enumerated set (the opponent of a game may drive a player
/// into such valuations by revoking capabilities).
struct Mdp {
    VariableTable vars;
    std::vector<Valuation> states;  // discovery order, states[0] == init
    std::size_t init = 0;
    std::set<std::string> actions;
    // trans[state][k] = (action, [(successor state, prob)...])
    std::vector<std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>>> trans;
    Smdp symbolic;

    std::size_t state_count() const { return states.size(); }
    std::size_t transition_count() const;

    /// Enabled moves from an arbitrary valuation, evaluated symbolically.
    std::vector<std::pair<std::string, std::vector<std::pair<Valuation, double>>>>
    moves(const Valuation& v) const;
};

/// Action-based reward structure (missing actions have reward 0).
struct RewardStructure {
    std::string name;
    std::map<std::string, double> rewards;

    double reward(const std::string& action) const {
        auto it = rewards.find(action);
        return it == rewards.end() ? 0.0 : it->second;
    }
};

/// Action label of each rule node: the node label, suffixed with "#<id>"
/// when several rule nodes share one label.
std::map<int, std::string> rule_action_labels(const AttackGraph& g);

/// Attacker behavior of an attack graph: one transition per rule node,
/// guarded on the rule's predecessors and the negated consequence, gaining
/// the consequence with probability p(rule).
Smdp attacker_smdp(const AttackGraph& g, const std::map<int, double>& p);

/// One defense rule: a guarded probabilistic update with a cost.
struct DefenseRule {
    std::string name;
    BoolExpr guard;
    std::vector<UpdateBranch> updates;
    double cost = 0.0;
};

struct DefenseSpec {
    std::vector<DefenseRule> rules;
};

/// Parse the defense-rule config JSON:
/// [{"name":str,"guard":expr,"updates":[{"assign":{var:bool},"prob":p}],"cost":c}]
DefenseSpec parse_defense_spec(const std::string& json_text);

/// Defender behavior: trigger variables shared with the attacker plus any
/// internal variables mentioned by the rules. The defender's initial
/// valuation agrees with the attacker's on the shared variables; internal
/// variables start false.
Smdp defender_smdp(const DefenseSpec& spec, const Smdp& attacker,
                   const std::set<std::string>& triggers);

/// dCosts contribution of the defense rules (cost per defense action).
RewardStructure defense_costs(const DefenseSpec& spec);

inline constexpr std::size_t kDefaultStateCap = 5'000'000;

/// Breadth-first reachable expansion. Throws Error when the cap is hit.
Mdp expand(const Smdp& smdp, std::size_t state_cap = kDefaultStateCap);

}  // namespace posecgame
