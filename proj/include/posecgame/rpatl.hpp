#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "posecgame/game.hpp"

namespace posecgame {

inline constexpr double kInfValue = std::numeric_limits<double>::infinity();

enum class CompareOp { Lt, Le, Gt, Ge };
const char* compare_op_str(CompareOp op);
bool compare(double value, CompareOp op, double bound);

enum class Opt { Max, Min };

struct Coalition {
    std::set<Player> players;

    bool contains(Player p) const { return players.count(p) > 0; }
    std::string str() const;
};

/// rPATL state formulas: true | atom | !f | f & f | <<C>>P~[psi] | <<C>>R{r}~[F f],
/// with the numeric query forms Pmax=?/Pmin=?/Rmax=?/Rmin=?.
struct RpatlFormula;
using FormulaPtr = std::shared_ptr<const RpatlFormula>;

enum class PathOp { Next, Until, BoundedUntil };

struct PathFormula {
    PathOp op = PathOp::Until;
    FormulaPtr left;   // Until, BoundedUntil; null for Next
    FormulaPtr right;  // Next operand lives here too
    int bound = 0;     // BoundedUntil steps
};

struct RpatlFormula {
    enum class Kind { True, Atom, Not, And, ProbQuery, RewardQuery };

    Kind kind = Kind::True;
    std::string atom;
    FormulaPtr left, right;  // Not uses left; And uses both

    // ProbQuery / RewardQuery
    Coalition coalition;
    bool numeric = false;               // Pmax=? / Rmin=? style
    Opt opt = Opt::Max;                 // direction for numeric queries
    CompareOp cmp = CompareOp::Ge;      // bound comparison otherwise
    double bound_value = 0.0;
    std::string reward_name;            // RewardQuery
    std::optional<PathFormula> path;    // ProbQuery: any path op; RewardQuery: F target in path->right

    std::string str() const;
};

FormulaPtr make_true();
FormulaPtr make_atom(std::string name);
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);

/// Parse per the grammar:
///   formula := 'true' | atom | '!' formula | formula '&' formula
///            | '(' formula ')' | coalition ptail
///   coalition := '<<' id (',' id)* '>>'
///   ptail := ('P' bound | 'Pmax=?' | 'Pmin=?') '[' path ']'
///          | ('R' ('{' id '}')? (bound | 'max=?' | 'min=?')
///            | 'Rmax=?' | 'Rmin=?') '[' 'F' formula ']'
///   path := 'X' formula | formula 'U' formula
///         | formula 'U<=' int formula | 'F' formula
///   bound := ('<'|'<='|'>'|'>=') number ;  atom := '"' label '"'
FormulaPtr parse_rpatl(const std::string& text);

struct ValueIterationSettings {
    double epsilon = 1e-8;
    std::size_t max_iters = 1'000'000;
};

struct CheckResult {
    std::vector<double> values;  // per state; kInfValue for diverging rewards
    std::vector<bool> sat;       // for state formulas
    std::size_t iterations = 0;
    bool converged = true;
};

/// States satisfying a state formula (bottom-up labeling; P/R operators
/// delegate to the value engines and compare against their bound).
std::vector<bool> sat(const StochasticGame& game, const FormulaPtr& f,
                      const ValueIterationSettings& settings = {});

/// Optimal path-formula probabilities: coalition states apply opt, the
/// opponent applies the opposite. Unbounded until runs value iteration from
/// the zero vector; bounded until is the exact k-step recursion.
CheckResult prob_path(const StochasticGame& game, const Coalition& coalition, Opt opt,
                      const PathFormula& psi, const ValueIterationSettings& settings = {});

/// Expected accumulated reward until F phi. States from which the
/// reward-optimizing side cannot be forced to reach Sat(phi) almost surely
/// get value infinity (exact graph-based analysis), the rest converge by
/// value iteration from zero.
CheckResult expected_reward(const StochasticGame& game, const Coalition& coalition, Opt opt,
                            const std::string& reward_name, const FormulaPtr& target,
                            const ValueIterationSettings& settings = {});

/// Evaluate a top-level query formula. Numeric queries fill values; bounded
/// ones also fill sat.
CheckResult check(const StochasticGame& game, const FormulaPtr& f,
                  const ValueIterationSettings& settings = {});

/// Memoryless deterministic policy for the defender.
struct Strategy {
    std::map<std::size_t, std::string> choice;  // defender state -> action
    std::string objective;
    double value = 0.0;  // achieved at the initial state

    std::string to_json(const StochasticGame& game) const;
};

/// Synthesize the defender strategy for a <<def>> P or R(F) query: in every
/// defender state pick the enabled action optimizing the one-step backup of
/// the converged values, ties broken by smallest action label.
Strategy synthesize(const StochasticGame& game, const FormulaPtr& objective,
                    const ValueIterationSettings& settings = {});

/// Restrict defender states to the strategy's choices.
StochasticGame apply_strategy(const StochasticGame& game, const Strategy& strategy);

/// Full memoryless profile (choices for both players) extracted from the
/// converged values of a query; used by simulation.
std::map<std::size_t, std::string> synthesize_profile(const StochasticGame& game,
                                                      const FormulaPtr& objective,
                                                      const ValueIterationSettings& settings = {});

}  // namespace posecgame
