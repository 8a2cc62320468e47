#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "posecgame/common.hpp"

namespace posecgame {

/// Boolean expression over named variables. Guards of symbolic transitions
/// are expressions of this type; generated attacker models only ever use
/// conjunctions of literals, hand-written defense rules may use the full
/// grammar (!, &, |, parentheses, true/false).
class BoolExpr {
  public:
    enum class Kind { True, False, Var, Not, And, Or };

    BoolExpr() = default;  // the constant true

    static BoolExpr constant(bool v);
    static BoolExpr var(std::string name);
    static BoolExpr negate(BoolExpr e);
    static BoolExpr conj(BoolExpr a, BoolExpr b);
    static BoolExpr disj(BoolExpr a, BoolExpr b);

    /// Conjunction of positive and negative literals.
    static BoolExpr literal_conjunction(const std::vector<std::string>& pos,
                                        const std::vector<std::string>& neg);

    Kind kind() const { return kind_; }
    const std::string& var_name() const { return name_; }
    const BoolExpr& child(std::size_t i) const { return children_[i]; }

    /// Evaluate under a lookup function (variable name -> value).
    template <typename Lookup>
    bool eval(const Lookup& lookup) const {
        switch (kind_) {
            case Kind::True: return true;
            case Kind::False: return false;
            case Kind::Var: return lookup(name_);
            case Kind::Not: return !children_[0].eval(lookup);
            case Kind::And: return children_[0].eval(lookup) && children_[1].eval(lookup);
            case Kind::Or: return children_[0].eval(lookup) || children_[1].eval(lookup);
        }
        return false;
    }

    void collect_vars(std::set<std::string>& out) const;
    std::set<std::string> vars() const;

    /// If the expression is a conjunction of distinct literals, return them
    /// as (positive, negative) variable-name sets.
    bool as_literal_conjunction(std::set<std::string>& pos,
                                std::set<std::string>& neg) const;

    /// Render in the guard grammar; parseable by parse_bool_expr.
    std::string str() const;

  private:
    Kind kind_ = Kind::True;
    std::string name_;
    std::vector<BoolExpr> children_;
};

/// Parse a boolean expression. Atoms are identifiers or quoted names
/// ("..." or '...'); operators: ! & | with the usual precedence, plus
/// parentheses and the constants true/false.
BoolExpr parse_bool_expr(const std::string& text);

}  // namespace posecgame
