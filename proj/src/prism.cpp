#include "posecgame/prism.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "posecgame/rpatl.hpp"

namespace posecgame {

namespace {

// shortest decimal that round-trips, so exports are byte-stable
std::string format_double(double v) {
    char buf[64];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

// '#' instance suffixes are not legal in PRISM action labels
std::string prism_action(const std::string& action) {
    std::string out = action;
    for (char& c : out)
        if (c == '#') c = '_';
    return out;
}

std::string prism_expr(const BoolExpr& e) {
    switch (e.kind()) {
        case BoolExpr::Kind::True: return "true";
        case BoolExpr::Kind::False: return "false";
        case BoolExpr::Kind::Var: return e.var_name();
        case BoolExpr::Kind::Not: return "!(" + prism_expr(e.child(0)) + ")";
        case BoolExpr::Kind::And:
            return "(" + prism_expr(e.child(0)) + " & " + prism_expr(e.child(1)) + ")";
        case BoolExpr::Kind::Or:
            return "(" + prism_expr(e.child(0)) + " | " + prism_expr(e.child(1)) + ")";
    }
    return "true";
}

std::string update_expr(const Update& u, Player next) {
    std::string out;
    for (const auto& [var, value] : u.assign) {
        if (!out.empty()) out += " & ";
        out += "(" + var + "'=" + (value ? "true" : "false") + ")";
    }
    std::string turn = "(t'=" + std::string(next == Player::Attacker ? "1" : "2") + ")";
    return out.empty() ? turn : out + " & " + turn;
}

void emit_commands(std::ostream& out, const Smdp& m, Player actor, const Scheduler& sched) {
    const char* turn_guard = actor == Player::Attacker ? "t=1" : "t=2";
    for (const auto& t : m.transitions) {
        Player next = sched.next(actor, t.action);
        out << "  [" << prism_action(t.action) << "] " << turn_guard << " & " << prism_expr(t.guard)
            << " -> ";
        bool first = true;
        for (const auto& b : t.branches) {
            if (!first) out << " + ";
            first = false;
            out << format_double(b.prob) << " : " << update_expr(b.update, next);
        }
        out << ";\n";
    }
    // deadlock-freedom: a synthetic idle loop when nothing is enabled
    const std::string idle = actor == Player::Attacker ? kIdleAttacker : kIdleDefender;
    out << "  [" << idle << "] " << turn_guard;
    for (const auto& t : m.transitions) out << " & !(" << prism_expr(t.guard) << ")";
    out << " -> (t'=" << (sched.next(actor, idle) == Player::Attacker ? "1" : "2") << ");\n";
}

}  // namespace

std::string export_prism_model(const Smdp& attacker, const Smdp& defender,
                               const Scheduler& sched,
                               const std::vector<RewardStructure>& rewards,
                               const std::string& goal_var) {
    std::ostringstream out;
    out << "// stochastic attack-defense game\n";
    out << "smg\n\n";

    out << "player attacker\n ";
    for (const auto& a : attacker.actions) out << " [" << prism_action(a) << "],";
    out << " [" << kIdleAttacker << "]\nendplayer\n";
    out << "player defender\n ";
    for (const auto& a : defender.actions) out << " [" << prism_action(a) << "],";
    out << " [" << kIdleDefender << "]\nendplayer\n\n";

    std::set<std::string> shared;
    for (const auto& v : defender.vars.names())
        if (attacker.vars.contains(v)) shared.insert(v);

    out << "module game\n";
    out << "  t : [1..2] init " << (sched.initial == Player::Attacker ? "1" : "2") << ";\n";
    for (std::size_t i = 0; i < attacker.vars.size(); ++i)
        out << "  " << attacker.vars.name(i) << " : bool init "
            << (attacker.init.bits.get(i) ? "true" : "false") << ";\n";
    for (std::size_t i = 0; i < defender.vars.size(); ++i) {
        if (shared.count(defender.vars.name(i))) continue;
        out << "  " << defender.vars.name(i) << " : bool init "
            << (defender.init.bits.get(i) ? "true" : "false") << ";\n";
    }
    emit_commands(out, attacker, Player::Attacker, sched);
    emit_commands(out, defender, Player::Defender, sched);
    out << "endmodule\n\n";

    out << "label \"" << kAttackerBlockedLabel << "\" = t=1";
    for (const auto& t : attacker.transitions) out << " & !(" << prism_expr(t.guard) << ")";
    out << ";\n";
    if (!goal_var.empty()) out << "label \"goal\" = " << goal_var << ";\n";
    out << "\n";

    for (const auto& r : rewards) {
        out << "rewards \"" << r.name << "\"\n";
        for (const auto& [action, value] : r.rewards) {
            if (value == 0.0) continue;
            out << "  [" << prism_action(action) << "] true : " << format_double(value) << ";\n";
        }
        out << "endrewards\n";
    }
    return out.str();
}

namespace {

std::string prism_formula(const FormulaPtr& f);

std::string prism_path(const PathFormula& p) {
    switch (p.op) {
        case PathOp::Next: return "X " + prism_formula(p.right);
        case PathOp::Until:
            if (p.left->kind == RpatlFormula::Kind::True)
                return "F " + prism_formula(p.right);
            return prism_formula(p.left) + " U " + prism_formula(p.right);
        case PathOp::BoundedUntil:
            return prism_formula(p.left) + " U<=" + std::to_string(p.bound) + " " +
                   prism_formula(p.right);
    }
    return "";
}

std::string prism_coalition(const Coalition& c) {
    std::string out = "<<";
    bool first = true;
    for (Player p : c.players) {
        if (!first) out += ",";
        first = false;
        out += p == Player::Attacker ? "attacker" : "defender";
    }
    return out + ">>";
}

std::string prism_formula(const FormulaPtr& f) {
    switch (f->kind) {
        case RpatlFormula::Kind::True: return "true";
        case RpatlFormula::Kind::Atom:
            // attackerBlocked is a declared label; variables are referenced directly
            return f->atom == kAttackerBlockedLabel ? "\"" + f->atom + "\"" : f->atom;
        case RpatlFormula::Kind::Not: return "!(" + prism_formula(f->left) + ")";
        case RpatlFormula::Kind::And:
            return "(" + prism_formula(f->left) + " & " + prism_formula(f->right) + ")";
        case RpatlFormula::Kind::ProbQuery: {
            std::string op = f->numeric ? (f->opt == Opt::Max ? "Pmax=?" : "Pmin=?")
                                        : "P" + std::string(compare_op_str(f->cmp)) +
                                              format_double(f->bound_value);
            return prism_coalition(f->coalition) + " " + op + " [ " + prism_path(*f->path) +
                   " ]";
        }
        case RpatlFormula::Kind::RewardQuery: {
            std::string name = f->reward_name.empty() ? "" : "{\"" + f->reward_name + "\"}";
            std::string op = f->numeric ? (f->opt == Opt::Max ? "max=?" : "min=?")
                                        : std::string(compare_op_str(f->cmp)) +
                                              format_double(f->bound_value);
            return prism_coalition(f->coalition) + " R" + name + op + " [ F " +
                   prism_formula(f->path->right) + " ]";
        }
    }
    return "";
}

}  // namespace

std::string export_prism_properties(const std::vector<std::string>& formulas) {
    std::ostringstream out;
    for (const auto& text : formulas) out << prism_formula(parse_rpatl(text)) << "\n";
    return out.str();
}

}  // namespace posecgame
