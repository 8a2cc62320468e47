#include "posecgame/rpatl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace posecgame {

using nlohmann::ordered_json;

const char* compare_op_str(CompareOp op) {
    switch (op) {
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
    }
    return "?";
}

bool compare(double value, CompareOp op, double bound) {
    switch (op) {
        case CompareOp::Lt: return value < bound;
        case CompareOp::Le: return value <= bound;
        case CompareOp::Gt: return value > bound;
        case CompareOp::Ge: return value >= bound;
    }
    return false;
}

std::string Coalition::str() const {
    std::string out = "<<";
    bool first = true;
    for (Player p : players) {
        if (!first) out += ",";
        first = false;
        out += p == Player::Attacker ? "att" : "def";
    }
    return out + ">>";
}

FormulaPtr make_true() {
    auto f = std::make_shared<RpatlFormula>();
    f->kind = RpatlFormula::Kind::True;
    return f;
}

FormulaPtr make_atom(std::string name) {
    auto f = std::make_shared<RpatlFormula>();
    f->kind = RpatlFormula::Kind::Atom;
    f->atom = std::move(name);
    return f;
}

FormulaPtr make_not(FormulaPtr inner) {
    auto f = std::make_shared<RpatlFormula>();
    f->kind = RpatlFormula::Kind::Not;
    f->left = std::move(inner);
    return f;
}

FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<RpatlFormula>();
    f->kind = RpatlFormula::Kind::And;
    f->left = std::move(a);
    f->right = std::move(b);
    return f;
}

namespace {

std::string format_number(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string path_str(const PathFormula& p) {
    switch (p.op) {
        case PathOp::Next: return "X " + p.right->str();
        case PathOp::Until: {
            if (p.left->kind == RpatlFormula::Kind::True) return "F " + p.right->str();
            return p.left->str() + " U " + p.right->str();
        }
        case PathOp::BoundedUntil:
            return p.left->str() + " U<=" + std::to_string(p.bound) + " " + p.right->str();
    }
    return "?";
}

}  // namespace

std::string RpatlFormula::str() const {
    switch (kind) {
        case Kind::True: return "true";
        case Kind::Atom: return "\"" + atom + "\"";
        case Kind::Not: return "!" + left->str();
        case Kind::And: return "(" + left->str() + " & " + right->str() + ")";
        case Kind::ProbQuery: {
            std::string q = coalition.str() + " P";
            if (numeric)
                q += (opt == Opt::Max ? "max=?" : "min=?");
            else
                q += std::string(compare_op_str(cmp)) + format_number(bound_value);
            return q + " [ " + path_str(*path) + " ]";
        }
        case Kind::RewardQuery: {
            std::string q = coalition.str() + " R{" + reward_name + "}";
            if (numeric)
                q += (opt == Opt::Max ? "max=?" : "min=?");
            else
                q += std::string(compare_op_str(cmp)) + format_number(bound_value);
            return q + " [ F " + path->right->str() + " ]";
        }
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class FormulaLexer {
  public:
    explicit FormulaLexer(const std::string& text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            advance();
    }

    bool eof() {
        skip_ws();
        return pos_ >= text_.size();
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(const std::string& s) {
        skip_ws();
        if (text_.compare(pos_, s.size(), s) == 0) {
            for (std::size_t i = 0; i < s.size(); ++i) advance();
            return true;
        }
        return false;
    }

    bool accept_word(const std::string& w) {
        skip_ws();
        if (text_.compare(pos_, w.size(), w) != 0) return false;
        std::size_t end = pos_ + w.size();
        if (end < text_.size() &&
            (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
            return false;
        for (std::size_t i = 0; i < w.size(); ++i) advance();
        return true;
    }

    std::string ident() {
        skip_ws();
        if (pos_ >= text_.size() ||
            (!std::isalpha(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '_'))
            fail("expected identifier");
        std::string out;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            out += text_[pos_];
            advance();
        }
        return out;
    }

    std::string quoted() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected quoted atom");
        advance();
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            out += text_[pos_];
            advance();
        }
        if (pos_ >= text_.size()) fail("unterminated quoted atom");
        advance();
        if (out.empty()) fail("empty atom");
        return out;
    }

    double number() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' || text_[pos_] == '-' ||
                text_[pos_] == '+'))
            advance();
        if (start == pos_) fail("expected number");
        try {
            std::size_t used = 0;
            std::string s = text_.substr(start, pos_ - start);
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail("malformed number");
        }
    }

    int integer() {
        double v = number();
        if (v < 0 || v != std::floor(v)) fail("expected nonnegative integer");
        return static_cast<int>(v);
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line_, col_);
    }

  private:
    void advance() {
        if (pos_ < text_.size()) {
            if (text_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class FormulaParser {
  public:
    explicit FormulaParser(const std::string& text) : lex_(text) {}

    FormulaPtr parse() {
        FormulaPtr f = formula();
        if (!lex_.eof()) lex_.fail("trailing input after formula");
        return f;
    }

  private:
    FormulaPtr formula() {
        FormulaPtr f = unary();
        while (lex_.accept("&")) f = make_and(f, unary());
        return f;
    }

    FormulaPtr unary() {
        if (lex_.accept("!")) return make_not(unary());
        if (lex_.accept("(")) {
            FormulaPtr f = formula();
            if (!lex_.accept(")")) lex_.fail("expected ')'");
            return f;
        }
        if (lex_.peek() == '<') return query();
        if (lex_.peek() == '"') return make_atom(lex_.quoted());
        if (lex_.accept_word("true")) return make_true();
        lex_.fail("expected formula");
    }

    Coalition coalition() {
        if (!lex_.accept("<<")) lex_.fail("expected '<<'");
        Coalition c;
        for (;;) {
            std::string id = lex_.ident();
            if (id == "att" || id == "attacker" || id == "A" || id == "a")
                c.players.insert(Player::Attacker);
            else if (id == "def" || id == "defender" || id == "D" || id == "d")
                c.players.insert(Player::Defender);
            else
                lex_.fail("unknown player '" + id + "'");
            if (lex_.accept(",")) continue;
            break;
        }
        if (!lex_.accept(">>")) lex_.fail("expected '>>'");
        return c;
    }

    CompareOp compare_op() {
        if (lex_.accept("<=")) return CompareOp::Le;
        if (lex_.accept(">=")) return CompareOp::Ge;
        if (lex_.accept("<")) return CompareOp::Lt;
        if (lex_.accept(">")) return CompareOp::Gt;
        lex_.fail("expected comparison operator");
    }

    FormulaPtr query() {
        auto f = std::make_shared<RpatlFormula>();
        f->coalition = coalition();
        if (lex_.accept("Pmax=?")) {
            f->kind = RpatlFormula::Kind::ProbQuery;
            f->numeric = true;
            f->opt = Opt::Max;
        } else if (lex_.accept("Pmin=?")) {
            f->kind = RpatlFormula::Kind::ProbQuery;
            f->numeric = true;
            f->opt = Opt::Min;
        } else if (lex_.accept("Rmax=?")) {
            f->kind = RpatlFormula::Kind::RewardQuery;
            f->numeric = true;
            f->opt = Opt::Max;
        } else if (lex_.accept("Rmin=?")) {
            f->kind = RpatlFormula::Kind::RewardQuery;
            f->numeric = true;
            f->opt = Opt::Min;
        } else if (lex_.accept("P")) {
            f->kind = RpatlFormula::Kind::ProbQuery;
            f->cmp = compare_op();
            f->bound_value = lex_.number();
            if (f->bound_value < 0.0 || f->bound_value > 1.0)
                lex_.fail("probability bound outside [0,1]");
        } else if (lex_.accept("R")) {
            f->kind = RpatlFormula::Kind::RewardQuery;
            if (lex_.accept("{")) {
                f->reward_name = lex_.peek() == '"' ? lex_.quoted() : lex_.ident();
                if (!lex_.accept("}")) lex_.fail("expected '}'");
            }
            if (lex_.accept("max=?")) {
                f->numeric = true;
                f->opt = Opt::Max;
            } else if (lex_.accept("min=?")) {
                f->numeric = true;
                f->opt = Opt::Min;
            } else {
                f->cmp = compare_op();
                f->bound_value = lex_.number();
            }
        } else {
            lex_.fail("expected P or R operator after coalition");
        }

        if (f->kind == RpatlFormula::Kind::RewardQuery) {
            if (f->reward_name.empty() && lex_.accept("{")) {
                f->reward_name = lex_.peek() == '"' ? lex_.quoted() : lex_.ident();
                if (!lex_.accept("}")) lex_.fail("expected '}'");
            }
            if (!lex_.accept("[")) lex_.fail("expected '['");
            if (!lex_.accept_word("F")) lex_.fail("reward queries use F targets");
            PathFormula p;
            p.op = PathOp::Until;
            p.left = make_true();
            p.right = formula();
            f->path = std::move(p);
            if (!lex_.accept("]")) lex_.fail("expected ']'");
            return f;
        }

        if (!lex_.accept("[")) lex_.fail("expected '['");
        PathFormula p;
        if (lex_.accept_word("X")) {
            p.op = PathOp::Next;
            p.right = formula();
        } else if (lex_.accept_word("F")) {
            p.op = PathOp::Until;
            p.left = make_true();
            p.right = formula();
        } else {
            p.left = formula();
            if (!lex_.accept_word("U")) lex_.fail("expected 'U'");
            if (lex_.accept("<=")) {
                p.op = PathOp::BoundedUntil;
                p.bound = lex_.integer();
            } else {
                p.op = PathOp::Until;
            }
            p.right = formula();
        }
        f->path = std::move(p);
        if (!lex_.accept("]")) lex_.fail("expected ']'");
        return f;
    }

    FormulaLexer lex_;
};

}  // namespace

FormulaPtr parse_rpatl(const std::string& text) { return FormulaParser(text).parse(); }

// ---------------------------------------------------------------------------
// Value engines
// ---------------------------------------------------------------------------

namespace {

bool state_maximizes(const StochasticGame& game, std::size_t s, const Coalition& coalition,
                     Opt opt) {
    bool in_coalition = coalition.contains(game.turn(s));
    return in_coalition == (opt == Opt::Max);
}

double backup_prob(const StochasticGame& game, std::size_t s, bool maximize,
                   const std::vector<double>& x) {
    double best = maximize ? -1.0 : 2.0;
    for (const auto& [action, dist] : game.trans[s]) {
        double q = 0.0;
        for (const auto& [succ, p] : dist) q += p * x[succ];
        best = maximize ? std::max(best, q) : std::min(best, q);
    }
    if (game.trans[s].empty()) return 0.0;
    return best;
}

/// Almost-sure reachability for the `reachers` side against the rest:
/// greatest Z such that inside Z the reachers can keep the positive
/// attractor of the target covering everything.
std::vector<bool> almost_sure_reach(const StochasticGame& game,
                                    const std::set<Player>& reachers,
                                    const std::vector<bool>& target) {
    const std::size_t n = game.state_count();
    std::vector<bool> z(n, true);
    for (;;) {
        std::vector<bool> y(n, false);
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t s = 0; s < n; ++s) {
                if (y[s] || !z[s]) continue;
                bool add = false;
                if (target[s]) {
                    add = true;
                } else {
                    bool reacher = reachers.count(game.turn(s)) > 0;
                    bool any_good = false, all_good = true;
                    for (const auto& [action, dist] : game.trans[s]) {
                        bool in_z = true, hits_y = false;
                        for (const auto& [succ, p] : dist) {
                            if (!z[succ]) in_z = false;
                            if (y[succ]) hits_y = true;
                        }
                        bool good = in_z && hits_y;
                        any_good |= good;
                        all_good &= good;
                    }
                    if (game.trans[s].empty()) all_good = false;
                    add = reacher ? any_good : all_good;
                }
                if (add) {
                    y[s] = true;
                    grew = true;
                }
            }
        }
        if (y == z) return z;
        z = std::move(y);
    }
}

}  // namespace

std::vector<bool> sat(const StochasticGame& game, const FormulaPtr& f,
                      const ValueIterationSettings& settings) {
    const std::size_t n = game.state_count();
    switch (f->kind) {
        case RpatlFormula::Kind::True:
            return std::vector<bool>(n, true);
        case RpatlFormula::Kind::Atom: {
            if (!game.known_atom(f->atom)) throw Error("unresolvable atom '" + f->atom + "'");
            std::vector<bool> out(n);
            for (std::size_t s = 0; s < n; ++s) out[s] = game.label_true(s, f->atom);
            return out;
        }
        case RpatlFormula::Kind::Not: {
            auto inner = sat(game, f->left, settings);
            inner.flip();
            return inner;
        }
        case RpatlFormula::Kind::And: {
            auto a = sat(game, f->left, settings);
            auto b = sat(game, f->right, settings);
            for (std::size_t s = 0; s < n; ++s) a[s] = a[s] && b[s];
            return a;
        }
        case RpatlFormula::Kind::ProbQuery: {
            if (f->numeric) throw Error("numeric query cannot be nested in a state formula");
            Opt opt = (f->cmp == CompareOp::Ge || f->cmp == CompareOp::Gt) ? Opt::Max : Opt::Min;
            CheckResult r = prob_path(game, f->coalition, opt, *f->path, settings);
            std::vector<bool> out(n);
            for (std::size_t s = 0; s < n; ++s)
                out[s] = compare(r.values[s], f->cmp, f->bound_value);
            return out;
        }
        case RpatlFormula::Kind::RewardQuery: {
            if (f->numeric) throw Error("numeric query cannot be nested in a state formula");
            Opt opt = (f->cmp == CompareOp::Le || f->cmp == CompareOp::Lt) ? Opt::Min : Opt::Max;
            CheckResult r = expected_reward(game, f->coalition, opt, f->reward_name,
                                            f->path->right, settings);
            std::vector<bool> out(n);
            for (std::size_t s = 0; s < n; ++s)
                out[s] = compare(r.values[s], f->cmp, f->bound_value);
            return out;
        }
    }
    throw Error("unreachable formula kind");
}

CheckResult prob_path(const StochasticGame& game, const Coalition& coalition, Opt opt,
                      const PathFormula& psi, const ValueIterationSettings& settings) {
    const std::size_t n = game.state_count();
    CheckResult result;

    if (psi.op == PathOp::Next) {
        auto target = sat(game, psi.right, settings);
        std::vector<double> x(n, 0.0);
        for (std::size_t s = 0; s < n; ++s) x[s] = target[s] ? 1.0 : 0.0;
        result.values.resize(n);
        for (std::size_t s = 0; s < n; ++s)
            result.values[s] = backup_prob(game, s, state_maximizes(game, s, coalition, opt), x);
        result.iterations = 1;
        return result;
    }

    auto sat1 = sat(game, psi.left, settings);
    auto sat2 = sat(game, psi.right, settings);
    std::vector<double> x(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        if (sat2[s]) x[s] = 1.0;

    // Jacobi sweep: each entry reads only the previous vector, so the
    // partition cannot change the result
    auto step = [&](const std::vector<double>& prev) {
        std::vector<double> next(n);
        parallel_for(n, [&](std::size_t s) {
            if (sat2[s])
                next[s] = 1.0;
            else if (!sat1[s])
                next[s] = 0.0;
            else
                next[s] =
                    backup_prob(game, s, state_maximizes(game, s, coalition, opt), prev);
        });
        return next;
    };

    if (psi.op == PathOp::BoundedUntil) {
        for (int k = 0; k < psi.bound; ++k) x = step(x);
        result.values = std::move(x);
        result.iterations = static_cast<std::size_t>(psi.bound);
        return result;
    }

    // unbounded until: iterate from the zero vector to the fixpoint
    result.converged = false;
    for (std::size_t it = 0; it < settings.max_iters; ++it) {
        std::vector<double> next = step(x);
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) delta = std::max(delta, std::abs(next[s] - x[s]));
        x = std::move(next);
        ++result.iterations;
        if (delta < settings.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.values = std::move(x);
    return result;
}

CheckResult expected_reward(const StochasticGame& game, const Coalition& coalition, Opt opt,
                            const std::string& reward_name, const FormulaPtr& target,
                            const ValueIterationSettings& settings) {
    const std::size_t n = game.state_count();
    std::string name = reward_name;
    if (name.empty()) {
        if (game.rewards.size() != 1)
            throw Error("reward query without a structure name is ambiguous");
        name = game.rewards.front().name;
    }
    const RewardStructure& rew = game.reward_structure(name);
    auto target_sat = sat(game, target, settings);

    // step 1: states where the reward-optimizing side cannot force reaching
    // the target almost surely get infinity
    std::set<Player> reachers;
    for (Player p : {Player::Attacker, Player::Defender}) {
        bool in_coalition = coalition.contains(p);
        if ((opt == Opt::Min) == in_coalition) reachers.insert(p);
    }
    auto finite = almost_sure_reach(game, reachers, target_sat);

    CheckResult result;
    result.values.assign(n, kInfValue);
    std::vector<double> x(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        if (!finite[s]) x[s] = kInfValue;

    // step 2: value iteration from zero on the finite region
    result.converged = false;
    for (std::size_t it = 0; it < settings.max_iters; ++it) {
        std::vector<double> next(n);
        parallel_for(n, [&](std::size_t s) {
            if (!finite[s]) {
                next[s] = kInfValue;
                return;
            }
            if (target_sat[s]) {
                next[s] = 0.0;
                return;
            }
            bool maximize = state_maximizes(game, s, coalition, opt);
            double best = maximize ? -kInfValue : kInfValue;
            for (const auto& [action, dist] : game.trans[s]) {
                double q = rew.reward(action);
                bool inf = false;
                for (const auto& [succ, p] : dist) {
                    if (std::isinf(x[succ])) {
                        inf = true;
                        break;
                    }
                    q += p * x[succ];
                }
                if (inf) {
                    if (maximize)
                        throw Error("expected_reward: infinite action value inside the "
                                    "almost-sure region");
                    continue;  // a minimizer never takes an action that may diverge
                }
                best = maximize ? std::max(best, q) : std::min(best, q);
            }
            if (game.trans[s].empty() || std::isinf(best))
                throw Error("expected_reward: no finite action in the almost-sure region");
            next[s] = best;
        });
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            if (finite[s]) delta = std::max(delta, std::abs(next[s] - x[s]));
        x = std::move(next);
        ++result.iterations;
        if (delta < settings.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.values = std::move(x);
    return result;
}

CheckResult check(const StochasticGame& game, const FormulaPtr& f,
                  const ValueIterationSettings& settings) {
    if (f->kind == RpatlFormula::Kind::ProbQuery && f->numeric)
        return prob_path(game, f->coalition, f->opt, *f->path, settings);
    if (f->kind == RpatlFormula::Kind::RewardQuery && f->numeric)
        return expected_reward(game, f->coalition, f->opt, f->reward_name, f->path->right,
                               settings);
    CheckResult result;
    result.sat = sat(game, f, settings);
    result.values.resize(game.state_count());
    for (std::size_t s = 0; s < game.state_count(); ++s)
        result.values[s] = result.sat[s] ? 1.0 : 0.0;
    return result;
}

// ---------------------------------------------------------------------------
// Strategy synthesis
// ---------------------------------------------------------------------------

namespace {

struct ObjectiveAnalysis {
    CheckResult values;
    Opt opt = Opt::Max;
    bool is_reward = false;
    std::string reward_name;
    std::vector<bool> decided;  // states where any action does
};

ObjectiveAnalysis analyze_objective(const StochasticGame& game, const FormulaPtr& f,
                                    const ValueIterationSettings& settings) {
    if (!f || (f->kind != RpatlFormula::Kind::ProbQuery &&
               f->kind != RpatlFormula::Kind::RewardQuery))
        throw Error("synthesize: objective must be a P or R query");
    ObjectiveAnalysis a;
    const std::size_t n = game.state_count();
    a.decided.assign(n, false);
    if (f->kind == RpatlFormula::Kind::ProbQuery) {
        if (f->path->op == PathOp::BoundedUntil)
            throw Error("synthesize: bounded until needs step-indexed strategies");
        a.opt = f->numeric
                    ? f->opt
                    : ((f->cmp == CompareOp::Ge || f->cmp == CompareOp::Gt) ? Opt::Max
                                                                            : Opt::Min);
        a.values = prob_path(game, f->coalition, a.opt, *f->path, settings);
        if (f->path->op == PathOp::Until) {
            auto s1 = sat(game, f->path->left, settings);
            auto s2 = sat(game, f->path->right, settings);
            for (std::size_t s = 0; s < n; ++s) a.decided[s] = s2[s] || (!s1[s] && !s2[s]);
        }
    } else {
        a.is_reward = true;
        a.opt = f->numeric
                    ? f->opt
                    : ((f->cmp == CompareOp::Le || f->cmp == CompareOp::Lt) ? Opt::Min
                                                                            : Opt::Max);
        a.reward_name = f->reward_name;
        a.values = expected_reward(game, f->coalition, a.opt, f->reward_name, f->path->right,
                                   settings);
        auto t = sat(game, f->path->right, settings);
        for (std::size_t s = 0; s < n; ++s)
            a.decided[s] = t[s] || std::isinf(a.values.values[s]);
    }
    return a;
}

std::string pick_action(const StochasticGame& game, std::size_t s, const ObjectiveAnalysis& a,
                        bool maximize) {
    // actions in label order so ties and decided states resolve canonically
    std::vector<std::size_t> order(game.trans[s].size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return game.trans[s][i].first < game.trans[s][j].first;
    });
    if (order.empty()) throw Error("state without actions");
    if (a.decided[s]) return game.trans[s][order.front()].first;

    const RewardStructure* rew = nullptr;
    if (a.is_reward) {
        std::string name = a.reward_name;
        if (name.empty() && game.rewards.size() == 1) name = game.rewards.front().name;
        rew = &game.reward_structure(name);
    }
    std::string best_action;
    double best = 0.0;
    bool have = false;
    for (std::size_t i : order) {
        const auto& [action, dist] = game.trans[s][i];
        double q = rew ? rew->reward(action) : 0.0;
        bool inf = false;
        for (const auto& [succ, p] : dist) {
            if (std::isinf(a.values.values[succ])) {
                inf = true;
                break;
            }
            q += p * a.values.values[succ];
        }
        if (inf) {
            if (maximize) return action;  // diverging is optimal for a maximizer
            continue;
        }
        if (!have || (maximize ? q > best + 1e-12 : q < best - 1e-12)) {
            best = q;
            best_action = action;
            have = true;
        }
    }
    if (!have) return game.trans[s][order.front()].first;
    return best_action;
}

}  // namespace

Strategy synthesize(const StochasticGame& game, const FormulaPtr& objective,
                    const ValueIterationSettings& settings) {
    for (Player p : objective->coalition.players)
        if (p != Player::Defender)
            throw Error("synthesize: objective coalition must be within {def}");
    ObjectiveAnalysis a = analyze_objective(game, objective, settings);
    Strategy strat;
    strat.objective = objective->str();
    strat.value = a.values.values[game.init];
    for (std::size_t s = 0; s < game.state_count(); ++s) {
        if (game.turn(s) != Player::Defender) continue;
        bool maximize = state_maximizes(game, s, objective->coalition, a.opt);
        strat.choice[s] = pick_action(game, s, a, maximize);
    }
    return strat;
}

std::map<std::size_t, std::string> synthesize_profile(const StochasticGame& game,
                                                      const FormulaPtr& objective,
                                                      const ValueIterationSettings& settings) {
    ObjectiveAnalysis a = analyze_objective(game, objective, settings);
    std::map<std::size_t, std::string> profile;
    for (std::size_t s = 0; s < game.state_count(); ++s) {
        bool maximize = state_maximizes(game, s, objective->coalition, a.opt);
        profile[s] = pick_action(game, s, a, maximize);
    }
    return profile;
}

StochasticGame apply_strategy(const StochasticGame& game, const Strategy& strategy) {
    StochasticGame out = game;
    for (std::size_t s = 0; s < game.state_count(); ++s) {
        if (game.turn(s) != Player::Defender) continue;
        auto it = strategy.choice.find(s);
        if (it == strategy.choice.end())
            throw Error("apply_strategy: strategy not total (missing defender state " +
                        std::to_string(s) + ")");
        const std::string& action = it->second;
        auto& row = out.trans[s];
        auto keep = std::remove_if(row.begin(), row.end(),
                                   [&](const auto& e) { return e.first != action; });
        row.erase(keep, row.end());
        if (row.empty())
            throw Error("apply_strategy: chosen action '" + action +
                        "' not enabled in state " + std::to_string(s));
    }
    return out;
}

std::string Strategy::to_json(const StochasticGame& game) const {
    ordered_json doc = ordered_json::array();
    for (const auto& [s, action] : choice) {
        ordered_json entry;
        ordered_json state = ordered_json::object();
        for (const auto& [k, v] : valuation_to_map(game.vars, game.state_vals[s])) state[k] = v;
        entry["state"] = std::move(state);
        entry["action"] = action;
        doc.push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

}  // namespace posecgame
