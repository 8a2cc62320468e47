#include "posecgame/boolexpr.hpp"

#include <cctype>

namespace posecgame {

BoolExpr BoolExpr::constant(bool v) {
    BoolExpr e;
    e.kind_ = v ? Kind::True : Kind::False;
    return e;
}

BoolExpr BoolExpr::var(std::string name) {
    BoolExpr e;
    e.kind_ = Kind::Var;
    e.name_ = std::move(name);
    return e;
}

BoolExpr BoolExpr::negate(BoolExpr c) {
    BoolExpr e;
    e.kind_ = Kind::Not;
    e.children_.push_back(std::move(c));
    return e;
}

BoolExpr BoolExpr::conj(BoolExpr a, BoolExpr b) {
    BoolExpr e;
    e.kind_ = Kind::And;
    e.children_.push_back(std::move(a));
    e.children_.push_back(std::move(b));
    return e;
}

BoolExpr BoolExpr::disj(BoolExpr a, BoolExpr b) {
    BoolExpr e;
    e.kind_ = Kind::Or;
    e.children_.push_back(std::move(a));
    e.children_.push_back(std::move(b));
    return e;
}

BoolExpr BoolExpr::literal_conjunction(const std::vector<std::string>& pos,
                                       const std::vector<std::string>& neg) {
    BoolExpr acc = constant(true);
    bool first = true;
    auto add = [&](BoolExpr lit) {
        if (first) {
            acc = std::move(lit);
            first = false;
        } else {
            acc = conj(std::move(acc), std::move(lit));
        }
    };
    for (const auto& v : pos) add(var(v));
    for (const auto& v : neg) add(negate(var(v)));
    return acc;
}

void BoolExpr::collect_vars(std::set<std::string>& out) const {
    if (kind_ == Kind::Var) out.insert(name_);
    for (const auto& c : children_) c.collect_vars(out);
}

std::set<std::string> BoolExpr::vars() const {
    std::set<std::string> out;
    collect_vars(out);
    return out;
}

bool BoolExpr::as_literal_conjunction(std::set<std::string>& pos,
                                      std::set<std::string>& neg) const {
    switch (kind_) {
        case Kind::True:
            return true;
        case Kind::Var:
            pos.insert(name_);
            return true;
        case Kind::Not:
            if (children_[0].kind_ != Kind::Var) return false;
            neg.insert(children_[0].name_);
            return true;
        case Kind::And:
            return children_[0].as_literal_conjunction(pos, neg) &&
                   children_[1].as_literal_conjunction(pos, neg);
        default:
            return false;
    }
}

std::string BoolExpr::str() const {
    switch (kind_) {
        case Kind::True: return "true";
        case Kind::False: return "false";
        case Kind::Var: return name_;
        case Kind::Not: {
            const BoolExpr& c = children_[0];
            if (c.kind_ == Kind::Var || c.kind_ == Kind::True || c.kind_ == Kind::False)
                return "!" + c.str();
            return "!(" + c.str() + ")";
        }
        case Kind::And: {
            auto wrap = [](const BoolExpr& e) {
                return e.kind_ == Kind::Or ? "(" + e.str() + ")" : e.str();
            };
            return wrap(children_[0]) + " & " + wrap(children_[1]);
        }
        case Kind::Or:
            return children_[0].str() + " | " + children_[1].str();
    }
    return "";
}

namespace {

struct ExprLexer {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1, col = 1;

    explicit ExprLexer(const std::string& t) : text(t) {}

    void advance() {
        if (pos < text.size()) {
            if (text[pos] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++pos;
        }
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            advance();
    }

    bool eof() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            advance();
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line, col); }

    std::string ident_or_quoted() {
        skip_ws();
        if (pos >= text.size()) fail("expected atom");
        char c = text[pos];
        if (c == '"' || c == '\'') {
            char quote = c;
            advance();
            std::string out;
            while (pos < text.size() && text[pos] != quote) {
                out += text[pos];
                advance();
            }
            if (pos >= text.size()) fail("unterminated quoted atom");
            advance();
            if (out.empty()) fail("empty quoted atom");
            return out;
        }
        if (!std::isalpha(static_cast<unsigned char>(c)) && c != '_')
            fail(std::string("unexpected character '") + c + "'");
        std::string out;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
            out += text[pos];
            advance();
        }
        return out;
    }
};

BoolExpr parse_or(ExprLexer& lex);

BoolExpr parse_primary(ExprLexer& lex) {
    if (lex.accept('(')) {
        BoolExpr e = parse_or(lex);
        if (!lex.accept(')')) lex.fail("expected ')'");
        return e;
    }
    if (lex.accept('!')) return BoolExpr::negate(parse_primary(lex));
    std::string name = lex.ident_or_quoted();
    if (name == "true") return BoolExpr::constant(true);
    if (name == "false") return BoolExpr::constant(false);
    return BoolExpr::var(name);
}

BoolExpr parse_and(ExprLexer& lex) {
    BoolExpr e = parse_primary(lex);
    while (lex.accept('&')) e = BoolExpr::conj(std::move(e), parse_primary(lex));
    return e;
}

BoolExpr parse_or(ExprLexer& lex) {
    BoolExpr e = parse_and(lex);
    while (lex.accept('|')) e = BoolExpr::disj(std::move(e), parse_and(lex));
    return e;
}

}  // namespace

BoolExpr parse_bool_expr(const std::string& text) {
    ExprLexer lex(text);
    if (lex.eof()) lex.fail("empty expression");
    BoolExpr e = parse_or(lex);
    if (!lex.eof()) lex.fail("trailing input after expression");
    return e;
}

}  // namespace posecgame
