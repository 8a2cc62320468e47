#include "posecgame/threat_model.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace posecgame {

using nlohmann::json;
using nlohmann::ordered_json;

bool Predicate::is_ground() const {
    return std::all_of(args.begin(), args.end(),
                       [](const Term& t) { return t.kind == Term::Kind::Constant; });
}

std::string Predicate::str() const {
    if (args.empty()) return name;
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ",";
        out += args[i].name;
    }
    return out + ")";
}

const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Condition: return "condition";
        case NodeKind::Derived: return "derived";
        case NodeKind::Rule: return "rule";
    }
    return "?";
}

const AttackGraphNode& AttackGraph::node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const AttackGraphNode& n, int v) { return n.id < v; });
    if (it == nodes.end() || it->id != id)
        throw Error("attack graph: unknown node id " + std::to_string(id));
    return *it;
}

bool AttackGraph::has_node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const AttackGraphNode& n, int v) { return n.id < v; });
    return it != nodes.end() && it->id == id;
}

std::vector<int> AttackGraph::predecessors(int id) const {
    std::vector<int> out;
    for (const auto& [f, t] : edges)
        if (t == id) out.push_back(f);
    return out;
}

std::vector<int> AttackGraph::successors(int id) const {
    std::vector<int> out;
    for (const auto& [f, t] : edges)
        if (f == id) out.push_back(t);
    return out;
}

std::vector<int> AttackGraph::rule_nodes() const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.kind == NodeKind::Rule) out.push_back(n.id);
    return out;
}

void AttackGraph::sort_canonical() {
    std::sort(nodes.begin(), nodes.end(),
              [](const AttackGraphNode& a, const AttackGraphNode& b) { return a.id < b.id; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

// ---------------------------------------------------------------------------
// Attack-model text format
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Ident, Quoted, Number, Symbol, End };
    Kind kind = Kind::End;
    std::string text;
    int line = 1, col = 1;
};

class ModelLexer {
  public:
    explicit ModelLexer(const std::string& text) : text_(text) { next(); }

    const Token& cur() const { return cur_; }

    void next() {
        skip();
        cur_.line = line_;
        cur_.col = col_;
        if (pos_ >= text_.size()) {
            cur_.kind = Token::Kind::End;
            cur_.text.clear();
            return;
        }
        char c = text_[pos_];
        if (c == ':' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
            cur_ = {Token::Kind::Symbol, ":-", line_, col_};
            advance();
            advance();
            return;
        }
        if (std::string("().,[]=").find(c) != std::string::npos) {
            cur_ = {Token::Kind::Symbol, std::string(1, c), line_, col_};
            advance();
            return;
        }
        if (c == '\'' || c == '"') {
            char quote = c;
            int l = line_, co = col_;
            advance();
            std::string out;
            while (pos_ < text_.size() && text_[pos_] != quote) {
                out += text_[pos_];
                advance();
            }
            if (pos_ >= text_.size()) throw ParseError("unterminated quoted constant", l, co);
            advance();
            cur_ = {Token::Kind::Quoted, out, l, co};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            int l = line_, co = col_;
            std::string out;
            out += c;
            advance();
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                    text_[pos_] == 'e' || text_[pos_] == 'E' || text_[pos_] == '-' ||
                    text_[pos_] == '+')) {
                // keep '.' only when followed by a digit, so clause periods survive
                if (text_[pos_] == '.' &&
                    !(pos_ + 1 < text_.size() &&
                      std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))))
                    break;
                out += text_[pos_];
                advance();
            }
            cur_ = {Token::Kind::Number, out, l, co};
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            int l = line_, co = col_;
            std::string out;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                out += text_[pos_];
                advance();
            }
            cur_ = {Token::Kind::Ident, out, l, co};
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
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

    void skip() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
                advance();
            if (pos_ < text_.size() && text_[pos_] == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
                continue;
            }
            break;
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_;
};

Term make_term(const Token& t) {
    if (t.kind == Token::Kind::Quoted || t.kind == Token::Kind::Number)
        return Term{Term::Kind::Constant, t.text};
    // constants start with a capital letter, variables with a small one
    if (std::isupper(static_cast<unsigned char>(t.text[0])))
        return Term{Term::Kind::Constant, t.text};
    return Term{Term::Kind::Variable, t.text};
}

Predicate parse_predicate(ModelLexer& lex) {
    const Token& t = lex.cur();
    if (t.kind != Token::Kind::Ident)
        throw ParseError("expected predicate name", t.line, t.col);
    if (std::isupper(static_cast<unsigned char>(t.text[0])))
        throw ParseError("predicate names start with a small letter", t.line, t.col);
    Predicate p;
    p.name = t.text;
    lex.next();
    if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == "(") {
        lex.next();
        for (;;) {
            const Token& a = lex.cur();
            if (a.kind != Token::Kind::Ident && a.kind != Token::Kind::Quoted &&
                a.kind != Token::Kind::Number)
                throw ParseError("expected term", a.line, a.col);
            p.args.push_back(make_term(a));
            lex.next();
            if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ",") {
                lex.next();
                continue;
            }
            if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ")") {
                lex.next();
                break;
            }
            throw ParseError("expected ',' or ')' in argument list", lex.cur().line,
                             lex.cur().col);
        }
    }
    return p;
}

std::map<std::string, std::string> parse_annotations(ModelLexer& lex) {
    std::map<std::string, std::string> out;
    if (!(lex.cur().kind == Token::Kind::Symbol && lex.cur().text == "[")) return out;
    lex.next();
    for (;;) {
        const Token& k = lex.cur();
        if (k.kind != Token::Kind::Ident)
            throw ParseError("expected annotation key", k.line, k.col);
        std::string key = k.text;
        lex.next();
        if (!(lex.cur().kind == Token::Kind::Symbol && lex.cur().text == "="))
            throw ParseError("expected '=' after annotation key", lex.cur().line, lex.cur().col);
        lex.next();
        const Token& v = lex.cur();
        if (v.kind != Token::Kind::Number && v.kind != Token::Kind::Ident &&
            v.kind != Token::Kind::Quoted)
            throw ParseError("expected annotation value", v.line, v.col);
        if (out.count(key)) throw ParseError("duplicate annotation '" + key + "'", k.line, k.col);
        out[key] = v.text;
        lex.next();
        if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ",") {
            lex.next();
            continue;
        }
        if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == "]") {
            lex.next();
            return out;
        }
        throw ParseError("expected ',' or ']' in annotations", lex.cur().line, lex.cur().col);
    }
}

double annotation_number(const std::map<std::string, std::string>& ann, const std::string& key,
                         double fallback, int line, int col) {
    auto it = ann.find(key);
    if (it == ann.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("annotation '" + key + "' is not a number", line, col);
    }
}

}  // namespace

AttackModel parse_attack_model(const std::string& text) {
    ModelLexer lex(text);
    AttackModel model;
    std::map<std::string, std::pair<std::size_t, std::pair<int, int>>> arity;  // name -> (arity, pos)
    std::vector<std::pair<Predicate, std::pair<int, int>>> fact_positions;
    int rule_counter = 0;

    auto check_arity = [&](const Predicate& p, int line, int col) {
        auto it = arity.find(p.name);
        if (it == arity.end()) {
            arity[p.name] = {p.args.size(), {line, col}};
        } else if (it->second.first != p.args.size()) {
            throw ParseError("predicate '" + p.name + "' used with arity " +
                                 std::to_string(p.args.size()) + " but previously " +
                                 std::to_string(it->second.first),
                             line, col);
        }
    };

    while (lex.cur().kind != Token::Kind::End) {
        int line = lex.cur().line, col = lex.cur().col;
        Predicate head = parse_predicate(lex);
        check_arity(head, line, col);
        std::vector<Predicate> body;
        if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ":-") {
            lex.next();
            for (;;) {
                int bl = lex.cur().line, bc = lex.cur().col;
                Predicate p = parse_predicate(lex);
                check_arity(p, bl, bc);
                body.push_back(std::move(p));
                if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ",") {
                    lex.next();
                    continue;
                }
                break;
            }
        }
        if (!(lex.cur().kind == Token::Kind::Symbol && lex.cur().text == "."))
            throw ParseError("expected '.' at end of clause", lex.cur().line, lex.cur().col);
        lex.next();
        auto ann = parse_annotations(lex);

        if (body.empty()) {
            if (!head.is_ground())
                throw ParseError("unsafe rule: fact '" + head.str() + "' contains variables",
                                 line, col);
            if (!ann.empty())
                throw ParseError("facts take no annotations", line, col);
            fact_positions.push_back({head, {line, col}});
            model.facts.push_back(std::move(head));
            continue;
        }

        // safety: every head variable must occur in the body
        std::set<std::string> body_vars;
        for (const auto& p : body)
            for (const auto& t : p.args)
                if (t.kind == Term::Kind::Variable) body_vars.insert(t.name);
        for (const auto& t : head.args)
            if (t.kind == Term::Kind::Variable && !body_vars.count(t.name))
                throw ParseError("unsafe rule: head variable '" + t.name +
                                     "' does not appear in the body",
                                 line, col);

        HornRule rule;
        ++rule_counter;
        rule.id = ann.count("id") ? ann.at("id") : "r" + std::to_string(rule_counter);
        rule.head = std::move(head);
        rule.body = std::move(body);
        rule.base_score = annotation_number(ann, "score", 1.0, line, col);
        rule.attack_cost = annotation_number(ann, "cost", 0.0, line, col);
        rule.damage = annotation_number(ann, "damage", 0.0, line, col);
        rule.line = line;
        if (rule.base_score < 0.0 || rule.base_score > 1.0)
            throw ParseError("score must lie in [0,1]", line, col);
        if (rule.attack_cost < 0.0) throw ParseError("cost must be nonnegative", line, col);
        if (rule.damage < 0.0) throw ParseError("damage must be nonnegative", line, col);
        for (const auto& k : {"score", "cost", "damage", "id"}) ann.erase(k);
        if (!ann.empty())
            throw ParseError("unknown annotation '" + ann.begin()->first + "'", line, col);
        model.rules.push_back(std::move(rule));
    }

    for (const auto& r : model.rules) model.derived.insert(r.head.name);
    for (const auto& [name, info] : arity)
        if (!model.derived.count(name)) model.primitives.insert(name);
    for (const auto& [fact, pos] : fact_positions)
        if (model.derived.count(fact.name))
            throw ParseError("predicate '" + fact.name +
                                 "' is stated as a fact but also derived by a rule",
                             pos.first, pos.second);

    std::set<std::string> rule_ids;
    for (const auto& r : model.rules)
        if (!rule_ids.insert(r.id).second)
            throw ParseError("duplicate rule id '" + r.id + "'", r.line, 1);
    return model;
}

Predicate parse_ground_predicate(const std::string& text) {
    ModelLexer lex(text);
    Predicate p = parse_predicate(lex);
    if (lex.cur().kind == Token::Kind::Symbol && lex.cur().text == ".") lex.next();
    if (lex.cur().kind != Token::Kind::End)
        throw ParseError("trailing input after predicate", lex.cur().line, lex.cur().col);
    if (!p.is_ground())
        throw ParseError("predicate '" + p.str() + "' is not ground", 1, 1);
    return p;
}

std::string atom_variable_name(const Predicate& p) {
    std::string out = p.name;
    for (const auto& t : p.args) {
        out += '_';
        for (char c : t.name) {
            if (std::isalnum(static_cast<unsigned char>(c)))
                out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            else
                out += '_';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

namespace {

using Subst = std::map<std::string, std::string>;  // variable -> constant

bool match_atom(const Predicate& pattern, const Predicate& fact, Subst& subst) {
    if (pattern.name != fact.name || pattern.args.size() != fact.args.size()) return false;
    std::vector<std::pair<std::string, std::string>> added;
    for (std::size_t i = 0; i < pattern.args.size(); ++i) {
        const Term& pt = pattern.args[i];
        const std::string& c = fact.args[i].name;
        if (pt.kind == Term::Kind::Constant) {
            if (pt.name != c) goto undo;
        } else {
            auto it = subst.find(pt.name);
            if (it == subst.end()) {
                subst[pt.name] = c;
                added.push_back({pt.name, c});
            } else if (it->second != c) {
                goto undo;
            }
        }
    }
    return true;
undo:
    for (const auto& [k, v] : added) subst.erase(k);
    return false;
}

Predicate apply_subst(const Predicate& p, const Subst& subst) {
    Predicate out;
    out.name = p.name;
    for (const auto& t : p.args) {
        if (t.kind == Term::Kind::Constant) {
            out.args.push_back(t);
        } else {
            auto it = subst.find(t.name);
            if (it == subst.end()) throw Error("unbound variable '" + t.name + "' in head");
            out.args.push_back(Term{Term::Kind::Constant, it->second});
        }
    }
    return out;
}

struct Instantiation {
    std::size_t rule_index = 0;
    std::vector<Predicate> body;
    Predicate head;

    auto key() const { return std::tuple(rule_index, body, head); }
};

}  // namespace

GroundResult ground(const AttackModel& model, const std::vector<Predicate>& facts,
                    const Predicate& goal) {
    if (!goal.is_ground()) throw Error("goal predicate must be ground");
    if (!model.derived.count(goal.name))
        throw Error("goal predicate '" + goal.name + "' is not a derived predicate");

    std::set<Predicate> known;
    for (const auto& f : model.facts) known.insert(f);
    for (const auto& f : facts) {
        if (!f.is_ground()) throw Error("fact '" + f.str() + "' is not ground");
        if (model.derived.count(f.name))
            throw Error("fact '" + f.str() + "' uses a derived predicate");
        known.insert(f);
    }

    // forward chaining to the fixpoint, joining body atoms left to right;
    // each round only keeps instantiations that touch a newly derived atom
    std::vector<Instantiation> instantiations;
    std::set<std::tuple<std::size_t, std::vector<Predicate>, Predicate>> seen;
    std::set<Predicate> delta = known;
    std::vector<Predicate> known_list(known.begin(), known.end());

    while (!delta.empty()) {
        std::set<Predicate> next_delta;
        for (std::size_t ri = 0; ri < model.rules.size(); ++ri) {
            const HornRule& rule = model.rules[ri];
            std::vector<std::pair<Subst, std::vector<Predicate>>> partial;
            partial.push_back({{}, {}});
            bool touches_delta_possible = false;
            for (const auto& atom : rule.body)
                if (std::any_of(delta.begin(), delta.end(), [&](const Predicate& d) {
                        return d.name == atom.name;
                    }))
                    touches_delta_possible = true;
            if (!touches_delta_possible) continue;
            for (const auto& atom : rule.body) {
                std::vector<std::pair<Subst, std::vector<Predicate>>> grown;
                for (const auto& [subst, bound] : partial) {
                    for (const auto& fact : known_list) {
                        Subst s = subst;
                        if (match_atom(atom, fact, s)) {
                            auto b = bound;
                            b.push_back(fact);
                            grown.push_back({std::move(s), std::move(b)});
                        }
                    }
                }
                partial = std::move(grown);
                if (partial.empty()) break;
            }
            for (const auto& [subst, bound] : partial) {
                bool touches = std::any_of(bound.begin(), bound.end(), [&](const Predicate& b) {
                    return delta.count(b) > 0;
                });
                if (!touches) continue;
                Instantiation inst;
                inst.rule_index = ri;
                inst.body = bound;
                inst.head = apply_subst(rule.head, subst);
                // self-supporting instantiations win no new capability
                if (std::find(bound.begin(), bound.end(), inst.head) != bound.end()) continue;
                if (!seen.insert(inst.key()).second) continue;
                if (!known.count(inst.head)) {
                    next_delta.insert(inst.head);
                    known.insert(inst.head);
                    known_list.push_back(inst.head);
                }
                instantiations.push_back(std::move(inst));
            }
        }
        delta = std::move(next_delta);
    }

    if (!known.count(goal)) return GroundResult{false, {}};

    // backward slice from the goal
    std::set<Predicate> atom_slice;
    std::set<std::size_t> inst_slice;
    std::deque<Predicate> work{goal};
    atom_slice.insert(goal);
    while (!work.empty()) {
        Predicate atom = work.front();
        work.pop_front();
        if (!model.derived.count(atom.name)) continue;
        for (std::size_t i = 0; i < instantiations.size(); ++i) {
            if (instantiations[i].head != atom || inst_slice.count(i)) continue;
            inst_slice.insert(i);
            for (const auto& b : instantiations[i].body)
                if (atom_slice.insert(b).second) work.push_back(b);
        }
    }

    // deterministic ids: breadth-first backward from the goal, children in
    // canonical label order; goal gets id 1
    AttackGraph g;
    std::map<Predicate, int> atom_id;
    std::map<std::size_t, int> inst_id;
    int next_id = 0;
    std::deque<std::pair<bool, std::size_t>> queue;  // (is_inst, index)
    std::vector<Predicate> atom_store;

    auto atom_index = [&](const Predicate& p) -> std::size_t {
        for (std::size_t i = 0; i < atom_store.size(); ++i)
            if (atom_store[i] == p) return i;
        atom_store.push_back(p);
        return atom_store.size() - 1;
    };

    auto visit_atom = [&](const Predicate& p) {
        if (atom_id.count(p)) return;
        atom_id[p] = ++next_id;
        bool derived = model.derived.count(p.name) > 0;
        g.nodes.push_back(AttackGraphNode{
            atom_id[p], derived ? NodeKind::Derived : NodeKind::Condition,
            atom_variable_name(p), std::nullopt});
        if (derived) queue.push_back({false, atom_index(p)});
    };

    visit_atom(goal);
    while (!queue.empty()) {
        auto [is_inst, idx] = queue.front();
        queue.pop_front();
        if (!is_inst) {
            const Predicate atom = atom_store[idx];
            // instantiations deriving this atom, in canonical order
            std::vector<std::size_t> insts;
            for (std::size_t i : inst_slice)
                if (instantiations[i].head == atom) insts.push_back(i);
            std::sort(insts.begin(), insts.end(), [&](std::size_t a, std::size_t b) {
                const auto& ia = instantiations[a];
                const auto& ib = instantiations[b];
                return std::tuple(model.rules[ia.rule_index].id, ia.body) <
                       std::tuple(model.rules[ib.rule_index].id, ib.body);
            });
            for (std::size_t i : insts) {
                if (!inst_id.count(i)) {
                    inst_id[i] = ++next_id;
                    const HornRule& rule = model.rules[instantiations[i].rule_index];
                    g.nodes.push_back(AttackGraphNode{inst_id[i], NodeKind::Rule, rule.id,
                                                      rule.base_score});
                    queue.push_back({true, i});
                }
                g.edges.push_back({inst_id[i], atom_id[atom]});
            }
        } else {
            const Instantiation& inst = instantiations[idx];
            auto body = inst.body;
            std::sort(body.begin(), body.end());
            body.erase(std::unique(body.begin(), body.end()), body.end());
            for (const auto& b : body) {
                visit_atom(b);
                g.edges.push_back({atom_id[b], inst_id[idx]});
            }
        }
    }

    g.goal = atom_id[goal];
    g.sort_canonical();
    return GroundResult{true, std::move(g)};
}

// ---------------------------------------------------------------------------
// MulVAL CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> parse_csv_row(const std::string& line, int lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted CSV field", lineno, 1);
    fields.push_back(cur);
    return fields;
}

int parse_int_field(const std::string& s, int lineno, const char* what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("malformed ") + what + " '" + s + "'", lineno, 1);
    }
}

}  // namespace

AttackGraph import_mulval(std::istream& vertices, std::istream& arcs) {
    AttackGraph g;
    std::string line;
    int lineno = 0;
    std::set<int> ids;
    while (std::getline(vertices, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = parse_csv_row(line, lineno);
        if (fields.size() != 4)
            throw ParseError("VERTICES row needs 4 fields (id,label,type,score), got " +
                                 std::to_string(fields.size()),
                             lineno, 1);
        AttackGraphNode n;
        n.id = parse_int_field(fields[0], lineno, "vertex id");
        n.label = fields[1];
        if (fields[2] == "LEAF")
            n.kind = NodeKind::Condition;
        else if (fields[2] == "OR")
            n.kind = NodeKind::Derived;
        else if (fields[2] == "AND")
            n.kind = NodeKind::Rule;
        else
            throw ParseError("unknown vertex type '" + fields[2] + "'", lineno, 1);
        try {
            std::size_t used = 0;
            double score = std::stod(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing");
            n.score = score;
        } catch (const std::exception&) {
            throw ParseError("malformed score '" + fields[3] + "'", lineno, 1);
        }
        if (!ids.insert(n.id).second)
            throw ParseError("duplicate vertex id " + std::to_string(n.id), lineno, 1);
        g.nodes.push_back(std::move(n));
    }
    if (g.nodes.empty()) throw ParseError("empty VERTICES file", 1, 1);

    lineno = 0;
    while (std::getline(arcs, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = parse_csv_row(line, lineno);
        if (fields.size() != 3)
            throw ParseError("ARCS row needs 3 fields (dst,src,weight), got " +
                                 std::to_string(fields.size()),
                             lineno, 1);
        int dst = parse_int_field(fields[0], lineno, "arc endpoint");
        int src = parse_int_field(fields[1], lineno, "arc endpoint");
        if (!ids.count(dst) || !ids.count(src))
            throw ParseError("arc references unknown vertex id " +
                                 std::to_string(ids.count(dst) ? src : dst),
                             lineno, 1);
        // MulVAL arcs point toward prerequisites; the derivation edge is reversed
        g.edges.push_back({src, dst});
    }
    g.sort_canonical();

    // goal: node 1 when it is derived, otherwise the smallest derived sink
    g.goal = 0;
    if (g.has_node(1) && g.node(1).kind == NodeKind::Derived) {
        g.goal = 1;
    } else {
        for (const auto& n : g.nodes)
            if (n.kind == NodeKind::Derived && g.successors(n.id).empty()) {
                g.goal = n.id;
                break;
            }
    }
    if (g.goal == 0) throw ParseError("cannot determine goal node", 1, 1);

    auto diagnostics = validate_graph(g);
    if (!diagnostics.empty()) throw Error("imported graph invalid: " + diagnostics.front());
    return g;
}

AttackGraph import_mulval_files(const std::string& vertices_path, const std::string& arcs_path) {
    std::ifstream v(vertices_path), a(arcs_path);
    if (!v) throw Error("cannot open " + vertices_path);
    if (!a) throw Error("cannot open " + arcs_path);
    return import_mulval(v, a);
}

void export_mulval(const AttackGraph& g, std::ostream& vertices, std::ostream& arcs) {
    auto quote = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            out += c;
        }
        return out + "\"";
    };
    for (const auto& n : g.nodes) {
        const char* type = n.kind == NodeKind::Condition ? "LEAF"
                           : n.kind == NodeKind::Derived ? "OR"
                                                         : "AND";
        std::ostringstream score;
        score << n.score.value_or(0.0);
        vertices << n.id << "," << quote(n.label) << ",\"" << type << "\"," << score.str()
                 << "\n";
    }
    for (const auto& [f, t] : g.edges) arcs << t << "," << f << ",-1\n";
}

// ---------------------------------------------------------------------------
// Scoring and validation
// ---------------------------------------------------------------------------

std::map<int, double> agp(const AttackGraph& g, const std::map<int, double>& base,
                          const std::map<int, double>& fact_scores) {
    // Kahn topological order; a leftover node means a cycle
    std::map<int, int> indegree;
    for (const auto& n : g.nodes) indegree[n.id] = 0;
    for (const auto& [f, t] : g.edges) indegree[t]++;
    std::deque<int> ready;
    for (const auto& [id, d] : indegree)
        if (d == 0) ready.push_back(id);
    std::vector<int> order;
    while (!ready.empty()) {
        int id = ready.front();
        ready.pop_front();
        order.push_back(id);
        for (int s : g.successors(id))
            if (--indegree[s] == 0) ready.push_back(s);
    }
    if (order.size() != g.nodes.size())
        throw Error("agp: attack graph contains a cycle");

    auto checked = [](double v, int id) {
        if (v < 0.0 || v > 1.0)
            throw Error("agp: score for node " + std::to_string(id) + " out of [0,1]");
        return v;
    };

    std::map<int, double> out;
    for (int id : order) {
        const AttackGraphNode& n = g.node(id);
        switch (n.kind) {
            case NodeKind::Condition: {
                auto it = fact_scores.find(id);
                double v = it != fact_scores.end() ? it->second : n.score.value_or(1.0);
                out[id] = checked(v, id);
                break;
            }
            case NodeKind::Rule: {
                auto it = base.find(id);
                double b;
                if (it != base.end())
                    b = it->second;
                else if (n.score)
                    b = *n.score;
                else
                    throw Error("agp: rule node " + std::to_string(id) + " has no base score");
                double v = checked(b, id);
                for (int p : g.predecessors(id)) v *= out.at(p);
                out[id] = v;
                break;
            }
            case NodeKind::Derived: {
                // noisy-OR over the incoming rules
                double miss = 1.0;
                for (int p : g.predecessors(id)) miss *= 1.0 - out.at(p);
                out[id] = 1.0 - miss;
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> validate_graph(const AttackGraph& g) {
    std::vector<std::string> out;
    if (g.nodes.empty()) {
        out.push_back("graph is empty");
        return out;
    }
    if (!g.has_node(g.goal))
        out.push_back("goal node " + std::to_string(g.goal) + " does not exist");
    else if (g.node(g.goal).kind != NodeKind::Derived)
        out.push_back("goal node " + std::to_string(g.goal) + " is not a derived node");

    for (const auto& [f, t] : g.edges) {
        if (!g.has_node(f) || !g.has_node(t)) {
            out.push_back("edge (" + std::to_string(f) + "," + std::to_string(t) +
                          ") references a missing node");
            continue;
        }
        NodeKind fk = g.node(f).kind, tk = g.node(t).kind;
        bool ok = (fk != NodeKind::Rule && tk == NodeKind::Rule) ||
                  (fk == NodeKind::Rule && tk == NodeKind::Derived);
        if (!ok)
            out.push_back("edge (" + std::to_string(f) + "," + std::to_string(t) +
                          ") violates (condition|derived)->rule / rule->derived typing");
    }
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::Rule) {
            auto succ = g.successors(n.id);
            if (succ.size() != 1)
                out.push_back("rule node " + std::to_string(n.id) + " has out-degree " +
                              std::to_string(succ.size()) + ", expected 1");
        }
        if (n.score && (*n.score < 0.0 || *n.score > 1.0))
            out.push_back("node " + std::to_string(n.id) + " score out of [0,1]");
    }

    // connectivity, ignoring edge direction
    std::set<int> reached{g.nodes.front().id};
    std::deque<int> work{g.nodes.front().id};
    while (!work.empty()) {
        int id = work.front();
        work.pop_front();
        for (const auto& [f, t] : g.edges) {
            int next = -1;
            if (f == id) next = t;
            if (t == id) next = f;
            if (next >= 0 && reached.insert(next).second) work.push_back(next);
        }
    }
    if (reached.size() != g.nodes.size())
        out.push_back("graph is not connected (" + std::to_string(reached.size()) + " of " +
                      std::to_string(g.nodes.size()) + " nodes reachable)");
    return out;
}

// ---------------------------------------------------------------------------
// Attack-graph JSON
// ---------------------------------------------------------------------------

std::string attack_graph_to_json(const AttackGraph& g) {
    ordered_json doc;
    doc["nodes"] = ordered_json::array();
    for (const auto& n : g.nodes) {
        ordered_json jn;
        jn["id"] = n.id;
        jn["kind"] = node_kind_name(n.kind);
        jn["label"] = n.label;
        if (n.score) jn["score"] = *n.score;
        doc["nodes"].push_back(std::move(jn));
    }
    doc["edges"] = ordered_json::array();
    for (const auto& [f, t] : g.edges) doc["edges"].push_back({f, t});
    doc["goal"] = g.goal;
    return doc.dump(2) + "\n";
}

AttackGraph attack_graph_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), 1, 1);
    }
    AttackGraph g;
    try {
        for (const auto& jn : doc.at("nodes")) {
            AttackGraphNode n;
            n.id = jn.at("id").get<int>();
            std::string kind = jn.at("kind").get<std::string>();
            if (kind == "condition")
                n.kind = NodeKind::Condition;
            else if (kind == "derived")
                n.kind = NodeKind::Derived;
            else if (kind == "rule")
                n.kind = NodeKind::Rule;
            else
                throw Error("unknown node kind '" + kind + "'");
            n.label = jn.at("label").get<std::string>();
            if (jn.contains("score")) n.score = jn.at("score").get<double>();
            g.nodes.push_back(std::move(n));
        }
        for (const auto& je : doc.at("edges"))
            g.edges.push_back({je.at(0).get<int>(), je.at(1).get<int>()});
        g.goal = doc.at("goal").get<int>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("attack-graph JSON: ") + e.what(), 1, 1);
    }
    g.sort_canonical();
    return g;
}

}  // namespace posecgame
