#include "cqe/textio.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

namespace cqe {

parse_error::parse_error(int line, int column, const std::string& message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

enum class tok { ident, quoted, anon, skolem, lparen, rparen, comma, period, colon, arrow, turnstile, bar, equals, end };

struct token {
    tok kind = tok::end;
    std::string text;
    int line = 1;
    int column = 1;
};

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '\'';
}

class lexer {
public:
    explicit lexer(std::string_view text) : text_(text) {}

    token next() {
        skip_space();
        token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= text_.size()) return t;
        const char c = text_[pos_];
        auto single = [&](tok k) {
            advance();
            t.kind = k;
            t.text = std::string(1, c);
            return t;
        };
        switch (c) {
            case '(': return single(tok::lparen);
            case ')': return single(tok::rparen);
            case ',': return single(tok::comma);
            case '.': return single(tok::period);
            case '|': return single(tok::bar);
            case '=': return single(tok::equals);
            case ':':
                if (peek(1) == '-') {
                    advance(2);
                    t.kind = tok::turnstile;
                    t.text = ":-";
                    return t;
                }
                return single(tok::colon);
            case '-':
                if (peek(1) == '>') {
                    advance(2);
                    t.kind = tok::arrow;
                    t.text = "->";
                    return t;
                }
                break;
            case '"': return quoted(t);
            default: break;
        }
        if (ident_char(c)) {
            t.text = read_ident();
            t.kind = tok::ident;
            if ((t.text == "_anon" || t.text == "_sk") && pos_ < text_.size() && text_[pos_] == ':') {
                t.kind = t.text == "_anon" ? tok::anon : tok::skolem;
                advance();
                if (pos_ >= text_.size() || !ident_char(text_[pos_]))
                    throw parse_error(line_, column_, "expected a name after '" + t.text + ":'");
                t.text = read_ident();
            }
            return t;
        }
        throw parse_error(line_, column_, std::string("unexpected character '") + c + "'");
    }

private:
    char peek(std::size_t k) const { return pos_ + k < text_.size() ? text_[pos_ + k] : '\0'; }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i, ++pos_) {
            if (text_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
        }
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c)) != 0) {
                advance();
            } else if (c == '%' || c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string read_ident() {
        const auto start = pos_;
        while (pos_ < text_.size() && ident_char(text_[pos_])) advance();
        return std::string(text_.substr(start, pos_ - start));
    }

    token quoted(token t) {
        advance();
        std::string out;
        while (true) {
            if (pos_ >= text_.size()) throw parse_error(t.line, t.column, "unterminated quoted constant");
            const char c = text_[pos_];
            if (c == '"') break;
            if (c == '\\' && pos_ + 1 < text_.size()) {
                advance();
                out += text_[pos_];
                advance();
                continue;
            }
            out += c;
            advance();
        }
        advance();
        t.kind = tok::quoted;
        t.text = std::move(out);
        return t;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

bool is_variable_name(std::string_view s) {
    return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) != 0 || s[0] == '_');
}

class parser {
public:
    explicit parser(std::string_view text) : lex_(text) { shift(); }

    program parse_program() {
        program p;
        while (cur_.kind != tok::end) statement(p);
        return p;
    }

    conjunctive_query standalone_query() {
        auto q = query_definition();
        if (cur_.kind == tok::period) shift();
        expect_end();
        return q;
    }

    union_query standalone_union() {
        union_query u;
        while (true) {
            u.disjuncts.push_back(boolean_disjunct());
            if (cur_.kind != tok::bar) break;
            shift();
        }
        if (cur_.kind == tok::period) shift();
        expect_end();
        return u;
    }

    atom standalone_atom() {
        auto a = parse_atom_token();
        if (cur_.kind == tok::period) shift();
        expect_end();
        return a;
    }

private:
    void shift() { cur_ = lex_.next(); }

    [[noreturn]] void fail(const token& t, const std::string& message) {
        throw parse_error(t.line, t.column, message);
    }

    token expect(tok k, std::string_view what) {
        if (cur_.kind != k) fail(cur_, "expected " + std::string(what) + (cur_.kind == tok::end ? " at end of input" : " before '" + cur_.text + "'"));
        token t = cur_;
        shift();
        return t;
    }

    void expect_end() {
        if (cur_.kind != tok::end) fail(cur_, "unexpected '" + cur_.text + "'");
    }

    void statement(program& p) {
        const token kw = expect(tok::ident, "a statement keyword");
        expect(tok::colon, "':'");
        if (kw.text == "rule") {
            for (auto& r : rule_statement(kw)) p.rules.push_back(std::move(r));
        } else if (kw.text == "fact") {
            const token at = cur_;
            auto a = parse_atom_token();
            if (!a.is_ground()) fail(at, "fact " + to_string(a) + " contains a variable");
            p.facts.insert(a);
        } else if (kw.text == "policy") {
            if (p.policy) fail(kw, "a program may declare at most one policy");
            p.policy = query_definition();
        } else if (kw.text == "query") {
            const token at = cur_;
            auto q = query_definition();
            p.queries.emplace_back(at.text, std::move(q));
        } else if (kw.text == "option") {
            const token key = expect(tok::ident, "an option name");
            expect(tok::equals, "'='");
            token value = cur_;
            if (value.kind != tok::ident && value.kind != tok::quoted) fail(value, "expected an option value");
            shift();
            p.options[key.text] = value.text;
        } else {
            fail(kw, "unknown statement '" + kw.text + "'");
        }
        expect(tok::period, "'.'");
    }

    std::vector<rule> rule_statement(const token& start) {
        rule r;
        r.body = atom_list();
        expect(tok::arrow, "'->'");
        if (cur_.kind == tok::ident && cur_.text == "exists") {
            shift();
            while (true) {
                const token v = expect(tok::ident, "an existential variable");
                if (!is_variable_name(v.text)) fail(v, "existential variable must start lowercase");
                r.existentials.push_back(term::variable(v.text));
                if (cur_.kind != tok::comma) break;
                shift();
            }
            expect(tok::period, "'.' after the existential variables");
        }
        r.head = atom_list();
        const auto body_vars = variables_of(r.body);
        for (const auto& v : r.existentials)
            if (body_vars.count(v)) fail(start, "existential variable " + v.name() + " occurs in the body");
        for (const auto& a : r.head)
            for (const auto& t : a.arguments())
                if (t.is_variable() && !body_vars.count(t) &&
                    std::find(r.existentials.begin(), r.existentials.end(), t) == r.existentials.end())
                    fail(start, "unsafe rule: head variable " + t.name() + " does not occur in the body");
        if (!r.existentials.empty()) {
            const auto types = profile_templates(r);
            if (std::find(types.begin(), types.end(), 3) == types.end())
                fail(start, "existential rule does not have the form A(x) -> exists y. R(x,y), B(y)");
            return {r};
        }
        std::vector<rule> out;
        for (const auto& h : r.head) out.push_back(rule{r.body, {h}, {}});
        return out;
    }

    conjunctive_query query_definition() {
        const token head = expect(tok::ident, "a query head");
        conjunctive_query q;
        expect(tok::lparen, "'('");
        if (cur_.kind != tok::rparen) {
            while (true) {
                const token v = expect(tok::ident, "a free variable");
                if (!is_variable_name(v.text)) fail(v, "free variable must start lowercase");
                q.free.push_back(term::variable(v.text));
                if (cur_.kind != tok::comma) break;
                shift();
            }
        }
        expect(tok::rparen, "')'");
        expect(tok::turnstile, "':-'");
        if (cur_.kind == tok::period || cur_.kind == tok::end) fail(cur_, "query body is empty");
        q.body = atom_list();
        const auto vars = variables_of(q.body);
        for (const auto& v : q.free)
            if (!vars.count(v)) fail(head, "free variable " + v.name() + " does not occur in the body");
        return q;
    }

    conjunctive_query boolean_disjunct() {
        if (cur_.kind == tok::ident && cur_.text == "exists") {
            shift();
            while (true) {
                const token v = expect(tok::ident, "a variable");
                if (!is_variable_name(v.text)) fail(v, "variable must start lowercase");
                if (cur_.kind != tok::comma) break;
                shift();
            }
            expect(tok::period, "'.'");
        }
        conjunctive_query q;
        q.body = atom_list();
        return q;
    }

    std::vector<atom> atom_list() {
        std::vector<atom> out;
        while (true) {
            out.push_back(parse_atom_token());
            if (cur_.kind != tok::comma) break;
            shift();
        }
        return out;
    }

    term term_from(const token& t) {
        switch (t.kind) {
            case tok::quoted: return term::constant(t.text);
            case tok::anon: return term::anonymous(t.text);
            case tok::skolem: return term::skolem(t.text);
            case tok::ident: return is_variable_name(t.text) ? term::variable(t.text) : term::constant(t.text);
            default: fail(t, "expected a term");
        }
    }

    bool is_term_token(tok k) const { return k == tok::ident || k == tok::quoted || k == tok::anon || k == tok::skolem; }

    atom parse_atom_token() {
        const token first = cur_;
        if (!is_term_token(first.kind)) fail(first, "expected an atom");
        shift();
        if (cur_.kind == tok::equals) {
            shift();
            const token second = cur_;
            if (!is_term_token(second.kind)) fail(second, "expected a term after '='");
            shift();
            return checked(first, atom(std::string(equality_name), {term_from(first), term_from(second)}));
        }
        if (first.kind != tok::ident) fail(first, "expected a predicate name");
        std::vector<term> args;
        if (cur_.kind == tok::lparen) {
            shift();
            if (cur_.kind != tok::rparen) {
                while (true) {
                    const token t = cur_;
                    if (!is_term_token(t.kind)) fail(t, "expected a term");
                    shift();
                    args.push_back(term_from(t));
                    if (cur_.kind != tok::comma) break;
                    shift();
                }
            }
            expect(tok::rparen, "')'");
        }
        if (args.size() > 2) fail(first, "predicate " + first.text + " has arity above two");
        return checked(first, atom(intern(first.text), args));
    }

    atom checked(const token& at, atom a) {
        auto [it, inserted] = arities_.emplace(a.predicate_name(), a.arity);
        if (!inserted && it->second != a.arity)
            fail(at, "arity mismatch for " + a.predicate_name() + ": used with " + std::to_string(it->second) +
                         " and " + std::to_string(a.arity) + " arguments");
        return a;
    }

    lexer lex_;
    token cur_;
    std::map<std::string, int> arities_;
};

bool plain_constant_name(std::string_view s) {
    if (s.empty() || is_variable_name(s)) return false;
    if (s == "exists") return false;
    return std::all_of(s.begin(), s.end(), ident_char);
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

conjunctive_query rename_for_display(const conjunctive_query& q) {
    static const std::vector<std::string> names = {"y", "z", "w", "u", "v", "x"};
    std::map<term, term> rename;
    std::size_t next = 0;
    conjunctive_query out = q;
    for (auto& a : out.body)
        for (int i = 0; i < a.arity; ++i) {
            if (!a.args[i].is_variable()) continue;
            auto it = rename.find(a.args[i]);
            if (it == rename.end()) {
                const auto name = next < names.size() ? names[next] : "y" + std::to_string(next - names.size() + 1);
                ++next;
                it = rename.emplace(a.args[i], term::variable(name)).first;
            }
            a.args[i] = it->second;
        }
    return out;
}

}  // namespace

profile_mode program::profile() const {
    auto it = options.find("profile");
    return it == options.end() ? profile_mode::none : parse_profile_mode(it->second);
}

program parse_program(std::string_view text) { return parser(text).parse_program(); }

conjunctive_query parse_query(std::string_view text) { return parser(text).standalone_query(); }

union_query parse_union_query(std::string_view text) { return parser(text).standalone_union(); }

atom parse_atom(std::string_view text) { return parser(text).standalone_atom(); }

profile_mode parse_profile_mode(std::string_view name) {
    if (name == "none") return profile_mode::none;
    if (name == "rl") return profile_mode::rl;
    if (name == "ql") return profile_mode::ql;
    if (name == "el") return profile_mode::el;
    throw std::invalid_argument("unknown profile '" + std::string(name) + "'");
}

std::string to_string(profile_mode m) {
    switch (m) {
        case profile_mode::rl: return "rl";
        case profile_mode::ql: return "ql";
        case profile_mode::el: return "el";
        default: return "none";
    }
}

std::string to_string(const term& t) {
    const auto name = t.name();
    switch (t.kind()) {
        case term_kind::variable: return name;
        case term_kind::anonymous: return "_anon:" + name;
        case term_kind::skolem: return "_sk:" + name;
        case term_kind::constant: return plain_constant_name(name) ? name : quote(name);
    }
    return name;
}

std::string to_string(const atom& a) {
    if (a.is_equality()) return to_string(a.args[0]) + " = " + to_string(a.args[1]);
    std::string out = a.predicate_name() + "(";
    for (int i = 0; i < a.arity; ++i) {
        if (i != 0) out += ",";
        out += to_string(a.args[i]);
    }
    return out + ")";
}

std::string to_string(std::span<const atom> atoms) {
    std::string out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (i != 0) out += ", ";
        out += to_string(atoms[i]);
    }
    return out;
}

std::string to_string(const rule& r) {
    std::string out = to_string(r.body) + " -> ";
    if (!r.existentials.empty()) {
        out += "exists ";
        for (std::size_t i = 0; i < r.existentials.size(); ++i) {
            if (i != 0) out += ",";
            out += to_string(r.existentials[i]);
        }
        out += ". ";
    }
    return out + to_string(r.head);
}

std::string to_string(const conjunctive_query& q) {
    std::string out = "Q(";
    for (std::size_t i = 0; i < q.free.size(); ++i) {
        if (i != 0) out += ",";
        out += to_string(q.free[i]);
    }
    return out + ") :- " + to_string(q.body);
}

std::string format_boolean(const conjunctive_query& q) {
    const auto shown = rename_for_display(q);
    const auto vars = shown.variables();
    std::string out;
    if (!vars.empty()) {
        out = "exists ";
        for (std::size_t i = 0; i < vars.size(); ++i) {
            if (i != 0) out += ",";
            out += to_string(vars[i]);
        }
        out += ". ";
    }
    return out + to_string(shown.body);
}

std::string to_string(const union_query& u) {
    std::string out;
    for (std::size_t i = 0; i < u.disjuncts.size(); ++i) {
        if (i != 0) out += " | ";
        out += format_boolean(u.disjuncts[i]);
    }
    return out;
}

std::string to_string(const tuple& t) {
    std::string out = "(";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i != 0) out += ",";
        out += to_string(t[i]);
    }
    return out + ")";
}

std::string serialize(const program& p) {
    std::ostringstream out;
    for (const auto& [key, value] : p.options)
        out << "option: " << key << " = " << (plain_constant_name(value) || is_variable_name(value) ? value : quote(value)) << ".\n";
    for (const auto& r : p.rules) out << "rule: " << to_string(r) << ".\n";
    out << serialize(p.facts);
    if (p.policy) out << "policy: " << to_string(*p.policy) << ".\n";
    for (const auto& [name, q] : p.queries) {
        auto text = to_string(q);
        out << "query: " << name << text.substr(1) << ".\n";
    }
    return out.str();
}

std::string serialize(const dataset& d) {
    std::string out;
    for (const auto& f : d.sorted()) out += "fact: " + to_string(f) + ".\n";
    return out;
}

std::string serialize(const union_query& u) { return to_string(u); }

std::string answers_json(const answer_set& answers) {
    std::vector<tuple> rows(answers.begin(), answers.end());
    std::sort(rows.begin(), rows.end(), [](const tuple& a, const tuple& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                            [](const term& x, const term& y) { return text_less(x, y); });
    });
    nlohmann::json j;
    j["answers"] = nlohmann::json::array();
    for (const auto& row : rows) {
        auto r = nlohmann::json::array();
        for (const auto& t : row) r.push_back(to_string(t));
        j["answers"].push_back(r);
    }
    return j.dump();
}

std::string dataset_json(const dataset& d) {
    nlohmann::json j;
    j["facts"] = nlohmann::json::array();
    for (const auto& f : d.sorted()) j["facts"].push_back(to_string(f));
    return j.dump(2);
}

std::string union_query_json(const union_query& u) {
    nlohmann::json j;
    j["disjuncts"] = nlohmann::json::array();
    for (const auto& q : u.disjuncts) j["disjuncts"].push_back(format_boolean(q));
    return j.dump(2);
}

dataset dataset_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    dataset d;
    for (const auto& f : j.at("facts")) d.insert(parse_atom(f.get<std::string>()));
    return d;
}

union_query union_query_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    union_query u;
    for (const auto& q : j.at("disjuncts")) {
        auto parsed = parse_union_query(q.get<std::string>());
        for (auto& d : parsed.disjuncts) u.disjuncts.push_back(std::move(d));
    }
    return u;
}

}  // namespace cqe
