#include "cqe/model.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <unordered_map>

namespace cqe {

namespace {

constexpr std::uint32_t null_bit = 0x80000000u;

struct symbol_pool {
    std::shared_mutex mutex;
    std::deque<std::string> names;
    std::unordered_map<std::string_view, symbol> ids;

    symbol_pool() { add(""); }

    symbol add(std::string_view name) {
        names.emplace_back(name);
        const auto id = static_cast<symbol>(names.size() - 1);
        ids.emplace(names.back(), id);
        return id;
    }
};

symbol_pool& pool() {
    static symbol_pool p;
    return p;
}

std::atomic<std::uint32_t> null_counter{0};

}  // namespace

symbol intern(std::string_view name) {
    auto& p = pool();
    {
        std::shared_lock lock(p.mutex);
        if (auto it = p.ids.find(name); it != p.ids.end()) return it->second;
    }
    std::unique_lock lock(p.mutex);
    if (auto it = p.ids.find(name); it != p.ids.end()) return it->second;
    return p.add(name);
}

const std::string& symbol_name(symbol s) {
    auto& p = pool();
    std::shared_lock lock(p.mutex);
    return p.names.at(s);
}

term term::fresh_null() {
    return {term_kind::anonymous, null_bit | (++null_counter)};
}

std::string term::name() const {
    if (kind_ == term_kind::anonymous && (id_ & null_bit) != 0)
        return "null" + std::to_string(id_ & ~null_bit);
    return symbol_name(id_);
}

bool text_less(const term& a, const term& b) {
    if (a.kind() != b.kind()) return a.kind() < b.kind();
    if (a.id() == b.id()) return false;
    return a.name() < b.name();
}

atom::atom(std::string_view predicate, std::initializer_list<term> arguments)
    : atom(intern(predicate), std::span<const term>(arguments.begin(), arguments.size())) {}

atom::atom(symbol predicate, std::span<const term> arguments) : pred(predicate) {
    if (arguments.size() > 2)
        throw model_error("predicate " + symbol_name(predicate) + " has arity above two");
    arity = static_cast<std::uint8_t>(arguments.size());
    std::copy(arguments.begin(), arguments.end(), args.begin());
}

bool atom::is_ground() const {
    return std::all_of(args.begin(), args.begin() + arity, [](const term& t) { return t.is_ground(); });
}

bool atom::is_equality() const { return predicate_name() == equality_name; }

bool text_less(const atom& a, const atom& b) {
    if (a.pred != b.pred) return a.predicate_name() < b.predicate_name();
    if (a.arity != b.arity) return a.arity < b.arity;
    for (int i = 0; i < a.arity; ++i) {
        if (a.args[i] == b.args[i]) continue;
        return text_less(a.args[i], b.args[i]);
    }
    return false;
}

std::size_t atom_hash::operator()(const atom& a) const noexcept {
    std::size_t h = a.pred * 0x9e3779b97f4a7c15ull;
    for (int i = 0; i < a.arity; ++i) {
        const std::size_t t = (static_cast<std::size_t>(a.args[i].kind()) << 32) | a.args[i].id();
        h ^= t + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

std::set<term> variables_of(std::span<const atom> atoms) {
    std::set<term> out;
    for (const auto& a : atoms)
        for (const auto& t : a.arguments())
            if (t.is_variable()) out.insert(t);
    return out;
}

namespace {

std::vector<term> ordered_variables(std::span<const atom> atoms) {
    std::vector<term> out;
    for (const auto& a : atoms)
        for (const auto& t : a.arguments())
            if (t.is_variable() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
}

void add_to_signature(signature& sig, const atom& a) {
    sig.emplace(a.predicate_name(), a.arity);
}

}  // namespace

std::vector<term> rule::body_variables() const { return ordered_variables(body); }

signature ontology::sig() const {
    signature s;
    for (const auto& r : rules) {
        for (const auto& a : r.body) add_to_signature(s, a);
        for (const auto& a : r.head) add_to_signature(s, a);
    }
    return s;
}

bool ontology::is_datalog() const {
    return std::all_of(rules.begin(), rules.end(), [](const rule& r) { return r.is_datalog(); });
}

void dataset::insert(const atom& a) {
    if (!a.is_ground()) throw model_error("dataset facts must be ground");
    facts.insert(a);
}

std::set<term> dataset::terms() const {
    std::set<term> out;
    for (const auto& f : facts)
        for (const auto& t : f.arguments()) out.insert(t);
    return out;
}

signature dataset::sig() const {
    signature s;
    for (const auto& f : facts) add_to_signature(s, f);
    return s;
}

std::vector<atom> dataset::sorted() const {
    std::vector<atom> out(facts.begin(), facts.end());
    std::sort(out.begin(), out.end(), [](const atom& a, const atom& b) { return text_less(a, b); });
    return out;
}

std::vector<term> conjunctive_query::variables() const { return ordered_variables(body); }

std::vector<term> conjunctive_query::existential_variables() const {
    std::vector<term> out;
    for (const auto& v : variables())
        if (std::find(free.begin(), free.end(), v) == free.end()) out.push_back(v);
    return out;
}

conjunctive_query conjunctive_query::instantiate(std::span<const term> tuple) const {
    if (tuple.size() != free.size()) throw model_error("tuple arity does not match free variables");
    conjunctive_query q;
    q.body = body;
    for (auto& a : q.body)
        for (int i = 0; i < a.arity; ++i) {
            auto it = std::find(free.begin(), free.end(), a.args[i]);
            if (it != free.end()) a.args[i] = tuple[it - free.begin()];
        }
    return q;
}

ontology cqe_instance::with_policy_rule() const {
    ontology o = onto;
    o.rules.push_back(policy_rule);
    return o;
}

bool is_tree_shaped(std::span<const atom> body) {
    std::vector<term> vertices;
    auto index_of = [&](const term& t) {
        auto it = std::find(vertices.begin(), vertices.end(), t);
        if (it != vertices.end()) return static_cast<std::size_t>(it - vertices.begin());
        vertices.push_back(t);
        return vertices.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& a : body) {
        if (a.arity == 1) index_of(a.args[0]);
        if (a.arity == 2) {
            auto u = index_of(a.args[0]);
            auto v = index_of(a.args[1]);
            edges.emplace_back(u, v);
        }
    }
    if (vertices.empty()) return true;
    if (edges.size() != vertices.size() - 1) return false;
    std::vector<std::size_t> parent(vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (auto [u, v] : edges) {
        auto ru = find(u), rv = find(v);
        if (ru == rv) return false;
        parent[ru] = rv;
    }
    return true;
}

shape_flags classify_shape(const rule& r) {
    shape_flags f;
    f.datalog = r.is_datalog();
    const auto vars = variables_of(r.body);
    auto is_guard = [&](const atom& a) {
        return std::all_of(vars.begin(), vars.end(), [&](const term& v) {
            return std::find(a.args.begin(), a.args.begin() + a.arity, v) != a.args.begin() + a.arity;
        });
    };
    f.guarded = std::any_of(r.body.begin(), r.body.end(), is_guard);
    f.multi_linear = std::all_of(r.body.begin(), r.body.end(), is_guard);
    f.linear = r.body.size() == 1;
    f.tree_shaped = is_tree_shaped(r.body);
    return f;
}

shape_flags classify_shape(const ontology& o) {
    shape_flags f;
    for (const auto& r : o.rules) {
        const auto g = classify_shape(r);
        f.datalog = f.datalog && g.datalog;
        f.guarded = f.guarded && g.guarded;
        f.linear = f.linear && g.linear;
        f.multi_linear = f.multi_linear && g.multi_linear;
        f.tree_shaped = f.tree_shaped && g.tree_shaped;
    }
    return f;
}

namespace {

struct profile_template {
    int number;
    rule shape;
};

const std::vector<profile_template>& profile_table() {
    static const std::vector<profile_template> table = [] {
        const auto x = term::variable("x"), y = term::variable("y"), z = term::variable("z");
        const auto y1 = term::variable("y1"), y2 = term::variable("y2");
        const auto a = term::skolem("$const");
        const std::string eq(equality_name);
        std::vector<profile_template> t;
        t.push_back({1, {{atom("A", {x}), atom("R", {x, y1}), atom("B", {y1}), atom("R", {x, y2}), atom("B", {y2})},
                         {atom(eq, {y1, y2})}, {}}});
        t.push_back({2, {{atom("R", {x, y})}, {atom("S", {x, y})}, {}}});
        t.push_back({3, {{atom("A", {x})}, {atom("R", {x, y}), atom("B", {y})}, {y}}});
        t.push_back({4, {{atom("A", {x})}, {atom(eq, {x, a})}, {}}});
        t.push_back({5, {{atom("R", {x, y}), atom("S", {y, z})}, {atom("T", {x, z})}, {}}});
        t.push_back({6, {{atom("A", {x}), atom("B", {x})}, {atom("C", {x})}, {}}});
        t.push_back({7, {{atom("A", {x}), atom("R", {x, y})}, {atom("B", {y})}, {}}});
        t.push_back({8, {{atom("R", {x, y})}, {atom("S", {y, x})}, {}}});
        t.push_back({9, {{atom("R", {x, a})}, {atom("B", {x})}, {}}});
        t.push_back({10, {{atom("R", {x, y})}, {atom("A", {y})}, {}}});
        t.push_back({11, {{atom("A", {x})}, {atom("R", {x, a})}, {}}});
        t.push_back({12, {{atom("A", {x})}, {atom("B", {x})}, {}}});
        t.push_back({13, {{atom("R", {x, y}), atom("B", {y})}, {atom("A", {x})}, {}}});
        return t;
    }();
    return table;
}

struct template_matcher {
    std::map<symbol, symbol> preds;
    std::map<term, term> vars;
    std::map<term, term> vars_inverse;

    bool term_match(const term& pattern, const term& actual) {
        if (pattern.kind() == term_kind::skolem) return actual.is_ground();
        if (!actual.is_variable()) return false;
        auto it = vars.find(pattern);
        auto jt = vars_inverse.find(actual);
        if (it == vars.end() && jt == vars_inverse.end()) {
            vars.emplace(pattern, actual);
            vars_inverse.emplace(actual, pattern);
            return true;
        }
        return it != vars.end() && it->second == actual;
    }

    bool atom_match(const atom& pattern, const atom& actual) {
        if (pattern.arity != actual.arity) return false;
        if (pattern.is_equality() != actual.is_equality()) return false;
        if (!pattern.is_equality()) {
            auto it = preds.find(pattern.pred);
            if (it == preds.end())
                preds.emplace(pattern.pred, actual.pred);
            else if (it->second != actual.pred)
                return false;
        }
        for (int i = 0; i < pattern.arity; ++i)
            if (!term_match(pattern.args[i], actual.args[i])) return false;
        return true;
    }
};

bool match_sequence(template_matcher m, const std::vector<atom>& patterns, std::vector<atom> actual,
                    const std::function<bool(template_matcher&)>& then) {
    if (patterns.size() != actual.size()) return false;
    std::vector<std::size_t> order(actual.size());
    std::iota(order.begin(), order.end(), 0);
    do {
        template_matcher trial = m;
        bool ok = true;
        for (std::size_t i = 0; i < patterns.size() && ok; ++i) ok = trial.atom_match(patterns[i], actual[order[i]]);
        if (ok && then(trial)) return true;
    } while (std::next_permutation(order.begin(), order.end()));
    return false;
}

bool matches_template(const rule& pattern, const rule& r) {
    if (pattern.existentials.size() != r.existentials.size()) return false;
    return match_sequence({}, pattern.body, r.body, [&](template_matcher& m) {
        return match_sequence(m, pattern.head, r.head, [&](template_matcher& h) {
            for (std::size_t i = 0; i < pattern.existentials.size(); ++i) {
                auto it = h.vars.find(pattern.existentials[i]);
                if (it == h.vars.end() ||
                    std::find(r.existentials.begin(), r.existentials.end(), it->second) == r.existentials.end())
                    return false;
            }
            return true;
        });
    });
}

bool is_top_rule(const rule& r) {
    return r.body.size() == 1 && r.head.size() == 1 && r.existentials.empty() &&
           r.head[0].predicate_name() == top_name;
}

}  // namespace

std::vector<int> profile_templates(const rule& r) {
    std::vector<int> out;
    for (const auto& t : profile_table())
        if (matches_template(t.shape, r)) out.push_back(t.number);
    return out;
}

profile_class classify_profile(const ontology& o) {
    profile_class p;
    p.rl = p.ql = p.el = true;
    for (const auto& r : o.rules) {
        if (is_top_rule(r)) continue;
        const auto types = profile_templates(r);
        if (types.empty()) {
            p.in_templates = false;
            break;
        }
        auto any = [&](std::initializer_list<int> allowed) {
            return std::any_of(types.begin(), types.end(), [&](int t) {
                return std::find(allowed.begin(), allowed.end(), t) != allowed.end();
            });
        };
        if (any({3})) p.rl = false;
        if (!any({2, 3, 8, 10, 12})) p.ql = false;
        if (!any({2, 3, 4, 5, 6, 9, 10, 11, 12, 13})) p.el = false;
    }
    if (!p.in_templates) return profile_class{false, false, false, false, false};
    p.guarded_el = p.el && classify_shape(o).guarded;
    return p;
}

bool is_reserved_predicate(std::string_view name) {
    return name == policy_predicate_name || name == top_name || name.starts_with("delta_") ||
           name.starts_with("rho_");
}

namespace {

void reject_reserved(const atom& a) {
    if (is_reserved_predicate(a.predicate_name()))
        throw model_error("predicate name " + a.predicate_name() + " is reserved");
}

void check_safety(const rule& r) {
    const auto vars = variables_of(r.body);
    for (const auto& a : r.head)
        for (const auto& t : a.arguments())
            if (t.is_variable() && !vars.count(t) &&
                std::find(r.existentials.begin(), r.existentials.end(), t) == r.existentials.end())
                throw model_error("unsafe rule: head variable " + t.name() + " does not occur in the body");
}

}  // namespace

cqe_instance make_instance(ontology o, dataset d, conjunctive_query policy, profile_mode mode) {
    for (const auto& r : o.rules) {
        check_safety(r);
        for (const auto& part : {&r.body, &r.head})
            for (const auto& a : *part)
                if (a.predicate_name() != top_name) reject_reserved(a);
    }
    for (const auto& f : d.facts) {
        reject_reserved(f);
        if (!f.is_ground()) throw model_error("dataset facts must be ground");
    }
    for (const auto& a : policy.body) reject_reserved(a);
    if (policy.body.empty()) throw model_error("policy body is empty");
    const auto pvars = variables_of(policy.body);
    for (const auto& v : policy.free)
        if (!pvars.count(v)) throw model_error("free variable " + v.name() + " does not occur in the policy body");
    if (policy.free.size() > 2) throw model_error("policy has more than two free variables");

    if (mode != profile_mode::none) {
        auto sig = o.sig();
        for (const auto& [name, arity] : d.sig()) sig.emplace(name, arity);
        for (const auto& a : policy.body) sig.emplace(a.predicate_name(), a.arity);
        for (auto& r : top_axioms(sig))
            if (std::find(o.rules.begin(), o.rules.end(), r) == o.rules.end()) o.rules.push_back(std::move(r));
    }

    cqe_instance inst;
    inst.onto = std::move(o);
    inst.data = std::move(d);
    inst.policy = std::move(policy);
    inst.policy_rule.body = inst.policy.body;
    inst.policy_rule.head = {atom(intern(policy_predicate_name), inst.policy.free)};
    inst.profile = mode;
    return inst;
}

equality_theory equality_axioms(const signature& sig, const std::set<term>& constants) {
    equality_theory out;
    if (!sig.count(std::string(equality_name))) return out;
    const std::string eq(equality_name);
    const auto x = term::variable("x"), y = term::variable("y"), z = term::variable("z");
    for (const auto& c : constants)
        if (c.is_ground()) out.facts.insert(atom(eq, {c, c}));
    out.rules.push_back({{atom(eq, {x, y})}, {atom(eq, {y, x})}, {}});
    out.rules.push_back({{atom(eq, {x, y}), atom(eq, {y, z})}, {atom(eq, {x, z})}, {}});
    for (const auto& [name, arity] : sig) {
        if (name == equality_name) continue;
        if (arity == 1) out.rules.push_back({{atom(name, {x}), atom(eq, {x, y})}, {atom(name, {y})}, {}});
        if (arity == 2) {
            out.rules.push_back({{atom(name, {x, z}), atom(eq, {x, y})}, {atom(name, {y, z})}, {}});
            out.rules.push_back({{atom(name, {z, x}), atom(eq, {x, y})}, {atom(name, {z, y})}, {}});
        }
    }
    return out;
}

std::vector<rule> top_axioms(const signature& sig) {
    std::vector<rule> out;
    const auto x = term::variable("x"), y = term::variable("y");
    const std::string top(top_name);
    for (const auto& [name, arity] : sig) {
        if (name == top_name || name == equality_name) continue;
        if (arity == 1) out.push_back({{atom(name, {x})}, {atom(top, {x})}, {}});
        if (arity == 2) {
            out.push_back({{atom(name, {x, y})}, {atom(top, {x})}, {}});
            out.push_back({{atom(name, {x, y})}, {atom(top, {y})}, {}});
        }
    }
    return out;
}

std::set<term> constants_of(const ontology& o) {
    std::set<term> out;
    for (const auto& r : o.rules) {
        for (const auto& a : r.body)
            for (const auto& t : a.arguments())
                if (t.is_ground()) out.insert(t);
        for (const auto& a : r.head)
            for (const auto& t : a.arguments())
                if (t.is_ground()) out.insert(t);
    }
    return out;
}

}  // namespace cqe
