#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqe/model.hpp"
#include "cqe/reasoner.hpp"
#include "cqe/textio.hpp"

namespace cqe::testing {

inline std::string fixture_path(const std::string& name) { return std::string(CQE_FIXTURES) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
    std::ifstream in(fixture_path(name));
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline cqe_instance instance_from_text(std::string_view text, profile_mode mode = profile_mode::none) {
    const auto p = parse_program(text);
    return make_instance(p.onto(), p.facts, *p.policy, mode == profile_mode::none ? p.profile() : mode);
}

inline cqe_instance load_instance(const std::string& name) { return instance_from_text(read_fixture(name)); }

inline dataset facts_of(std::string_view text) { return parse_program(text).facts; }

inline conjunctive_query bcq(std::string_view text) {
    const auto u = parse_union_query(text);
    return u.disjuncts.at(0);
}

inline std::set<std::string> texts(const dataset& d) {
    std::set<std::string> out;
    for (const auto& f : d.facts) out.insert(to_string(f));
    return out;
}

inline std::set<std::string> texts(const answer_set& answers) {
    std::set<std::string> out;
    for (const auto& t : answers) out.insert(to_string(t));
    return out;
}

// Naive fixpoint: every rule is re-evaluated over the whole active domain
// until nothing changes. Deliberately shares no code with the chase engine.
inline std::set<atom> naive_fixpoint(const ontology& o, const std::set<atom>& facts) {
    std::set<atom> model = facts;
    auto domain = [&] {
        std::set<term> out;
        for (const auto& f : model)
            for (const auto& t : f.arguments()) out.insert(t);
        for (const auto& r : o.rules)
            for (const auto& part : {&r.body, &r.head})
                for (const auto& a : *part)
                    for (const auto& t : a.arguments())
                        if (t.is_ground()) out.insert(t);
        return std::vector<term>(out.begin(), out.end());
    };
    bool changed = true;
    while (changed) {
        changed = false;
        const auto dom = domain();
        for (const auto& r : o.rules) {
            const auto vars = r.body_variables();
            std::vector<std::size_t> pick(vars.size(), 0);
            if (!vars.empty() && dom.empty()) continue;
            for (;;) {
                auto value = [&](const term& t) {
                    for (std::size_t i = 0; i < vars.size(); ++i)
                        if (vars[i] == t) return dom[pick[i]];
                    return t;
                };
                auto ground = [&](const atom& a) {
                    atom g = a;
                    for (int k = 0; k < a.arity; ++k) g.args[k] = value(a.args[k]);
                    return g;
                };
                bool holds = true;
                for (const auto& b : r.body) holds = holds && model.count(ground(b));
                if (holds)
                    for (const auto& h : r.head) changed = model.insert(ground(h)).second || changed;
                std::size_t i = 0;
                while (i < pick.size() && ++pick[i] == dom.size()) pick[i++] = 0;
                if (i == pick.size()) break;
            }
        }
    }
    return model;
}

// Every ground atom over the signature and constants.
inline std::vector<atom> ground_atoms(const signature& sig, const std::set<term>& constants) {
    std::vector<atom> out;
    for (const auto& [pred, arity] : sig) {
        if (is_reserved_predicate(pred)) continue;
        for (const auto& a : constants) {
            if (arity == 1) {
                out.push_back(atom(pred, {a}));
                continue;
            }
            for (const auto& b : constants) out.push_back(atom(pred, {a, b}));
        }
    }
    return out;
}

// Seeded source of randomness; CQE_SEED overrides the default.
inline std::uint64_t suite_seed(std::uint64_t fallback = 20240611) {
    if (const char* s = std::getenv("CQE_SEED")) return std::strtoull(s, nullptr, 10);
    return fallback;
}

enum class instance_class { linear, multilinear, guarded, ql };

// Small random CQE instances of a given class: at most four constants and
// five rules, tree-shaped policy.
class instance_generator {
public:
    explicit instance_generator(std::uint64_t seed) : rng_(seed) {}

    cqe_instance next(instance_class c) {
        for (;;) {
            ontology o;
            const std::size_t rules = pick(1, 5);
            for (std::size_t i = 0; i < rules; ++i) o.rules.push_back(make_rule(c));
            auto d = make_data();
            auto p = make_policy(c);
            try {
                auto inst = make_instance(o, d, p, c == instance_class::ql ? profile_mode::ql : profile_mode::none);
                return inst;
            } catch (const model_error&) {
                continue;
            }
        }
    }

    dataset make_data() {
        dataset d;
        const std::size_t n = pick(2, 6);
        const std::size_t consts = pick(2, 4);
        while (d.size() < n) {
            if (coin()) {
                d.insert(atom(unary(), {constant(consts)}));
            } else {
                d.insert(atom(binary(), {constant(consts), constant(consts)}));
            }
        }
        return d;
    }

    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    bool coin() { return pick(0, 1) == 1; }

private:
    std::string unary() { return std::string(1, "ABC"[pick(0, 2)]); }
    std::string binary() { return std::string(1, "RS"[pick(0, 1)]); }
    term constant(std::size_t consts) { return term::constant(std::string(1, "abcd"[pick(0, consts - 1)])); }

    rule make_rule(instance_class c) {
        const term x = term::variable("x"), y = term::variable("y");
        auto ux = [&] { return atom(unary(), {x}); };
        auto uy = [&] { return atom(unary(), {y}); };
        auto rxy = [&] { return atom(binary(), {x, y}); };
        auto ryx = [&] { return atom(binary(), {y, x}); };
        switch (c) {
            case instance_class::linear:
                switch (pick(0, 5)) {
                    case 0: return {{ux()}, {ux()}, {}};
                    case 1: return {{rxy()}, {ux()}, {}};
                    case 2: return {{rxy()}, {uy()}, {}};
                    case 3: return {{rxy()}, {rxy()}, {}};
                    case 4: return {{rxy()}, {ryx()}, {}};
                    default: return {{ux()}, {atom(binary(), {x, constant(3)})}, {}};
                }
            case instance_class::multilinear:
                if (coin()) return {{ux(), ux()}, {ux()}, {}};
                return make_rule(instance_class::linear);
            case instance_class::guarded:
                switch (pick(0, 3)) {
                    case 0: return {{rxy(), uy()}, {ux()}, {}};
                    case 1: return {{rxy(), ux()}, {uy()}, {}};
                    case 2: return {{rxy(), ux()}, {ryx()}, {}};
                    default: return make_rule(instance_class::multilinear);
                }
            case instance_class::ql:
                switch (pick(0, 5)) {
                    case 0: return {{ux()}, {ux()}, {}};
                    case 1: return {{rxy()}, {uy()}, {}};
                    case 2: return {{rxy()}, {rxy()}, {}};
                    case 3: return {{rxy()}, {ryx()}, {}};
                    default: return {{ux()}, {rxy(), uy()}, {y}};
                }
        }
        return {};
    }

    conjunctive_query make_policy(instance_class c) {
        const term x = term::variable("x"), y = term::variable("y");
        const bool free = coin();
        const std::vector<term> head = free ? std::vector<term>{x} : std::vector<term>{};
        switch (pick(0, c == instance_class::guarded ? 4 : 3)) {
            case 0: return {head, {atom(unary(), {x})}};
            case 1: return {head, {atom(binary(), {x, y})}};
            case 2: return {head, {atom(binary(), {y, x})}};
            case 3: return {{}, {atom(unary(), {constant(4)})}};
            default: return {head, {atom(binary(), {x, y}), atom(unary(), {y})}};
        }
    }

    std::mt19937_64 rng_;
};

}  // namespace cqe::testing
