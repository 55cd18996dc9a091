#include "cqe/profiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace cqe {

namespace {

struct existential_shape {
    atom source;  // A(x)
    atom role;    // R(x,y)
    atom filler;  // B(y)
};

existential_shape decompose(const rule& r) {
    const auto types = profile_templates(r);
    if (std::find(types.begin(), types.end(), 3) == types.end())
        throw profile_error("existential rule is not of the form A(x) -> exists y. R(x,y), B(y)");
    existential_shape s;
    s.source = r.body[0];
    for (const auto& a : r.head) (a.arity == 2 ? s.role : s.filler) = a;
    return s;
}

std::string sanitized(std::string s) {
    for (auto& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) c = '_';
    return s;
}

term unused_skolem(const std::string& base, const std::set<term>& taken, std::set<std::string>& issued) {
    std::string name = base;
    for (int k = 2; taken.count(term::skolem(name)) || issued.count(name); ++k) name = base + "_" + std::to_string(k);
    issued.insert(name);
    return term::skolem(name);
}

void add_skolemized(ontology& out, const existential_shape& s, const std::string& primed, const term& constant) {
    const term x = term::variable("x");
    const term y = term::variable("y");
    out.rules.push_back({{s.source}, {atom(primed, {s.source.args[0], constant})}, {}});
    const atom link(primed, {x, y});
    out.rules.push_back({{link}, {atom(s.role.pred, std::array<term, 2>{x, y})}, {}});
    out.rules.push_back({{link}, {atom(s.filler.pred, std::array<term, 1>{y})}, {}});
}

std::set<term> constants_in(const dataset& d) {
    std::set<term> out;
    for (const auto& t : d.terms()) out.insert(t);
    return out;
}

// Exact facts over named elements plus the type of every existential rule's
// witnesses, followed by a depth-bounded restricted chase.
fact_store seeded_chase(const ontology& o, const dataset& d, std::size_t depth) {
    ontology datalog_part;
    std::vector<existential_shape> existentials;
    for (const auto& r : o.rules) {
        if (r.is_datalog()) {
            datalog_part.rules.push_back(r);
        } else {
            existentials.push_back(decompose(r));
        }
    }

    std::set<term> taken = constants_of(o);
    for (const auto& t : d.terms()) taken.insert(t);
    std::set<std::string> issued;
    ontology typing = datalog_part;
    std::vector<term> witness;
    for (std::size_t i = 0; i < existentials.size(); ++i) {
        witness.push_back(unused_skolem("w" + std::to_string(i), taken, issued));
        add_skolemized(typing, existentials[i], "$link" + std::to_string(i), witness.back());
    }
    const dataset typed = chase(typing, d).facts;

    std::vector<std::vector<atom>> type_of(existentials.size());
    fact_store store;
    for (const auto& f : typed.facts) {
        if (f.predicate_name().starts_with("$link")) continue;
        const auto args = f.arguments();
        const bool internal = std::any_of(args.begin(), args.end(), [&](const term& t) {
            return std::find(witness.begin(), witness.end(), t) != witness.end();
        });
        if (!internal) {
            store.insert(f);
            continue;
        }
        if (f.arity == 1)
            for (std::size_t i = 0; i < witness.size(); ++i)
                if (f.args[0] == witness[i]) type_of[i].push_back(f);
    }

    const chase_engine engine(datalog_part, d.sig());
    engine.saturate(store);
    std::map<term, std::size_t> level;
    for (std::size_t round = 1; round <= depth; ++round) {
        const auto mark = store.mark();
        for (std::size_t i = 0; i < existentials.size(); ++i) {
            const auto& s = existentials[i];
            const atom pattern[1] = {s.source};
            std::vector<term> triggers;
            for_each_match(pattern, store, {}, {}, [&](const substitution& m) {
                triggers.push_back(substitute(m, s.source).args[0]);
                return true;
            });
            for (const auto& x : triggers) {
                auto lv = level.find(x);
                if (lv != level.end() && lv->second >= round) continue;
                const atom need[2] = {atom(s.role.pred, std::array<term, 2>{x, term::variable("y")}),
                                      atom(s.filler.pred, std::array<term, 1>{term::variable("y")})};
                if (find_homomorphism(need, store)) continue;
                const term n = term::fresh_null();
                level[n] = round;
                store.insert(atom(s.role.pred, std::array<term, 2>{x, n}));
                store.insert(atom(s.filler.pred, std::array<term, 1>{n}));
                for (const auto& t : type_of[i]) store.insert(atom(t.pred, std::array<term, 1>{n}));
            }
        }
        if (store.size() == mark) break;
        engine.saturate(store, mark);
    }
    return store;
}

}  // namespace

bool is_internal_predicate(std::string_view name) { return name.find('\'') != std::string_view::npos; }

bool mentions_internal(const conjunctive_query& q) {
    return std::any_of(q.body.begin(), q.body.end(), [](const atom& a) {
        if (is_internal_predicate(a.predicate_name())) return true;
        const auto args = a.arguments();
        return std::any_of(args.begin(), args.end(), [](const term& t) { return t.kind() == term_kind::skolem; });
    });
}

rewrite_result xi_rewrite(const ontology& o, const std::set<term>& sigma) {
    rewrite_result out;
    out.sigma = sigma;
    std::set<term> taken = sigma;
    for (const auto& t : constants_of(o)) taken.insert(t);
    std::set<std::string> issued;
    std::map<std::pair<symbol, symbol>, term> shared;
    for (std::size_t i = 0; i < o.rules.size(); ++i) {
        const rule& r = o.rules[i];
        if (r.is_datalog()) {
            out.datalog.rules.push_back(r);
            continue;
        }
        const auto s = decompose(r);
        auto key = std::make_pair(s.source.pred, s.role.pred);
        auto it = shared.find(key);
        if (it == shared.end()) {
            const std::string base = sanitized(s.source.predicate_name() + "_" + s.role.predicate_name());
            it = shared.emplace(key, unused_skolem(base, taken, issued)).first;
        }
        skolem_entry e{i, s.source.predicate_name(), s.role.predicate_name(), s.filler.predicate_name(),
                       s.role.predicate_name() + "'" + std::to_string(i), it->second};
        add_skolemized(out.datalog, s, e.primed, e.constant);
        out.skolems.push_back(std::move(e));
    }
    return out;
}

std::set<term> default_sigma(const ontology& o, const dataset& d, const conjunctive_query& q) {
    std::set<term> out = constants_of(o);
    for (const auto& t : constants_in(d)) out.insert(t);
    for (const auto& a : q.body)
        for (const auto& t : a.arguments())
            if (t.is_ground()) out.insert(t);
    return out;
}

answer_set general_certain_answers(const ontology& o, const dataset& d, const conjunctive_query& q,
                                   answer_domain domain) {
    if (o.is_datalog()) return certain_answers(q, o, d, domain);
    const auto model = seeded_chase(o, d, q.body.size() + 1);
    return answers_in(q, model, domain);
}

namespace {

rewrite_result rewrite_for(const cqe_instance& inst) {
    return xi_rewrite(inst.onto, default_sigma(inst.onto, inst.data, inst.policy));
}

cqe_instance rewritten_instance(const cqe_instance& inst, const rewrite_result& rw) {
    auto sub = make_instance(rw.datalog, inst.data, inst.policy);
    if (inst.policy_answers) sub.policy_answers = inst.policy_answers;
    return sub;
}

}  // namespace

view build_view_profile(cqe_instance& inst) {
    const auto profile = classify_profile(inst.onto);
    if (!profile.in_templates) throw profile_error("ontology is outside the profile rule templates (profile=none)");
    if (!profile.ql && !profile.guarded_el) {
        if (profile.el) throw profile_error("EL ontology is not guarded (guarded_el=false)");
        throw profile_error("ontology is neither QL nor guarded EL (ql=false, guarded_el=false)");
    }
    if (!is_tree_shaped(inst.policy.body)) throw profile_error("policy is not tree-shaped (tree_shaped=false)");

    const auto rw = rewrite_for(inst);
    auto sub = rewritten_instance(inst, rw);
    const auto flags = classify_shape(sub.with_policy_rule());
    const view inner = flags.linear ? build_view_linear(sub) : build_view_guarded(sub);

    view out;
    for (const auto& f : chase(rw.datalog, inner.facts).facts.facts)
        if (!is_internal_predicate(f.predicate_name())) out.facts.insert(f);
    out.copies = inner.copies;
    out.labels = inner.labels;
    return out;
}

obstruction build_obstruction_ql(cqe_instance& inst) {
    const auto profile = classify_profile(inst.onto);
    if (!profile.ql) throw profile_error("ontology is not QL (ql=false)");
    if (inst.policy.body.size() != 1) throw profile_error("QL obstructions need a single-atom policy (linear=false)");

    const auto rw = rewrite_for(inst);
    auto sub = rewritten_instance(inst, rw);
    const auto inner = build_obstruction_linear(sub);

    std::vector<conjunctive_query> user;
    std::vector<goal> sources;
    for (std::size_t i = 0; i < inner.ucq.disjuncts.size(); ++i) {
        if (mentions_internal(inner.ucq.disjuncts[i])) continue;
        user.push_back(inner.ucq.disjuncts[i]);
        sources.push_back(inner.provenance[i]);
    }
    obstruction out;
    for (auto k : weakest_elements(user)) {
        out.ucq.disjuncts.push_back(user[k]);
        out.provenance.push_back(sources[k]);
    }
    return out;
}

}  // namespace cqe
