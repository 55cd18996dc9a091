#include "cqe/viewcensor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "cqe/profiles.hpp"

namespace cqe {

namespace {

constexpr std::string_view delta_prefix = "delta_";
constexpr std::string_view rho_prefix = "rho_";

std::uint32_t fnv1a(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

bool has_equality(const cqe_instance& inst) {
    const std::string eq(equality_name);
    return inst.onto.sig().count(eq) || inst.data.sig().count(eq) ||
           std::any_of(inst.policy.body.begin(), inst.policy.body.end(), [](const atom& a) { return a.is_equality(); });
}

void require_shape(const cqe_instance& inst, bool need_guarded, bool need_multi, bool need_linear, bool need_tree) {
    if (!inst.onto.is_datalog()) throw view_error("view construction requires a Datalog ontology (datalog=false)");
    if (has_equality(inst)) throw view_error("view construction does not support the equality predicate");
    const auto f = classify_shape(inst.with_policy_rule());
    if (need_linear && !f.linear) throw view_error("instance is not linear (linear=false)");
    if (need_multi && !f.multi_linear) throw view_error("instance is not multi-linear (multi_linear=false)");
    if (need_guarded && !f.guarded) throw view_error("instance is not guarded (guarded=false)");
    if (need_tree && !f.tree_shaped) throw view_error("instance is not tree-shaped (tree_shaped=false)");
}

// Partial view closed under O_E and the policy rule, with trial additions.
class safe_store {
public:
    explicit safe_store(cqe_instance& inst)
        : extended_(extend_ontology(inst.onto)),
          engine_(with_policy(extended_, inst.policy_rule)),
          secrets_(policy_answers(inst)),
          policy_pred_(intern(policy_predicate_name)) {}

    const ontology& extended() const { return extended_; }
    const fact_store& store() const { return store_; }

    // Adds the facts if the result discloses nothing (and, when
    // `no_new_unary`, entails no unary fact outside the current store).
    bool try_add(std::span<const atom> facts, bool no_new_unary = false) {
        const auto mark = store_.mark();
        for (const auto& f : facts) store_.insert(f);
        if (store_.size() == mark) return true;
        engine_.saturate(store_, mark);
        bool ok = !discloses(store_, secrets_);
        if (ok && no_new_unary) {
            for (std::size_t i = mark; i < store_.size() && ok; ++i) {
                const atom& f = store_[i];
                ok = !(f.arity == 1 && f.pred != policy_pred_);
            }
        }
        if (!ok) store_.rollback(mark);
        return ok;
    }

    bool is_safe_with(std::span<const atom> facts) {
        const auto mark = store_.mark();
        const bool ok = try_add(facts);
        store_.rollback(mark);
        return ok;
    }

private:
    static ontology with_policy(ontology o, const rule& policy_rule) {
        o.rules.push_back(policy_rule);
        return o;
    }

    ontology extended_;
    chase_engine engine_;
    answer_set secrets_;
    symbol policy_pred_;
    fact_store store_;
};

class copy_namer {
public:
    explicit copy_namer(const std::set<term>& taken) {
        for (const auto& t : taken) used_.insert(t.name());
    }

    term make(const term& base, const label_set& labels) {
        std::string joined;
        for (const auto& l : labels) joined += l + ",";
        char hex[9];
        std::snprintf(hex, sizeof hex, "%08x", fnv1a(joined));
        std::string name = base.name() + "__" + hex;
        for (auto& c : name)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) c = '_';
        std::string candidate = name;
        for (int k = 2; used_.count(candidate); ++k) candidate = name + "_" + std::to_string(k);
        used_.insert(candidate);
        return term::anonymous(candidate);
    }

private:
    std::set<std::string> used_;
};

std::vector<term> sorted_terms(const std::set<term>& terms) {
    std::vector<term> out(terms.begin(), terms.end());
    std::sort(out.begin(), out.end(), [](const term& a, const term& b) { return text_less(a, b); });
    return out;
}

std::map<term, label_set> unary_labels(const dataset& model) {
    std::map<term, label_set> out;
    for (const auto& f : model.facts)
        if (f.arity == 1) out[f.args[0]].insert(f.predicate_name());
    return out;
}

std::vector<atom> label_atoms(const term& t, const label_set& labels) {
    std::vector<atom> out;
    for (const auto& l : labels) out.push_back(atom(l, {t}));
    return out;
}

enum class copy_policy { all_closed, maximal_closed };

view build_with_copies(cqe_instance& inst, copy_policy policy) {
    safe_store safe(inst);
    const dataset model = chase(safe.extended(), inst.data).facts;
    const auto facts = model.sorted();

    for (const auto& f : facts)
        if (f.arity == 1) safe.try_add(std::span<const atom>(&f, 1));

    view out;
    copy_namer namer(model.terms());
    const auto labels = unary_labels(model);
    // a predicate the policy mentions can still disclose, so it is never forced
    signature policy_sig;
    for (const auto& b : inst.policy.body) policy_sig[b.predicate_name()] = b.arity;
    for (const auto& a : sorted_terms(model.terms())) {
        auto& sigma = out.copies[a];
        sigma.push_back(a);
        auto it = labels.find(a);
        const label_set candidates = it == labels.end() ? label_set{} : it->second;
        auto subsets = closed_subsets(candidates, safe.extended(), policy_sig);

        if (policy == copy_policy::maximal_closed) {
            std::vector<label_set> safe_sets;
            for (const auto& sub : subsets) {
                const term probe = term::fresh_null();
                const auto atoms = label_atoms(probe, sub);
                if (safe.is_safe_with(atoms)) safe_sets.push_back(sub);
            }
            subsets.clear();
            for (const auto& s : safe_sets) {
                const bool dominated = std::any_of(safe_sets.begin(), safe_sets.end(), [&](const label_set& t) {
                    return t.size() > s.size() && std::includes(t.begin(), t.end(), s.begin(), s.end());
                });
                if (!dominated) subsets.push_back(s);
            }
        }

        for (const auto& sub : subsets) {
            const term copy = namer.make(a, sub);
            const auto atoms = label_atoms(copy, sub);
            if (!safe.try_add(atoms)) continue;
            sigma.push_back(copy);
            out.labels.emplace(copy, sub);
        }
    }

    for (const auto& f : facts) {
        if (f.arity != 2 || f.is_equality()) continue;
        for (const auto& first : out.copies[f.args[0]]) {
            for (const auto& second : out.copies[f.args[1]]) {
                atom edge = f;
                edge.args = {first, second};
                safe.try_add(std::span<const atom>(&edge, 1), true);
            }
        }
    }

    dataset kept;
    const symbol policy_pred = intern(policy_predicate_name);
    for (const auto& f : safe.store().facts())
        if (f.pred != policy_pred) kept.insert(f);
    out.facts = chase(safe.extended(), kept).facts;
    return out;
}

}  // namespace

dataset view::user_facts() const {
    dataset out;
    for (const auto& f : facts.facts)
        if (!is_auxiliary_predicate(f.predicate_name())) out.insert(f);
    return out;
}

bool is_auxiliary_predicate(std::string_view name) {
    return name.starts_with(delta_prefix) || name.starts_with(rho_prefix);
}

std::string delta_name(std::string_view binary) { return std::string(delta_prefix) + std::string(binary); }
std::string rho_name(std::string_view binary) { return std::string(rho_prefix) + std::string(binary); }

ontology extend_ontology(const ontology& o) {
    ontology out = o;
    const term x = term::variable("x");
    const term y = term::variable("y");
    for (const auto& [name, arity] : o.sig()) {
        if (arity != 2 || name == equality_name) continue;
        rule d;
        d.body.push_back(atom(name, {x, y}));
        d.head.push_back(atom(delta_name(name), {x}));
        rule r;
        r.body = d.body;
        r.head.push_back(atom(rho_name(name), {y}));
        out.rules.push_back(std::move(d));
        out.rules.push_back(std::move(r));
    }
    return out;
}

std::vector<label_set> closed_subsets(const label_set& candidates, const ontology& extended,
                                      const signature& also_occurring) {
    const std::vector<std::string> names(candidates.begin(), candidates.end());
    auto sig = extended.sig();
    sig.insert(also_occurring.begin(), also_occurring.end());
    std::uint64_t forced = 0;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (!sig.count(names[i])) forced |= std::uint64_t{1} << i;
    if (names.size() > 20) throw view_error("too many unary predicates on one constant");

    const chase_engine engine(extended);
    std::vector<label_set> out;
    const std::uint64_t total = std::uint64_t{1} << names.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        if ((mask & forced) != forced) continue;
        label_set sub;
        for (std::size_t i = 0; i < names.size(); ++i)
            if (mask & (std::uint64_t{1} << i)) sub.insert(names[i]);
        const term probe = term::fresh_null();
        fact_store store;
        for (const auto& a : label_atoms(probe, sub)) store.insert(a);
        engine.saturate(store);
        const bool closed = std::all_of(store.facts().begin(), store.facts().end(), [&](const atom& f) {
            return f.arity != 1 || f.args[0] != probe || sub.count(f.predicate_name());
        });
        if (closed) out.push_back(std::move(sub));
    }
    std::stable_sort(out.begin(), out.end(), [](const label_set& a, const label_set& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

bool check_role(const atom& edge, const dataset& partial_view, cqe_instance& inst) {
    ontology rules = extend_ontology(inst.onto);
    rules.rules.push_back(inst.policy_rule);
    fact_store store(partial_view);
    const chase_engine engine(rules);
    engine.saturate(store);
    store.insert(edge);
    engine.saturate(store);
    if (discloses(store, policy_answers(inst))) return false;
    const symbol policy_pred = intern(policy_predicate_name);
    return std::all_of(store.facts().begin(), store.facts().end(), [&](const atom& f) {
        return f.arity != 1 || f.pred == policy_pred || partial_view.contains(f);
    });
}

view build_view_guarded(cqe_instance& inst) {
    require_shape(inst, true, false, false, true);
    return build_with_copies(inst, copy_policy::all_closed);
}

view build_view_multilinear(cqe_instance& inst) {
    require_shape(inst, true, true, false, true);
    return build_with_copies(inst, copy_policy::maximal_closed);
}

view build_view_linear(cqe_instance& inst) {
    require_shape(inst, true, true, true, false);
    return build_with_copies(inst, copy_policy::maximal_closed);
}

answer_set view_answers(cqe_instance& inst, const dataset& view_facts, const conjunctive_query& q) {
    const auto over_data = general_certain_answers(inst.onto, inst.data, q);
    const auto over_view = general_certain_answers(inst.onto, view_facts, q);
    answer_set out;
    std::set_intersection(over_data.begin(), over_data.end(), over_view.begin(), over_view.end(),
                          std::inserter(out, out.end()));
    return out;
}

bool check_view_confidentiality(cqe_instance& inst, const dataset& view_facts) {
    const auto& secrets = policy_answers(inst);
    if (secrets.empty()) return true;
    if (inst.onto.is_datalog()) {
        const auto model = chase_store(inst.with_policy_rule(), view_facts);
        return !discloses(model, secrets);
    }
    const auto leaked = general_certain_answers(inst.onto, view_facts, inst.policy);
    return std::none_of(secrets.begin(), secrets.end(), [&](const tuple& s) { return leaked.count(s) != 0; });
}

}  // namespace cqe
