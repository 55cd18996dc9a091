#include "cqe/reasoner.hpp"

#include <algorithm>

#include "cqe/profiles.hpp"

namespace cqe {

namespace {

const std::vector<std::uint32_t> no_facts;

struct flat_binding {
    std::vector<std::pair<term, term>> pairs;

    const term* find(const term& t) const {
        for (const auto& [k, v] : pairs)
            if (k == t) return &v;
        return nullptr;
    }
};

bool is_mappable(const term& t, bool map_anonymous) {
    return t.is_variable() || (map_anonymous && t.kind() == term_kind::anonymous);
}

class matcher {
public:
    matcher(std::span<const atom> pattern, const fact_store& store, const match_options& options)
        : pattern_(pattern), store_(store), options_(options), used_(pattern.size(), false) {}

    template <typename Visit>
    bool run(flat_binding& b, Visit&& visit) {
        return step(b, 0, visit);
    }

private:
    std::optional<term> resolved(const term& t, const flat_binding& b) const {
        if (!is_mappable(t, options_.map_anonymous)) return t;
        if (const term* v = b.find(t)) return *v;
        return std::nullopt;
    }

    std::size_t choose(const flat_binding& b) const {
        if (options_.delta_atom && !used_[*options_.delta_atom]) return *options_.delta_atom;
        std::size_t best = pattern_.size();
        std::size_t best_size = 0;
        for (std::size_t i = 0; i < pattern_.size(); ++i) {
            if (used_[i]) continue;
            const auto& cands = candidates(pattern_[i], b);
            if (best == pattern_.size() || cands.size() < best_size) {
                best = i;
                best_size = cands.size();
                if (best_size == 0) break;
            }
        }
        return best;
    }

    const std::vector<std::uint32_t>& candidates(const atom& a, const flat_binding& b) const {
        const std::vector<std::uint32_t>* best = nullptr;
        for (int p = 0; p < a.arity; ++p) {
            if (auto v = resolved(a.args[p], b)) {
                const auto& list = store_.with_argument(a.pred, p, *v);
                if (best == nullptr || list.size() < best->size()) best = &list;
            }
        }
        return best != nullptr ? *best : store_.with_predicate(a.pred);
    }

    template <typename Visit>
    bool step(flat_binding& b, std::size_t depth, Visit& visit) {
        if (depth == pattern_.size()) return visit(b);
        const std::size_t i = choose(b);
        const atom& pat = pattern_[i];
        const bool is_delta = options_.delta_atom && *options_.delta_atom == i;
        used_[i] = true;
        const auto& cands = candidates(pat, b);
        // index lists are ascending, so the delta range is a contiguous slice
        auto first = cands.begin();
        auto last = cands.end();
        if (is_delta) {
            first = std::lower_bound(cands.begin(), cands.end(), options_.delta_begin);
            last = std::lower_bound(first, cands.end(), options_.delta_end);
        }
        for (auto it = first; it != last; ++it) {
            const auto idx = *it;
            const atom& fact = store_[idx];
            if (fact.pred != pat.pred || fact.arity != pat.arity) continue;
            const std::size_t saved = b.pairs.size();
            bool ok = true;
            for (int p = 0; p < pat.arity && ok; ++p) {
                const term& t = pat.args[p];
                if (!is_mappable(t, options_.map_anonymous)) {
                    ok = t == fact.args[p];
                } else if (const term* v = b.find(t)) {
                    ok = *v == fact.args[p];
                } else {
                    b.pairs.emplace_back(t, fact.args[p]);
                }
            }
            if (ok && !step(b, depth + 1, visit)) {
                b.pairs.resize(saved);
                used_[i] = false;
                return false;
            }
            b.pairs.resize(saved);
        }
        used_[i] = false;
        return true;
    }

    std::span<const atom> pattern_;
    const fact_store& store_;
    const match_options& options_;
    std::vector<bool> used_;
};

atom apply_flat(const flat_binding& b, const atom& a) {
    atom out = a;
    for (int i = 0; i < out.arity; ++i)
        if (const term* v = b.find(out.args[i])) out.args[i] = *v;
    return out;
}

}  // namespace

std::size_t fact_store::arg_key_hash::operator()(const arg_key& k) const noexcept {
    std::size_t h = k.pred * 0x9e3779b97f4a7c15ull;
    h ^= static_cast<std::size_t>(k.position) + 0x7f4a7c15ull + (h << 6) + (h >> 2);
    h ^= ((static_cast<std::size_t>(k.value.kind()) << 32) | k.value.id()) + 0x9e3779b9ull + (h << 6) + (h >> 2);
    return h;
}

fact_store::fact_store(const dataset& d) {
    for (const auto& f : d.facts) insert(f);
}

bool fact_store::insert(const atom& a) {
    if (!members_.insert(a).second) return false;
    const auto idx = static_cast<std::uint32_t>(facts_.size());
    facts_.push_back(a);
    by_pred_[a.pred].push_back(idx);
    for (int p = 0; p < a.arity; ++p) by_arg_[arg_key{a.pred, p, a.args[p]}].push_back(idx);
    return true;
}

const std::vector<std::uint32_t>& fact_store::with_predicate(symbol pred) const {
    auto it = by_pred_.find(pred);
    return it == by_pred_.end() ? no_facts : it->second;
}

const std::vector<std::uint32_t>& fact_store::with_argument(symbol pred, int position, const term& t) const {
    auto it = by_arg_.find(arg_key{pred, position, t});
    return it == by_arg_.end() ? no_facts : it->second;
}

void fact_store::rollback(std::size_t mark) {
    while (facts_.size() > mark) {
        const atom a = facts_.back();
        facts_.pop_back();
        members_.erase(a);
        by_pred_[a.pred].pop_back();
        for (int p = 0; p < a.arity; ++p) by_arg_[arg_key{a.pred, p, a.args[p]}].pop_back();
    }
}

dataset fact_store::to_dataset() const {
    dataset d;
    d.facts.insert(facts_.begin(), facts_.end());
    return d;
}

void for_each_match(std::span<const atom> pattern, const fact_store& target, const substitution& fixed,
                    const match_options& options, const std::function<bool(const substitution&)>& visit) {
    flat_binding b;
    for (const auto& [k, v] : fixed) b.pairs.emplace_back(k, v);
    matcher m(pattern, target, options);
    m.run(b, [&](const flat_binding& found) {
        substitution s(fixed);
        for (const auto& [k, v] : found.pairs) s[k] = v;
        return visit(s);
    });
}

std::optional<substitution> find_homomorphism(std::span<const atom> source, const fact_store& target,
                                              const substitution& fixed, bool map_anonymous) {
    std::optional<substitution> out;
    match_options opts;
    opts.map_anonymous = map_anonymous;
    for_each_match(source, target, fixed, opts, [&](const substitution& s) {
        out = s;
        return false;
    });
    return out;
}

std::optional<substitution> find_homomorphism(const dataset& source, const dataset& target,
                                              const substitution& fixed) {
    const std::vector<atom> src(source.facts.begin(), source.facts.end());
    return find_homomorphism(src, fact_store(target), fixed, true);
}

atom substitute(const substitution& s, const atom& a) {
    atom out = a;
    for (int i = 0; i < out.arity; ++i)
        if (auto it = s.find(out.args[i]); it != s.end()) out.args[i] = it->second;
    return out;
}

std::vector<atom> substitute(const substitution& s, std::span<const atom> atoms) {
    std::vector<atom> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(substitute(s, a));
    return out;
}

chase_engine::chase_engine(const ontology& o, const signature& data_sig) : rules_(o) {
    for (const auto& r : o.rules)
        if (!r.is_datalog()) throw reasoning_error("chase requires a Datalog ontology");
    auto sig = o.sig();
    for (const auto& [name, arity] : data_sig) sig.emplace(name, arity);
    equality_ = sig.count(std::string(equality_name)) != 0;
    if (equality_) {
        sig.emplace(std::string(equality_name), 2);
        auto eq = equality_axioms(sig, {});
        for (auto& r : eq.rules) rules_.rules.push_back(std::move(r));
    }
}

void chase_engine::add_reflexivity(fact_store& store, std::size_t from) const {
    const symbol eq = intern(equality_name);
    const std::size_t end = store.size();
    for (std::size_t i = from; i < end; ++i) {
        const atom f = store[i];
        for (int p = 0; p < f.arity; ++p) {
            atom refl;
            refl.pred = eq;
            refl.arity = 2;
            refl.args = {f.args[p], f.args[p]};
            store.insert(refl);
        }
    }
}

void chase_engine::saturate(fact_store& store, std::size_t from) const { saturate(store, from, nullptr); }

void chase_engine::saturate(fact_store& store, std::size_t from, provenance_log* provenance) const {
    std::vector<atom> pending;
    std::vector<chase_engine::derivation> pending_why;
    while (from < store.size()) {
        if (equality_) add_reflexivity(store, from);
        const std::size_t end = store.size();
        pending.clear();
        pending_why.clear();
        for (std::size_t ri = 0; ri < rules_.rules.size(); ++ri) {
            const rule& r = rules_.rules[ri];
            for (std::size_t i = 0; i < r.body.size(); ++i) {
                match_options opts;
                opts.delta_atom = i;
                opts.delta_begin = from;
                opts.delta_end = end;
                flat_binding b;
                matcher m(r.body, store, opts);
                m.run(b, [&](const flat_binding& found) {
                    atom head = apply_flat(found, r.head[0]);
                    if (!store.contains(head)) {
                        pending.push_back(head);
                        if (provenance != nullptr) {
                            chase_engine::derivation d{ri, {}};
                            for (const auto& a : r.body) d.premises.push_back(apply_flat(found, a));
                            pending_why.push_back(std::move(d));
                        }
                    }
                    return true;
                });
            }
        }
        from = end;
        for (std::size_t k = 0; k < pending.size(); ++k) {
            if (store.insert(pending[k]) && provenance != nullptr) provenance->emplace(pending[k], pending_why[k]);
        }
    }
}

herbrand_model chase(const ontology& o, const dataset& d, bool with_provenance) {
    chase_engine engine(o, d.sig());
    fact_store store(d);
    chase_engine::provenance_log log;
    engine.saturate(store, 0, with_provenance ? &log : nullptr);
    herbrand_model m;
    m.facts = store.to_dataset();
    for (auto& [f, why] : log) m.provenance.emplace(f, std::move(why));
    return m;
}

fact_store chase_store(const ontology& o, const dataset& d) {
    chase_engine engine(o, d.sig());
    fact_store store(d);
    engine.saturate(store);
    return store;
}

answer_set answers_in(const conjunctive_query& q, const fact_store& model, answer_domain domain) {
    answer_set out;
    match_options opts;
    flat_binding b;
    matcher m(q.body, model, opts);
    m.run(b, [&](const flat_binding& found) {
        tuple t;
        t.reserve(q.free.size());
        for (const auto& v : q.free) {
            const term* img = found.find(v);
            if (img == nullptr) return true;
            if (domain == answer_domain::instance_constants && !img->is_instance_constant()) return true;
            t.push_back(*img);
        }
        out.insert(std::move(t));
        return !q.free.empty();
    });
    return out;
}

bool holds_in(const conjunctive_query& boolean_query, const fact_store& model) {
    bool found = false;
    match_options opts;
    flat_binding b;
    matcher m(boolean_query.body, model, opts);
    m.run(b, [&](const flat_binding&) {
        found = true;
        return false;
    });
    return found;
}

answer_set certain_answers(const conjunctive_query& q, const ontology& o, const dataset& d, answer_domain domain) {
    const auto model = chase_store(o, d);
    return answers_in(q, model, domain);
}

dataset freeze(const conjunctive_query& bcq, substitution* frozen) {
    substitution local;
    substitution& s = frozen != nullptr ? *frozen : local;
    dataset out;
    for (const auto& a : bcq.body) {
        atom f = a;
        for (int i = 0; i < f.arity; ++i) {
            if (!f.args[i].is_variable()) continue;
            auto it = s.find(f.args[i]);
            if (it == s.end()) it = s.emplace(f.args[i], term::fresh_null()).first;
            f.args[i] = it->second;
        }
        out.facts.insert(f);
    }
    return out;
}

conjunctive_query canonical_query(const dataset& structure) {
    conjunctive_query q;
    std::map<term, term> names;
    for (const auto& f : structure.sorted()) {
        atom a = f;
        for (int i = 0; i < a.arity; ++i) {
            auto it = names.find(a.args[i]);
            if (it == names.end())
                it = names.emplace(a.args[i], term::variable("v" + std::to_string(names.size() + 1))).first;
            a.args[i] = it->second;
        }
        q.body.push_back(a);
    }
    return q;
}

bool bcq_entails(std::span<const conjunctive_query> premises, const conjunctive_query& conclusion) {
    fact_store frozen;
    for (const auto& p : premises)
        for (const auto& f : freeze(p).facts) frozen.insert(f);
    return find_homomorphism(conclusion.body, frozen).has_value();
}

bool bcq_entails(const conjunctive_query& premise, const conjunctive_query& conclusion) {
    return bcq_entails(std::span<const conjunctive_query>(&premise, 1), conclusion);
}

answer_set compute_policy_answers(const cqe_instance& inst) {
    return general_certain_answers(inst.onto, inst.data, inst.policy);
}

const answer_set& policy_answers(cqe_instance& inst) {
    if (!inst.policy_answers) inst.policy_answers = compute_policy_answers(inst);
    return *inst.policy_answers;
}

atom policy_atom(const tuple& s) { return atom(intern(policy_predicate_name), s); }

bool discloses(const fact_store& model, const answer_set& secrets) {
    return std::any_of(secrets.begin(), secrets.end(), [&](const tuple& s) { return model.contains(policy_atom(s)); });
}

}  // namespace cqe

namespace cqe {

namespace {

std::string atom_shape_key(const atom& a, const std::vector<term>& free) {
    std::string key = a.predicate_name();
    key += '/';
    key += static_cast<char>('0' + a.arity);
    for (int i = 0; i < a.arity; ++i) {
        const term& t = a.args[i];
        key += '|';
        if (!t.is_variable()) {
            key += static_cast<char>('a' + static_cast<int>(t.kind()));
            key += t.name();
            continue;
        }
        auto it = std::find(free.begin(), free.end(), t);
        if (it != free.end()) {
            key += "#" + std::to_string(it - free.begin());
        } else {
            key += '?';
        }
    }
    if (a.arity == 2 && a.args[0] == a.args[1] && a.args[0].is_variable()) key += "=";
    return key;
}

}  // namespace

conjunctive_query canonicalize(const conjunctive_query& q) {
    std::vector<atom> atoms;
    for (const auto& a : q.body)
        if (std::find(atoms.begin(), atoms.end(), a) == atoms.end()) atoms.push_back(a);

    std::vector<std::pair<std::string, atom>> keyed;
    keyed.reserve(atoms.size());
    for (const auto& a : atoms) keyed.emplace_back(atom_shape_key(a, q.free), a);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < keyed.size();) {
        std::size_t j = i;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
        groups.emplace_back(i, j);
        i = j;
    }
    std::size_t permutations = 1;
    for (auto [b, e] : groups) {
        for (std::size_t k = 2; k <= e - b && permutations <= 40320; ++k) permutations *= k;
    }

    std::vector<std::size_t> order(keyed.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (auto [b, e] : groups) std::sort(order.begin() + b, order.begin() + e);

    auto encode = [&](const std::vector<std::size_t>& ord) {
        std::vector<int> code;
        std::vector<term> seen;
        for (auto idx : ord) {
            const atom& a = keyed[idx].second;
            for (int i = 0; i < a.arity; ++i) {
                const term& t = a.args[i];
                if (!t.is_variable() || std::find(q.free.begin(), q.free.end(), t) != q.free.end()) {
                    code.push_back(-1);
                    continue;
                }
                auto it = std::find(seen.begin(), seen.end(), t);
                if (it == seen.end()) {
                    seen.push_back(t);
                    code.push_back(static_cast<int>(seen.size()));
                } else {
                    code.push_back(static_cast<int>(it - seen.begin()) + 1);
                }
            }
        }
        return code;
    };

    std::vector<std::size_t> best = order;
    std::vector<int> best_code = encode(order);
    if (permutations > 1 && permutations <= 40320) {
        std::function<void(std::size_t)> walk = [&](std::size_t g) {
            if (g == groups.size()) {
                auto code = encode(order);
                if (code < best_code) {
                    best_code = std::move(code);
                    best = order;
                }
                return;
            }
            auto [b, e] = groups[g];
            std::sort(order.begin() + b, order.begin() + e);
            do {
                walk(g + 1);
            } while (std::next_permutation(order.begin() + b, order.begin() + e));
        };
        walk(0);
    }

    conjunctive_query out;
    std::map<term, term> names;
    for (std::size_t i = 0; i < q.free.size(); ++i)
        names.emplace(q.free[i], term::variable("x" + std::to_string(i + 1)));
    for (const auto& v : q.free) out.free.push_back(names.at(v));
    std::size_t next = 0;
    for (auto idx : best) {
        atom a = keyed[idx].second;
        for (int i = 0; i < a.arity; ++i) {
            if (!a.args[i].is_variable()) continue;
            auto it = names.find(a.args[i]);
            if (it == names.end()) it = names.emplace(a.args[i], term::variable("v" + std::to_string(++next))).first;
            a.args[i] = it->second;
        }
        out.body.push_back(a);
    }
    return out;
}

}  // namespace cqe
