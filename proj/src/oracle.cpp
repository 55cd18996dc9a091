#include "cqe/oracle.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "cqe/textio.hpp"

namespace cqe {

namespace {

// Restricted chase over a store, incremental from a mark. Datalog rules run
// through the chase engine; the remaining rules invent labelled nulls whose
// nesting level never exceeds `depth`.
class bounded_chaser {
public:
    bounded_chaser(const ontology& o, const signature& data_sig, std::size_t depth)
        : depth_(depth), engine_(datalog_part(o), data_sig) {
        for (const auto& r : o.rules)
            if (!r.is_datalog()) existential_.push_back(r);
    }

    void saturate(fact_store& store, std::size_t from, std::map<term, std::size_t>& level) const {
        for (;;) {
            engine_.saturate(store, from);
            const auto end = store.mark();
            for (const auto& r : existential_) fire(r, store, from, end, level);
            if (store.mark() == end) return;
            from = end;
        }
    }

private:
    static ontology datalog_part(const ontology& o) {
        ontology out;
        for (const auto& r : o.rules)
            if (r.is_datalog()) out.rules.push_back(r);
        return out;
    }

    void fire(const rule& r, fact_store& store, std::size_t begin, std::size_t end,
              std::map<term, std::size_t>& level) const {
        std::vector<substitution> triggers;
        for (std::size_t k = 0; k < r.body.size(); ++k) {
            match_options options;
            options.map_anonymous = true;
            options.delta_atom = k;
            options.delta_begin = begin;
            options.delta_end = end;
            for_each_match(r.body, store, {}, options, [&](const substitution& m) {
                triggers.push_back(m);
                return true;
            });
        }
        for (const auto& m : triggers) {
            if (find_homomorphism(r.head, store, m)) continue;
            std::size_t nesting = 1;
            for (const auto& [var, value] : m) {
                auto it = level.find(value);
                if (it != level.end()) nesting = std::max(nesting, it->second + 1);
            }
            if (nesting > depth_) continue;
            substitution extended = m;
            for (const auto& y : r.existentials) {
                const term n = term::fresh_null();
                level[n] = nesting;
                extended[y] = n;
            }
            for (const auto& h : r.head) store.insert(substitute(extended, h));
        }
    }

    std::size_t depth_;
    chase_engine engine_;
    std::vector<rule> existential_;
};

fact_store model_of(const ontology& o, const dataset& d, std::size_t depth) {
    fact_store store(d);
    std::map<term, std::size_t> level;
    bounded_chaser(o, d.sig(), depth).saturate(store, 0, level);
    return store;
}

conjunctive_query generalization_key(std::vector<atom> atoms) {
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    return {{}, std::move(atoms)};
}

struct slot {
    std::size_t atom_index;
    int position;
    term value;
};

class generalizer {
public:
    generalizer(std::size_t max_variables, const std::function<void(const conjunctive_query&)>& visit)
        : max_variables_(max_variables), visit_(visit) {}

    void run(const std::vector<atom>& picked) {
        working_ = picked;
        slots_.clear();
        for (std::size_t i = 0; i < picked.size(); ++i)
            for (int p = 0; p < picked[i].arity; ++p) slots_.push_back({i, p, picked[i].args[p]});
        bound_.clear();
        assign(0);
    }

private:
    void assign(std::size_t k) {
        if (k == slots_.size()) {
            auto key = generalization_key(working_);
            if (seen_.insert(key).second) visit_(key);
            return;
        }
        const auto& s = slots_[k];
        auto& target = working_[s.atom_index].args[s.position];
        if (s.value.is_instance_constant()) {
            target = s.value;
            assign(k + 1);
        }
        for (std::size_t v = 0; v < bound_.size(); ++v) {
            if (bound_[v] != s.value) continue;
            target = variable(v);
            assign(k + 1);
        }
        if (bound_.size() < max_variables_) {
            bound_.push_back(s.value);
            target = variable(bound_.size() - 1);
            assign(k + 1);
            bound_.pop_back();
        }
    }

    static term variable(std::size_t v) {
        static const std::vector<term> names = [] {
            std::vector<term> out;
            for (int i = 1; i <= 16; ++i) out.push_back(term::variable("g" + std::to_string(i)));
            return out;
        }();
        return v < names.size() ? names[v] : term::variable("g" + std::to_string(v + 1));
    }

    std::size_t max_variables_;
    const std::function<void(const conjunctive_query&)>& visit_;
    std::vector<atom> working_;
    std::vector<slot> slots_;
    std::vector<term> bound_;
    std::set<conjunctive_query> seen_;
};

std::size_t chase_depth(const verify_bound& bound) { return bound.max_atoms + 2; }

bool censor_releases(const censor& c, const conjunctive_query& bcq, const fact_store& view_model) {
    if (c.type == censor::kind::view) return holds_in(bcq, view_model);
    return std::none_of(c.ucq.disjuncts.begin(), c.ucq.disjuncts.end(),
                        [&](const conjunctive_query& u) { return bcq_entails(bcq, u); });
}

fact_store view_model_of(const cqe_instance& inst, const censor& c, std::size_t depth) {
    if (c.type != censor::kind::view) return {};
    return model_of(inst.onto, c.view_facts, depth);
}

std::vector<conjunctive_query> entailed_bcqs(const cqe_instance& inst, const verify_bound& bound) {
    const auto model = model_of(inst.onto, inst.data, chase_depth(bound));
    std::vector<conjunctive_query> out;
    for_each_entailed_bcq(model, bound.max_atoms, bound.max_variables,
                          [&](const conjunctive_query& q) { out.push_back(q); });
    return out;
}

}  // namespace

void for_each_entailed_bcq(const fact_store& model, std::size_t max_atoms, std::size_t max_variables,
                           const std::function<void(const conjunctive_query&)>& visit) {
    std::vector<atom> facts = model.facts();
    std::sort(facts.begin(), facts.end());
    generalizer gen(max_variables, visit);
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> choose = [&](std::size_t start) {
        if (!pick.empty()) {
            std::vector<atom> picked;
            for (auto i : pick) picked.push_back(facts[i]);
            gen.run(picked);
        }
        if (pick.size() == max_atoms) return;
        for (std::size_t i = start; i < facts.size(); ++i) {
            pick.push_back(i);
            choose(i);
            pick.pop_back();
        }
    };
    choose(0);
}

std::vector<conjunctive_query> enumerate_cqs(const cq_bound& bound) {
    std::vector<term> vars;
    for (std::size_t i = 1; i <= bound.max_variables; ++i) vars.push_back(term::variable("e" + std::to_string(i)));
    std::vector<term> terms = bound.constants;
    terms.insert(terms.end(), vars.begin(), vars.end());

    std::vector<atom> atoms;
    for (const auto& [name, arity] : bound.sig) {
        if (arity == 1) {
            for (const auto& t : terms) atoms.emplace_back(intern(name), std::array<term, 1>{t});
        } else if (arity == 2) {
            for (const auto& s : terms)
                for (const auto& t : terms) atoms.emplace_back(intern(name), std::array<term, 2>{s, t});
        }
    }

    std::set<conjunctive_query> out;
    std::vector<atom> body;
    auto emit = [&] {
        const auto used = variables_of(body);
        std::vector<term> pool(used.begin(), used.end());
        // every ordered tuple of distinct variables, the empty one included
        std::vector<term> free;
        std::vector<bool> taken(pool.size(), false);
        std::function<void()> extend = [&] {
            out.insert(canonicalize({free, body}));
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (taken[i]) continue;
                taken[i] = true;
                free.push_back(pool[i]);
                extend();
                free.pop_back();
                taken[i] = false;
            }
        };
        extend();
    };
    std::function<void(std::size_t)> choose = [&](std::size_t start) {
        if (!body.empty()) emit();
        if (body.size() == bound.max_atoms) return;
        for (std::size_t i = start; i < atoms.size(); ++i) {
            body.push_back(atoms[i]);
            choose(i + 1);
            body.pop_back();
        }
    };
    choose(0);
    return {out.begin(), out.end()};
}

dataset bounded_existential_chase(const ontology& o, const dataset& d, std::size_t depth) {
    return model_of(o, d, depth).to_dataset();
}

censor censor::of_view(dataset facts) {
    censor c;
    c.type = kind::view;
    c.view_facts = std::move(facts);
    return c;
}

censor censor::of_obstruction(union_query u) {
    censor c;
    c.type = kind::obstruction;
    c.ucq = std::move(u);
    return c;
}

std::string verification_report::to_json() const {
    nlohmann::json j;
    j["confidentiality"] = {{"pass", confidentiality}};
    if (disclosed) j["confidentiality"]["disclosed"] = to_string(*disclosed);
    j["optimality"] = {{"pass", optimality}, {"witnesses", nlohmann::json::array()}};
    for (const auto& w : optimality_witnesses) j["optimality"]["witnesses"].push_back(format_boolean(w));
    j["checked_queries"] = checked_queries;
    j["blocked_queries"] = blocked_queries;
    j["unjustified_blocks"] = unjustified_blocks;
    return j.dump(2);
}

verification_report verify_censor(cqe_instance& inst, const censor& c, const verify_bound& bound) {
    constexpr std::size_t witness_limit = 32;
    const std::size_t depth = chase_depth(bound);
    verification_report report;

    const auto data_model = model_of(inst.onto, inst.data, depth);
    const auto secrets = answers_in(inst.policy, data_model);
    const auto view_model = view_model_of(inst, c, depth);

    std::vector<conjunctive_query> released, blocked;
    for_each_entailed_bcq(data_model, bound.max_atoms, bound.max_variables, [&](const conjunctive_query& q) {
        ++report.checked_queries;
        (censor_releases(c, q, view_model) ? released : blocked).push_back(q);
    });
    report.blocked_queries = blocked.size();

    // censor theory, closed under the ontology and the policy rule
    const auto guarded = inst.with_policy_rule();
    const bounded_chaser chaser(guarded, inst.data.sig(), depth);
    fact_store theory;
    if (c.type == censor::kind::view) {
        for (const auto& f : c.view_facts.facts) theory.insert(f);
    } else {
        for (const auto& q : released)
            for (const auto& f : freeze(q).facts) theory.insert(f);
    }
    std::map<term, std::size_t> level;
    chaser.saturate(theory, 0, level);

    for (const auto& s : secrets) {
        if (theory.contains(policy_atom(s))) {
            report.confidentiality = false;
            report.disclosed = s;
            break;
        }
    }

    if (!bound.check_optimality) return report;
    std::vector<std::pair<std::string, conjunctive_query>> unjustified;
    for (const auto& q : blocked) {
        const auto mark = theory.mark();
        for (const auto& f : freeze(q).facts) theory.insert(f);
        // nulls are never reused, so levels left behind by a rollback are harmless
        chaser.saturate(theory, mark, level);
        const bool justified = discloses(theory, secrets);
        theory.rollback(mark);
        if (justified) continue;
        auto c = canonicalize(q);
        unjustified.emplace_back(format_boolean(c), std::move(c));
    }
    report.optimality = unjustified.empty();
    report.unjustified_blocks = unjustified.size();
    std::sort(unjustified.begin(), unjustified.end(), [](const auto& a, const auto& b) {
        if (a.second.body.size() != b.second.body.size()) return a.second.body.size() < b.second.body.size();
        return a.first < b.first;
    });
    for (auto& [text, q] : unjustified) {
        if (report.optimality_witnesses.size() == witness_limit) break;
        if (!report.optimality_witnesses.empty() && report.optimality_witnesses.back() == q) continue;
        report.optimality_witnesses.push_back(std::move(q));
    }
    return report;
}

agreement censors_agree(cqe_instance& inst, const censor& first, const censor& second, const verify_bound& bound) {
    const std::size_t depth = chase_depth(bound);
    const auto first_model = view_model_of(inst, first, depth);
    const auto second_model = view_model_of(inst, second, depth);
    agreement out;
    for (const auto& q : entailed_bcqs(inst, bound)) {
        if (censor_releases(first, q, first_model) == censor_releases(second, q, second_model)) continue;
        out.agree = false;
        out.divergence = canonicalize(q);
        break;
    }
    return out;
}

}  // namespace cqe
