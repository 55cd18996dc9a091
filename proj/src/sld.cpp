#include "cqe/sld.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "cqe/textio.hpp"

namespace cqe {

namespace {

struct tracked_goal {
    std::vector<atom> atoms;
    // >= 0: index into the previous goal; < 0: -(body index + 1)
    std::vector<int> origin;
};

tracked_goal canonical_tracked(const std::vector<atom>& atoms, const std::vector<int>& origin) {
    tracked_goal out;
    std::map<term, term> names;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        atom a = atoms[k];
        for (int i = 0; i < a.arity; ++i) {
            if (!a.args[i].is_variable()) continue;
            auto it = names.find(a.args[i]);
            if (it == names.end())
                it = names.emplace(a.args[i], term::variable("v" + std::to_string(names.size() + 1))).first;
            a.args[i] = it->second;
        }
        if (std::find(out.atoms.begin(), out.atoms.end(), a) != out.atoms.end()) continue;
        out.atoms.push_back(a);
        out.origin.push_back(origin[k]);
    }
    return out;
}

rule rename_apart(const rule& r) {
    substitution s;
    for (const auto& part : {&r.body, &r.head})
        for (const auto& a : *part)
            for (const auto& t : a.arguments())
                if (t.is_variable() && !s.count(t)) s.emplace(t, term::variable("?r" + std::to_string(s.size() + 1)));
    rule out;
    out.body = substitute(s, r.body);
    out.head = substitute(s, r.head);
    return out;
}

struct raw_resolution {
    std::vector<atom> atoms;
    std::vector<int> origin;
    substitution unifier;
};

std::optional<raw_resolution> resolve_raw(const std::vector<atom>& g, const sentence& s, std::size_t selected) {
    if (selected >= g.size()) return std::nullopt;
    raw_resolution out;
    std::vector<atom> body;
    if (const auto* r = std::get_if<rule>(&s)) {
        if (!r->is_datalog()) return std::nullopt;
        const rule fresh = rename_apart(*r);
        auto theta = unify(g[selected], fresh.head[0]);
        if (!theta) return std::nullopt;
        out.unifier = std::move(*theta);
        body = fresh.body;
    } else {
        auto theta = unify(g[selected], std::get<atom>(s));
        if (!theta) return std::nullopt;
        out.unifier = std::move(*theta);
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (k == selected) continue;
        out.atoms.push_back(substitute(out.unifier, g[k]));
        out.origin.push_back(static_cast<int>(k));
    }
    for (std::size_t k = 0; k < body.size(); ++k) {
        out.atoms.push_back(substitute(out.unifier, body[k]));
        out.origin.push_back(-static_cast<int>(k) - 1);
    }
    return out;
}

// Ground consequences with first justifications, found by tabled top-down
// evaluation of call patterns.
class tabled_solver {
public:
    struct justification {
        std::optional<std::size_t> rule_index;
        std::vector<atom> premises;
    };

    tabled_solver(const ontology& rules, const dataset& data) : rules_(rules), data_(data), facts_(data) {}

    void solve(const atom& call) {
        add_call(call);
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t c = 0; c < calls_.size(); ++c) changed |= evaluate(calls_[c]);
        }
    }

    const justification* why(const atom& a) const {
        auto it = justified_.find(a);
        return it == justified_.end() ? nullptr : &it->second;
    }

private:
    void add_call(const atom& pattern) {
        atom key = canonical_goal({pattern}).atoms.front();
        if (call_set_.insert(key).second) calls_.push_back(key);
    }

    bool record(const atom& a, justification j) {
        if (justified_.count(a)) return false;
        if (data_.contains(a)) j = justification{};
        justified_.emplace(a, std::move(j));
        answers_.insert(a);
        return true;
    }

    bool evaluate(atom call) {
        bool changed = false;
        const atom pattern[1] = {call};
        std::vector<atom> found;
        for_each_match(pattern, facts_, {}, {}, [&](const substitution& s) {
            found.push_back(substitute(s, call));
            return true;
        });
        for (const auto& f : found) changed |= record(f, {});

        std::vector<std::pair<atom, justification>> pending;
        for (std::size_t ri = 0; ri < rules_.rules.size(); ++ri) {
            const rule fresh = rename_apart(rules_.rules[ri]);
            auto theta = unify(call, fresh.head[0]);
            if (!theta) continue;
            const auto body = substitute(*theta, fresh.body);
            const atom head = substitute(*theta, fresh.head[0]);
            std::vector<atom> premises;
            walk_body(body, 0, {}, premises, [&](const substitution& s) {
                pending.emplace_back(substitute(s, head), justification{ri, premises});
            });
        }
        for (auto& [a, j] : pending) changed |= record(a, std::move(j));
        return changed;
    }

    template <typename Emit>
    void walk_body(const std::vector<atom>& body, std::size_t j, const substitution& binding,
                   std::vector<atom>& premises, Emit&& emit) {
        if (j == body.size()) {
            emit(binding);
            return;
        }
        const atom sub = substitute(binding, body[j]);
        add_call(sub);
        const atom pattern[1] = {sub};
        std::vector<atom> matches;
        for_each_match(pattern, answers_, {}, {}, [&](const substitution& s) {
            matches.push_back(substitute(s, sub));
            return true;
        });
        for (const auto& m : matches) {
            substitution next = binding;
            for (int i = 0; i < sub.arity; ++i)
                if (sub.args[i].is_variable()) next[sub.args[i]] = m.args[i];
            premises.push_back(m);
            walk_body(body, j + 1, next, premises, emit);
            premises.pop_back();
        }
    }

    const ontology& rules_;
    const dataset& data_;
    fact_store facts_;
    fact_store answers_;
    std::vector<atom> calls_;
    std::set<atom> call_set_;
    std::map<atom, justification> justified_;
};

}  // namespace

goal canonical_goal(std::vector<atom> atoms) {
    std::vector<int> origin(atoms.size(), 0);
    return goal{canonical_tracked(atoms, origin).atoms};
}

std::optional<substitution> unify(const atom& a, const atom& b) {
    if (a.pred != b.pred || a.arity != b.arity) return std::nullopt;
    substitution bind;
    auto find = [&](term t) {
        for (auto it = bind.find(t); it != bind.end(); it = bind.find(t)) t = it->second;
        return t;
    };
    for (int i = 0; i < a.arity; ++i) {
        const term x = find(a.args[i]);
        const term y = find(b.args[i]);
        if (x == y) continue;
        if (x.is_variable()) {
            bind[x] = y;
        } else if (y.is_variable()) {
            bind[y] = x;
        } else {
            return std::nullopt;
        }
    }
    substitution out;
    for (const auto& part : {&a, &b})
        for (const auto& t : part->arguments())
            if (t.is_variable()) {
                const term r = find(t);
                if (r != t) out[t] = r;
            }
    return out;
}

ontology resolution_ontology(const ontology& o, const signature& data_sig) {
    auto sig = o.sig();
    for (const auto& [name, arity] : data_sig) sig.emplace(name, arity);
    if (!sig.count(std::string(equality_name))) return o;
    ontology out = o;
    for (auto& r : equality_axioms(sig, {}).rules) out.rules.push_back(std::move(r));
    const term x = term::variable("x");
    const term y = term::variable("y");
    for (const auto& [name, arity] : sig) {
        for (int p = 0; p < arity; ++p) {
            rule r;
            r.body.push_back(arity == 1 ? atom(name, {x}) : atom(name, {x, y}));
            const term& t = p == 0 ? x : y;
            r.head.push_back(atom(equality_name, {t, t}));
            out.rules.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<goal> resolve_step(const goal& g, const sentence& s, std::size_t selected) {
    auto raw = resolve_raw(g.atoms, s, selected);
    if (!raw) return {};
    return {goal{canonical_tracked(raw->atoms, raw->origin).atoms}};
}

std::optional<proof> prove(const goal& g, const ontology& o, const dataset& d, std::optional<std::size_t> max_length) {
    if (!o.is_datalog()) throw reasoning_error("resolution requires a Datalog ontology");
    proof result;
    goal current = canonical_goal(g.atoms);
    result.goals.push_back(current);
    if (current.empty()) return result;

    const ontology rules = resolution_ontology(o, d.sig());
    ontology with_query = rules;
    rule query_rule;
    query_rule.body = current.atoms;
    query_rule.head.push_back(atom(intern("$goal"), std::span<const term>{}));
    with_query.rules.push_back(query_rule);

    tabled_solver solver(with_query, d);
    solver.solve(query_rule.head[0]);
    const auto* top = solver.why(query_rule.head[0]);
    if (top == nullptr) return std::nullopt;

    std::vector<atom> targets = top->premises;
    std::vector<atom> atoms = current.atoms;
    while (!atoms.empty()) {
        std::size_t selected = atoms.size();
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            const auto* j = solver.why(targets[k]);
            if (j->rule_index) {
                selected = k;
                break;
            }
        }
        sentence used;
        std::vector<atom> premises;
        if (selected < atoms.size()) {
            const auto* j = solver.why(targets[selected]);
            used = rules.rules.at(*j->rule_index);
            premises = j->premises;
            ++result.frontier;
        } else {
            selected = 0;
            used = targets[0];
        }
        auto raw = resolve_raw(atoms, used, selected);
        if (!raw) throw reasoning_error("internal: justification does not resolve");
        auto next = canonical_tracked(raw->atoms, raw->origin);
        std::vector<atom> next_targets;
        for (int origin : next.origin)
            next_targets.push_back(origin >= 0 ? targets[origin] : premises[-origin - 1]);
        result.steps.push_back(proof_step{used, std::move(raw->unifier), selected});
        atoms = std::move(next.atoms);
        targets = std::move(next_targets);
        result.goals.push_back(goal{atoms});
    }
    if (max_length && result.steps.size() > *max_length) return std::nullopt;
    return result;
}

bool provable(const goal& g, const ontology& o, const dataset& d) { return prove(g, o, d).has_value(); }

std::vector<std::size_t> proof_graph::on_proof_paths() const {
    std::vector<std::vector<std::size_t>> out(nodes.size()), in(nodes.size());
    for (const auto& e : edges) {
        out[e.from].push_back(e.to);
        in[e.to].push_back(e.from);
    }
    auto reach = [&](const std::vector<std::size_t>& start, const std::vector<std::vector<std::size_t>>& adj) {
        std::vector<bool> seen(nodes.size(), false);
        std::deque<std::size_t> queue(start.begin(), start.end());
        for (auto s : start) seen[s] = true;
        while (!queue.empty()) {
            const auto n = queue.front();
            queue.pop_front();
            for (auto m : adj[n])
                if (!seen[m]) {
                    seen[m] = true;
                    queue.push_back(m);
                }
        }
        return seen;
    };
    const auto forward = reach(sources, out);
    const auto backward = reach({top}, in);
    std::vector<std::size_t> result;
    for (std::size_t n = 0; n < nodes.size(); ++n)
        if (forward[n] && backward[n]) result.push_back(n);
    return result;
}

std::size_t proof_graph_node_bound(const cqe_instance& inst) {
    signature sig = inst.onto.sig();
    for (const auto& [n, a] : inst.data.sig()) sig.emplace(n, a);
    for (const auto& a : inst.policy.body) sig.emplace(a.predicate_name(), a.arity);
    std::set<term> consts = constants_of(inst.onto);
    for (const auto& t : inst.data.terms()) consts.insert(t);
    for (const auto& a : inst.policy.body)
        for (const auto& t : a.arguments())
            if (t.is_ground()) consts.insert(t);
    const std::size_t width = consts.size() + 2;
    return sig.size() * width * width + 1;
}

proof_graph build_proof_graph(cqe_instance& inst) {
    const auto flags = classify_shape(inst.with_policy_rule());
    if (!flags.datalog || !flags.linear) throw model_error("proof graph requires a linear Datalog instance (linear=false)");
    if (inst.onto.sig().count(std::string(equality_name)) || inst.data.sig().count(std::string(equality_name)))
        throw model_error("proof graph does not support the equality predicate");

    proof_graph g;
    g.nodes.push_back(goal{});
    std::map<goal, std::size_t> index{{goal{}, proof_graph::top}};
    std::deque<std::size_t> queue;
    auto node_of = [&](const goal& n) {
        auto [it, fresh] = index.emplace(n, g.nodes.size());
        if (fresh) {
            g.nodes.push_back(n);
            queue.push_back(it->second);
        }
        return it->second;
    };

    for (const auto& s : policy_answers(inst)) {
        const auto body = inst.policy.instantiate(s).body;
        const auto n = node_of(canonical_goal(body));
        if (std::find(g.sources.begin(), g.sources.end(), n) == g.sources.end()) g.sources.push_back(n);
    }

    const auto facts = inst.data.sorted();
    while (!queue.empty()) {
        const auto n = queue.front();
        queue.pop_front();
        const goal current = g.nodes[n];
        for (std::size_t ri = 0; ri < inst.onto.rules.size(); ++ri) {
            for (const auto& next : resolve_step(current, inst.onto.rules[ri], 0)) {
                const auto m = node_of(next);
                g.edges.push_back({n, m, ri, std::nullopt});
            }
        }
        for (const auto& f : facts) {
            for (const auto& next : resolve_step(current, f, 0)) {
                const auto m = node_of(next);
                g.edges.push_back({n, m, std::nullopt, f});
            }
        }
    }
    if (g.nodes.size() > proof_graph_node_bound(inst)) throw reasoning_error("internal: proof graph exceeds its node bound");
    return g;
}

std::string to_dot(const proof_graph& g) {
    auto quote = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out + "\"";
    };
    std::ostringstream os;
    os << "digraph proof_graph {\n";
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        const std::string label = g.nodes[n].empty() ? "⊤" : to_string(std::span<const atom>(g.nodes[n].atoms));
        os << "  n" << n << " [label=" << quote(label);
        if (std::find(g.sources.begin(), g.sources.end(), n) != g.sources.end()) os << ", shape=box";
        os << "];\n";
    }
    for (const auto& e : g.edges) {
        os << "  n" << e.from << " -> n" << e.to << " [label=";
        os << quote(e.rule_index ? std::to_string(*e.rule_index) : to_string(*e.fact)) << "];\n";
    }
    os << "}\n";
    return os.str();
}

goal_enumeration enumerate_goals(cqe_instance& inst, std::size_t max_depth) {
    if (!inst.onto.is_datalog()) throw reasoning_error("goal enumeration requires a Datalog ontology");
    const ontology rules = resolution_ontology(inst.onto, inst.data.sig());
    const fact_store model = chase_store(inst.onto, inst.data);
    const fact_store data(inst.data);
    const auto facts = inst.data.sorted();

    enum class phase { rules, facts };
    using state = std::pair<goal, phase>;
    std::set<state> seen;
    std::set<conjunctive_query> found;
    std::vector<state> frontier;

    auto completable = [&](const state& s) {
        return find_homomorphism(s.first.atoms, s.second == phase::rules ? model : data).has_value();
    };
    auto visit = [&](state s, std::vector<state>& next) {
        if (!completable(s) || !seen.insert(s).second) return;
        if (!s.first.empty()) found.insert(canonicalize(conjunctive_query{{}, s.first.atoms}));
        next.push_back(std::move(s));
    };

    for (const auto& a : policy_answers(inst)) visit({canonical_goal(inst.policy.instantiate(a).body), phase::rules}, frontier);

    goal_enumeration out;
    for (std::size_t depth = 0;; ++depth) {
        std::vector<state> next;
        std::vector<state> successors;
        for (const auto& [g, ph] : frontier) {
            for (std::size_t sel = 0; sel < g.atoms.size(); ++sel) {
                if (ph == phase::rules)
                    for (const auto& r : rules.rules)
                        for (auto& n : resolve_step(g, r, sel)) successors.push_back({std::move(n), phase::rules});
                for (const auto& f : facts)
                    for (auto& n : resolve_step(g, f, sel)) successors.push_back({std::move(n), phase::facts});
            }
        }
        if (depth == max_depth) {
            out.complete = std::none_of(successors.begin(), successors.end(),
                                        [&](const state& s) { return !seen.count(s) && completable(s); });
            break;
        }
        for (auto& s : successors) visit(std::move(s), next);
        if (next.empty()) {
            out.complete = true;
            break;
        }
        frontier = std::move(next);
    }
    out.goals.assign(found.begin(), found.end());
    return out;
}

}  // namespace cqe
