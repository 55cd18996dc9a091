#include "cqe/obstruction.hpp"

#include <algorithm>

#include "cqe/profiles.hpp"
#include "cqe/textio.hpp"

namespace cqe {

std::vector<std::size_t> weakest_elements(const std::vector<conjunctive_query>& queries) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        if (std::any_of(kept.begin(), kept.end(), [&](std::size_t k) { return bcq_entails(q, queries[k]); })) continue;
        std::erase_if(kept, [&](std::size_t k) { return bcq_entails(queries[k], q); });
        kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

obstruction build_obstruction_linear(cqe_instance& inst) {
    const proof_graph graph = build_proof_graph(inst);
    std::vector<conjunctive_query> candidates;
    std::vector<goal> sources;
    for (auto n : graph.on_proof_paths()) {
        if (n == proof_graph::top) continue;
        candidates.push_back(canonicalize(conjunctive_query{{}, graph.nodes[n].atoms}));
        sources.push_back(graph.nodes[n]);
    }
    obstruction out;
    for (auto k : weakest_elements(candidates)) {
        out.ucq.disjuncts.push_back(candidates[k]);
        out.provenance.push_back(sources[k]);
    }
    return out;
}

bool is_blocked(const conjunctive_query& instantiated, const union_query& u) {
    return std::any_of(u.disjuncts.begin(), u.disjuncts.end(),
                       [&](const conjunctive_query& d) { return bcq_entails(instantiated, d); });
}

answer_set obstruction_answers(cqe_instance& inst, const union_query& u, const conjunctive_query& q) {
    answer_set out;
    for (const auto& t : general_certain_answers(inst.onto, inst.data, q))
        if (!is_blocked(q.instantiate(t), u)) out.insert(t);
    return out;
}

pseudo_obstruction_report pseudo_obstruction_bounded(cqe_instance& inst, std::size_t max_depth) {
    const auto enumeration = enumerate_goals(inst, max_depth);
    pseudo_obstruction_report report;
    report.result = enumeration.complete ? pseudo_obstruction_report::status::complete_finite
                                         : pseudo_obstruction_report::status::truncated;

    std::vector<std::pair<std::string, conjunctive_query>> ordered;
    for (const auto& g : enumeration.goals) ordered.emplace_back(to_string(g), g);
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second.body.size() != b.second.body.size()) return a.second.body.size() < b.second.body.size();
        return a.first < b.first;
    });
    for (auto& [text, g] : ordered) report.goals.push_back(std::move(g));

    const chase_engine engine(inst.with_policy_rule(), inst.data.sig());
    const auto& secrets = policy_answers(inst);
    fact_store joint;
    std::vector<conjunctive_query> unsafe;
    for (const auto& g : report.goals) {
        const auto mark = joint.mark();
        for (const auto& f : freeze(g).facts) joint.insert(f);
        engine.saturate(joint, mark);
        if (discloses(joint, secrets)) {
            joint.rollback(mark);
            unsafe.push_back(g);
        } else {
            report.safe_part.push_back(g);
        }
    }
    for (auto k : weakest_elements(unsafe)) report.upsilon.push_back(unsafe[k]);
    return report;
}

}  // namespace cqe
