#pragma once

#include <vector>

#include "cqe/model.hpp"
#include "cqe/sld.hpp"

namespace cqe {

struct obstruction {
    union_query ucq;
    // proof-graph goal each disjunct came from
    std::vector<goal> provenance;
};

// Drops every query that entails another kept one, and repeats of
// equivalent queries; order of the survivors is kept.
std::vector<std::size_t> weakest_elements(const std::vector<conjunctive_query>& queries);

obstruction build_obstruction_linear(cqe_instance& inst);

bool is_blocked(const conjunctive_query& instantiated, const union_query& u);
answer_set obstruction_answers(cqe_instance& inst, const union_query& u, const conjunctive_query& q);

struct pseudo_obstruction_report {
    enum class status { complete_finite, truncated };

    std::vector<conjunctive_query> goals;
    std::vector<conjunctive_query> safe_part;
    std::vector<conjunctive_query> upsilon;
    status result = status::truncated;
};

pseudo_obstruction_report pseudo_obstruction_bounded(cqe_instance& inst, std::size_t max_depth);

}  // namespace cqe
