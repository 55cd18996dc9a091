#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cqe/model.hpp"
#include "cqe/reasoner.hpp"

namespace cqe {

struct cq_bound {
    std::size_t max_atoms = 3;
    std::size_t max_variables = 3;
    std::vector<term> constants;
    signature sig;
};

// Every CQ within the bound exactly once, in canonical form.
std::vector<conjunctive_query> enumerate_cqs(const cq_bound& bound);

// Boolean CQs with at most `max_atoms` atoms and `max_variables` variables
// that hold in `model`, obtained by generalizing its facts. Only instance
// constants may stay in the queries. Not deduplicated up to isomorphism.
void for_each_entailed_bcq(const fact_store& model, std::size_t max_atoms, std::size_t max_variables,
                           const std::function<void(const conjunctive_query&)>& visit);

// Restricted chase with a fresh labelled null per unsatisfied existential;
// `depth` bounds how deep nulls may nest.
dataset bounded_existential_chase(const ontology& o, const dataset& d, std::size_t depth);

struct censor {
    enum class kind { view, obstruction };

    kind type = kind::view;
    dataset view_facts;
    union_query ucq;

    static censor of_view(dataset facts);
    static censor of_obstruction(union_query u);
};

struct verify_bound {
    std::size_t max_atoms = 3;
    std::size_t max_variables = 3;
    bool check_optimality = true;
};

struct verification_report {
    bool confidentiality = true;
    std::optional<tuple> disclosed;
    bool optimality = true;
    // smallest blocked answers whose release would have been safe
    std::vector<conjunctive_query> optimality_witnesses;
    std::size_t checked_queries = 0;
    std::size_t blocked_queries = 0;
    std::size_t unjustified_blocks = 0;

    std::string to_json() const;
};

// Confidentiality and bounded optimality of the censor, using only the chase,
// freezing and homomorphism search.
verification_report verify_censor(cqe_instance& inst, const censor& c, const verify_bound& bound = {});

struct agreement {
    bool agree = true;
    std::optional<conjunctive_query> divergence;  // a Boolean CQ answered differently
};

agreement censors_agree(cqe_instance& inst, const censor& first, const censor& second, const verify_bound& bound = {});

}  // namespace cqe
