#pragma once

#include <set>
#include <string>
#include <vector>

#include "cqe/model.hpp"
#include "cqe/obstruction.hpp"
#include "cqe/viewcensor.hpp"

namespace cqe {

class profile_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct skolem_entry {
    std::size_t rule_index;  // position of the existential rule in the input
    std::string source;      // A
    std::string role;        // R
    std::string filler;      // B
    std::string primed;      // fresh binary predicate for this rule
    term constant;           // shared by all rules with the same (A, R)
};

struct rewrite_result {
    ontology datalog;
    std::vector<skolem_entry> skolems;
    std::set<term> sigma;
};

// Skolemizing rewriting of existential rules into Datalog.
rewrite_result xi_rewrite(const ontology& o, const std::set<term>& sigma);

// Predicates and constants introduced by xi_rewrite.
bool is_internal_predicate(std::string_view name);
bool mentions_internal(const conjunctive_query& q);

// Constants of the ontology, data and query.
std::set<term> default_sigma(const ontology& o, const dataset& d, const conjunctive_query& q = {});

// Certain answers for Datalog, and for ontologies with existential profile
// rules via a depth-bounded existential chase seeded with exact element types.
answer_set general_certain_answers(const ontology& o, const dataset& d, const conjunctive_query& q,
                                   answer_domain domain = answer_domain::instance_constants);

view build_view_profile(cqe_instance& inst);
obstruction build_obstruction_ql(cqe_instance& inst);

}  // namespace cqe
