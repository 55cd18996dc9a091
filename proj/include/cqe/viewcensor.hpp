#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cqe/model.hpp"
#include "cqe/reasoner.hpp"

namespace cqe {

using label_set = std::set<std::string>;

struct view {
    // Includes the auxiliary delta_/rho_ atoms.
    dataset facts;
    // Original constant -> the constant itself followed by its kept copies.
    std::map<term, std::vector<term>> copies;
    // Copy -> labels it was created with.
    std::map<term, label_set> labels;

    // facts without auxiliary predicates
    dataset user_facts() const;
};

class view_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

bool is_auxiliary_predicate(std::string_view name);
std::string delta_name(std::string_view binary);
std::string rho_name(std::string_view binary);

ontology extend_ontology(const ontology& o);

// Subsets of `candidates` closed under `extended`, smallest first. Predicates
// in `also_occurring` (the policy's) are not forced in as absent ones.
std::vector<label_set> closed_subsets(const label_set& candidates, const ontology& extended,
                                      const signature& also_occurring = {});

// Whether the binary atom may join the partial view.
bool check_role(const atom& edge, const dataset& partial_view, cqe_instance& inst);

view build_view_guarded(cqe_instance& inst);
view build_view_multilinear(cqe_instance& inst);
// Facts over instance constants form the unique maximal safe subset of
// chase(O_E, D); copies are built as in the multi-linear case.
view build_view_linear(cqe_instance& inst);

// cert(Q, O, D) ∩ cert(Q, O, view) over instance constants.
answer_set view_answers(cqe_instance& inst, const dataset& view_facts, const conjunctive_query& q);
bool check_view_confidentiality(cqe_instance& inst, const dataset& view_facts);

}  // namespace cqe
