#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cqe/model.hpp"
#include "cqe/reasoner.hpp"

namespace cqe {

// Conjunction of atoms; empty means the goal is proved.
struct goal {
    std::vector<atom> atoms;

    bool empty() const { return atoms.empty(); }

    friend bool operator==(const goal&, const goal&) = default;
    friend auto operator<=>(const goal&, const goal&) = default;
};

// Variables renamed v1, v2, ... by first occurrence; atom order kept.
goal canonical_goal(std::vector<atom> atoms);

std::optional<substitution> unify(const atom& a, const atom& b);

// The ontology used for resolution: equality axioms and reflexivity of every
// argument are added when the equality predicate occurs in `o` or `data_sig`.
ontology resolution_ontology(const ontology& o, const signature& data_sig);

// A Datalog rule or a ground fact.
using sentence = std::variant<rule, atom>;

std::vector<goal> resolve_step(const goal& g, const sentence& s, std::size_t selected);

struct proof_step {
    sentence used;
    substitution unifier;
    std::size_t selected = 0;
};

struct proof {
    std::vector<goal> goals;
    std::vector<proof_step> steps;
    // index of the first step that uses a fact
    std::size_t frontier = 0;
};

// Tabled top-down evaluation; the returned proof is normalised.
std::optional<proof> prove(const goal& g, const ontology& o, const dataset& d,
                           std::optional<std::size_t> max_length = std::nullopt);
bool provable(const goal& g, const ontology& o, const dataset& d);

struct proof_graph {
    struct edge {
        std::size_t from;
        std::size_t to;
        std::optional<std::size_t> rule_index;  // empty for fact steps
        std::optional<atom> fact;
    };

    // nodes[0] is the empty goal
    std::vector<goal> nodes;
    std::vector<edge> edges;
    std::vector<std::size_t> sources;

    static constexpr std::size_t top = 0;

    // Nodes lying on some path from a source to the empty goal.
    std::vector<std::size_t> on_proof_paths() const;
};

proof_graph build_proof_graph(cqe_instance& inst);
std::size_t proof_graph_node_bound(const cqe_instance& inst);
std::string to_dot(const proof_graph& g);

struct goal_enumeration {
    std::vector<conjunctive_query> goals;  // canonical Boolean CQs, empty goal excluded
    bool complete = false;
};

goal_enumeration enumerate_goals(cqe_instance& inst, std::size_t max_depth);

}  // namespace cqe
