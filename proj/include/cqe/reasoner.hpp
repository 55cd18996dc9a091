#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cqe/model.hpp"

namespace cqe {

class reasoning_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Indexed, append-only set of ground atoms with cheap rollback to a mark.
class fact_store {
public:
    fact_store() = default;
    explicit fact_store(const dataset& d);

    bool insert(const atom& a);
    bool contains(const atom& a) const { return members_.count(a) != 0; }

    std::size_t size() const { return facts_.size(); }
    const atom& operator[](std::size_t i) const { return facts_[i]; }
    const std::vector<atom>& facts() const { return facts_; }

    const std::vector<std::uint32_t>& with_predicate(symbol pred) const;
    const std::vector<std::uint32_t>& with_argument(symbol pred, int position, const term& t) const;

    std::size_t mark() const { return facts_.size(); }
    void rollback(std::size_t mark);

    dataset to_dataset() const;

private:
    struct arg_key {
        symbol pred;
        int position;
        term value;
        friend bool operator==(const arg_key&, const arg_key&) = default;
    };
    struct arg_key_hash {
        std::size_t operator()(const arg_key& k) const noexcept;
    };

    std::vector<atom> facts_;
    std::unordered_set<atom, atom_hash> members_;
    std::unordered_map<symbol, std::vector<std::uint32_t>> by_pred_;
    std::unordered_map<arg_key, std::vector<std::uint32_t>, arg_key_hash> by_arg_;
};

using substitution = std::map<term, term>;

// Backtracking matcher of a conjunction of atoms into a fact store. Variables
// are always mappable; anonymous constants only when `map_anonymous` is set.
struct match_options {
    bool map_anonymous = false;
    // Restrict atom `delta_atom` to facts with index in [delta_begin, delta_end).
    std::optional<std::size_t> delta_atom;
    std::size_t delta_begin = 0;
    std::size_t delta_end = 0;
};

// Calls `visit` for every match; stop early when it returns false.
void for_each_match(std::span<const atom> pattern, const fact_store& target, const substitution& fixed,
                    const match_options& options, const std::function<bool(const substitution&)>& visit);

std::optional<substitution> find_homomorphism(std::span<const atom> source, const fact_store& target,
                                              const substitution& fixed = {}, bool map_anonymous = false);
std::optional<substitution> find_homomorphism(const dataset& source, const dataset& target,
                                              const substitution& fixed = {});

atom substitute(const substitution& s, const atom& a);
std::vector<atom> substitute(const substitution& s, std::span<const atom> atoms);

// Semi-naive Datalog evaluation. Equality axioms are added automatically when
// the ontology mentions the equality predicate.
class chase_engine {
public:
    explicit chase_engine(const ontology& o, const signature& data_sig = {});

    // Saturates `store`, treating facts at index >= from as new.
    void saturate(fact_store& store, std::size_t from = 0) const;

    const ontology& rules() const { return rules_; }

    struct derivation {
        std::size_t rule_index;
        std::vector<atom> premises;
    };
    using provenance_log = std::unordered_map<atom, derivation, atom_hash>;
    void saturate(fact_store& store, std::size_t from, provenance_log* provenance) const;

private:
    void add_reflexivity(fact_store& store, std::size_t from) const;

    ontology rules_;
    bool equality_ = false;
};

struct herbrand_model {
    dataset facts;
    std::map<atom, chase_engine::derivation> provenance;
};

herbrand_model chase(const ontology& o, const dataset& d, bool with_provenance = false);
fact_store chase_store(const ontology& o, const dataset& d);

enum class answer_domain { instance_constants, all_constants };

answer_set answers_in(const conjunctive_query& q, const fact_store& model,
                      answer_domain domain = answer_domain::instance_constants);
bool holds_in(const conjunctive_query& boolean_query, const fact_store& model);

answer_set certain_answers(const conjunctive_query& q, const ontology& o, const dataset& d,
                           answer_domain domain = answer_domain::instance_constants);

// Replaces every variable by a fresh anonymous constant.
dataset freeze(const conjunctive_query& bcq, substitution* frozen = nullptr);
conjunctive_query canonical_query(const dataset& structure);

// Representative up to variable renaming, atom order and repeated atoms. Free
// variables become x1, x2, ... in tuple order; the others v1, v2, ...
conjunctive_query canonicalize(const conjunctive_query& q);

bool bcq_entails(const conjunctive_query& premise, const conjunctive_query& conclusion);
bool bcq_entails(std::span<const conjunctive_query> premises, const conjunctive_query& conclusion);

// Cached cert(P, O, D) of the instance (computed on demand).
const answer_set& policy_answers(cqe_instance& inst);
answer_set compute_policy_answers(const cqe_instance& inst);

// Checks O ∪ facts ⊭ P(s) for every s in the given answers; `model` must be
// closed under an ontology that contains the policy rule.
bool discloses(const fact_store& model, const answer_set& secrets);
atom policy_atom(const tuple& s);

}  // namespace cqe
