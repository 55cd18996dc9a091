#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cqe {

// Interned identifier. Ids are stable for the lifetime of the process.
using symbol = std::uint32_t;

symbol intern(std::string_view name);
const std::string& symbol_name(symbol s);

enum class term_kind : std::uint8_t { constant, anonymous, variable, skolem };

class term {
public:
    term() = default;

    static term constant(std::string_view name) { return {term_kind::constant, intern(name)}; }
    static term anonymous(std::string_view name) { return {term_kind::anonymous, intern(name)}; }
    static term variable(std::string_view name) { return {term_kind::variable, intern(name)}; }
    static term skolem(std::string_view name) { return {term_kind::skolem, intern(name)}; }
    // Unnamed anonymous constant that never collides with anything else.
    static term fresh_null();

    term_kind kind() const { return kind_; }
    std::uint32_t id() const { return id_; }
    std::string name() const;

    bool is_variable() const { return kind_ == term_kind::variable; }
    bool is_ground() const { return kind_ != term_kind::variable; }
    bool is_instance_constant() const { return kind_ == term_kind::constant; }

    friend bool operator==(const term&, const term&) = default;
    friend auto operator<=>(const term&, const term&) = default;

private:
    term(term_kind k, std::uint32_t id) : kind_(k), id_(id) {}

    term_kind kind_ = term_kind::constant;
    std::uint32_t id_ = 0;
};

// Name-based ordering, used wherever output or greedy choices must not
// depend on interning order.
bool text_less(const term& a, const term& b);

inline constexpr std::string_view equality_name = "=";
inline constexpr std::string_view top_name = "Top";
inline constexpr std::string_view policy_predicate_name = "A_p";

struct atom {
    symbol pred = 0;
    std::uint8_t arity = 0;
    std::array<term, 2> args{};

    atom() = default;
    atom(std::string_view predicate, std::initializer_list<term> arguments);
    atom(symbol predicate, std::span<const term> arguments);

    std::span<const term> arguments() const { return {args.data(), arity}; }
    const std::string& predicate_name() const { return symbol_name(pred); }
    bool is_ground() const;
    bool is_equality() const;

    friend bool operator==(const atom&, const atom&) = default;
    friend auto operator<=>(const atom&, const atom&) = default;
};

bool text_less(const atom& a, const atom& b);

struct atom_hash {
    std::size_t operator()(const atom& a) const noexcept;
};

struct rule {
    std::vector<atom> body;
    std::vector<atom> head;
    std::vector<term> existentials;

    bool is_datalog() const { return head.size() == 1 && existentials.empty(); }
    std::vector<term> body_variables() const;

    friend bool operator==(const rule&, const rule&) = default;
};

// predicate name -> arity
using signature = std::map<std::string, int>;

struct ontology {
    std::vector<rule> rules;

    signature sig() const;
    bool is_datalog() const;

    friend bool operator==(const ontology&, const ontology&) = default;
};

struct dataset {
    std::set<atom> facts;

    dataset() = default;
    dataset(std::initializer_list<atom> init) : facts(init) {}
    explicit dataset(std::set<atom> f) : facts(std::move(f)) {}

    bool contains(const atom& a) const { return facts.count(a) != 0; }
    void insert(const atom& a);
    std::size_t size() const { return facts.size(); }
    bool empty() const { return facts.empty(); }
    std::set<term> terms() const;
    signature sig() const;
    std::vector<atom> sorted() const;

    friend bool operator==(const dataset&, const dataset&) = default;
};

struct conjunctive_query {
    std::vector<term> free;
    std::vector<atom> body;

    bool is_boolean() const { return free.empty(); }
    std::vector<term> variables() const;
    std::vector<term> existential_variables() const;
    // Boolean query obtained by substituting the tuple for the free variables.
    conjunctive_query instantiate(std::span<const term> tuple) const;

    friend bool operator==(const conjunctive_query&, const conjunctive_query&) = default;
    friend auto operator<=>(const conjunctive_query&, const conjunctive_query&) = default;
};

struct union_query {
    std::vector<conjunctive_query> disjuncts;

    friend bool operator==(const union_query&, const union_query&) = default;
};

using tuple = std::vector<term>;
using answer_set = std::set<tuple>;

struct shape_flags {
    bool datalog = true;
    bool guarded = true;
    bool linear = true;
    bool multi_linear = true;
    bool tree_shaped = true;

    friend bool operator==(const shape_flags&, const shape_flags&) = default;
};

struct profile_class {
    bool in_templates = true;  // every rule matches a profile template
    bool rl = false;
    bool ql = false;
    bool el = false;
    bool guarded_el = false;

    friend bool operator==(const profile_class&, const profile_class&) = default;
};

enum class profile_mode { none, rl, ql, el };

struct cqe_instance {
    ontology onto;
    dataset data;
    conjunctive_query policy;
    rule policy_rule;
    profile_mode profile = profile_mode::none;
    std::optional<answer_set> policy_answers;

    // ontology plus the policy rule
    ontology with_policy_rule() const;
};

class model_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

shape_flags classify_shape(const rule& r);
shape_flags classify_shape(const ontology& o);
bool is_tree_shaped(std::span<const atom> body);

// Template numbers (1..13) of the profile table that the rule matches.
std::vector<int> profile_templates(const rule& r);
profile_class classify_profile(const ontology& o);

bool is_reserved_predicate(std::string_view name);

cqe_instance make_instance(ontology o, dataset d, conjunctive_query policy,
                           profile_mode mode = profile_mode::none);

struct equality_theory {
    std::vector<rule> rules;
    dataset facts;
};

equality_theory equality_axioms(const signature& sig, const std::set<term>& constants);
std::vector<rule> top_axioms(const signature& sig);

std::set<term> constants_of(const ontology& o);
std::set<term> variables_of(std::span<const atom> atoms);

}  // namespace cqe
