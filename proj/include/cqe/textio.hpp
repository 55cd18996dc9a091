#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cqe/model.hpp"

namespace cqe {

struct program {
    std::vector<rule> rules;
    dataset facts;
    std::optional<conjunctive_query> policy;
    std::vector<std::pair<std::string, conjunctive_query>> queries;
    std::map<std::string, std::string> options;

    ontology onto() const { return {rules}; }
    profile_mode profile() const;

    friend bool operator==(const program&, const program&) = default;
};

class parse_error : public std::runtime_error {
public:
    parse_error(int line, int column, const std::string& message);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

program parse_program(std::string_view text);
// `Q(x) :- body` with an optional trailing period.
conjunctive_query parse_query(std::string_view text);
// Disjuncts separated by `|`, each `[exists v, ... .] atoms`.
union_query parse_union_query(std::string_view text);
atom parse_atom(std::string_view text);

profile_mode parse_profile_mode(std::string_view name);
std::string to_string(profile_mode m);

std::string to_string(const term& t);
std::string to_string(const atom& a);
std::string to_string(std::span<const atom> atoms);
std::string to_string(const rule& r);
// `Q(x) :- body`
std::string to_string(const conjunctive_query& q);
// Boolean form with readable existential variables: `exists y. Likes(John,y)`
std::string format_boolean(const conjunctive_query& q);
std::string to_string(const union_query& u);
std::string to_string(const tuple& t);

std::string serialize(const program& p);
std::string serialize(const dataset& d);
std::string serialize(const union_query& u);

std::string answers_json(const answer_set& answers);
std::string dataset_json(const dataset& d);
std::string union_query_json(const union_query& u);

dataset dataset_from_json(std::string_view text);
union_query union_query_from_json(std::string_view text);

}  // namespace cqe
