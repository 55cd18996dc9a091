#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqe/obstruction.hpp"
#include "cqe/oracle.hpp"
#include "cqe/profiles.hpp"
#include "cqe/sld.hpp"
#include "cqe/textio.hpp"
#include "cqe/viewcensor.hpp"

namespace {

using namespace cqe;

enum exit_code { ok = 0, bad_input = 1, precondition = 2, invariant = 3 };

struct failure : std::runtime_error {
    failure(exit_code c, const std::string& what) : std::runtime_error(what), code(c) {}
    exit_code code;
};

struct options {
    std::string input;
    std::string method = "auto";
    std::string profile;
    std::string query;
    std::string view_path;
    std::string obstruction_path;
    std::string output;
    std::size_t bound_atoms = 3;
    std::size_t bound_vars = 3;
    bool full_view = false;
    bool json = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw failure(bad_input, "cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

bool looks_like_json(std::string_view text) {
    const auto at = text.find_first_not_of(" \t\r\n");
    return at != std::string_view::npos && (text[at] == '{' || text[at] == '[');
}

program load_program(const options& opt) { return parse_program(read_file(opt.input)); }

profile_mode mode_of(const program& p, const options& opt) {
    return opt.profile.empty() ? p.profile() : parse_profile_mode(opt.profile);
}

cqe_instance load_instance(const options& opt) {
    const auto p = load_program(opt);
    if (!p.policy) throw failure(bad_input, opt.input + ": no policy");
    return make_instance(p.onto(), p.facts, *p.policy, mode_of(p, opt));
}

dataset load_view(const std::string& path) {
    const auto text = read_file(path);
    if (looks_like_json(text)) return dataset_from_json(text);
    return parse_program(text).facts;
}

union_query load_obstruction(const std::string& path) {
    const auto text = read_file(path);
    if (looks_like_json(text)) return union_query_from_json(text);
    return parse_union_query(text);
}

void emit(const options& opt, const std::string& text) {
    if (opt.output.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(opt.output, std::ios::binary);
    if (!out) throw failure(bad_input, "cannot write " + opt.output);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

std::vector<conjunctive_query> queries_of(const options& opt, const program& p) {
    if (!opt.query.empty()) return {parse_query(opt.query)};
    std::vector<conjunctive_query> out;
    for (const auto& [name, q] : p.queries) out.push_back(q);
    if (out.empty()) throw failure(bad_input, "no query given (use --query)");
    return out;
}

std::string flags_text(const shape_flags& f) {
    std::ostringstream s;
    s << std::boolalpha << "datalog=" << f.datalog << " guarded=" << f.guarded << " linear=" << f.linear
      << " multi_linear=" << f.multi_linear << " tree_shaped=" << f.tree_shaped;
    return s.str();
}

int run_classify(const options& opt) {
    const auto p = load_program(opt);
    ontology o = p.onto();
    if (p.policy) o.rules.push_back({p.policy->body, {atom(intern(policy_predicate_name), p.policy->free)}, {}});
    const auto flags = classify_shape(o);
    const auto profile = classify_profile(p.onto());
    const bool tree = !p.policy || is_tree_shaped(p.policy->body);
    if (opt.json) {
        nlohmann::json j{{"datalog", flags.datalog},       {"guarded", flags.guarded},
                         {"linear", flags.linear},         {"multi_linear", flags.multi_linear},
                         {"tree_shaped", flags.tree_shaped}, {"policy_tree_shaped", tree},
                         {"profile",
                          {{"in_templates", profile.in_templates},
                           {"rl", profile.rl},
                           {"ql", profile.ql},
                           {"el", profile.el},
                           {"guarded_el", profile.guarded_el}}}};
        emit(opt, j.dump(2));
        return ok;
    }
    std::ostringstream s;
    s << std::boolalpha << flags_text(flags) << '\n'
      << "profile: in_templates=" << profile.in_templates << " rl=" << profile.rl << " ql=" << profile.ql
      << " el=" << profile.el << " guarded_el=" << profile.guarded_el << '\n';
    emit(opt, s.str());
    return ok;
}

int run_chase(const options& opt) {
    const auto p = load_program(opt);
    const auto mode = mode_of(p, opt);
    dataset model;
    if (p.onto().is_datalog()) {
        model = chase(p.onto(), p.facts).facts;
    } else {
        if (mode == profile_mode::none) throw failure(precondition, "existential rules need a profile (datalog=false)");
        model = bounded_existential_chase(p.onto(), p.facts, opt.bound_atoms + 1);
    }
    emit(opt, opt.json ? dataset_json(model) : serialize(model));
    return ok;
}

int run_answer(const options& opt) {
    const auto p = load_program(opt);
    if (!p.onto().is_datalog() && mode_of(p, opt) == profile_mode::none)
        throw failure(precondition, "existential rules need a profile (datalog=false)");
    std::string out;
    for (const auto& q : queries_of(opt, p)) {
        const auto answers = general_certain_answers(p.onto(), p.facts, q);
        if (opt.json) {
            out += answers_json(answers) + "\n";
            continue;
        }
        for (const auto& t : answers) out += to_string(t) + "\n";
    }
    emit(opt, out);
    return ok;
}

std::string resolve_view_method(const options& opt, const cqe_instance& inst) {
    if (opt.method != "auto") return opt.method;
    if (inst.profile == profile_mode::ql || inst.profile == profile_mode::el) return "profile";
    const auto flags = classify_shape(inst.with_policy_rule());
    if (!flags.datalog) throw failure(precondition, "existential rules need a profile (datalog=false)");
    if (flags.linear) return "linear";
    if (flags.multi_linear) return "multilinear";
    return "guarded";
}

view build_view(const std::string& method, cqe_instance& inst) {
    if (method == "linear") return build_view_linear(inst);
    if (method == "multilinear") return build_view_multilinear(inst);
    if (method == "guarded") return build_view_guarded(inst);
    if (method == "ql" || method == "el" || method == "profile") return build_view_profile(inst);
    throw failure(bad_input, "unknown method " + method);
}

std::string view_text(const view& v, const options& opt) {
    const dataset facts = opt.full_view ? v.facts : v.user_facts();
    if (opt.json) {
        auto j = nlohmann::json::parse(dataset_json(facts));
        if (opt.full_view) {
            nlohmann::json copies = nlohmann::json::object();
            for (const auto& [original, list] : v.copies) {
                auto& entry = copies[to_string(original)];
                entry = nlohmann::json::array();
                for (const auto& c : list) {
                    nlohmann::json labels = nlohmann::json::array();
                    if (auto it = v.labels.find(c); it != v.labels.end())
                        for (const auto& l : it->second) labels.push_back(l);
                    entry.push_back({{"constant", to_string(c)}, {"labels", labels}});
                }
            }
            j["copies"] = copies;
        }
        return j.dump(2);
    }
    std::string out = serialize(facts);
    if (opt.full_view) {
        for (const auto& [c, labels] : v.labels) {
            out += "% " + to_string(c) + " {";
            bool first = true;
            for (const auto& l : labels) {
                out += (first ? "" : ",") + l;
                first = false;
            }
            out += "}\n";
        }
    }
    return out;
}

int run_build_view(const options& opt) {
    auto inst = load_instance(opt);
    const auto method = resolve_view_method(opt, inst);
    const auto v = build_view(method, inst);
    if (!check_view_confidentiality(inst, v.user_facts()))
        throw failure(invariant, "built view discloses the policy");
    emit(opt, view_text(v, opt));
    return ok;
}

verify_bound bound_of(const options& opt) { return {opt.bound_atoms, opt.bound_vars, true}; }

// shape failures are preconditions, not malformed input
void require_linear(const cqe_instance& inst) {
    const auto flags = classify_shape(inst.with_policy_rule());
    if (!flags.datalog) throw failure(precondition, "existential rules need a profile (datalog=false)");
    if (!flags.linear) throw failure(precondition, "instance is not linear (linear=false)");
}

obstruction build_obstruction(const options& opt, cqe_instance& inst) {
    std::string method = opt.method;
    if (method == "auto") method = inst.profile == profile_mode::ql ? "ql" : "linear";
    if (method == "linear") {
        require_linear(inst);
        return build_obstruction_linear(inst);
    }
    if (method == "ql") return build_obstruction_ql(inst);
    if (method == "el") throw failure(precondition, "EL instances have no obstruction construction (ql=false)");
    throw failure(precondition, "obstructions need a linear instance (method " + method + ", linear=false)");
}

int run_build_obstruction(const options& opt) {
    auto inst = load_instance(opt);
    const auto u = build_obstruction(opt, inst);
    auto bound = bound_of(opt);
    bound.check_optimality = false;
    if (!verify_censor(inst, censor::of_obstruction(u.ucq), bound).confidentiality)
        throw failure(invariant, "built obstruction discloses the policy");
    emit(opt, opt.json ? union_query_json(u.ucq) : serialize(u.ucq));
    return ok;
}

censor load_censor(const options& opt, cqe_instance& inst, bool build_if_missing) {
    if (!opt.view_path.empty()) return censor::of_view(load_view(opt.view_path));
    if (!opt.obstruction_path.empty()) return censor::of_obstruction(load_obstruction(opt.obstruction_path));
    if (!build_if_missing) throw failure(bad_input, "give --view or --obstruction");
    return censor::of_view(build_view(resolve_view_method(opt, inst), inst).user_facts());
}

int run_censored_answer(const options& opt) {
    const auto p = load_program(opt);
    auto inst = load_instance(opt);
    const auto c = load_censor(opt, inst, false);
    std::string out;
    for (const auto& q : queries_of(opt, p)) {
        const auto answers = c.type == censor::kind::view ? view_answers(inst, c.view_facts, q)
                                                          : obstruction_answers(inst, c.ucq, q);
        if (opt.json) {
            out += answers_json(answers) + "\n";
            continue;
        }
        for (const auto& t : answers) out += to_string(t) + "\n";
    }
    emit(opt, out);
    return ok;
}

int run_verify(const options& opt) {
    auto inst = load_instance(opt);
    const auto c = load_censor(opt, inst, true);
    const auto report = verify_censor(inst, c, bound_of(opt));
    if (opt.json) {
        emit(opt, report.to_json());
    } else {
        std::ostringstream s;
        s << "confidentiality: " << (report.confidentiality ? "pass" : "FAIL");
        if (report.disclosed) s << " (discloses " << to_string(*report.disclosed) << ")";
        s << "\noptimality: " << (report.optimality ? "pass" : "FAIL") << '\n';
        for (const auto& w : report.optimality_witnesses) s << "  witness: " << format_boolean(w) << '\n';
        s << "checked " << report.checked_queries << " queries, " << report.blocked_queries << " blocked\n";
        emit(opt, s.str());
    }
    return report.confidentiality && report.optimality ? ok : invariant;
}

int run_proof_graph(const options& opt) {
    auto inst = load_instance(opt);
    require_linear(inst);
    emit(opt, to_dot(build_proof_graph(inst)));
    return ok;
}

int dispatch(const std::string& verb, const options& opt) {
    try {
        if (verb == "classify") return run_classify(opt);
        if (verb == "chase") return run_chase(opt);
        if (verb == "answer") return run_answer(opt);
        if (verb == "build-view") return run_build_view(opt);
        if (verb == "build-obstruction") return run_build_obstruction(opt);
        if (verb == "censored-answer") return run_censored_answer(opt);
        if (verb == "verify") return run_verify(opt);
        if (verb == "proof-graph") return run_proof_graph(opt);
    } catch (const failure& e) {
        std::cerr << "cqe: " << e.what() << '\n';
        return e.code;
    } catch (const parse_error& e) {
        std::cerr << "cqe: parse error: " << e.what() << '\n';
        return bad_input;
    } catch (const model_error& e) {
        std::cerr << "cqe: " << e.what() << '\n';
        return bad_input;
    } catch (const view_error& e) {
        std::cerr << "cqe: " << e.what() << '\n';
        return precondition;
    } catch (const profile_error& e) {
        std::cerr << "cqe: " << e.what() << '\n';
        return precondition;
    } catch (const reasoning_error& e) {
        std::cerr << "cqe: " << e.what() << '\n';
        return precondition;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "cqe: malformed JSON: " << e.what() << '\n';
        return bad_input;
    }
    return bad_input;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Controlled query evaluation over Datalog and OWL 2 profile ontologies"};
    app.require_subcommand(1);
    options opt;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("input", opt.input, "program file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--profile", opt.profile, "profile mode (none, rl, ql, el)")
            ->check(CLI::IsMember({"none", "rl", "ql", "el"}));
        cmd->add_flag("--json", opt.json, "emit JSON");
        cmd->add_option("-o,--output", opt.output, "write to a file instead of standard output");
    };
    auto add_bound = [&](CLI::App* cmd) {
        cmd->add_option("--bound-atoms", opt.bound_atoms, "atoms per checked query")->check(CLI::PositiveNumber);
        cmd->add_option("--bound-vars", opt.bound_vars, "variables per checked query")->check(CLI::PositiveNumber);
    };
    auto add_censor = [&](CLI::App* cmd) {
        auto* v = cmd->add_option("--view", opt.view_path, "view artifact (text or JSON)");
        auto* u = cmd->add_option("--obstruction", opt.obstruction_path, "obstruction artifact (text or JSON)");
        v->excludes(u);
    };
    const std::vector<std::string> view_methods{"auto", "guarded", "multilinear", "linear", "ql", "el"};

    std::map<std::string, CLI::App*> verbs;
    verbs["classify"] = app.add_subcommand("classify", "print shape flags and profile");
    verbs["chase"] = app.add_subcommand("chase", "print the least model");
    verbs["answer"] = app.add_subcommand("answer", "print certain answers");
    verbs["build-view"] = app.add_subcommand("build-view", "build an anonymisation view");
    verbs["build-obstruction"] = app.add_subcommand("build-obstruction", "build an obstruction");
    verbs["censored-answer"] = app.add_subcommand("censored-answer", "answer through a censor artifact");
    verbs["verify"] = app.add_subcommand("verify", "check confidentiality and bounded optimality");
    verbs["proof-graph"] = app.add_subcommand("proof-graph", "print the proof graph as DOT");
    for (auto& [name, cmd] : verbs) add_common(cmd);

    for (const auto* name : {"answer", "censored-answer"})
        verbs[name]->add_option("--query", opt.query, "query text, e.g. \"Q(x) :- A(x)\"");
    for (const auto* name : {"build-view", "build-obstruction", "verify"})
        verbs[name]->add_option("--method", opt.method, "construction")->check(CLI::IsMember(view_methods));
    verbs["build-view"]->add_flag("--full-view", opt.full_view, "keep auxiliary atoms and copy labels");
    add_bound(verbs["chase"]);
    add_bound(verbs["build-obstruction"]);
    add_bound(verbs["verify"]);
    add_censor(verbs["censored-answer"]);
    add_censor(verbs["verify"]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bad_input;
    }
    for (const auto& [name, cmd] : verbs)
        if (cmd->parsed()) return dispatch(name, opt);
    return bad_input;
}
