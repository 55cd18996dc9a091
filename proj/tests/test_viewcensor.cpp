#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cqe/oracle.hpp"
#include "cqe/textio.hpp"
#include "cqe/viewcensor.hpp"
#include "support.hpp"

using namespace cqe;
using namespace cqe::testing;

namespace {

label_set user_labels(const label_set& labels) {
    label_set out;
    for (const auto& l : labels)
        if (!is_auxiliary_predicate(l)) out.insert(l);
    return out;
}

std::set<label_set> copy_labels(const view& v, const std::string& base) {
    std::set<label_set> out;
    const auto it = v.copies.find(term::constant(base));
    if (it == v.copies.end()) return out;
    for (const auto& c : it->second)
        if (const auto l = v.labels.find(c); l != v.labels.end()) out.insert(user_labels(l->second));
    return out;
}

std::optional<term> copy_with(const view& v, const std::string& base, const label_set& labels) {
    for (const auto& c : v.copies.at(term::constant(base)))
        if (const auto l = v.labels.find(c); l != v.labels.end() && l->second == labels) return c;
    return std::nullopt;
}

dataset named_part(const dataset& d) {
    dataset out;
    for (const auto& f : d.facts) {
        const auto args = f.arguments();
        if (std::all_of(args.begin(), args.end(), [](const term& t) { return t.is_instance_constant(); })) out.insert(f);
    }
    return out;
}

// Atomwise safety check over chase(O_E, D), computed without the view builder.
dataset linear_v0(cqe_instance& inst) {
    const auto extended = extend_ontology(inst.onto);
    auto with_policy = extended;
    with_policy.rules.push_back(inst.policy_rule);
    const auto& secrets = policy_answers(inst);
    dataset out;
    for (const auto& f : chase(extended, inst.data).facts.facts) {
        if (!discloses(chase_store(with_policy, dataset{f}), secrets)) out.insert(f);
    }
    return out;
}

std::set<std::string> rule_texts(const ontology& o) {
    std::set<std::string> out;
    for (const auto& r : o.rules) out.insert(to_string(r));
    return out;
}

void expect_invariants(cqe_instance& inst, const view& v) {
    EXPECT_TRUE(check_view_confidentiality(inst, v.facts)) << serialize(v.facts);
    EXPECT_EQ(chase(extend_ontology(inst.onto), v.facts).facts, v.facts);
}

}  // namespace

TEST(ExtendOntology, AddsDeltaAndRho) {
    const auto o = parse_program("rule: Likes(x,y) -> MovFan(x).").onto();
    EXPECT_EQ(rule_texts(extend_ontology(o)),
              (std::set<std::string>{"Likes(x,y) -> MovFan(x)", "Likes(x,y) -> delta_Likes(x)",
                                     "Likes(x,y) -> rho_Likes(y)"}));
}

TEST(ExtendOntology, UnaryOnlyUnchanged) {
    const auto o = parse_program("rule: A(x) -> B(x).").onto();
    EXPECT_EQ(extend_ontology(o).rules, o.rules);
}

TEST(ExtendOntology, RunningExampleGainsFourRules) {
    const auto inst = load_instance("running.cqe");
    EXPECT_EQ(extend_ontology(inst.onto).rules.size(), inst.onto.rules.size() + 4);
}

TEST(ClosedSubsets, FanFriends) {
    const auto inst = load_instance("fan_friends.cqe");
    const auto subsets = closed_subsets({"MovFan", "ThrFan"}, extend_ontology(inst.onto));
    EXPECT_EQ(std::set<label_set>(subsets.begin(), subsets.end()),
              (std::set<label_set>{{}, {"MovFan"}, {"MovFan", "ThrFan"}}));
    EXPECT_TRUE(subsets.front().empty());
}

TEST(ClosedSubsets, EmptyCandidates) {
    EXPECT_EQ(closed_subsets({}, {}), (std::vector<label_set>{{}}));
}

TEST(ClosedSubsets, AbsentPredicateForced) {
    const auto inst = load_instance("fan_friends.cqe");
    const auto subsets = closed_subsets({"MovFan", "Zed"}, extend_ontology(inst.onto));
    EXPECT_EQ(std::set<label_set>(subsets.begin(), subsets.end()),
              (std::set<label_set>{{"Zed"}, {"MovFan", "Zed"}}));
}

TEST(ClosedSubsets, PolicyPredicateNotForced) {
    const auto extended = extend_ontology(parse_program("rule: S(x,y), B(x) -> R(y,x).").onto());
    const auto subsets = closed_subsets({"C", rho_name("S")}, extended, {{"C", 1}});
    EXPECT_EQ(std::set<label_set>(subsets.begin(), subsets.end()),
              (std::set<label_set>{{}, {"C"}, {rho_name("S")}, {"C", rho_name("S")}}));
    EXPECT_EQ(closed_subsets({"C"}, extended), (std::vector<label_set>{{"C"}}));
}

// Property: every returned subset is closed and every closed subset is returned.
TEST(ClosedSubsets, MatchesBruteForce) {
    instance_generator gen(suite_seed());
    for (int i = 0; i < 100; ++i) {
        const auto inst = gen.next(static_cast<instance_class>(i % 3));
        const auto extended = extend_ontology(inst.onto);
        const std::vector<std::string> preds = {"A", "B", "C"};
        const label_set candidates(preds.begin(), preds.end());
        std::set<label_set> expected;
        const auto rule_sig = extended.sig();
        for (unsigned mask = 0; mask < 8; ++mask) {
            label_set sub;
            for (unsigned k = 0; k < 3; ++k)
                if (mask & (1u << k)) sub.insert(preds[k]);
            dataset seed;
            const term c = term::anonymous("probe");
            for (const auto& p : sub) seed.insert(atom(p, {c}));
            bool closed = true;
            for (const auto& f : chase(extended, seed).facts.facts)
                if (f.arity == 1 && f.args[0] == c && !sub.count(f.predicate_name())) closed = false;
            for (const auto& p : preds)
                if (!rule_sig.count(p) && !sub.count(p)) closed = false;
            if (closed) expected.insert(sub);
        }
        const auto subsets = closed_subsets(candidates, extended);
        EXPECT_EQ(std::set<label_set>(subsets.begin(), subsets.end()), expected);
        EXPECT_EQ(subsets.size(), expected.size());
    }
}

TEST(GuardedView, FanFriends) {
    auto inst = load_instance("fan_friends.cqe");
    const auto v = build_view_guarded(inst);
    const auto john = copy_labels(v, "John");
    const auto bob = copy_labels(v, "Bob");
    EXPECT_TRUE(john.count({"MovFan"}));
    EXPECT_TRUE(john.count({"MovFan", "ThrFan"}));
    EXPECT_TRUE(bob.count({"MovFan", "ThrFan"}));
    EXPECT_TRUE(view_answers(inst, v.facts, inst.policy).empty());
    EXPECT_TRUE(certain_answers(inst.policy, inst.onto, v.facts).empty());
    const auto harmless =
        parse_query("Q() :- ThrFan(x), FoF(x,y), ThrFan(y), FoF(z,y), MovFan(z), FoF(z, Bob).");
    EXPECT_EQ(view_answers(inst, v.facts, harmless), (answer_set{tuple{}}));
    expect_invariants(inst, v);
}

// C only occurs in the policy; copies of b without C are what let S(b,_) out.
TEST(GuardedView, PolicyOnlyPredicateStaysOptional) {
    auto inst = instance_from_text(
        "rule: S(x,y), B(x) -> R(y,x).\nfact: A(Ca).\nfact: B(Ca).\nfact: C(Cb).\nfact: R(Cb,Ca).\n"
        "fact: S(Cb,Cb).\npolicy: P(x) :- S(x,y), C(y).");
    const auto v = build_view_guarded(inst);
    EXPECT_TRUE(holds_in(bcq("exists y. S(Cb,y)"), fact_store(v.facts)));
    const auto report = verify_censor(inst, censor::of_view(v.facts));
    EXPECT_TRUE(report.confidentiality);
    EXPECT_TRUE(report.optimality) << report.to_json();
    expect_invariants(inst, v);
}

TEST(CheckRole, FanFriends) {
    auto inst = load_instance("fan_friends.cqe");
    const auto v = build_view_guarded(inst);
    const auto john = copy_with(v, "John", {"MovFan", "ThrFan", delta_name("FoF")});
    const auto bob = copy_with(v, "Bob", {"MovFan", "ThrFan", rho_name("FoF")});
    ASSERT_TRUE(john && bob);
    EXPECT_TRUE(check_role(atom("FoF", {*john, *bob}), v.facts, inst));
    EXPECT_FALSE(check_role(atom("FoF", {term::constant("John"), *bob}), v.facts, inst));
}

TEST(CheckRole, UnreachablePolicyAllowsAnything) {
    auto inst = instance_from_text("rule: R(x,y) -> A(y).\nfact: R(Ca,Cb).\npolicy: P() :- B(Ca).");
    // the derived labels must already be present; the policy itself never blocks
    const auto labelled = facts_of("fact: A(Cb).\nfact: delta_R(Ca).\nfact: rho_R(Cb).");
    EXPECT_TRUE(check_role(parse_atom("R(Ca,Cb)"), labelled, inst));
    EXPECT_FALSE(check_role(parse_atom("R(Ca,Cb)"), {}, inst));
}

TEST(GuardedView, RunningExampleReleasesLikes) {
    auto inst = load_instance("running.cqe");
    const auto v = build_view_guarded(inst);
    expect_invariants(inst, v);
    EXPECT_EQ(view_answers(inst, v.facts, parse_query("Q() :- Likes(Bob, Seven).")), (answer_set{tuple{}}));
    EXPECT_TRUE(view_answers(inst, v.facts, inst.policy).empty());
}

TEST(GuardedView, NothingToHide) {
    auto inst = instance_from_text("rule: R(x,y) -> A(y).\nfact: R(Ca,Cb).\npolicy: P() :- B(Ca).");
    const auto v = build_view_guarded(inst);
    EXPECT_EQ(named_part(v.facts), chase(extend_ontology(inst.onto), inst.data).facts);
}

TEST(GuardedView, RejectsNonGuarded) {
    auto inst = load_instance("nonguarded.cqe");
    EXPECT_THROW(build_view_guarded(inst), view_error);
}

TEST(MultilinearView, ChainAgreesWithGuarded) {
    auto inst = instance_from_text(
        "rule: R(x,y) -> A(y).\nrule: A(x) -> B(x).\nfact: R(Ca,Cb).\npolicy: P(x) :- B(x).");
    const auto v = build_view_multilinear(inst);
    expect_invariants(inst, v);
    EXPECT_FALSE(copy_labels(v, "Cb").empty());
    const auto g = build_view_guarded(inst);
    EXPECT_TRUE(censors_agree(inst, censor::of_view(v.facts), censor::of_view(g.facts)).agree);
}

TEST(MultilinearView, NoUnaryPredicates) {
    auto inst = instance_from_text("rule: R(x,y) -> S(y,x).\nfact: R(Ca,Cb).\npolicy: P() :- S(Cb,Ca).");
    const auto v = build_view_multilinear(inst);
    expect_invariants(inst, v);
    for (const auto& [copy, labels] : v.labels) EXPECT_TRUE(user_labels(labels).empty());
}

TEST(MultilinearView, RejectsFanFriends) {
    auto inst = load_instance("fan_friends.cqe");
    EXPECT_THROW(build_view_multilinear(inst), view_error);
}

TEST(LinearView, MovieFanNamedPart) {
    auto inst = load_instance("movie_fan.cqe");
    const auto v = build_view_linear(inst);
    EXPECT_EQ(texts(named_part(v.facts)),
              (std::set<std::string>{"Movie(Seven)", "delta_Likes(John)", "rho_Likes(Seven)"}));
    EXPECT_EQ(named_part(v.facts), linear_v0(inst));
    EXPECT_EQ(texts(named_part(v.user_facts())), (std::set<std::string>{"Movie(Seven)"}));
    expect_invariants(inst, v);
}

TEST(LinearView, UnreachablePolicyKeepsEverything) {
    auto inst = instance_from_text("rule: R(x,y) -> A(y).\nfact: R(Ca,Cb).\npolicy: P() :- B(Ca).");
    EXPECT_EQ(named_part(build_view_linear(inst).facts), chase(extend_ontology(inst.onto), inst.data).facts);
}

TEST(LinearView, OnlyFactIsSecret) {
    auto inst = instance_from_text("fact: A(Ca).\npolicy: P() :- A(Ca).");
    const auto v = build_view_linear(inst);
    EXPECT_TRUE(named_part(v.facts).empty());
    expect_invariants(inst, v);
}

TEST(LinearView, RejectsNonLinear) {
    auto inst = load_instance("fan_friends.cqe");
    EXPECT_THROW(build_view_linear(inst), view_error);
}

TEST(ViewAnswers, VexBlocksBob) {
    auto inst = load_instance("running.cqe");
    const auto vex = facts_of(read_fixture("v_ex.cqe"));
    EXPECT_EQ(texts(view_answers(inst, vex, parse_query("Q(x) :- Likes(x, Seven)."))),
              (std::set<std::string>{"(John)"}));
    EXPECT_EQ(view_answers(inst, vex, parse_query("Q() :- Cr(x).")), (answer_set{tuple{}}));
}

TEST(ViewAnswers, EmptyView) {
    auto inst = load_instance("running.cqe");
    EXPECT_TRUE(view_answers(inst, {}, parse_query("Q() :- Cr(x).")).empty());
    EXPECT_TRUE(view_answers(inst, {}, parse_query("Q(x) :- ThrFan(x).")).empty());
}

TEST(Confidentiality, RunningExample) {
    auto inst = load_instance("running.cqe");
    EXPECT_TRUE(check_view_confidentiality(inst, facts_of(read_fixture("v_ex.cqe"))));
    EXPECT_FALSE(check_view_confidentiality(inst, inst.data));
    EXPECT_TRUE(check_view_confidentiality(inst, {}));
}

// Safety, closure, bounded optimality and builder agreement on random instances.
TEST(Views, RandomInstances) {
    instance_generator gen(suite_seed() + 7);
    verify_bound bound;
    for (int i = 0; i < 60; ++i) {
        const auto cls = static_cast<instance_class>(i % 3);
        auto inst = gen.next(cls);
        const auto flags = classify_shape(inst.with_policy_rule());
        if (!flags.guarded || !flags.tree_shaped) continue;
        SCOPED_TRACE(serialize(program{inst.onto.rules, inst.data, inst.policy, {}, {}}));
        const auto g = build_view_guarded(inst);
        expect_invariants(inst, g);
        const auto report = verify_censor(inst, censor::of_view(g.facts), bound);
        EXPECT_TRUE(report.confidentiality);
        EXPECT_TRUE(report.optimality) << report.to_json();
        if (flags.multi_linear) {
            const auto m = build_view_multilinear(inst);
            expect_invariants(inst, m);
            EXPECT_TRUE(censors_agree(inst, censor::of_view(m.facts), censor::of_view(g.facts), bound).agree);
        }
        if (flags.linear) {
            const auto l = build_view_linear(inst);
            expect_invariants(inst, l);
            EXPECT_EQ(named_part(l.facts), linear_v0(inst));
            EXPECT_TRUE(censors_agree(inst, censor::of_view(l.facts), censor::of_view(g.facts), bound).agree);
        }
    }
}

// The linear view does not depend on rule order.
TEST(LinearView, RuleOrderInvariant) {
    instance_generator gen(suite_seed() + 8);
    std::mt19937 rng(3);
    int checked = 0;
    for (int i = 0; i < 500 && checked < 40; ++i) {
        auto inst = gen.next(instance_class::linear);
        if (!classify_shape(inst.with_policy_rule()).linear) continue;
        ++checked;
        const auto first = build_view_linear(inst);
        auto rules = inst.onto.rules;
        std::shuffle(rules.begin(), rules.end(), rng);
        auto shuffled = make_instance({rules}, inst.data, inst.policy);
        EXPECT_EQ(build_view_linear(shuffled).facts, first.facts);
    }
    EXPECT_EQ(checked, 40);
}
