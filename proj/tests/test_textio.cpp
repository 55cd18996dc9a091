#include <gtest/gtest.h>

#include "cqe/textio.hpp"
#include "support.hpp"

using namespace cqe;
using namespace cqe::testing;

TEST(Parse, DatalogRuleWithTwoBodyAtoms) {
    const auto p = parse_program("rule: Likes(x,y), Thr(y) -> ThrFan(x).");
    ASSERT_EQ(p.rules.size(), 1u);
    EXPECT_EQ(p.rules[0].body.size(), 2u);
    EXPECT_TRUE(p.rules[0].existentials.empty());
    EXPECT_EQ(to_string(p.rules[0]), "Likes(x,y), Thr(y) -> ThrFan(x)");
}

TEST(Parse, ExistentialRule) {
    const auto p = parse_program("rule: A(x) -> exists y. R(x,y), B(y).");
    ASSERT_EQ(p.rules.size(), 1u);
    EXPECT_EQ(p.rules[0].existentials, std::vector<term>{term::variable("y")});
    EXPECT_EQ(p.rules[0].head.size(), 2u);
    EXPECT_FALSE(classify_shape(p.onto()).datalog);
}

TEST(Parse, ExistentialOutsideTypeThreeRejected) {
    EXPECT_THROW(parse_program("rule: R(x,z) -> exists y. R(x,y), R(y,z)."), parse_error);
}

TEST(Parse, ArityMismatchAcrossFacts) {
    EXPECT_THROW(parse_program("fact: FoF(John, Bob).\nfact: FoF(John)."), parse_error);
}

TEST(Parse, ArityMismatchReportsLine) {
    try {
        parse_program("fact: FoF(John, Bob).\nfact: FoF(John).");
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_GT(e.column(), 0);
    }
}

TEST(Parse, SyntaxErrorPosition) {
    try {
        parse_program("fact: A(Ca).\n  fact A(Cb).");
        FAIL();
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.column(), 8);
    }
}

TEST(Parse, UnsafeRule) { EXPECT_THROW(parse_program("rule: A(x) -> R(x,y)."), parse_error); }

TEST(Parse, LexicalTermKinds) {
    const auto a = parse_atom("R(Bob, \"bob smith\")");
    EXPECT_TRUE(a.args[0].is_instance_constant());
    EXPECT_TRUE(a.args[1].is_instance_constant());
    EXPECT_EQ(a.args[1].name(), "bob smith");
    EXPECT_TRUE(parse_atom("R(x, Y)").args[0].is_variable());
}

TEST(Parse, HeadConjunctionSplits) {
    const auto p = parse_program("rule: A(x) -> B(x), C(x).");
    ASSERT_EQ(p.rules.size(), 2u);
    EXPECT_EQ(to_string(p.rules[0]), "A(x) -> B(x)");
    EXPECT_EQ(to_string(p.rules[1]), "A(x) -> C(x)");
}

TEST(Parse, SecondPolicyRejected) {
    EXPECT_THROW(parse_program("policy: P(x) :- A(x).\npolicy: P(x) :- B(x)."), parse_error);
}

TEST(Parse, CommentsAndOptions) {
    const auto p = parse_program("% heading\noption: profile = ql. # trailing\nfact: A(Ca).");
    EXPECT_EQ(p.profile(), profile_mode::ql);
    EXPECT_EQ(p.facts.size(), 1u);
}

TEST(Parse, UnknownProfile) {
    EXPECT_THROW(parse_program("option: profile = dl.").profile(), std::exception);
}

TEST(Query, OneFreeVariable) {
    const auto q = parse_query("Q(x) :- FoF(John, x).");
    EXPECT_EQ(q.free, std::vector<term>{term::variable("x")});
    ASSERT_EQ(q.body.size(), 1u);
    EXPECT_EQ(q.body[0].args[0], term::constant("John"));
}

TEST(Query, BooleanTriangle) {
    const auto q = parse_query("Q() :- R(x,y), R(y,z), R(z,x).");
    EXPECT_TRUE(q.free.empty());
    EXPECT_EQ(q.body.size(), 3u);
}

TEST(Query, EmptyBody) { EXPECT_THROW(parse_query("Q(x) :- ."), parse_error); }

TEST(Query, PeriodOptional) { EXPECT_EQ(parse_query("Q(x) :- A(x)"), parse_query("Q(x) :- A(x).")); }

TEST(Query, FreeVariableMustOccur) { EXPECT_THROW(parse_query("Q(y) :- A(x)."), parse_error); }

TEST(Query, NamedQueriesKeepOrder) {
    const auto p = parse_program("query: First(x) :- A(x).\nquery: Second() :- B(Ca).");
    ASSERT_EQ(p.queries.size(), 2u);
    EXPECT_EQ(p.queries[0].first, "First");
    EXPECT_EQ(p.queries[1].first, "Second");
}

TEST(UnionQuery, Disjuncts) {
    const auto u = parse_union_query("MovFan(John) | exists y. Likes(John,y)");
    ASSERT_EQ(u.disjuncts.size(), 2u);
    EXPECT_TRUE(u.disjuncts[0].free.empty());
    EXPECT_EQ(format_boolean(u.disjuncts[1]), "exists y. Likes(John,y)");
}

TEST(Serialize, MovieFanObstruction) {
    const auto u = parse_union_query("MovFan(John) | exists y. Likes(John,y)");
    EXPECT_EQ(serialize(u), "MovFan(John) | exists y. Likes(John,y)");
}

TEST(Serialize, AnswersJson) {
    answer_set answers{tuple{term::constant("Bob")}};
    EXPECT_EQ(answers_json(answers), R"({"answers":[["Bob"]]})");
}

TEST(Serialize, EmptyAnswersJson) { EXPECT_EQ(answers_json({}), R"({"answers":[]})"); }

TEST(Serialize, RunningExampleRoundTrip) {
    const auto p = parse_program(read_fixture("running.cqe"));
    EXPECT_EQ(parse_program(serialize(p)), p);
}

TEST(Serialize, Idempotent) {
    for (const auto* name : {"running.cqe", "fan_friends.cqe", "movie_fan.cqe", "no_obstruction.cqe", "v_ex.cqe"}) {
        SCOPED_TRACE(name);
        const auto once = serialize(parse_program(read_fixture(name)));
        EXPECT_EQ(serialize(parse_program(once)), once);
    }
}

TEST(Serialize, DatasetOrderIsLexicographic) {
    const auto d = facts_of("fact: R(Cb,Ca).\nfact: A(Cb).\nfact: R(Ca,Cb).\nfact: A(Ca).");
    EXPECT_EQ(serialize(d), "fact: A(Ca).\nfact: A(Cb).\nfact: R(Ca,Cb).\nfact: R(Cb,Ca).\n");
}

TEST(Serialize, AnonymousConstantsRoundTrip) {
    dataset d;
    const auto anon = term::anonymous("an_b");
    d.insert(atom("FoF", {term::constant("John"), anon}));
    const auto text = serialize(d);
    EXPECT_NE(text.find("_anon:an_b"), std::string::npos);
    const auto back = facts_of(text);
    EXPECT_EQ(back, d);
    EXPECT_TRUE(back.facts.begin()->args[1].kind() == term_kind::anonymous);
}

TEST(Serialize, SkolemRoundTrip) {
    const auto a = parse_atom("R(_sk:f1, Ca)");
    EXPECT_TRUE(a.args[0].kind() == term_kind::skolem);
    EXPECT_EQ(parse_atom(to_string(a)), a);
}

TEST(Serialize, QuotedConstantsRoundTrip) {
    const auto d = facts_of("fact: R(\"a\", \"two words\").");
    EXPECT_EQ(facts_of(serialize(d)), d);
}

TEST(Json, DatasetRoundTrip) {
    const auto d = facts_of(read_fixture("v_ex.cqe"));
    EXPECT_EQ(dataset_from_json(dataset_json(d)), d);
}

TEST(Json, UnionQueryRoundTrip) {
    const auto u = union_query_from_json(read_fixture("u_ex.json"));
    EXPECT_EQ(u.disjuncts.size(), 4u);
    // variables are renamed on output, so compare canonical text
    const auto back = union_query_from_json(union_query_json(u));
    EXPECT_EQ(serialize(back), serialize(u));
    EXPECT_EQ(union_query_json(back), union_query_json(u));
}

// Property: random programs survive serialize/parse unchanged.
TEST(Serialize, RandomProgramsRoundTrip) {
    instance_generator gen(suite_seed());
    for (int i = 0; i < 200; ++i) {
        const auto inst = gen.next(static_cast<instance_class>(i % 4));
        program p;
        p.rules = inst.onto.rules;
        p.facts = inst.data;
        p.policy = inst.policy;
        const auto text = serialize(p);
        EXPECT_EQ(parse_program(text), p) << text;
    }
}
