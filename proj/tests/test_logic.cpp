#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "policycheck/logic.hpp"
#include "testutil.hpp"

using namespace policycheck::logic;

TEST_CASE("print/parse round trip on random terms") {
    testutil::TermGen gen(20260826);
    for (int i = 0; i < 10000; ++i) {
        Term t = gen.boolean(1 + static_cast<int>(gen.pick(4)));
        std::string s = print_term(t);
        Term back = parse_term(s, gen.env);
        CHECK(equal(t, back));
        CHECK(print_term(back) == s);
        CHECK(back->sort == t->sort);
    }
}

TEST_CASE("round trip on random numeric terms") {
    testutil::TermGen gen(7);
    for (int i = 0; i < 2000; ++i) {
        Term t = gen.numeric(3);
        Term back = parse_term(print_term(t), gen.env);
        CHECK(equal(t, back));
    }
}

TEST_CASE("builders reject ill-sorted terms") {
    SymbolTable env;
    env.add_datatype({"Color", {"RED", "GREEN", "BLUE"}});
    Term p = mk_var("p", Sort::boolean());
    Term x = mk_var("x", Sort::integer());
    Term c = mk_var("c", Sort::dt("Color"));

    CHECK_THROWS_AS(mk_and({p, x}), SortError);
    CHECK_THROWS_AS(mk_or({x, p}), SortError);
    CHECK_THROWS_AS(mk_not(x), SortError);
    CHECK_THROWS_AS(mk_implies(p, x), SortError);
    CHECK_THROWS_AS(mk_op(OpKind::Add, p, x), SortError);
    CHECK_THROWS_AS(mk_op(OpKind::Lt, c, x), SortError);
    CHECK_THROWS_AS(mk_op(OpKind::Eq, c, x), SortError);
    CHECK_THROWS_AS(mk_op(OpKind::Eq, c, p), SortError);

    try {
        mk_op(OpKind::Add, p, x);
        CHECK(false);
    } catch (const SortError& e) {
        CHECK(e.offending.find("(+ p x)") != std::string::npos);
    }
}

TEST_CASE("parser rejects malformed input with positions") {
    SymbolTable env;
    env.add_const("p", Sort::boolean());
    env.add_const("x", Sort::integer());

    struct Bad {
        const char* text;
    };
    for (const char* text : {"(and p", "(and p))", "", "(= x)", "()", "(and p ("}) {
        CHECK_THROWS_AS(parse_term(text, env), SyntaxError);
    }
    try {
        parse_term("(and p (or p", env);
        CHECK(false);
    } catch (const SyntaxError& e) {
        CHECK(e.position <= std::string("(and p (or p").size());
    }

    CHECK_THROWS_AS(parse_term("(and p qq)", env), UnknownSymbol);
    try {
        parse_term("(and p xx)", env);
        CHECK(false);
    } catch (const UnknownSymbol& e) {
        CHECK(e.name == "xx");
        CHECK(e.suggestion == "x");
    }

    CHECK_THROWS_AS(parse_term("(p x 1)", env), SyntaxError);
    CHECK_THROWS_AS(parse_term("(f x 1)", env), UnknownSymbol);
    CHECK_THROWS_AS(parse_term("(and p (> x p))", env), SortError);
    CHECK_THROWS_AS(parse_term("p (and p p)", env), SyntaxError);
}

TEST_CASE("sort checking matches the declared environment") {
    SymbolTable env;
    env.add_datatype({"Season", {"LOW", "HIGH"}});
    env.add_const("s", Sort::dt("Season"));
    env.add_const("fee", Sort::real());
    env.add_const("n", Sort::integer());

    CHECK(parse_term("(= s LOW)", env)->sort == Sort::boolean());
    CHECK(parse_term("(+ n 1)", env)->sort == Sort::integer());
    CHECK(parse_term("(+ fee n)", env)->sort == Sort::real());
    CHECK(parse_term("(/ n 2)", env)->sort == Sort::real());
    CHECK(parse_term("(= fee n)", env)->sort == Sort::boolean());
    CHECK_THROWS_AS(parse_term("(= s 1)", env), SortError);
    CHECK_THROWS_AS(env.add_datatype({"Season", {"A"}}), LogicError);
    CHECK_THROWS_AS(env.add_const("s", Sort::boolean()), LogicError);
}

TEST_CASE("exact rational literals") {
    CHECK(parse_rational("123") == mpq_class(123));
    CHECK(parse_rational("0.75") == mpq_class(3, 4));
    CHECK(parse_rational("-3.5") == mpq_class(-7, 2));
    CHECK(parse_rational("763/20") == mpq_class(763, 20));
    CHECK(parse_rational("35.4") == mpq_class(177, 5));
    CHECK_THROWS(parse_rational("abc"));
    CHECK_THROWS(parse_rational("1.2.3"));

    CHECK(*exact_decimal(mpq_class(3, 4)) == "0.75");
    CHECK(*exact_decimal(mpq_class(50)) == "50.0");
    CHECK(*exact_decimal(mpq_class(-7, 2)) == "-3.5");
    CHECK(*exact_decimal(mpq_class(5653, 160)) == "35.33125");
    CHECK(!exact_decimal(mpq_class(1, 3)).has_value());
    CHECK(rational_display(mpq_class(1, 3)) == "1/3");
    CHECK(rational_display(mpq_class(3, 4)) == "0.75");
}

TEST_CASE("exact arithmetic chain from the park computation") {
    // 37.5 -> 38.125 -> 32.125 -> 35.3375, all exact.
    mpq_class base = 50;
    mpq_class fee = base * mpq_class(3, 4);
    CHECK(fee == mpq_class(75, 2));
    mpq_class after = fee * (1 - mpq_class(1, 4)) + 10;
    CHECK(after == mpq_class(305, 8));
    CHECK(*exact_decimal(after) == "38.125");
    mpq_class credits = 15;
    mpq_class cash = after - mpq_class(2, 5) * credits;
    CHECK(*exact_decimal(cash) == "32.125");
    mpq_class total = cash + 3 * 1;  // one credit increment costs 3
    mpq_class final_ = total * mpq_class(11, 10);
    // with creditUnit = 3: total 32.125 + 0, final 35.3375
    mpq_class final3 = (after - mpq_class(2, 5) * 15 + 0) * mpq_class(11, 10);
    CHECK(*exact_decimal(final3) == "35.3375");
    CHECK(final3 < mpq_class(177, 5) + mpq_class(1, 10));
    (void)final_;
}

TEST_CASE("evaluation is exact and total-assignment checked") {
    testutil::TermGen gen(3);
    ValueMap v{{"p", Value::boolean(true)},   {"q", Value::boolean(false)},
               {"x", Value::integer(3)},      {"y", Value::integer(-2)},
               {"u", Value::real(mpq_class(1, 2))}, {"v", Value::real(7)},
               {"c", Value::dt("GREEN")}};

    Term t = parse_term("(=> p (> (+ x y) 0))", gen.env);
    CHECK(eval_bool(t, v) == true);
    CHECK(eval_bool(parse_term("(= c GREEN)", gen.env), v));
    CHECK(!eval_bool(parse_term("(= c RED)", gen.env), v));
    CHECK(eval_term(parse_term("(/ x y)", gen.env), v).num == mpq_class(-3, 2));
    CHECK(eval_term(parse_term("(* u v)", gen.env), v).num == mpq_class(7, 2));

    ValueMap partial{{"p", Value::boolean(true)}};
    CHECK_THROWS_AS(eval_bool(parse_term("(and p q)", gen.env), partial), EvalError);
    CHECK_THROWS_AS(eval_term(parse_term("(/ x (- y (- 0 2)))", gen.env), v), EvalError);
}

TEST_CASE("free_vars and node_count") {
    testutil::TermGen gen(5);
    Term t = parse_term("(and p (=> (= c RED) (> (+ x x) y)))", gen.env);
    CHECK(free_vars(t) == std::set<std::string>{"p", "c", "x", "y"});
    CHECK(node_count(t) == 11);
    CHECK(free_vars(mk_bool(true)).empty());
}

TEST_CASE("sexp stream parsing") {
    auto v = parse_sexp_stream("(a b) (c (d e)) atom");
    CHECK(v.size() == 3);
    CHECK(v[2].atom);
    CHECK(sexp_to_string(v[1]) == "(c (d e))");
    CHECK_THROWS_AS(parse_sexp("(a b) trailing"), SyntaxError);
    CHECK(parse_sexp_stream("; comment only\n").empty());
}
