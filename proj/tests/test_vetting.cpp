#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "policycheck/vetting.hpp"
#include "testutil.hpp"

using namespace policycheck;
using namespace policycheck::vetting;
using namespace policycheck::logic;
using nlohmann::json;

namespace {

solver::SolverSession make_session() { return solver::SolverSession{solver::SolverConfig{}}; }

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

model::PolicyModel bools(std::initializer_list<const char*> rules) {
    model::PolicyModel m;
    m.variables = {{"p", Sort::boolean(), "the first switch is on"},
                   {"q", Sort::boolean(), "the second switch is on"},
                   {"r", Sort::boolean(), "the third switch is on"}};
    auto env = m.env();
    int i = 0;
    for (const char* r : rules) m.rules.push_back({"r" + std::to_string(++i), parse_term(r, env), ""});
    return m;
}

}  // namespace

TEST_CASE("lint flags a contradictory rule set with a two-rule core") {
    auto s = make_session();
    auto m = bools({"p", "(not p)", "q"});
    auto report = lint(m, s);
    CHECK(!report.clean());
    bool found = false;
    for (const auto& e : report.errors)
        if (e.code == "CONTRADICTORY_RULES") {
            found = true;
            std::set<std::string> core(e.core.begin(), e.core.end());
            CHECK(core == std::set<std::string>{"r1", "r2"});
        }
    CHECK(found);
}

TEST_CASE("lint flags self-unsatisfiable and tautological rules") {
    auto s = make_session();
    auto m = bools({"(and p (not p))"});
    auto report = lint(m, s);
    bool unsat_rule = false;
    for (const auto& e : report.errors) unsat_rule |= e.code == "UNSAT_RULE";
    CHECK(unsat_rule);

    auto m2 = bools({"(or p (not p))", "q"});
    auto r2 = lint(m2, s);
    CHECK(r2.clean());
    bool tautology = false;
    for (const auto& w : r2.warnings)
        if (w.code == "TAUTOLOGICAL_RULE") {
            tautology = true;
            CHECK(w.subject == "r1");
        }
    CHECK(tautology);
}

TEST_CASE("lint warns about unused variables and semantic duplicates") {
    auto s = make_session();
    auto m = bools({"(=> p q)", "(or (not p) q)"});
    auto report = lint(m, s);
    CHECK(report.clean());
    bool unused = false, dup = false;
    for (const auto& w : report.warnings) {
        if (w.code == "UNUSED_VARIABLE" && w.subject == "r") unused = true;
        if (w.code == "DUPLICATE_RULE") {
            dup = true;
            CHECK(w.subject == "r2");
        }
    }
    CHECK(unused);
    CHECK(dup);
}

TEST_CASE("lint accepts the park model with only an unused-variable warning") {
    auto s = make_session();
    auto m = model::load(testutil::fixture("park/model.json"));
    auto report = lint(m, s);
    CHECK(report.clean());
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].code == "UNUSED_VARIABLE");
    CHECK(report.warnings[0].subject == "ageClass");

    json j = json::parse(lint_report_json(report));
    CHECK(j["errors"].empty());
    CHECK(j["warnings"][0]["code"] == "UNUSED_VARIABLE");
}

TEST_CASE("structured english rendering") {
    model::PolicyModel m;
    m.variables = {{"open", Sort::boolean(), "the office is open"},
                   {"weekend", Sort::boolean(), "the day is a weekend day"},
                   {"fee", Sort::real(), "the fee in dollars"},
                   {"rate", Sort::real(), "the discount rate"}};
    auto env = m.env();
    auto render = [&](const char* term) {
        return render_structured_english({"x", parse_term(term, env), ""}, m.variables);
    };

    CHECK(render("(=> weekend (not open))") ==
          "if the day is a weekend day, then it is not the case that the office is open");
    CHECK(render("open") == "it holds that: the office is open");
    CHECK(render("(= fee 50.0)") == "the fee in dollars equals 50.0");
    CHECK(render("(<= fee 100.0)") == "the fee in dollars is at most 100.0");
    CHECK(render("(= fee (* 0.75 fee))") ==
          "the fee in dollars equals 0.75 times the fee in dollars");
    CHECK(render("(=> (and weekend open) (not open))") ==
          "if the day is a weekend day and the office is open, then it is not the case "
          "that the office is open");
    CHECK(render("(or (and weekend open) (not open))") ==
          "(the day is a weekend day and the office is open) or it is not the case that "
          "the office is open");
    // nested arithmetic is parenthesized
    CHECK(render("(= fee (+ (* fee (- 1.0 rate)) 10.0))") ==
          "the fee in dollars equals (the fee in dollars times (1.0 minus the discount "
          "rate)) plus 10.0");
    // undeclared names fall back to the raw symbol
    CHECK(render("(> fee 0)") == "the fee in dollars is greater than 0");
}

TEST_CASE("aggregate_category severity order") {
    using verifier::Category;
    auto finding = [](Category c) {
        verifier::Finding f;
        f.category = c;
        return f;
    };
    CHECK(aggregate_category({finding(Category::Valid), finding(Category::Valid)}) ==
          Category::Valid);
    CHECK(aggregate_category({finding(Category::Valid), finding(Category::Satisfiable)}) ==
          Category::Satisfiable);
    CHECK(aggregate_category({finding(Category::Satisfiable), finding(Category::Invalid),
                              finding(Category::TooComplex)}) == Category::Invalid);
    CHECK(aggregate_category({finding(Category::Invalid), finding(Category::Impossible)}) ==
          Category::Impossible);
    CHECK(aggregate_category({finding(Category::NoTranslations),
                              finding(Category::TranslationAmbiguous)}) ==
          Category::TranslationAmbiguous);
    CHECK(aggregate_category({finding(Category::NoTranslations)}) == Category::NoTranslations);
    CHECK(aggregate_category({}) == Category::NoTranslations);
}

TEST_CASE("manual QA tests: prevet model fails, vetted model passes") {
    auto s = make_session();
    auto pool = translator::scripted_pool(testutil::fixture("refund/translators"));

    std::string qa = slurp(testutil::fixture("refund/qa.txt"));
    TestCase tc;
    tc.kind = TestCase::Kind::ManualQA;
    size_t nl = qa.find('\n');
    tc.question = qa.substr(0, nl);
    tc.answer = qa.substr(nl + 1);
    tc.expected = verifier::Category::Valid;

    auto prevet = model::load(testutil::fixture("refund/prevet.json"));
    auto out1 = run_manual_tests({tc}, prevet, pool, s, {});
    REQUIRE(out1.size() == 1);
    CHECK(!out1[0].pass);
    CHECK(out1[0].actual == verifier::Category::Impossible);
    CHECK(out1[0].message.find("model") != std::string::npos);
    CHECK(out1[0].message.find("test") != std::string::npos);

    auto vetted = model::load(testutil::fixture("refund/vetted.json"));
    auto out2 = run_manual_tests({tc}, vetted, pool, s, {});
    REQUIRE(out2.size() == 1);
    CHECK(out2[0].pass);
    CHECK(out2[0].actual == verifier::Category::Valid);
}

TEST_CASE("symbolic test generation is deterministic and self-checking") {
    auto s = make_session();
    auto m = model::load(testutil::fixture("refund/vetted.json"));
    auto a = generate_symbolic_tests(m, 20, 42, s);
    auto b = generate_symbolic_tests(m, 20, 42, s);
    REQUIRE(a.size() == 20);
    CHECK(test_cases_to_json(a) == test_cases_to_json(b));
    auto c = generate_symbolic_tests(m, 20, 43, s);
    CHECK(test_cases_to_json(a) != test_cases_to_json(c));

    for (const auto& t : a) {
        CHECK(t.kind == TestCase::Kind::Symbolic);
        CHECK(t.provenance == "generated");
        CHECK(t.premise != nullptr);
        CHECK(t.conclusion != nullptr);
    }

    // the generated suite passes against the model it was generated from
    translator::TranslatorPool no_pool;
    auto outcomes = run_tests(a, m, no_pool, s, {});
    for (const auto& o : outcomes) CHECK(o.pass);

    json j = json::parse(outcomes_to_json(outcomes));
    CHECK(j["total"] == 20);
    CHECK(j["passed"] == 20);
    CHECK(j["outcomes"].size() == 20);
}

TEST_CASE("symbolic test cases survive a json round trip") {
    auto s = make_session();
    auto m = model::load(testutil::fixture("park/model.json"));
    auto cases = generate_symbolic_tests(m, 10, 7, s);
    auto back = test_cases_from_json(test_cases_to_json(cases), m);
    REQUIRE(back.size() == cases.size());
    for (size_t i = 0; i < cases.size(); ++i) {
        CHECK(equal(back[i].premise, cases[i].premise));
        CHECK(equal(back[i].conclusion, cases[i].conclusion));
        CHECK(back[i].expected == cases[i].expected);
        CHECK(back[i].provenance == cases[i].provenance);
    }
}

TEST_CASE("generated suites include non-valid labels") {
    auto s = make_session();
    auto m = model::load(testutil::fixture("park/model.json"));
    auto cases = generate_symbolic_tests(m, 40, 5, s);
    std::set<verifier::Category> seen;
    for (const auto& t : cases) seen.insert(t.expected);
    CHECK(seen.size() >= 2);
}

TEST_CASE("repair_from_feedback applies the patch and re-validates") {
    auto s = make_session();
    auto m = model::load(testutil::fixture("refund/prevet.json"));
    const auto* r1 = m.find_rule("r1");
    REQUIRE(r1 != nullptr);

    std::string feedback =
        "Passengers denied boarding did not travel, yet they are still eligible.";
    std::string input =
        "r1\n" + print_term(r1->term) + "\n" + feedback;
    json fixture;
    fixture["repair"][translator::digest(input)] = {
        {"rules",
         {{{"id", "r1"},
           {"smtlib",
            "(=> (and didFlightOperate (not didPassengerTravel) (not (= flightDisruptionReason "
            "DENIED_BOARDING))) (not isRefundEligible))"}}}}};
    auto b = translator::ScriptedBackend::from_json("b1", fixture);

    auto fixed = repair_from_feedback(m, "r1", feedback, b, s);
    auto vetted = model::load(testutil::fixture("refund/vetted.json"));
    CHECK(print_term(fixed.find_rule("r1")->term) == print_term(vetted.find_rule("r1")->term));
    // everything else untouched
    CHECK(print_term(fixed.find_rule("r2")->term) == print_term(m.find_rule("r2")->term));
    CHECK(fixed.variables.size() == m.variables.size());

    // a patch that breaks the model at error level is rejected
    json bad;
    bad["repair"][translator::digest(input)] = {
        {"rules", {{{"id", "r1"}, {"smtlib", "(and isRefundEligible (not isRefundEligible))"}}}}};
    auto bb = translator::ScriptedBackend::from_json("b2", bad);
    CHECK_THROWS_AS(repair_from_feedback(m, "r1", feedback, bb, s), VettingError);

    CHECK_THROWS_AS(repair_from_feedback(m, "no_such_rule", feedback, b, s), VettingError);
}

TEST_CASE("stamp_vetted records who and when") {
    auto m = model::load(testutil::fixture("refund/prevet.json"));
    CHECK(!m.metadata.count("vetted"));
    stamp_vetted(m, "reviewer");
    CHECK(m.metadata.at("vetted") == "true");
    CHECK(m.metadata.at("vetted_by") == "reviewer");
    const std::string& at = m.metadata.at("vetted_at");
    CHECK(at.size() == 20);  // ISO-8601 UTC, e.g. 2026-08-26T12:00:00Z
    CHECK(at.back() == 'Z');
}
