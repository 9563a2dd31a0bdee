#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "policycheck/metrics.hpp"
#include "testutil.hpp"

using namespace policycheck;
using namespace policycheck::metrics;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Published benchmark rows: counts plus expected one-decimal displays.
struct GoldenRow {
    long tp, fp, tn, fn;
    const char* soundness;
    const char* fpr;
    const char* precision;
    const char* recall;
    const char* f1;
    const char* accuracy;
};

}  // namespace

TEST_CASE("metric identities hold on random counts") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 2000; ++i) {
        ConfusionCounts c{static_cast<long>(rng() % 50), static_cast<long>(rng() % 50),
                          static_cast<long>(rng() % 50), static_cast<long>(rng() % 50)};
        if (c.total() == 0) continue;
        MetricsRow r = compute_metrics(c);
        auto frac = [](long num, long den) {
            return mpq_class(100 * mpq_class(num) / mpq_class(den));
        };
        CHECK(r.soundness == mpq_class(100 - frac(c.fp, c.total())));
        CHECK(r.accuracy == frac(c.tp + c.tn, c.total()));
        if (c.fp + c.tn > 0) CHECK(r.fpr == frac(c.fp, c.fp + c.tn));
        if (c.tp + c.fp > 0) CHECK(r.precision == frac(c.tp, c.tp + c.fp));
        else CHECK(r.precision == 0);
        if (c.tp + c.fn > 0) CHECK(r.recall == frac(c.tp, c.tp + c.fn));
        if (r.precision + r.recall > 0)
            CHECK(r.f1 == 2 * r.precision * r.recall / (r.precision + r.recall));
        else CHECK(r.f1 == 0);
        CHECK(r.soundness >= 0);
        CHECK(r.soundness <= 100);
        CHECK(r.f1 >= 0);
        CHECK(r.f1 <= 100);
    }
    CHECK_THROWS_AS(compute_metrics(ConfusionCounts{}), EmptyCounts);
}

TEST_CASE("round1 is half away from zero at one decimal") {
    CHECK(round1(mpq_class(0)) == "0.0");
    CHECK(round1(mpq_class(100)) == "100.0");
    CHECK(round1(mpq_class(1, 3) * 100) == "33.3");
    CHECK(round1(mpq_class(2, 3) * 100) == "66.7");
    CHECK(round1(mpq_class(9925, 100)) == "99.3");  // 99.25 rounds up
    CHECK(round1(mpq_class(-9925, 100)) == "-99.3");
    CHECK(round1(mpq_class(1, 16) * 100) == "6.3");  // 6.25
    CHECK(round1(mpq_class(997, 10)) == "99.7");
}

TEST_CASE("published benchmark rows reproduce") {
    // Verdict-level guardrail rows and the comparison baselines, as
    // (tp, fp, tn, fn) with their published one-decimal metric displays.
    const GoldenRow rows[] = {
        {121, 1, 129, 9, "99.6", "0.8", "99.2", "93.1", "96.0", "96.2"},
        {88, 0, 130, 42, "100.0", "0.0", "100.0", "67.7", "80.7", "83.8"},
        {121, 10, 120, 9, "96.2", "7.7", "92.4", "93.1", "92.7", "92.7"},
        {117, 33, 97, 13, "87.3", "25.4", "78.0", "90.0", "83.6", "82.3"},
        {110, 53, 77, 20, "79.6", "40.8", "67.5", "84.6", "75.1", "71.9"},
    };
    for (const auto& g : rows) {
        MetricsRow r = compute_metrics({g.tp, g.fp, g.tn, g.fn});
        CHECK(round1(r.soundness) == g.soundness);
        CHECK(round1(r.fpr) == g.fpr);
        CHECK(round1(r.precision) == g.precision);
        CHECK(round1(r.recall) == g.recall);
        CHECK(round1(r.f1) == g.f1);
        CHECK(round1(r.accuracy) == g.accuracy);
    }
}

TEST_CASE("degenerate counts follow the stated conventions") {
    MetricsRow r = compute_metrics({0, 0, 10, 0});
    CHECK(r.precision == 0);
    CHECK(r.recall == 0);
    CHECK(r.f1 == 0);
    CHECK(r.soundness == 100);
    CHECK(r.accuracy == 100);

    json j = json::parse(metrics_json({1, 2, 3, 4}, compute_metrics({1, 2, 3, 4})));
    CHECK(j["counts"]["tp"] == 1);
    CHECK(j["counts"]["fp"] == 2);
    CHECK(j["metrics"].contains("soundness"));
}

TEST_CASE("parse_dataset") {
    std::string good = R"([
      {"question": "q1", "answer": "a1", "label": "VALID"},
      {"question": "q2", "answer": "a2", "label": "INVALID", "document_ref": "doc.md"}
    ])";
    auto ds = parse_dataset(good);
    REQUIRE(ds.size() == 2);
    CHECK(ds[0].label == verifier::Category::Valid);
    CHECK(ds[1].label == verifier::Category::Invalid);
    CHECK(ds[1].document_ref == "doc.md");

    CHECK_THROWS_AS(parse_dataset("{}"), DatasetFormat);
    CHECK_THROWS_AS(parse_dataset("[{\"question\":\"q\"}]"), DatasetFormat);
    CHECK_THROWS_AS(parse_dataset("[{\"question\":\"q\",\"answer\":\"a\",\"label\":\"WAT\"}]"),
                    DatasetFormat);
    CHECK_THROWS_AS(parse_dataset("not json"), DatasetFormat);
}

TEST_CASE("run_eval on the park fixture") {
    auto m = model::load(testutil::fixture("park/model.json"));
    auto pool = translator::scripted_pool(testutil::fixture("park/translators"));
    std::string qa = slurp(testutil::fixture("park/qa.txt"));
    size_t nl = qa.find('\n');

    // The park QA is SATISFIABLE, i.e. not Valid: label VALID -> fn,
    // label SATISFIABLE -> tn.
    std::vector<DatasetCase> ds(2);
    ds[0].question = qa.substr(0, nl);
    ds[0].answer = qa.substr(nl + 1);
    ds[0].label = verifier::Category::Valid;
    ds[1] = ds[0];
    ds[1].label = verifier::Category::Satisfiable;

    EvalConfig cfg;
    auto res = run_eval(ds, m, pool, cfg);
    CHECK(res.counts.fn == 1);
    CHECK(res.counts.tn == 1);
    CHECK(res.counts.tp == 0);
    CHECK(res.counts.fp == 0);
    REQUIRE(res.cases.size() == 2);
    CHECK(res.cases[0].verdict == verifier::Category::Satisfiable);
    CHECK(!res.cases[0].correct);
    CHECK(res.cases[1].correct);

    json j = json::parse(eval_json(res));
    CHECK(j["binarization"].is_string());
    CHECK(j["cases"].size() == 2);

    // multi-worker run agrees with the single-worker run
    cfg.workers = 4;
    auto res4 = run_eval(ds, m, pool, cfg);
    CHECK(res4.counts.fn == res.counts.fn);
    CHECK(res4.counts.tn == res.counts.tn);
    REQUIRE(res4.cases.size() == 2);
    CHECK(res4.cases[0].verdict == res.cases[0].verdict);
}

TEST_CASE("render_feedback narrates the finding") {
    auto m = model::load(testutil::fixture("refund/prevet.json"));
    auto s = solver::SolverSession{solver::SolverConfig{}};
    auto env = m.env();
    translator::ClaimPair p;
    p.premise = logic::parse_term(
        "(and didFlightOperate (not didPassengerTravel)"
        " (= flightDisruptionReason DENIED_BOARDING))", env);
    p.conclusion = logic::parse_term("isRefundEligible", env);
    p.confidence = 1;
    auto f = verifier::classify(p, m, s, {});
    REQUIRE(f.category == verifier::Category::Impossible);
    std::string fb = render_feedback(f, m);
    CHECK(fb.find("IMPOSSIBLE") != std::string::npos);
    // relevant rules are rendered as structured English, not raw logic
    CHECK(fb.find("Relevant policy rules") != std::string::npos);
    CHECK(fb.find("the flight operated") != std::string::npos);
    CHECK(fb.find("(=>") == std::string::npos);
}

TEST_CASE("refine loop: office fixture converges to VALID in two steps") {
    auto m = model::load(testutil::fixture("refine/model.json"));
    auto pool = translator::scripted_pool(testutil::fixture("refine/translators"));
    auto s = solver::SolverSession{solver::SolverConfig{}};
    std::string question = slurp(testutil::fixture("refine/question.txt"));
    std::string answer = slurp(testutil::fixture("refine/answer.txt"));

    auto steps = run_refine_loop(question, answer, m, pool, *pool.backends[0], s, {}, 5);
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].category != verifier::Category::Valid);
    CHECK(!steps[0].feedback.empty());
    CHECK(steps[1].category == verifier::Category::Valid);
    CHECK(steps[1].feedback.empty());
    CHECK(steps[1].answer != steps[0].answer);

    json j = json::parse(trajectory_json(steps));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 2);
    CHECK(j[0]["category"] != "VALID");
    CHECK(j[1]["category"] == "VALID");
}

TEST_CASE("refine loop: untranslatable question never converges") {
    auto m = model::load(testutil::fixture("refine/model.json"));
    auto pool = translator::scripted_pool(testutil::fixture("refine/translators"));
    auto s = solver::SolverSession{solver::SolverConfig{}};
    std::string question = slurp(testutil::fixture("refine/stars_question.txt"));
    std::string answer = slurp(testutil::fixture("refine/stars_answer.txt"));

    auto steps = run_refine_loop(question, answer, m, pool, *pool.backends[0], s, {}, 4);
    REQUIRE(steps.size() == 4);
    for (const auto& st : steps) CHECK(st.category == verifier::Category::NoTranslations);
}

TEST_CASE("refine loop: reviser fault ends the loop gracefully") {
    auto m = model::load(testutil::fixture("refine/model.json"));
    auto pool = translator::scripted_pool(testutil::fixture("refine/translators"));
    auto s = solver::SolverSession{solver::SolverConfig{}};
    std::string question = slurp(testutil::fixture("refine/question.txt"));
    std::string answer = slurp(testutil::fixture("refine/answer.txt"));

    auto empty_reviser =
        translator::ScriptedBackend::from_json("empty", json::object());
    auto steps = run_refine_loop(question, answer, m, pool, empty_reviser, s, {}, 5);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].category != verifier::Category::Valid);
    CHECK(steps[0].feedback.find("revision aborted") != std::string::npos);
}
