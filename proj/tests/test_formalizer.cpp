#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <random>

#include "policycheck/formalizer.hpp"
#include "testutil.hpp"

using namespace policycheck;
using namespace policycheck::formalizer;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string random_doc(std::mt19937_64& rng) {
    static const char* words[] = {"policy", "fee",   "visitor", "credit", "season",
                                  "allowed", "rule", "discount", "total",  "payment"};
    std::string doc;
    size_t paras = 1 + rng() % 8;
    for (size_t p = 0; p < paras; ++p) {
        if (rng() % 4 == 0) doc += "# Heading " + std::to_string(p) + "\n";
        size_t lines = 1 + rng() % 5;
        for (size_t l = 0; l < lines; ++l) {
            size_t n = 1 + rng() % 30;
            for (size_t w = 0; w < n; ++w) {
                doc += words[rng() % 10];
                doc += (w + 1 == n) ? "" : " ";
            }
            doc += "\n";
        }
        if (p + 1 < paras) doc += "\n";
    }
    return doc;
}

}  // namespace

TEST_CASE("token_estimate scales with word count") {
    CHECK(token_estimate("") == 0);
    CHECK(token_estimate("one two three four") == doctest::Approx(4 * 1.3));
    CHECK(token_estimate("  padded   words  ") == doctest::Approx(2 * 1.3));
}

TEST_CASE("split covers the document byte for byte") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        std::string doc = random_doc(rng);
        size_t target = 5 + rng() % 120;
        SpanPlan plan = split(doc, target);
        std::string glued;
        size_t pos = 0;
        for (const auto& s : plan.spans) {
            CHECK(s.begin == pos);
            CHECK(s.end - s.begin == s.text.size());
            CHECK(doc.substr(s.begin, s.end - s.begin) == s.text);
            glued += s.text;
            pos = s.end;
        }
        CHECK(glued == doc);
    }
}

TEST_CASE("split keeps spans under twice the target") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::string doc = random_doc(rng);
        size_t target = 5 + rng() % 120;
        for (const auto& s : split(doc, target).spans)
            CHECK(token_estimate(s.text) <= 2.0 * target);
    }
    // one giant unbroken line still gets chopped
    std::string giant;
    for (int i = 0; i < 4000; ++i) giant += "word ";
    for (const auto& s : split(giant, 50).spans)
        CHECK(token_estimate(s.text) <= 100.0);
}

TEST_CASE("split prefers heading boundaries") {
    std::string doc =
        "# Part one\nalpha beta gamma\n\n# Part two\ndelta epsilon zeta\n";
    SpanPlan plan = split(doc, 4);
    REQUIRE(plan.spans.size() == 2);
    CHECK(plan.spans[1].text.rfind("# Part two", 0) == 0);

    std::string bold = "**Part one**\n\nalpha beta\n\n**Part two**\n\ndelta epsilon\n";
    SpanPlan plan2 = split(bold, 4);
    REQUIRE(plan2.spans.size() == 2);
    CHECK(plan2.spans[1].text.rfind("**Part two**", 0) == 0);
}

TEST_CASE("empty and blank documents yield no spans") {
    CHECK(split("", 100).spans.empty());
    SpanPlan plan = split("   \n\n  \n", 100);
    std::string glued;
    for (const auto& s : plan.spans) glued += s.text;
    CHECK(glued == "   \n\n  \n");
}

TEST_CASE("park document splits into its four sections") {
    std::string doc = slurp(testutil::fixture("park/document.md"));
    SpanPlan plan = split(doc, 80);
    REQUIRE(plan.spans.size() == 4);
    CHECK(plan.spans[0].text.find("General admission") != std::string::npos);
    CHECK(plan.spans[1].text.find("Discounts") != std::string::npos);
    CHECK(plan.spans[2].text.find("Credits") != std::string::npos);
    CHECK(plan.spans[3].text.find("Entry") != std::string::npos);
}

TEST_CASE("build reproduces the park model from the document") {
    std::string doc = slurp(testutil::fixture("park/document.md"));
    auto pool = translator::scripted_pool(testutil::fixture("park/translators"));
    BuildConfig cfg;
    cfg.target_span_tokens = 80;
    auto [built, report] = build(doc, pool, cfg);

    model::PolicyModel hand = model::load(testutil::fixture("park/model.json"));
    CHECK(built.variables.size() == hand.variables.size());
    CHECK(built.rules.size() == hand.rules.size());
    std::set<std::string> built_rules, hand_rules;
    for (const auto& r : built.rules) built_rules.insert(logic::print_term(r.term));
    for (const auto& r : hand.rules) hand_rules.insert(logic::print_term(r.term));
    CHECK(built_rules == hand_rules);

    CHECK(report.spans.size() == 4);
    for (const auto& s : report.spans) CHECK(s.status == SpanOutcome::Status::Ok);
    CHECK(report.rules == built.rules.size());
    CHECK(report.variables == built.variables.size());

    json j = json::parse(report.to_json());
    CHECK(j["spans"].size() == 4);
    CHECK(j["rules"].get<size_t>() == built.rules.size());
}

TEST_CASE("failed spans are skipped unless fail_fast") {
    std::string doc = "known span here\n\ncompletely unknown span\n";
    SpanPlan plan = split(doc, 3);
    REQUIRE(plan.spans.size() == 2);
    json fixture;
    fixture["formalize"][translator::digest(plan.spans[0].text)] = {
        {"variables",
         {{{"name", "ok"}, {"sort", "Bool"}, {"description", "whether things are fine"}}}},
        {"rules", {{{"id", "r1"}, {"smtlib", "ok"}}}}};
    translator::TranslatorPool pool;
    pool.backends = {std::make_shared<translator::ScriptedBackend>(
        translator::ScriptedBackend::from_json("b1", fixture))};

    BuildConfig cfg;
    cfg.target_span_tokens = 3;
    auto [m, report] = build(doc, pool, cfg);
    CHECK(m.rules.size() == 1);
    size_t failed = 0;
    for (const auto& s : report.spans)
        if (s.status == SpanOutcome::Status::Failed) {
            ++failed;
            CHECK(!s.error.empty());
        }
    CHECK(failed == 1);

    cfg.fail_fast = true;
    CHECK_THROWS_AS(build(doc, pool, cfg), BuildFailed);
    try {
        build(doc, pool, cfg);
    } catch (const BuildFailed& e) {
        REQUIRE(e.failures.size() == 1);
        CHECK(!e.failures[0].empty());
    }
}

TEST_CASE("lint gate rejects a contradictory composed model") {
    std::string doc = "the gate is always open\n";
    json fixture;
    fixture["formalize"][translator::digest(doc)] = {
        {"variables",
         {{{"name", "open"}, {"sort", "Bool"}, {"description", "whether the gate is open"}}}},
        {"rules",
         {{{"id", "r1"}, {"smtlib", "open"}}, {{"id", "r2"}, {"smtlib", "(not open)"}}}}};
    translator::TranslatorPool pool;
    pool.backends = {std::make_shared<translator::ScriptedBackend>(
        translator::ScriptedBackend::from_json("b1", fixture))};

    BuildConfig cfg;
    CHECK_THROWS(build(doc, pool, cfg));
    cfg.lint_gate = false;
    auto [m, report] = build(doc, pool, cfg);
    CHECK(m.rules.size() == 2);
}

TEST_CASE("empty document builds an empty model") {
    translator::TranslatorPool pool;
    pool.backends = {std::make_shared<translator::ScriptedBackend>(
        translator::ScriptedBackend::from_json("b1", json::object()))};
    auto [m, report] = build("", pool, {});
    CHECK(m.rules.empty());
    CHECK(m.variables.empty());
    CHECK(report.spans.empty());
}
