// Regenerates the checked-in fixture tree. Run from the repo root:
//   make_fixtures [output-dir]
// Everything is computed through the library itself so scripted-backend
// digests and feedback chains never drift from the implementation.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "policycheck/formalizer.hpp"
#include "policycheck/metrics.hpp"
#include "policycheck/model.hpp"
#include "policycheck/translator.hpp"
#include "policycheck/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace policycheck;

static void spit(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

static json pair_entry(const std::string& premise, const std::string& conclusion) {
    return {{"pairs", json::array({{{"premise", premise}, {"conclusion", conclusion}}})},
            {"untranslatable", json::array()}};
}

// ---------------------------------------------------------------------------
// Park

static const char* kParkDocument =
    "**General admission**\n"
    "\n"
    "The park charges a base admission fee of 50 dollars per visitor. During the\n"
    "low season the admission fee is reduced to 0.75 times the base fee. Visitors\n"
    "fall into one of three age classes: child, adult, or senior.\n"
    "\n"
    "**Discounts**\n"
    "\n"
    "Seniors older than 65 qualify for a 40 percent discount on the admission\n"
    "fee. If credits are used for payment, the discount rate is capped at 25\n"
    "percent. Without a qualifying discount the rate is zero. Whenever a discount\n"
    "applies, a flat processing fee of 10 dollars is added after the discount,\n"
    "giving the admission fee after discount.\n"
    "\n"
    "**Credits**\n"
    "\n"
    "Credits can cover up to half of the admission fee after discount, at one\n"
    "dollar per credit. Credits are purchased in increments of five, and each\n"
    "increment costs 3 dollars. Paying with credits means spending a positive\n"
    "credit amount. The cash amount due is the admission fee after discount\n"
    "minus the credits spent.\n"
    "\n"
    "**Tax and entry**\n"
    "\n"
    "The total expense is the cash amount plus the purchase cost of the credits\n"
    "used. A 10 percent federal tax applies, so the final expense is 1.1 times\n"
    "the total expense. Entry is allowed exactly when the final expense is within\n"
    "the visitor's total admission fund.\n";

static const char* kParkQA =
    "Question: I am a senior and want to visit the park in the low season, and I"
    " have a total fund of 35.40 dollars. Can I visit the park?\n"
    "Answer: No, 35.40 dollars is not enough.";

static const char* kParkPremise =
    "(and isLowSeason discountApplies (= totalAdmissionFund 35.4))";
static const char* kParkConclusion = "(not isEntryAllowed)";

static model::PolicyModel park_model() {
    model::PolicyModel m;
    m.datatypes.push_back({"AgeClass", {"CHILD", "ADULT", "SENIOR"}});
    auto real = logic::Sort::real();
    auto boolean = logic::Sort::boolean();
    std::vector<model::VariableSpec> vars = {
        {"baseFee", real, "the regular admission price before any seasonal adjustment"},
        {"isLowSeason", boolean, "the visit falls in the low season"},
        {"admissionFee", real, "the admission fee in dollars for the designated day"},
        {"ageClass", logic::Sort::dt("AgeClass"), "the visitor's age class"},
        {"discountApplies", boolean, "the visitor qualifies for the senior discount"},
        {"usesCredits", boolean, "the visitor pays with credits"},
        {"discountRate", real, "the discount rate applied to the admission fee"},
        {"admissionFeeAfterDiscount", real,
         "the admission fee after discount and processing fee in dollars"},
        {"customerCredits", real, "the dollar amount of credits spent on admission"},
        {"creditUnit", logic::Sort::integer(), "the number of five-credit increments purchased"},
        {"creditDollarValue", real, "the purchase cost of the credits used in dollars"},
        {"cashAmount", real, "the cash amount due in dollars"},
        {"totalExpense", real, "the total expense before tax in dollars"},
        {"finalExpense", real, "the final expense including tax in dollars"},
        {"totalAdmissionFund", real, "the visitor's total admission fund in dollars"},
        {"isEntryAllowed", boolean, "the visitor is allowed to enter the park"},
    };
    m.variables = vars;
    logic::SymbolTable env = m.env();
    auto rule = [&](const std::string& id, const std::string& smtlib) {
        m.rules.push_back({id, logic::parse_term(smtlib, env), ""});
    };
    rule("r1", "(= baseFee 50.0)");
    rule("r2", "(=> isLowSeason (= admissionFee (* 0.75 baseFee)))");
    rule("r3", "(=> (and discountApplies usesCredits) (= discountRate 0.25))");
    rule("r4", "(=> (and discountApplies (not usesCredits)) (= discountRate 0.4))");
    rule("r5", "(=> (not discountApplies) (= discountRate 0.0))");
    rule("r6", "(= admissionFeeAfterDiscount (+ (* admissionFee (- 1.0 discountRate)) 10.0))");
    rule("r7", "(<= (* 2.0 customerCredits) admissionFeeAfterDiscount)");
    rule("r8", "(= customerCredits (* 5.0 creditUnit))");
    rule("r9", "(= creditDollarValue (* 3.0 creditUnit))");
    rule("r10", "(= cashAmount (- admissionFeeAfterDiscount customerCredits))");
    rule("r11", "(= totalExpense (+ cashAmount creditDollarValue))");
    rule("r12", "(= finalExpense (* 1.1 totalExpense))");
    rule("r13", "(= isEntryAllowed (<= finalExpense totalAdmissionFund))");
    rule("r14", "(>= creditUnit 0)");
    rule("r15", "(= usesCredits (< 0.0 customerCredits))");
    return m;
}

// Per-span formalization payloads for the park document; keyed by the spans
// the splitter actually produces.
static json park_formalize_sections(const model::PolicyModel& m) {
    auto var_json = [&](const std::string& name) {
        for (const auto& v : m.variables)
            if (v.name == name)
                return json{{"name", v.name},
                            {"sort", v.sort.str()},
                            {"description", v.description}};
        throw std::runtime_error("unknown var " + name);
    };
    auto rules_json = [&](std::vector<std::string> ids) {
        json arr = json::array();
        for (const auto& id : ids)
            arr.push_back({{"id", id}, {"smtlib", logic::print_term(m.find_rule(id)->term)}});
        return arr;
    };
    json sections = json::array();
    sections.push_back(
        {{"datatypes", json::array({{{"name", "AgeClass"},
                                     {"constructors", {"CHILD", "ADULT", "SENIOR"}}}})},
         {"variables",
          {var_json("baseFee"), var_json("isLowSeason"), var_json("admissionFee"),
           var_json("ageClass")}},
         {"rules", rules_json({"r1", "r2"})}});
    sections.push_back(
        {{"variables",
          {var_json("discountApplies"), var_json("usesCredits"), var_json("discountRate"),
           var_json("admissionFee"), var_json("admissionFeeAfterDiscount")}},
         {"rules", rules_json({"r3", "r4", "r5", "r6"})}});
    sections.push_back(
        {{"variables",
          {var_json("customerCredits"), var_json("creditUnit"), var_json("creditDollarValue"),
           var_json("cashAmount"), var_json("admissionFeeAfterDiscount"),
           var_json("usesCredits")}},
         {"rules", rules_json({"r7", "r8", "r9", "r10", "r14", "r15"})}});
    sections.push_back(
        {{"variables",
          {var_json("totalExpense"), var_json("finalExpense"), var_json("totalAdmissionFund"),
           var_json("isEntryAllowed"), var_json("cashAmount"), var_json("creditDollarValue")}},
         {"rules", rules_json({"r11", "r12", "r13"})}});
    return sections;
}

static void write_park(const fs::path& dir) {
    fs::create_directories(dir);
    model::PolicyModel m = park_model();
    model::save(m, (dir / "model.json").string());
    spit(dir / "document.md", kParkDocument);
    spit(dir / "qa.txt", kParkQA);

    json translate_entry = pair_entry(kParkPremise, kParkConclusion);

    formalizer::SpanPlan plan = formalizer::split(kParkDocument, 500);
    json sections = park_formalize_sections(m);
    if (plan.spans.size() != sections.size())
        throw std::runtime_error("park splitter produced " + std::to_string(plan.spans.size()) +
                                 " spans, fixtures expect " + std::to_string(sections.size()));
    json formalize = json::object();
    for (size_t i = 0; i < plan.spans.size(); ++i)
        formalize[translator::digest(plan.spans[i].text)] = sections[i];

    for (int b = 1; b <= 3; ++b) {
        json fixture = json::object();
        fixture[translator::digest(kParkQA)] = translate_entry;
        if (b == 1) fixture["formalize"] = formalize;
        spit(dir / "translators" / ("backend" + std::to_string(b) + ".json"),
             fixture.dump(2) + "\n");
    }
}

// ---------------------------------------------------------------------------
// RyanAir-style refund policy

static const char* kRefundQA =
    "Question: My flight operated but I could not travel because I was denied"
    " boarding. Am I eligible for a refund?\n"
    "Answer: Yes, you are entitled to a refund because you were denied boarding.";

static const char* kRefundPremise =
    "(and didFlightOperate (not didPassengerTravel)"
    " (= flightDisruptionReason DENIED_BOARDING))";
static const char* kRefundConclusion = "isRefundEligible";

static model::PolicyModel refund_model(bool vetted) {
    model::PolicyModel m;
    m.datatypes.push_back({"DisruptionReason", {"CANCELLATION", "DENIED_BOARDING", "DELAY"}});
    auto boolean = logic::Sort::boolean();
    m.variables = {
        {"didFlightOperate", boolean, "the flight operated"},
        {"didPassengerTravel", boolean, "the passenger travelled on the flight"},
        {"isRefundEligible", boolean, "the passenger is eligible for a refund"},
        {"flightDisruptionReason", logic::Sort::dt("DisruptionReason"),
         "the reason the passenger's journey was disrupted"},
    };
    logic::SymbolTable env = m.env();
    std::string rule1 =
        vetted ? "(=> (and didFlightOperate (not didPassengerTravel)"
                 " (not (= flightDisruptionReason DENIED_BOARDING)))"
                 " (not isRefundEligible))"
               : "(=> (and didFlightOperate (not didPassengerTravel)) (not isRefundEligible))";
    m.rules.push_back({"r1", logic::parse_term(rule1, env), ""});
    m.rules.push_back(
        {"r2",
         logic::parse_term("(=> (= flightDisruptionReason DENIED_BOARDING) isRefundEligible)",
                           env),
         ""});
    if (vetted) m.metadata["vetted"] = "true";
    return m;
}

static void write_refund(const fs::path& dir) {
    fs::create_directories(dir);
    model::save(refund_model(false), (dir / "prevet.json").string());
    model::save(refund_model(true), (dir / "vetted.json").string());
    spit(dir / "qa.txt", kRefundQA);
    json entry = pair_entry(kRefundPremise, kRefundConclusion);
    for (int b = 1; b <= 3; ++b) {
        json fixture = json::object();
        fixture[translator::digest(kRefundQA)] = entry;
        spit(dir / "translators" / ("backend" + std::to_string(b) + ".json"),
             fixture.dump(2) + "\n");
    }
}

// ---------------------------------------------------------------------------
// Refine-loop fixtures (office hours toy policy)

static model::PolicyModel office_model() {
    model::PolicyModel m;
    auto boolean = logic::Sort::boolean();
    m.variables = {
        {"isWeekend", boolean, "the day is a weekend day"},
        {"isOpen", boolean, "the office is open"},
    };
    logic::SymbolTable env = m.env();
    m.rules.push_back({"r1", logic::parse_term("(=> isWeekend (not isOpen))", env), ""});
    return m;
}

static const char* kOfficeQuestion = "Is the office open on Saturday?";
static const char* kOfficeAnswer0 = "Yes, the office is open.";
static const char* kOfficeAnswer1 = "No. Saturday is a weekend day, so the office is closed.";

static const char* kStarsQuestion = "How many stars are in the Milky Way?";
static const char* kStarsAnswer = "I cannot answer that from the office policy.";

static void write_refine(const fs::path& dir) {
    fs::create_directories(dir);
    model::PolicyModel m = office_model();
    model::save(m, (dir / "model.json").string());
    spit(dir / "question.txt", kOfficeQuestion);
    spit(dir / "answer.txt", kOfficeAnswer0);

    json fixture = json::object();
    // round 1: bare "the office is open" claim, no premise
    fixture[translator::digest(std::string(kOfficeQuestion) + "\n" + kOfficeAnswer0)] =
        pair_entry("", "isOpen");
    // round 2: the revised answer carries the weekend guard
    fixture[translator::digest(std::string(kOfficeQuestion) + "\n" + kOfficeAnswer1)] =
        pair_entry("isWeekend", "(not isOpen)");
    // off-topic question: nothing translatable, ever
    json none = {{"pairs", json::array()},
                 {"untranslatable", json::array({"How many stars are in the Milky Way?"})}};
    fixture[translator::digest(std::string(kStarsQuestion) + "\n" + kStarsAnswer)] = none;

    // Compute the revise entries by running the verifier for real, so the
    // feedback digests match what run_refine_loop will send.
    {
        translator::TranslatorPool pool;
        pool.backends.push_back(std::make_shared<translator::ScriptedBackend>(
            translator::ScriptedBackend::from_json("tmp", fixture)));
        solver::SolverSession session({});
        verifier::VerifierConfig vcfg;
        auto findings = verifier::validate(std::string(kOfficeQuestion) + "\n" + kOfficeAnswer0,
                                           m, pool, session, vcfg);
        if (findings.size() != 1 ||
            findings[0].category != verifier::Category::Satisfiable)
            throw std::runtime_error("office round 1 did not come out Satisfiable");
        std::string feedback = metrics::render_feedback(findings[0], m);
        json revise = json::object();
        revise[translator::digest(
            translator::revision_request(kOfficeQuestion, kOfficeAnswer0, feedback))] =
            json{{"answer", kOfficeAnswer1}};

        auto none_findings = verifier::validate(std::string(kStarsQuestion) + "\n" + kStarsAnswer,
                                                m, pool, session, vcfg);
        if (none_findings.size() != 1 ||
            none_findings[0].category != verifier::Category::NoTranslations)
            throw std::runtime_error("stars question did not come out NoTranslations");
        std::string none_feedback = metrics::render_feedback(none_findings[0], m);
        revise[translator::digest(
            translator::revision_request(kStarsQuestion, kStarsAnswer, none_feedback))] =
            json{{"answer", kStarsAnswer}};
        fixture["revise"] = revise;
    }
    spit(dir / "translators" / "backend1.json", fixture.dump(2) + "\n");
    spit(dir / "stars_question.txt", kStarsQuestion);
    spit(dir / "stars_answer.txt", kStarsAnswer);
}

int main(int argc, char** argv) {
    fs::path out = argc > 1 ? argv[1] : "fixtures";
    try {
        write_park(out / "park");
        write_refund(out / "refund");
        write_refine(out / "refine");
    } catch (const std::exception& e) {
        std::cerr << "fixture generation failed: " << e.what() << "\n";
        return 1;
    }
    std::cout << "fixtures written to " << out << "\n";
    return 0;
}
