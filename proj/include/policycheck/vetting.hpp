#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "policycheck/model.hpp"
#include "policycheck/solver.hpp"
#include "policycheck/translator.hpp"
#include "policycheck/verifier.hpp"

// Policy-model vetting: linter, mechanical structured-English rendering,
// NL-feedback repair, manual test execution and symbolic test generation.

namespace policycheck::vetting {

struct LintItem {
    std::string code;     // stable, e.g. CONTRADICTORY_RULES
    std::string message;
    std::string subject;  // rule id or variable name
    std::vector<std::string> core;  // rule ids, for CONTRADICTORY_RULES
};

struct LintReport {
    std::vector<LintItem> errors;
    std::vector<LintItem> warnings;
    bool clean() const { return errors.empty(); }
};

std::string lint_report_json(const LintReport& r);

// Checks: UNUSED_VARIABLE (warn), CONTRADICTORY_RULES (error, with core),
// UNSAT_RULE (error), TAUTOLOGICAL_RULE (warn), DUPLICATE_RULE (warn).
LintReport lint(const model::PolicyModel& m, solver::SolverSession& session);

// Template-based rendering over variable descriptions; deterministic, no
// model calls.
std::string render_structured_english(const model::Rule& rule,
                                      const std::vector<model::VariableSpec>& schema);

class VettingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RepairRejected : public VettingError {
public:
    RepairRejected(const std::string& msg, std::vector<std::string> diags)
        : VettingError(msg), diagnostics(std::move(diags)) {}
    std::vector<std::string> diagnostics;
};

class ModelUnsat : public VettingError {
public:
    using VettingError::VettingError;
};

// Adjusts the model per NL feedback on one rule via the backend's repair
// task; the result must re-pass lint at error level or RepairRejected is
// thrown. The returned model differs only in the edited rules/variables.
model::PolicyModel repair_from_feedback(const model::PolicyModel& m, const std::string& rule_id,
                                        const std::string& feedback, translator::Backend& backend,
                                        solver::SolverSession& session);

struct TestCase {
    enum class Kind { ManualQA, ManualStatement, Symbolic };
    Kind kind = Kind::ManualStatement;
    std::string question;      // ManualQA
    std::string answer;        // ManualQA
    std::string text;          // ManualStatement
    logic::Term premise;       // Symbolic
    logic::Term conclusion;    // Symbolic
    verifier::Category expected = verifier::Category::Valid;
    std::string provenance = "user";  // "user" | "generated"
};

struct TestOutcome {
    TestCase test;
    verifier::Category actual = verifier::Category::NoTranslations;
    bool pass = false;
    verifier::FeedbackPayload explanation;
    std::string message;  // on mismatch, names both possible error sources
};

// Folds multiple findings into one verdict: Valid only when every finding is
// Valid; otherwise the first category present in severity order Impossible,
// Invalid, TooComplex, TranslationAmbiguous, NoTranslations, Satisfiable.
verifier::Category aggregate_category(const std::vector<verifier::Finding>& findings);

// NL cases only; runs the full verifier per case.
std::vector<TestOutcome> run_manual_tests(const std::vector<TestCase>& cases,
                                          const model::PolicyModel& m,
                                          const translator::TranslatorPool& pool,
                                          solver::SolverSession& session,
                                          const verifier::VerifierConfig& cfg);

// Mixed suites: symbolic cases classify directly with confidence 1, NL cases
// go through the verifier.
std::vector<TestOutcome> run_tests(const std::vector<TestCase>& cases,
                                   const model::PolicyModel& m,
                                   const translator::TranslatorPool& pool,
                                   solver::SolverSession& session,
                                   const verifier::VerifierConfig& cfg);

// Samples solver models of the rule set (blocking clauses for diversity),
// builds equality premises over random variable subsets plus a literal
// conclusion over a held-out variable, mutates a quarter of the cases, and
// labels each with an expected category that is re-verified by a second,
// independent round of queries. Deterministic under a fixed seed.
std::vector<TestCase> generate_symbolic_tests(const model::PolicyModel& m, size_t n,
                                              uint64_t seed, solver::SolverSession& session);

std::string test_cases_to_json(const std::vector<TestCase>& cases);
std::vector<TestCase> test_cases_from_json(const std::string& text, const model::PolicyModel& m);
std::string outcomes_to_json(const std::vector<TestOutcome>& outcomes);

// Records the vetted stamp in metadata; call only when lint is error-free
// and the designated suite passed.
void stamp_vetted(model::PolicyModel& m, const std::string& who);

}  // namespace policycheck::vetting
