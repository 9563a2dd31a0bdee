#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policycheck/model.hpp"
#include "policycheck/solver.hpp"
#include "policycheck/translator.hpp"

// The answer verifier: redundant translation with confidence scoring, the
// seven-way finding classification, and the logically grounded feedback
// attached to each finding.

namespace policycheck::verifier {

enum class Category {
    NoTranslations,
    TooComplex,
    TranslationAmbiguous,
    Impossible,
    Invalid,
    Satisfiable,
    Valid,
};

// Wire spelling, e.g. TRANSLATION_AMBIGUOUS.
std::string category_name(Category c);
std::optional<Category> category_from_name(const std::string& name);

struct VerifierConfig {
    mpq_class confidence_threshold{1};  // in (0,1]
    size_t max_input_chars = 20000;
    size_t max_term_nodes = 5000;
};

enum class WarningSubject { Premise, Conclusion };
enum class WarningKind { AlwaysTrue, AlwaysFalse };

struct LogicWarning {
    WarningSubject subject;
    WarningKind kind;
};

struct DifferingTranslations {
    translator::ClaimPair a;
    translator::ClaimPair b;
    solver::Assignment distinguishing;
    // Which implication the assignment satisfies: "a" or "b".
    std::string satisfied_side;
};

struct FeedbackPayload {
    std::vector<std::string> relevant_rules;
    std::optional<solver::Assignment> supporting_scenario;
    std::optional<solver::Assignment> counter_example;
    std::optional<DifferingTranslations> differing_translations;
    std::vector<std::string> untranslatable;
    std::vector<LogicWarning> warnings;
    std::string note;  // e.g. the timeout or size-limit explanation
};

struct Finding {
    Category category = Category::NoTranslations;
    std::optional<translator::ClaimPair> pair;
    FeedbackPayload feedback;
};

class VerifierError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Equivalent : public VerifierError {
public:
    using VerifierError::VerifierError;
};

// Alg. of redundant translation: fans text out to every backend, collapses
// semantically equal pairs, and scores each distinct pair with
// conf = |supporting translations| / k as an exact rational. A confidence of
// -1 marks a pair whose support computation hit solver Unknown; such pairs
// classify as TooComplex.
std::vector<translator::ClaimPair> redundant_translate(const std::string& text,
                                                       const model::PolicyModel& m,
                                                       const translator::TranslatorPool& pool,
                                                       solver::SolverSession& session);

// Same scoring applied to already-produced translations (k = size of the list).
std::vector<translator::ClaimPair> score_translations(
    const std::vector<translator::Translation>& translations, const model::PolicyModel& m,
    solver::SolverSession& session);

// One category by the precedence ladder:
//   conf < threshold -> TranslationAmbiguous
//   M |= not P       -> Impossible
//   M and P |= C     -> Valid
//   M and P |= not C -> Invalid
//   otherwise        -> Satisfiable
// Solver Unknown at any step -> TooComplex. `alternates` supplies the other
// distinct pairs so an ambiguous finding can carry a distinguishing
// assignment.
Finding classify(const translator::ClaimPair& pair, const model::PolicyModel& m,
                 solver::SolverSession& session, const VerifierConfig& cfg,
                 const std::vector<translator::ClaimPair>* alternates = nullptr);

// End-to-end: size gate, translation, scoring, one finding per pair plus
// standalone-term logic warnings. Findings are ordered by the canonical
// print of (premise, conclusion).
std::vector<Finding> validate(const std::string& text, const model::PolicyModel& m,
                              const translator::TranslatorPool& pool,
                              solver::SolverSession& session, const VerifierConfig& cfg);

// Assignment satisfying M and one pair-implication but not the other; which
// side it satisfies lands in *side ("a" or "b"). Throws Equivalent when the
// implications agree everywhere under M.
solver::Assignment distinguishing_assignment(const translator::ClaimPair& a,
                                             const translator::ClaimPair& b,
                                             const model::PolicyModel& m,
                                             solver::SolverSession& session, std::string* side);

std::string findings_to_json(const std::vector<Finding>& findings);

}  // namespace policycheck::verifier
