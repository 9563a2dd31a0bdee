#pragma once

#include <string>
#include <vector>

#include <gmpxx.h>

#include "policycheck/translator.hpp"
#include "policycheck/verifier.hpp"
#include "policycheck/vetting.hpp"

// Classification metrics over engine verdicts (Valid is the positive class),
// dataset evaluation, and the feedback-driven revision loop.

namespace policycheck::metrics {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyCounts : public MetricsError {
public:
    using MetricsError::MetricsError;
};

class DatasetFormat : public MetricsError {
public:
    using MetricsError::MetricsError;
};

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

// All fields are exact rational percentages in [0, 100].
struct MetricsRow {
    mpq_class soundness;  // 100 * (1 - fp/total)
    mpq_class fpr;        // 100 * fp/(fp+tn)
    mpq_class precision;  // 100 * tp/(tp+fp), 0 when the denominator is 0
    mpq_class recall;     // 100 * tp/(tp+fn)
    mpq_class f1;         // harmonic mean of precision and recall
    mpq_class accuracy;   // 100 * (tp+tn)/total
};

MetricsRow compute_metrics(const ConfusionCounts& c);

// One-decimal display rounding (half away from zero), e.g. "99.2".
std::string round1(const mpq_class& q);

std::string metrics_json(const ConfusionCounts& c, const MetricsRow& row);

// ---------------------------------------------------------------------------
// Dataset evaluation

struct DatasetCase {
    std::string question;
    std::string answer;
    verifier::Category label = verifier::Category::Valid;
    std::string document_ref;
};

std::vector<DatasetCase> parse_dataset(const std::string& text);

struct CaseLog {
    size_t index = 0;
    verifier::Category label = verifier::Category::Valid;
    verifier::Category verdict = verifier::Category::NoTranslations;
    bool correct = false;
};

struct EvalResult {
    ConfusionCounts counts;
    MetricsRow row;
    std::vector<CaseLog> cases;  // input order
};

struct EvalConfig {
    verifier::VerifierConfig verifier;
    solver::SolverConfig solver;
    size_t workers = 1;
};

EvalResult run_eval(const std::vector<DatasetCase>& dataset, const model::PolicyModel& m,
                    const translator::TranslatorPool& pool, const EvalConfig& cfg);

std::string eval_json(const EvalResult& r);

// ---------------------------------------------------------------------------
// Revision loop

struct RefineStep {
    std::string answer;
    verifier::Category category = verifier::Category::NoTranslations;
    std::string feedback;  // what was handed to the reviser, empty on the last step
};

// NL rendering of a finding, used as revision feedback.
std::string render_feedback(const verifier::Finding& f, const model::PolicyModel& m);

// Validates, revises on non-Valid, repeats; stops at the first Valid verdict
// or after max_iters validations. Backend faults end the loop with the last
// step's feedback noting the fault.
std::vector<RefineStep> run_refine_loop(const std::string& question, const std::string& answer,
                                        const model::PolicyModel& m,
                                        const translator::TranslatorPool& pool,
                                        translator::Backend& reviser,
                                        solver::SolverSession& session,
                                        const verifier::VerifierConfig& cfg, size_t max_iters);

std::string trajectory_json(const std::vector<RefineStep>& steps);

}  // namespace policycheck::metrics
