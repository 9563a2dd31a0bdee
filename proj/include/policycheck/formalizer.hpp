#pragma once

#include <string>
#include <vector>

#include "policycheck/model.hpp"
#include "policycheck/solver.hpp"
#include "policycheck/translator.hpp"

// The policy-model creator pipeline: split a document into spans, formalize
// each span into a policy unit, compose the units into one model.

namespace policycheck::formalizer {

struct Span {
    std::string text;
    size_t begin = 0;  // byte offsets into the document
    size_t end = 0;
};

struct SpanPlan {
    std::vector<Span> spans;  // partition of the document, in order
    size_t target_span_tokens = 500;
};

// Breaks at paragraph and heading boundaries; every span stays under twice
// the token target (whitespace word count x 1.3). Concatenating the spans
// reproduces the document byte for byte.
SpanPlan split(const std::string& document, size_t target_span_tokens = 500);

double token_estimate(const std::string& text);

struct SpanOutcome {
    size_t index = 0;
    size_t begin = 0;
    size_t end = 0;
    enum class Status { Ok, Empty, Failed } status = Status::Ok;
    std::string error;
    int repair_attempts = 0;
    size_t rules = 0;
};

struct BuildReport {
    std::vector<SpanOutcome> spans;
    size_t datatypes = 0;
    size_t variables = 0;
    size_t rules = 0;
    int repair_attempts = 0;

    std::string to_json() const;
};

struct BuildConfig {
    size_t target_span_tokens = 500;
    translator::RepairOptions repair;
    bool fail_fast = false;
    bool lint_gate = true;  // reject a composed model with lint errors
    solver::SolverConfig solver;
    double cluster_threshold = 0.8;
};

class BuildFailed : public std::runtime_error {
public:
    BuildFailed(const std::string& msg, std::vector<std::string> failures)
        : std::runtime_error(msg), failures(std::move(failures)) {}
    std::vector<std::string> failures;  // one entry per failed span
};

// Formalizes every span through the pool's first backend with the repair
// loop, then composes. Fail-fast turns span failures into BuildFailed;
// otherwise they are recorded in the report and skipped.
std::pair<model::PolicyModel, BuildReport> build(const std::string& document,
                                                 const translator::TranslatorPool& pool,
                                                 const BuildConfig& cfg = {});

}  // namespace policycheck::formalizer
