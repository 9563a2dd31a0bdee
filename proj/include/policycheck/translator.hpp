#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "policycheck/logic.hpp"
#include "policycheck/model.hpp"

// The pluggable NL <-> logic boundary. Backends produce structured raw
// output; nothing leaves this module unless it parses and sort-checks
// against the policy vocabulary, with a bounded repair loop in between.

namespace policycheck::translator {

struct ClaimPair {
    logic::Term premise;     // Bool; an absent premise is literal true
    logic::Term conclusion;  // Bool
    // Exact rational in [0,1]; negative until aggregation assigns it.
    mpq_class confidence{-1};
    std::string source_text;
};

struct Translation {
    std::vector<ClaimPair> pairs;  // possibly empty, and that is meaningful
    std::vector<std::string> untranslatable;
};

class TranslatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BackendUnavailable : public TranslatorError {
public:
    using TranslatorError::TranslatorError;
};

class MalformedOutput : public TranslatorError {
public:
    MalformedOutput(const std::string& msg, std::vector<std::string> diags)
        : TranslatorError(msg), diagnostics(std::move(diags)) {}
    std::vector<std::string> diagnostics;  // one entry per failed attempt
};

// FNV-1a 64-bit digest, lowercase hex; the scripted fixture key.
std::string digest(const std::string& text);

// Task names used on the backend interface.
inline constexpr const char* kTaskTranslate = "translate";
inline constexpr const char* kTaskFormalize = "formalize";
inline constexpr const char* kTaskRepair = "repair";
inline constexpr const char* kTaskRevise = "revise";

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    // Raw structured output for a task; `context` carries the policy
    // vocabulary (ignored by the scripted backend, which is a pure function
    // of the input digest).
    virtual nlohmann::json invoke(const std::string& task, const std::string& input,
                                  const std::string& context) = 0;
};

// Fixture-file backend: {"<digest>": {"pairs":[{"premise","conclusion"}],
// "untranslatable":[...]}} at top level for translation, plus optional
// "formalize" / "repair" / "revise" sections mapping digests to payloads.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend(std::string id, const std::string& fixture_path);
    static ScriptedBackend from_json(std::string id, nlohmann::json fixture);

    std::string id() const override { return id_; }
    nlohmann::json invoke(const std::string& task, const std::string& input,
                          const std::string& context) override;

private:
    ScriptedBackend(std::string id) : id_(std::move(id)) {}
    std::string id_;
    nlohmann::json fixture_;
};

struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://host:port/v1/chat/completions
    std::string model;
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string api_key_env = "POLICYCHECK_API_KEY";
    std::string prompt_dir;  // optional template overrides, one file per task
};

// OpenAI-compatible chat-completions client. The reply must carry a fenced
// block; only fenced content is interpreted, surrounding prose is ignored.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);
    std::string id() const override;
    nlohmann::json invoke(const std::string& task, const std::string& input,
                          const std::string& context) override;

    // Exposed for testing: fenced-block extraction and prompt assembly.
    static std::string extract_fenced(const std::string& content);
    std::string render_prompt(const std::string& task, const std::string& input,
                              const std::string& context) const;

private:
    HttpBackendConfig cfg_;
};

struct TranslatorPool {
    std::vector<std::shared_ptr<Backend>> backends;  // k >= 1, independent

    size_t size() const { return backends.size(); }
    // Fans the same request out to every backend concurrently.
    std::vector<Translation> translate_all(const std::string& text,
                                           const model::PolicyModel& policy) const;
};

// Loads a scripted pool from a directory: every *.json file is one backend,
// in lexicographic filename order.
TranslatorPool scripted_pool(const std::string& dir);

// ---------------------------------------------------------------------------
// Gated operations

struct RepairOptions {
    int budget = 3;
    int* attempts = nullptr;  // optional tally of repair round-trips
};

// Validates candidate output; returns a diagnostic on failure.
using Validator = std::function<std::optional<std::string>(const nlohmann::json&)>;

// Asks the backend to fix `invalid_output` given `failure`, re-validating
// each attempt; throws MalformedOutput with all diagnostics after budget.
nlohmann::json repair(const std::string& invalid_output, const std::string& failure,
                      Backend& backend, const Validator& validate,
                      const RepairOptions& opts = {});

Translation translate_claims(const std::string& text, const model::PolicyModel& policy,
                             Backend& backend, const RepairOptions& opts = {});

model::PolicyUnit formalize_span(const std::string& span, const logic::SymbolTable& context,
                                 Backend& backend, const RepairOptions& opts = {});

// The exact input string revise_answer hands to the backend; exposed so
// scripted fixtures can be keyed on it.
std::string revision_request(const std::string& question, const std::string& answer,
                             const std::string& feedback);

std::string revise_answer(const std::string& question, const std::string& answer,
                          const std::string& feedback, Backend& backend);

// Vocabulary rendering handed to backends as context.
std::string render_vocabulary(const model::PolicyModel& policy);

}  // namespace policycheck::translator
