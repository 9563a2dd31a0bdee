#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "policycheck/logic.hpp"

// The formal policy artifact: datatypes, described variables, and asserted
// rules, plus composition of per-span policy units and JSON persistence.

namespace policycheck::model {

struct VariableSpec {
    std::string name;
    logic::Sort sort;
    std::string description;  // nonempty; every variable carries an NL gloss
    bool operator==(const VariableSpec&) const = default;
};

struct Rule {
    std::string id;
    logic::Term term;  // Bool-sorted against the model's declarations
    std::string provenance;  // optional source-span reference
};

struct PolicyModel {
    std::vector<logic::DatatypeDecl> datatypes;
    std::vector<VariableSpec> variables;
    std::vector<Rule> rules;
    std::map<std::string, std::string> metadata;  // e.g. the "vetted" stamp

    logic::SymbolTable env() const;
    const Rule* find_rule(const std::string& id) const;
};

// A policy unit is the formalization of one document span; structurally a
// small model that is later composed into the full one.
using PolicyUnit = PolicyModel;

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public ModelError {
public:
    FormatError(const std::string& path, const std::string& msg)
        : ModelError(path + ": " + msg), pointer(path) {}
    std::string pointer;  // JSON-pointer-style location
};

class SortConflict : public ModelError {
public:
    using ModelError::ModelError;
};

// Checks all PolicyModel invariants; throws ModelError on violation.
void validate(const PolicyModel& m);

// Variable rename applied through a term.
logic::Term rename_vars(const logic::Term& t,
                        const std::map<std::string, std::string>& renaming);

// ---------------------------------------------------------------------------
// Variable similarity for composition

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // Similarity in [0,1] between two variable specs.
    virtual double similarity(const VariableSpec& a, const VariableSpec& b) const = 0;
};

// Deterministic offline default: token-set Jaccard over camelCase-split name
// tokens plus description tokens.
class LexicalEmbedder : public EmbeddingProvider {
public:
    double similarity(const VariableSpec& a, const VariableSpec& b) const override;
    static std::vector<std::string> tokens(const VariableSpec& v);
};

struct ComposeResult {
    PolicyModel model;
    // (unit index, original name) -> final name, for every unit variable.
    std::map<std::pair<size_t, std::string>, std::string> renaming;
};

// Unifies similar variables across units, renames same-named strangers with
// numeric suffixes, rewrites rules under the renaming, and drops syntactic
// duplicate rules. Throws SortConflict when clustered variables disagree on
// sort.
ComposeResult compose(const std::vector<PolicyUnit>& units, const EmbeddingProvider& embedder,
                      double cluster_threshold = 0.8);

// ---------------------------------------------------------------------------
// Persistence (UTF-8 JSON, LF line endings)

std::string to_json(const PolicyModel& m);
PolicyModel from_json(const std::string& text);

void save(const PolicyModel& m, const std::string& path);
PolicyModel load(const std::string& path);

}  // namespace policycheck::model
