#pragma once

#include <chrono>
#include <set>
#include <string>
#include <vector>

#include "policycheck/logic.hpp"
#include "policycheck/model.hpp"

// Entailment, satisfiability, model and unsat-core extraction via an external
// SMT-LIB2 process. One child process per session; each query resets the
// assertion set. The bundled `minismt` binary is the default child; any
// SMT-LIB2 solver (e.g. z3) can be configured instead.

namespace policycheck::solver {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverCrash : public SolverError {
public:
    using SolverError::SolverError;
};

class ProtocolError : public SolverError {
public:
    using SolverError::SolverError;
};

struct Assignment {
    logic::ValueMap bindings;
    // Variables the solver left unconstrained, completed with sort defaults.
    std::set<std::string> solver_arbitrary;
};

struct SolverVerdict {
    enum class Status { Sat, Unsat, Unknown };
    Status status = Status::Unknown;
    Assignment assignment;          // total over declared variables, on Sat
    std::vector<std::string> core;  // subset of sent labels, on Unsat with want_core
    std::string reason;             // on Unknown
};

struct LabeledTerm {
    std::string label;
    logic::Term term;
};

struct SolverConfig {
    std::vector<std::string> command;  // argv of the child solver
    std::chrono::milliseconds timeout{10000};
    std::string logic_name = "QF_NRIA";
    std::string audit_dir;  // when nonempty, one transcript file per query
};

// Resolution order: POLICYCHECK_SOLVER env var, the build-time minismt path,
// "minismt" on PATH.
std::vector<std::string> default_solver_command();

class SolverSession {
public:
    explicit SolverSession(SolverConfig cfg);
    ~SolverSession();
    SolverSession(const SolverSession&) = delete;
    SolverSession& operator=(const SolverSession&) = delete;

    // Satisfiability of the model's rules plus extra labeled assertions.
    // Rules are labeled "rule:<id>"; extra labels are the caller's.
    SolverVerdict check(const model::PolicyModel& m, const std::vector<LabeledTerm>& extra,
                        bool want_core);

    // Same, over a bare environment.
    SolverVerdict check_raw(const logic::SymbolTable& env,
                            const std::vector<LabeledTerm>& assertions, bool want_core);

    const SolverConfig& config() const { return cfg_; }

private:
    struct Process;
    void ensure_running();
    void shutdown();
    void send(const std::string& text);
    std::string read_line(std::chrono::steady_clock::time_point deadline);
    std::string read_sexp_reply(std::chrono::steady_clock::time_point deadline);
    std::string drain_stderr();

    SolverConfig cfg_;
    std::unique_ptr<Process> proc_;
    size_t query_counter_ = 0;
    std::string transcript_;
};

struct EntailResult {
    enum class Kind { Yes, No, Unknown };
    Kind kind = Kind::Unknown;
    std::vector<std::string> core;  // on Yes
    Assignment witness;             // on No
    std::string reason;             // on Unknown
};

// Yes iff  rules(m) AND hypotheses AND NOT consequence  is Unsat.
EntailResult entails(SolverSession& session, const model::PolicyModel& m,
                     const logic::Term& hypotheses, const logic::Term& consequence);

}  // namespace policycheck::solver
