#pragma once

#include <string>
#include <utility>
#include <vector>

#include "policycheck/logic.hpp"

// Decision procedure behind the bundled `minismt` binary: DPLL over the
// boolean structure with an exact-rational linear arithmetic core
// (Fourier-Motzkin plus branch-and-bound for Int and enum variables).
// Products are linearized by constant propagation; anything genuinely
// nonlinear yields Unknown rather than a guess.

namespace policycheck::microsolve {

enum class Status { Sat, Unsat, Unknown };

struct Result {
    Status status = Status::Unknown;
    logic::ValueMap model;  // total over declared consts when Sat
    std::string reason;     // populated when Unknown
};

struct Problem {
    logic::SymbolTable env;
    std::vector<std::pair<std::string, logic::Term>> assertions;  // label, Bool term
};

Result solve(const Problem& p, size_t node_budget = 500000);

// Deletion-based core over assertion labels; call only when solve() said
// Unsat. Cores are small but not guaranteed minimal.
std::vector<std::string> unsat_core(const Problem& p, size_t node_budget = 500000);

}  // namespace policycheck::microsolve
