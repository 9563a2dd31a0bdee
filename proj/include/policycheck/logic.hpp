#pragma once

#include <gmpxx.h>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Quantifier-free SMT-LIB fragment: Bool/Int/Real/enumerated datatypes,
// boolean connectives, (non)linear arithmetic and comparisons. Terms are
// immutable, fully sorted trees; the builders are the sort checker.

namespace policycheck::logic {

enum class SortKind { Bool, Int, Real, Datatype };

struct Sort {
    SortKind kind = SortKind::Bool;
    std::string datatype;  // nonempty iff kind == Datatype

    static Sort boolean() { return {SortKind::Bool, {}}; }
    static Sort integer() { return {SortKind::Int, {}}; }
    static Sort real() { return {SortKind::Real, {}}; }
    static Sort dt(std::string name) { return {SortKind::Datatype, std::move(name)}; }

    bool operator==(const Sort&) const = default;
    bool is_numeric() const { return kind == SortKind::Int || kind == SortKind::Real; }
    std::string str() const;
};

// Parses "Bool" | "Int" | "Real" | <datatype name>.
Sort sort_from_string(const std::string& s);

struct DatatypeDecl {
    std::string name;
    std::vector<std::string> constructors;
    bool operator==(const DatatypeDecl&) const = default;
};

struct ConstDecl {
    std::string name;
    Sort sort;
    bool operator==(const ConstDecl&) const = default;
};

// ---------------------------------------------------------------------------
// Errors

class LogicError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public LogicError {
public:
    SyntaxError(std::string msg, size_t position);
    size_t position;  // byte offset into the input text
};

class SortError : public LogicError {
public:
    SortError(std::string msg, std::string offending_subterm);
    std::string offending;  // canonical print of the ill-sorted subterm
};

class UnknownSymbol : public LogicError {
public:
    UnknownSymbol(const std::string& name, const std::string& suggestion);
    std::string name;
    std::string suggestion;  // nearest declared name, may be empty
};

// ---------------------------------------------------------------------------
// Symbol environment

struct SymbolTable {
    std::map<std::string, std::vector<std::string>> datatypes;
    std::map<std::string, Sort> consts;
    // constructor name -> (datatype name, index within declaration)
    std::map<std::string, std::pair<std::string, int>> constructors;

    void add_datatype(const DatatypeDecl& d);
    void add_const(const std::string& name, const Sort& sort);
    bool declared(const std::string& name) const;
    void clear();

    // Nearest declared name by edit distance, empty if nothing is close.
    std::string suggest(const std::string& name) const;
};

// True for SMT-LIB simple symbols: [A-Za-z_][A-Za-z0-9_]*.
bool is_simple_symbol(const std::string& s);

// ---------------------------------------------------------------------------
// Terms

enum class NodeKind { Var, Ctor, BoolLit, IntLit, RealLit, And, Or, Not, Implies, Op };
enum class OpKind { Add, Sub, Mul, Div, Eq, Gt, Lt, Le, Ge };

std::string op_symbol(OpKind op);

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

struct TermNode {
    NodeKind kind;
    OpKind op = OpKind::Eq;    // meaningful for NodeKind::Op
    std::string name;          // Var / Ctor
    bool bval = false;         // BoolLit
    mpq_class num;             // IntLit / RealLit, always canonicalized
    std::vector<Term> args;
    Sort sort;
};

// Builders; each checks the sorting rules and throws SortError on violation.
Term mk_var(const std::string& name, const Sort& sort);
Term mk_ctor(const std::string& name, const std::string& datatype);
Term mk_bool(bool v);
Term mk_int(const mpz_class& v);
Term mk_real(const mpq_class& v);
Term mk_and(std::vector<Term> args);
Term mk_or(std::vector<Term> args);
Term mk_not(Term arg);
Term mk_implies(Term lhs, Term rhs);
Term mk_op(OpKind op, Term lhs, Term rhs);

bool equal(const Term& a, const Term& b);

// Canonical single-space prefix rendering; parse(print(t)) == t.
std::string print_term(const Term& t);

// Parses one s-expression term against env; returns a sorted term.
Term parse_term(const std::string& text, const SymbolTable& env);

std::set<std::string> free_vars(const Term& t);

size_t node_count(const Term& t);

// ---------------------------------------------------------------------------
// Decimal rendering

// Exact decimal string when the denominator is 2^a * 5^b, else nullopt.
// Integers come out as "50.0" when `force_point` is set.
std::optional<std::string> exact_decimal(const mpq_class& q, bool force_point = true);

// Decimal if terminating, else "p/q".
std::string rational_display(const mpq_class& q);

// Parses "123", "0.75", "-3.5", "763/20" into an exact rational.
mpq_class parse_rational(const std::string& text);

// ---------------------------------------------------------------------------
// Evaluation

struct Value {
    SortKind kind = SortKind::Bool;
    bool b = false;
    mpq_class num;
    std::string ctor;  // Datatype

    static Value boolean(bool v) { return {SortKind::Bool, v, 0, {}}; }
    static Value integer(const mpq_class& v) { return {SortKind::Int, false, v, {}}; }
    static Value real(const mpq_class& v) { return {SortKind::Real, false, v, {}}; }
    static Value dt(std::string c) { return {SortKind::Datatype, false, 0, std::move(c)}; }

    bool operator==(const Value&) const = default;
    std::string str() const;
};

class EvalError : public LogicError {
public:
    using LogicError::LogicError;
};

using ValueMap = std::map<std::string, Value>;

// Exact evaluation under a total assignment. Throws EvalError on an unbound
// variable or division by zero.
Value eval_term(const Term& t, const ValueMap& values);
bool eval_bool(const Term& t, const ValueMap& values);

// ---------------------------------------------------------------------------
// S-expressions (shared by the term parser, the solver wire client and the
// bundled solver's command reader)

struct Sexp {
    bool atom = false;
    std::string tok;          // atom token
    std::vector<Sexp> items;  // list contents
    size_t pos = 0;           // byte offset of the first character
};

// Parses exactly one s-expression; trailing garbage is a SyntaxError.
Sexp parse_sexp(const std::string& text);

// Parses a whole sequence of s-expressions (for command streams).
std::vector<Sexp> parse_sexp_stream(const std::string& text);

std::string sexp_to_string(const Sexp& s);

// Builds a sorted term from an already-parsed s-expression.
Term term_from_sexp(const Sexp& s, const SymbolTable& env);

}  // namespace policycheck::logic
