#include "policycheck/logic.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace policycheck::logic {

std::string Sort::str() const {
    switch (kind) {
        case SortKind::Bool: return "Bool";
        case SortKind::Int: return "Int";
        case SortKind::Real: return "Real";
        case SortKind::Datatype: return datatype;
    }
    return "?";
}

Sort sort_from_string(const std::string& s) {
    if (s == "Bool") return Sort::boolean();
    if (s == "Int") return Sort::integer();
    if (s == "Real") return Sort::real();
    return Sort::dt(s);
}

SyntaxError::SyntaxError(std::string msg, size_t p)
    : LogicError(msg + " (at offset " + std::to_string(p) + ")"), position(p) {}

SortError::SortError(std::string msg, std::string subterm)
    : LogicError(msg + " in " + subterm), offending(std::move(subterm)) {}

UnknownSymbol::UnknownSymbol(const std::string& n, const std::string& sugg)
    : LogicError("unknown symbol '" + n + "'" +
                 (sugg.empty() ? std::string() : ", did you mean '" + sugg + "'?")),
      name(n), suggestion(sugg) {}

bool is_simple_symbol(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

void SymbolTable::add_datatype(const DatatypeDecl& d) {
    if (d.name.empty() || d.constructors.empty())
        throw LogicError("datatype needs a name and at least one constructor");
    if (declared(d.name)) throw LogicError("duplicate declaration of '" + d.name + "'");
    std::set<std::string> seen;
    for (const auto& c : d.constructors) {
        if (!seen.insert(c).second)
            throw LogicError("duplicate constructor '" + c + "' in datatype " + d.name);
        if (declared(c)) throw LogicError("duplicate declaration of '" + c + "'");
    }
    datatypes[d.name] = d.constructors;
    for (size_t i = 0; i < d.constructors.size(); ++i)
        constructors[d.constructors[i]] = {d.name, static_cast<int>(i)};
}

void SymbolTable::add_const(const std::string& name, const Sort& sort) {
    if (declared(name)) throw LogicError("duplicate declaration of '" + name + "'");
    if (sort.kind == SortKind::Datatype && !datatypes.count(sort.datatype))
        throw LogicError("const '" + name + "' uses undeclared datatype " + sort.datatype);
    consts[name] = sort;
}

bool SymbolTable::declared(const std::string& name) const {
    return datatypes.count(name) || consts.count(name) || constructors.count(name);
}

void SymbolTable::clear() {
    datatypes.clear();
    consts.clear();
    constructors.clear();
}

namespace {

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::string SymbolTable::suggest(const std::string& name) const {
    std::string best;
    size_t best_d = name.size() / 2 + 2;  // only suggest reasonably close names
    auto consider = [&](const std::string& cand) {
        size_t d = edit_distance(name, cand);
        if (d < best_d) {
            best_d = d;
            best = cand;
        }
    };
    for (const auto& [n, _] : consts) consider(n);
    for (const auto& [n, _] : constructors) consider(n);
    return best;
}

// ---------------------------------------------------------------------------
// Builders

std::string op_symbol(OpKind op) {
    switch (op) {
        case OpKind::Add: return "+";
        case OpKind::Sub: return "-";
        case OpKind::Mul: return "*";
        case OpKind::Div: return "/";
        case OpKind::Eq: return "=";
        case OpKind::Gt: return ">";
        case OpKind::Lt: return "<";
        case OpKind::Le: return "<=";
        case OpKind::Ge: return ">=";
    }
    return "?";
}

namespace {
Term make(TermNode n) { return std::make_shared<const TermNode>(std::move(n)); }

void require_bool(const Term& t, const char* ctx) {
    if (t->sort.kind != SortKind::Bool)
        throw SortError(std::string(ctx) + " expects Bool arguments, got " + t->sort.str(),
                        print_term(t));
}
}  // namespace

Term mk_var(const std::string& name, const Sort& sort) {
    TermNode n{NodeKind::Var};
    n.name = name;
    n.sort = sort;
    return make(std::move(n));
}

Term mk_ctor(const std::string& name, const std::string& datatype) {
    TermNode n{NodeKind::Ctor};
    n.name = name;
    n.sort = Sort::dt(datatype);
    return make(std::move(n));
}

Term mk_bool(bool v) {
    TermNode n{NodeKind::BoolLit};
    n.bval = v;
    n.sort = Sort::boolean();
    return make(std::move(n));
}

Term mk_int(const mpz_class& v) {
    TermNode n{NodeKind::IntLit};
    n.num = mpq_class(v);
    n.sort = Sort::integer();
    return make(std::move(n));
}

Term mk_real(const mpq_class& v) {
    TermNode n{NodeKind::RealLit};
    n.num = v;
    n.num.canonicalize();
    n.sort = Sort::real();
    return make(std::move(n));
}

Term mk_and(std::vector<Term> args) {
    if (args.size() < 2) throw SortError("and needs at least 2 arguments", "(and ...)");
    for (const auto& a : args) require_bool(a, "and");
    TermNode n{NodeKind::And};
    n.args = std::move(args);
    n.sort = Sort::boolean();
    return make(std::move(n));
}

Term mk_or(std::vector<Term> args) {
    if (args.size() < 2) throw SortError("or needs at least 2 arguments", "(or ...)");
    for (const auto& a : args) require_bool(a, "or");
    TermNode n{NodeKind::Or};
    n.args = std::move(args);
    n.sort = Sort::boolean();
    return make(std::move(n));
}

Term mk_not(Term arg) {
    require_bool(arg, "not");
    TermNode n{NodeKind::Not};
    n.args = {std::move(arg)};
    n.sort = Sort::boolean();
    return make(std::move(n));
}

Term mk_implies(Term lhs, Term rhs) {
    require_bool(lhs, "=>");
    require_bool(rhs, "=>");
    TermNode n{NodeKind::Implies};
    n.args = {std::move(lhs), std::move(rhs)};
    n.sort = Sort::boolean();
    return make(std::move(n));
}

Term mk_op(OpKind op, Term lhs, Term rhs) {
    const Sort& a = lhs->sort;
    const Sort& b = rhs->sort;
    Sort result;
    switch (op) {
        case OpKind::Eq:
            if (!((a == b) || (a.is_numeric() && b.is_numeric())))
                throw SortError("= over incompatible sorts " + a.str() + " and " + b.str(),
                                "(= " + print_term(lhs) + " " + print_term(rhs) + ")");
            result = Sort::boolean();
            break;
        case OpKind::Gt:
        case OpKind::Lt:
        case OpKind::Le:
        case OpKind::Ge:
            if (!a.is_numeric() || !b.is_numeric())
                throw SortError(op_symbol(op) + " expects numeric arguments",
                                "(" + op_symbol(op) + " " + print_term(lhs) + " " +
                                    print_term(rhs) + ")");
            result = Sort::boolean();
            break;
        case OpKind::Div:
            if (!a.is_numeric() || !b.is_numeric())
                throw SortError("/ expects numeric arguments",
                                "(/ " + print_term(lhs) + " " + print_term(rhs) + ")");
            // Division is real-valued; mixed Int/Real operands coerce to Real.
            result = Sort::real();
            break;
        default:
            if (!a.is_numeric() || !b.is_numeric())
                throw SortError(op_symbol(op) + " expects numeric arguments",
                                "(" + op_symbol(op) + " " + print_term(lhs) + " " +
                                    print_term(rhs) + ")");
            result = (a.kind == SortKind::Int && b.kind == SortKind::Int) ? Sort::integer()
                                                                          : Sort::real();
            break;
    }
    TermNode n{NodeKind::Op};
    n.op = op;
    n.args = {std::move(lhs), std::move(rhs)};
    n.sort = result;
    return make(std::move(n));
}

bool equal(const Term& a, const Term& b) {
    if (a.get() == b.get()) return true;
    if (a->kind != b->kind || !(a->sort == b->sort)) return false;
    switch (a->kind) {
        case NodeKind::Var:
        case NodeKind::Ctor:
            return a->name == b->name;
        case NodeKind::BoolLit:
            return a->bval == b->bval;
        case NodeKind::IntLit:
        case NodeKind::RealLit:
            return a->num == b->num;
        case NodeKind::Op:
            if (a->op != b->op) return false;
            [[fallthrough]];
        default:
            if (a->args.size() != b->args.size()) return false;
            for (size_t i = 0; i < a->args.size(); ++i)
                if (!equal(a->args[i], b->args[i])) return false;
            return true;
    }
}

// ---------------------------------------------------------------------------
// Printing

namespace {
void print_rec(const Term& t, std::string& out) {
    switch (t->kind) {
        case NodeKind::Var:
        case NodeKind::Ctor:
            out += t->name;
            return;
        case NodeKind::BoolLit:
            out += t->bval ? "true" : "false";
            return;
        case NodeKind::IntLit:
            out += t->num.get_num().get_str();
            return;
        case NodeKind::RealLit: {
            auto dec = exact_decimal(t->num);
            out += dec ? *dec : t->num.get_str();
            return;
        }
        case NodeKind::And:
        case NodeKind::Or:
        case NodeKind::Not:
        case NodeKind::Implies:
        case NodeKind::Op: {
            out += '(';
            if (t->kind == NodeKind::And) out += "and";
            else if (t->kind == NodeKind::Or) out += "or";
            else if (t->kind == NodeKind::Not) out += "not";
            else if (t->kind == NodeKind::Implies) out += "=>";
            else out += op_symbol(t->op);
            for (const auto& a : t->args) {
                out += ' ';
                print_rec(a, out);
            }
            out += ')';
            return;
        }
    }
}
}  // namespace

std::string print_term(const Term& t) {
    std::string out;
    print_rec(t, out);
    return out;
}

std::set<std::string> free_vars(const Term& t) {
    std::set<std::string> out;
    auto walk = [&](auto&& self, const Term& u) -> void {
        if (u->kind == NodeKind::Var) out.insert(u->name);
        for (const auto& a : u->args) self(self, a);
    };
    walk(walk, t);
    return out;
}

size_t node_count(const Term& t) {
    size_t n = 1;
    for (const auto& a : t->args) n += node_count(a);
    return n;
}

// ---------------------------------------------------------------------------
// Decimal helpers

std::optional<std::string> exact_decimal(const mpq_class& q, bool force_point) {
    mpz_class den = q.get_den();
    unsigned twos = 0, fives = 0;
    while (den % 2 == 0) { den /= 2; ++twos; }
    while (den % 5 == 0) { den /= 5; ++fives; }
    if (den != 1) return std::nullopt;
    unsigned digits = std::max(twos, fives);
    mpz_class scale = 1;
    for (unsigned i = 0; i < digits; ++i) scale *= 10;
    mpz_class scaled = q.get_num() * (scale / q.get_den()) ;
    // scale / den is exact: den divides 10^digits by construction
    bool neg = scaled < 0;
    if (neg) scaled = -scaled;
    std::string s = scaled.get_str();
    std::string out;
    if (digits == 0) {
        out = s;
        if (force_point) out += ".0";
    } else {
        if (s.size() <= digits) s.insert(0, digits + 1 - s.size(), '0');
        out = s.substr(0, s.size() - digits) + "." + s.substr(s.size() - digits);
        // trim trailing zeros, keep one fractional digit
        while (out.back() == '0' && out[out.size() - 2] != '.') out.pop_back();
    }
    if (neg) out.insert(0, 1, '-');
    return out;
}

std::string rational_display(const mpq_class& q) {
    auto dec = exact_decimal(q, false);
    return dec ? *dec : q.get_str();
}

mpq_class parse_rational(const std::string& text) {
    std::string s = text;
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.erase(0, 1);
    }
    mpq_class q;
    auto bad = [&] { throw LogicError("not a numeral: '" + text + "'"); };
    if (s.empty()) bad();
    auto slash = s.find('/');
    auto dot = s.find('.');
    if (slash != std::string::npos) {
        std::string n = s.substr(0, slash), d = s.substr(slash + 1);
        if (n.empty() || d.empty()) bad();
        q = mpq_class(mpz_class(n), mpz_class(d));
        q.canonicalize();
    } else if (dot != std::string::npos) {
        std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
        if (ip.empty() && fp.empty()) bad();
        for (char c : ip + fp)
            if (!std::isdigit(static_cast<unsigned char>(c))) bad();
        mpz_class scale = 1;
        for (size_t i = 0; i < fp.size(); ++i) scale *= 10;
        mpz_class num = mpz_class(ip.empty() ? "0" : ip) * scale +
                        (fp.empty() ? mpz_class(0) : mpz_class(fp));
        q = mpq_class(num, scale);
        q.canonicalize();
    } else {
        for (char c : s)
            if (!std::isdigit(static_cast<unsigned char>(c))) bad();
        q = mpq_class(mpz_class(s));
    }
    return neg ? mpq_class(-q) : q;
}

// ---------------------------------------------------------------------------
// S-expression reader

namespace {

struct Cursor {
    const std::string& text;
    size_t i = 0;

    void skip_ws() {
        while (i < text.size()) {
            if (std::isspace(static_cast<unsigned char>(text[i]))) { ++i; continue; }
            if (text[i] == ';') {  // comment to end of line
                while (i < text.size() && text[i] != '\n') ++i;
                continue;
            }
            break;
        }
    }

    Sexp read() {
        skip_ws();
        if (i >= text.size()) throw SyntaxError("unexpected end of input", i);
        Sexp s;
        s.pos = i;
        if (text[i] == '(') {
            ++i;
            while (true) {
                skip_ws();
                if (i >= text.size()) throw SyntaxError("unbalanced '('", s.pos);
                if (text[i] == ')') { ++i; break; }
                s.items.push_back(read());
            }
            return s;
        }
        if (text[i] == ')') throw SyntaxError("unexpected ')'", i);
        if (text[i] == '|')
            throw SyntaxError("quoted symbols are not in the fragment", i);
        if (text[i] == '"') {  // string literal token, quotes kept
            size_t start = i++;
            while (i < text.size() && text[i] != '"') ++i;
            if (i >= text.size()) throw SyntaxError("unterminated string", start);
            ++i;
            s.atom = true;
            s.tok = text.substr(start, i - start);
            return s;
        }
        s.atom = true;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
               text[i] != '(' && text[i] != ')' && text[i] != ';')
            ++i;
        s.tok = text.substr(start, i - start);
        return s;
    }
};

}  // namespace

Sexp parse_sexp(const std::string& text) {
    Cursor c{text};
    Sexp s = c.read();
    c.skip_ws();
    if (c.i < text.size()) throw SyntaxError("trailing input after s-expression", c.i);
    return s;
}

std::vector<Sexp> parse_sexp_stream(const std::string& text) {
    Cursor c{text};
    std::vector<Sexp> out;
    while (true) {
        c.skip_ws();
        if (c.i >= text.size()) break;
        out.push_back(c.read());
    }
    return out;
}

std::string sexp_to_string(const Sexp& s) {
    if (s.atom) return s.tok;
    std::string out = "(";
    for (size_t i = 0; i < s.items.size(); ++i) {
        if (i) out += ' ';
        out += sexp_to_string(s.items[i]);
    }
    out += ')';
    return out;
}

// ---------------------------------------------------------------------------
// Term construction from s-expressions

namespace {

const std::set<std::string> kBannedHeads = {
    "forall", "exists", "let", "define-fun", "lambda", "match", "exists!",
    "ite", "distinct", "select", "store", "str.len"};

// Accepts everything the printer can emit for a literal: an optional sign,
// then digits with at most one '.' or one '/'.
bool is_numeral(const std::string& s) {
    size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
    bool saw_digit = false, saw_dot = false, saw_slash = false;
    if (i >= s.size()) return false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c == '.') {
            if (saw_dot || saw_slash) return false;
            saw_dot = true;
        } else if (c == '/') {
            if (saw_dot || saw_slash || !saw_digit) return false;
            saw_slash = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            saw_digit = true;
        } else {
            return false;
        }
    }
    return saw_digit && (!saw_slash || std::isdigit(static_cast<unsigned char>(s.back())));
}

}  // namespace

Term term_from_sexp(const Sexp& s, const SymbolTable& env) {
    if (s.atom) {
        const std::string& t = s.tok;
        if (t == "true") return mk_bool(true);
        if (t == "false") return mk_bool(false);
        if (is_numeral(t)) {
            if (t.find('.') != std::string::npos || t.find('/') != std::string::npos)
                return mk_real(parse_rational(t));
            return mk_int(mpz_class(t));
        }
        if (kBannedHeads.count(t))
            throw SyntaxError("'" + t + "' is outside the fragment", s.pos);
        if (!is_simple_symbol(t))
            throw SyntaxError("'" + t + "' is not a simple symbol", s.pos);
        if (auto it = env.consts.find(t); it != env.consts.end())
            return mk_var(t, it->second);
        if (auto it = env.constructors.find(t); it != env.constructors.end())
            return mk_ctor(t, it->second.first);
        throw UnknownSymbol(t, env.suggest(t));
    }
    if (s.items.empty()) throw SyntaxError("empty application", s.pos);
    if (!s.items[0].atom) throw SyntaxError("operator must be a symbol", s.items[0].pos);
    const std::string& head = s.items[0].tok;
    if (kBannedHeads.count(head))
        throw SyntaxError("'" + head + "' is outside the fragment", s.items[0].pos);
    auto arity = s.items.size() - 1;
    auto arg = [&](size_t i) { return term_from_sexp(s.items[i + 1], env); };

    if (head == "and" || head == "or") {
        if (arity < 2) throw SyntaxError(head + " needs at least 2 arguments", s.pos);
        std::vector<Term> args;
        for (size_t i = 0; i < arity; ++i) args.push_back(arg(i));
        return head == "and" ? mk_and(std::move(args)) : mk_or(std::move(args));
    }
    if (head == "not") {
        if (arity != 1) throw SyntaxError("not takes exactly 1 argument", s.pos);
        return mk_not(arg(0));
    }
    if (head == "=>") {
        if (arity != 2) throw SyntaxError("=> takes exactly 2 arguments", s.pos);
        return mk_implies(arg(0), arg(1));
    }
    static const std::map<std::string, OpKind> ops = {
        {"+", OpKind::Add}, {"-", OpKind::Sub}, {"*", OpKind::Mul}, {"/", OpKind::Div},
        {"=", OpKind::Eq},  {">", OpKind::Gt}, {"<", OpKind::Lt},  {"<=", OpKind::Le},
        {">=", OpKind::Ge}};
    if (auto it = ops.find(head); it != ops.end()) {
        if (head == "-" && arity == 1)  // unary minus desugars to (- 0 e)
            return mk_op(OpKind::Sub, mk_int(0), arg(0));
        if (arity != 2)
            throw SyntaxError(head + " takes exactly 2 arguments", s.pos);
        return mk_op(it->second, arg(0), arg(1));
    }
    // Application of a declared name would be an uninterpreted function call.
    if (env.declared(head))
        throw SyntaxError("'" + head + "' cannot be applied, the fragment has no functions",
                          s.items[0].pos);
    throw UnknownSymbol(head, env.suggest(head));
}

Term parse_term(const std::string& text, const SymbolTable& env) {
    return term_from_sexp(parse_sexp(text), env);
}

// ---------------------------------------------------------------------------
// Evaluation

std::string Value::str() const {
    switch (kind) {
        case SortKind::Bool: return b ? "true" : "false";
        case SortKind::Int: return num.get_num().get_str();
        case SortKind::Real: {
            auto dec = exact_decimal(num);
            return dec ? *dec : num.get_str();
        }
        case SortKind::Datatype: return ctor;
    }
    return "?";
}

namespace {

mpq_class eval_num(const Term& t, const ValueMap& values);

Value eval_any(const Term& t, const ValueMap& values) {
    switch (t->kind) {
        case NodeKind::Var: {
            auto it = values.find(t->name);
            if (it == values.end()) throw EvalError("unbound variable " + t->name);
            return it->second;
        }
        case NodeKind::Ctor:
            return Value::dt(t->name);
        case NodeKind::BoolLit:
            return Value::boolean(t->bval);
        case NodeKind::IntLit:
            return Value::integer(t->num);
        case NodeKind::RealLit:
            return Value::real(t->num);
        case NodeKind::And: {
            for (const auto& a : t->args)
                if (!eval_bool(a, values)) return Value::boolean(false);
            return Value::boolean(true);
        }
        case NodeKind::Or: {
            for (const auto& a : t->args)
                if (eval_bool(a, values)) return Value::boolean(true);
            return Value::boolean(false);
        }
        case NodeKind::Not:
            return Value::boolean(!eval_bool(t->args[0], values));
        case NodeKind::Implies:
            return Value::boolean(!eval_bool(t->args[0], values) ||
                                  eval_bool(t->args[1], values));
        case NodeKind::Op: {
            switch (t->op) {
                case OpKind::Eq: {
                    Value a = eval_any(t->args[0], values);
                    Value b = eval_any(t->args[1], values);
                    if (a.kind == SortKind::Bool || b.kind == SortKind::Bool)
                        return Value::boolean(a.kind == b.kind && a.b == b.b);
                    if (a.kind == SortKind::Datatype || b.kind == SortKind::Datatype)
                        return Value::boolean(a.kind == b.kind && a.ctor == b.ctor);
                    return Value::boolean(a.num == b.num);
                }
                case OpKind::Gt:
                    return Value::boolean(eval_num(t->args[0], values) >
                                          eval_num(t->args[1], values));
                case OpKind::Lt:
                    return Value::boolean(eval_num(t->args[0], values) <
                                          eval_num(t->args[1], values));
                case OpKind::Le:
                    return Value::boolean(eval_num(t->args[0], values) <=
                                          eval_num(t->args[1], values));
                case OpKind::Ge:
                    return Value::boolean(eval_num(t->args[0], values) >=
                                          eval_num(t->args[1], values));
                case OpKind::Add:
                case OpKind::Sub:
                case OpKind::Mul:
                case OpKind::Div: {
                    mpq_class v = eval_num(t, values);
                    return t->sort.kind == SortKind::Int ? Value::integer(v) : Value::real(v);
                }
            }
            break;
        }
    }
    throw EvalError("unreachable term kind");
}

mpq_class eval_num(const Term& t, const ValueMap& values) {
    if (t->kind == NodeKind::Op) {
        switch (t->op) {
            case OpKind::Add: return eval_num(t->args[0], values) + eval_num(t->args[1], values);
            case OpKind::Sub: return eval_num(t->args[0], values) - eval_num(t->args[1], values);
            case OpKind::Mul: return eval_num(t->args[0], values) * eval_num(t->args[1], values);
            case OpKind::Div: {
                mpq_class d = eval_num(t->args[1], values);
                if (d == 0) throw EvalError("division by zero in " + print_term(t));
                return eval_num(t->args[0], values) / d;
            }
            default: break;
        }
    }
    Value v = eval_any(t, values);
    if (v.kind != SortKind::Int && v.kind != SortKind::Real)
        throw EvalError("expected numeric value in " + print_term(t));
    return v.num;
}

}  // namespace

Value eval_term(const Term& t, const ValueMap& values) { return eval_any(t, values); }

bool eval_bool(const Term& t, const ValueMap& values) {
    Value v = eval_any(t, values);
    if (v.kind != SortKind::Bool) throw EvalError("expected Bool value");
    return v.b;
}

}  // namespace policycheck::logic
