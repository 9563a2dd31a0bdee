// Minimal SMT-LIB2 solver for the quantifier-free Bool/Int/Real/enum
// fragment. Reads commands from stdin, answers on stdout: suitable both as
// the engine's default child solver and for interactive use. A full SMT
// solver (e.g. z3) can be dropped in behind the same wire protocol.

#include <iostream>
#include <sstream>
#include <string>

#include "policycheck/logic.hpp"
#include "policycheck/microsolve.hpp"

using namespace policycheck;

namespace {

struct Session {
    microsolve::Problem problem;
    int unnamed = 0;
    std::optional<microsolve::Result> last;

    void reset() {
        problem = {};
        unnamed = 0;
        last.reset();
    }
};

void error(const std::string& msg) { std::cout << "(error \"" << msg << "\")\n"; }

std::string print_value(const logic::Value& v) {
    using logic::SortKind;
    switch (v.kind) {
        case SortKind::Bool:
            return v.b ? "true" : "false";
        case SortKind::Int: {
            mpz_class n = v.num.get_num();
            if (n < 0) return "(- " + mpz_class(-n).get_str() + ")";
            return n.get_str();
        }
        case SortKind::Real: {
            mpq_class q = v.num;
            bool neg = q < 0;
            if (neg) q = -q;
            std::string body;
            if (auto dec = logic::exact_decimal(q)) {
                body = *dec;
            } else {
                body = "(/ " + q.get_num().get_str() + " " + q.get_den().get_str() + ")";
            }
            return neg ? "(- " + body + ")" : body;
        }
        case SortKind::Datatype:
            return v.ctor;
    }
    return "?";
}

void handle_declare_datatype(Session& s, const logic::Sexp& cmd) {
    if (cmd.items.size() != 3 || !cmd.items[1].atom)
        throw logic::LogicError("declare-datatype expects a name and constructor list");
    logic::DatatypeDecl d;
    d.name = cmd.items[1].tok;
    const auto& body = cmd.items[2];
    if (body.atom) throw logic::LogicError("constructor list must be parenthesized");
    for (const auto& c : body.items) {
        if (c.atom) {
            d.constructors.push_back(c.tok);  // flat form: (declare-datatype K (A B))
        } else if (c.items.size() == 1 && c.items[0].atom) {
            d.constructors.push_back(c.items[0].tok);  // 2.6 form: ((A) (B))
        } else {
            throw logic::LogicError("only nullary constructors are supported");
        }
    }
    s.problem.env.add_datatype(d);
}

void handle_declare_const(Session& s, const logic::Sexp& cmd) {
    if (cmd.items.size() != 3 || !cmd.items[1].atom || !cmd.items[2].atom)
        throw logic::LogicError("declare-const expects a name and a sort");
    logic::Sort sort = logic::sort_from_string(cmd.items[2].tok);
    if (sort.kind == logic::SortKind::Datatype && !s.problem.env.datatypes.count(sort.datatype))
        throw logic::LogicError("unknown sort " + cmd.items[2].tok);
    s.problem.env.add_const(cmd.items[1].tok, sort);
}

void handle_assert(Session& s, const logic::Sexp& cmd) {
    if (cmd.items.size() != 2) throw logic::LogicError("assert expects one term");
    const logic::Sexp* body = &cmd.items[1];
    std::string label = "a" + std::to_string(s.unnamed++);
    // (! term :named label)
    if (!body->atom && !body->items.empty() && body->items[0].atom && body->items[0].tok == "!") {
        if (body->items.size() != 4 || !body->items[2].atom || body->items[2].tok != ":named" ||
            !body->items[3].atom)
            throw logic::LogicError("malformed :named annotation");
        label = body->items[3].tok;
        body = &body->items[1];
    }
    logic::Term t = logic::term_from_sexp(*body, s.problem.env);
    if (t->sort.kind != logic::SortKind::Bool)
        throw logic::LogicError("asserted term must be Bool");
    s.problem.assertions.emplace_back(label, t);
}

void handle_get_model(Session& s) {
    if (!s.last || s.last->status != microsolve::Status::Sat) {
        error("model is not available");
        return;
    }
    // Variables that occur in no assertion are unconstrained; leave them out
    // so the client can tell they are arbitrary.
    std::set<std::string> used;
    for (const auto& [label, t] : s.problem.assertions)
        for (const auto& v : logic::free_vars(t)) used.insert(v);
    std::ostringstream out;
    out << "(model";
    for (const auto& [name, sort] : s.problem.env.consts) {
        if (!used.count(name)) continue;
        auto it = s.last->model.find(name);
        if (it == s.last->model.end()) continue;
        out << " (define-fun " << name << " () " << sort.str() << " "
            << print_value(it->second) << ")";
    }
    out << ")";
    std::cout << out.str() << "\n";
}

void handle_get_core(Session& s) {
    if (!s.last || s.last->status != microsolve::Status::Unsat) {
        error("unsat core is not available");
        return;
    }
    auto core = microsolve::unsat_core(s.problem);
    std::ostringstream out;
    out << "(";
    for (size_t i = 0; i < core.size(); ++i) {
        if (i) out << " ";
        out << core[i];
    }
    out << ")";
    std::cout << out.str() << "\n";
}

}  // namespace

int main() {
    std::ios::sync_with_stdio(false);
    Session session;
    std::string buffer;
    std::string line;
    int depth = 0;
    while (std::getline(std::cin, line)) {
        buffer += line;
        buffer += '\n';
        for (char c : line) {
            if (c == ';') break;
            if (c == '(') ++depth;
            if (c == ')') --depth;
        }
        if (depth > 0) continue;  // keep reading until parens balance
        std::vector<logic::Sexp> cmds;
        try {
            cmds = logic::parse_sexp_stream(buffer);
        } catch (const std::exception& e) {
            error(e.what());
            buffer.clear();
            depth = 0;
            continue;
        }
        buffer.clear();
        depth = 0;
        for (const auto& cmd : cmds) {
            try {
                if (cmd.atom || cmd.items.empty() || !cmd.items[0].atom) {
                    error("expected a command");
                    continue;
                }
                const std::string& head = cmd.items[0].tok;
                if (head == "set-logic" || head == "set-info" || head == "set-option") {
                    // accepted silently; models and cores are always produced
                } else if (head == "declare-datatype") {
                    handle_declare_datatype(session, cmd);
                } else if (head == "declare-const") {
                    handle_declare_const(session, cmd);
                } else if (head == "assert") {
                    handle_assert(session, cmd);
                } else if (head == "check-sat") {
                    session.last = microsolve::solve(session.problem);
                    switch (session.last->status) {
                        case microsolve::Status::Sat: std::cout << "sat\n"; break;
                        case microsolve::Status::Unsat: std::cout << "unsat\n"; break;
                        case microsolve::Status::Unknown: std::cout << "unknown\n"; break;
                    }
                } else if (head == "get-model") {
                    handle_get_model(session);
                } else if (head == "get-unsat-core") {
                    handle_get_core(session);
                } else if (head == "echo") {
                    std::string msg = cmd.items.size() > 1 ? sexp_to_string(cmd.items[1]) : "";
                    if (msg.size() >= 2 && msg.front() == '"' && msg.back() == '"')
                        msg = msg.substr(1, msg.size() - 2);
                    std::cout << msg << "\n";
                } else if (head == "reset") {
                    session.reset();
                } else if (head == "exit") {
                    std::cout.flush();
                    return 0;
                } else {
                    error("unsupported command " + head);
                }
            } catch (const std::exception& e) {
                error(e.what());
            }
        }
        std::cout.flush();
    }
    return 0;
}
