#include "policycheck/solver.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef POLICYCHECK_MINISMT_PATH
#define POLICYCHECK_MINISMT_PATH ""
#endif

namespace policycheck::solver {

using logic::Sort;
using logic::SortKind;
using logic::Value;

std::vector<std::string> default_solver_command() {
    if (const char* env = std::getenv("POLICYCHECK_SOLVER"); env && *env) {
        // whitespace-separated argv
        std::istringstream ss(env);
        std::vector<std::string> out;
        std::string tok;
        while (ss >> tok) out.push_back(tok);
        if (!out.empty()) return out;
    }
    std::string built = POLICYCHECK_MINISMT_PATH;
    if (!built.empty() && ::access(built.c_str(), X_OK) == 0) return {built};
    return {"minismt"};
}

// ---------------------------------------------------------------------------
// Child process plumbing

struct SolverSession::Process {
    pid_t pid = -1;
    int to_child = -1;    // write end
    int from_child = -1;  // read end
    int child_err = -1;   // read end of stderr
    std::string inbuf;

    ~Process() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        if (child_err >= 0) ::close(child_err);
        if (pid > 0) {
            ::kill(pid, SIGKILL);
            int st;
            ::waitpid(pid, &st, 0);
        }
    }
};

SolverSession::SolverSession(SolverConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.command.empty()) cfg_.command = default_solver_command();
    if (!cfg_.audit_dir.empty()) std::filesystem::create_directories(cfg_.audit_dir);
}

SolverSession::~SolverSession() { shutdown(); }

void SolverSession::shutdown() { proc_.reset(); }

void SolverSession::ensure_running() {
    if (proc_) return;
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe(in_pipe) || ::pipe(out_pipe) || ::pipe(err_pipe))
        throw SolverError("pipe() failed");
    pid_t pid = ::fork();
    if (pid < 0) throw SolverError("fork() failed");
    if (pid == 0) {
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::dup2(err_pipe[1], 2);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]})
            ::close(fd);
        std::vector<char*> argv;
        for (const auto& a : cfg_.command) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execvp(argv[0], argv.data());
        const char* msg = "exec failed\n";
        (void)!::write(2, msg, strlen(msg));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);
    proc_ = std::make_unique<Process>();
    proc_->pid = pid;
    proc_->to_child = in_pipe[1];
    proc_->from_child = out_pipe[0];
    proc_->child_err = err_pipe[0];
}

std::string SolverSession::drain_stderr() {
    if (!proc_ || proc_->child_err < 0) return {};
    std::string out;
    char buf[4096];
    ssize_t n;
    while ((n = ::read(proc_->child_err, buf, sizeof buf)) > 0) out.append(buf, n);
    return out;
}

void SolverSession::send(const std::string& text) {
    transcript_ += text;
    size_t off = 0;
    while (off < text.size()) {
        ssize_t n = ::write(proc_->to_child, text.data() + off, text.size() - off);
        if (n <= 0) {
            std::string err = drain_stderr();
            shutdown();
            throw SolverCrash("solver process is gone; stderr: " + err);
        }
        off += static_cast<size_t>(n);
    }
}

std::string SolverSession::read_line(std::chrono::steady_clock::time_point deadline) {
    while (true) {
        auto nl = proc_->inbuf.find('\n');
        if (nl != std::string::npos) {
            std::string line = proc_->inbuf.substr(0, nl);
            proc_->inbuf.erase(0, nl + 1);
            transcript_ += "; << " + line + "\n";
            return line;
        }
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) throw std::runtime_error("timeout");
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        struct pollfd pfd{proc_->from_child, POLLIN, 0};
        int r = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(ms, 1000)));
        if (r < 0) throw SolverError("poll() failed");
        if (r == 0) continue;
        char buf[8192];
        ssize_t n = ::read(proc_->from_child, buf, sizeof buf);
        if (n <= 0) {
            std::string err = drain_stderr();
            shutdown();
            throw SolverCrash("solver process exited unexpectedly; stderr: " + err);
        }
        proc_->inbuf.append(buf, n);
    }
}

// Reads lines until the parentheses of the reply balance.
std::string SolverSession::read_sexp_reply(std::chrono::steady_clock::time_point deadline) {
    std::string acc;
    int depth = 0;
    bool seen = false;
    while (true) {
        std::string line = read_line(deadline);
        acc += line;
        acc += '\n';
        for (char c : line) {
            if (c == '(') {
                ++depth;
                seen = true;
            } else if (c == ')') {
                --depth;
            }
        }
        if (!seen && !acc.empty() && acc.find_first_not_of(" \n\t") != std::string::npos)
            return acc;  // bare atom reply
        if (seen && depth <= 0) return acc;
    }
}

// ---------------------------------------------------------------------------
// Reply parsing

namespace {

mpq_class parse_value_number(const logic::Sexp& s);

mpq_class parse_value_number(const logic::Sexp& s) {
    if (s.atom) return logic::parse_rational(s.tok);
    if (s.items.empty() || !s.items[0].atom)
        throw ProtocolError("unparsable numeric value");
    const std::string& h = s.items[0].tok;
    if (h == "-" && s.items.size() == 2) return -parse_value_number(s.items[1]);
    if (h == "/" && s.items.size() == 3)
        return parse_value_number(s.items[1]) / parse_value_number(s.items[2]);
    throw ProtocolError("unparsable numeric value: " + sexp_to_string(s));
}

Value parse_value(const logic::Sexp& s, const Sort& sort) {
    switch (sort.kind) {
        case SortKind::Bool:
            if (s.atom && s.tok == "true") return Value::boolean(true);
            if (s.atom && s.tok == "false") return Value::boolean(false);
            throw ProtocolError("expected Bool value, got " + sexp_to_string(s));
        case SortKind::Int:
            return Value::integer(parse_value_number(s));
        case SortKind::Real:
            return Value::real(parse_value_number(s));
        case SortKind::Datatype:
            if (s.atom) return Value::dt(s.tok);
            throw ProtocolError("expected constructor value, got " + sexp_to_string(s));
    }
    throw ProtocolError("bad sort");
}

Value default_value(const Sort& sort, const logic::SymbolTable& env) {
    switch (sort.kind) {
        case SortKind::Bool: return Value::boolean(false);
        case SortKind::Int: return Value::integer(0);
        case SortKind::Real: return Value::real(0);
        case SortKind::Datatype: return Value::dt(env.datatypes.at(sort.datatype).front());
    }
    return Value::boolean(false);
}

std::string quote_datatype_26(const logic::DatatypeDecl& d) {
    std::string out = "(declare-datatype " + d.name + " (";
    for (size_t i = 0; i < d.constructors.size(); ++i) {
        if (i) out += ' ';
        out += "(" + d.constructors[i] + ")";
    }
    out += "))";
    return out;
}

}  // namespace

SolverVerdict SolverSession::check(const model::PolicyModel& m,
                                   const std::vector<LabeledTerm>& extra, bool want_core) {
    std::vector<LabeledTerm> assertions;
    for (const auto& r : m.rules) assertions.push_back({"rule:" + r.id, r.term});
    for (const auto& e : extra) assertions.push_back(e);
    return check_raw(m.env(), assertions, want_core);
}

SolverVerdict SolverSession::check_raw(const logic::SymbolTable& env,
                                       const std::vector<LabeledTerm>& assertions,
                                       bool want_core) {
    ensure_running();
    transcript_.clear();
    ++query_counter_;
    auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;

    // Wire labels are plain indexed symbols; API labels may contain ':'.
    std::vector<std::string> api_labels;
    std::ostringstream script;
    script << "(reset)\n(set-option :produce-models true)\n";
    if (want_core) script << "(set-option :produce-unsat-cores true)\n";
    script << "(set-logic " << cfg_.logic_name << ")\n";
    for (const auto& [name, ctors] : env.datatypes)
        script << quote_datatype_26({name, ctors}) << "\n";
    for (const auto& [name, sort] : env.consts)
        script << "(declare-const " << name << " " << sort.str() << ")\n";
    for (const auto& a : assertions) {
        std::string wire = "lbl" + std::to_string(api_labels.size());
        api_labels.push_back(a.label);
        script << "(assert (! " << logic::print_term(a.term) << " :named " << wire << "))\n";
    }
    script << "(check-sat)\n";

    SolverVerdict verdict;
    try {
        send(script.str());
        std::string status;
        do {
            status = read_line(deadline);
        } while (status.find_first_not_of(" \t\r") == std::string::npos);
        if (status.rfind("(error", 0) == 0)
            throw ProtocolError("solver error: " + status);
        if (status == "sat") {
            verdict.status = SolverVerdict::Status::Sat;
            send("(get-model)\n");
            std::string reply = read_sexp_reply(deadline);
            if (reply.rfind("(error", 0) == 0) throw ProtocolError("solver error: " + reply);
            logic::Sexp model = logic::parse_sexp(reply);
            for (const auto& item : model.items) {
                if (item.atom) continue;  // some solvers emit a leading `model` token
                if (item.items.size() < 5 || !item.items[0].atom ||
                    item.items[0].tok != "define-fun" || !item.items[1].atom)
                    continue;
                const std::string& name = item.items[1].tok;
                auto it = env.consts.find(name);
                if (it == env.consts.end()) continue;
                verdict.assignment.bindings[name] = parse_value(item.items.back(), it->second);
            }
            for (const auto& [name, sort] : env.consts) {
                if (!verdict.assignment.bindings.count(name)) {
                    verdict.assignment.bindings[name] = default_value(sort, env);
                    verdict.assignment.solver_arbitrary.insert(name);
                }
            }
        } else if (status == "unsat") {
            verdict.status = SolverVerdict::Status::Unsat;
            if (want_core) {
                send("(get-unsat-core)\n");
                std::string reply = read_sexp_reply(deadline);
                if (reply.rfind("(error", 0) == 0)
                    throw ProtocolError("solver error: " + reply);
                logic::Sexp core = logic::parse_sexp(reply);
                for (const auto& item : core.items) {
                    if (!item.atom) continue;
                    if (item.tok.rfind("lbl", 0) == 0) {
                        size_t idx = std::stoul(item.tok.substr(3));
                        if (idx < api_labels.size()) verdict.core.push_back(api_labels[idx]);
                    }
                }
            }
        } else if (status == "unknown") {
            verdict.status = SolverVerdict::Status::Unknown;
            verdict.reason = "solver reported unknown";
        } else {
            throw ProtocolError("unexpected solver reply: '" + status + "'");
        }
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()) == "timeout") {
            shutdown();  // the query is wedged; kill and restart lazily
            verdict.status = SolverVerdict::Status::Unknown;
            verdict.reason = "timeout after " + std::to_string(cfg_.timeout.count()) + "ms";
        } else {
            if (!cfg_.audit_dir.empty()) {
                std::ofstream f(cfg_.audit_dir + "/query_" + std::to_string(query_counter_) +
                                ".smt2");
                f << transcript_;
            }
            throw;
        }
    }
    if (!cfg_.audit_dir.empty()) {
        std::ofstream f(cfg_.audit_dir + "/query_" + std::to_string(query_counter_) + ".smt2");
        f << transcript_ << "; verdict: "
          << (verdict.status == SolverVerdict::Status::Sat
                  ? "sat"
                  : verdict.status == SolverVerdict::Status::Unsat ? "unsat" : "unknown")
          << "\n";
    }
    return verdict;
}

EntailResult entails(SolverSession& session, const model::PolicyModel& m,
                     const logic::Term& hypotheses, const logic::Term& consequence) {
    std::vector<LabeledTerm> extra;
    extra.push_back({"premise", hypotheses});
    extra.push_back({"negconclusion", logic::mk_not(consequence)});
    SolverVerdict v = session.check(m, extra, /*want_core=*/true);
    EntailResult r;
    switch (v.status) {
        case SolverVerdict::Status::Unsat:
            r.kind = EntailResult::Kind::Yes;
            r.core = v.core;
            break;
        case SolverVerdict::Status::Sat:
            r.kind = EntailResult::Kind::No;
            r.witness = v.assignment;
            break;
        case SolverVerdict::Status::Unknown:
            r.kind = EntailResult::Kind::Unknown;
            r.reason = v.reason;
            break;
    }
    return r;
}

}  // namespace policycheck::solver
