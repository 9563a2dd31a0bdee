#include "policycheck/microsolve.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace policycheck::microsolve {

using logic::NodeKind;
using logic::OpKind;
using logic::Sort;
using logic::SortKind;
using logic::Term;
using logic::Value;

namespace {

constexpr int kFalse = 0, kTrue = 1, kUndef = 2;

// Linear expression over named variables. Datatype variables are encoded as
// bounded Int variables holding the constructor index.
struct LinExpr {
    std::map<std::string, mpq_class> coeff;
    mpq_class k = 0;

    void add(const LinExpr& o, const mpq_class& scale) {
        k += o.k * scale;
        for (const auto& [v, c] : o.coeff) {
            mpq_class& slot = coeff[v];
            slot += c * scale;
            if (slot == 0) coeff.erase(v);
        }
    }
    bool constant() const { return coeff.empty(); }
};

struct Ineq {
    LinExpr e;  // e <= 0 (or < 0 when strict)
    bool strict = false;
};

struct TheoryUnknown {};  // nonlinear residue; propagated as an exception

class Engine {
public:
    Engine(const Problem& p, size_t budget) : prob_(p), budget_(budget) {
        collect();
    }

    Result run() {
        assign_.assign(atoms_.size(), kUndef);
        Result r;
        try {
            bool sat = dpll();
            if (sat) {
                r.status = Status::Sat;
                r.model = build_model();
                // The model must satisfy every assertion; a failure here is an
                // engine defect and is surfaced as Unknown, never as Sat.
                for (const auto& [label, t] : prob_.assertions) {
                    if (!logic::eval_bool(t, r.model)) {
                        r.status = Status::Unknown;
                        r.reason = "internal: model validation failed for " + label;
                        r.model.clear();
                        return r;
                    }
                }
            } else if (saw_unknown_) {
                r.status = Status::Unknown;
                r.reason = unknown_reason_.empty() ? "incomplete search" : unknown_reason_;
            } else {
                r.status = Status::Unsat;
            }
        } catch (const BudgetExceeded&) {
            r.status = Status::Unknown;
            r.reason = "resource budget exceeded";
        }
        return r;
    }

private:
    struct BudgetExceeded {};

    const Problem& prob_;
    size_t budget_;
    size_t used_ = 0;

    std::vector<Term> atoms_;
    std::map<std::string, size_t> atom_index_;
    std::map<const logic::TermNode*, size_t> atom_of_node_;
    std::vector<int8_t> assign_;
    bool saw_unknown_ = false;
    std::string unknown_reason_;
    logic::ValueMap theory_model_;  // numeric/datatype values at the sat leaf

    void tick() {
        if (++used_ > budget_) throw BudgetExceeded{};
    }

    // An atom is a Bool-sorted leaf of the propositional structure: a Bool
    // variable or an arithmetic/datatype comparison. Equality over Bool
    // operands is treated as a connective (iff), not an atom.
    static bool is_connective(const Term& t) {
        switch (t->kind) {
            case NodeKind::And:
            case NodeKind::Or:
            case NodeKind::Not:
            case NodeKind::Implies:
                return true;
            case NodeKind::Op:
                return t->op == OpKind::Eq && t->args[0]->sort.kind == SortKind::Bool;
            default:
                return false;
        }
    }

    void collect_atoms(const Term& t) {
        if (t->sort.kind != SortKind::Bool) return;
        if (is_connective(t)) {
            for (const auto& a : t->args) collect_atoms(a);
            return;
        }
        if (t->kind == NodeKind::BoolLit) return;
        std::string key = logic::print_term(t);
        auto it = atom_index_.find(key);
        if (it == atom_index_.end()) {
            it = atom_index_.emplace(key, atoms_.size()).first;
            atoms_.push_back(t);
        }
        atom_of_node_[t.get()] = it->second;
    }

    void collect() {
        for (const auto& [label, t] : prob_.assertions) collect_atoms(t);
    }

    int eval3(const Term& t) const {
        if (t->kind == NodeKind::BoolLit) return t->bval ? kTrue : kFalse;
        if (!is_connective(t)) return assign_[atom_of_node_.at(t.get())];
        switch (t->kind) {
            case NodeKind::And: {
                bool undef = false;
                for (const auto& a : t->args) {
                    int v = eval3(a);
                    if (v == kFalse) return kFalse;
                    if (v == kUndef) undef = true;
                }
                return undef ? kUndef : kTrue;
            }
            case NodeKind::Or: {
                bool undef = false;
                for (const auto& a : t->args) {
                    int v = eval3(a);
                    if (v == kTrue) return kTrue;
                    if (v == kUndef) undef = true;
                }
                return undef ? kUndef : kFalse;
            }
            case NodeKind::Not: {
                int v = eval3(t->args[0]);
                return v == kUndef ? kUndef : (v == kTrue ? kFalse : kTrue);
            }
            case NodeKind::Implies: {
                int a = eval3(t->args[0]), b = eval3(t->args[1]);
                if (a == kFalse || b == kTrue) return kTrue;
                if (a == kTrue && b == kFalse) return kFalse;
                return kUndef;
            }
            case NodeKind::Op: {  // iff
                int a = eval3(t->args[0]), b = eval3(t->args[1]);
                if (a == kUndef || b == kUndef) return kUndef;
                return a == b ? kTrue : kFalse;
            }
            default:
                return kUndef;
        }
    }

    // First unassigned atom inside an undetermined subterm.
    std::optional<size_t> pick_atom(const Term& t) const {
        if (t->kind == NodeKind::BoolLit) return std::nullopt;
        if (!is_connective(t)) {
            size_t i = atom_of_node_.at(t.get());
            if (assign_[i] == kUndef) return i;
            return std::nullopt;
        }
        for (const auto& a : t->args) {
            if (eval3(a) != kUndef) continue;
            if (auto r = pick_atom(a)) return r;
        }
        return std::nullopt;
    }

    bool dpll() {
        tick();
        bool all_true = true;
        const Term* undetermined = nullptr;
        for (const auto& [label, t] : prob_.assertions) {
            int v = eval3(t);
            if (v == kFalse) return false;
            if (v == kUndef) {
                all_true = false;
                if (!undetermined) undetermined = &t;
            }
        }
        if (all_true) {
            Status th = theory_check();
            if (th == Status::Sat) return true;
            if (th == Status::Unknown) saw_unknown_ = true;
            return false;
        }
        auto pick = pick_atom(*undetermined);
        if (!pick) return false;  // cannot happen: undetermined implies a free atom
        size_t i = *pick;
        for (int v : {kTrue, kFalse}) {
            assign_[i] = static_cast<int8_t>(v);
            if (dpll()) return true;
        }
        assign_[i] = kUndef;
        return false;
    }

    // ---- theory layer -----------------------------------------------------

    struct Constraint {
        Term lhs, rhs;
        OpKind op;
        bool truth;  // asserted polarity
    };

    int enum_size(const std::string& datatype) const {
        return static_cast<int>(prob_.env.datatypes.at(datatype).size());
    }

    std::optional<LinExpr> linearize(const Term& t,
                                     const std::map<std::string, mpq_class>& known) const {
        LinExpr e;
        switch (t->kind) {
            case NodeKind::Var: {
                if (auto it = known.find(t->name); it != known.end()) {
                    e.k = it->second;
                } else {
                    e.coeff[t->name] = 1;
                }
                return e;
            }
            case NodeKind::Ctor: {
                e.k = prob_.env.constructors.at(t->name).second;
                return e;
            }
            case NodeKind::IntLit:
            case NodeKind::RealLit:
                e.k = t->num;
                return e;
            case NodeKind::Op: {
                auto a = linearize(t->args[0], known);
                auto b = linearize(t->args[1], known);
                if (!a || !b) return std::nullopt;
                switch (t->op) {
                    case OpKind::Add:
                        a->add(*b, 1);
                        return a;
                    case OpKind::Sub:
                        a->add(*b, -1);
                        return a;
                    case OpKind::Mul:
                        if (b->constant()) {
                            LinExpr r;
                            r.add(*a, b->k);
                            return r;
                        }
                        if (a->constant()) {
                            LinExpr r;
                            r.add(*b, a->k);
                            return r;
                        }
                        return std::nullopt;
                    case OpKind::Div:
                        if (b->constant() && b->k != 0) {
                            LinExpr r;
                            r.add(*a, mpq_class(1) / b->k);
                            return r;
                        }
                        return std::nullopt;
                    default:
                        return std::nullopt;
                }
            }
            default:
                return std::nullopt;
        }
    }

    Status theory_check() {
        std::vector<Constraint> cons;
        for (size_t i = 0; i < atoms_.size(); ++i) {
            if (assign_[i] == kUndef) continue;
            const Term& a = atoms_[i];
            if (a->kind != NodeKind::Op) continue;  // plain Bool variable
            cons.push_back({a->args[0], a->args[1], a->op, assign_[i] == kTrue});
        }

        // Constant propagation over asserted equalities, so that products with
        // a pinned factor become linear.
        std::map<std::string, mpq_class> known;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& c : cons) {
                if (c.op != OpKind::Eq || !c.truth) continue;
                auto l = linearize(c.lhs, known);
                auto r = linearize(c.rhs, known);
                if (!l || !r) continue;
                l->add(*r, -1);
                if (l->constant()) {
                    if (l->k != 0) return Status::Unsat;
                    continue;
                }
                if (l->coeff.size() == 1) {
                    const auto& [v, cf] = *l->coeff.begin();
                    known[v] = -l->k / cf;
                    changed = true;
                }
            }
        }
        // Pinned Int/enum variables must respect integrality and domain.
        for (const auto& [v, val] : known) {
            auto it = prob_.env.consts.find(v);
            if (it == prob_.env.consts.end()) continue;
            if (it->second.kind == SortKind::Int || it->second.kind == SortKind::Datatype) {
                if (val.get_den() != 1) return Status::Unsat;
                if (it->second.kind == SortKind::Datatype) {
                    if (val < 0 || val >= enum_size(it->second.datatype)) return Status::Unsat;
                }
            }
        }

        std::vector<LinExpr> eqs;
        std::vector<Ineq> ineqs;
        std::vector<LinExpr> diseqs;
        std::set<std::string> used_vars;
        for (const auto& c : cons) {
            auto l = linearize(c.lhs, known);
            auto r = linearize(c.rhs, known);
            if (!l || !r) return Status::Unknown;  // nonlinear residue
            l->add(*r, -1);
            LinExpr d = *l;  // lhs - rhs
            bool truth = c.truth;
            OpKind op = c.op;
            // normalize  >, >=  to  <, <=  by negating the expression
            auto negated = [&] {
                LinExpr n;
                n.add(d, -1);
                return n;
            };
            switch (op) {
                case OpKind::Eq:
                    if (truth) eqs.push_back(d);
                    else diseqs.push_back(d);
                    break;
                case OpKind::Lt:  // d < 0 / !(d < 0) == -d <= 0
                    if (truth) ineqs.push_back({d, true});
                    else ineqs.push_back({negated(), false});
                    break;
                case OpKind::Le:
                    if (truth) ineqs.push_back({d, false});
                    else ineqs.push_back({negated(), true});
                    break;
                case OpKind::Gt:
                    if (truth) ineqs.push_back({negated(), true});
                    else ineqs.push_back({d, false});
                    break;
                case OpKind::Ge:
                    if (truth) ineqs.push_back({negated(), false});
                    else ineqs.push_back({d, true});
                    break;
                default:
                    return Status::Unknown;
            }
            for (const auto& [v, _] : d.coeff) used_vars.insert(v);
        }
        // Domain bounds for enum variables that occur in constraints.
        for (const auto& v : used_vars) {
            auto it = prob_.env.consts.find(v);
            if (it != prob_.env.consts.end() && it->second.kind == SortKind::Datatype) {
                LinExpr lo;  // -v <= 0
                lo.coeff[v] = -1;
                ineqs.push_back({lo, false});
                LinExpr hi;  // v - (n-1) <= 0
                hi.coeff[v] = 1;
                hi.k = -(enum_size(it->second.datatype) - 1);
                ineqs.push_back({hi, false});
            }
        }

        std::map<std::string, mpq_class> model;
        Status s = solve_linear(eqs, ineqs, diseqs, model, 0);
        if (s != Status::Sat) return s;

        theory_model_.clear();
        for (const auto& [v, val] : known) model.emplace(v, val);
        for (const auto& [v, val] : model) {
            auto it = prob_.env.consts.find(v);
            if (it == prob_.env.consts.end()) continue;
            switch (it->second.kind) {
                case SortKind::Int:
                    theory_model_[v] = Value::integer(val);
                    break;
                case SortKind::Real:
                    theory_model_[v] = Value::real(val);
                    break;
                case SortKind::Datatype: {
                    const auto& ctors = prob_.env.datatypes.at(it->second.datatype);
                    long idx = val.get_num().get_si();
                    theory_model_[v] = Value::dt(ctors[static_cast<size_t>(idx)]);
                    break;
                }
                default:
                    break;
            }
        }
        return Status::Sat;
    }

    bool is_int_var(const std::string& v) const {
        auto it = prob_.env.consts.find(v);
        return it != prob_.env.consts.end() &&
               (it->second.kind == SortKind::Int || it->second.kind == SortKind::Datatype);
    }

    Status solve_linear(std::vector<LinExpr> eqs, std::vector<Ineq> ineqs,
                        std::vector<LinExpr> diseqs, std::map<std::string, mpq_class>& model,
                        int depth) {
        tick();
        if (depth > 200) return Status::Unknown;

        // Disequalities split into strict branches.
        if (!diseqs.empty()) {
            LinExpr d = diseqs.back();
            diseqs.pop_back();
            if (d.constant()) {
                if (d.k == 0) return Status::Unsat;
                return solve_linear(std::move(eqs), std::move(ineqs), std::move(diseqs), model,
                                    depth + 1);
            }
            bool unknown = false;
            for (int side = 0; side < 2; ++side) {
                auto in2 = ineqs;
                LinExpr e;
                e.add(d, side == 0 ? 1 : -1);  // d < 0  |  -d < 0
                in2.push_back({e, true});
                Status s = solve_linear(eqs, std::move(in2), diseqs, model, depth + 1);
                if (s == Status::Sat) return s;
                if (s == Status::Unknown) unknown = true;
            }
            return unknown ? Status::Unknown : Status::Unsat;
        }

        // Gaussian elimination of equalities.
        std::vector<std::pair<std::string, LinExpr>> substs;  // v = expr
        for (size_t i = 0; i < eqs.size(); ++i) {
            LinExpr& e = eqs[i];
            if (e.constant()) {
                if (e.k != 0) return Status::Unsat;
                continue;
            }
            auto [v, c] = *e.coeff.begin();
            // v = -(e - c*v)/c
            LinExpr rhs;
            rhs.add(e, mpq_class(-1) / c);
            rhs.coeff.erase(v);
            substs.emplace_back(v, rhs);
            auto apply = [&](LinExpr& x) {
                auto it = x.coeff.find(v);
                if (it == x.coeff.end()) return;
                mpq_class cf = it->second;
                x.coeff.erase(it);
                x.add(rhs, cf);
            };
            for (size_t j = i + 1; j < eqs.size(); ++j) apply(eqs[j]);
            for (auto& q : ineqs) apply(q.e);
        }

        // Fourier-Motzkin elimination with per-stage retention for the model.
        std::vector<std::string> order;
        {
            std::set<std::string> vars;
            for (const auto& q : ineqs)
                for (const auto& [v, _] : q.e.coeff) vars.insert(v);
            order.assign(vars.begin(), vars.end());
        }
        std::vector<std::pair<std::string, std::vector<Ineq>>> stages;
        std::vector<Ineq> cur = std::move(ineqs);
        for (const auto& v : order) {
            std::vector<Ineq> with, without, uppers, lowers;
            for (auto& q : cur) {
                if (q.e.coeff.count(v)) with.push_back(q);
                else without.push_back(q);
            }
            stages.emplace_back(v, with);
            for (const auto& q : with) {
                if (q.e.coeff.at(v) > 0) uppers.push_back(q);
                else lowers.push_back(q);
            }
            for (const auto& u : uppers) {
                for (const auto& l : lowers) {
                    tick();
                    // u: cu*v + ru <= 0  (cu>0)  =>  v <= -ru/cu
                    // l: cl*v + rl <= 0  (cl<0)  =>  v >= -rl/cl
                    LinExpr comb;  // -rl/(-cl) - (-ru/cu) <= 0  scaled positive
                    mpq_class cu = u.e.coeff.at(v);
                    mpq_class cl = -l.e.coeff.at(v);
                    // lower bound (l) minus upper bound (u) must be <= 0:
                    // (rl', scaled) ... build: cl>0, cu>0
                    LinExpr lb;  // v >= lb where lb = ( -rl ) / cl with rl = l minus cl-term...
                    // combine directly: cu*l.e + cl*u.e eliminates v
                    comb.add(l.e, cu);
                    comb.add(u.e, cl);
                    comb.coeff.erase(v);
                    bool strict = u.strict || l.strict;
                    if (comb.constant()) {
                        if (comb.k > 0 || (strict && comb.k == 0)) return Status::Unsat;
                    } else {
                        without.push_back({comb, strict});
                    }
                    if (without.size() > 20000) return Status::Unknown;
                }
            }
            cur = std::move(without);
        }
        for (const auto& q : cur) {
            // only constants remain
            if (q.e.k > 0 || (q.strict && q.e.k == 0)) return Status::Unsat;
        }

        // Back-substitute a sample point, latest-eliminated variable first.
        model.clear();
        for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
            const std::string& v = it->first;
            std::optional<mpq_class> lo, hi;
            bool lo_strict = false, hi_strict = false;
            for (const auto& q : it->second) {
                mpq_class rest = q.e.k;
                for (const auto& [w, c] : q.e.coeff) {
                    if (w == v) continue;
                    rest += c * model.at(w);
                }
                mpq_class c = q.e.coeff.at(v);
                mpq_class bound = -rest / c;
                if (c > 0) {  // v <= bound
                    if (!hi || bound < *hi || (bound == *hi && q.strict)) {
                        hi = bound;
                        hi_strict = q.strict;
                    }
                } else {  // v >= bound
                    if (!lo || bound > *lo || (bound == *lo && q.strict)) {
                        lo = bound;
                        lo_strict = q.strict;
                    }
                }
            }
            model[v] = choose_value(v, lo, lo_strict, hi, hi_strict);
        }
        for (auto it = substs.rbegin(); it != substs.rend(); ++it) {
            mpq_class val = it->second.k;
            for (const auto& [w, c] : it->second.coeff) {
                auto mv = model.find(w);
                mpq_class wv = mv != model.end() ? mv->second : mpq_class(0);
                if (mv == model.end()) model[w] = 0;
                val += c * wv;
            }
            model[it->first] = val;
        }

        // Branch and bound for fractional Int/enum variables.
        for (const auto& [v, val] : model) {
            if (!is_int_var(v) || val.get_den() == 1) continue;
            mpz_class fl;
            mpz_fdiv_q(fl.get_mpz_t(), val.get_num().get_mpz_t(), val.get_den().get_mpz_t());
            bool unknown = false;
            for (int side = 0; side < 2; ++side) {
                auto in2 = stages_rebuild(eqs, substs, stages, cur);
                LinExpr b;
                if (side == 0) {  // v <= floor
                    b.coeff[v] = 1;
                    b.k = -mpq_class(fl);
                } else {  // v >= floor+1  ->  -v + floor+1 <= 0
                    b.coeff[v] = -1;
                    b.k = mpq_class(fl) + 1;
                }
                in2.push_back({b, false});
                std::map<std::string, mpq_class> m2;
                Status s = solve_linear(eqs, std::move(in2), {}, m2, depth + 1);
                if (s == Status::Sat) {
                    model = std::move(m2);
                    return Status::Sat;
                }
                if (s == Status::Unknown) unknown = true;
            }
            return unknown ? Status::Unknown : Status::Unsat;
        }
        return Status::Sat;
    }

    // Reassemble the pre-elimination inequality set (stage copies plus the
    // residual constant rows) for a branch-and-bound restart.
    static std::vector<Ineq> stages_rebuild(
        const std::vector<LinExpr>&, const std::vector<std::pair<std::string, LinExpr>>&,
        const std::vector<std::pair<std::string, std::vector<Ineq>>>& stages,
        const std::vector<Ineq>& residual) {
        std::vector<Ineq> out;
        std::set<std::string> seen;  // avoid duplicating derived rows
        if (!stages.empty()) {
            out = stages.front().second;
            for (size_t i = 1; i < stages.size(); ++i)
                for (const auto& q : stages[i].second) out.push_back(q);
        }
        for (const auto& q : residual) out.push_back(q);
        (void)seen;
        return out;
    }

    mpq_class choose_value(const std::string& v, std::optional<mpq_class> lo, bool lo_strict,
                           std::optional<mpq_class> hi, bool hi_strict) const {
        bool integral = is_int_var(v);
        if (lo && hi) {
            if (integral) {
                mpz_class c;
                mpz_cdiv_q(c.get_mpz_t(), lo->get_num().get_mpz_t(), lo->get_den().get_mpz_t());
                mpq_class cand(c);
                if (lo_strict && cand == *lo) cand += 1;
                if (cand < *hi || (cand == *hi && !hi_strict)) return cand;
            }
            if (*lo == *hi) return *lo;  // only reachable when both non-strict
            return (*lo + *hi) / 2;
        }
        if (lo) {
            if (integral) {
                mpz_class c;
                mpz_cdiv_q(c.get_mpz_t(), lo->get_num().get_mpz_t(), lo->get_den().get_mpz_t());
                mpq_class cand(c);
                if (lo_strict && cand == *lo) cand += 1;
                return cand;
            }
            return *lo + 1;
        }
        if (hi) {
            if (integral) {
                mpz_class c;
                mpz_fdiv_q(c.get_mpz_t(), hi->get_num().get_mpz_t(), hi->get_den().get_mpz_t());
                mpq_class cand(c);
                if (hi_strict && cand == *hi) cand -= 1;
                return cand;
            }
            return *hi - 1;
        }
        return 0;
    }

    logic::ValueMap build_model() const {
        logic::ValueMap m = theory_model_;
        for (const auto& [name, sort] : prob_.env.consts) {
            if (m.count(name)) continue;
            switch (sort.kind) {
                case SortKind::Bool: {
                    auto it = atom_index_.find(name);
                    bool v = it != atom_index_.end() && assign_[it->second] == kTrue;
                    m[name] = Value::boolean(v);
                    break;
                }
                case SortKind::Int:
                    m[name] = Value::integer(0);
                    break;
                case SortKind::Real:
                    m[name] = Value::real(0);
                    break;
                case SortKind::Datatype:
                    m[name] = Value::dt(prob_.env.datatypes.at(sort.datatype).front());
                    break;
            }
        }
        return m;
    }
};

}  // namespace

Result solve(const Problem& p, size_t node_budget) {
    Engine e(p, node_budget);
    return e.run();
}

std::vector<std::string> unsat_core(const Problem& p, size_t node_budget) {
    std::vector<std::string> keep;
    for (const auto& [label, _] : p.assertions) keep.push_back(label);
    for (const auto& [label, _] : p.assertions) {
        Problem probe;
        probe.env = p.env;
        for (const auto& [l, t] : p.assertions) {
            if (l == label) continue;
            if (std::find(keep.begin(), keep.end(), l) == keep.end()) continue;
            probe.assertions.emplace_back(l, t);
        }
        if (solve(probe, node_budget).status == Status::Unsat)
            keep.erase(std::remove(keep.begin(), keep.end(), label), keep.end());
    }
    return keep;
}

}  // namespace policycheck::microsolve
