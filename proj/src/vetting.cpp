#include "policycheck/vetting.hpp"

#include <algorithm>
#include <ctime>
#include <random>
#include <sstream>

#include <json.hpp>

namespace policycheck::vetting {

using nlohmann::json;
using solver::SolverVerdict;
using verifier::Category;

// ---------------------------------------------------------------------------
// Lint

static std::optional<bool> sat_raw(solver::SolverSession& session, const logic::SymbolTable& env,
                                   const logic::Term& t) {
    SolverVerdict v = session.check_raw(env, {{"t", t}}, false);
    if (v.status == SolverVerdict::Status::Unknown) return std::nullopt;
    return v.status == SolverVerdict::Status::Sat;
}

LintReport lint(const model::PolicyModel& m, solver::SolverSession& session) {
    LintReport report;
    logic::SymbolTable env = m.env();

    std::set<std::string> used;
    for (const auto& r : m.rules) {
        auto fv = logic::free_vars(r.term);
        used.insert(fv.begin(), fv.end());
    }
    for (const auto& v : m.variables)
        if (!used.count(v.name))
            report.warnings.push_back({"UNUSED_VARIABLE",
                                       "variable " + v.name + " appears in no rule", v.name, {}});

    SolverVerdict all = session.check(m, {}, true);
    if (all.status == SolverVerdict::Status::Unsat) {
        LintItem item{"CONTRADICTORY_RULES", "the rules are jointly unsatisfiable", "", {}};
        for (const auto& label : all.core)
            if (label.rfind("rule:", 0) == 0) item.core.push_back(label.substr(5));
        std::sort(item.core.begin(), item.core.end());
        report.errors.push_back(std::move(item));
    }

    for (const auto& r : m.rules) {
        auto sat = sat_raw(session, env, r.term);
        if (sat && !*sat) {
            report.errors.push_back(
                {"UNSAT_RULE", "rule " + r.id + " is unsatisfiable on its own", r.id, {}});
            continue;
        }
        auto refutable = sat_raw(session, env, logic::mk_not(r.term));
        if (refutable && !*refutable)
            report.warnings.push_back(
                {"TAUTOLOGICAL_RULE", "rule " + r.id + " is always true and adds nothing",
                 r.id, {}});
    }

    for (size_t i = 0; i < m.rules.size(); ++i)
        for (size_t j = i + 1; j < m.rules.size(); ++j) {
            auto differ = sat_raw(
                session, env,
                logic::mk_not(logic::mk_op(logic::OpKind::Eq, m.rules[i].term, m.rules[j].term)));
            if (differ && !*differ)
                report.warnings.push_back({"DUPLICATE_RULE",
                                           "rule " + m.rules[j].id + " is equivalent to rule " +
                                               m.rules[i].id,
                                           m.rules[j].id,
                                           {}});
        }
    return report;
}

static json lint_item_json(const LintItem& it) {
    json j = {{"code", it.code}, {"message", it.message}};
    if (!it.subject.empty()) j["subject"] = it.subject;
    if (!it.core.empty()) j["core"] = it.core;
    return j;
}

std::string lint_report_json(const LintReport& r) {
    json errors = json::array(), warnings = json::array();
    for (const auto& e : r.errors) errors.push_back(lint_item_json(e));
    for (const auto& w : r.warnings) warnings.push_back(lint_item_json(w));
    return json{{"errors", errors}, {"warnings", warnings}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Structured English

namespace {

class Renderer {
public:
    explicit Renderer(const std::vector<model::VariableSpec>& schema) {
        for (const auto& v : schema) desc_[v.name] = v.description;
    }

    std::string rule(const logic::Term& t) const {
        if (t->kind == logic::NodeKind::Implies)
            return "if " + expr(t->args[0], false) + ", then " + expr(t->args[1], false);
        if (t->kind == logic::NodeKind::Var) return "it holds that: " + describe(t->name);
        return expr(t, false);
    }

private:
    std::string describe(const std::string& name) const {
        auto it = desc_.find(name);
        return it == desc_.end() ? name : it->second;
    }

    static const char* comparison_phrase(logic::OpKind op) {
        switch (op) {
            case logic::OpKind::Eq: return " equals ";
            case logic::OpKind::Gt: return " is greater than ";
            case logic::OpKind::Lt: return " is less than ";
            case logic::OpKind::Le: return " is at most ";
            case logic::OpKind::Ge: return " is at least ";
            default: return "";
        }
    }

    static const char* arith_phrase(logic::OpKind op) {
        switch (op) {
            case logic::OpKind::Add: return " plus ";
            case logic::OpKind::Sub: return " minus ";
            case logic::OpKind::Mul: return " times ";
            case logic::OpKind::Div: return " divided by ";
            default: return "";
        }
    }

    static bool is_arith(const logic::Term& t) {
        return t->kind == logic::NodeKind::Op &&
               (t->op == logic::OpKind::Add || t->op == logic::OpKind::Sub ||
                t->op == logic::OpKind::Mul || t->op == logic::OpKind::Div);
    }

    std::string join(const std::vector<logic::Term>& args, const std::string& sep) const {
        std::string out;
        for (size_t i = 0; i < args.size(); ++i) {
            if (i) out += sep;
            out += expr(args[i], true);
        }
        return out;
    }

    // `nested` wraps composite Boolean forms so "and"/"or" nestings stay
    // unambiguous.
    std::string expr(const logic::Term& t, bool nested) const {
        using logic::NodeKind;
        switch (t->kind) {
            case NodeKind::Var: return describe(t->name);
            case NodeKind::Ctor: return t->name;
            case NodeKind::BoolLit: return t->bval ? "true" : "false";
            case NodeKind::IntLit: return t->num.get_num().get_str();
            case NodeKind::RealLit: {
                auto dec = logic::exact_decimal(t->num);
                return dec ? *dec : logic::rational_display(t->num);
            }
            case NodeKind::And: {
                std::string s = join(t->args, " and ");
                return nested ? "(" + s + ")" : s;
            }
            case NodeKind::Or: {
                std::string s = join(t->args, " or ");
                return nested ? "(" + s + ")" : s;
            }
            case NodeKind::Not:
                return "it is not the case that " + expr(t->args[0], true);
            case NodeKind::Implies: {
                std::string s =
                    "if " + expr(t->args[0], true) + ", then " + expr(t->args[1], true);
                return nested ? "(" + s + ")" : s;
            }
            case NodeKind::Op: {
                const char* phrase = comparison_phrase(t->op);
                // Operands parenthesize only when arithmetic nests inside
                // arithmetic; a comparison's direct operands stay bare.
                std::string lhs = expr(t->args[0], !*phrase);
                std::string rhs = expr(t->args[1], !*phrase);
                if (*phrase) return lhs + phrase + rhs;
                std::string s = lhs + arith_phrase(t->op) + rhs;
                return nested ? "(" + s + ")" : s;
            }
        }
        return "";
    }

    std::map<std::string, std::string> desc_;
};

}  // namespace

std::string render_structured_english(const model::Rule& rule,
                                      const std::vector<model::VariableSpec>& schema) {
    return Renderer(schema).rule(rule.term);
}

// ---------------------------------------------------------------------------
// Repair from NL feedback

model::PolicyModel repair_from_feedback(const model::PolicyModel& m, const std::string& rule_id,
                                        const std::string& feedback, translator::Backend& backend,
                                        solver::SolverSession& session) {
    const model::Rule* target = m.find_rule(rule_id);
    if (!target) throw VettingError("no such rule: " + rule_id);

    std::string input =
        rule_id + "\n" + logic::print_term(target->term) + "\n" + feedback;
    json payload = backend.invoke(translator::kTaskRepair, input,
                                  translator::render_vocabulary(m));

    model::PolicyModel out = m;
    std::vector<std::string> diags;
    try {
        if (!payload.is_object()) throw VettingError("repair payload must be a JSON object");
        if (payload.contains("datatypes"))
            for (const auto& d : payload["datatypes"]) {
                logic::DatatypeDecl decl;
                decl.name = d.at("name").get<std::string>();
                for (const auto& c : d.at("constructors"))
                    decl.constructors.push_back(c.get<std::string>());
                bool known = false;
                for (const auto& existing : out.datatypes)
                    if (existing.name == decl.name) {
                        if (existing.constructors != decl.constructors)
                            throw VettingError("repair re-declares datatype " + decl.name);
                        known = true;
                    }
                if (!known) out.datatypes.push_back(std::move(decl));
            }
        if (payload.contains("variables"))
            for (const auto& v : payload["variables"]) {
                model::VariableSpec spec;
                spec.name = v.at("name").get<std::string>();
                spec.sort = logic::sort_from_string(v.at("sort").get<std::string>());
                spec.description = v.at("description").get<std::string>();
                bool known = false;
                for (const auto& existing : out.variables)
                    if (existing.name == spec.name) {
                        if (existing.sort != spec.sort)
                            throw VettingError("repair re-declares variable " + spec.name +
                                               " with a different sort");
                        known = true;
                    }
                if (!known) out.variables.push_back(std::move(spec));
            }
        logic::SymbolTable env = out.env();
        if (!payload.contains("rules") || !payload["rules"].is_array())
            throw VettingError("repair payload needs a 'rules' array");
        for (const auto& r : payload["rules"]) {
            std::string id = r.at("id").get<std::string>();
            logic::Term term = logic::parse_term(r.at("smtlib").get<std::string>(), env);
            if (term->sort != logic::Sort::boolean())
                throw VettingError("repaired rule " + id + " is not Bool-sorted");
            if (model::Rule* existing = const_cast<model::Rule*>(out.find_rule(id)))
                existing->term = term;
            else
                out.rules.push_back({id, term, "repair:" + rule_id});
        }
        model::validate(out);
    } catch (const std::exception& e) {
        throw RepairRejected("repair output rejected", {e.what()});
    }

    LintReport post = lint(out, session);
    if (!post.clean()) {
        for (const auto& e : post.errors) diags.push_back(e.code + ": " + e.message);
        throw RepairRejected("repaired model fails lint at error level", diags);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Test execution

Category aggregate_category(const std::vector<verifier::Finding>& findings) {
    if (findings.empty()) return Category::NoTranslations;
    bool all_valid = true;
    for (const auto& f : findings) all_valid = all_valid && f.category == Category::Valid;
    if (all_valid) return Category::Valid;
    for (Category c : {Category::Impossible, Category::Invalid, Category::TooComplex,
                       Category::TranslationAmbiguous, Category::NoTranslations,
                       Category::Satisfiable})
        for (const auto& f : findings)
            if (f.category == c) return c;
    return findings.front().category;
}

static TestOutcome run_one(const TestCase& c, const model::PolicyModel& m,
                           const translator::TranslatorPool& pool,
                           solver::SolverSession& session, const verifier::VerifierConfig& cfg) {
    TestOutcome out;
    out.test = c;
    if (c.kind == TestCase::Kind::Symbolic) {
        translator::ClaimPair pair;
        pair.premise = c.premise;
        pair.conclusion = c.conclusion;
        pair.confidence = 1;
        verifier::Finding f = verifier::classify(pair, m, session, cfg);
        out.actual = f.category;
        out.explanation = f.feedback;
    } else {
        std::string text =
            c.kind == TestCase::Kind::ManualQA ? c.question + "\n" + c.answer : c.text;
        auto findings = verifier::validate(text, m, pool, session, cfg);
        out.actual = aggregate_category(findings);
        if (!findings.empty()) out.explanation = findings.front().feedback;
    }
    out.pass = out.actual == c.expected;
    if (!out.pass)
        out.message = "expected " + verifier::category_name(c.expected) + " but got " +
                      verifier::category_name(out.actual) +
                      "; the fault may be in the policy model or in the test itself";
    return out;
}

std::vector<TestOutcome> run_tests(const std::vector<TestCase>& cases,
                                   const model::PolicyModel& m,
                                   const translator::TranslatorPool& pool,
                                   solver::SolverSession& session,
                                   const verifier::VerifierConfig& cfg) {
    std::vector<TestOutcome> out;
    out.reserve(cases.size());
    for (const auto& c : cases) out.push_back(run_one(c, m, pool, session, cfg));
    return out;
}

std::vector<TestOutcome> run_manual_tests(const std::vector<TestCase>& cases,
                                          const model::PolicyModel& m,
                                          const translator::TranslatorPool& pool,
                                          solver::SolverSession& session,
                                          const verifier::VerifierConfig& cfg) {
    for (const auto& c : cases)
        if (c.kind == TestCase::Kind::Symbolic)
            throw VettingError("run_manual_tests takes NL cases only");
    return run_tests(cases, m, pool, session, cfg);
}

// ---------------------------------------------------------------------------
// Symbolic test generation

static logic::Term value_term(const logic::Value& v, const logic::Sort& sort) {
    switch (v.kind) {
        case logic::SortKind::Bool: return logic::mk_bool(v.b);
        case logic::SortKind::Int: return logic::mk_int(v.num.get_num());
        case logic::SortKind::Real: return logic::mk_real(v.num);
        case logic::SortKind::Datatype: return logic::mk_ctor(v.ctor, sort.datatype);
    }
    throw VettingError("unrenderable value");
}

static logic::Term literal(const std::string& name, const logic::Sort& sort,
                           const logic::Value& v) {
    logic::Term var = logic::mk_var(name, sort);
    if (sort == logic::Sort::boolean()) return v.b ? var : logic::mk_not(var);
    return logic::mk_op(logic::OpKind::Eq, var, value_term(v, sort));
}

static logic::Term conj(std::vector<logic::Term> ts) {
    if (ts.empty()) return logic::mk_bool(true);
    if (ts.size() == 1) return ts[0];
    return logic::mk_and(std::move(ts));
}

// First round: labeled assertions per conjunct. Second round: one folded
// conjunction through the bare environment, so the queries take a different
// path through solver and client.
static std::optional<Category> expected_label(const model::PolicyModel& m,
                                              const logic::Term& premise,
                                              const logic::Term& conclusion,
                                              solver::SolverSession& session, bool second_round) {
    auto decide = [&](const std::vector<logic::Term>& extra) -> std::optional<bool> {
        if (second_round) {
            std::vector<logic::Term> all;
            for (const auto& r : m.rules) all.push_back(r.term);
            all.insert(all.end(), extra.begin(), extra.end());
            return sat_raw(session, m.env(), conj(all));
        }
        std::vector<solver::LabeledTerm> labeled;
        for (size_t i = 0; i < extra.size(); ++i)
            labeled.push_back({"e" + std::to_string(i), extra[i]});
        SolverVerdict v = session.check(m, labeled, false);
        if (v.status == SolverVerdict::Status::Unknown) return std::nullopt;
        return v.status == SolverVerdict::Status::Sat;
    };

    auto possible = decide({premise});
    if (!possible) return std::nullopt;
    if (!*possible) return Category::Impossible;
    auto counter = decide({premise, logic::mk_not(conclusion)});
    if (!counter) return std::nullopt;
    if (!*counter) return Category::Valid;
    auto agree = decide({premise, conclusion});
    if (!agree) return std::nullopt;
    if (!*agree) return Category::Invalid;
    return Category::Satisfiable;
}

std::vector<TestCase> generate_symbolic_tests(const model::PolicyModel& m, size_t n,
                                              uint64_t seed, solver::SolverSession& session) {
    if (m.variables.size() < 2)
        throw VettingError("symbolic generation needs at least two variables");

    SolverVerdict base = session.check(m, {}, false);
    if (base.status == SolverVerdict::Status::Unsat)
        throw ModelUnsat("the policy rules are contradictory; nothing to generate");
    if (base.status == SolverVerdict::Status::Unknown)
        throw VettingError("solver could not establish model satisfiability: " + base.reason);

    std::map<std::string, logic::Sort> sorts;
    for (const auto& v : m.variables) sorts[v.name] = v.sort;
    std::map<std::string, std::vector<std::string>> ctors;
    for (const auto& d : m.datatypes) ctors[d.name] = d.constructors;

    std::mt19937_64 rng(seed);
    std::vector<TestCase> out;
    std::vector<solver::LabeledTerm> blockers;

    size_t attempts = 0;
    while (out.size() < n && attempts < 60 * n + 100) {
        ++attempts;
        SolverVerdict v = session.check(m, blockers, false);
        if (v.status == SolverVerdict::Status::Unknown) continue;
        if (v.status == SolverVerdict::Status::Unsat) {
            // state space exhausted under blocking, start a fresh sweep
            blockers.clear();
            continue;
        }
        const logic::ValueMap& model_values = v.assignment.bindings;

        std::vector<logic::Term> block_atoms;
        for (const auto& [name, value] : model_values)
            block_atoms.push_back(literal(name, sorts.at(name), value));
        blockers.push_back({"block" + std::to_string(blockers.size()),
                            logic::mk_not(conj(block_atoms))});

        std::vector<std::string> names;
        for (const auto& [name, _] : model_values) names.push_back(name);
        size_t held = rng() % names.size();
        std::string held_name = names[held];
        names.erase(names.begin() + held);

        size_t max_subset = std::min<size_t>(5, names.size());
        size_t subset = 1 + rng() % max_subset;
        std::shuffle(names.begin(), names.end(), rng);
        names.resize(subset);
        std::sort(names.begin(), names.end());

        std::map<std::string, logic::Value> chosen;
        for (const auto& name : names) chosen[name] = model_values.at(name);

        if (rng() % 4 == 0) {
            const std::string& victim = names[rng() % names.size()];
            logic::Value& val = chosen[victim];
            switch (val.kind) {
                case logic::SortKind::Bool: val.b = !val.b; break;
                case logic::SortKind::Int:
                case logic::SortKind::Real: val.num += 1; break;
                case logic::SortKind::Datatype: {
                    const auto& cs = ctors.at(sorts.at(victim).datatype);
                    if (cs.size() > 1) {
                        size_t at = std::find(cs.begin(), cs.end(), val.ctor) - cs.begin();
                        val.ctor = cs[(at + 1) % cs.size()];
                    }
                    break;
                }
            }
        }

        std::vector<logic::Term> premise_atoms;
        for (const auto& name : names)
            premise_atoms.push_back(literal(name, sorts.at(name), chosen.at(name)));
        logic::Term premise = conj(premise_atoms);
        logic::Term conclusion =
            literal(held_name, sorts.at(held_name), model_values.at(held_name));

        auto first = expected_label(m, premise, conclusion, session, false);
        if (!first) continue;
        auto second = expected_label(m, premise, conclusion, session, true);
        if (!second) continue;
        if (*first != *second)
            throw VettingError("expected-label re-derivation disagreed; refusing to emit");

        TestCase c;
        c.kind = TestCase::Kind::Symbolic;
        c.premise = premise;
        c.conclusion = conclusion;
        c.expected = *first;
        c.provenance = "generated";
        out.push_back(std::move(c));
    }
    if (out.size() < n)
        throw VettingError("could not generate the requested number of cases");
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string test_cases_to_json(const std::vector<TestCase>& cases) {
    json arr = json::array();
    for (const auto& c : cases) {
        json j;
        switch (c.kind) {
            case TestCase::Kind::ManualQA:
                j = {{"kind", "qa"}, {"question", c.question}, {"answer", c.answer}};
                break;
            case TestCase::Kind::ManualStatement:
                j = {{"kind", "statement"}, {"text", c.text}};
                break;
            case TestCase::Kind::Symbolic:
                j = {{"kind", "symbolic"},
                     {"premise", logic::print_term(c.premise)},
                     {"conclusion", logic::print_term(c.conclusion)}};
                break;
        }
        j["expected"] = verifier::category_name(c.expected);
        j["provenance"] = c.provenance;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::vector<TestCase> test_cases_from_json(const std::string& text,
                                           const model::PolicyModel& m) {
    json arr = json::parse(text, nullptr, false);
    if (arr.is_discarded() || !arr.is_array())
        throw VettingError("test suite must be a JSON array");
    logic::SymbolTable env = m.env();
    std::vector<TestCase> out;
    for (size_t i = 0; i < arr.size(); ++i) {
        const json& j = arr[i];
        std::string at = "case " + std::to_string(i);
        TestCase c;
        std::string kind = j.value("kind", "");
        if (kind == "qa") {
            c.kind = TestCase::Kind::ManualQA;
            c.question = j.at("question").get<std::string>();
            c.answer = j.at("answer").get<std::string>();
        } else if (kind == "statement") {
            c.kind = TestCase::Kind::ManualStatement;
            c.text = j.at("text").get<std::string>();
        } else if (kind == "symbolic") {
            c.kind = TestCase::Kind::Symbolic;
            c.premise = logic::parse_term(j.at("premise").get<std::string>(), env);
            c.conclusion = logic::parse_term(j.at("conclusion").get<std::string>(), env);
        } else {
            throw VettingError(at + ": unknown kind '" + kind + "'");
        }
        auto cat = verifier::category_from_name(j.value("expected", ""));
        if (!cat) throw VettingError(at + ": unknown expected category");
        c.expected = *cat;
        c.provenance = j.value("provenance", "user");
        out.push_back(std::move(c));
    }
    return out;
}

std::string outcomes_to_json(const std::vector<TestOutcome>& outcomes) {
    json arr = json::array();
    for (const auto& o : outcomes) {
        json j = {{"pass", o.pass},
                  {"expected", verifier::category_name(o.test.expected)},
                  {"actual", verifier::category_name(o.actual)}};
        if (!o.message.empty()) j["message"] = o.message;
        arr.push_back(j);
    }
    size_t passed = 0;
    for (const auto& o : outcomes) passed += o.pass;
    return json{{"total", outcomes.size()}, {"passed", passed}, {"outcomes", arr}}.dump(2) +
           "\n";
}

void stamp_vetted(model::PolicyModel& m, const std::string& who) {
    m.metadata["vetted"] = "true";
    if (!who.empty()) m.metadata["vetted_by"] = who;
    char buf[32];
    time_t now = time(nullptr);
    struct tm tm_utc;
    gmtime_r(&now, &tm_utc);
    strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    m.metadata["vetted_at"] = buf;
}

}  // namespace policycheck::vetting
