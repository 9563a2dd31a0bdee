#include "policycheck/verifier.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace policycheck::verifier {

using nlohmann::json;
using solver::SolverVerdict;
using translator::ClaimPair;

std::string category_name(Category c) {
    switch (c) {
        case Category::NoTranslations: return "NO_TRANSLATIONS";
        case Category::TooComplex: return "TOO_COMPLEX";
        case Category::TranslationAmbiguous: return "TRANSLATION_AMBIGUOUS";
        case Category::Impossible: return "IMPOSSIBLE";
        case Category::Invalid: return "INVALID";
        case Category::Satisfiable: return "SATISFIABLE";
        case Category::Valid: return "VALID";
    }
    return "?";
}

std::optional<Category> category_from_name(const std::string& name) {
    for (Category c : {Category::NoTranslations, Category::TooComplex,
                       Category::TranslationAmbiguous, Category::Impossible, Category::Invalid,
                       Category::Satisfiable, Category::Valid})
        if (category_name(c) == name) return c;
    return std::nullopt;
}

static logic::Term implication(const ClaimPair& p) {
    return logic::mk_implies(p.premise, p.conclusion);
}

static logic::Term conjunction(std::vector<logic::Term> ts) {
    if (ts.empty()) return logic::mk_bool(true);
    if (ts.size() == 1) return ts[0];
    return logic::mk_and(std::move(ts));
}

static logic::Term translation_formula(const translator::Translation& t) {
    std::vector<logic::Term> imps;
    for (const auto& p : t.pairs) imps.push_back(implication(p));
    return conjunction(std::move(imps));
}

// Tri-state satisfiability over declarations only. nullopt = solver Unknown.
static std::optional<bool> sat_under_decls(solver::SolverSession& session,
                                           const logic::SymbolTable& env,
                                           const logic::Term& t) {
    SolverVerdict v = session.check_raw(env, {{"t", t}}, false);
    if (v.status == SolverVerdict::Status::Unknown) return std::nullopt;
    return v.status == SolverVerdict::Status::Sat;
}

// Equivalence of two Bool terms under declarations; nullopt on Unknown.
static std::optional<bool> equiv_under_decls(solver::SolverSession& session,
                                             const logic::SymbolTable& env, const logic::Term& a,
                                             const logic::Term& b) {
    if (logic::equal(a, b)) return true;
    auto diff = sat_under_decls(session, env, logic::mk_not(logic::mk_op(logic::OpKind::Eq, a, b)));
    if (!diff) return std::nullopt;
    return !*diff;
}

static std::optional<bool> pairs_equal(solver::SolverSession& session,
                                       const logic::SymbolTable& env, const ClaimPair& a,
                                       const ClaimPair& b) {
    auto p = equiv_under_decls(session, env, a.premise, b.premise);
    if (!p) return std::nullopt;
    if (!*p) return false;
    return equiv_under_decls(session, env, a.conclusion, b.conclusion);
}

std::vector<ClaimPair> score_translations(const std::vector<translator::Translation>& translations,
                                          const model::PolicyModel& m,
                                          solver::SolverSession& session) {
    logic::SymbolTable env = m.env();
    size_t k = translations.size();

    std::vector<ClaimPair> distinct;
    std::vector<bool> inconclusive;
    for (const auto& t : translations)
        for (const auto& p : t.pairs) {
            bool fresh = true;
            bool unknown = false;
            for (const auto& d : distinct) {
                auto eq = pairs_equal(session, env, d, p);
                if (!eq) {
                    unknown = true;
                    continue;
                }
                if (*eq) {
                    fresh = false;
                    break;
                }
            }
            if (fresh) {
                distinct.push_back(p);
                inconclusive.push_back(unknown);
            }
        }

    std::vector<logic::Term> formulas;
    for (const auto& t : translations) formulas.push_back(translation_formula(t));

    for (size_t i = 0; i < distinct.size(); ++i) {
        if (inconclusive[i]) {
            distinct[i].confidence = -1;
            continue;
        }
        const logic::Term imp = implication(distinct[i]);
        size_t supports = 0;
        bool unknown = false;
        for (const auto& f : formulas) {
            // f |= (P => C): f and not(P => C) unsat
            auto counter = sat_under_decls(session, env, conjunction({f, logic::mk_not(imp)}));
            if (!counter) { unknown = true; break; }
            if (*counter) continue;
            // f not|= not P: f consistent with P
            auto coherent = sat_under_decls(session, env, conjunction({f, distinct[i].premise}));
            if (!coherent) { unknown = true; break; }
            if (*coherent) ++supports;
        }
        distinct[i].confidence = unknown ? mpq_class(-1) : mpq_class(supports, k);
        distinct[i].confidence.canonicalize();
    }
    return distinct;
}

std::vector<ClaimPair> redundant_translate(const std::string& text, const model::PolicyModel& m,
                                           const translator::TranslatorPool& pool,
                                           solver::SolverSession& session) {
    return score_translations(pool.translate_all(text, m), m, session);
}

static std::vector<std::string> rule_ids_from_core(const std::vector<std::string>& core) {
    std::vector<std::string> ids;
    for (const auto& label : core)
        if (label.rfind("rule:", 0) == 0) ids.push_back(label.substr(5));
    std::sort(ids.begin(), ids.end());
    return ids;
}

static Finding too_complex(const ClaimPair& pair, const std::string& note) {
    Finding f;
    f.category = Category::TooComplex;
    f.pair = pair;
    f.feedback.note = note;
    return f;
}

Finding classify(const ClaimPair& pair, const model::PolicyModel& m,
                 solver::SolverSession& session, const VerifierConfig& cfg,
                 const std::vector<ClaimPair>* alternates) {
    if (pair.confidence < 0)
        return too_complex(pair, "confidence scoring was inconclusive (solver unknown)");
    if (logic::node_count(pair.premise) + logic::node_count(pair.conclusion) > cfg.max_term_nodes)
        return too_complex(pair, "translated pair exceeds the term size limit");

    if (pair.confidence < cfg.confidence_threshold) {
        Finding f;
        f.category = Category::TranslationAmbiguous;
        f.pair = pair;
        if (alternates) {
            for (const auto& alt : *alternates) {
                if (logic::equal(alt.premise, pair.premise) &&
                    logic::equal(alt.conclusion, pair.conclusion))
                    continue;
                try {
                    std::string side;
                    solver::Assignment asg =
                        distinguishing_assignment(pair, alt, m, session, &side);
                    f.feedback.differing_translations =
                        DifferingTranslations{pair, alt, std::move(asg), side};
                    break;
                } catch (const Equivalent&) {
                    continue;
                } catch (const VerifierError&) {
                    continue;
                }
            }
        }
        if (!f.feedback.differing_translations)
            f.feedback.note = "no distinguishing alternate translation available";
        return f;
    }

    // M |= not P?
    SolverVerdict vp = session.check(m, {{"premise", pair.premise}}, true);
    if (vp.status == SolverVerdict::Status::Unknown)
        return too_complex(pair, "solver could not decide premise consistency: " + vp.reason);
    if (vp.status == SolverVerdict::Status::Unsat) {
        Finding f;
        f.category = Category::Impossible;
        f.pair = pair;
        f.feedback.relevant_rules = rule_ids_from_core(vp.core);
        if (f.feedback.relevant_rules.empty())
            f.feedback.note = "the premises are contradictory on their own";
        return f;
    }

    // M and P |= C?
    SolverVerdict vc = session.check(
        m, {{"premise", pair.premise}, {"negconclusion", logic::mk_not(pair.conclusion)}}, true);
    if (vc.status == SolverVerdict::Status::Unknown)
        return too_complex(pair, "solver could not decide validity: " + vc.reason);
    if (vc.status == SolverVerdict::Status::Unsat) {
        Finding f;
        f.category = Category::Valid;
        f.pair = pair;
        f.feedback.relevant_rules = rule_ids_from_core(vc.core);
        if (f.feedback.relevant_rules.empty())
            f.feedback.note = "the conclusion follows from the premises alone";
        return f;
    }

    // M and P |= not C?
    SolverVerdict vi =
        session.check(m, {{"premise", pair.premise}, {"conclusion", pair.conclusion}}, true);
    if (vi.status == SolverVerdict::Status::Unknown)
        return too_complex(pair, "solver could not decide invalidity: " + vi.reason);
    if (vi.status == SolverVerdict::Status::Unsat) {
        Finding f;
        f.category = Category::Invalid;
        f.pair = pair;
        f.feedback.relevant_rules = rule_ids_from_core(vi.core);
        f.feedback.counter_example = vc.assignment;  // P true, C false
        if (f.feedback.relevant_rules.empty())
            f.feedback.note = "the conclusion is self-contradictory under the premises";
        return f;
    }

    Finding f;
    f.category = Category::Satisfiable;
    f.pair = pair;
    f.feedback.counter_example = vc.assignment;      // P true, C false
    f.feedback.supporting_scenario = vi.assignment;  // P true, C true
    return f;
}

static void add_warnings(Finding& f, const logic::SymbolTable& env,
                         solver::SolverSession& session) {
    if (!f.pair) return;
    struct Probe { WarningSubject subject; logic::Term term; };
    for (const Probe& probe : {Probe{WarningSubject::Premise, f.pair->premise},
                               Probe{WarningSubject::Conclusion, f.pair->conclusion}}) {
        auto holds = sat_under_decls(session, env, probe.term);
        if (holds && !*holds) {
            f.feedback.warnings.push_back({probe.subject, WarningKind::AlwaysFalse});
            continue;
        }
        auto fails = sat_under_decls(session, env, logic::mk_not(probe.term));
        if (fails && !*fails)
            f.feedback.warnings.push_back({probe.subject, WarningKind::AlwaysTrue});
    }
}

std::vector<Finding> validate(const std::string& text, const model::PolicyModel& m,
                              const translator::TranslatorPool& pool,
                              solver::SolverSession& session, const VerifierConfig& cfg) {
    if (text.size() > cfg.max_input_chars) {
        Finding f;
        f.category = Category::TooComplex;
        f.feedback.note = "input exceeds the length limit (" + std::to_string(text.size()) +
                          " > " + std::to_string(cfg.max_input_chars) + " chars)";
        return {f};
    }

    std::vector<translator::Translation> translations = pool.translate_all(text, m);
    std::vector<std::string> untranslatable;
    for (const auto& t : translations)
        for (const auto& u : t.untranslatable)
            if (std::find(untranslatable.begin(), untranslatable.end(), u) ==
                untranslatable.end())
                untranslatable.push_back(u);

    std::vector<ClaimPair> pairs = score_translations(translations, m, session);
    if (pairs.empty()) {
        Finding f;
        f.category = Category::NoTranslations;
        f.feedback.untranslatable = untranslatable;
        return {f};
    }

    logic::SymbolTable env = m.env();
    std::vector<Finding> out;
    for (const auto& p : pairs) {
        Finding f = classify(p, m, session, cfg, &pairs);
        f.feedback.untranslatable = untranslatable;
        add_warnings(f, env, session);
        out.push_back(std::move(f));
    }

    std::sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
        auto key = [](const Finding& f) {
            return f.pair ? logic::print_term(f.pair->premise) + "\x1f" +
                                logic::print_term(f.pair->conclusion)
                          : std::string();
        };
        return key(a) < key(b);
    });
    return out;
}

solver::Assignment distinguishing_assignment(const ClaimPair& a, const ClaimPair& b,
                                             const model::PolicyModel& m,
                                             solver::SolverSession& session, std::string* side) {
    const logic::Term imp_a = implication(a);
    const logic::Term imp_b = implication(b);

    SolverVerdict v = session.check(m, {{"a", imp_a}, {"notb", logic::mk_not(imp_b)}}, false);
    if (v.status == SolverVerdict::Status::Sat) {
        if (side) *side = "a";
        return v.assignment;
    }
    if (v.status == SolverVerdict::Status::Unknown)
        throw VerifierError("solver could not separate the translations: " + v.reason);

    v = session.check(m, {{"b", imp_b}, {"nota", logic::mk_not(imp_a)}}, false);
    if (v.status == SolverVerdict::Status::Sat) {
        if (side) *side = "b";
        return v.assignment;
    }
    if (v.status == SolverVerdict::Status::Unknown)
        throw VerifierError("solver could not separate the translations: " + v.reason);

    throw Equivalent("the two translations are logically equivalent under the model");
}

// ---------------------------------------------------------------------------
// JSON rendering

static json assignment_json(const solver::Assignment& a) {
    json bindings = json::object();
    for (const auto& [name, value] : a.bindings) bindings[name] = value.str();
    json out = {{"bindings", bindings}};
    if (!a.solver_arbitrary.empty())
        out["arbitrary"] = std::vector<std::string>(a.solver_arbitrary.begin(),
                                                    a.solver_arbitrary.end());
    return out;
}

static json pair_json(const ClaimPair& p) {
    json out = {{"premise", logic::print_term(p.premise)},
                {"conclusion", logic::print_term(p.conclusion)}};
    if (p.confidence >= 0)
        out["confidence"] = {{"num", p.confidence.get_num().get_si()},
                             {"den", p.confidence.get_den().get_si()}};
    return out;
}

std::string findings_to_json(const std::vector<Finding>& findings) {
    json arr = json::array();
    for (const auto& f : findings) {
        json j = {{"category", category_name(f.category)}};
        if (f.pair) j.update(pair_json(*f.pair));
        json fb = json::object();
        if (!f.feedback.relevant_rules.empty()) fb["relevant_rules"] = f.feedback.relevant_rules;
        if (f.feedback.supporting_scenario)
            fb["supporting_scenario"] = assignment_json(*f.feedback.supporting_scenario);
        if (f.feedback.counter_example)
            fb["counter_example"] = assignment_json(*f.feedback.counter_example);
        if (f.feedback.differing_translations) {
            const auto& d = *f.feedback.differing_translations;
            fb["differing_translations"] = {{"a", pair_json(d.a)},
                                            {"b", pair_json(d.b)},
                                            {"distinguishing", assignment_json(d.distinguishing)},
                                            {"satisfied_side", d.satisfied_side}};
        }
        if (!f.feedback.untranslatable.empty()) fb["untranslatable"] = f.feedback.untranslatable;
        if (!f.feedback.warnings.empty()) {
            json ws = json::array();
            for (const auto& w : f.feedback.warnings)
                ws.push_back({{"subject", w.subject == WarningSubject::Premise ? "premise"
                                                                              : "conclusion"},
                              {"kind", w.kind == WarningKind::AlwaysTrue ? "always_true"
                                                                        : "always_false"}});
            fb["warnings"] = ws;
        }
        if (!f.feedback.note.empty()) fb["note"] = f.feedback.note;
        j["feedback"] = fb;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

}  // namespace policycheck::verifier
