#include "policycheck/translator.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace policycheck::translator {

using nlohmann::json;
namespace fs = std::filesystem;

std::string digest(const std::string& text) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::string id, const std::string& fixture_path)
    : id_(std::move(id)) {
    std::ifstream in(fixture_path);
    if (!in) throw BackendUnavailable("cannot open fixture file: " + fixture_path);
    fixture_ = json::parse(in, nullptr, false);
    if (fixture_.is_discarded() || !fixture_.is_object())
        throw BackendUnavailable("fixture is not a JSON object: " + fixture_path);
}

ScriptedBackend ScriptedBackend::from_json(std::string id, json fixture) {
    ScriptedBackend b(std::move(id));
    if (!fixture.is_object()) throw BackendUnavailable("fixture is not a JSON object");
    b.fixture_ = std::move(fixture);
    return b;
}

json ScriptedBackend::invoke(const std::string& task, const std::string& input,
                             const std::string&) {
    std::string key = digest(input);
    const json* section = &fixture_;
    if (task != kTaskTranslate) {
        auto it = fixture_.find(task);
        if (it == fixture_.end())
            throw BackendUnavailable("backend " + id_ + " has no '" + task + "' section");
        section = &*it;
    }
    auto it = section->find(key);
    if (it == section->end())
        throw BackendUnavailable("backend " + id_ + " has no " + task + " entry for digest " +
                                 key);
    return *it;
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpBackend::id() const { return "http:" + cfg_.model; }

std::string HttpBackend::extract_fenced(const std::string& content) {
    size_t open = content.find("```");
    if (open == std::string::npos) throw MalformedOutput("reply has no fenced block", {content});
    size_t body = content.find('\n', open);
    if (body == std::string::npos) throw MalformedOutput("unterminated fence", {content});
    size_t close = content.find("```", body);
    if (close == std::string::npos) throw MalformedOutput("unterminated fence", {content});
    return content.substr(body + 1, close - body - 1);
}

static std::string default_template(const std::string& task) {
    if (task == kTaskTranslate)
        return "You translate natural-language claims about a policy into logic.\n"
               "Vocabulary (the only symbols you may use):\n{context}\n\n"
               "Translate the claim below into premise/conclusion pairs in SMT-LIB syntax.\n"
               "Reply with one fenced JSON block shaped as\n"
               "{\"pairs\":[{\"premise\":\"...\",\"conclusion\":\"...\"}],"
               "\"untranslatable\":[\"...\"]}.\n"
               "Use an empty premise string when the claim is unconditional. List any part\n"
               "you cannot express under untranslatable instead of guessing.\n\n"
               "Claim:\n{input}\n";
    if (task == kTaskFormalize)
        return "You formalize policy documents into logic.\n"
               "Symbols already declared (reuse them, never re-declare):\n{context}\n\n"
               "Formalize the passage below. Reply with one fenced JSON block shaped as\n"
               "{\"datatypes\":[{\"name\":\"...\",\"constructors\":[\"...\"]}],"
               "\"variables\":[{\"name\":\"...\",\"sort\":\"...\",\"description\":\"...\"}],"
               "\"rules\":[{\"smtlib\":\"...\"}]}.\n"
               "Every new variable needs a plain-language description. Rules are Bool-sorted\n"
               "SMT-LIB terms over declared symbols only.\n\n"
               "Passage:\n{input}\n";
    if (task == kTaskRepair)
        return "Your previous structured output was rejected. Fix it and reply with one\n"
               "fenced JSON block of the same shape, changing as little as possible.\n\n"
               "{input}\n";
    if (task == kTaskRevise)
        return "{input}\n";
    throw TranslatorError("unknown task: " + task);
}

static std::string substitute(std::string tpl, const std::string& key, const std::string& val) {
    std::string needle = "{" + key + "}";
    size_t pos;
    while ((pos = tpl.find(needle)) != std::string::npos) tpl.replace(pos, needle.size(), val);
    return tpl;
}

std::string HttpBackend::render_prompt(const std::string& task, const std::string& input,
                                       const std::string& context) const {
    std::string tpl;
    if (!cfg_.prompt_dir.empty()) {
        std::ifstream in(fs::path(cfg_.prompt_dir) / (task + ".txt"));
        if (in) {
            std::ostringstream ss;
            ss << in.rdbuf();
            tpl = ss.str();
        }
    }
    if (tpl.empty()) tpl = default_template(task);
    return substitute(substitute(std::move(tpl), "context", context), "input", input);
}

json HttpBackend::invoke(const std::string& task, const std::string& input,
                         const std::string& context) {
    std::string url = cfg_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw BackendUnavailable("bad endpoint url: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string host = url.substr(0, path_start == std::string::npos ? url.size() : path_start);
    std::string path =
        path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);

    json req = {{"model", cfg_.model},
                {"temperature", cfg_.temperature},
                {"max_tokens", cfg_.max_tokens},
                {"messages", json::array({json{{"role", "user"},
                                               {"content", render_prompt(task, input, context)}}})}};

    httplib::Client cli(host);
    cli.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    auto res = cli.Post(path, headers, req.dump(), "application/json");
    if (!res) throw BackendUnavailable("no response from " + host);
    if (res->status != 200)
        throw BackendUnavailable("http status " + std::to_string(res->status) + " from " + host);

    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw BackendUnavailable("non-JSON response body");
    std::string content;
    try {
        content = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("unexpected response shape: ") + e.what());
    }

    if (task == kTaskRevise) {
        // A fenced block is optional for revision; the answer is prose.
        std::string text = content;
        if (content.find("```") != std::string::npos) text = extract_fenced(content);
        return json{{"answer", text}};
    }
    std::string fenced = extract_fenced(content);
    json out = json::parse(fenced, nullptr, false);
    if (out.is_discarded())
        throw MalformedOutput("fenced block is not valid JSON", {fenced});
    return out;
}

// ---------------------------------------------------------------------------
// Pool

std::vector<Translation> TranslatorPool::translate_all(const std::string& text,
                                                       const model::PolicyModel& policy) const {
    std::vector<std::future<Translation>> futs;
    futs.reserve(backends.size());
    for (const auto& b : backends)
        futs.push_back(std::async(std::launch::async, [&, b] {
            return translate_claims(text, policy, *b);
        }));
    std::vector<Translation> out;
    out.reserve(futs.size());
    for (auto& f : futs) out.push_back(f.get());
    return out;
}

TranslatorPool scripted_pool(const std::string& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw BackendUnavailable("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw BackendUnavailable("no fixture files in " + dir);
    TranslatorPool pool;
    for (const auto& f : files)
        pool.backends.push_back(
            std::make_shared<ScriptedBackend>(f.stem().string(), f.string()));
    return pool;
}

// ---------------------------------------------------------------------------
// Gated operations

json repair(const std::string& invalid_output, const std::string& failure, Backend& backend,
            const Validator& validate, const RepairOptions& opts) {
    std::vector<std::string> diagnostics{failure};
    std::string current = invalid_output;
    std::string why = failure;
    for (int attempt = 0; attempt < opts.budget; ++attempt) {
        if (opts.attempts) ++*opts.attempts;
        json fixed;
        try {
            fixed = backend.invoke(kTaskRepair, "Rejected output:\n" + current + "\nProblem:\n" + why,
                                   "");
        } catch (const MalformedOutput& e) {
            diagnostics.insert(diagnostics.end(), e.diagnostics.begin(), e.diagnostics.end());
            why = e.what();
            continue;
        }
        auto diag = validate(fixed);
        if (!diag) return fixed;
        diagnostics.push_back(*diag);
        current = fixed.dump();
        why = *diag;
    }
    throw MalformedOutput("repair budget exhausted after " + std::to_string(opts.budget) +
                              " attempts",
                          diagnostics);
}

static std::optional<std::string> check_bool_term(const std::string& text,
                                                  const logic::SymbolTable& env,
                                                  const std::string& what, logic::Term* out) {
    try {
        logic::Term t = logic::parse_term(text, env);
        if (t->sort != logic::Sort::boolean())
            return what + " is not Bool-sorted: " + text;
        if (out) *out = t;
        return std::nullopt;
    } catch (const logic::LogicError& e) {
        return what + ": " + e.what();
    }
}

static std::optional<std::string> validate_translation(const json& payload,
                                                       const logic::SymbolTable& env) {
    if (!payload.is_object() || !payload.contains("pairs") || !payload["pairs"].is_array())
        return std::string("payload must be an object with a 'pairs' array");
    for (size_t i = 0; i < payload["pairs"].size(); ++i) {
        const json& p = payload["pairs"][i];
        if (!p.is_object() || !p.contains("premise") || !p.contains("conclusion") ||
            !p["premise"].is_string() || !p["conclusion"].is_string())
            return "pairs/" + std::to_string(i) +
                   " must be {\"premise\": string, \"conclusion\": string}";
        std::string prem = p["premise"].get<std::string>();
        if (!prem.empty())
            if (auto d = check_bool_term(prem, env, "pairs/" + std::to_string(i) + "/premise",
                                         nullptr))
                return d;
        if (auto d = check_bool_term(p["conclusion"].get<std::string>(), env,
                                     "pairs/" + std::to_string(i) + "/conclusion", nullptr))
            return d;
    }
    if (payload.contains("untranslatable")) {
        if (!payload["untranslatable"].is_array()) return std::string("untranslatable must be an array");
        for (const auto& u : payload["untranslatable"])
            if (!u.is_string()) return std::string("untranslatable entries must be strings");
    }
    return std::nullopt;
}

Translation translate_claims(const std::string& text, const model::PolicyModel& policy,
                             Backend& backend, const RepairOptions& opts) {
    logic::SymbolTable env = policy.env();
    json payload = backend.invoke(kTaskTranslate, text, render_vocabulary(policy));
    if (auto diag = validate_translation(payload, env))
        payload = repair(payload.dump(), *diag, backend,
                         [&](const json& j) { return validate_translation(j, env); }, opts);

    Translation out;
    for (const auto& p : payload["pairs"]) {
        ClaimPair cp;
        std::string prem = p["premise"].get<std::string>();
        cp.premise = prem.empty() ? logic::mk_bool(true) : logic::parse_term(prem, env);
        cp.conclusion = logic::parse_term(p["conclusion"].get<std::string>(), env);
        cp.source_text = text;
        out.pairs.push_back(std::move(cp));
    }
    if (payload.contains("untranslatable"))
        for (const auto& u : payload["untranslatable"])
            out.untranslatable.push_back(u.get<std::string>());
    return out;
}

static std::optional<std::string> validate_unit(const json& payload,
                                                const logic::SymbolTable& context,
                                                model::PolicyUnit* out) {
    if (!payload.is_object()) return std::string("payload must be a JSON object");
    model::PolicyUnit unit;
    logic::SymbolTable env = context;
    if (payload.contains("datatypes")) {
        if (!payload["datatypes"].is_array()) return std::string("datatypes must be an array");
        for (size_t i = 0; i < payload["datatypes"].size(); ++i) {
            const json& d = payload["datatypes"][i];
            std::string at = "datatypes/" + std::to_string(i);
            if (!d.is_object() || !d.contains("name") || !d["name"].is_string() ||
                !d.contains("constructors") || !d["constructors"].is_array())
                return at + " must be {\"name\", \"constructors\"}";
            logic::DatatypeDecl decl;
            decl.name = d["name"].get<std::string>();
            for (const auto& c : d["constructors"]) {
                if (!c.is_string()) return at + ": constructors must be strings";
                decl.constructors.push_back(c.get<std::string>());
            }
            if (decl.constructors.empty()) return at + ": needs at least one constructor";
            auto known = env.datatypes.find(decl.name);
            if (known != env.datatypes.end()) {
                if (known->second != decl.constructors)
                    return at + ": re-declares " + decl.name + " with different constructors";
                continue;  // already in context, reuse
            }
            try {
                env.add_datatype(decl);
            } catch (const logic::LogicError& e) {
                return at + ": " + e.what();
            }
            unit.datatypes.push_back(std::move(decl));
        }
    }
    if (payload.contains("variables")) {
        if (!payload["variables"].is_array()) return std::string("variables must be an array");
        for (size_t i = 0; i < payload["variables"].size(); ++i) {
            const json& v = payload["variables"][i];
            std::string at = "variables/" + std::to_string(i);
            if (!v.is_object() || !v.contains("name") || !v["name"].is_string() ||
                !v.contains("sort") || !v["sort"].is_string() || !v.contains("description") ||
                !v["description"].is_string())
                return at + " must be {\"name\", \"sort\", \"description\"}";
            model::VariableSpec spec;
            spec.name = v["name"].get<std::string>();
            spec.description = v["description"].get<std::string>();
            if (spec.description.empty()) return at + ": description must be nonempty";
            std::string sort_name = v["sort"].get<std::string>();
            try {
                spec.sort = logic::sort_from_string(sort_name);
            } catch (const logic::LogicError&) {
                return at + ": unknown sort " + sort_name;
            }
            if (spec.sort.kind == logic::SortKind::Datatype &&
                !env.datatypes.count(spec.sort.datatype))
                return at + ": undeclared datatype sort " + spec.sort.datatype;
            auto known = env.consts.find(spec.name);
            if (known != env.consts.end()) {
                if (known->second != spec.sort)
                    return at + ": re-declares " + spec.name + " with a different sort";
                continue;  // context name, reused
            }
            try {
                env.add_const(spec.name, spec.sort);
            } catch (const logic::LogicError& e) {
                return at + ": " + e.what();
            }
            unit.variables.push_back(std::move(spec));
        }
    }
    if (payload.contains("rules")) {
        if (!payload["rules"].is_array()) return std::string("rules must be an array");
        for (size_t i = 0; i < payload["rules"].size(); ++i) {
            const json& r = payload["rules"][i];
            std::string at = "rules/" + std::to_string(i);
            if (!r.is_object() || !r.contains("smtlib") || !r["smtlib"].is_string())
                return at + " must be {\"smtlib\": string}";
            model::Rule rule;
            if (auto d = check_bool_term(r["smtlib"].get<std::string>(), env, at, &rule.term))
                return d;
            rule.id = r.contains("id") && r["id"].is_string() ? r["id"].get<std::string>()
                                                             : "r" + std::to_string(i + 1);
            for (const auto& existing : unit.rules)
                if (existing.id == rule.id) return at + ": duplicate rule id " + rule.id;
            unit.rules.push_back(std::move(rule));
        }
    }
    if (out) *out = std::move(unit);
    return std::nullopt;
}

static std::string render_symbols(const logic::SymbolTable& env) {
    std::ostringstream ss;
    for (const auto& [name, ctors] : env.datatypes) {
        ss << "(declare-datatype " << name << " (";
        for (size_t i = 0; i < ctors.size(); ++i) ss << (i ? " (" : "(") << ctors[i] << ")";
        ss << "))\n";
    }
    for (const auto& [name, sort] : env.consts)
        ss << "(declare-const " << name << " " << sort.str() << ")\n";
    return ss.str();
}

model::PolicyUnit formalize_span(const std::string& span, const logic::SymbolTable& context,
                                 Backend& backend, const RepairOptions& opts) {
    if (span.find_first_not_of(" \t\r\n") == std::string::npos) return {};
    json payload = backend.invoke(kTaskFormalize, span, render_symbols(context));
    model::PolicyUnit unit;
    if (auto diag = validate_unit(payload, context, &unit)) {
        payload = repair(payload.dump(), *diag, backend,
                         [&](const json& j) { return validate_unit(j, context, nullptr); }, opts);
        auto d2 = validate_unit(payload, context, &unit);
        if (d2) throw MalformedOutput("repaired output failed revalidation", {*d2});
    }
    for (auto& r : unit.rules)
        if (r.provenance.empty()) r.provenance = digest(span);
    return unit;
}

std::string revision_request(const std::string& question, const std::string& answer,
                             const std::string& feedback) {
    std::ostringstream input;
    input << "A draft answer to a user question was checked against the governing policy "
             "and a problem was found. Rewrite the answer so it respects the policy. Keep "
             "everything that was correct; change only what the feedback requires. Reply "
             "with the revised answer only.\n\n"
          << "Question:\n" << question << "\n\nDraft answer:\n" << answer
          << "\n\nPolicy feedback:\n" << feedback << "\n";
    return input.str();
}

std::string revise_answer(const std::string& question, const std::string& answer,
                          const std::string& feedback, Backend& backend) {
    json out = backend.invoke(kTaskRevise, revision_request(question, answer, feedback), "");
    std::string revised;
    if (out.is_string())
        revised = out.get<std::string>();
    else if (out.is_object() && out.contains("answer") && out["answer"].is_string())
        revised = out["answer"].get<std::string>();
    else
        throw MalformedOutput("revision payload must be a string or {\"answer\": string}",
                              {out.dump()});
    if (revised.find_first_not_of(" \t\r\n") == std::string::npos)
        throw MalformedOutput("revised answer is empty", {out.dump()});
    return revised;
}

std::string render_vocabulary(const model::PolicyModel& policy) {
    std::ostringstream ss;
    for (const auto& d : policy.datatypes) {
        ss << "(declare-datatype " << d.name << " (";
        for (size_t i = 0; i < d.constructors.size(); ++i)
            ss << (i ? " (" : "(") << d.constructors[i] << ")";
        ss << "))\n";
    }
    for (const auto& v : policy.variables)
        ss << "(declare-const " << v.name << " " << v.sort.str() << ")  ; " << v.description
           << "\n";
    return ss.str();
}

}  // namespace policycheck::translator
