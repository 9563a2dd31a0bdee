#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "policycheck/formalizer.hpp"
#include "policycheck/metrics.hpp"
#include "policycheck/model.hpp"
#include "policycheck/solver.hpp"
#include "policycheck/translator.hpp"
#include "policycheck/verifier.hpp"
#include "policycheck/vetting.hpp"

namespace pc = policycheck;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

struct Settings {
    std::string config_path;
    std::string translator_spec;  // scripted:<dir> | http
    std::string solver_cmd;
    std::string audit_dir;
    std::string threshold;
    long timeout_ms = 0;
    size_t workers = 1;
    pc::translator::HttpBackendConfig http;

    std::map<std::string, std::string> file;

    void load_config() {
        if (config_path.empty()) return;
        std::istringstream in(slurp(config_path));
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            size_t start = line.find_first_not_of(" \t");
            if (start == std::string::npos) continue;
            if (line[start] == '#' || line[start] == '[') continue;
            size_t eq = line.find('=', start);
            if (eq == std::string::npos)
                throw std::runtime_error(config_path + ":" + std::to_string(lineno) +
                                         ": expected key = value");
            auto trim = [](std::string s) {
                size_t b = s.find_first_not_of(" \t\"");
                size_t e = s.find_last_not_of(" \t\r\"");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            file[trim(line.substr(start, eq - start))] = trim(line.substr(eq + 1));
        }
    }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = file.find(key);
        return it == file.end() ? fallback : it->second;
    }

    void finalize() {
        load_config();
        if (translator_spec.empty()) translator_spec = get("translator");
        if (solver_cmd.empty()) solver_cmd = get("solver.command");
        if (audit_dir.empty()) audit_dir = get("solver.audit_dir");
        if (threshold.empty()) threshold = get("verifier.threshold");
        if (timeout_ms == 0 && !get("solver.timeout_ms").empty())
            timeout_ms = std::stol(get("solver.timeout_ms"));
        http.endpoint = get("http.endpoint", http.endpoint);
        http.model = get("http.model", http.model);
        http.api_key_env = get("http.api_key_env", http.api_key_env);
        http.prompt_dir = get("http.prompt_dir", http.prompt_dir);
    }

    pc::solver::SolverConfig solver_config() const {
        pc::solver::SolverConfig cfg;
        if (!solver_cmd.empty()) {
            std::istringstream ss(solver_cmd);
            std::string word;
            while (ss >> word) cfg.command.push_back(word);
        }
        if (timeout_ms > 0) cfg.timeout = std::chrono::milliseconds(timeout_ms);
        cfg.audit_dir = audit_dir;
        return cfg;
    }

    pc::verifier::VerifierConfig verifier_config() const {
        pc::verifier::VerifierConfig cfg;
        if (!threshold.empty())
            cfg.confidence_threshold = pc::logic::parse_rational(threshold);
        if (!get("verifier.max_input_chars").empty())
            cfg.max_input_chars = std::stoul(get("verifier.max_input_chars"));
        if (!get("verifier.max_term_nodes").empty())
            cfg.max_term_nodes = std::stoul(get("verifier.max_term_nodes"));
        return cfg;
    }

    pc::translator::TranslatorPool pool() const {
        if (translator_spec.rfind("scripted:", 0) == 0)
            return pc::translator::scripted_pool(translator_spec.substr(9));
        if (translator_spec == "http") {
            pc::translator::TranslatorPool p;
            p.backends.push_back(std::make_shared<pc::translator::HttpBackend>(http));
            return p;
        }
        throw std::runtime_error(
            "no translator configured; pass --translator scripted:<dir> or --translator http");
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"policycheck: formal policy models and answer verification"};
    app.require_subcommand(1);
    app.fallthrough();

    Settings s;
    app.add_option("--config", s.config_path, "key = value configuration file");
    app.add_option("--translator", s.translator_spec, "scripted:<dir> or http");
    app.add_option("--solver", s.solver_cmd, "external SMT solver command line");
    app.add_option("--audit-dir", s.audit_dir, "write one SMT-LIB transcript per query");
    app.add_option("--threshold", s.threshold, "confidence threshold, e.g. 2/3");
    app.add_option("--timeout-ms", s.timeout_ms, "solver timeout per query");

    std::string doc_path, model_path, out_path, report_path, suite_path, dataset_path;
    std::string text, question, answer, rule_id;
    size_t gen_n = 100, max_iters = 10;
    uint64_t seed = 0;
    bool fail_fast = false;
    long target_tokens = 500;

    auto* cmd_build = app.add_subcommand("build", "formalize a document into a policy model");
    cmd_build->add_option("--doc", doc_path, "policy document (text/Markdown)")->required();
    cmd_build->add_option("--out", out_path, "output policy model JSON")->required();
    cmd_build->add_option("--report", report_path, "write the build report JSON here");
    cmd_build->add_option("--target-tokens", target_tokens, "span size target");
    cmd_build->add_flag("--fail-fast", fail_fast, "abort on the first failed span");

    auto* cmd_lint = app.add_subcommand("lint", "lint a policy model");
    cmd_lint->add_option("--model", model_path)->required();

    auto* cmd_render = app.add_subcommand("render", "structured English for the rules");
    cmd_render->add_option("--model", model_path)->required();
    cmd_render->add_option("--rule", rule_id, "render one rule only");

    auto* cmd_validate = app.add_subcommand("validate", "verify a claim against a model");
    cmd_validate->add_option("--model", model_path)->required();
    cmd_validate->add_option("--text", text, "claim text");
    cmd_validate->add_option("--question", question);
    cmd_validate->add_option("--answer", answer);

    auto* cmd_test = app.add_subcommand("test", "run a test suite against a model");
    cmd_test->add_option("--model", model_path)->required();
    cmd_test->add_option("--suite", suite_path)->required();

    auto* cmd_gen = app.add_subcommand("gen-tests", "generate symbolic test cases");
    cmd_gen->add_option("--model", model_path)->required();
    cmd_gen->add_option("-n", gen_n, "number of cases");
    cmd_gen->add_option("--seed", seed);
    cmd_gen->add_option("--out", out_path, "output suite file (default stdout)");

    auto* cmd_eval = app.add_subcommand("eval", "metrics over a labeled dataset");
    cmd_eval->add_option("--model", model_path)->required();
    cmd_eval->add_option("--dataset", dataset_path)->required();
    cmd_eval->add_option("--workers", s.workers);

    auto* cmd_refine = app.add_subcommand("refine", "revise an answer until Valid");
    cmd_refine->add_option("--model", model_path)->required();
    cmd_refine->add_option("--question", question)->required();
    cmd_refine->add_option("--answer", answer)->required();
    cmd_refine->add_option("--max-iters", max_iters);

    auto* cmd_report = app.add_subcommand("report", "build report counters as CSV");
    cmd_report->add_option("--report", report_path)->required();

    auto* cmd_digest = app.add_subcommand("digest", "fixture digest of stdin");

    CLI11_PARSE(app, argc, argv);

    try {
        s.finalize();

        if (cmd_build->parsed()) {
            pc::formalizer::BuildConfig cfg;
            cfg.target_span_tokens = static_cast<size_t>(target_tokens);
            cfg.fail_fast = fail_fast;
            cfg.solver = s.solver_config();
            auto [model, report] = pc::formalizer::build(slurp(doc_path), s.pool(), cfg);
            pc::model::save(model, out_path);
            if (!report_path.empty()) spit(report_path, report.to_json());
            std::cout << "wrote " << out_path << ": " << report.datatypes << " datatypes, "
                      << report.variables << " variables, " << report.rules << " rules\n";
            bool any_failed = false;
            for (const auto& span : report.spans)
                any_failed |= span.status == pc::formalizer::SpanOutcome::Status::Failed;
            return any_failed ? 1 : 0;
        }

        if (cmd_lint->parsed()) {
            auto model = pc::model::load(model_path);
            pc::solver::SolverSession session(s.solver_config());
            auto report = pc::vetting::lint(model, session);
            std::cout << pc::vetting::lint_report_json(report);
            return report.clean() ? 0 : 1;
        }

        if (cmd_render->parsed()) {
            auto model = pc::model::load(model_path);
            for (const auto& r : model.rules) {
                if (!rule_id.empty() && r.id != rule_id) continue;
                std::cout << r.id << ": "
                          << pc::vetting::render_structured_english(r, model.variables) << "\n";
            }
            if (!rule_id.empty() && !model.find_rule(rule_id)) {
                std::cerr << "no such rule: " << rule_id << "\n";
                return 1;
            }
            return 0;
        }

        if (cmd_validate->parsed()) {
            if (text.empty() && question.empty() && answer.empty())
                throw std::runtime_error("pass --text or --question/--answer");
            std::string input = !text.empty() ? text : question + "\n" + answer;
            auto model = pc::model::load(model_path);
            pc::solver::SolverSession session(s.solver_config());
            auto findings =
                pc::verifier::validate(input, model, s.pool(), session, s.verifier_config());
            std::cout << pc::verifier::findings_to_json(findings);
            for (const auto& f : findings)
                if (f.category == pc::verifier::Category::Impossible ||
                    f.category == pc::verifier::Category::Invalid)
                    return 1;
            return 0;
        }

        if (cmd_test->parsed()) {
            auto model = pc::model::load(model_path);
            auto cases = pc::vetting::test_cases_from_json(slurp(suite_path), model);
            pc::solver::SolverSession session(s.solver_config());
            bool needs_pool = false;
            for (const auto& c : cases)
                needs_pool |= c.kind != pc::vetting::TestCase::Kind::Symbolic;
            pc::translator::TranslatorPool pool;
            if (needs_pool) pool = s.pool();
            auto outcomes =
                pc::vetting::run_tests(cases, model, pool, session, s.verifier_config());
            std::cout << pc::vetting::outcomes_to_json(outcomes);
            for (const auto& o : outcomes)
                if (!o.pass) return 1;
            return 0;
        }

        if (cmd_gen->parsed()) {
            auto model = pc::model::load(model_path);
            pc::solver::SolverSession session(s.solver_config());
            auto cases = pc::vetting::generate_symbolic_tests(model, gen_n, seed, session);
            std::string json = pc::vetting::test_cases_to_json(cases);
            if (out_path.empty())
                std::cout << json;
            else
                spit(out_path, json);
            return 0;
        }

        if (cmd_eval->parsed()) {
            auto model = pc::model::load(model_path);
            pc::metrics::EvalConfig cfg;
            cfg.verifier = s.verifier_config();
            cfg.solver = s.solver_config();
            cfg.workers = s.workers;
            auto result = pc::metrics::run_eval(pc::metrics::parse_dataset(slurp(dataset_path)),
                                                model, s.pool(), cfg);
            std::cout << pc::metrics::eval_json(result);
            return 0;
        }

        if (cmd_refine->parsed()) {
            auto model = pc::model::load(model_path);
            auto pool = s.pool();
            pc::solver::SolverSession session(s.solver_config());
            auto trajectory =
                pc::metrics::run_refine_loop(question, answer, model, pool, *pool.backends.front(),
                                             session, s.verifier_config(), max_iters);
            std::cout << pc::metrics::trajectory_json(trajectory);
            return trajectory.back().category == pc::verifier::Category::Valid ? 0 : 1;
        }

        if (cmd_report->parsed()) {
            auto body = nlohmann::json::parse(slurp(report_path));
            std::cout << "span,begin,end,status,rules,repair_attempts\n";
            for (const auto& span : body.at("spans"))
                std::cout << span.at("index").get<size_t>() << ','
                          << span.at("begin").get<size_t>() << ',' << span.at("end").get<size_t>()
                          << ',' << span.at("status").get<std::string>() << ','
                          << span.at("rules").get<size_t>() << ','
                          << span.at("repair_attempts").get<size_t>() << "\n";
            std::cout << "total,,," << body.at("datatypes").get<size_t>() << " datatypes,"
                      << body.at("variables").get<size_t>() << " variables,"
                      << body.at("rules").get<size_t>() << " rules\n";
            return 0;
        }

        if (cmd_digest->parsed()) {
            std::ostringstream ss;
            ss << std::cin.rdbuf();
            std::cout << pc::translator::digest(ss.str()) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
