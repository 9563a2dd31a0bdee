#include "policycheck/metrics.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include <json.hpp>

namespace policycheck::metrics {

using nlohmann::json;
using verifier::Category;

MetricsRow compute_metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
        throw MetricsError("negative confusion counts");
    long total = c.total();
    if (total == 0) throw EmptyCounts("no samples");

    auto ratio = [](long num, long den) {
        if (den == 0) return mpq_class(0);
        mpq_class q(num, den);
        q.canonicalize();
        return mpq_class(100 * q);
    };
    MetricsRow row;
    row.soundness = mpq_class(100) - ratio(c.fp, total);
    row.fpr = ratio(c.fp, c.fp + c.tn);
    row.precision = ratio(c.tp, c.tp + c.fp);
    row.recall = ratio(c.tp, c.tp + c.fn);
    row.accuracy = ratio(c.tp + c.tn, total);
    row.f1 = row.precision + row.recall == 0
                 ? mpq_class(0)
                 : 2 * row.precision * row.recall / (row.precision + row.recall);
    for (mpq_class* q : {&row.soundness, &row.fpr, &row.precision, &row.recall, &row.f1,
                         &row.accuracy})
        q->canonicalize();
    return row;
}

std::string round1(const mpq_class& q) {
    mpq_class scaled = q * 10;
    bool negative = scaled < 0;
    if (negative) scaled = -scaled;
    // round half away from zero: floor(x + 1/2)
    mpz_class tenths = (scaled.get_num() * 2 + scaled.get_den()) / (2 * scaled.get_den());
    std::string digits = tenths.get_str();
    if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
    std::string out = digits.substr(0, digits.size() - 1) + "." + digits.back();
    return negative ? "-" + out : out;
}

static json rational_json(const mpq_class& q) {
    return {{"num", q.get_num().get_str()},
            {"den", q.get_den().get_str()},
            {"display", round1(q)}};
}

static json row_json(const MetricsRow& row) {
    return {{"soundness", rational_json(row.soundness)},
            {"fpr", rational_json(row.fpr)},
            {"precision", rational_json(row.precision)},
            {"recall", rational_json(row.recall)},
            {"f1", rational_json(row.f1)},
            {"accuracy", rational_json(row.accuracy)}};
}

std::string metrics_json(const ConfusionCounts& c, const MetricsRow& row) {
    return json{{"counts", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
                {"metrics", row_json(row)}}
               .dump(2) +
           "\n";
}

// ---------------------------------------------------------------------------
// Dataset evaluation

std::vector<DatasetCase> parse_dataset(const std::string& text) {
    json arr = json::parse(text, nullptr, false);
    if (arr.is_discarded() || !arr.is_array())
        throw DatasetFormat("dataset must be a JSON array");
    std::vector<DatasetCase> out;
    for (size_t i = 0; i < arr.size(); ++i) {
        const json& j = arr[i];
        std::string at = "case " + std::to_string(i);
        if (!j.is_object() || !j.contains("question") || !j.contains("answer") ||
            !j.contains("label"))
            throw DatasetFormat(at + ": needs question, answer, label");
        DatasetCase c;
        c.question = j["question"].get<std::string>();
        c.answer = j["answer"].get<std::string>();
        auto cat = verifier::category_from_name(j["label"].get<std::string>());
        if (!cat) throw DatasetFormat(at + ": unknown label " + j["label"].dump());
        c.label = *cat;
        c.document_ref = j.value("document_ref", "");
        out.push_back(std::move(c));
    }
    return out;
}

EvalResult run_eval(const std::vector<DatasetCase>& dataset, const model::PolicyModel& m,
                    const translator::TranslatorPool& pool, const EvalConfig& cfg) {
    EvalResult result;
    result.cases.resize(dataset.size());

    size_t workers = std::max<size_t>(1, std::min(cfg.workers, dataset.size()));
    std::atomic<size_t> next{0};
    auto worker = [&] {
        solver::SolverSession session(cfg.solver);
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= dataset.size()) break;
            const DatasetCase& c = dataset[i];
            auto findings = verifier::validate(c.question + "\n" + c.answer, m, pool, session,
                                               cfg.verifier);
            CaseLog log;
            log.index = i;
            log.label = c.label;
            log.verdict = vetting::aggregate_category(findings);
            log.correct = log.verdict == c.label;
            result.cases[i] = log;
        }
    };
    std::vector<std::future<void>> futs;
    for (size_t w = 0; w + 1 < workers; ++w)
        futs.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& f : futs) f.get();

    for (const auto& log : result.cases) {
        bool predicted_valid = log.verdict == Category::Valid;
        bool actually_valid = log.label == Category::Valid;
        if (predicted_valid && actually_valid) ++result.counts.tp;
        else if (predicted_valid) ++result.counts.fp;
        else if (actually_valid) ++result.counts.fn;
        else ++result.counts.tn;
    }
    result.row = compute_metrics(result.counts);
    return result;
}

std::string eval_json(const EvalResult& r) {
    json cases = json::array();
    for (const auto& log : r.cases)
        cases.push_back({{"index", log.index},
                         {"label", verifier::category_name(log.label)},
                         {"verdict", verifier::category_name(log.verdict)},
                         {"correct", log.correct}});
    return json{{"counts",
                 {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn},
                  {"fn", r.counts.fn}}},
                {"metrics", row_json(r.row)},
                {"binarization", "valid iff every pair finding is Valid and at least one pair"},
                {"cases", cases}}
               .dump(2) +
           "\n";
}

// ---------------------------------------------------------------------------
// Revision loop

static std::string render_assignment(const solver::Assignment& a) {
    std::string out;
    for (const auto& [name, value] : a.bindings) {
        if (!out.empty()) out += ", ";
        out += name + " = " + value.str();
    }
    return out;
}

std::string render_feedback(const verifier::Finding& f, const model::PolicyModel& m) {
    std::ostringstream out;
    out << "The answer was judged " << verifier::category_name(f.category)
        << " against the policy.";
    if (!f.feedback.relevant_rules.empty()) {
        out << " Relevant policy rules:";
        for (const auto& id : f.feedback.relevant_rules) {
            out << "\n- ";
            if (const model::Rule* r = m.find_rule(id))
                out << vetting::render_structured_english(*r, m.variables);
            else
                out << id;
        }
    }
    if (f.feedback.counter_example)
        out << "\nCounter-example to the claim: " << render_assignment(*f.feedback.counter_example);
    if (f.feedback.supporting_scenario)
        out << "\nScenario consistent with the claim: "
            << render_assignment(*f.feedback.supporting_scenario);
    if (!f.feedback.untranslatable.empty()) {
        out << "\nCould not be interpreted under the policy:";
        for (const auto& u : f.feedback.untranslatable) out << " \"" << u << "\"";
    }
    if (!f.feedback.note.empty()) out << "\n" << f.feedback.note;
    return out.str();
}

std::vector<RefineStep> run_refine_loop(const std::string& question, const std::string& answer,
                                        const model::PolicyModel& m,
                                        const translator::TranslatorPool& pool,
                                        translator::Backend& reviser,
                                        solver::SolverSession& session,
                                        const verifier::VerifierConfig& cfg, size_t max_iters) {
    if (max_iters < 1) throw MetricsError("max_iters must be at least 1");
    std::vector<RefineStep> trajectory;
    std::string current = answer;
    for (size_t iter = 0; iter < max_iters; ++iter) {
        auto findings = verifier::validate(question + "\n" + current, m, pool, session, cfg);
        RefineStep step;
        step.answer = current;
        step.category = vetting::aggregate_category(findings);
        trajectory.push_back(step);
        if (trajectory.back().category == Category::Valid) break;
        if (iter + 1 == max_iters) break;

        // feedback from the most severe finding
        const verifier::Finding* worst = nullptr;
        for (const auto& f : findings)
            if (f.category == trajectory.back().category) { worst = &f; break; }
        std::string feedback = worst ? render_feedback(*worst, m)
                                     : "The answer could not be checked against the policy.";
        trajectory.back().feedback = feedback;
        try {
            current = translator::revise_answer(question, current, feedback, reviser);
        } catch (const translator::TranslatorError& e) {
            trajectory.back().feedback += "\n[revision aborted: " + std::string(e.what()) + "]";
            break;
        }
    }
    return trajectory;
}

std::string trajectory_json(const std::vector<RefineStep>& steps) {
    json arr = json::array();
    for (const auto& s : steps) {
        json j = {{"answer", s.answer}, {"category", verifier::category_name(s.category)}};
        if (!s.feedback.empty()) j["feedback"] = s.feedback;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

}  // namespace policycheck::metrics
