#include "policycheck/formalizer.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "policycheck/vetting.hpp"

namespace policycheck::formalizer {

using nlohmann::json;

double token_estimate(const std::string& text) {
    size_t words = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words * 1.3;
}

namespace {

struct Range {
    size_t begin, end;
};

bool is_blank(const std::string& doc, const Range& line) {
    for (size_t i = line.begin; i < line.end; ++i)
        if (doc[i] != ' ' && doc[i] != '\t' && doc[i] != '\r' && doc[i] != '\n') return false;
    return true;
}

bool is_heading(const std::string& doc, const Range& line) {
    size_t b = line.begin;
    while (b < line.end && (doc[b] == ' ' || doc[b] == '\t')) ++b;
    size_t e = line.end;
    while (e > b && (doc[e - 1] == '\n' || doc[e - 1] == '\r' || doc[e - 1] == ' ')) --e;
    if (b >= e) return false;
    if (doc[b] == '#') return true;
    std::string trimmed = doc.substr(b, e - b);
    if (trimmed.size() > 4 && trimmed.rfind("**", 0) == 0) {
        if (!trimmed.empty() && trimmed.back() == ':') trimmed.pop_back();
        return trimmed.size() > 4 && trimmed.compare(trimmed.size() - 2, 2, "**") == 0;
    }
    return false;
}

std::vector<Range> lines_of(const std::string& doc) {
    std::vector<Range> lines;
    size_t start = 0;
    for (size_t i = 0; i < doc.size(); ++i)
        if (doc[i] == '\n') {
            lines.push_back({start, i + 1});
            start = i + 1;
        }
    if (start < doc.size()) lines.push_back({start, doc.size()});
    return lines;
}

// Paragraph blocks: blank separator lines stick to the preceding block, a
// heading always opens a new block.
std::vector<Range> blocks_of(const std::string& doc) {
    std::vector<Range> blocks;
    auto lines = lines_of(doc);
    size_t block_start = 0;
    bool separator_pending = false;
    bool have_block = false;
    for (const auto& line : lines) {
        if (!have_block) {
            block_start = line.begin;
            have_block = true;
            separator_pending = false;
            continue;
        }
        if (is_blank(doc, line)) {
            separator_pending = true;
            continue;
        }
        if (separator_pending || is_heading(doc, line)) {
            blocks.push_back({block_start, line.begin});
            block_start = line.begin;
            separator_pending = false;
        }
    }
    if (have_block) blocks.push_back({block_start, doc.size()});
    return blocks;
}

// Splits an oversized block at line, then word, boundaries.
void chop(const std::string& doc, const Range& block, size_t target, std::vector<Range>& out) {
    double limit = 2.0 * target;
    auto tokens_of = [&](const Range& r) {
        return token_estimate(doc.substr(r.begin, r.end - r.begin));
    };
    if (tokens_of(block) <= limit) {
        out.push_back(block);
        return;
    }
    size_t cursor = block.begin;
    size_t piece_start = block.begin;
    double acc = 0;
    while (cursor < block.end) {
        size_t line_end = doc.find('\n', cursor);
        line_end = line_end == std::string::npos || line_end >= block.end ? block.end
                                                                          : line_end + 1;
        double line_tokens = tokens_of({cursor, line_end});
        if (line_tokens > limit) {
            // a single enormous line: cut at whitespace near the target
            if (piece_start < cursor) out.push_back({piece_start, cursor});
            size_t word_start = cursor;
            size_t count = 0;
            size_t i = cursor;
            bool in_word = false;
            for (; i < line_end; ++i) {
                bool space = doc[i] == ' ' || doc[i] == '\t' || doc[i] == '\n';
                if (!space && !in_word) ++count;
                in_word = !space;
                if (space && count * 1.3 >= target) {
                    out.push_back({word_start, i + 1});
                    word_start = i + 1;
                    count = 0;
                }
            }
            if (word_start < line_end) out.push_back({word_start, line_end});
            piece_start = cursor = line_end;
            acc = 0;
            continue;
        }
        if (acc > 0 && acc + line_tokens > target) {
            out.push_back({piece_start, cursor});
            piece_start = cursor;
            acc = 0;
        }
        acc += line_tokens;
        cursor = line_end;
    }
    if (piece_start < block.end) out.push_back({piece_start, block.end});
}

}  // namespace

SpanPlan split(const std::string& document, size_t target_span_tokens) {
    SpanPlan plan;
    plan.target_span_tokens = target_span_tokens;
    if (document.empty()) return plan;

    std::vector<Range> blocks;
    for (const auto& b : blocks_of(document)) chop(document, b, target_span_tokens, blocks);

    auto tokens_of = [&](const Range& r) {
        return token_estimate(document.substr(r.begin, r.end - r.begin));
    };
    size_t span_start = blocks.front().begin;
    double acc = 0;
    std::vector<Range> spans;
    for (const auto& b : blocks) {
        double bt = tokens_of(b);
        bool heading = is_heading(document, {b.begin, std::min(document.find('\n', b.begin),
                                                               b.end)});
        if (b.begin > span_start &&
            (heading || acc >= target_span_tokens || acc + bt > 2.0 * target_span_tokens)) {
            spans.push_back({span_start, b.begin});
            span_start = b.begin;
            acc = 0;
        }
        acc += bt;
    }
    spans.push_back({span_start, document.size()});

    for (const auto& s : spans)
        plan.spans.push_back({document.substr(s.begin, s.end - s.begin), s.begin, s.end});
    return plan;
}

std::string BuildReport::to_json() const {
    json arr = json::array();
    for (const auto& s : spans) {
        const char* status = s.status == SpanOutcome::Status::Ok      ? "ok"
                             : s.status == SpanOutcome::Status::Empty ? "empty"
                                                                      : "failed";
        json j = {{"index", s.index},
                  {"begin", s.begin},
                  {"end", s.end},
                  {"status", status},
                  {"rules", s.rules},
                  {"repair_attempts", s.repair_attempts}};
        if (!s.error.empty()) j["error"] = s.error;
        arr.push_back(j);
    }
    return json{{"spans", arr},
                {"datatypes", datatypes},
                {"variables", variables},
                {"rules", rules},
                {"repair_attempts", repair_attempts}}
               .dump(2) +
           "\n";
}

std::pair<model::PolicyModel, BuildReport> build(const std::string& document,
                                                 const translator::TranslatorPool& pool,
                                                 const BuildConfig& cfg) {
    if (pool.backends.empty()) throw translator::BackendUnavailable("empty translator pool");
    model::PolicyModel empty_model;
    BuildReport report;
    if (document.find_first_not_of(" \t\r\n") == std::string::npos)
        return {empty_model, report};

    SpanPlan plan = split(document, cfg.target_span_tokens);
    translator::Backend& backend = *pool.backends.front();

    std::vector<model::PolicyUnit> units;
    std::vector<std::string> failures;
    logic::SymbolTable no_context;
    for (size_t i = 0; i < plan.spans.size(); ++i) {
        const Span& span = plan.spans[i];
        SpanOutcome outcome;
        outcome.index = i;
        outcome.begin = span.begin;
        outcome.end = span.end;
        if (span.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            outcome.status = SpanOutcome::Status::Empty;
            report.spans.push_back(outcome);
            continue;
        }
        translator::RepairOptions repair = cfg.repair;
        repair.attempts = &outcome.repair_attempts;
        try {
            model::PolicyUnit unit = translator::formalize_span(span.text, no_context, backend,
                                                                repair);
            outcome.rules = unit.rules.size();
            if (unit.rules.empty() && unit.variables.empty() && unit.datatypes.empty())
                outcome.status = SpanOutcome::Status::Empty;
            else
                units.push_back(std::move(unit));
        } catch (const translator::TranslatorError& e) {
            outcome.status = SpanOutcome::Status::Failed;
            outcome.error = e.what();
            failures.push_back("span " + std::to_string(i) + ": " + e.what());
        }
        report.repair_attempts += outcome.repair_attempts;
        report.spans.push_back(std::move(outcome));
    }

    if (cfg.fail_fast && !failures.empty())
        throw BuildFailed("document build failed on " + std::to_string(failures.size()) +
                              " span(s)",
                          failures);

    model::PolicyModel composed =
        model::compose(units, model::LexicalEmbedder{}, cfg.cluster_threshold).model;
    model::validate(composed);
    report.datatypes = composed.datatypes.size();
    report.variables = composed.variables.size();
    report.rules = composed.rules.size();

    if (cfg.lint_gate && !composed.rules.empty()) {
        solver::SolverSession session(cfg.solver);
        vetting::LintReport lint = vetting::lint(composed, session);
        if (!lint.clean()) {
            std::vector<std::string> msgs;
            for (const auto& e : lint.errors) msgs.push_back(e.code + ": " + e.message);
            throw BuildFailed("composed model fails lint at error level", msgs);
        }
    }
    return {composed, report};
}

}  // namespace policycheck::formalizer
