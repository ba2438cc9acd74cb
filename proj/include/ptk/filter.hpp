#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptk/document.hpp"

namespace ptk {

enum class RuleKind {
    min_tokens,
    code_metrics,
    synthetic_answer,
    score_gate,
};

const char* rule_kind_name(RuleKind kind);
RuleKind parse_rule_kind(std::string_view name);

/**
 * @brief One configurable removal rule.
 *
 * Each rule only judges documents it applies to (code_metrics looks at code,
 * synthetic_answer at synthetic/math-instruction texts) and passes everything
 * else through.
 */
struct FilterRule {
    RuleKind kind = RuleKind::min_tokens;

    // min_tokens: remove documents with fewer than this many tokens.
    std::int64_t min_tokens = 20;

    // code_metrics (code domain only).
    double max_avg_line_length = 100.0;
    double min_alpha_ratio = 0.25;

    // synthetic_answer: math-flavoured synthetic responses must contain the
    // marker; any synthetic text is removed when one repeated window covers
    // more than max_repetition_cover of it.
    std::string answer_marker = "boxed{";
    double max_repetition_cover = 0.30;
    int repetition_window = 20;

    // score_gate: keep when quality_score >= min_keep_score or absent.
    int min_keep_score = 3;

    void validate() const;
    nlohmann::json to_json() const;
    static FilterRule from_json(const nlohmann::json& j);
};

struct FilterDecision {
    bool keep = true;
    std::string reason; // first failing rule's kind when removed
};

// Evaluates rules in list order; the first failing rule names the reason.
// Throws when a rule needs a field the document does not carry.
FilterDecision heuristic_filter(const Document& doc,
                                const std::vector<FilterRule>& rules);

// The model-based quality gate on its own: scores 1-2 remove, 3-5 keep,
// absent keeps. Scores outside 1..5 throw.
FilterDecision score_filter(const Document& doc);

struct FilterReport {
    std::int64_t input_count = 0;
    std::int64_t kept_count = 0;
    std::map<std::string, std::int64_t> removed_by_rule;

    nlohmann::json to_json() const;
};

struct FilterRunResult {
    std::vector<Document> kept;
    FilterReport report;
    // (id, reason) for each removed document, in input order.
    std::vector<std::pair<std::string, std::string>> removal_log;
};

FilterRunResult run_filters(const std::vector<Document>& docs,
                            const std::vector<FilterRule>& rules);

std::vector<FilterRule> rules_from_json(const nlohmann::json& j);

} // namespace ptk
