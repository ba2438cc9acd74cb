#include "ptk/filter.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

namespace ptk {

namespace {

struct CodeMetrics {
    double avg_line_length = 0.0;
    double alpha_ratio = 0.0;
};

CodeMetrics code_metrics_of(const std::string& text) {
    CodeMetrics m;
    if (text.empty()) return m;
    std::int64_t lines = 0;
    std::int64_t line_chars = 0;
    std::int64_t alpha = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        ++lines;
        line_chars += static_cast<std::int64_t>(end - start);
        if (end == text.size()) break;
        start = end + 1;
    }
    for (unsigned char c : text) {
        if (std::isalpha(c)) ++alpha;
    }
    m.avg_line_length = static_cast<double>(line_chars) / static_cast<double>(lines);
    m.alpha_ratio = static_cast<double>(alpha) / static_cast<double>(text.size());
    return m;
}

// Fraction of the text covered by the most frequent fixed-size window.
double max_repetition_cover_of(const std::string& text, int window) {
    if (window <= 0 || text.size() < static_cast<std::size_t>(window)) return 0.0;
    std::unordered_map<std::string_view, std::int64_t> counts;
    const std::string_view sv(text);
    for (std::size_t i = 0; i + static_cast<std::size_t>(window) <= sv.size(); ++i) {
        ++counts[sv.substr(i, static_cast<std::size_t>(window))];
    }
    std::int64_t best = 0;
    for (const auto& [key, c] : counts) best = std::max(best, c);
    if (best < 2) return 0.0; // a single occurrence is not repetition
    return static_cast<double>(best) * static_cast<double>(window) /
           static_cast<double>(text.size());
}

bool is_synthetic_response(const Document& doc) {
    return doc.domain == Domain::synthetic ||
           (doc.domain == Domain::math && doc.is_instruction);
}

// Only math responses must carry a highlighted answer; the repetition check
// covers every synthetic response.
bool requires_answer_marker(const Document& doc) {
    return doc.domain == Domain::math && doc.is_instruction;
}

FilterDecision apply_rule(const Document& doc, const FilterRule& rule) {
    switch (rule.kind) {
        case RuleKind::min_tokens: {
            if (!doc.token_count.has_value()) {
                throw std::runtime_error("min_tokens rule: document \"" + doc.id +
                                         "\" is missing field token_count");
            }
            if (*doc.token_count < rule.min_tokens) {
                return {false, rule_kind_name(rule.kind)};
            }
            return {true, ""};
        }
        case RuleKind::code_metrics: {
            if (doc.domain != Domain::code) return {true, ""};
            if (doc.text.empty()) return {false, rule_kind_name(rule.kind)};
            const CodeMetrics m = code_metrics_of(doc.text);
            if (m.avg_line_length > rule.max_avg_line_length ||
                m.alpha_ratio < rule.min_alpha_ratio) {
                return {false, rule_kind_name(rule.kind)};
            }
            return {true, ""};
        }
        case RuleKind::synthetic_answer: {
            if (!is_synthetic_response(doc)) return {true, ""};
            if (requires_answer_marker(doc) &&
                doc.text.find(rule.answer_marker) == std::string::npos) {
                return {false, rule_kind_name(rule.kind)};
            }
            if (max_repetition_cover_of(doc.text, rule.repetition_window) >
                rule.max_repetition_cover) {
                return {false, rule_kind_name(rule.kind)};
            }
            return {true, ""};
        }
        case RuleKind::score_gate: {
            if (!doc.quality_score.has_value()) return {true, ""};
            const int s = *doc.quality_score;
            if (s < 1 || s > 5) {
                throw std::runtime_error("score_gate rule: document \"" + doc.id +
                                         "\" has quality_score outside 1..5");
            }
            if (s < rule.min_keep_score) return {false, rule_kind_name(rule.kind)};
            return {true, ""};
        }
    }
    throw std::logic_error("unreachable rule kind");
}

} // namespace

const char* rule_kind_name(RuleKind kind) {
    switch (kind) {
        case RuleKind::min_tokens: return "min_tokens";
        case RuleKind::code_metrics: return "code_metrics";
        case RuleKind::synthetic_answer: return "synthetic_answer";
        case RuleKind::score_gate: return "score_gate";
    }
    throw std::invalid_argument("unknown rule kind value");
}

RuleKind parse_rule_kind(std::string_view name) {
    if (name == "min_tokens") return RuleKind::min_tokens;
    if (name == "code_metrics") return RuleKind::code_metrics;
    if (name == "synthetic_answer") return RuleKind::synthetic_answer;
    if (name == "score_gate") return RuleKind::score_gate;
    throw std::invalid_argument("unknown rule kind: \"" + std::string(name) + "\"");
}

void FilterRule::validate() const {
    if (min_tokens < 0) throw std::invalid_argument("min_tokens must be nonnegative");
    if (max_avg_line_length < 0 || min_alpha_ratio < 0 || min_alpha_ratio > 1) {
        throw std::invalid_argument("code_metrics thresholds out of range");
    }
    if (max_repetition_cover < 0 || max_repetition_cover > 1 || repetition_window < 1) {
        throw std::invalid_argument("synthetic_answer thresholds out of range");
    }
    if (min_keep_score < 1 || min_keep_score > 5) {
        throw std::invalid_argument("score_gate bound must be within 1..5");
    }
}

nlohmann::json FilterRule::to_json() const {
    nlohmann::json j = {{"kind", rule_kind_name(kind)}};
    switch (kind) {
        case RuleKind::min_tokens:
            j["min_tokens"] = min_tokens;
            break;
        case RuleKind::code_metrics:
            j["max_avg_line_length"] = max_avg_line_length;
            j["min_alpha_ratio"] = min_alpha_ratio;
            break;
        case RuleKind::synthetic_answer:
            j["answer_marker"] = answer_marker;
            j["max_repetition_cover"] = max_repetition_cover;
            j["repetition_window"] = repetition_window;
            break;
        case RuleKind::score_gate:
            j["min_keep_score"] = min_keep_score;
            break;
    }
    return j;
}

FilterRule FilterRule::from_json(const nlohmann::json& j) {
    FilterRule rule;
    rule.kind = parse_rule_kind(j.at("kind").get<std::string>());
    rule.min_tokens = j.value("min_tokens", rule.min_tokens);
    rule.max_avg_line_length = j.value("max_avg_line_length", rule.max_avg_line_length);
    rule.min_alpha_ratio = j.value("min_alpha_ratio", rule.min_alpha_ratio);
    rule.answer_marker = j.value("answer_marker", rule.answer_marker);
    rule.max_repetition_cover = j.value("max_repetition_cover", rule.max_repetition_cover);
    rule.repetition_window = j.value("repetition_window", rule.repetition_window);
    rule.min_keep_score = j.value("min_keep_score", rule.min_keep_score);
    rule.validate();
    return rule;
}

FilterDecision heuristic_filter(const Document& doc,
                                const std::vector<FilterRule>& rules) {
    for (const auto& rule : rules) {
        rule.validate();
        const FilterDecision d = apply_rule(doc, rule);
        if (!d.keep) return d;
    }
    return {true, ""};
}

FilterDecision score_filter(const Document& doc) {
    FilterRule gate;
    gate.kind = RuleKind::score_gate;
    return apply_rule(doc, gate);
}

nlohmann::json FilterReport::to_json() const {
    nlohmann::json removed = nlohmann::json::object();
    for (const auto& [rule, count] : removed_by_rule) removed[rule] = count;
    return {
        {"input_count", input_count},
        {"kept_count", kept_count},
        {"removed_by_rule", removed},
    };
}

FilterRunResult run_filters(const std::vector<Document>& docs,
                            const std::vector<FilterRule>& rules) {
    FilterRunResult result;
    result.report.input_count = static_cast<std::int64_t>(docs.size());
    for (const auto& rule : rules) {
        result.report.removed_by_rule.emplace(rule_kind_name(rule.kind), 0);
    }
    for (const auto& doc : docs) {
        const FilterDecision d = heuristic_filter(doc, rules);
        if (d.keep) {
            result.kept.push_back(doc);
        } else {
            ++result.report.removed_by_rule[d.reason];
            result.removal_log.emplace_back(doc.id, d.reason);
        }
    }
    result.report.kept_count = static_cast<std::int64_t>(result.kept.size());
    return result;
}

std::vector<FilterRule> rules_from_json(const nlohmann::json& j) {
    std::vector<FilterRule> rules;
    for (const auto& item : j) rules.push_back(FilterRule::from_json(item));
    return rules;
}

} // namespace ptk
