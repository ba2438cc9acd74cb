#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ptk/filter.hpp"
#include "test_util.hpp"

using namespace ptk;

namespace {

FilterRule min_tokens_rule(std::int64_t threshold = 20) {
    FilterRule r;
    r.kind = RuleKind::min_tokens;
    r.min_tokens = threshold;
    return r;
}

FilterRule code_rule() {
    FilterRule r;
    r.kind = RuleKind::code_metrics;
    return r;
}

FilterRule synthetic_rule() {
    FilterRule r;
    r.kind = RuleKind::synthetic_answer;
    return r;
}

FilterRule score_rule() {
    FilterRule r;
    r.kind = RuleKind::score_gate;
    return r;
}

} // namespace

TEST_CASE("min_tokens: fewer than 20 removes, exactly 20 keeps") {
    const auto rules = std::vector<FilterRule>{min_tokens_rule(20)};
    const auto removed = heuristic_filter(test::make_doc("a", "t", Domain::web, 19), rules);
    CHECK_FALSE(removed.keep);
    CHECK(removed.reason == "min_tokens");
    CHECK(heuristic_filter(test::make_doc("b", "t", Domain::web, 20), rules).keep);
}

TEST_CASE("min_tokens without token_count names the missing field") {
    const auto rules = std::vector<FilterRule>{min_tokens_rule()};
    CHECK_THROWS_WITH_AS(heuristic_filter(test::make_doc("a", "t"), rules),
                         doctest::Contains("token_count"), std::runtime_error);
}

TEST_CASE("code metrics: long lines and low alphabetic ratio are removed") {
    const auto rules = std::vector<FilterRule>{code_rule()};
    const std::string long_line(200, 'x');
    CHECK_FALSE(heuristic_filter(test::make_doc("a", long_line, Domain::code), rules).keep);
    CHECK_FALSE(
        heuristic_filter(test::make_doc("b", "1 + 2 = 3 ###\n4 - 5\n", Domain::code), rules)
            .keep);
    CHECK(heuristic_filter(
              test::make_doc("c", "def add(a, b):\n    return a + b\n", Domain::code), rules)
              .keep);
    // Non-code documents pass regardless of shape.
    CHECK(heuristic_filter(test::make_doc("d", long_line, Domain::web), rules).keep);
}

TEST_CASE("math synthetic response needs a highlighted answer") {
    const auto rules = std::vector<FilterRule>{synthetic_rule()};
    Document no_marker = test::make_doc("a", "the answer is 4", Domain::math);
    no_marker.is_instruction = true;
    const auto removed = heuristic_filter(no_marker, rules);
    CHECK_FALSE(removed.keep);
    CHECK(removed.reason == "synthetic_answer");

    Document with_marker =
        test::make_doc("b", "so we get $boxed{4}$ as the result", Domain::math);
    with_marker.is_instruction = true;
    CHECK(heuristic_filter(with_marker, rules).keep);

    // Non-math text does not need the marker.
    Document web = test::make_doc("c", "no marker anywhere", Domain::web);
    CHECK(heuristic_filter(web, rules).keep);
}

TEST_CASE("repeated-window synthetic text is removed") {
    const auto rules = std::vector<FilterRule>{synthetic_rule()};
    std::string repeated;
    for (int i = 0; i < 30; ++i) repeated += "exact same twenty chs";
    CHECK_FALSE(heuristic_filter(test::make_doc("a", repeated, Domain::synthetic), rules).keep);
    Rng rng(3);
    Document varied = test::make_doc("b", test::random_words(rng, 60), Domain::synthetic);
    CHECK(heuristic_filter(varied, rules).keep);
}

TEST_CASE("score gate: 1-2 removed, 3-5 kept, absent kept") {
    Document doc = test::make_doc("a", "text");
    CHECK(score_filter(doc).keep); // absent
    doc.quality_score = 1;
    CHECK_FALSE(score_filter(doc).keep);
    doc.quality_score = 2;
    CHECK_FALSE(score_filter(doc).keep);
    doc.quality_score = 3;
    CHECK(score_filter(doc).keep);
    doc.quality_score = 5;
    CHECK(score_filter(doc).keep);
    doc.quality_score = 7;
    CHECK_THROWS_AS(score_filter(doc), std::runtime_error);
}

TEST_CASE("first failing rule names the reason") {
    Document doc = test::make_doc("a", "short", Domain::web, 5);
    doc.quality_score = 1;
    const auto rules = std::vector<FilterRule>{min_tokens_rule(), score_rule()};
    CHECK(heuristic_filter(doc, rules).reason == "min_tokens");
    const auto reordered = std::vector<FilterRule>{score_rule(), min_tokens_rule()};
    CHECK(heuristic_filter(doc, reordered).reason == "score_gate");
}

TEST_CASE("run_filters: empty rule list keeps everything") {
    std::vector<Document> docs = {test::make_doc("a", "x"), test::make_doc("b", "y")};
    const auto result = run_filters(docs, {});
    CHECK(result.kept.size() == 2);
    CHECK(result.report.kept_count == 2);
    for (const auto& [rule, count] : result.report.removed_by_rule) CHECK(count == 0);
}

TEST_CASE("run_filters: counts reconcile on a constructed corpus") {
    std::vector<Document> docs;
    for (int i = 0; i < 10; ++i) {
        docs.push_back(
            test::make_doc("d" + std::to_string(i), "text", Domain::web, i < 3 ? 10 : 30));
    }
    const auto result = run_filters(docs, {min_tokens_rule(20)});
    CHECK(result.report.input_count == 10);
    CHECK(result.report.kept_count == 7);
    CHECK(result.report.removed_by_rule.at("min_tokens") == 3);
    CHECK(result.removal_log.size() == 3);
    // Order preserved among kept docs.
    CHECK(result.kept.front().id == "d3");
}

TEST_CASE("run_filters conservation and idempotence on random corpora") {
    Rng rng(91);
    const auto rules = std::vector<FilterRule>{min_tokens_rule(20), score_rule()};
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<Document> docs;
        for (int i = 0; i < 100; ++i) {
            Document d = test::make_doc("d" + std::to_string(i), "body", Domain::web,
                                        static_cast<std::int64_t>(rng.uniform_int(40)));
            if (rng.uniform01() < 0.5) {
                d.quality_score = 1 + static_cast<int>(rng.uniform_int(5));
            }
            docs.push_back(std::move(d));
        }
        const auto first = run_filters(docs, rules);
        std::int64_t removed = 0;
        for (const auto& [rule, count] : first.report.removed_by_rule) removed += count;
        CHECK(first.report.input_count == first.report.kept_count + removed);

        // Filtering is per-document, so a second pass removes nothing.
        const auto second = run_filters(first.kept, rules);
        CHECK(second.report.kept_count == second.report.input_count);

        // Determinism: identical reports for identical inputs.
        const auto repeat = run_filters(docs, rules);
        CHECK(repeat.report.to_json() == first.report.to_json());
    }
}

TEST_CASE("rule JSON round trip") {
    std::vector<FilterRule> rules = {min_tokens_rule(20), code_rule(), synthetic_rule(),
                                     score_rule()};
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rules) j.push_back(r.to_json());
    const auto back = rules_from_json(j);
    REQUIRE(back.size() == rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(back[i].kind == rules[i].kind);
    }
    CHECK_THROWS_AS(parse_rule_kind("unknown"), std::invalid_argument);
}

TEST_CASE("rule validation rejects bad thresholds") {
    FilterRule bad = score_rule();
    bad.min_keep_score = 9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    FilterRule neg = min_tokens_rule();
    neg.min_tokens = -1;
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}
