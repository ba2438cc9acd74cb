#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ptk {

enum class Domain {
    web,
    chinese,
    code,
    math,
    general_knowledge,
    book,
    encyclopedia,
    instruction,
    synthetic,
};

const char* domain_name(Domain d);
Domain parse_domain(std::string_view name);
std::vector<Domain> all_domains();

/**
 * @brief One corpus record.
 *
 * `length_chars` is derived from `text` (UTF-8 character count, not bytes)
 * and recomputed on ingest. `token_count` stays empty until a tokenizer has
 * run. Unknown fields from ingested records are kept in `extra` and written
 * back verbatim so sidecar annotations survive the pipeline.
 */
struct Document {
    std::string id;
    std::string text;
    Domain domain = Domain::web;
    std::string source;
    std::optional<std::int64_t> token_count;
    std::optional<int> quality_score; // 1..5 when present
    bool is_instruction = false;
    std::int64_t length_chars = 0;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Document& other) const;
};

// UTF-8 character count (continuation bytes are not counted).
std::int64_t utf8_length(std::string_view text);

struct CorpusStats {
    std::int64_t doc_count = 0;
    std::int64_t total_tokens = 0;
    std::map<Domain, std::int64_t> per_domain_tokens;
    std::map<Domain, double> per_domain_fraction;
};

// Fractions are over token counts, not document counts. Throws if any
// document has no token_count.
CorpusStats stats(const std::vector<Document>& docs);

nlohmann::json stats_to_json(const CorpusStats& s);

} // namespace ptk
