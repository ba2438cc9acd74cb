#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptk/rng.hpp"

namespace ptk {

/**
 * @brief Byte-level BPE with merge-rule dropout and digit pre-tokenization.
 *
 * Tokens are raw byte strings internally; the 256 single-byte symbols form
 * the base alphabet so any input is encodable. For display and for the
 * two-file (vocab + merges) serialization, bytes are escaped to printable
 * code points with the usual byte-level BPE alphabet mapping.
 */
struct BpeModel {
    std::unordered_map<std::string, int> vocab;       // raw byte string -> id
    std::vector<std::pair<std::string, std::string>> merges; // rank = index
    double dropout_rate = 0.0;
    bool digit_split = false;
    std::vector<std::string> reserved_tokens;

    // Throws if any invariant is violated: merge closure, concatenations in
    // vocab, base alphabet present, dropout_rate in [0,1].
    void validate() const;

    int id_of(const std::string& token) const;
    const std::string& token_of(int id) const;

    std::size_t vocab_size() const { return vocab.size(); }

private:
    mutable std::vector<std::string> id_to_token_; // lazy reverse index
    void build_reverse_index() const;
};

// Builds a model from merge rules: vocab = 256 base bytes, then merge
// products in rank order, then reserved tokens.
BpeModel make_bpe_model(std::vector<std::pair<std::string, std::string>> merges,
                        std::vector<std::string> reserved_tokens = {},
                        double dropout_rate = 0.0, bool digit_split = false);

struct Encoding {
    std::vector<int> token_ids;
    std::vector<std::string> token_strings; // escaped printable form
};

// True for decimal-digit code points (BMP Nd ranges). This is the predicate
// digit pre-tokenization splits on.
bool is_decimal_digit(char32_t cp);

// Escaped printable form of a raw byte-string token, and its inverse.
std::string escape_token(const std::string& raw);
std::string unescape_token(const std::string& escaped);

// Deterministic when rng is null or dropout_rate == 0; otherwise each merge
// opportunity is independently skipped with probability dropout_rate.
Encoding encode(const BpeModel& model, const std::string& text, Rng* rng = nullptr);

std::string decode(const BpeModel& model, const std::vector<int>& token_ids);

// Token inflation of dropout at `rate` relative to deterministic encoding:
// (tokens_with_dropout - tokens_without) / tokens_without. Each text gets an
// independent substream derived from (seed, index). Throws on empty input.
double encode_dropout_stats(const BpeModel& model,
                            const std::vector<std::string>& texts, double rate,
                            std::uint64_t seed);

// Drops the latest merges first until the vocabulary fits target_size, after
// removing `removals` (and everything that depended on them). Reserved tokens
// and the base alphabet are always kept; surviving ids are unchanged.
BpeModel truncate_vocab(const BpeModel& model, std::size_t target_size,
                        const std::vector<std::string>& removals = {});

// UTF-8 bytes per token under deterministic encoding. Throws on empty input.
double compression_rate(const BpeModel& model, const std::vector<std::string>& texts);

// Two-file serialization: "escaped_token id" vocab lines and "left right"
// merge lines in rank order. Model-level switches (dropout, digit_split,
// reserved tokens) travel in a small JSON sidecar.
void save_bpe_model(const BpeModel& model, const std::string& vocab_path,
                    const std::string& merges_path,
                    const std::string& meta_path = "");
BpeModel load_bpe_model(const std::string& vocab_path,
                        const std::string& merges_path,
                        const std::string& meta_path = "");

} // namespace ptk
