#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ptk/bpe.hpp"
#include "ptk/document.hpp"

namespace ptk {

/**
 * @brief Benchmark token n-grams used to screen training documents.
 *
 * Grams are stored as 64-bit hashes of token-id tuples. Building with
 * store_tuples keeps the raw tuples as well, which tests use to rule out
 * hash collisions. Grams seen more than max_occurrences times across the
 * benchmarks are dropped at build time.
 */
struct ContaminationSet {
    int n = 20;
    std::uint64_t hash_seed = 0x20121221ULL;
    std::int64_t max_occurrences = 4;
    std::unordered_set<std::uint64_t> grams;
    std::unordered_map<std::uint64_t, std::int64_t> source_counts; // pre-cap
    bool tuples_stored = false;
    std::vector<std::vector<int>> tuples; // only with store_tuples

    std::size_t size() const { return grams.size(); }
};

std::uint64_t hash_gram(const int* ids, int n, std::uint64_t seed);

ContaminationSet build_contamination_set(const std::vector<Document>& benchmarks,
                                         const BpeModel& model, int n,
                                         std::int64_t max_occurrences = 4,
                                         bool store_tuples = false);

// Fraction of the document's token n-grams found in the set; 0 when the
// document has fewer than n tokens. Tokenization is deterministic (dropout
// forced off).
double contamination_ratio(const Document& doc, const ContaminationSet& set,
                           const BpeModel& model);

struct DecontamResult {
    std::vector<Document> kept; // input order preserved
    // (id, ratio) of removed documents, in input order.
    std::vector<std::pair<std::string, double>> removal_log;
};

// Removes documents whose ratio strictly exceeds threshold.
DecontamResult decontaminate(const std::vector<Document>& docs,
                             const ContaminationSet& set, const BpeModel& model,
                             double threshold = 0.10);

// Binary serialization: header (n, count, hash seed) plus sorted gram hashes.
void save_contamination_set(const ContaminationSet& set, const std::string& path);
ContaminationSet load_contamination_set(const std::string& path);

} // namespace ptk
