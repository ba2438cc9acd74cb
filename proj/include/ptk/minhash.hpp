#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "ptk/document.hpp"

namespace ptk {

struct DedupConfig {
    int num_permutations = 128;
    int bands = 16;
    int rows = 8;
    int shingle_size = 3; // word shingles
    std::uint64_t seed = 0;

    void validate() const; // bands * rows == num_permutations, all positive
};

struct MinHashSignature {
    std::vector<std::uint64_t> values; // one minimum per permutation
    int shingle_size = 0;
};

// Hashes of each window of k whitespace-delimited lowercased words. Texts
// with fewer than k words fall back to a single whole-text hash.
std::unordered_set<std::uint64_t> shingles(const std::string& text, int k);

// Throws on an empty shingle set.
MinHashSignature signature(const std::unordered_set<std::uint64_t>& shingle_set,
                           const DedupConfig& config);

// Fraction of matching coordinates; the MinHash estimate of Jaccard.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

// |a ∩ b| / |a ∪ b|. Throws when both sets are empty. Verification oracle
// for the signature estimate; never used on the dedup fast path.
double jaccard_exact(const std::unordered_set<std::uint64_t>& a,
                     const std::unordered_set<std::uint64_t>& b);

// Probability that a pair at similarity s becomes an LSH candidate:
// 1 - (1 - s^rows)^bands.
double lsh_candidate_probability(double s, int rows, int bands);

struct DedupResult {
    std::vector<Document> kept;                    // input order preserved
    std::vector<std::vector<std::string>> clusters; // id groups, size >= 2
};

// LSH-bucketed near-duplicate removal. Documents whose signature estimate
// reaches `threshold` are clustered (transitively); the first document of
// each cluster in input order survives.
DedupResult dedup_corpus(const std::vector<Document>& docs,
                         const DedupConfig& config, double threshold);

} // namespace ptk
