#include "ptk/minhash.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "ptk/hashing.hpp"
#include "ptk/rng.hpp"

namespace ptk {

namespace {

constexpr std::uint64_t kMersenne61 = (1ULL << 61) - 1;

std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(a) * b) % kMersenne61);
}

// Universal hash family h_i(x) = a_i * mix(x) + b_i mod 2^61-1, so
// permutations are reproducible from the seed without stored tables.
struct Permutations {
    std::vector<std::uint64_t> a;
    std::vector<std::uint64_t> b;

    Permutations(int count, std::uint64_t seed) {
        Rng rng(mix64(seed ^ 0x5f4a7c15ULL));
        a.reserve(count);
        b.reserve(count);
        for (int i = 0; i < count; ++i) {
            a.push_back(1 + rng.next_u64() % (kMersenne61 - 1));
            b.push_back(rng.next_u64() % kMersenne61);
        }
    }
};

std::vector<std::string> lowercase_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            current += static_cast<char>(std::tolower(c));
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Smaller input index becomes the root, so the cluster survivor is
        // always the first document in input order.
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

} // namespace

void DedupConfig::validate() const {
    if (num_permutations <= 0 || bands <= 0 || rows <= 0 || shingle_size <= 0) {
        throw std::invalid_argument("DedupConfig: all parameters must be positive");
    }
    if (bands * rows != num_permutations) {
        throw std::invalid_argument("DedupConfig: bands * rows must equal num_permutations");
    }
}

std::unordered_set<std::uint64_t> shingles(const std::string& text, int k) {
    if (k < 1) throw std::invalid_argument("shingles: k must be >= 1");
    const auto words = lowercase_words(text);
    std::unordered_set<std::uint64_t> out;
    if (words.size() < static_cast<std::size_t>(k)) {
        std::string whole;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) whole += '\x1f';
            whole += words[i];
        }
        out.insert(fnv1a64(whole));
        return out;
    }
    for (std::size_t i = 0; i + k <= words.size(); ++i) {
        std::string window;
        for (int j = 0; j < k; ++j) {
            if (j) window += '\x1f';
            window += words[i + static_cast<std::size_t>(j)];
        }
        out.insert(fnv1a64(window));
    }
    return out;
}

MinHashSignature signature(const std::unordered_set<std::uint64_t>& shingle_set,
                           const DedupConfig& config) {
    config.validate();
    if (shingle_set.empty()) {
        throw std::invalid_argument("signature: empty shingle set");
    }
    const Permutations perms(config.num_permutations, config.seed);
    MinHashSignature sig;
    sig.shingle_size = config.shingle_size;
    sig.values.assign(static_cast<std::size_t>(config.num_permutations),
                      std::numeric_limits<std::uint64_t>::max());
    for (std::uint64_t raw : shingle_set) {
        const std::uint64_t x = mix64(raw) % kMersenne61;
        for (int i = 0; i < config.num_permutations; ++i) {
            const std::uint64_t h =
                (mulmod61(perms.a[static_cast<std::size_t>(i)], x) +
                 perms.b[static_cast<std::size_t>(i)]) %
                kMersenne61;
            auto& slot = sig.values[static_cast<std::size_t>(i)];
            slot = std::min(slot, h);
        }
    }
    return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.values.empty()) {
        throw std::invalid_argument("estimate_jaccard: signature length mismatch");
    }
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] == b.values[i]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(a.values.size());
}

double jaccard_exact(const std::unordered_set<std::uint64_t>& a,
                     const std::unordered_set<std::uint64_t>& b) {
    if (a.empty() && b.empty()) {
        throw std::invalid_argument("jaccard_exact: both sets empty");
    }
    std::size_t intersection = 0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (std::uint64_t x : small) {
        if (large.count(x)) ++intersection;
    }
    const std::size_t unions = a.size() + b.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

double lsh_candidate_probability(double s, int rows, int bands) {
    return 1.0 - std::pow(1.0 - std::pow(s, rows), bands);
}

DedupResult dedup_corpus(const std::vector<Document>& docs,
                         const DedupConfig& config, double threshold) {
    config.validate();
    if (threshold <= 0.0 || threshold > 1.0) {
        throw std::invalid_argument("dedup_corpus: threshold must be in (0,1]");
    }
    const std::size_t n = docs.size();
    std::vector<MinHashSignature> sigs;
    sigs.reserve(n);
    for (const auto& doc : docs) {
        sigs.push_back(signature(shingles(doc.text, config.shingle_size), config));
    }

    // Band buckets: docs sharing any (band, band-hash) bucket are candidates.
    UnionFind uf(n);
    for (int band = 0; band < config.bands; ++band) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        const std::size_t offset = static_cast<std::size_t>(band) *
                                   static_cast<std::size_t>(config.rows);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t key =
                fnv1a64(sigs[i].values.data() + offset,
                        sizeof(std::uint64_t) * static_cast<std::size_t>(config.rows),
                        0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(band));
            buckets[key].push_back(i);
        }
        for (const auto& [key, members] : buckets) {
            for (std::size_t i = 1; i < members.size(); ++i) {
                for (std::size_t j = 0; j < i; ++j) {
                    const std::size_t a = members[j];
                    const std::size_t b = members[i];
                    if (uf.find(a) == uf.find(b)) continue;
                    if (estimate_jaccard(sigs[a], sigs[b]) >= threshold) {
                        uf.unite(a, b);
                    }
                }
            }
        }
    }

    DedupResult result;
    std::map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
        if (uf.find(i) == i) result.kept.push_back(docs[i]);
    }
    for (const auto& [root, members] : components) {
        if (members.size() < 2) continue;
        std::vector<std::string> ids;
        ids.reserve(members.size());
        for (std::size_t idx : members) ids.push_back(docs[idx].id);
        result.clusters.push_back(std::move(ids));
    }
    return result;
}

} // namespace ptk
