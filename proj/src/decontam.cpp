#include "ptk/decontam.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "ptk/hashing.hpp"

namespace ptk {

namespace {

// Deterministic token ids of a document; the model's dropout setting is
// ignored on purpose.
std::vector<int> tokenize_deterministic(const BpeModel& model, const std::string& text) {
    return encode(model, text, nullptr).token_ids;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("contamination set file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("contamination set file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

constexpr std::uint32_t kMagic = 0x444B5450; // "PTKD"

} // namespace

std::uint64_t hash_gram(const int* ids, int n, std::uint64_t seed) {
    return fnv1a64(ids, sizeof(int) * static_cast<std::size_t>(n), mix64(seed));
}

ContaminationSet build_contamination_set(const std::vector<Document>& benchmarks,
                                         const BpeModel& model, int n,
                                         std::int64_t max_occurrences,
                                         bool store_tuples) {
    if (n < 1) throw std::invalid_argument("build_contamination_set: n must be >= 1");
    ContaminationSet set;
    set.n = n;
    set.max_occurrences = max_occurrences;
    set.tuples_stored = store_tuples;

    std::unordered_map<std::uint64_t, std::vector<int>> tuple_of;
    for (const auto& doc : benchmarks) {
        const auto ids = tokenize_deterministic(model, doc.text);
        if (ids.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ids.size(); ++i) {
            const std::uint64_t h = hash_gram(ids.data() + i, n, set.hash_seed);
            ++set.source_counts[h];
            if (store_tuples && !tuple_of.count(h)) {
                tuple_of.emplace(h, std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(i),
                                                     ids.begin() + static_cast<std::ptrdiff_t>(i + n)));
            }
        }
    }
    for (const auto& [h, count] : set.source_counts) {
        if (count <= max_occurrences) {
            set.grams.insert(h);
            if (store_tuples) set.tuples.push_back(tuple_of.at(h));
        }
    }
    return set;
}

double contamination_ratio(const Document& doc, const ContaminationSet& set,
                           const BpeModel& model) {
    const auto ids = tokenize_deterministic(model, doc.text);
    if (ids.size() < static_cast<std::size_t>(set.n)) return 0.0;
    const std::size_t windows = ids.size() - static_cast<std::size_t>(set.n) + 1;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < windows; ++i) {
        if (set.grams.count(hash_gram(ids.data() + i, set.n, set.hash_seed))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(windows);
}

DecontamResult decontaminate(const std::vector<Document>& docs,
                             const ContaminationSet& set, const BpeModel& model,
                             double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw std::invalid_argument("decontaminate: threshold must be in [0,1]");
    }
    DecontamResult result;
    for (const auto& doc : docs) {
        const double ratio = contamination_ratio(doc, set, model);
        if (ratio > threshold) {
            result.removal_log.emplace_back(doc.id, ratio);
        } else {
            result.kept.push_back(doc);
        }
    }
    return result;
}

void save_contamination_set(const ContaminationSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    std::vector<std::uint64_t> sorted(set.grams.begin(), set.grams.end());
    std::sort(sorted.begin(), sorted.end());
    write_u32(out, kMagic);
    write_u32(out, static_cast<std::uint32_t>(set.n));
    write_u64(out, set.hash_seed);
    write_u64(out, static_cast<std::uint64_t>(set.max_occurrences));
    write_u64(out, static_cast<std::uint64_t>(sorted.size()));
    for (std::uint64_t h : sorted) write_u64(out, h);
    if (!out) throw std::runtime_error("write failed for " + path);
}

ContaminationSet load_contamination_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    if (read_u32(in) != kMagic) {
        throw std::runtime_error(path + " is not a contamination set file");
    }
    ContaminationSet set;
    set.n = static_cast<int>(read_u32(in));
    set.hash_seed = read_u64(in);
    set.max_occurrences = static_cast<std::int64_t>(read_u64(in));
    const std::uint64_t count = read_u64(in);
    set.grams.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) set.grams.insert(read_u64(in));
    return set;
}

} // namespace ptk
