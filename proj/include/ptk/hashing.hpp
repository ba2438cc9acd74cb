#pragma once

#include <cstdint>
#include <string_view>

namespace ptk {

// FNV-1a over raw bytes. Used for shingles, n-gram keys, and content hashes
// so results do not depend on std::hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), seed);
}

// Finalizer from splitmix64; also used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combine a global seed with a per-item key (e.g. a document id) into a
// substream seed, keeping parallel encoding reproducible.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key) {
    return mix64(global_seed ^ fnv1a64(key));
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t key) {
    return mix64(global_seed ^ mix64(key));
}

} // namespace ptk
