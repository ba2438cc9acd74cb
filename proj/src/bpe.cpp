#include "ptk/bpe.hpp"

#include "ptk/hashing.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace ptk {

namespace {

// Byte <-> code point alphabet used by byte-level BPE serializations:
// printable latin bytes map to themselves, everything else is remapped to
// 256+k so every token has a printable, space-free form.
struct ByteAlphabet {
    std::array<char32_t, 256> byte_to_cp{};
    std::unordered_map<char32_t, unsigned char> cp_to_byte;

    ByteAlphabet() {
        auto printable = [](int b) {
            return (b >= 33 && b <= 126) || (b >= 161 && b <= 172) ||
                   (b >= 174 && b <= 255);
        };
        char32_t next = 256;
        for (int b = 0; b < 256; ++b) {
            char32_t cp = printable(b) ? static_cast<char32_t>(b) : next++;
            byte_to_cp[static_cast<std::size_t>(b)] = cp;
            cp_to_byte[cp] = static_cast<unsigned char>(b);
        }
    }
};

const ByteAlphabet& byte_alphabet() {
    static const ByteAlphabet table;
    return table;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes one code point starting at position i; advances i. Invalid bytes
// decode as themselves (so escaping never throws).
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) {
        return i + k < s.size() &&
               (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3F);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        char32_t cp = (static_cast<char32_t>(b0 & 0x0F) << 12) |
                      (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3F);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        char32_t cp = (static_cast<char32_t>(b0 & 0x07) << 18) |
                      (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
                      (static_cast<char32_t>(static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3F);
        i += 4;
        return cp;
    }
    ++i;
    return b0;
}

struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const {
        const std::size_t h1 = std::hash<std::string>{}(p.first);
        const std::size_t h2 = std::hash<std::string>{}(p.second);
        return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
    }
};

using RankMap =
    std::unordered_map<std::pair<std::string, std::string>, int, PairHash>;

RankMap build_rank_map(const BpeModel& model) {
    RankMap ranks;
    ranks.reserve(model.merges.size());
    for (std::size_t r = 0; r < model.merges.size(); ++r) {
        ranks.emplace(model.merges[r], static_cast<int>(r));
    }
    return ranks;
}

// One BPE word: repeatedly apply the best-ranked merge among the surviving
// candidates; with dropout every candidate position is independently skipped
// with probability p for this round only.
void merge_word(std::vector<std::string>& symbols, const RankMap& ranks,
                double dropout, Rng* rng) {
    const bool use_dropout = rng != nullptr && dropout > 0.0;
    while (symbols.size() >= 2) {
        int best_rank = std::numeric_limits<int>::max();
        std::vector<std::size_t> best_positions;
        for (std::size_t pos = 0; pos + 1 < symbols.size(); ++pos) {
            auto it = ranks.find({symbols[pos], symbols[pos + 1]});
            if (it == ranks.end()) continue;
            if (use_dropout && rng->uniform01() < dropout) continue;
            if (it->second < best_rank) {
                best_rank = it->second;
                best_positions.assign(1, pos);
            } else if (it->second == best_rank) {
                best_positions.push_back(pos);
            }
        }
        if (best_positions.empty()) break;

        std::vector<std::string> merged;
        merged.reserve(symbols.size());
        std::size_t next_candidate = 0;
        for (std::size_t i = 0; i < symbols.size();) {
            while (next_candidate < best_positions.size() &&
                   best_positions[next_candidate] < i) {
                ++next_candidate;
            }
            if (next_candidate < best_positions.size() &&
                best_positions[next_candidate] == i && i + 1 < symbols.size()) {
                merged.push_back(symbols[i] + symbols[i + 1]);
                i += 2;
            } else {
                merged.push_back(symbols[i]);
                ++i;
            }
        }
        symbols.swap(merged);
    }
}

std::vector<std::string> base_symbols(std::string_view bytes) {
    std::vector<std::string> symbols;
    symbols.reserve(bytes.size());
    for (char c : bytes) symbols.emplace_back(1, c);
    return symbols;
}

} // namespace

bool is_decimal_digit(char32_t cp) {
    // Decimal-digit (Nd) ranges of the Basic Multilingual Plane.
    static constexpr std::pair<char32_t, char32_t> ranges[] = {
        {0x0030, 0x0039}, {0x0660, 0x0669}, {0x06F0, 0x06F9},
        {0x07C0, 0x07C9}, {0x0966, 0x096F}, {0x09E6, 0x09EF},
        {0x0A66, 0x0A6F}, {0x0AE6, 0x0AEF}, {0x0B66, 0x0B6F},
        {0x0BE6, 0x0BEF}, {0x0C66, 0x0C6F}, {0x0CE6, 0x0CEF},
        {0x0D66, 0x0D6F}, {0x0DE6, 0x0DEF}, {0x0E50, 0x0E59},
        {0x0ED0, 0x0ED9}, {0x0F20, 0x0F29}, {0x1040, 0x1049},
        {0x1090, 0x1099}, {0x17E0, 0x17E9}, {0x1810, 0x1819},
        {0x1946, 0x194F}, {0x19D0, 0x19D9}, {0x1A80, 0x1A89},
        {0x1A90, 0x1A99}, {0x1B50, 0x1B59}, {0x1BB0, 0x1BB9},
        {0x1C40, 0x1C49}, {0x1C50, 0x1C59}, {0xA620, 0xA629},
        {0xA8D0, 0xA8D9}, {0xA900, 0xA909}, {0xA9D0, 0xA9D9},
        {0xA9F0, 0xA9F9}, {0xAA50, 0xAA59}, {0xABF0, 0xABF9},
        {0xFF10, 0xFF19},
    };
    for (const auto& [lo, hi] : ranges) {
        if (cp >= lo && cp <= hi) return true;
    }
    return false;
}

std::string escape_token(const std::string& raw) {
    const auto& table = byte_alphabet();
    std::string out;
    out.reserve(raw.size());
    for (unsigned char b : raw) append_utf8(out, table.byte_to_cp[b]);
    return out;
}

std::string unescape_token(const std::string& escaped) {
    const auto& table = byte_alphabet();
    std::string out;
    out.reserve(escaped.size());
    std::size_t i = 0;
    while (i < escaped.size()) {
        const char32_t cp = next_codepoint(escaped, i);
        auto it = table.cp_to_byte.find(cp);
        if (it == table.cp_to_byte.end()) {
            throw std::invalid_argument("escaped token contains a code point "
                                        "outside the byte alphabet");
        }
        out += static_cast<char>(it->second);
    }
    return out;
}

void BpeModel::validate() const {
    if (dropout_rate < 0.0 || dropout_rate > 1.0) {
        throw std::invalid_argument("dropout_rate must be in [0,1]");
    }
    std::unordered_set<int> ids;
    for (const auto& [tok, id] : vocab) {
        if (!ids.insert(id).second) {
            throw std::invalid_argument("duplicate token id " + std::to_string(id));
        }
    }
    std::unordered_set<std::string> available;
    for (int b = 0; b < 256; ++b) {
        std::string s(1, static_cast<char>(b));
        if (!vocab.count(s)) {
            throw std::invalid_argument("base byte " + std::to_string(b) +
                                        " missing from vocab");
        }
        available.insert(std::move(s));
    }
    std::unordered_set<std::string> products;
    for (std::size_t r = 0; r < merges.size(); ++r) {
        const auto& [left, right] = merges[r];
        if (!available.count(left) || !available.count(right)) {
            throw std::invalid_argument(
                "merge " + std::to_string(r) +
                " uses a part that is neither a base symbol nor an earlier product");
        }
        std::string product = left + right;
        if (!vocab.count(product)) {
            throw std::invalid_argument("merge " + std::to_string(r) +
                                        " product missing from vocab");
        }
        if (!products.insert(product).second) {
            throw std::invalid_argument("merge " + std::to_string(r) +
                                        " repeats an earlier product");
        }
        available.insert(std::move(product));
    }
    for (const auto& tok : reserved_tokens) {
        if (!vocab.count(tok)) {
            throw std::invalid_argument("reserved token missing from vocab");
        }
    }
}

void BpeModel::build_reverse_index() const {
    int max_id = -1;
    for (const auto& [tok, id] : vocab) max_id = std::max(max_id, id);
    id_to_token_.assign(static_cast<std::size_t>(max_id + 1), std::string());
    for (const auto& [tok, id] : vocab) id_to_token_[static_cast<std::size_t>(id)] = tok;
}

int BpeModel::id_of(const std::string& token) const {
    auto it = vocab.find(token);
    if (it == vocab.end()) {
        throw std::out_of_range("token not in vocab: \"" + escape_token(token) + "\"");
    }
    return it->second;
}

const std::string& BpeModel::token_of(int id) const {
    if (id_to_token_.empty()) build_reverse_index();
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw std::out_of_range("token id out of range: " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

BpeModel make_bpe_model(std::vector<std::pair<std::string, std::string>> merges,
                        std::vector<std::string> reserved_tokens,
                        double dropout_rate, bool digit_split) {
    BpeModel model;
    model.merges = std::move(merges);
    model.dropout_rate = dropout_rate;
    model.digit_split = digit_split;
    model.reserved_tokens = std::move(reserved_tokens);
    int next_id = 0;
    for (int b = 0; b < 256; ++b) {
        model.vocab.emplace(std::string(1, static_cast<char>(b)), next_id++);
    }
    for (const auto& [left, right] : model.merges) {
        std::string product = left + right;
        if (!model.vocab.emplace(std::move(product), next_id).second) {
            throw std::invalid_argument("merge product already present: \"" +
                                        escape_token(left + right) + "\"");
        }
        ++next_id;
    }
    for (const auto& tok : model.reserved_tokens) {
        if (!model.vocab.emplace(tok, next_id).second) {
            throw std::invalid_argument("reserved token collides with vocab");
        }
        ++next_id;
    }
    model.validate();
    return model;
}

Encoding encode(const BpeModel& model, const std::string& text, Rng* rng) {
    const RankMap ranks = build_rank_map(model);
    Encoding enc;
    if (text.empty()) return enc;

    // Pre-tokenize: with digit_split every decimal digit becomes its own
    // word so no merge can cross into or out of it.
    std::vector<std::string> words;
    if (model.digit_split) {
        std::string current;
        std::size_t i = 0;
        while (i < text.size()) {
            const std::size_t start = i;
            const char32_t cp = next_codepoint(text, i);
            if (is_decimal_digit(cp)) {
                if (!current.empty()) {
                    words.push_back(std::move(current));
                    current.clear();
                }
                words.emplace_back(text.substr(start, i - start));
            } else {
                current.append(text, start, i - start);
            }
        }
        if (!current.empty()) words.push_back(std::move(current));
    } else {
        words.push_back(text);
    }

    const double dropout = rng ? model.dropout_rate : 0.0;
    for (const auto& word : words) {
        auto symbols = base_symbols(word);
        merge_word(symbols, ranks, dropout, rng);
        for (auto& sym : symbols) {
            enc.token_ids.push_back(model.id_of(sym));
            enc.token_strings.push_back(escape_token(sym));
        }
    }
    return enc;
}

std::string decode(const BpeModel& model, const std::vector<int>& token_ids) {
    std::string out;
    for (int id : token_ids) out += model.token_of(id);
    return out;
}

double encode_dropout_stats(const BpeModel& model,
                            const std::vector<std::string>& texts, double rate,
                            std::uint64_t seed) {
    if (texts.empty()) {
        throw std::invalid_argument("encode_dropout_stats: no texts given");
    }
    if (rate < 0.0 || rate > 1.0) {
        throw std::invalid_argument("encode_dropout_stats: rate must be in [0,1]");
    }
    BpeModel with_dropout = model;
    with_dropout.dropout_rate = rate;
    std::int64_t baseline = 0;
    std::int64_t dropped = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        baseline += static_cast<std::int64_t>(encode(model, texts[i]).token_ids.size());
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        dropped += static_cast<std::int64_t>(
            encode(with_dropout, texts[i], &rng).token_ids.size());
    }
    if (baseline == 0) {
        throw std::invalid_argument("encode_dropout_stats: texts encode to zero tokens");
    }
    return static_cast<double>(dropped - baseline) / static_cast<double>(baseline);
}

BpeModel truncate_vocab(const BpeModel& model, std::size_t target_size,
                        const std::vector<std::string>& removals) {
    const std::size_t floor_size = 256 + model.reserved_tokens.size();
    if (target_size < floor_size) {
        throw std::invalid_argument(
            "truncate_vocab: target " + std::to_string(target_size) +
            " is below base alphabet + reserved size " + std::to_string(floor_size));
    }
    std::unordered_set<std::string> removed;
    const std::unordered_set<std::string> reserved(model.reserved_tokens.begin(),
                                                   model.reserved_tokens.end());
    for (const auto& escaped : removals) {
        std::string raw = unescape_token(escaped);
        if (raw.size() == 1) {
            throw std::invalid_argument("truncate_vocab: cannot remove base symbol");
        }
        if (reserved.count(raw)) {
            throw std::invalid_argument("truncate_vocab: cannot remove reserved token");
        }
        removed.insert(std::move(raw));
    }

    // Re-establish closure under the removals, then trim latest-first.
    std::unordered_set<std::string> available;
    for (int b = 0; b < 256; ++b) available.insert(std::string(1, static_cast<char>(b)));
    std::vector<std::pair<std::string, std::string>> kept;
    kept.reserve(model.merges.size());
    for (const auto& merge : model.merges) {
        const std::string product = merge.first + merge.second;
        if (removed.count(product)) continue;
        if (!available.count(merge.first) || !available.count(merge.second)) continue;
        available.insert(product);
        kept.push_back(merge);
    }
    while (256 + reserved.size() + kept.size() > target_size) kept.pop_back();

    BpeModel out;
    out.dropout_rate = model.dropout_rate;
    out.digit_split = model.digit_split;
    out.reserved_tokens = model.reserved_tokens;
    out.merges = kept;
    for (int b = 0; b < 256; ++b) {
        std::string s(1, static_cast<char>(b));
        out.vocab.emplace(s, model.vocab.at(s));
    }
    for (const auto& [left, right] : kept) {
        const std::string product = left + right;
        out.vocab.emplace(product, model.vocab.at(product));
    }
    for (const auto& tok : out.reserved_tokens) {
        out.vocab.emplace(tok, model.vocab.at(tok));
    }
    out.validate();
    return out;
}

double compression_rate(const BpeModel& model, const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw std::invalid_argument("compression_rate: no texts given");
    }
    std::int64_t bytes = 0;
    std::int64_t tokens = 0;
    for (const auto& text : texts) {
        bytes += static_cast<std::int64_t>(text.size());
        tokens += static_cast<std::int64_t>(encode(model, text).token_ids.size());
    }
    if (bytes == 0) {
        throw std::invalid_argument("compression_rate: texts have zero total bytes");
    }
    return static_cast<double>(bytes) / static_cast<double>(tokens);
}

void save_bpe_model(const BpeModel& model, const std::string& vocab_path,
                    const std::string& merges_path, const std::string& meta_path) {
    std::vector<std::pair<int, std::string>> by_id;
    by_id.reserve(model.vocab.size());
    for (const auto& [tok, id] : model.vocab) by_id.emplace_back(id, tok);
    std::sort(by_id.begin(), by_id.end());

    std::ofstream vf(vocab_path, std::ios::binary | std::ios::trunc);
    if (!vf) throw std::runtime_error("cannot open " + vocab_path + " for writing");
    for (const auto& [id, tok] : by_id) {
        vf << escape_token(tok) << ' ' << id << '\n';
    }

    std::ofstream mf(merges_path, std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot open " + merges_path + " for writing");
    for (const auto& [left, right] : model.merges) {
        mf << escape_token(left) << ' ' << escape_token(right) << '\n';
    }

    if (!meta_path.empty()) {
        nlohmann::json meta = {
            {"dropout_rate", model.dropout_rate},
            {"digit_split", model.digit_split},
            {"reserved_tokens", nlohmann::json::array()},
        };
        for (const auto& tok : model.reserved_tokens) {
            meta["reserved_tokens"].push_back(escape_token(tok));
        }
        std::ofstream jf(meta_path, std::ios::binary | std::ios::trunc);
        if (!jf) throw std::runtime_error("cannot open " + meta_path + " for writing");
        jf << meta.dump(2) << '\n';
    }
}

BpeModel load_bpe_model(const std::string& vocab_path,
                        const std::string& merges_path,
                        const std::string& meta_path) {
    BpeModel model;
    {
        std::ifstream vf(vocab_path, std::ios::binary);
        if (!vf) throw std::runtime_error("cannot open " + vocab_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(vf, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::size_t sep = line.rfind(' ');
            if (sep == std::string::npos) {
                throw std::runtime_error(vocab_path + " line " +
                                         std::to_string(line_no) + ": expected \"token id\"");
            }
            const std::string tok = unescape_token(line.substr(0, sep));
            const int id = std::stoi(line.substr(sep + 1));
            model.vocab.emplace(tok, id);
        }
    }
    {
        std::ifstream mf(merges_path, std::ios::binary);
        if (!mf) throw std::runtime_error("cannot open " + merges_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(mf, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            const std::size_t sep = line.find(' ');
            if (sep == std::string::npos) {
                throw std::runtime_error(merges_path + " line " +
                                         std::to_string(line_no) + ": expected \"left right\"");
            }
            model.merges.emplace_back(unescape_token(line.substr(0, sep)),
                                      unescape_token(line.substr(sep + 1)));
        }
    }
    if (!meta_path.empty()) {
        std::ifstream jf(meta_path, std::ios::binary);
        if (!jf) throw std::runtime_error("cannot open " + meta_path);
        nlohmann::json meta = nlohmann::json::parse(jf);
        model.dropout_rate = meta.value("dropout_rate", 0.0);
        model.digit_split = meta.value("digit_split", false);
        for (const auto& tok : meta.value("reserved_tokens", nlohmann::json::array())) {
            model.reserved_tokens.push_back(unescape_token(tok.get<std::string>()));
        }
    }
    model.validate();
    return model;
}

} // namespace ptk
