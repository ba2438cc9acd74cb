#include "ptk/document.hpp"

#include <stdexcept>

namespace ptk {

namespace {

constexpr std::pair<Domain, const char*> kDomainNames[] = {
    {Domain::web, "web"},
    {Domain::chinese, "chinese"},
    {Domain::code, "code"},
    {Domain::math, "math"},
    {Domain::general_knowledge, "general_knowledge"},
    {Domain::book, "book"},
    {Domain::encyclopedia, "encyclopedia"},
    {Domain::instruction, "instruction"},
    {Domain::synthetic, "synthetic"},
};

} // namespace

const char* domain_name(Domain d) {
    for (const auto& [dom, name] : kDomainNames) {
        if (dom == d) return name;
    }
    throw std::invalid_argument("unknown domain value");
}

Domain parse_domain(std::string_view name) {
    for (const auto& [dom, dn] : kDomainNames) {
        if (name == dn) return dom;
    }
    throw std::invalid_argument("unknown domain: \"" + std::string(name) + "\"");
}

std::vector<Domain> all_domains() {
    std::vector<Domain> out;
    for (const auto& [dom, name] : kDomainNames) out.push_back(dom);
    return out;
}

bool Document::operator==(const Document& other) const {
    return id == other.id && text == other.text && domain == other.domain &&
           source == other.source && token_count == other.token_count &&
           quality_score == other.quality_score &&
           is_instruction == other.is_instruction &&
           length_chars == other.length_chars && extra == other.extra;
}

std::int64_t utf8_length(std::string_view text) {
    std::int64_t n = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

CorpusStats stats(const std::vector<Document>& docs) {
    CorpusStats s;
    s.doc_count = static_cast<std::int64_t>(docs.size());
    for (const auto& doc : docs) {
        if (!doc.token_count.has_value()) {
            throw std::runtime_error("stats: document \"" + doc.id +
                                     "\" has no token_count");
        }
        s.total_tokens += *doc.token_count;
        s.per_domain_tokens[doc.domain] += *doc.token_count;
    }
    if (s.total_tokens > 0) {
        for (const auto& [dom, tokens] : s.per_domain_tokens) {
            s.per_domain_fraction[dom] =
                static_cast<double>(tokens) / static_cast<double>(s.total_tokens);
        }
    }
    return s;
}

nlohmann::json stats_to_json(const CorpusStats& s) {
    nlohmann::json tokens = nlohmann::json::object();
    nlohmann::json fractions = nlohmann::json::object();
    for (const auto& [dom, count] : s.per_domain_tokens) {
        tokens[domain_name(dom)] = count;
    }
    for (const auto& [dom, frac] : s.per_domain_fraction) {
        fractions[domain_name(dom)] = frac;
    }
    return {
        {"doc_count", s.doc_count},
        {"total_tokens", s.total_tokens},
        {"per_domain_tokens", tokens},
        {"per_domain_fraction", fractions},
    };
}

} // namespace ptk
