#include "ptk/corpus_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <zlib.h>

namespace ptk {

namespace {

bool has_gz_suffix(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// Reads a whole file (plain or gzip) into newline-separated lines.
std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    std::string buffer;
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw std::runtime_error("cannot open " + path);
        char chunk[1 << 16];
        int n;
        while ((n = gzread(gz, chunk, sizeof(chunk))) > 0) {
            buffer.append(chunk, static_cast<std::size_t>(n));
        }
        int err = 0;
        gzerror(gz, &err);
        gzclose(gz);
        if (n < 0 || err != Z_OK) {
            throw std::runtime_error("gzip read failed for " + path);
        }
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        buffer.assign(std::istreambuf_iterator<char>(in),
                      std::istreambuf_iterator<char>());
    }
    std::size_t start = 0;
    while (start < buffer.size()) {
        std::size_t end = buffer.find('\n', start);
        if (end == std::string::npos) end = buffer.size();
        lines.emplace_back(buffer.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

void write_all(const std::string& path, const std::string& data) {
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.c_str(), "wb");
        if (!gz) throw std::runtime_error("cannot open " + path + " for writing");
        if (!data.empty() &&
            gzwrite(gz, data.data(), static_cast<unsigned>(data.size())) !=
                static_cast<int>(data.size())) {
            gzclose(gz);
            throw std::runtime_error("gzip write failed for " + path);
        }
        if (gzclose(gz) != Z_OK) {
            throw std::runtime_error("gzip close failed for " + path);
        }
    } else {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw std::runtime_error("write failed for " + path);
    }
}

const char* kKnownFields[] = {"id",          "text",           "domain",
                              "source",      "token_count",    "quality_score",
                              "is_instruction", "length_chars"};

bool is_known_field(const std::string& key) {
    for (const char* f : kKnownFields) {
        if (key == f) return true;
    }
    return false;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
    if (line_no == 0) throw std::runtime_error(what);
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

} // namespace

Document document_from_json_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail_line(line_no, std::string("not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) fail_line(line_no, "record is not a JSON object");

    Document doc;
    if (!j.contains("id") || !j["id"].is_string()) {
        fail_line(line_no, "missing required string field \"id\"");
    }
    doc.id = j["id"].get<std::string>();
    if (doc.id.empty()) fail_line(line_no, "field \"id\" must be nonempty");
    if (!j.contains("text") || !j["text"].is_string()) {
        fail_line(line_no, "missing required string field \"text\"");
    }
    doc.text = j["text"].get<std::string>();
    if (!j.contains("domain") || !j["domain"].is_string()) {
        fail_line(line_no, "missing required string field \"domain\"");
    }
    try {
        doc.domain = parse_domain(j["domain"].get<std::string>());
    } catch (const std::exception& e) {
        fail_line(line_no, e.what());
    }
    if (j.contains("source")) {
        if (!j["source"].is_string()) fail_line(line_no, "field \"source\" must be a string");
        doc.source = j["source"].get<std::string>();
    }
    if (j.contains("token_count") && !j["token_count"].is_null()) {
        if (!j["token_count"].is_number_integer()) {
            fail_line(line_no, "field \"token_count\" must be an integer");
        }
        const auto v = j["token_count"].get<std::int64_t>();
        if (v < 0) fail_line(line_no, "field \"token_count\" must be nonnegative");
        doc.token_count = v;
    }
    if (j.contains("quality_score") && !j["quality_score"].is_null()) {
        if (!j["quality_score"].is_number_integer()) {
            fail_line(line_no, "field \"quality_score\" must be an integer");
        }
        const auto v = j["quality_score"].get<int>();
        if (v < 1 || v > 5) {
            fail_line(line_no, "field \"quality_score\" must be in 1..5, got " +
                                   std::to_string(v));
        }
        doc.quality_score = v;
    }
    if (j.contains("is_instruction")) {
        if (!j["is_instruction"].is_boolean()) {
            fail_line(line_no, "field \"is_instruction\" must be a boolean");
        }
        doc.is_instruction = j["is_instruction"].get<bool>();
    }
    // length_chars is derived from text; a stored value is ignored.
    doc.length_chars = utf8_length(doc.text);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!is_known_field(it.key())) doc.extra[it.key()] = it.value();
    }
    return doc;
}

std::string document_to_json_line(const Document& doc) {
    nlohmann::json j = doc.extra.is_object() ? doc.extra : nlohmann::json::object();
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["domain"] = domain_name(doc.domain);
    j["source"] = doc.source;
    if (doc.token_count.has_value()) j["token_count"] = *doc.token_count;
    if (doc.quality_score.has_value()) j["quality_score"] = *doc.quality_score;
    j["is_instruction"] = doc.is_instruction;
    j["length_chars"] = utf8_length(doc.text);
    return j.dump();
}

std::vector<Document> ingest(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<Document> docs;
    docs.reserve(lines.size());
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        Document doc = document_from_json_line(lines[i], i + 1);
        if (!seen.insert(doc.id).second) {
            fail_line(i + 1, "duplicate document id \"" + doc.id + "\"");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void emit(const std::vector<Document>& docs, const std::string& path) {
    std::string out;
    for (const auto& doc : docs) {
        out += document_to_json_line(doc);
        out += '\n';
    }
    try {
        write_all(path, out);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("emit: ") + e.what());
    }
}

} // namespace ptk
