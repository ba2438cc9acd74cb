#pragma once

#include <string>
#include <vector>

#include "ptk/document.hpp"

namespace ptk {

/**
 * @brief Line-delimited JSON corpus files.
 *
 * One document per line. Files whose name ends in ".gz" are transparently
 * gzip-compressed in both directions. emit followed by ingest reproduces the
 * document sequence field for field, including unknown extra fields.
 */

// Parses a corpus file. Throws on malformed lines (with the 1-based line
// number), on missing required fields, and on duplicate ids.
std::vector<Document> ingest(const std::string& path);

// Serializes one document to its canonical single-line JSON form.
std::string document_to_json_line(const Document& doc);

// Parses a single JSON record; line_no is only used for error messages.
Document document_from_json_line(const std::string& line, std::size_t line_no = 0);

void emit(const std::vector<Document>& docs, const std::string& path);

} // namespace ptk
