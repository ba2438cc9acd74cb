#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace ptk {

struct TokenizedDoc {
    std::string id;
    std::vector<std::int32_t> tokens;
    bool is_instruction = false;
};

enum class SegmentKind : std::uint8_t { document = 0, backfill = 1, pad = 2 };

struct Segment {
    std::string doc_id; // empty for pad segments
    std::int64_t start = 0;
    std::int64_t end = 0; // half-open
    SegmentKind kind = SegmentKind::document;
};

/**
 * @brief One fixed-length training sequence.
 *
 * Segments tile [0, L) without overlap. Backfill segments hold pre-training
 * tokens that replaced padding; they carry their source doc id and are masked
 * like any other document.
 */
struct PackedSequence {
    std::vector<std::int32_t> token_ids; // length L
    std::vector<Segment> segments;

    std::vector<Segment> pad_replaced_spans() const; // backfill segments
    void validate() const;                           // tiling invariant
};

// Order-preserving splice: pre-training documents may split across sequence
// boundaries; the final partial sequence is padded. Total document tokens are
// conserved.
std::vector<PackedSequence> pack_pretrain(const std::vector<TokenizedDoc>& docs,
                                          std::int64_t L,
                                          std::int32_t pad_id = 0);

/**
 * @brief FIFO reservoir of pre-training documents used to replace padding.
 */
class BackfillReservoir {
public:
    BackfillReservoir() = default;
    explicit BackfillReservoir(std::vector<TokenizedDoc> docs);

    void push(TokenizedDoc doc);
    bool empty() const;

    // Takes up to `count` tokens, split into per-source-document runs.
    struct Piece {
        std::string doc_id;
        std::vector<std::int32_t> tokens;
    };
    std::vector<Piece> take(std::int64_t count);

private:
    std::deque<TokenizedDoc> docs_;
    std::size_t front_offset_ = 0;
};

// Instruction-preserving packing: an instruction document that would cross a
// sequence boundary instead starts the next sequence, and the remainder of
// the current sequence is filled from the reservoir (padded if the reservoir
// runs dry). Instruction documents longer than L throw.
std::vector<PackedSequence> pack_instruction_aware(
    const std::vector<TokenizedDoc>& docs, std::int64_t L,
    BackfillReservoir& backfill, std::int32_t pad_id = 0);

// Per-segment (start, length) attention spans; tokens may only attend within
// their own segment.
std::vector<std::pair<std::int64_t, std::int64_t>> doc_mask_segments(
    const PackedSequence& seq);

// Binary records: header (L, count), then token ids and the segment table
// per sequence.
void save_packed(const std::vector<PackedSequence>& seqs, std::int64_t L,
                 const std::string& path);
std::vector<PackedSequence> load_packed(const std::string& path, std::int64_t* L_out = nullptr);

// Human-readable dump for debugging.
std::string packed_debug_dump(const std::vector<PackedSequence>& seqs);

} // namespace ptk
