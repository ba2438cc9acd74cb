#include "ptk/packing.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ptk {

namespace {

// Incrementally builds sequences of length L out of (doc, kind, tokens) runs.
class SequenceBuilder {
public:
    SequenceBuilder(std::int64_t L, std::int32_t pad_id) : L_(L), pad_id_(pad_id) {
        if (L <= 0) throw std::invalid_argument("packing: L must be positive");
    }

    std::int64_t remaining() const { return L_ - position_; }
    bool at_start() const { return position_ == 0; }

    // Appends tokens for one document span, splitting across sequences when
    // permitted by the caller (the caller must check remaining() first when
    // splitting is not allowed).
    void append(const std::string& doc_id, SegmentKind kind,
                const std::int32_t* tokens, std::int64_t count) {
        std::int64_t offset = 0;
        while (offset < count) {
            const std::int64_t take = std::min(count - offset, remaining());
            current_.token_ids.insert(current_.token_ids.end(), tokens + offset,
                                      tokens + offset + take);
            current_.segments.push_back(
                {doc_id, position_, position_ + take, kind});
            position_ += take;
            offset += take;
            if (position_ == L_) flush();
        }
    }

    void pad_to_end() {
        if (at_start()) return;
        const std::int64_t count = remaining();
        current_.token_ids.insert(current_.token_ids.end(),
                                  static_cast<std::size_t>(count), pad_id_);
        current_.segments.push_back({"", position_, L_, SegmentKind::pad});
        position_ = L_;
        flush();
    }

    std::vector<PackedSequence> finish() {
        pad_to_end();
        return std::move(sequences_);
    }

private:
    void flush() {
        current_.validate();
        sequences_.push_back(std::move(current_));
        current_ = PackedSequence{};
        position_ = 0;
    }

    std::int64_t L_;
    std::int32_t pad_id_;
    std::int64_t position_ = 0;
    PackedSequence current_;
    std::vector<PackedSequence> sequences_;
};

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("packed file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

constexpr std::uint32_t kMagic = 0x504B5450; // "PTKP"

} // namespace

std::vector<Segment> PackedSequence::pad_replaced_spans() const {
    std::vector<Segment> spans;
    for (const auto& seg : segments) {
        if (seg.kind == SegmentKind::backfill) spans.push_back(seg);
    }
    return spans;
}

void PackedSequence::validate() const {
    const auto L = static_cast<std::int64_t>(token_ids.size());
    std::int64_t cursor = 0;
    for (const auto& seg : segments) {
        if (seg.start != cursor || seg.end <= seg.start) {
            throw std::logic_error("PackedSequence: segments do not tile [0, L)");
        }
        cursor = seg.end;
    }
    if (cursor != L) {
        throw std::logic_error("PackedSequence: segments do not cover the sequence");
    }
}

std::vector<PackedSequence> pack_pretrain(const std::vector<TokenizedDoc>& docs,
                                          std::int64_t L, std::int32_t pad_id) {
    SequenceBuilder builder(L, pad_id);
    for (const auto& doc : docs) {
        if (doc.tokens.empty()) continue;
        builder.append(doc.id, SegmentKind::document, doc.tokens.data(),
                       static_cast<std::int64_t>(doc.tokens.size()));
    }
    return builder.finish();
}

BackfillReservoir::BackfillReservoir(std::vector<TokenizedDoc> docs) {
    for (auto& doc : docs) push(std::move(doc));
}

void BackfillReservoir::push(TokenizedDoc doc) {
    if (!doc.tokens.empty()) docs_.push_back(std::move(doc));
}

bool BackfillReservoir::empty() const { return docs_.empty(); }

std::vector<BackfillReservoir::Piece> BackfillReservoir::take(std::int64_t count) {
    std::vector<Piece> pieces;
    while (count > 0 && !docs_.empty()) {
        TokenizedDoc& front = docs_.front();
        const auto available =
            static_cast<std::int64_t>(front.tokens.size()) -
            static_cast<std::int64_t>(front_offset_);
        const std::int64_t take = std::min(count, available);
        Piece piece;
        piece.doc_id = front.id;
        piece.tokens.assign(
            front.tokens.begin() + static_cast<std::ptrdiff_t>(front_offset_),
            front.tokens.begin() + static_cast<std::ptrdiff_t>(front_offset_ + take));
        pieces.push_back(std::move(piece));
        front_offset_ += static_cast<std::size_t>(take);
        count -= take;
        if (front_offset_ == front.tokens.size()) {
            docs_.pop_front();
            front_offset_ = 0;
        }
    }
    return pieces;
}

std::vector<PackedSequence> pack_instruction_aware(
    const std::vector<TokenizedDoc>& docs, std::int64_t L,
    BackfillReservoir& backfill, std::int32_t pad_id) {
    SequenceBuilder builder(L, pad_id);
    for (const auto& doc : docs) {
        if (doc.tokens.empty()) continue;
        const auto len = static_cast<std::int64_t>(doc.tokens.size());
        if (!doc.is_instruction) {
            builder.append(doc.id, SegmentKind::document, doc.tokens.data(), len);
            continue;
        }
        if (len > L) {
            throw std::invalid_argument("pack_instruction_aware: instruction document \"" +
                                        doc.id + "\" longer than the sequence length");
        }
        if (len > builder.remaining()) {
            // Fill the tail of the current sequence with pre-training tokens
            // instead of splitting the instruction; it opens the next one.
            for (auto& piece : backfill.take(builder.remaining())) {
                builder.append(piece.doc_id, SegmentKind::backfill,
                               piece.tokens.data(),
                               static_cast<std::int64_t>(piece.tokens.size()));
            }
            builder.pad_to_end();
        }
        builder.append(doc.id, SegmentKind::document, doc.tokens.data(), len);
    }
    return builder.finish();
}

std::vector<std::pair<std::int64_t, std::int64_t>> doc_mask_segments(
    const PackedSequence& seq) {
    seq.validate();
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    spans.reserve(seq.segments.size());
    for (const auto& seg : seq.segments) {
        spans.emplace_back(seg.start, seg.end - seg.start);
    }
    return spans;
}

void save_packed(const std::vector<PackedSequence>& seqs, std::int64_t L,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_u32(out, kMagic);
    write_u32(out, 1); // version
    write_u32(out, static_cast<std::uint32_t>(L));
    write_u32(out, static_cast<std::uint32_t>(seqs.size()));
    for (const auto& seq : seqs) {
        if (static_cast<std::int64_t>(seq.token_ids.size()) != L) {
            throw std::invalid_argument("save_packed: sequence length differs from L");
        }
        out.write(reinterpret_cast<const char*>(seq.token_ids.data()),
                  static_cast<std::streamsize>(sizeof(std::int32_t) * seq.token_ids.size()));
        write_u32(out, static_cast<std::uint32_t>(seq.segments.size()));
        for (const auto& seg : seq.segments) {
            write_u32(out, static_cast<std::uint32_t>(seg.start));
            write_u32(out, static_cast<std::uint32_t>(seg.end));
            write_u32(out, static_cast<std::uint32_t>(seg.kind));
            write_u32(out, static_cast<std::uint32_t>(seg.doc_id.size()));
            out.write(seg.doc_id.data(), static_cast<std::streamsize>(seg.doc_id.size()));
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<PackedSequence> load_packed(const std::string& path, std::int64_t* L_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    if (read_u32(in) != kMagic) throw std::runtime_error(path + " is not a packed file");
    if (read_u32(in) != 1) throw std::runtime_error(path + ": unsupported version");
    const std::int64_t L = read_u32(in);
    const std::uint32_t count = read_u32(in);
    if (L_out) *L_out = L;
    std::vector<PackedSequence> seqs;
    seqs.reserve(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        PackedSequence seq;
        seq.token_ids.resize(static_cast<std::size_t>(L));
        in.read(reinterpret_cast<char*>(seq.token_ids.data()),
                static_cast<std::streamsize>(sizeof(std::int32_t) * seq.token_ids.size()));
        const std::uint32_t n_segments = read_u32(in);
        for (std::uint32_t i = 0; i < n_segments; ++i) {
            Segment seg;
            seg.start = read_u32(in);
            seg.end = read_u32(in);
            seg.kind = static_cast<SegmentKind>(read_u32(in));
            const std::uint32_t id_len = read_u32(in);
            seg.doc_id.resize(id_len);
            in.read(seg.doc_id.data(), id_len);
            seq.segments.push_back(std::move(seg));
        }
        if (!in) throw std::runtime_error("packed file truncated");
        seq.validate();
        seqs.push_back(std::move(seq));
    }
    return seqs;
}

std::string packed_debug_dump(const std::vector<PackedSequence>& seqs) {
    std::ostringstream out;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        out << "sequence " << s << " (L=" << seqs[s].token_ids.size() << ")\n";
        for (const auto& seg : seqs[s].segments) {
            const char* kind = seg.kind == SegmentKind::document ? "doc"
                               : seg.kind == SegmentKind::backfill ? "backfill"
                                                                   : "pad";
            out << "  [" << seg.start << ", " << seg.end << ") " << kind;
            if (!seg.doc_id.empty()) out << ' ' << seg.doc_id;
            out << '\n';
        }
    }
    return out.str();
}

} // namespace ptk
