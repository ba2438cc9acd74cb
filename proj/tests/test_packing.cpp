#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <unistd.h>

#include "ptk/packing.hpp"
#include "ptk/rng.hpp"

using namespace ptk;

namespace {

TokenizedDoc doc_of(std::string id, int tokens, bool instruction = false) {
    TokenizedDoc d;
    d.id = std::move(id);
    d.is_instruction = instruction;
    d.tokens.resize(static_cast<std::size_t>(tokens));
    for (int i = 0; i < tokens; ++i) d.tokens[static_cast<std::size_t>(i)] = i + 1;
    return d;
}

std::int64_t doc_token_total(const std::vector<PackedSequence>& seqs) {
    std::int64_t total = 0;
    for (const auto& seq : seqs) {
        for (const auto& seg : seq.segments) {
            if (seg.kind != SegmentKind::pad) total += seg.end - seg.start;
        }
    }
    return total;
}

} // namespace

TEST_CASE("two docs filling one sequence split at the document boundary") {
    const auto seqs = pack_pretrain({doc_of("a", 3000), doc_of("b", 1096)}, 4096);
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].segments.size() == 2);
    CHECK(seqs[0].segments[0].doc_id == "a");
    CHECK(seqs[0].segments[0].end == 3000);
    CHECK(seqs[0].segments[1].doc_id == "b");
    CHECK(seqs[0].segments[1].start == 3000);
    CHECK(seqs[0].segments[1].end == 4096);
}

TEST_CASE("a pretrain doc longer than L splits across sequences") {
    const auto seqs = pack_pretrain({doc_of("big", 5000)}, 4096);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].segments.size() == 1);
    CHECK(seqs[0].segments[0].doc_id == "big");
    CHECK(seqs[1].segments[0].doc_id == "big");
    CHECK(seqs[1].segments[0].end == 904);
    CHECK(seqs[1].segments[1].kind == SegmentKind::pad);
    CHECK(doc_token_total(seqs) == 5000);
}

TEST_CASE("empty input packs to nothing") {
    CHECK(pack_pretrain({}, 4096).empty());
    BackfillReservoir reservoir;
    CHECK(pack_instruction_aware({}, 4096, reservoir).empty());
}

TEST_CASE("token conservation for pretrain packing") {
    Rng rng(3);
    std::vector<TokenizedDoc> docs;
    std::int64_t total = 0;
    for (int i = 0; i < 500; ++i) {
        const int n = 1 + static_cast<int>(rng.uniform_int(700));
        docs.push_back(doc_of("d" + std::to_string(i), n));
        total += n;
    }
    const auto seqs = pack_pretrain(docs, 512);
    CHECK(doc_token_total(seqs) == total);
    for (const auto& seq : seqs) {
        CHECK(seq.token_ids.size() == 512);
        seq.validate();
    }
}

TEST_CASE("instruction crossing a boundary is backfilled and moved") {
    // 724 pretrain tokens leave 300 positions; the 500-token instruction
    // must open the next sequence and the tail is refilled.
    BackfillReservoir reservoir({doc_of("fill", 1000)});
    const auto seqs =
        pack_instruction_aware({doc_of("pre", 724), doc_of("inst", 500, true)}, 1024,
                               reservoir);
    REQUIRE(seqs.size() == 2);
    REQUIRE(seqs[0].segments.size() == 2);
    CHECK(seqs[0].segments[0].doc_id == "pre");
    CHECK(seqs[0].segments[1].doc_id == "fill");
    CHECK(seqs[0].segments[1].kind == SegmentKind::backfill);
    CHECK(seqs[0].segments[1].start == 724);
    CHECK(seqs[0].segments[1].end == 1024);
    CHECK(seqs[0].pad_replaced_spans().size() == 1);
    CHECK(seqs[1].segments[0].doc_id == "inst");
    CHECK(seqs[1].segments[0].start == 0);
    CHECK(seqs[1].segments[0].end == 500);
}

TEST_CASE("instruction that fits inline stays inline") {
    BackfillReservoir reservoir({doc_of("fill", 1000)});
    const auto seqs =
        pack_instruction_aware({doc_of("pre", 300), doc_of("inst", 200, true)}, 1024,
                               reservoir);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].segments[0].doc_id == "pre");
    CHECK(seqs[0].segments[1].doc_id == "inst");
    CHECK(seqs[0].segments[1].kind == SegmentKind::document);
    CHECK(seqs[0].segments[1].start == 300);
    CHECK(seqs[0].segments[1].end == 500);
}

TEST_CASE("an empty reservoir leaves an explicit pad span") {
    BackfillReservoir reservoir;
    const auto seqs =
        pack_instruction_aware({doc_of("pre", 724), doc_of("inst", 500, true)}, 1024,
                               reservoir);
    REQUIRE(seqs.size() == 2);
    REQUIRE(seqs[0].segments.size() == 2);
    CHECK(seqs[0].segments[1].kind == SegmentKind::pad);
    CHECK(seqs[0].segments[1].start == 724);
    CHECK(seqs[0].pad_replaced_spans().empty());
}

TEST_CASE("a partially drained reservoir pads the remainder") {
    BackfillReservoir reservoir({doc_of("fill", 100)});
    const auto seqs =
        pack_instruction_aware({doc_of("pre", 724), doc_of("inst", 500, true)}, 1024,
                               reservoir);
    REQUIRE(seqs.size() == 2);
    REQUIRE(seqs[0].segments.size() == 3);
    CHECK(seqs[0].segments[1].kind == SegmentKind::backfill);
    CHECK(seqs[0].segments[1].end == 824);
    CHECK(seqs[0].segments[2].kind == SegmentKind::pad);
}

TEST_CASE("instruction longer than L is an error") {
    BackfillReservoir reservoir;
    CHECK_THROWS_AS(pack_instruction_aware({doc_of("big", 2000, true)}, 1024, reservoir),
                    std::invalid_argument);
}

TEST_CASE("instruction documents never split across sequences") {
    Rng rng(17);
    for (int iter = 0; iter < 10; ++iter) {
        std::vector<TokenizedDoc> docs;
        std::vector<TokenizedDoc> fill;
        for (int i = 0; i < 1000; ++i) {
            const bool instruction = rng.uniform01() < 0.3;
            const int len = instruction
                                ? 1 + static_cast<int>(rng.uniform_int(512))
                                : 1 + static_cast<int>(rng.uniform_int(900));
            docs.push_back(doc_of("d" + std::to_string(i), len, instruction));
        }
        for (int i = 0; i < 20; ++i) fill.push_back(doc_of("f" + std::to_string(i), 400));
        BackfillReservoir reservoir(fill);
        const auto seqs = pack_instruction_aware(docs, 512, reservoir);

        std::map<std::string, std::vector<std::pair<std::size_t, Segment>>> spans;
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            seqs[s].validate();
            CHECK(seqs[s].token_ids.size() == 512);
            for (const auto& seg : seqs[s].segments) {
                if (seg.kind == SegmentKind::document) spans[seg.doc_id].emplace_back(s, seg);
            }
        }
        for (const auto& doc : docs) {
            if (!doc.is_instruction) continue;
            const auto& placed = spans.at(doc.id);
            REQUIRE(placed.size() == 1); // whole doc in one sequence, one span
            CHECK(placed[0].second.end - placed[0].second.start ==
                  static_cast<std::int64_t>(doc.tokens.size()));
        }
    }
}

TEST_CASE("mask segments mirror the packing boundaries") {
    const auto seqs = pack_pretrain({doc_of("a", 3000), doc_of("b", 2000)}, 4096);
    const auto spans = doc_mask_segments(seqs[0]);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == std::pair<std::int64_t, std::int64_t>{0, 3000});
    CHECK(spans[1] == std::pair<std::int64_t, std::int64_t>{3000, 1096});
    std::int64_t covered = 0;
    for (const auto& [start, len] : spans) covered += len;
    CHECK(covered == 4096);
}

TEST_CASE("single-doc sequence has one segment covering everything") {
    const auto seqs = pack_pretrain({doc_of("only", 4096)}, 4096);
    REQUIRE(seqs.size() == 1);
    const auto spans = doc_mask_segments(seqs[0]);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == std::pair<std::int64_t, std::int64_t>{0, 4096});
}

TEST_CASE("segment lengths always sum to L over random corpora") {
    Rng rng(23);
    std::vector<TokenizedDoc> docs;
    for (int i = 0; i < 300; ++i) {
        const bool instruction = rng.uniform01() < 0.25;
        docs.push_back(doc_of("d" + std::to_string(i),
                              1 + static_cast<int>(rng.uniform_int(instruction ? 380 : 600)),
                              instruction));
    }
    BackfillReservoir reservoir({doc_of("fill", 5000)});
    for (const auto& seq : pack_instruction_aware(docs, 384, reservoir)) {
        std::int64_t covered = 0;
        for (const auto& [start, len] : doc_mask_segments(seq)) covered += len;
        CHECK(covered == 384);
    }
}

TEST_CASE("packed binary records round trip") {
    namespace fs = std::filesystem;
    Rng rng(29);
    std::vector<TokenizedDoc> docs;
    for (int i = 0; i < 40; ++i) {
        docs.push_back(doc_of("d" + std::to_string(i),
                              1 + static_cast<int>(rng.uniform_int(300)),
                              rng.uniform01() < 0.3));
    }
    BackfillReservoir reservoir({doc_of("fill", 2000)});
    const auto seqs = pack_instruction_aware(docs, 256, reservoir);
    const auto path =
        (fs::temp_directory_path() / ("ptk_pack_" + std::to_string(::getpid()) + ".bin"))
            .string();
    save_packed(seqs, 256, path);
    std::int64_t L = 0;
    const auto loaded = load_packed(path, &L);
    CHECK(L == 256);
    REQUIRE(loaded.size() == seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        CHECK(loaded[i].token_ids == seqs[i].token_ids);
        REQUIRE(loaded[i].segments.size() == seqs[i].segments.size());
        for (std::size_t k = 0; k < seqs[i].segments.size(); ++k) {
            CHECK(loaded[i].segments[k].doc_id == seqs[i].segments[k].doc_id);
            CHECK(loaded[i].segments[k].start == seqs[i].segments[k].start);
            CHECK(loaded[i].segments[k].end == seqs[i].segments[k].end);
            CHECK(loaded[i].segments[k].kind == seqs[i].segments[k].kind);
        }
    }
    const auto dump = packed_debug_dump(loaded);
    CHECK(dump.find("sequence 0") != std::string::npos);
    fs::remove(path);
}
