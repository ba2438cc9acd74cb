#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptk/bpe.hpp"
#include "ptk/curriculum.hpp"
#include "ptk/decontam.hpp"
#include "ptk/filter.hpp"
#include "ptk/initplan.hpp"
#include "ptk/minhash.hpp"
#include "ptk/schedule.hpp"

namespace ptk {

/**
 * @brief Configuration of the corpus pipeline run.
 *
 * Stages execute in the canonical order dedup -> filter -> decontam ->
 * tokenize -> pack; the configured list may omit stages but not reorder
 * them. The global seed drives every randomized component and is recorded
 * in the manifest.
 */
struct PipelineConfig {
    std::vector<std::string> stages{"dedup", "filter", "decontam", "tokenize", "pack"};
    std::uint64_t seed = 0;
    std::string input_path;
    std::string output_dir;

    DedupConfig dedup;
    double dedup_threshold = 0.8;

    std::vector<FilterRule> filter_rules;

    std::string benchmarks_path; // decontam stage input
    int decontam_n = 20;
    std::int64_t decontam_max_occurrences = 4;
    double decontam_threshold = 0.10;

    // Tokenizer model directory holding vocab.txt, merges.txt, meta.json;
    // empty means a small built-in byte-level model.
    std::string tokenizer_dir;
    double tokenize_dropout = 0.0;

    std::int64_t pack_sequence_length = 4096;
    bool pack_instruction_aware = true;
    std::int32_t pack_pad_id = 0;

    void validate() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/**
 * @brief Deterministic run record: per-stage counts, detail statistics, and
 * a content hash of every file written. Byte-identical across runs with the
 * same inputs, config, and seed.
 */
struct RunManifest {
    nlohmann::json json = nlohmann::json::object();

    std::string dump() const { return json.dump(2) + "\n"; }
};

// Executes the configured stages, writing numbered intermediates into
// output_dir, and returns the manifest (also written as manifest.json).
RunManifest run_pipeline(const PipelineConfig& config);

// FNV-1a content hash of a file, hex-encoded; manifest entries use this.
std::string file_content_hash(const std::string& path);

// The three planning artifacts written together: the curriculum phase plan,
// the LR curve CSV, and the initialization plan. Token totals of the phase
// plan and the schedule are cross-checked before anything is written.
struct PlanConfig {
    std::int64_t total_tokens = 1'080'000'000'000;
    std::int64_t warmup_tokens = 10'000'000'000;
    double anneal_ratio = 80.0 / 990.0;
    std::int64_t phase_size_tokens = 40'000'000'000;
    std::int64_t batch_tokens = 4'120'000;
    std::int64_t schedule_total_steps = 0; // 0 = derive from total_tokens
    double eta_max = 0.01;
    double floor_lr = 5.22e-5;
    std::int64_t anneal_steps = 18802;
    std::int64_t tail_steps = 772;
    ModelShape target = ModelShape::target_2b();
    ModelShape proxy = ModelShape::proxy_0p05b();
    double embed_std = 0.1;

    static PlanConfig from_json(const nlohmann::json& j);
};

struct PlanArtifacts {
    PhasePlan phase_plan;
    ScheduleSpec schedule;
    InitPlan init_plan;
};

PlanArtifacts build_plan(const PlanConfig& config);

} // namespace ptk
