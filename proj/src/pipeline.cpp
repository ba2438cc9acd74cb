#include "ptk/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ptk/corpus_io.hpp"
#include "ptk/hashing.hpp"
#include "ptk/packing.hpp"

namespace ptk {

namespace {

const std::vector<std::string> kCanonicalStages = {"dedup", "filter", "decontam",
                                                   "tokenize", "pack"};

void write_text(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

// A small generic model used when no tokenizer directory is configured:
// byte-level with a handful of common English merges.
BpeModel builtin_model() {
    std::vector<std::pair<std::string, std::string>> merges = {
        {"t", "h"}, {"h", "e"}, {"th", "e"}, {"i", "n"}, {"a", "n"},
        {"o", "n"}, {"e", "r"}, {"r", "e"}, {"a", "t"}, {"e", "n"},
        {"o", "r"}, {" ", "t"}, {" ", "a"}, {"an", "d"}, {" t", "he"},
        {"in", "g"},
    };
    return make_bpe_model(std::move(merges), {}, 0.0, true);
}

nlohmann::json hashed_output(const std::string& path) {
    return {{"path", std::filesystem::path(path).filename().string()},
            {"fnv1a64", file_content_hash(path)}};
}

} // namespace

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char chunk[1 << 16];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        h = fnv1a64(chunk, static_cast<std::size_t>(in.gcount()), h);
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void PipelineConfig::validate() const {
    if (input_path.empty()) throw std::invalid_argument("pipeline: input path required");
    if (output_dir.empty()) throw std::invalid_argument("pipeline: output dir required");
    std::size_t cursor = 0;
    for (const auto& stage : stages) {
        auto it = std::find(kCanonicalStages.begin() + static_cast<std::ptrdiff_t>(cursor),
                            kCanonicalStages.end(), stage);
        if (it == kCanonicalStages.end()) {
            const bool known = std::find(kCanonicalStages.begin(), kCanonicalStages.end(),
                                         stage) != kCanonicalStages.end();
            throw std::invalid_argument(
                known ? "pipeline: stage \"" + stage + "\" violates the canonical order"
                      : "pipeline: unknown stage \"" + stage + "\"");
        }
        cursor = static_cast<std::size_t>(it - kCanonicalStages.begin()) + 1;
    }
    const bool packs = std::find(stages.begin(), stages.end(), "pack") != stages.end();
    const bool tokenizes =
        std::find(stages.begin(), stages.end(), "tokenize") != stages.end();
    if (packs && !tokenizes) {
        throw std::invalid_argument("pipeline: pack requires the tokenize stage");
    }
    dedup.validate();
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    if (j.contains("stages")) c.stages = j["stages"].get<std::vector<std::string>>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.input_path = j.value("input", "");
    c.output_dir = j.value("output", "");
    if (j.contains("dedup")) {
        const auto& d = j["dedup"];
        c.dedup.num_permutations = d.value("num_permutations", c.dedup.num_permutations);
        c.dedup.bands = d.value("bands", c.dedup.bands);
        c.dedup.rows = d.value("rows", c.dedup.rows);
        c.dedup.shingle_size = d.value("shingle_size", c.dedup.shingle_size);
        c.dedup_threshold = d.value("threshold", c.dedup_threshold);
    }
    if (j.contains("filter") && j["filter"].contains("rules")) {
        c.filter_rules = rules_from_json(j["filter"]["rules"]);
    }
    if (j.contains("decontam")) {
        const auto& d = j["decontam"];
        c.benchmarks_path = d.value("benchmarks", "");
        c.decontam_n = d.value("n", c.decontam_n);
        c.decontam_max_occurrences =
            d.value("max_occurrences", c.decontam_max_occurrences);
        c.decontam_threshold = d.value("threshold", c.decontam_threshold);
    }
    if (j.contains("tokenize")) {
        const auto& t = j["tokenize"];
        c.tokenizer_dir = t.value("model_dir", "");
        c.tokenize_dropout = t.value("dropout", 0.0);
    }
    if (j.contains("pack")) {
        const auto& p = j["pack"];
        c.pack_sequence_length = p.value("sequence_length", c.pack_sequence_length);
        c.pack_instruction_aware = p.value("instruction_aware", c.pack_instruction_aware);
        c.pack_pad_id = p.value("pad_id", c.pack_pad_id);
    }
    return c;
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : filter_rules) rules.push_back(r.to_json());
    return {
        {"stages", stages},
        {"seed", seed},
        {"input", input_path},
        {"output", output_dir},
        {"dedup",
         {{"num_permutations", dedup.num_permutations},
          {"bands", dedup.bands},
          {"rows", dedup.rows},
          {"shingle_size", dedup.shingle_size},
          {"threshold", dedup_threshold}}},
        {"filter", {{"rules", rules}}},
        {"decontam",
         {{"benchmarks", benchmarks_path},
          {"n", decontam_n},
          {"max_occurrences", decontam_max_occurrences},
          {"threshold", decontam_threshold}}},
        {"tokenize", {{"model_dir", tokenizer_dir}, {"dropout", tokenize_dropout}}},
        {"pack",
         {{"sequence_length", pack_sequence_length},
          {"instruction_aware", pack_instruction_aware},
          {"pad_id", pack_pad_id}}},
    };
}

RunManifest run_pipeline(const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.output_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(config.output_dir) / name).string();
    };

    BpeModel model = config.tokenizer_dir.empty()
                         ? builtin_model()
                         : load_bpe_model(
                               (std::filesystem::path(config.tokenizer_dir) / "vocab.txt").string(),
                               (std::filesystem::path(config.tokenizer_dir) / "merges.txt").string(),
                               (std::filesystem::path(config.tokenizer_dir) / "meta.json").string());
    config.dedup.validate();
    DedupConfig dedup_config = config.dedup;
    dedup_config.seed = config.seed;

    std::vector<Document> docs = ingest(config.input_path);
    RunManifest manifest;
    manifest.json["seed"] = config.seed;
    manifest.json["input"] = std::filesystem::path(config.input_path).filename().string();
    manifest.json["input_count"] = docs.size();
    manifest.json["stages"] = nlohmann::json::array();

    int stage_no = 0;
    auto stage_prefix = [&](const std::string& name) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%02d_", ++stage_no);
        return std::string(buf) + name;
    };

    // On stage failure the manifest is still written, flagged as partial, so
    // stray intermediates are never mistaken for a completed run.
    auto abort_with = [&](const std::string& stage, const std::string& cause) {
        manifest.json["partial"] = true;
        manifest.json["failed_stage"] = stage;
        manifest.json["error"] = cause;
        write_text(out_path("manifest.json"), manifest.dump());
        throw std::runtime_error("pipeline stage \"" + stage + "\" failed: " + cause);
    };

    for (const auto& stage : config.stages) {
        nlohmann::json entry = {{"name", stage}, {"input_count", docs.size()}};
        try {
            if (stage == "dedup") {
                DedupResult result = dedup_corpus(docs, dedup_config, config.dedup_threshold);
                docs = std::move(result.kept);
                const auto corpus_path = out_path(stage_prefix("dedup.jsonl"));
                emit(docs, corpus_path);
                std::string clusters;
                for (const auto& cluster : result.clusters) {
                    for (std::size_t i = 0; i < cluster.size(); ++i) {
                        if (i) clusters += ' ';
                        clusters += cluster[i];
                    }
                    clusters += '\n';
                }
                const auto clusters_path = out_path(stage_prefix("clusters.txt"));
                write_text(clusters_path, clusters);
                entry["clusters"] = result.clusters.size();
                entry["outputs"] = {hashed_output(corpus_path), hashed_output(clusters_path)};
            } else if (stage == "filter") {
                // min_tokens needs counts; fill them with the deterministic
                // tokenizer when the corpus does not carry them yet.
                for (auto& doc : docs) {
                    if (!doc.token_count.has_value()) {
                        doc.token_count =
                            static_cast<std::int64_t>(encode(model, doc.text).token_ids.size());
                    }
                }
                FilterRunResult result = run_filters(docs, config.filter_rules);
                docs = std::move(result.kept);
                const auto corpus_path = out_path(stage_prefix("filter.jsonl"));
                emit(docs, corpus_path);
                std::string audit;
                for (const auto& [id, reason] : result.removal_log) {
                    audit += id + "\t" + reason + "\n";
                }
                const auto audit_path = out_path(stage_prefix("filter_audit.tsv"));
                write_text(audit_path, audit);
                entry["report"] = result.report.to_json();
                entry["outputs"] = {hashed_output(corpus_path), hashed_output(audit_path)};
            } else if (stage == "decontam") {
                if (config.benchmarks_path.empty()) {
                    throw std::runtime_error("decontam stage requires a benchmarks file");
                }
                const auto benchmarks = ingest(config.benchmarks_path);
                const ContaminationSet set = build_contamination_set(
                    benchmarks, model, config.decontam_n, config.decontam_max_occurrences);
                DecontamResult result =
                    decontaminate(docs, set, model, config.decontam_threshold);
                docs = std::move(result.kept);
                const auto corpus_path = out_path(stage_prefix("decontam.jsonl"));
                emit(docs, corpus_path);
                std::string log;
                char line[64];
                for (const auto& [id, ratio] : result.removal_log) {
                    std::snprintf(line, sizeof(line), "\t%.6f\n", ratio);
                    log += id + line;
                }
                const auto log_path = out_path(stage_prefix("decontam_removals.tsv"));
                write_text(log_path, log);
                const auto set_path = out_path(stage_prefix("contamination.bin"));
                save_contamination_set(set, set_path);
                entry["contamination_grams"] = set.size();
                entry["removed"] = result.removal_log.size();
                entry["outputs"] = {hashed_output(corpus_path), hashed_output(log_path),
                                    hashed_output(set_path)};
            } else if (stage == "tokenize") {
                std::int64_t total_tokens = 0;
                for (auto& doc : docs) {
                    Encoding enc;
                    if (config.tokenize_dropout > 0.0) {
                        BpeModel dropout_model = model;
                        dropout_model.dropout_rate = config.tokenize_dropout;
                        Rng rng(derive_seed(config.seed, doc.id));
                        enc = encode(dropout_model, doc.text, &rng);
                    } else {
                        enc = encode(model, doc.text);
                    }
                    doc.token_count = static_cast<std::int64_t>(enc.token_ids.size());
                    doc.extra["tokens"] = enc.token_ids;
                    total_tokens += *doc.token_count;
                }
                const auto corpus_path = out_path(stage_prefix("tokenized.jsonl"));
                emit(docs, corpus_path);
                entry["total_tokens"] = total_tokens;
                entry["outputs"] = {hashed_output(corpus_path)};
            } else if (stage == "pack") {
                std::vector<TokenizedDoc> tokenized;
                tokenized.reserve(docs.size());
                for (const auto& doc : docs) {
                    if (!doc.extra.contains("tokens")) {
                        throw std::runtime_error("pack stage: document \"" + doc.id +
                                                 "\" has no tokens (run tokenize first)");
                    }
                    tokenized.push_back({doc.id,
                                         doc.extra["tokens"].get<std::vector<std::int32_t>>(),
                                         doc.is_instruction});
                }
                std::vector<PackedSequence> seqs;
                if (config.pack_instruction_aware) {
                    BackfillReservoir reservoir;
                    seqs = pack_instruction_aware(tokenized, config.pack_sequence_length,
                                                  reservoir, config.pack_pad_id);
                } else {
                    seqs = pack_pretrain(tokenized, config.pack_sequence_length,
                                         config.pack_pad_id);
                }
                const auto packed_path = out_path(stage_prefix("packed.bin"));
                save_packed(seqs, config.pack_sequence_length, packed_path);
                entry["sequences"] = seqs.size();
                entry["outputs"] = {hashed_output(packed_path)};
            }
        } catch (const std::exception& e) {
            abort_with(stage, e.what());
        }
        entry["output_count"] = docs.size();
        manifest.json["stages"].push_back(std::move(entry));
    }

    manifest.json["output_count"] = docs.size();
    write_text(out_path("manifest.json"), manifest.dump());
    return manifest;
}

PlanConfig PlanConfig::from_json(const nlohmann::json& j) {
    PlanConfig c;
    c.total_tokens = j.value("total_tokens", c.total_tokens);
    c.warmup_tokens = j.value("warmup_tokens", c.warmup_tokens);
    c.anneal_ratio = j.value("anneal_ratio", c.anneal_ratio);
    c.phase_size_tokens = j.value("phase_size_tokens", c.phase_size_tokens);
    c.batch_tokens = j.value("batch_tokens", c.batch_tokens);
    c.schedule_total_steps = j.value("schedule_total_steps", c.schedule_total_steps);
    c.eta_max = j.value("eta_max", c.eta_max);
    c.floor_lr = j.value("floor_lr", c.floor_lr);
    c.anneal_steps = j.value("anneal_steps", c.anneal_steps);
    c.tail_steps = j.value("tail_steps", c.tail_steps);
    if (j.contains("target")) c.target = ModelShape::from_json(j["target"]);
    if (j.contains("proxy")) c.proxy = ModelShape::from_json(j["proxy"]);
    c.embed_std = j.value("embed_std", c.embed_std);
    return c;
}

PlanArtifacts build_plan(const PlanConfig& config) {
    PlanArtifacts artifacts;
    const StageBudget budget =
        stage_budgets(config.total_tokens, config.warmup_tokens, config.anneal_ratio,
                      config.phase_size_tokens);

    std::map<Stage, MixSpec> targets;
    MixSpec stable_target = default_stable_mix();
    stable_target.instruction_fraction = 0.05;
    targets[Stage::stable] = stable_target;
    targets[Stage::annealing] = default_annealing_mix();
    artifacts.phase_plan = plan_phases(budget, default_stable_mix(), targets);

    ScheduleSpec schedule;
    schedule.eta_max = config.eta_max;
    schedule.floor_lr = config.floor_lr;
    schedule.warmup_steps = tokens_to_steps(config.warmup_tokens, config.batch_tokens);
    schedule.anneal_steps = config.anneal_ratio == 0.0 ? 0 : config.anneal_steps;
    schedule.tail_constant_steps = config.anneal_ratio == 0.0 ? 0 : config.tail_steps;
    schedule.total_steps = config.schedule_total_steps > 0
                               ? config.schedule_total_steps
                               : tokens_to_steps(config.total_tokens, config.batch_tokens);
    schedule.validate();

    // Cross-check: the curriculum and the schedule must describe the same
    // token budget.
    const std::int64_t plan_tokens = artifacts.phase_plan.budget.total();
    const std::int64_t schedule_tokens_lo =
        (schedule.total_steps - 1) * config.batch_tokens;
    const std::int64_t schedule_tokens_hi = schedule.total_steps * config.batch_tokens;
    if (plan_tokens <= schedule_tokens_lo || plan_tokens > schedule_tokens_hi) {
        throw std::invalid_argument(
            "build_plan: curriculum total (" + std::to_string(plan_tokens) +
            " tokens) does not match the schedule's " +
            std::to_string(schedule.total_steps) + " steps");
    }
    artifacts.schedule = schedule;

    artifacts.init_plan =
        mup_plan(config.target, config.proxy, config.eta_max,
                 sigma_base(config.target.d_model), config.embed_std);
    return artifacts;
}

} // namespace ptk
