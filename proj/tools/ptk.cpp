// ptk: corpus pipeline and training-plan toolkit.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptk/bpe.hpp"
#include "ptk/corpus_io.hpp"
#include "ptk/curriculum.hpp"
#include "ptk/decontam.hpp"
#include "ptk/filter.hpp"
#include "ptk/initplan.hpp"
#include "ptk/minhash.hpp"
#include "ptk/packing.hpp"
#include "ptk/pipeline.hpp"
#include "ptk/schedule.hpp"
#include "ptk/stability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string input;
    std::string output;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--input", args.input, "input path");
    cmd->add_option("--output", args.output, "output path or directory");
    cmd->add_option("--seed", args.seed, "global random seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return json::parse(in);
}

// Flags beat the config file, which beats defaults.
ptk::PipelineConfig pipeline_config(const CommonArgs& args,
                                    const std::vector<std::string>& stages) {
    json cfg = load_config(args.config_path);
    ptk::PipelineConfig config = ptk::PipelineConfig::from_json(cfg);
    config.stages = stages;
    if (!args.input.empty()) config.input_path = args.input;
    if (!args.output.empty()) config.output_dir = args.output;
    if (args.seed_set || !cfg.contains("seed")) config.seed = args.seed;
    return config;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << data;
}

ptk::BpeModel model_from_dir(const std::string& dir) {
    return ptk::load_bpe_model((fs::path(dir) / "vocab.txt").string(),
                               (fs::path(dir) / "merges.txt").string(),
                               (fs::path(dir) / "meta.json").string());
}

ptk::InitPlan plan_from_config(const json& cfg) {
    if (cfg.contains("init_plan_file")) {
        std::ifstream in(cfg["init_plan_file"].get<std::string>());
        if (!in) throw std::runtime_error("cannot open init plan file");
        return ptk::InitPlan::from_json(json::parse(in));
    }
    if (cfg.contains("init_plan")) return ptk::InitPlan::from_json(cfg["init_plan"]);
    const auto shape = cfg.contains("shape") ? ptk::ModelShape::from_json(cfg["shape"])
                                             : ptk::ModelShape::proxy_0p05b();
    const std::string preset = cfg.value("init_preset", "scaled");
    if (preset == "mup") {
        return ptk::mup_plan(shape,
                             cfg.contains("proxy") ? ptk::ModelShape::from_json(cfg["proxy"])
                                                   : ptk::ModelShape::proxy_0p05b(),
                             cfg.value("eta_base", 0.01),
                             ptk::sigma_base(shape.d_model), cfg.value("embed_std", 0.1));
    }
    if (preset == "default") {
        return ptk::default_init_plan(shape, cfg.value("init_std", 0.02));
    }
    return ptk::scaled_init_plan(shape, ptk::sigma_base(shape.d_model));
}

ptk::SimConfig sim_config_from_json(const json& cfg, std::uint64_t seed) {
    ptk::SimConfig config;
    config.shape = cfg.contains("shape") ? ptk::ModelShape::from_json(cfg["shape"])
                                         : ptk::ModelShape::proxy_0p05b();
    config.init = plan_from_config(cfg);
    config.embed_tying = cfg.value("embed_tying", true);
    config.qk_layernorm = cfg.value("qk_layernorm", false);
    config.seed = cfg.value("seed", seed);
    config.batch = cfg.value("batch", 4);
    config.seq_len = cfg.value("seq_len", 64);
    config.steps = cfg.value("steps", 1);
    config.identity_ffn = cfg.value("identity_ffn", false);
    // Direct knobs for ablation sweeps on top of the chosen preset.
    if (cfg.contains("scale_embed_output")) {
        config.init.scale_embed_output = cfg["scale_embed_output"].get<double>();
    }
    if (cfg.contains("residual_scale")) {
        config.init.residual_scale = cfg["residual_scale"].get<double>();
    }
    if (cfg.contains("embed_std")) {
        config.init.embedding.init_std = cfg["embed_std"].get<double>();
    }
    return config;
}

int run_simulate(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    if (args.seed_set) cfg["seed"] = args.seed;
    const std::string out_dir = args.output.empty() ? "." : args.output;
    fs::create_directories(out_dir);

    json summary = json::array();
    auto run_one = [&](const std::string& name, const json& one_cfg) {
        const auto config = sim_config_from_json(one_cfg, args.seed);
        const auto trace = ptk::simulate_forward(config);
        const auto csv_path = (fs::path(out_dir) / (name + "_trace.csv")).string();
        write_file(csv_path, trace.to_csv());
        const auto alerts =
            ptk::explosion_check(trace, one_cfg.value("var_ratio_cap", 10.0),
                                 one_cfg.value("score_mean_cap", 50.0));
        json alerts_json = json::array();
        for (const auto& a : alerts) {
            alerts_json.push_back({{"step", a.step},
                                   {"layer", a.layer},
                                   {"kind", a.kind},
                                   {"value", a.value}});
        }
        const int layers = config.shape.n_layers;
        summary.push_back({{"name", name},
                           {"trace", csv_path},
                           {"final_residual_var", trace.residual_variance(0, layers)},
                           {"embedding_var", trace.residual_variance(0, 0)},
                           {"alerts", alerts_json},
                           {"explosions", trace.events.size()}});
    };

    if (cfg.contains("ablations")) {
        // Figure-style sweep: each entry overrides the base config.
        const json base = cfg.value("base", json::object());
        for (const auto& variant : cfg["ablations"]) {
            json merged = base;
            for (auto it = variant.begin(); it != variant.end(); ++it) {
                if (it.key() != "name") merged[it.key()] = it.value();
            }
            run_one(variant.value("name", "variant"), merged);
        }
    } else {
        run_one(cfg.value("name", "sim"), cfg);
    }
    const auto summary_path = (fs::path(out_dir) / "simulate_summary.json").string();
    write_file(summary_path, summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_plan_curriculum(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const auto plan_cfg = ptk::PlanConfig::from_json(cfg);
    const auto artifacts = ptk::build_plan(plan_cfg);
    const std::string out_dir = args.output.empty() ? "." : args.output;
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "phase_plan.json").string(),
               artifacts.phase_plan.to_json().dump(2) + "\n");
    write_file((fs::path(out_dir) / "phase_table.txt").string(),
               ptk::phase_table(artifacts.phase_plan));
    std::cout << "phases: " << artifacts.phase_plan.phase_count()
              << ", total tokens: " << artifacts.phase_plan.budget.total() << "\n";
    return 0;
}

int run_plan_schedule(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const auto plan_cfg = ptk::PlanConfig::from_json(cfg);
    const auto artifacts = ptk::build_plan(plan_cfg);
    const std::string out_dir = args.output.empty() ? "." : args.output;
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "schedule.json").string(),
               artifacts.schedule.to_json().dump(2) + "\n");
    write_file((fs::path(out_dir) / "lr_curve.csv").string(),
               ptk::lr_curve_csv(artifacts.schedule, cfg.value("csv_stride", 1)));
    const auto decay = ptk::resolve_decay(artifacts.schedule.eta_max,
                                          ptk::OptimizerHyper{}.weight_decay);
    std::cout << "total steps: " << artifacts.schedule.total_steps
              << ", independent weight decay: " << decay.lambda_independent << "\n";
    return 0;
}

int run_plan_init(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const auto plan_cfg = ptk::PlanConfig::from_json(cfg);
    const auto artifacts = ptk::build_plan(plan_cfg);
    const std::string out_dir = args.output.empty() ? "." : args.output;
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "init_plan.json").string(),
               artifacts.init_plan.to_json().dump(2) + "\n");
    const auto rope = ptk::rope_retarget(
        cfg.value("rope_theta_old", 10'000.0), cfg.value("rope_theta_new", 490'000.0),
        plan_cfg.target.d_head(), cfg.value("old_ctx", 4096), cfg.value("new_ctx", 28'672));
    json rope_json = json::array();
    for (const auto& dim : rope.dims) {
        rope_json.push_back({{"dim_pair", dim.dim_pair},
                             {"freq_old", dim.freq_old},
                             {"freq_new", dim.freq_new},
                             {"wavelength_old", dim.wavelength_old},
                             {"wavelength_new", dim.wavelength_new},
                             {"max_angle_old", dim.max_angle_old},
                             {"max_angle_new", dim.max_angle_new},
                             {"within_trained_range", dim.within_trained_range}});
    }
    write_file((fs::path(out_dir) / "rope_report.json").string(),
               rope_json.dump(2) + "\n");
    std::cout << "m_width: " << artifacts.init_plan.m_width
              << ", sigma_base: " << artifacts.init_plan.qkv.init_std << " (qkv)\n";
    return 0;
}

int run_stats(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    auto docs = ptk::ingest(args.input.empty() ? cfg.value("input", "") : args.input);
    const std::string tokenizer_dir = cfg.value("tokenizer_dir", "");
    if (!tokenizer_dir.empty()) {
        const auto model = model_from_dir(tokenizer_dir);
        for (auto& doc : docs) {
            if (!doc.token_count.has_value()) {
                doc.token_count = static_cast<std::int64_t>(
                    ptk::encode(model, doc.text).token_ids.size());
            }
        }
    }
    const auto s = ptk::stats(docs);
    const auto out = ptk::stats_to_json(s).dump(2) + "\n";
    if (args.output.empty()) {
        std::cout << out;
    } else {
        write_file(args.output, out);
    }
    return 0;
}

int run_tokenize_model_tools(const CommonArgs& args, const std::string& truncate_to,
                             const std::vector<std::string>& removals) {
    // Model maintenance mode of the tokenize subcommand: --truncate-to.
    const json cfg = load_config(args.config_path);
    const auto model = model_from_dir(cfg.value("tokenizer_dir", args.input));
    const auto target = static_cast<std::size_t>(std::stoull(truncate_to));
    const auto cut = ptk::truncate_vocab(model, target, removals);
    const std::string out_dir = args.output.empty() ? "." : args.output;
    fs::create_directories(out_dir);
    ptk::save_bpe_model(cut, (fs::path(out_dir) / "vocab.txt").string(),
                        (fs::path(out_dir) / "merges.txt").string(),
                        (fs::path(out_dir) / "meta.json").string());
    std::cout << "vocab " << model.vocab_size() << " -> " << cut.vocab_size() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pre-training data pipeline and plan toolkit"};
    app.require_subcommand(1);

    std::map<std::string, CommonArgs> common;
    std::string truncate_to;
    std::vector<std::string> removals;
    std::string compression_texts;

    auto* dedup = app.add_subcommand("dedup", "MinHash near-duplicate removal");
    add_common(dedup, common["dedup"]);
    auto* filter = app.add_subcommand("filter", "heuristic and score filtering");
    add_common(filter, common["filter"]);
    auto* decontam = app.add_subcommand("decontam", "benchmark n-gram decontamination");
    add_common(decontam, common["decontam"]);
    auto* tokenize = app.add_subcommand("tokenize", "BPE tokenization / model tools");
    add_common(tokenize, common["tokenize"]);
    tokenize->add_option("--truncate-to", truncate_to, "truncate the vocabulary");
    tokenize->add_option("--remove-token", removals, "tokens to remove while truncating");
    tokenize->add_option("--compression-on", compression_texts,
                         "corpus file: report bytes-per-token instead of tokenizing");
    auto* pack = app.add_subcommand("pack", "fixed-length sequence packing");
    add_common(pack, common["pack"]);
    bool pack_dump = false;
    pack->add_flag("--dump", pack_dump, "also write a human-readable segment dump");
    auto* plan_curriculum =
        app.add_subcommand("plan-curriculum", "stage budgets and phase mixes");
    add_common(plan_curriculum, common["plan-curriculum"]);
    auto* plan_schedule = app.add_subcommand("plan-schedule", "WSD learning-rate curve");
    add_common(plan_schedule, common["plan-schedule"]);
    auto* plan_init = app.add_subcommand("plan-init", "initialization recipe");
    add_common(plan_init, common["plan-init"]);
    auto* simulate = app.add_subcommand("simulate", "forward-only stability simulator");
    add_common(simulate, common["simulate"]);
    auto* stats = app.add_subcommand("stats", "corpus statistics");
    add_common(stats, common["stats"]);
    auto* run = app.add_subcommand("run", "full pipeline with manifest");
    add_common(run, common["run"]);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto t0 = std::chrono::steady_clock::now();
        int rc = 0;
        std::string name;
        if (dedup->parsed()) {
            name = "dedup";
            run_pipeline(pipeline_config(common["dedup"], {"dedup"}));
        } else if (filter->parsed()) {
            name = "filter";
            run_pipeline(pipeline_config(common["filter"], {"filter"}));
        } else if (decontam->parsed()) {
            name = "decontam";
            run_pipeline(pipeline_config(common["decontam"], {"decontam"}));
        } else if (tokenize->parsed()) {
            name = "tokenize";
            if (!truncate_to.empty()) {
                rc = run_tokenize_model_tools(common["tokenize"], truncate_to, removals);
            } else if (!compression_texts.empty()) {
                const json cfg = load_config(common["tokenize"].config_path);
                const auto model = model_from_dir(cfg.value("tokenizer_dir", ""));
                std::vector<std::string> texts;
                for (const auto& doc : ptk::ingest(compression_texts)) {
                    texts.push_back(doc.text);
                }
                std::cout << "compression_rate: " << ptk::compression_rate(model, texts)
                          << " bytes/token\n";
            } else {
                run_pipeline(pipeline_config(common["tokenize"], {"tokenize"}));
            }
        } else if (pack->parsed()) {
            name = "pack";
            const auto config = pipeline_config(common["pack"], {"tokenize", "pack"});
            run_pipeline(config);
            if (pack_dump) {
                const auto packed_path =
                    (fs::path(config.output_dir) / "02_packed.bin").string();
                write_file((fs::path(config.output_dir) / "02_packed.txt").string(),
                           ptk::packed_debug_dump(ptk::load_packed(packed_path)));
            }
        } else if (plan_curriculum->parsed()) {
            name = "plan-curriculum";
            rc = run_plan_curriculum(common["plan-curriculum"]);
        } else if (plan_schedule->parsed()) {
            name = "plan-schedule";
            rc = run_plan_schedule(common["plan-schedule"]);
        } else if (plan_init->parsed()) {
            name = "plan-init";
            rc = run_plan_init(common["plan-init"]);
        } else if (simulate->parsed()) {
            name = "simulate";
            rc = run_simulate(common["simulate"]);
        } else if (stats->parsed()) {
            name = "stats";
            rc = run_stats(common["stats"]);
        } else if (run->parsed()) {
            name = "run";
            const auto manifest = run_pipeline(
                pipeline_config(common["run"], load_config(common["run"].config_path)
                                                   .value("stages",
                                                          std::vector<std::string>{
                                                              "dedup", "filter", "decontam",
                                                              "tokenize", "pack"})));
            std::cout << manifest.dump();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "%s finished in %.2fs\n", name.c_str(), seconds);
        return rc;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
