#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "ptk/bpe.hpp"
#include "ptk/corpus_io.hpp"
#include "ptk/curriculum.hpp"
#include "ptk/decontam.hpp"
#include "ptk/document.hpp"
#include "ptk/filter.hpp"
#include "ptk/initplan.hpp"
#include "ptk/minhash.hpp"
#include "ptk/packing.hpp"
#include "ptk/pipeline.hpp"
#include "ptk/rng.hpp"
#include "ptk/schedule.hpp"
#include "ptk/stability.hpp"

namespace py = pybind11;
using namespace ptk;

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw std::invalid_argument("ragged matrix");
        }
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "pre-training preparation toolkit (C++ core)";

    py::enum_<Domain>(m, "Domain")
        .value("web", Domain::web)
        .value("chinese", Domain::chinese)
        .value("code", Domain::code)
        .value("math", Domain::math)
        .value("general_knowledge", Domain::general_knowledge)
        .value("book", Domain::book)
        .value("encyclopedia", Domain::encyclopedia)
        .value("instruction", Domain::instruction)
        .value("synthetic", Domain::synthetic);

    py::class_<Document>(m, "Document")
        .def(py::init([](std::string id, std::string text, Domain domain,
                         std::string source, std::optional<std::int64_t> token_count,
                         std::optional<int> quality_score, bool is_instruction) {
                 Document d;
                 d.id = std::move(id);
                 d.text = std::move(text);
                 d.domain = domain;
                 d.source = std::move(source);
                 d.token_count = token_count;
                 d.quality_score = quality_score;
                 d.is_instruction = is_instruction;
                 d.length_chars = utf8_length(d.text);
                 return d;
             }),
             py::arg("id"), py::arg("text"), py::arg("domain") = Domain::web,
             py::arg("source") = "", py::arg("token_count") = std::nullopt,
             py::arg("quality_score") = std::nullopt, py::arg("is_instruction") = false)
        .def_readwrite("id", &Document::id)
        .def_readwrite("text", &Document::text)
        .def_readwrite("domain", &Document::domain)
        .def_readwrite("source", &Document::source)
        .def_readwrite("token_count", &Document::token_count)
        .def_readwrite("quality_score", &Document::quality_score)
        .def_readwrite("is_instruction", &Document::is_instruction)
        .def_readonly("length_chars", &Document::length_chars)
        .def("__repr__", [](const Document& d) {
            return "Document(id='" + d.id + "', domain=" + domain_name(d.domain) + ")";
        });

    m.def("ingest", &ingest, py::arg("path"));
    m.def("emit", &emit, py::arg("docs"), py::arg("path"));
    m.def(
        "stats",
        [](const std::vector<Document>& docs) { return stats_to_json(stats(docs)).dump(); },
        py::arg("docs"), "Corpus statistics as a JSON string");

    // Tokenizer.
    py::class_<Encoding>(m, "Encoding")
        .def_readonly("token_ids", &Encoding::token_ids)
        .def_readonly("token_strings", &Encoding::token_strings);
    py::class_<BpeModel>(m, "BpeModel")
        .def_readonly("dropout_rate", &BpeModel::dropout_rate)
        .def_readonly("digit_split", &BpeModel::digit_split)
        .def_property_readonly("vocab_size", &BpeModel::vocab_size)
        .def("validate", &BpeModel::validate);
    m.def(
        "make_bpe_model",
        [](const std::vector<std::pair<std::string, std::string>>& merges,
           const std::vector<std::string>& reserved, double dropout_rate,
           bool digit_split) {
            return make_bpe_model(merges, reserved, dropout_rate, digit_split);
        },
        py::arg("merges"), py::arg("reserved_tokens") = std::vector<std::string>{},
        py::arg("dropout_rate") = 0.0, py::arg("digit_split") = false);
    m.def(
        "encode",
        [](const BpeModel& model, const std::string& text,
           std::optional<std::uint64_t> seed) {
            if (seed.has_value()) {
                Rng rng(*seed);
                return encode(model, text, &rng);
            }
            return encode(model, text);
        },
        py::arg("model"), py::arg("text"), py::arg("seed") = std::nullopt,
        "Deterministic when no seed is given; BPE-dropout otherwise");
    m.def("decode", &decode, py::arg("model"), py::arg("token_ids"));
    m.def("encode_dropout_stats", &encode_dropout_stats, py::arg("model"),
          py::arg("texts"), py::arg("rate"), py::arg("seed"));
    m.def("truncate_vocab", &truncate_vocab, py::arg("model"), py::arg("target_size"),
          py::arg("removals") = std::vector<std::string>{});
    m.def("compression_rate", &compression_rate, py::arg("model"), py::arg("texts"));
    m.def("save_bpe_model", &save_bpe_model, py::arg("model"), py::arg("vocab_path"),
          py::arg("merges_path"), py::arg("meta_path") = "");
    m.def("load_bpe_model", &load_bpe_model, py::arg("vocab_path"),
          py::arg("merges_path"), py::arg("meta_path") = "");
    m.def("escape_token", &escape_token, py::arg("raw"));
    m.def("unescape_token", &unescape_token, py::arg("escaped"));

    // Dedup.
    py::class_<DedupConfig>(m, "DedupConfig")
        .def(py::init<>())
        .def_readwrite("num_permutations", &DedupConfig::num_permutations)
        .def_readwrite("bands", &DedupConfig::bands)
        .def_readwrite("rows", &DedupConfig::rows)
        .def_readwrite("shingle_size", &DedupConfig::shingle_size)
        .def_readwrite("seed", &DedupConfig::seed);
    py::class_<MinHashSignature>(m, "MinHashSignature")
        .def_readonly("values", &MinHashSignature::values);
    m.def("shingles",
          [](const std::string& text, int k) {
              const auto s = shingles(text, k);
              return std::vector<std::uint64_t>(s.begin(), s.end());
          });
    m.def("signature",
          [](const std::vector<std::uint64_t>& shingle_list, const DedupConfig& config) {
              return signature(
                  std::unordered_set<std::uint64_t>(shingle_list.begin(), shingle_list.end()),
                  config);
          });
    m.def("estimate_jaccard", &estimate_jaccard);
    m.def("jaccard_exact", [](const std::vector<std::uint64_t>& a,
                              const std::vector<std::uint64_t>& b) {
        return jaccard_exact(std::unordered_set<std::uint64_t>(a.begin(), a.end()),
                             std::unordered_set<std::uint64_t>(b.begin(), b.end()));
    });
    m.def("lsh_candidate_probability", &lsh_candidate_probability);
    py::class_<DedupResult>(m, "DedupResult")
        .def_readonly("kept", &DedupResult::kept)
        .def_readonly("clusters", &DedupResult::clusters);
    m.def("dedup_corpus", &dedup_corpus, py::arg("docs"), py::arg("config"),
          py::arg("threshold") = 0.8);

    // Filtering.
    py::enum_<RuleKind>(m, "RuleKind")
        .value("min_tokens", RuleKind::min_tokens)
        .value("code_metrics", RuleKind::code_metrics)
        .value("synthetic_answer", RuleKind::synthetic_answer)
        .value("score_gate", RuleKind::score_gate);
    py::class_<FilterRule>(m, "FilterRule")
        .def(py::init<>())
        .def_readwrite("kind", &FilterRule::kind)
        .def_readwrite("min_tokens", &FilterRule::min_tokens)
        .def_readwrite("max_avg_line_length", &FilterRule::max_avg_line_length)
        .def_readwrite("min_alpha_ratio", &FilterRule::min_alpha_ratio)
        .def_readwrite("answer_marker", &FilterRule::answer_marker)
        .def_readwrite("max_repetition_cover", &FilterRule::max_repetition_cover)
        .def_readwrite("repetition_window", &FilterRule::repetition_window)
        .def_readwrite("min_keep_score", &FilterRule::min_keep_score);
    py::class_<FilterDecision>(m, "FilterDecision")
        .def_readonly("keep", &FilterDecision::keep)
        .def_readonly("reason", &FilterDecision::reason);
    py::class_<FilterReport>(m, "FilterReport")
        .def_readonly("input_count", &FilterReport::input_count)
        .def_readonly("kept_count", &FilterReport::kept_count)
        .def_readonly("removed_by_rule", &FilterReport::removed_by_rule);
    py::class_<FilterRunResult>(m, "FilterRunResult")
        .def_readonly("kept", &FilterRunResult::kept)
        .def_readonly("report", &FilterRunResult::report)
        .def_readonly("removal_log", &FilterRunResult::removal_log);
    m.def("heuristic_filter", &heuristic_filter, py::arg("doc"), py::arg("rules"));
    m.def("score_filter", &score_filter, py::arg("doc"));
    m.def("run_filters", &run_filters, py::arg("docs"), py::arg("rules"));

    // Decontamination.
    py::class_<ContaminationSet>(m, "ContaminationSet")
        .def_readonly("n", &ContaminationSet::n)
        .def_property_readonly("size", &ContaminationSet::size);
    m.def("build_contamination_set", &build_contamination_set, py::arg("benchmarks"),
          py::arg("model"), py::arg("n") = 20, py::arg("max_occurrences") = 4,
          py::arg("store_tuples") = false);
    m.def("contamination_ratio", &contamination_ratio, py::arg("doc"), py::arg("set"),
          py::arg("model"));
    py::class_<DecontamResult>(m, "DecontamResult")
        .def_readonly("kept", &DecontamResult::kept)
        .def_readonly("removal_log", &DecontamResult::removal_log);
    m.def("decontaminate", &decontaminate, py::arg("docs"), py::arg("set"),
          py::arg("model"), py::arg("threshold") = 0.10);
    m.def("save_contamination_set", &save_contamination_set);
    m.def("load_contamination_set", &load_contamination_set);

    // Curriculum.
    py::enum_<Stage>(m, "Stage")
        .value("warmup", Stage::warmup)
        .value("stable", Stage::stable)
        .value("annealing", Stage::annealing);
    py::class_<StageBudget>(m, "StageBudget")
        .def_readonly("warmup_tokens", &StageBudget::warmup_tokens)
        .def_readonly("stable_tokens", &StageBudget::stable_tokens)
        .def_readonly("anneal_tokens", &StageBudget::anneal_tokens)
        .def_readonly("phase_size_tokens", &StageBudget::phase_size_tokens)
        .def_readonly("phase_count", &StageBudget::phase_count)
        .def("total", &StageBudget::total);
    m.def("stage_budgets", &stage_budgets, py::arg("total_tokens"),
          py::arg("warmup_tokens"), py::arg("anneal_ratio"), py::arg("phase_size"));
    py::class_<MixSpec>(m, "MixSpec")
        .def(py::init<>())
        .def_readwrite("proportions", &MixSpec::proportions)
        .def_readwrite("instruction_fraction", &MixSpec::instruction_fraction)
        .def_readwrite("long_context_fraction", &MixSpec::long_context_fraction)
        .def("validate", &MixSpec::validate, py::arg("stable_stage") = false);
    m.def("default_stable_mix", &default_stable_mix);
    m.def("default_annealing_mix", &default_annealing_mix);
    py::class_<PhaseEntry>(m, "PhaseEntry")
        .def_readonly("phase_index", &PhaseEntry::phase_index)
        .def_readonly("tokens", &PhaseEntry::tokens)
        .def_readonly("mix", &PhaseEntry::mix)
        .def_readonly("stage", &PhaseEntry::stage);
    py::class_<PhasePlan>(m, "PhasePlan")
        .def_readonly("budget", &PhasePlan::budget)
        .def_readonly("entries", &PhasePlan::entries)
        .def("phase_count", &PhasePlan::phase_count)
        .def("validate", &PhasePlan::validate, py::arg("cap_points") = 3.0)
        .def("to_json", [](const PhasePlan& p) { return p.to_json().dump(); });
    m.def("plan_phases", &plan_phases, py::arg("budget"), py::arg("start_mix"),
          py::arg("target_mix_by_stage"), py::arg("observed_adjustments") = MixAdjustments{},
          py::arg("cap_points") = 3.0);
    m.def("annealing_mix", &annealing_mix);
    m.def("validate_shift", [](const MixSpec& a, const MixSpec& b, double cap) {
        std::vector<std::pair<Domain, double>> out;
        for (const auto& v : validate_shift(a, b, cap)) {
            out.emplace_back(v.domain, v.delta_points);
        }
        return out;
    });
    m.def("phase_table", &phase_table);

    // Packing.
    py::class_<TokenizedDoc>(m, "TokenizedDoc")
        .def(py::init([](std::string id, std::vector<std::int32_t> tokens,
                         bool is_instruction) {
                 return TokenizedDoc{std::move(id), std::move(tokens), is_instruction};
             }),
             py::arg("id"), py::arg("tokens"), py::arg("is_instruction") = false)
        .def_readwrite("id", &TokenizedDoc::id)
        .def_readwrite("tokens", &TokenizedDoc::tokens)
        .def_readwrite("is_instruction", &TokenizedDoc::is_instruction);
    py::enum_<SegmentKind>(m, "SegmentKind")
        .value("document", SegmentKind::document)
        .value("backfill", SegmentKind::backfill)
        .value("pad", SegmentKind::pad);
    py::class_<Segment>(m, "Segment")
        .def_readonly("doc_id", &Segment::doc_id)
        .def_readonly("start", &Segment::start)
        .def_readonly("end", &Segment::end)
        .def_readonly("kind", &Segment::kind);
    py::class_<PackedSequence>(m, "PackedSequence")
        .def_readonly("token_ids", &PackedSequence::token_ids)
        .def_readonly("segments", &PackedSequence::segments)
        .def("pad_replaced_spans", &PackedSequence::pad_replaced_spans);
    py::class_<BackfillReservoir>(m, "BackfillReservoir")
        .def(py::init<>())
        .def(py::init<std::vector<TokenizedDoc>>())
        .def("push", &BackfillReservoir::push)
        .def("empty", &BackfillReservoir::empty);
    m.def("pack_pretrain", &pack_pretrain, py::arg("docs"), py::arg("L"),
          py::arg("pad_id") = 0);
    m.def("pack_instruction_aware", &pack_instruction_aware, py::arg("docs"), py::arg("L"),
          py::arg("backfill"), py::arg("pad_id") = 0);
    m.def("doc_mask_segments", &doc_mask_segments);
    m.def("save_packed", &save_packed);
    m.def("load_packed",
          [](const std::string& path) { return load_packed(path, nullptr); });
    m.def("packed_debug_dump", &packed_debug_dump);

    // Schedule.
    py::class_<ScheduleSpec>(m, "ScheduleSpec")
        .def(py::init<>())
        .def_readwrite("eta_max", &ScheduleSpec::eta_max)
        .def_readwrite("warmup_steps", &ScheduleSpec::warmup_steps)
        .def_readwrite("total_steps", &ScheduleSpec::total_steps)
        .def_readwrite("anneal_steps", &ScheduleSpec::anneal_steps)
        .def_readwrite("floor_lr", &ScheduleSpec::floor_lr)
        .def_readwrite("tail_constant_steps", &ScheduleSpec::tail_constant_steps)
        .def("stable_steps", &ScheduleSpec::stable_steps)
        .def_static("full_run_default", &ScheduleSpec::full_run_default);
    m.def("one_sqrt", &one_sqrt, py::arg("n"), py::arg("N"), py::arg("N_annealing"));
    m.def("wsd_lr", &wsd_lr, py::arg("n"), py::arg("spec"));
    py::class_<DecayResolution>(m, "DecayResolution")
        .def_readonly("eta", &DecayResolution::eta)
        .def_readonly("lambda_coupled", &DecayResolution::lambda_coupled)
        .def_readonly("lambda_independent", &DecayResolution::lambda_independent);
    m.def("resolve_decay", &resolve_decay, py::arg("eta"), py::arg("lambda_coupled"));
    m.def("tokens_to_steps", &tokens_to_steps, py::arg("tokens"), py::arg("batch_tokens"));
    m.def("lr_curve_csv", &lr_curve_csv, py::arg("spec"), py::arg("stride") = 1);

    // Init plan.
    py::class_<ModelShape>(m, "ModelShape")
        .def(py::init([](int n_layers, int d_model, int d_ffn, int n_heads, int n_kv_heads,
                         int vocab_size) {
                 ModelShape s{n_layers, d_model, d_ffn, n_heads, n_kv_heads, vocab_size};
                 s.validate();
                 return s;
             }),
             py::arg("n_layers"), py::arg("d_model"), py::arg("d_ffn"), py::arg("n_heads"),
             py::arg("n_kv_heads"), py::arg("vocab_size"))
        .def_readonly("n_layers", &ModelShape::n_layers)
        .def_readonly("d_model", &ModelShape::d_model)
        .def_readonly("d_ffn", &ModelShape::d_ffn)
        .def_readonly("n_heads", &ModelShape::n_heads)
        .def_readonly("n_kv_heads", &ModelShape::n_kv_heads)
        .def_readonly("vocab_size", &ModelShape::vocab_size)
        .def("d_head", &ModelShape::d_head)
        .def_static("target_2b", &ModelShape::target_2b)
        .def_static("proxy_0p05b", &ModelShape::proxy_0p05b)
        .def_static("proxy_0p2b", &ModelShape::proxy_0p2b)
        .def_static("proxy_0p4b", &ModelShape::proxy_0p4b);
    m.def("sigma_base", &sigma_base, py::arg("d_model"));
    py::class_<ClassPlan>(m, "ClassPlan")
        .def_readonly("init_std", &ClassPlan::init_std)
        .def_readonly("learning_rate", &ClassPlan::learning_rate)
        .def_readonly("wesar_alpha", &ClassPlan::wesar_alpha);
    py::class_<InitPlan>(m, "InitPlan")
        .def_readonly("embedding", &InitPlan::embedding)
        .def_readonly("qkv", &InitPlan::qkv)
        .def_readonly("attn_out", &InitPlan::attn_out)
        .def_readonly("ffn_in", &InitPlan::ffn_in)
        .def_readonly("ffn_down", &InitPlan::ffn_down)
        .def_readonly("logits", &InitPlan::logits)
        .def_readonly("scale_embed_output", &InitPlan::scale_embed_output)
        .def_readonly("residual_scale", &InitPlan::residual_scale)
        .def_readonly("attn_scale", &InitPlan::attn_scale)
        .def_readonly("logits_scale", &InitPlan::logits_scale)
        .def_readonly("m_width", &InitPlan::m_width)
        .def("to_json", [](const InitPlan& p) { return p.to_json().dump(); });
    m.def("mup_plan", &mup_plan, py::arg("target"), py::arg("proxy"), py::arg("eta_base"),
          py::arg("sigma"), py::arg("embed_std") = 0.1);
    m.def("scaled_init_plan", &scaled_init_plan, py::arg("shape"), py::arg("sigma"),
          py::arg("eta_base") = 0.01);
    m.def("default_init_plan", &default_init_plan, py::arg("shape"),
          py::arg("init_std") = 0.02, py::arg("eta_base") = 0.01);
    py::class_<WesarParams>(m, "WesarParams")
        .def_readonly("init_std_tilde", &WesarParams::init_std_tilde)
        .def_readonly("alpha", &WesarParams::alpha)
        .def_readonly("effective_std", &WesarParams::effective_std);
    m.def("wesar", &wesar, py::arg("sigma"), py::arg("gamma"));
    py::class_<RopeDimReport>(m, "RopeDimReport")
        .def_readonly("dim_pair", &RopeDimReport::dim_pair)
        .def_readonly("freq_old", &RopeDimReport::freq_old)
        .def_readonly("freq_new", &RopeDimReport::freq_new)
        .def_readonly("wavelength_old", &RopeDimReport::wavelength_old)
        .def_readonly("wavelength_new", &RopeDimReport::wavelength_new)
        .def_readonly("max_angle_old", &RopeDimReport::max_angle_old)
        .def_readonly("max_angle_new", &RopeDimReport::max_angle_new)
        .def_readonly("within_trained_range", &RopeDimReport::within_trained_range);
    py::class_<RopeReport>(m, "RopeReport").def_readonly("dims", &RopeReport::dims);
    m.def("rope_retarget", &rope_retarget, py::arg("theta_old"), py::arg("theta_new"),
          py::arg("d_head"), py::arg("old_ctx"), py::arg("new_ctx"));
    m.def("merge_checkpoints", &merge_checkpoints, py::arg("checkpoints"),
          py::arg("weights") = std::vector<double>{});

    // Stability simulator.
    py::enum_<IndicatorModule>(m, "IndicatorModule")
        .value("attention_scores", IndicatorModule::attention_scores)
        .value("attention_out", IndicatorModule::attention_out)
        .value("ffn_out", IndicatorModule::ffn_out)
        .value("rmsnorm_out", IndicatorModule::rmsnorm_out)
        .value("residual_stream", IndicatorModule::residual_stream);
    py::class_<TraceRecord>(m, "TraceRecord")
        .def_readonly("step", &TraceRecord::step)
        .def_readonly("layer", &TraceRecord::layer)
        .def_readonly("module", &TraceRecord::module)
        .def_readonly("mean", &TraceRecord::mean)
        .def_readonly("var", &TraceRecord::var)
        .def_readonly("rms", &TraceRecord::rms);
    py::class_<IndicatorTrace>(m, "IndicatorTrace")
        .def_readonly("records", &IndicatorTrace::records)
        .def("residual_variance", &IndicatorTrace::residual_variance)
        .def("to_csv", &IndicatorTrace::to_csv);
    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("shape", &SimConfig::shape)
        .def_readwrite("init", &SimConfig::init)
        .def_readwrite("embed_tying", &SimConfig::embed_tying)
        .def_readwrite("qk_layernorm", &SimConfig::qk_layernorm)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("batch", &SimConfig::batch)
        .def_readwrite("seq_len", &SimConfig::seq_len)
        .def_readwrite("steps", &SimConfig::steps)
        .def_readwrite("identity_ffn", &SimConfig::identity_ffn);
    m.def("simulate_forward", &simulate_forward, py::arg("config"));
    py::class_<StabilityAlert>(m, "StabilityAlert")
        .def_readonly("step", &StabilityAlert::step)
        .def_readonly("layer", &StabilityAlert::layer)
        .def_readonly("kind", &StabilityAlert::kind)
        .def_readonly("value", &StabilityAlert::value);
    m.def("explosion_check", &explosion_check, py::arg("trace"),
          py::arg("var_ratio_cap") = 10.0, py::arg("score_mean_cap") = 50.0);
    m.def(
        "rmsnorm",
        [](const std::vector<double>& x, std::optional<std::vector<double>> gain,
           double eps) {
            Eigen::VectorXd xv =
                Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
            Eigen::VectorXd gv;
            if (gain.has_value()) {
                gv = Eigen::Map<const Eigen::VectorXd>(gain->data(),
                                                       static_cast<Eigen::Index>(gain->size()));
            } else {
                gv = Eigen::VectorXd::Ones(xv.size());
            }
            const auto out = rmsnorm(xv, gv, eps);
            return std::vector<double>(out.data(), out.data() + out.size());
        },
        py::arg("x"), py::arg("gain") = std::nullopt, py::arg("eps") = 1e-6);
    m.def(
        "attn_scores",
        [](const std::vector<std::vector<double>>& X,
           const std::vector<std::vector<double>>& Wq,
           const std::vector<std::vector<double>>& Wk, double scale) {
            const auto S = attn_scores(to_matrix(X), to_matrix(Wq), to_matrix(Wk), scale);
            std::vector<std::vector<double>> out(static_cast<std::size_t>(S.rows()));
            for (Eigen::Index i = 0; i < S.rows(); ++i) {
                out[static_cast<std::size_t>(i)].assign(S.row(i).begin(), S.row(i).end());
            }
            return out;
        },
        py::arg("X"), py::arg("Wq"), py::arg("Wk"), py::arg("scale") = 1.0);
    m.def(
        "attn_score_grad_check",
        [](const std::vector<std::vector<double>>& X,
           const std::vector<std::vector<double>>& Wq,
           const std::vector<std::vector<double>>& Wk, double perturbation) {
            return attn_score_grad_check(to_matrix(X), to_matrix(Wq), to_matrix(Wk),
                                         perturbation);
        },
        py::arg("X"), py::arg("Wq"), py::arg("Wk"), py::arg("perturbation") = 1e-5);
    m.def("zloss", &zloss, py::arg("logits"), py::arg("zeta") = 1e-4);
    m.def("log_sum_exp", &log_sum_exp, py::arg("logits"));

    // Pipeline.
    py::class_<RunManifest>(m, "RunManifest")
        .def("dump", &RunManifest::dump)
        .def_property_readonly("json",
                               [](const RunManifest& m_) { return m_.json.dump(); });
    m.def(
        "run_pipeline",
        [](const std::string& config_json) {
            return run_pipeline(PipelineConfig::from_json(nlohmann::json::parse(config_json)));
        },
        py::arg("config_json"), "Run the staged pipeline from a JSON config string");

    m.attr("__version__") = "0.1.0";
}
