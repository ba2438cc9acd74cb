#include "ptk/initplan.hpp"

#include <cmath>
#include <stdexcept>

namespace ptk {

void ModelShape::validate() const {
    if (n_layers <= 0 || d_model <= 0 || d_ffn <= 0 || n_heads <= 0 ||
        n_kv_heads <= 0 || vocab_size <= 0) {
        throw std::invalid_argument("ModelShape: all sizes must be positive");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("ModelShape: d_model must be divisible by n_heads");
    }
    if (n_heads % n_kv_heads != 0) {
        throw std::invalid_argument("ModelShape: n_heads must be divisible by n_kv_heads");
    }
}

nlohmann::json ModelShape::to_json() const {
    return {
        {"n_layers", n_layers},   {"d_model", d_model},
        {"d_ffn", d_ffn},         {"n_heads", n_heads},
        {"n_kv_heads", n_kv_heads}, {"vocab_size", vocab_size},
    };
}

ModelShape ModelShape::from_json(const nlohmann::json& j) {
    ModelShape s;
    s.n_layers = j.at("n_layers").get<int>();
    s.d_model = j.at("d_model").get<int>();
    s.d_ffn = j.at("d_ffn").get<int>();
    s.n_heads = j.at("n_heads").get<int>();
    s.n_kv_heads = j.at("n_kv_heads").get<int>();
    s.vocab_size = j.at("vocab_size").get<int>();
    s.validate();
    return s;
}

ModelShape ModelShape::target_2b() { return {56, 1920, 4800, 30, 6, 99000}; }
ModelShape ModelShape::proxy_0p05b() { return {32, 256, 640, 2, 2, 99000}; }
ModelShape ModelShape::proxy_0p2b() { return {30, 576, 1536, 9, 3, 99000}; }
ModelShape ModelShape::proxy_0p4b() { return {56, 576, 1536, 9, 3, 99000}; }

double sigma_base(int d_model) {
    if (d_model <= 0) throw std::invalid_argument("sigma_base: d_model must be positive");
    return std::sqrt(2.0 / (5.0 * static_cast<double>(d_model)));
}

const char* matrix_class_name(MatrixClass c) {
    switch (c) {
        case MatrixClass::embedding: return "embedding";
        case MatrixClass::qkv: return "qkv";
        case MatrixClass::attn_out: return "attn_out";
        case MatrixClass::ffn_in: return "ffn_in";
        case MatrixClass::ffn_down: return "ffn_down";
        case MatrixClass::logits: return "logits";
    }
    throw std::invalid_argument("unknown matrix class");
}

const ClassPlan& InitPlan::for_class(MatrixClass c) const {
    switch (c) {
        case MatrixClass::embedding: return embedding;
        case MatrixClass::qkv: return qkv;
        case MatrixClass::attn_out: return attn_out;
        case MatrixClass::ffn_in: return ffn_in;
        case MatrixClass::ffn_down: return ffn_down;
        case MatrixClass::logits: return logits;
    }
    throw std::invalid_argument("unknown matrix class");
}

namespace {

nlohmann::json class_to_json(const ClassPlan& c) {
    return {
        {"init_std", c.init_std},
        {"learning_rate", c.learning_rate},
        {"wesar_alpha", c.wesar_alpha},
    };
}

ClassPlan class_from_json(const nlohmann::json& j) {
    return {
        j.at("init_std").get<double>(),
        j.at("learning_rate").get<double>(),
        j.value("wesar_alpha", 1.0),
    };
}

// Alpha per class against the common re-parametrized std; with
// sigma_tilde == 0 the overlay is disabled and alpha stays 1.
void assign_wesar_alphas(InitPlan& plan, double sigma_tilde) {
    plan.wesar_sigma_tilde = sigma_tilde;
    if (sigma_tilde <= 0.0) return;
    for (ClassPlan* c : {&plan.embedding, &plan.qkv, &plan.attn_out,
                         &plan.ffn_in, &plan.ffn_down, &plan.logits}) {
        c->wesar_alpha = c->init_std / sigma_tilde;
    }
}

} // namespace

nlohmann::json InitPlan::to_json() const {
    return {
        {"embedding", class_to_json(embedding)},
        {"qkv", class_to_json(qkv)},
        {"attn_out", class_to_json(attn_out)},
        {"ffn_in", class_to_json(ffn_in)},
        {"ffn_down", class_to_json(ffn_down)},
        {"logits", class_to_json(logits)},
        {"scale_embed_output", scale_embed_output},
        {"residual_scale", residual_scale},
        {"attn_scale", attn_scale},
        {"logits_scale", logits_scale},
        {"m_width", m_width},
        {"wesar_sigma_tilde", wesar_sigma_tilde},
    };
}

InitPlan InitPlan::from_json(const nlohmann::json& j) {
    InitPlan plan;
    plan.embedding = class_from_json(j.at("embedding"));
    plan.qkv = class_from_json(j.at("qkv"));
    plan.attn_out = class_from_json(j.at("attn_out"));
    plan.ffn_in = class_from_json(j.at("ffn_in"));
    plan.ffn_down = class_from_json(j.at("ffn_down"));
    plan.logits = class_from_json(j.at("logits"));
    plan.scale_embed_output = j.value("scale_embed_output", 1.0);
    plan.residual_scale = j.value("residual_scale", 1.0);
    plan.attn_scale = j.at("attn_scale").get<double>();
    plan.logits_scale = j.value("logits_scale", 1.0);
    plan.m_width = j.value("m_width", 1.0);
    plan.wesar_sigma_tilde = j.value("wesar_sigma_tilde", 0.0);
    return plan;
}

InitPlan mup_plan(const ModelShape& target, const ModelShape& proxy,
                  double eta_base, double sigma, double embed_std) {
    target.validate();
    proxy.validate();
    if (eta_base <= 0.0 || sigma <= 0.0 || embed_std <= 0.0) {
        throw std::invalid_argument("mup_plan: eta_base, sigma, embed_std must be positive");
    }
    const double m_width =
        static_cast<double>(target.d_model) / static_cast<double>(proxy.d_model);
    const double matrix_lr = eta_base / m_width;

    InitPlan plan;
    plan.m_width = m_width;
    plan.embedding = {embed_std, eta_base, 1.0};
    plan.qkv = {sigma / std::sqrt(m_width), matrix_lr, 1.0};
    plan.ffn_in = plan.qkv;
    plan.attn_out = {sigma / std::sqrt(2.0 * m_width * target.n_layers), matrix_lr, 1.0};
    plan.ffn_down = plan.attn_out;
    plan.logits = {embed_std, eta_base, 1.0}; // tied with the embedding
    plan.scale_embed_output = 10.0;
    plan.residual_scale = 1.4 / std::sqrt(static_cast<double>(target.n_layers));
    plan.attn_scale = 1.0 / std::sqrt(static_cast<double>(target.d_head()));
    plan.logits_scale = 1.0;
    assign_wesar_alphas(plan, sigma);
    return plan;
}

InitPlan scaled_init_plan(const ModelShape& shape, double sigma, double eta_base) {
    shape.validate();
    if (sigma <= 0.0) throw std::invalid_argument("scaled_init_plan: sigma must be positive");
    InitPlan plan;
    plan.m_width = 1.0;
    plan.embedding = {sigma, eta_base, 1.0};
    plan.qkv = {sigma, eta_base, 1.0};
    plan.ffn_in = plan.qkv;
    plan.attn_out = {sigma / std::sqrt(2.0 * shape.n_layers), eta_base, 1.0};
    plan.ffn_down = plan.attn_out;
    plan.logits = {sigma, eta_base, 1.0};
    plan.scale_embed_output = 1.0;
    plan.residual_scale = 1.0;
    plan.attn_scale = 1.0 / std::sqrt(static_cast<double>(shape.d_head()));
    plan.logits_scale = 1.0;
    return plan;
}

InitPlan default_init_plan(const ModelShape& shape, double init_std, double eta_base) {
    shape.validate();
    if (init_std <= 0.0) throw std::invalid_argument("default_init_plan: std must be positive");
    InitPlan plan;
    plan.m_width = 1.0;
    const ClassPlan uniform{init_std, eta_base, 1.0};
    plan.embedding = uniform;
    plan.qkv = uniform;
    plan.attn_out = uniform;
    plan.ffn_in = uniform;
    plan.ffn_down = uniform;
    plan.logits = uniform;
    plan.scale_embed_output = 1.0;
    plan.residual_scale = 1.0;
    plan.attn_scale = 1.0 / std::sqrt(static_cast<double>(shape.d_head()));
    plan.logits_scale = 1.0;
    return plan;
}

WesarParams wesar(double sigma, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("wesar: gamma must be positive");
    if (sigma <= 0.0) throw std::invalid_argument("wesar: sigma must be positive");
    return {sigma, 1.0 / gamma, sigma / gamma};
}

RopeReport rope_retarget(double theta_old, double theta_new, int d_head,
                         std::int64_t old_ctx, std::int64_t new_ctx) {
    if (theta_old <= 0.0 || theta_new <= 0.0) {
        throw std::invalid_argument("rope_retarget: thetas must be positive");
    }
    if (d_head <= 0 || d_head % 2 != 0) {
        throw std::invalid_argument("rope_retarget: d_head must be positive and even");
    }
    if (old_ctx <= 0 || new_ctx <= 0) {
        throw std::invalid_argument("rope_retarget: context lengths must be positive");
    }
    RopeReport report;
    report.theta_old = theta_old;
    report.theta_new = theta_new;
    report.old_ctx = old_ctx;
    report.new_ctx = new_ctx;
    const double two_pi = 2.0 * M_PI;
    for (int i = 0; i < d_head / 2; ++i) {
        RopeDimReport dim;
        dim.dim_pair = i;
        const double exponent = -2.0 * static_cast<double>(i) / static_cast<double>(d_head);
        dim.freq_old = std::pow(theta_old, exponent);
        dim.freq_new = std::pow(theta_new, exponent);
        dim.wavelength_old = two_pi / dim.freq_old;
        dim.wavelength_new = two_pi / dim.freq_new;
        dim.max_angle_old = static_cast<double>(old_ctx - 1) * dim.freq_old;
        dim.max_angle_new = static_cast<double>(new_ctx - 1) * dim.freq_new;
        // A dimension that completed a full period during training never
        // sees an out-of-distribution angle.
        dim.within_trained_range =
            dim.max_angle_new <= dim.max_angle_old || dim.max_angle_old >= two_pi;
        report.dims.push_back(dim);
    }
    return report;
}

std::vector<double> merge_checkpoints(
    const std::vector<std::vector<double>>& checkpoints,
    const std::vector<double>& weights) {
    if (checkpoints.empty()) {
        throw std::invalid_argument("merge_checkpoints: no checkpoints given");
    }
    const std::size_t size = checkpoints.front().size();
    for (const auto& ckpt : checkpoints) {
        if (ckpt.size() != size) {
            throw std::invalid_argument("merge_checkpoints: checkpoint shape mismatch");
        }
    }
    std::vector<double> w = weights;
    if (w.empty()) {
        w.assign(checkpoints.size(), 1.0 / static_cast<double>(checkpoints.size()));
    }
    if (w.size() != checkpoints.size()) {
        throw std::invalid_argument("merge_checkpoints: one weight per checkpoint required");
    }
    double sum = 0.0;
    for (double x : w) sum += x;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("merge_checkpoints: weights must sum to 1");
    }
    std::vector<double> out(size, 0.0);
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        for (std::size_t i = 0; i < size; ++i) out[i] += w[k] * checkpoints[k][i];
    }
    return out;
}

} // namespace ptk
