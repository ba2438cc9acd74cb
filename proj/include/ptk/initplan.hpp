#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ptk {

struct ModelShape {
    int n_layers = 0;
    int d_model = 0;
    int d_ffn = 0;
    int n_heads = 0;
    int n_kv_heads = 0;
    int vocab_size = 0;

    int d_head() const { return d_model / n_heads; }
    void validate() const;
    nlohmann::json to_json() const;
    static ModelShape from_json(const nlohmann::json& j);

    // Table-1 / proxy-table shapes.
    static ModelShape target_2b();   // 56 x 1920, ffn 4800, 30 heads / 6 kv
    static ModelShape proxy_0p05b(); // 32 x 256, ffn 640, 2 heads / 2 kv
    static ModelShape proxy_0p2b();  // 30 x 576, ffn 1536, 9 heads / 3 kv
    static ModelShape proxy_0p4b();  // 56 x 576, ffn 1536, 9 heads / 3 kv
};

// sigma_base = sqrt(2 / (5 d)).
double sigma_base(int d_model);

enum class MatrixClass { embedding, qkv, attn_out, ffn_in, ffn_down, logits };

const char* matrix_class_name(MatrixClass c);

struct ClassPlan {
    double init_std = 0.0;
    double learning_rate = 0.0;
    double wesar_alpha = 1.0;
};

/**
 * @brief Full initialization / learning-rate / scaling recipe.
 *
 * Per matrix class: the effective init std, the class learning rate, and the
 * re-parametrization scalar alpha such that alpha * (a N(0, wesar_sigma_tilde^2)
 * draw) has exactly the effective std.
 */
struct InitPlan {
    ClassPlan embedding;
    ClassPlan qkv;
    ClassPlan attn_out;
    ClassPlan ffn_in;   // gate and up projections
    ClassPlan ffn_down;
    ClassPlan logits;

    double scale_embed_output = 1.0;
    double residual_scale = 1.0;
    double attn_scale = 0.0; // 1/sqrt(d_head)
    double logits_scale = 1.0;
    double m_width = 1.0;
    double wesar_sigma_tilde = 0.0; // common re-parametrized std; 0 = no WeSaR

    const ClassPlan& for_class(MatrixClass c) const;
    nlohmann::json to_json() const;
    static InitPlan from_json(const nlohmann::json& j);
};

// Width-scaled recipe transferred from the proxy: matrix LRs eta/m_width,
// QKV / FFN-in variance sigma^2/m_width, O / FFN-down variance
// sigma^2/(2 m_width n_layers), embedding std embed_std with output scale 10,
// residual scale 1.4/sqrt(n_layers), attention scale 1/sqrt(d_head), logits
// scale 1.
InitPlan mup_plan(const ModelShape& target, const ModelShape& proxy,
                  double eta_base, double sigma, double embed_std = 0.1);

// The plain scaled-init recipe (no width transfer): O and FFN-down variance
// sigma^2/(2 n_layers), everything else sigma^2, no output scaling.
InitPlan scaled_init_plan(const ModelShape& shape, double sigma, double eta_base = 0.01);

// The framework-default baseline: every matrix N(0, std^2), no scaling.
InitPlan default_init_plan(const ModelShape& shape, double init_std = 0.02,
                           double eta_base = 0.01);

struct WesarParams {
    double init_std_tilde = 0.0; // std of the stored weight
    double alpha = 1.0;          // learnable scalar, 1/gamma
    double effective_std = 0.0;  // std of alpha * weight
};

// W = alpha * W~ with W~ ~ N(0, sigma^2) and alpha = 1/gamma, so the
// effective distribution is N(0, (sigma/gamma)^2).
WesarParams wesar(double sigma, double gamma);

struct RopeDimReport {
    int dim_pair = 0;       // i in theta^(-2i/d_head)
    double freq_old = 0.0;
    double freq_new = 0.0;
    double wavelength_old = 0.0;
    double wavelength_new = 0.0;
    double max_angle_old = 0.0; // (old_ctx - 1) * freq_old
    double max_angle_new = 0.0; // (new_ctx - 1) * freq_new
    bool within_trained_range = false;
};

struct RopeReport {
    double theta_old = 0.0;
    double theta_new = 0.0;
    std::int64_t old_ctx = 0;
    std::int64_t new_ctx = 0;
    std::vector<RopeDimReport> dims;
};

// Per-dimension base-frequency comparison before/after retargeting, with the
// out-of-distribution rotation-angle check at the extended context.
RopeReport rope_retarget(double theta_old, double theta_new, int d_head,
                         std::int64_t old_ctx, std::int64_t new_ctx);

// Elementwise weighted average; uniform weights by default. Throws on shape
// mismatch or weights that do not sum to 1.
std::vector<double> merge_checkpoints(
    const std::vector<std::vector<double>>& checkpoints,
    const std::vector<double>& weights = {});

} // namespace ptk
