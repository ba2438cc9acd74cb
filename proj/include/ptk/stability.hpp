#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptk/initplan.hpp"

namespace ptk {

enum class IndicatorModule {
    attention_scores,
    attention_out,
    ffn_out,
    rmsnorm_out,
    residual_stream,
};

const char* indicator_module_name(IndicatorModule m);

struct TraceRecord {
    int step = 0;
    int layer = 0; // 0 = embedding output for residual_stream
    IndicatorModule module = IndicatorModule::residual_stream;
    double mean = 0.0;
    double var = 0.0;
    double rms = 0.0; // sqrt(var + mean^2)
};

struct ExplosionEvent {
    int step = 0;
    int layer = 0;
};

struct IndicatorTrace {
    std::vector<TraceRecord> records;
    std::vector<ExplosionEvent> events; // non-finite values encountered

    const TraceRecord* find(int step, int layer, IndicatorModule module) const;
    // Residual-stream variance at (step, layer); throws when absent.
    double residual_variance(int step, int layer) const;
    std::string to_csv() const;
};

/**
 * @brief Forward-only simulator configuration.
 *
 * Runs `steps` forward passes of a freshly initialized pre-RMSNorm
 * transformer (GQA attention, SwiGLU FFN) over uniformly random token
 * batches, recording mean/variance/RMS per layer and module. identity_ffn
 * switches the FFN to the plain two-matrix form used by the variance
 * derivation.
 */
struct SimConfig {
    ModelShape shape;
    InitPlan init;
    bool embed_tying = true;
    bool qk_layernorm = false;
    std::uint64_t seed = 0;
    int batch = 4;
    int seq_len = 64;
    int steps = 1;
    bool identity_ffn = false;

    void validate() const;
};

IndicatorTrace simulate_forward(const SimConfig& config);

struct StabilityAlert {
    int step = 0;
    int layer = 0;
    std::string kind; // "variance_ratio", "score_mean", "non_finite"
    double value = 0.0;
};

// Flags layers whose residual variance ratio against layer 1 exceeds
// var_ratio_cap, attention-score means above score_mean_cap, and recorded
// non-finite events.
std::vector<StabilityAlert> explosion_check(const IndicatorTrace& trace,
                                            double var_ratio_cap = 10.0,
                                            double score_mean_cap = 50.0);

// RMS normalization: x / sqrt(mean(x^2) + eps), then elementwise gain.
Eigen::VectorXd rmsnorm(const Eigen::VectorXd& x, const Eigen::VectorXd& gain,
                        double eps = 1e-6);

// Attention scores S = (Wq X)^T (Wk X) * scale with X holding one token per
// column. Throws on incompatible shapes.
Eigen::MatrixXd attn_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Wq,
                            const Eigen::MatrixXd& Wk, double scale);

// Analytic gradients of tr(S) — Wk X X^T for Wq and Wq X X^T for Wk —
// against central finite differences. Returns the maximum relative error.
double attn_score_grad_check(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Wq,
                             const Eigen::MatrixXd& Wk, double perturbation = 1e-5);

// zeta * log^2 Z with an overflow-safe log-sum-exp.
double zloss(const std::vector<double>& logits, double zeta);
double log_sum_exp(const std::vector<double>& logits);

} // namespace ptk
