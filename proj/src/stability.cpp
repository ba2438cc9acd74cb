#include "ptk/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ptk/hashing.hpp"
#include "ptk/rng.hpp"

namespace ptk {

namespace {

struct RunningStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t count = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++count;
    }
    void add_all(const Eigen::MatrixXd& m) {
        sum += m.sum();
        sum_sq += m.squaredNorm();
        count += m.size();
    }
    TraceRecord record(int step, int layer, IndicatorModule module) const {
        TraceRecord r;
        r.step = step;
        r.layer = layer;
        r.module = module;
        if (count > 0) {
            r.mean = sum / static_cast<double>(count);
            const double mean_sq = sum_sq / static_cast<double>(count);
            r.var = mean_sq - r.mean * r.mean;
            r.rms = std::sqrt(r.var + r.mean * r.mean);
        }
        return r;
    }
};

Eigen::MatrixXd sample_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                              double std) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, std);
    }
    return m;
}

// Row-wise RMS normalization with unit gain.
void rmsnorm_rows(Eigen::MatrixXd& m, double eps = 1e-6) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double ms = m.row(i).squaredNorm() / static_cast<double>(m.cols());
        m.row(i) /= std::sqrt(ms + eps);
    }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

struct LayerWeights {
    Eigen::MatrixXd wq, wk, wv, wo, w_gate, w_up, w_down;
};

LayerWeights sample_layer(const SimConfig& config, int layer) {
    const auto& shape = config.shape;
    const auto& init = config.init;
    const int d = shape.d_model;
    const int dh = shape.d_head();
    const int kv_dim = shape.n_kv_heads * dh;
    Rng rng(derive_seed(config.seed, 0x10000ULL + static_cast<std::uint64_t>(layer)));
    LayerWeights w;
    w.wq = sample_matrix(rng, d, d, init.qkv.init_std);
    w.wk = sample_matrix(rng, d, kv_dim, init.qkv.init_std);
    w.wv = sample_matrix(rng, d, kv_dim, init.qkv.init_std);
    w.wo = sample_matrix(rng, d, d, init.attn_out.init_std);
    w.w_gate = sample_matrix(rng, d, shape.d_ffn, init.ffn_in.init_std);
    w.w_up = sample_matrix(rng, d, shape.d_ffn, init.ffn_in.init_std);
    w.w_down = sample_matrix(rng, shape.d_ffn, d, init.ffn_down.init_std);
    return w;
}

} // namespace

const char* indicator_module_name(IndicatorModule m) {
    switch (m) {
        case IndicatorModule::attention_scores: return "attention_scores";
        case IndicatorModule::attention_out: return "attention_out";
        case IndicatorModule::ffn_out: return "ffn_out";
        case IndicatorModule::rmsnorm_out: return "rmsnorm_out";
        case IndicatorModule::residual_stream: return "residual_stream";
    }
    throw std::invalid_argument("unknown indicator module");
}

const TraceRecord* IndicatorTrace::find(int step, int layer,
                                        IndicatorModule module) const {
    for (const auto& r : records) {
        if (r.step == step && r.layer == layer && r.module == module) return &r;
    }
    return nullptr;
}

double IndicatorTrace::residual_variance(int step, int layer) const {
    const TraceRecord* r = find(step, layer, IndicatorModule::residual_stream);
    if (!r) {
        throw std::out_of_range("trace has no residual record for step " +
                                std::to_string(step) + " layer " +
                                std::to_string(layer));
    }
    return r->var;
}

std::string IndicatorTrace::to_csv() const {
    std::ostringstream out;
    out << "step,layer,module,mean,var,rms\n";
    char line[160];
    for (const auto& r : records) {
        std::snprintf(line, sizeof(line), "%d,%d,%s,%.17g,%.17g,%.17g\n", r.step,
                      r.layer, indicator_module_name(r.module), r.mean, r.var, r.rms);
        out << line;
    }
    return out.str();
}

void SimConfig::validate() const {
    shape.validate();
    if (batch <= 0 || seq_len <= 0 || steps <= 0) {
        throw std::invalid_argument("SimConfig: batch, seq_len, steps must be positive");
    }
    if (init.attn_scale <= 0.0) {
        throw std::invalid_argument("SimConfig: init.attn_scale must be positive");
    }
}

IndicatorTrace simulate_forward(const SimConfig& config) {
    config.validate();
    const auto& shape = config.shape;
    const int d = shape.d_model;
    const int dh = shape.d_head();
    const int heads_per_group = shape.n_heads / shape.n_kv_heads;
    const int rows = config.batch * config.seq_len;

    std::vector<LayerWeights> layers;
    layers.reserve(static_cast<std::size_t>(shape.n_layers));
    for (int l = 0; l < shape.n_layers; ++l) layers.push_back(sample_layer(config, l));

    IndicatorTrace trace;
    for (int step = 0; step < config.steps; ++step) {
        Rng step_rng(derive_seed(config.seed, 0x20000ULL + static_cast<std::uint64_t>(step)));

        // Embedding rows are derived per token id, so no vocab-sized table
        // is materialized. Untied embeddings are initialized at std 1 and
        // need no output scaling.
        const double embed_std =
            config.embed_tying ? config.init.embedding.init_std : 1.0;
        const double embed_scale =
            config.embed_tying ? config.init.scale_embed_output : 1.0;
        Eigen::MatrixXd x(rows, d);
        for (int r = 0; r < rows; ++r) {
            const auto token = step_rng.uniform_int(static_cast<std::uint64_t>(shape.vocab_size));
            Rng embed_rng(derive_seed(config.seed, 0x30000ULL + token));
            for (int j = 0; j < d; ++j) {
                x(r, j) = embed_rng.normal(0.0, embed_std);
            }
        }
        x *= embed_scale;

        RunningStats embed_stats;
        embed_stats.add_all(x);
        trace.records.push_back(
            embed_stats.record(step, 0, IndicatorModule::residual_stream));

        bool exploded = false;
        for (int l = 0; l < shape.n_layers && !exploded; ++l) {
            const LayerWeights& w = layers[static_cast<std::size_t>(l)];
            const int layer_no = l + 1;

            Eigen::MatrixXd u = x;
            rmsnorm_rows(u);
            RunningStats ln_stats;
            ln_stats.add_all(u);
            trace.records.push_back(
                ln_stats.record(step, layer_no, IndicatorModule::rmsnorm_out));

            Eigen::MatrixXd attn_raw(rows, d);
            RunningStats score_stats;
            for (int b = 0; b < config.batch; ++b) {
                const auto block = u.middleRows(b * config.seq_len, config.seq_len);
                Eigen::MatrixXd q = block * w.wq; // seq x d
                Eigen::MatrixXd k = block * w.wk; // seq x kv_dim
                Eigen::MatrixXd v = block * w.wv;
                for (int h = 0; h < shape.n_heads; ++h) {
                    Eigen::MatrixXd qh = q.middleCols(h * dh, dh);
                    const int g = h / heads_per_group;
                    Eigen::MatrixXd kh = k.middleCols(g * dh, dh);
                    const auto vh = v.middleCols(g * dh, dh);
                    if (config.qk_layernorm) {
                        rmsnorm_rows(qh);
                        rmsnorm_rows(kh);
                    }
                    Eigen::MatrixXd scores =
                        config.init.attn_scale * (qh * kh.transpose());
                    // Causal attention: token i may look at tokens <= i.
                    Eigen::MatrixXd probs =
                        Eigen::MatrixXd::Zero(config.seq_len, config.seq_len);
                    for (int i = 0; i < config.seq_len; ++i) {
                        double max_score = -std::numeric_limits<double>::infinity();
                        for (int j = 0; j <= i; ++j) {
                            score_stats.add(scores(i, j));
                            max_score = std::max(max_score, scores(i, j));
                        }
                        double denom = 0.0;
                        for (int j = 0; j <= i; ++j) {
                            probs(i, j) = std::exp(scores(i, j) - max_score);
                            denom += probs(i, j);
                        }
                        for (int j = 0; j <= i; ++j) probs(i, j) /= denom;
                    }
                    attn_raw.block(b * config.seq_len, h * dh, config.seq_len, dh) =
                        probs * vh;
                }
            }
            trace.records.push_back(
                score_stats.record(step, layer_no, IndicatorModule::attention_scores));

            Eigen::MatrixXd attn_contrib =
                config.init.residual_scale * (attn_raw * w.wo);
            RunningStats attn_stats;
            attn_stats.add_all(attn_contrib);
            trace.records.push_back(
                attn_stats.record(step, layer_no, IndicatorModule::attention_out));
            Eigen::MatrixXd y = x + attn_contrib;

            Eigen::MatrixXd v_in = y;
            rmsnorm_rows(v_in);
            Eigen::MatrixXd hidden = v_in * w.w_gate; // seq x d_ffn
            if (!config.identity_ffn) {
                Eigen::MatrixXd up = v_in * w.w_up;
                for (Eigen::Index i = 0; i < hidden.rows(); ++i) {
                    for (Eigen::Index j = 0; j < hidden.cols(); ++j) {
                        hidden(i, j) = silu(hidden(i, j)) * up(i, j);
                    }
                }
            }
            Eigen::MatrixXd ffn_contrib =
                config.init.residual_scale * (hidden * w.w_down);
            RunningStats ffn_stats;
            ffn_stats.add_all(ffn_contrib);
            trace.records.push_back(
                ffn_stats.record(step, layer_no, IndicatorModule::ffn_out));

            x = y + ffn_contrib;
            RunningStats z_stats;
            z_stats.add_all(x);
            trace.records.push_back(
                z_stats.record(step, layer_no, IndicatorModule::residual_stream));

            if (!x.allFinite()) {
                trace.events.push_back({step, layer_no});
                exploded = true;
            }
        }
    }
    return trace;
}

std::vector<StabilityAlert> explosion_check(const IndicatorTrace& trace,
                                            double var_ratio_cap,
                                            double score_mean_cap) {
    if (trace.records.empty()) {
        throw std::invalid_argument("explosion_check: empty trace");
    }
    std::vector<StabilityAlert> alerts;
    std::map<int, double> first_layer_var; // per step
    for (const auto& r : trace.records) {
        if (r.module == IndicatorModule::residual_stream && r.layer == 1) {
            first_layer_var[r.step] = r.var;
        }
    }
    for (const auto& r : trace.records) {
        if (r.module == IndicatorModule::residual_stream && r.layer > 1) {
            auto it = first_layer_var.find(r.step);
            if (it != first_layer_var.end() && it->second > 0.0) {
                const double ratio = r.var / it->second;
                if (ratio > var_ratio_cap) {
                    alerts.push_back({r.step, r.layer, "variance_ratio", ratio});
                }
            }
        }
        if (r.module == IndicatorModule::attention_scores &&
            std::abs(r.mean) > score_mean_cap) {
            alerts.push_back({r.step, r.layer, "score_mean", r.mean});
        }
    }
    for (const auto& e : trace.events) {
        alerts.push_back({e.step, e.layer, "non_finite",
                          std::numeric_limits<double>::quiet_NaN()});
    }
    return alerts;
}

Eigen::VectorXd rmsnorm(const Eigen::VectorXd& x, const Eigen::VectorXd& gain,
                        double eps) {
    if (x.size() == 0) throw std::invalid_argument("rmsnorm: empty input");
    if (gain.size() != x.size()) {
        throw std::invalid_argument("rmsnorm: gain size mismatch");
    }
    const double ms = x.squaredNorm() / static_cast<double>(x.size());
    return (x / std::sqrt(ms + eps)).cwiseProduct(gain);
}

Eigen::MatrixXd attn_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Wq,
                            const Eigen::MatrixXd& Wk, double scale) {
    if (Wq.cols() != X.rows() || Wk.cols() != X.rows() || Wq.rows() != Wk.rows()) {
        throw std::invalid_argument("attn_scores: incompatible shapes");
    }
    return scale * ((Wq * X).transpose() * (Wk * X));
}

double attn_score_grad_check(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Wq,
                             const Eigen::MatrixXd& Wk, double perturbation) {
    if (perturbation <= 0.0) {
        throw std::invalid_argument("attn_score_grad_check: perturbation must be positive");
    }
    const Eigen::MatrixXd xxt = X * X.transpose();
    const Eigen::MatrixXd grad_q = Wk * xxt;
    const Eigen::MatrixXd grad_k = Wq * xxt;

    auto trace_of = [&](const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk) {
        return attn_scores(X, wq, wk, 1.0).trace();
    };

    double max_rel_err = 0.0;
    auto check = [&](const Eigen::MatrixXd& analytic, bool vary_q) {
        Eigen::MatrixXd wq = Wq;
        Eigen::MatrixXd wk = Wk;
        Eigen::MatrixXd& varied = vary_q ? wq : wk;
        for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
            for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
                const double saved = varied(i, j);
                varied(i, j) = saved + perturbation;
                const double up = trace_of(wq, wk);
                varied(i, j) = saved - perturbation;
                const double down = trace_of(wq, wk);
                varied(i, j) = saved;
                const double fd = (up - down) / (2.0 * perturbation);
                const double a = analytic(i, j);
                const double scale = std::max({std::abs(a), std::abs(fd), 1e-8});
                max_rel_err = std::max(max_rel_err, std::abs(a - fd) / scale);
            }
        }
    };
    check(grad_q, true);
    check(grad_k, false);
    return max_rel_err;
}

double log_sum_exp(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - m);
    return m + std::log(sum);
}

double zloss(const std::vector<double>& logits, double zeta) {
    const double log_z = log_sum_exp(logits);
    return zeta * log_z * log_z;
}

} // namespace ptk
