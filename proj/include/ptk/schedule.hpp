#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace ptk {

enum class AnnealKind { one_sqrt, linear, cosine };

const char* anneal_kind_name(AnnealKind kind);
AnnealKind parse_anneal_kind(std::string_view name);

/**
 * @brief Warmup-stable-decay learning-rate schedule.
 *
 * Linear warmup to eta_max, a constant stable stage, an annealing span that
 * lands exactly on floor_lr, and a constant tail at the floor.
 */
struct ScheduleSpec {
    double eta_max = 0.01;
    std::int64_t warmup_steps = 2433;
    std::int64_t total_steps = 0;
    std::int64_t anneal_steps = 18802;
    double floor_lr = 5.22e-5;
    std::int64_t tail_constant_steps = 772;
    AnnealKind anneal_kind = AnnealKind::one_sqrt;

    std::int64_t stable_steps() const {
        return total_steps - warmup_steps - anneal_steps - tail_constant_steps;
    }
    void validate() const;
    nlohmann::json to_json() const;
    static ScheduleSpec from_json(const nlohmann::json& j);

    // The full-run defaults: 1.08T tokens at 4.12M tokens per step.
    static ScheduleSpec full_run_default();
};

// Annealing factor 1 - sqrt((n - (N - N_annealing)) / N_annealing); throws
// when n lies outside the annealing window [N - N_annealing, N].
double one_sqrt(std::int64_t n, std::int64_t N, std::int64_t N_annealing);

// Learning rate at step n (0 <= n <= total_steps).
double wsd_lr(std::int64_t n, const ScheduleSpec& spec);

struct DecayResolution {
    double eta = 0.0;
    double lambda_coupled = 0.0;     // the optimizer's configured coefficient
    double lambda_independent = 0.0; // eta * lambda
};

// Translates the coupled weight-decay coefficient into the independent
// convention lambda' = eta * lambda.
DecayResolution resolve_decay(double eta, double lambda_coupled);

// Ceil division of a token budget into optimizer steps.
std::int64_t tokens_to_steps(std::int64_t tokens, std::int64_t batch_tokens);

// One "step,lr" line per step (inclusive of total_steps), for plotting.
std::string lr_curve_csv(const ScheduleSpec& spec, std::int64_t stride = 1);

/**
 * @brief Fixed optimizer hyperparameters resolved alongside the schedule.
 */
struct OptimizerHyper {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double epsilon = 1e-15;
    double weight_decay = 0.1;
    double zloss_coefficient = 1e-4;
    double grad_clip = 1.0;
    double batch_tokens = 4.12e6;
    std::int64_t seq_len = 4096;

    void validate() const;
    nlohmann::json to_json() const;
};

} // namespace ptk
