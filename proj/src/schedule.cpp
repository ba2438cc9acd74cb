#include "ptk/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ptk {

const char* anneal_kind_name(AnnealKind kind) {
    switch (kind) {
        case AnnealKind::one_sqrt: return "1-sqrt";
        case AnnealKind::linear: return "linear";
        case AnnealKind::cosine: return "cosine";
    }
    throw std::invalid_argument("unknown anneal kind value");
}

AnnealKind parse_anneal_kind(std::string_view name) {
    if (name == "1-sqrt" || name == "one_sqrt") return AnnealKind::one_sqrt;
    if (name == "linear") return AnnealKind::linear;
    if (name == "cosine") return AnnealKind::cosine;
    throw std::invalid_argument("unknown anneal kind: \"" + std::string(name) + "\"");
}

void ScheduleSpec::validate() const {
    if (eta_max <= 0.0) throw std::invalid_argument("ScheduleSpec: eta_max must be positive");
    if (floor_lr <= 0.0 || floor_lr >= eta_max) {
        throw std::invalid_argument("ScheduleSpec: require 0 < floor_lr < eta_max");
    }
    if (warmup_steps < 0 || anneal_steps < 0 || tail_constant_steps < 0 ||
        total_steps <= 0 || stable_steps() < 0) {
        throw std::invalid_argument(
            "ScheduleSpec: step counts must be nonnegative and fit in total_steps");
    }
}

nlohmann::json ScheduleSpec::to_json() const {
    return {
        {"eta_max", eta_max},
        {"warmup_steps", warmup_steps},
        {"total_steps", total_steps},
        {"anneal_steps", anneal_steps},
        {"floor_lr", floor_lr},
        {"tail_constant_steps", tail_constant_steps},
        {"anneal_kind", anneal_kind_name(anneal_kind)},
    };
}

ScheduleSpec ScheduleSpec::from_json(const nlohmann::json& j) {
    ScheduleSpec spec;
    spec.eta_max = j.value("eta_max", spec.eta_max);
    spec.warmup_steps = j.value("warmup_steps", spec.warmup_steps);
    spec.total_steps = j.at("total_steps").get<std::int64_t>();
    spec.anneal_steps = j.value("anneal_steps", spec.anneal_steps);
    spec.floor_lr = j.value("floor_lr", spec.floor_lr);
    spec.tail_constant_steps = j.value("tail_constant_steps", spec.tail_constant_steps);
    if (j.contains("anneal_kind")) {
        spec.anneal_kind = parse_anneal_kind(j["anneal_kind"].get<std::string>());
    }
    spec.validate();
    return spec;
}

ScheduleSpec ScheduleSpec::full_run_default() {
    ScheduleSpec spec;
    spec.total_steps = tokens_to_steps(1'080'000'000'000, 4'120'000);
    spec.validate();
    return spec;
}

double one_sqrt(std::int64_t n, std::int64_t N, std::int64_t N_annealing) {
    if (N_annealing <= 0) throw std::invalid_argument("one_sqrt: N_annealing must be positive");
    if (n < N - N_annealing || n > N) {
        throw std::out_of_range("one_sqrt: step outside the annealing window");
    }
    const double progress = static_cast<double>(n - (N - N_annealing)) /
                            static_cast<double>(N_annealing);
    return 1.0 - std::sqrt(progress);
}

namespace {

double anneal_factor(double progress, AnnealKind kind) {
    switch (kind) {
        case AnnealKind::one_sqrt: return 1.0 - std::sqrt(progress);
        case AnnealKind::linear: return 1.0 - progress;
        case AnnealKind::cosine: return 0.5 * (1.0 + std::cos(M_PI * progress));
    }
    throw std::invalid_argument("unknown anneal kind value");
}

} // namespace

double wsd_lr(std::int64_t n, const ScheduleSpec& spec) {
    spec.validate();
    if (n < 0 || n > spec.total_steps) {
        throw std::out_of_range("wsd_lr: step " + std::to_string(n) +
                                " outside [0, total_steps]");
    }
    const std::int64_t stable_end = spec.warmup_steps + spec.stable_steps();
    const std::int64_t anneal_end = stable_end + spec.anneal_steps;
    if (n < spec.warmup_steps) {
        return spec.eta_max * static_cast<double>(n) /
               static_cast<double>(spec.warmup_steps);
    }
    if (n <= stable_end) return spec.eta_max;
    if (n <= anneal_end) {
        const double progress = static_cast<double>(n - stable_end) /
                                static_cast<double>(spec.anneal_steps);
        return spec.floor_lr +
               (spec.eta_max - spec.floor_lr) * anneal_factor(progress, spec.anneal_kind);
    }
    return spec.floor_lr;
}

DecayResolution resolve_decay(double eta, double lambda_coupled) {
    if (eta <= 0.0) throw std::invalid_argument("resolve_decay: eta must be positive");
    return {eta, lambda_coupled, eta * lambda_coupled};
}

std::int64_t tokens_to_steps(std::int64_t tokens, std::int64_t batch_tokens) {
    if (batch_tokens <= 0) {
        throw std::invalid_argument("tokens_to_steps: batch_tokens must be positive");
    }
    if (tokens < 0) throw std::invalid_argument("tokens_to_steps: tokens must be nonnegative");
    return (tokens + batch_tokens - 1) / batch_tokens;
}

std::string lr_curve_csv(const ScheduleSpec& spec, std::int64_t stride) {
    spec.validate();
    if (stride <= 0) throw std::invalid_argument("lr_curve_csv: stride must be positive");
    std::ostringstream out;
    out << "step,lr\n";
    char line[64];
    for (std::int64_t n = 0; n <= spec.total_steps; n += stride) {
        std::snprintf(line, sizeof(line), "%lld,%.17g\n", static_cast<long long>(n),
                      wsd_lr(n, spec));
        out << line;
    }
    if ((spec.total_steps % stride) != 0) {
        std::snprintf(line, sizeof(line), "%lld,%.17g\n",
                      static_cast<long long>(spec.total_steps),
                      wsd_lr(spec.total_steps, spec));
        out << line;
    }
    return out.str();
}

void OptimizerHyper::validate() const {
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw std::invalid_argument("OptimizerHyper: betas must be in (0,1)");
    }
    if (epsilon <= 0.0) throw std::invalid_argument("OptimizerHyper: epsilon must be positive");
    if (grad_clip <= 0.0) throw std::invalid_argument("OptimizerHyper: grad_clip must be positive");
}

nlohmann::json OptimizerHyper::to_json() const {
    return {
        {"beta1", beta1},
        {"beta2", beta2},
        {"epsilon", epsilon},
        {"weight_decay", weight_decay},
        {"zloss_coefficient", zloss_coefficient},
        {"grad_clip", grad_clip},
        {"batch_tokens", batch_tokens},
        {"seq_len", seq_len},
    };
}

} // namespace ptk
