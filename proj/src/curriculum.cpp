#include "ptk/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ptk {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kShiftEpsilon = 1e-9;
constexpr double kStableInstructionCap = 0.05;

std::int64_t round_half_up(double x) {
    return static_cast<std::int64_t>(std::llround(x));
}

// One rate-limited interpolation step toward the target: the whole remaining
// move is divided over the remaining phases, then uniformly scaled down if
// any domain would exceed the cap. Scaling the step keeps proportions
// normalized (each step stays a convex combination of two valid mixes).
MixSpec step_toward(const MixSpec& current, const MixSpec& target,
                    int steps_left, double cap_points) {
    double max_move = 0.0;
    std::map<Domain, double> proposed;
    for (const auto& [dom, target_p] : target.proportions) {
        const double cur = current.proportions.count(dom) ? current.proportions.at(dom) : 0.0;
        const double step = (target_p - cur) / static_cast<double>(steps_left);
        proposed[dom] = step;
        max_move = std::max(max_move, std::abs(step));
    }
    for (const auto& [dom, cur] : current.proportions) {
        if (!target.proportions.count(dom)) {
            const double step = (0.0 - cur) / static_cast<double>(steps_left);
            proposed[dom] = step;
            max_move = std::max(max_move, std::abs(step));
        }
    }
    const double cap = cap_points / 100.0;
    const double scale = max_move > cap ? cap / max_move : 1.0;

    MixSpec next = current;
    for (const auto& [dom, step] : proposed) {
        const double cur = current.proportions.count(dom) ? current.proportions.at(dom) : 0.0;
        const double value = cur + scale * step;
        if (value > 1e-15) {
            next.proportions[dom] = value;
        } else {
            next.proportions.erase(dom);
        }
    }
    next.instruction_fraction =
        current.instruction_fraction +
        (target.instruction_fraction - current.instruction_fraction) /
            static_cast<double>(steps_left);
    next.long_context_fraction =
        current.long_context_fraction +
        (target.long_context_fraction - current.long_context_fraction) /
            static_cast<double>(steps_left);
    return next;
}

void apply_adjustment(MixSpec& mix, const std::map<Domain, double>& deltas,
                      int phase_index) {
    double listed_total = 0.0;
    double listed_old = 0.0;
    for (const auto& [dom, delta_points] : deltas) {
        const double cur = mix.proportions.count(dom) ? mix.proportions.at(dom) : 0.0;
        const double value = cur + delta_points / 100.0;
        if (value < -kSumTolerance || value > 1.0 + kSumTolerance) {
            throw std::invalid_argument(
                "plan_phases: adjustment at phase " + std::to_string(phase_index) +
                " pushes domain " + domain_name(dom) + " outside [0,1]");
        }
        listed_old += cur;
        listed_total += value;
        mix.proportions[dom] = value;
    }
    // Rescale the untouched domains so the mix still sums to 1.
    const double rest_old = 1.0 - listed_old;
    const double rest_new = 1.0 - listed_total;
    if (rest_new < -kSumTolerance) {
        throw std::invalid_argument("plan_phases: adjustment at phase " +
                                    std::to_string(phase_index) +
                                    " leaves no room for remaining domains");
    }
    if (rest_old > kSumTolerance) {
        const double factor = rest_new / rest_old;
        for (auto& [dom, value] : mix.proportions) {
            if (!deltas.count(dom)) value *= factor;
        }
    }
}

} // namespace

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::warmup: return "warmup";
        case Stage::stable: return "stable";
        case Stage::annealing: return "annealing";
    }
    throw std::invalid_argument("unknown stage value");
}

Stage parse_stage(std::string_view name) {
    if (name == "warmup") return Stage::warmup;
    if (name == "stable") return Stage::stable;
    if (name == "annealing") return Stage::annealing;
    throw std::invalid_argument("unknown stage: \"" + std::string(name) + "\"");
}

void StageBudget::validate() const {
    if (warmup_tokens <= 0 || stable_tokens <= 0 || anneal_tokens < 0 ||
        phase_size_tokens <= 0 || phase_count <= 0) {
        throw std::invalid_argument("StageBudget: budgets must be positive");
    }
    const auto expected =
        (total() + phase_size_tokens - 1) / phase_size_tokens;
    if (expected != phase_count) {
        throw std::invalid_argument("StageBudget: phase_count inconsistent with totals");
    }
}

nlohmann::json StageBudget::to_json() const {
    return {
        {"warmup_tokens", warmup_tokens},
        {"stable_tokens", stable_tokens},
        {"anneal_tokens", anneal_tokens},
        {"phase_size_tokens", phase_size_tokens},
        {"phase_count", phase_count},
    };
}

StageBudget stage_budgets(std::int64_t total_tokens, std::int64_t warmup_tokens,
                          double anneal_ratio, std::int64_t phase_size) {
    if (total_tokens <= 0 || phase_size <= 0) {
        throw std::invalid_argument("stage_budgets: totals must be positive");
    }
    if (warmup_tokens <= 0 || warmup_tokens >= total_tokens) {
        throw std::invalid_argument("stage_budgets: warmup must lie inside the total");
    }
    if (anneal_ratio < 0.0 || anneal_ratio >= 1.0) {
        throw std::invalid_argument("stage_budgets: anneal_ratio must be in [0,1)");
    }
    const std::int64_t remainder = total_tokens - warmup_tokens;
    StageBudget budget;
    budget.warmup_tokens = warmup_tokens;
    budget.phase_size_tokens = phase_size;

    // stable + round(ratio * stable) = remainder; search near the real-valued
    // solution for the integer one.
    const auto guess = static_cast<std::int64_t>(
        std::llround(static_cast<double>(remainder) / (1.0 + anneal_ratio)));
    bool found = false;
    for (std::int64_t stable = std::max<std::int64_t>(1, guess - 4);
         stable <= guess + 4; ++stable) {
        const std::int64_t anneal = round_half_up(anneal_ratio * static_cast<double>(stable));
        if (stable + anneal == remainder) {
            budget.stable_tokens = stable;
            budget.anneal_tokens = anneal;
            found = true;
            break;
        }
    }
    if (!found) {
        throw std::invalid_argument(
            "stage_budgets: no integer stable/anneal split satisfies "
            "stable + round(ratio*stable) = " + std::to_string(remainder));
    }
    budget.phase_count = static_cast<int>((total_tokens + phase_size - 1) / phase_size);
    budget.validate();
    return budget;
}

void MixSpec::validate(bool stable_stage) const {
    double sum = 0.0;
    for (const auto& [dom, p] : proportions) {
        if (p < -kSumTolerance || p > 1.0 + kSumTolerance) {
            throw std::invalid_argument(std::string("MixSpec: proportion for ") +
                                        domain_name(dom) + " outside [0,1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw std::invalid_argument("MixSpec: proportions sum to " +
                                    std::to_string(sum) + ", expected 1");
    }
    if (instruction_fraction < 0.0 || instruction_fraction > 1.0 ||
        long_context_fraction < 0.0 || long_context_fraction > 1.0) {
        throw std::invalid_argument("MixSpec: fractions must be in [0,1]");
    }
    if (stable_stage && instruction_fraction > kStableInstructionCap + kSumTolerance) {
        throw std::invalid_argument("MixSpec: stable-stage instruction fraction above 5%");
    }
}

nlohmann::json MixSpec::to_json() const {
    nlohmann::json props = nlohmann::json::object();
    for (const auto& [dom, p] : proportions) props[domain_name(dom)] = p;
    return {
        {"proportions", props},
        {"instruction_fraction", instruction_fraction},
        {"long_context_fraction", long_context_fraction},
    };
}

MixSpec MixSpec::from_json(const nlohmann::json& j) {
    MixSpec mix;
    for (auto it = j.at("proportions").begin(); it != j.at("proportions").end(); ++it) {
        mix.proportions[parse_domain(it.key())] = it.value().get<double>();
    }
    mix.instruction_fraction = j.value("instruction_fraction", 0.0);
    mix.long_context_fraction = j.value("long_context_fraction", 0.0);
    mix.validate();
    return mix;
}

MixSpec default_stable_mix() {
    MixSpec mix;
    mix.proportions[Domain::web] = 0.45;
    mix.proportions[Domain::book] = 0.15;
    mix.proportions[Domain::code] = 0.20;
    mix.proportions[Domain::math] = 0.10;
    mix.proportions[Domain::chinese] = 0.10;
    return mix;
}

MixSpec default_annealing_mix() {
    MixSpec mix = default_stable_mix();
    mix.instruction_fraction = 0.1919;
    mix.long_context_fraction = 0.1421;
    return mix;
}

int PhasePlan::phase_count() const {
    int count = 0;
    for (const auto& e : entries) count = std::max(count, e.phase_index);
    return count;
}

nlohmann::json PhasePlan::to_json() const {
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries) {
        entries_json.push_back({
            {"phase", e.phase_index},
            {"tokens", e.tokens},
            {"stage", stage_name(e.stage)},
            {"mix", e.mix.to_json()},
        });
    }
    return {{"budget", budget.to_json()}, {"entries", entries_json}};
}

std::vector<ShiftViolation> validate_shift(const MixSpec& a, const MixSpec& b,
                                           double cap_points) {
    std::vector<ShiftViolation> violations;
    std::map<Domain, std::pair<double, double>> merged;
    for (const auto& [dom, p] : a.proportions) merged[dom].first = p;
    for (const auto& [dom, p] : b.proportions) merged[dom].second = p;
    for (const auto& [dom, pair] : merged) {
        const double delta_points = std::abs(pair.first - pair.second) * 100.0;
        if (delta_points > cap_points + kShiftEpsilon) {
            violations.push_back({dom, delta_points});
        }
    }
    return violations;
}

void PhasePlan::validate(double cap_points) const {
    budget.validate();
    std::map<Stage, std::int64_t> stage_totals;
    for (const auto& e : entries) {
        e.mix.validate(e.stage == Stage::stable);
        stage_totals[e.stage] += e.tokens;
    }
    if (stage_totals[Stage::warmup] != budget.warmup_tokens ||
        stage_totals[Stage::stable] != budget.stable_tokens ||
        stage_totals[Stage::annealing] != budget.anneal_tokens) {
        throw std::invalid_argument("PhasePlan: entry budgets do not sum to stage budgets");
    }
    double last_stable_instruction = -1.0;
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
        if (entries[i].stage != entries[i + 1].stage) continue;
        const auto violations =
            validate_shift(entries[i].mix, entries[i + 1].mix, cap_points);
        if (!violations.empty()) {
            throw std::invalid_argument(
                "PhasePlan: shift above cap between phases " +
                std::to_string(entries[i].phase_index) + " and " +
                std::to_string(entries[i + 1].phase_index) + " for domain " +
                domain_name(violations.front().domain));
        }
    }
    for (const auto& e : entries) {
        if (e.stage != Stage::stable) continue;
        if (e.mix.instruction_fraction < last_stable_instruction - kSumTolerance) {
            throw std::invalid_argument(
                "PhasePlan: stable-stage instruction fraction decreases at phase " +
                std::to_string(e.phase_index));
        }
        last_stable_instruction = e.mix.instruction_fraction;
    }
}

PhasePlan plan_phases(const StageBudget& budget, const MixSpec& start_mix,
                      const std::map<Stage, MixSpec>& target_mix_by_stage,
                      const MixAdjustments& observed_adjustments,
                      double cap_points) {
    budget.validate();
    start_mix.validate();
    for (const auto& [stage, mix] : target_mix_by_stage) {
        mix.validate(stage == Stage::stable);
    }

    // Split phases at stage boundaries; a straddling phase contributes one
    // entry per stage under the same index.
    struct Slot {
        int phase_index;
        std::int64_t tokens;
        Stage stage;
    };
    std::vector<Slot> slots;
    const std::int64_t warmup_end = budget.warmup_tokens;
    const std::int64_t stable_end = budget.warmup_tokens + budget.stable_tokens;
    const std::int64_t total = budget.total();
    std::int64_t cursor = 0;
    for (int phase = 1; phase <= budget.phase_count; ++phase) {
        std::int64_t phase_end = std::min<std::int64_t>(
            static_cast<std::int64_t>(phase) * budget.phase_size_tokens, total);
        while (cursor < phase_end) {
            std::int64_t boundary = phase_end;
            Stage stage;
            if (cursor < warmup_end) {
                stage = Stage::warmup;
                boundary = std::min(boundary, warmup_end);
            } else if (cursor < stable_end) {
                stage = Stage::stable;
                boundary = std::min(boundary, stable_end);
            } else {
                stage = Stage::annealing;
            }
            slots.push_back({phase, boundary - cursor, stage});
            cursor = boundary;
        }
    }

    // Count entries per stage to size the interpolation.
    std::map<Stage, int> stage_entry_counts;
    for (const auto& s : slots) ++stage_entry_counts[s.stage];

    auto target_for = [&](Stage stage) -> MixSpec {
        auto it = target_mix_by_stage.find(stage);
        if (it != target_mix_by_stage.end()) return it->second;
        if (stage == Stage::annealing) {
            MixSpec mix = default_annealing_mix();
            mix.proportions = start_mix.proportions;
            return mix;
        }
        return start_mix;
    };

    PhasePlan plan;
    plan.budget = budget;
    MixSpec current = start_mix;
    std::map<Stage, int> remaining = stage_entry_counts;
    for (const auto& slot : slots) {
        const MixSpec target = target_for(slot.stage);
        MixSpec mix = step_toward(current, target, remaining[slot.stage], cap_points);
        --remaining[slot.stage];

        auto adj = observed_adjustments.find(slot.phase_index);
        if (adj != observed_adjustments.end() &&
            (plan.entries.empty() ||
             plan.entries.back().phase_index != slot.phase_index)) {
            apply_adjustment(mix, adj->second, slot.phase_index);
            const auto violations = validate_shift(current, mix, cap_points);
            if (!violations.empty()) {
                throw std::invalid_argument(
                    "plan_phases: adjustment at phase " +
                    std::to_string(slot.phase_index) + " moves domain " +
                    domain_name(violations.front().domain) + " by " +
                    std::to_string(violations.front().delta_points) +
                    " points, above the cap");
            }
        }
        if (slot.stage == Stage::stable) {
            mix.instruction_fraction =
                std::min(mix.instruction_fraction, kStableInstructionCap);
            mix.instruction_fraction =
                std::max(mix.instruction_fraction, current.instruction_fraction);
        }
        mix.validate(slot.stage == Stage::stable);
        plan.entries.push_back({slot.phase_index, slot.tokens, mix, slot.stage});
        current = mix;
    }
    plan.validate(cap_points);
    return plan;
}

MixSpec annealing_mix(const PhasePlan& plan) {
    for (auto it = plan.entries.rbegin(); it != plan.entries.rend(); ++it) {
        if (it->stage == Stage::annealing) return it->mix;
    }
    throw std::invalid_argument("annealing_mix: plan has no annealing phases");
}

std::string phase_table(const PhasePlan& plan) {
    std::ostringstream out;
    out << "phase stage      tokens";
    std::vector<Domain> domains;
    for (const auto& e : plan.entries) {
        for (const auto& [dom, p] : e.mix.proportions) {
            if (std::find(domains.begin(), domains.end(), dom) == domains.end()) {
                domains.push_back(dom);
            }
        }
    }
    std::sort(domains.begin(), domains.end());
    for (Domain d : domains) out << ' ' << domain_name(d) << '%';
    out << " instr% longctx%\n";
    for (const auto& e : plan.entries) {
        out << e.phase_index << ' ' << stage_name(e.stage) << ' ' << e.tokens;
        char buf[32];
        for (Domain d : domains) {
            const double p = e.mix.proportions.count(d) ? e.mix.proportions.at(d) : 0.0;
            std::snprintf(buf, sizeof(buf), " %.2f", p * 100.0);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), " %.2f %.2f",
                      e.mix.instruction_fraction * 100.0,
                      e.mix.long_context_fraction * 100.0);
        out << buf << '\n';
    }
    return out.str();
}

PhasePlan phase_plan_from_json(const nlohmann::json& j) {
    PhasePlan plan;
    const auto& b = j.at("budget");
    plan.budget.warmup_tokens = b.at("warmup_tokens").get<std::int64_t>();
    plan.budget.stable_tokens = b.at("stable_tokens").get<std::int64_t>();
    plan.budget.anneal_tokens = b.at("anneal_tokens").get<std::int64_t>();
    plan.budget.phase_size_tokens = b.at("phase_size_tokens").get<std::int64_t>();
    plan.budget.phase_count = b.at("phase_count").get<int>();
    for (const auto& e : j.at("entries")) {
        plan.entries.push_back({
            e.at("phase").get<int>(),
            e.at("tokens").get<std::int64_t>(),
            MixSpec::from_json(e.at("mix")),
            parse_stage(e.at("stage").get<std::string>()),
        });
    }
    plan.validate();
    return plan;
}

} // namespace ptk
