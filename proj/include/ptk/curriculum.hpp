#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptk/document.hpp"

namespace ptk {

enum class Stage { warmup, stable, annealing };

const char* stage_name(Stage s);
Stage parse_stage(std::string_view name);

struct StageBudget {
    std::int64_t warmup_tokens = 0;
    std::int64_t stable_tokens = 0;
    std::int64_t anneal_tokens = 0;
    std::int64_t phase_size_tokens = 0;
    int phase_count = 0;

    std::int64_t total() const { return warmup_tokens + stable_tokens + anneal_tokens; }
    void validate() const;
    nlohmann::json to_json() const;
};

// Solves stable + round(anneal_ratio * stable) = total - warmup for an
// integer stable budget; phase_count = ceil(total / phase_size). Throws when
// no consistent integer split exists.
StageBudget stage_budgets(std::int64_t total_tokens, std::int64_t warmup_tokens,
                          double anneal_ratio, std::int64_t phase_size);

struct MixSpec {
    std::map<Domain, double> proportions;  // must sum to 1
    double instruction_fraction = 0.0;
    double long_context_fraction = 0.0;

    // stable_stage additionally enforces the 5% instruction cap.
    void validate(bool stable_stage = false) const;
    nlohmann::json to_json() const;
    static MixSpec from_json(const nlohmann::json& j);
};

// The default stable mix: 60% general English (45 web + 15 book),
// 20% code, 10% math, 10% Chinese.
MixSpec default_stable_mix();
// Annealing defaults: instruction 19.19%, long context 14.21%.
MixSpec default_annealing_mix();

struct PhaseEntry {
    int phase_index = 0; // 1-based; a phase split by a stage boundary keeps its index
    std::int64_t tokens = 0;
    MixSpec mix;
    Stage stage = Stage::stable;
};

struct PhasePlan {
    StageBudget budget;
    std::vector<PhaseEntry> entries;

    int phase_count() const;
    nlohmann::json to_json() const;
    void validate(double cap_points = 3.0) const;
};

struct ShiftViolation {
    Domain domain;
    double delta_points; // absolute percentage points
};

// Per-domain |a-b| in percentage points against an inclusive cap. An empty
// result means the shift is allowed.
std::vector<ShiftViolation> validate_shift(const MixSpec& a, const MixSpec& b,
                                           double cap_points);

// Per-phase deltas (percentage points, by domain) applied when a phase begins.
using MixAdjustments = std::map<int, std::map<Domain, double>>;

// Plans per-phase mixes: linear interpolation toward each stage's target,
// rate-limited so consecutive same-stage phases never move any domain by more
// than cap_points. Stable-stage instruction fraction ramps monotonically and
// never exceeds 5%.
PhasePlan plan_phases(const StageBudget& budget, const MixSpec& start_mix,
                      const std::map<Stage, MixSpec>& target_mix_by_stage,
                      const MixAdjustments& observed_adjustments = {},
                      double cap_points = 3.0);

// The mix of the final annealing phase. Throws when the plan has none.
MixSpec annealing_mix(const PhasePlan& plan);

// Human-readable per-phase composition table.
std::string phase_table(const PhasePlan& plan);

PhasePlan phase_plan_from_json(const nlohmann::json& j);

} // namespace ptk
