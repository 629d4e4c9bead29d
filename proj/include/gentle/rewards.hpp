#pragma once

// Intrinsic reward components and their combination: sigmoid acceptability
// curves, impact penalty, dynamics-based surprise, penalty-based surprise,
// and warmup gating.

#include <cmath>
#include <stdexcept>
#include <string>

#include "gentle/contact_env.hpp"
#include "gentle/ensemble.hpp"

namespace gentle {

// a(m) = 1 / (1 + exp(steepness * (m - midpoint))), strictly decreasing in m.
struct AcceptabilityParams {
    double steepness = 2.0;  // 1/N
    double midpoint = 2.0;   // N

    void validate() const {
        if (steepness <= 0) throw std::invalid_argument("AcceptabilityParams: steepness must be > 0");
    }
};

inline double acceptability(double m, const AcceptabilityParams& p) {
    return 1.0 / (1.0 + std::exp(p.steepness * (m - p.midpoint)));
}

// r^f = -sum_i (1 - a(m^i)) * m^i, always <= 0
inline double impact_penalty(const ImpactVector& impacts, const AcceptabilityParams& p) {
    double rf = 0.0;
    for (double m : impacts.values) {
        if (m < 0) throw std::invalid_argument("impact_penalty: impacts must be non-negative");
        rf -= (1.0 - acceptability(m, p)) * m;
    }
    return rf;
}

// r^s: negative log-likelihood of the observed next state under the frozen
// target dynamics model's moment-matched Gaussian, summed over dimensions.
inline double dynamics_surprise(const EnsembleOutput& target_prediction,
                                const std::vector<double>& next_state) {
    return gaussian_nll(target_prediction, next_state);
}

// r^{s_p}: acceptability-weighted surprise about the impact penalty itself.
// Zero when the penalty is zero; otherwise
//   a_{lambda'}(|r^f|) * (NLL(r^f | mu*, sigma*^2) - r^f), clamped below at 0.
// The acceptability is evaluated on the penalty magnitude, which makes it
// monotonically increasing in r^f on r^f <= 0.
struct PenaltySurpriseResult {
    double value = 0.0;
    bool clamped = false;
    double nll = 0.0;
    double acceptability = 0.0;
};

inline PenaltySurpriseResult penalty_surprise(const EnsembleOutput& target_prediction,
                                              double rf, const AcceptabilityParams& lambda_prime) {
    if (rf > 0) throw std::invalid_argument("penalty_surprise: penalty must be <= 0");
    PenaltySurpriseResult res;
    if (rf == 0.0) return res;
    res.nll = gaussian_nll(target_prediction, {rf});
    res.acceptability = acceptability(-rf, lambda_prime);
    const double raw = res.acceptability * (res.nll - rf);
    if (raw < 0.0) {
        res.clamped = true;
        res.value = 0.0;
    } else {
        res.value = raw;
    }
    return res;
}

// Which reward components feed the agent.
enum class RewardConfig {
    TaskOnly,               // r
    TaskPenalty,            // r + r^f
    TaskPenaltyDynSurprise, // r + r^f + r^s
    TaskPenaltyPenSurprise, // r + r^f + r^{s_p}
    DynSurpriseOnly,        // r^s
    PenaltyDynSurprise,     // r^f + r^s
    PenaltyPenSurprise,     // r^f + r^{s_p}
};

inline const char* to_string(RewardConfig c) {
    switch (c) {
        case RewardConfig::TaskOnly: return "r";
        case RewardConfig::TaskPenalty: return "r+rf";
        case RewardConfig::TaskPenaltyDynSurprise: return "r+rf+rs";
        case RewardConfig::TaskPenaltyPenSurprise: return "r+rf+rsp";
        case RewardConfig::DynSurpriseOnly: return "rs";
        case RewardConfig::PenaltyDynSurprise: return "rf+rs";
        default: return "rf+rsp";
    }
}

inline RewardConfig reward_config_from_string(const std::string& s) {
    if (s == "r") return RewardConfig::TaskOnly;
    if (s == "r+rf") return RewardConfig::TaskPenalty;
    if (s == "r+rf+rs") return RewardConfig::TaskPenaltyDynSurprise;
    if (s == "r+rf+rsp") return RewardConfig::TaskPenaltyPenSurprise;
    if (s == "rs") return RewardConfig::DynSurpriseOnly;
    if (s == "rf+rs") return RewardConfig::PenaltyDynSurprise;
    if (s == "rf+rsp") return RewardConfig::PenaltyPenSurprise;
    throw std::invalid_argument("unknown reward config: " + s);
}

inline bool uses_task_reward(RewardConfig c) {
    return c == RewardConfig::TaskOnly || c == RewardConfig::TaskPenalty ||
           c == RewardConfig::TaskPenaltyDynSurprise || c == RewardConfig::TaskPenaltyPenSurprise;
}
inline bool uses_impact_penalty(RewardConfig c) { return c != RewardConfig::TaskOnly && c != RewardConfig::DynSurpriseOnly; }
inline bool uses_dynamics_surprise(RewardConfig c) {
    return c == RewardConfig::TaskPenaltyDynSurprise || c == RewardConfig::DynSurpriseOnly ||
           c == RewardConfig::PenaltyDynSurprise;
}
inline bool uses_penalty_surprise(RewardConfig c) {
    return c == RewardConfig::TaskPenaltyPenSurprise || c == RewardConfig::PenaltyPenSurprise;
}

// All reward components observed at one step plus their combination.
struct RewardBreakdown {
    double task = 0.0;              // r
    double impact_penalty = 0.0;    // r^f <= 0
    double dynamics_surprise = 0.0; // r^s
    double penalty_surprise = 0.0;  // r^{s_p} >= 0
    double combined = 0.0;          // r'
};

// r' = sum of the components active under the configuration.
inline double combine(RewardBreakdown& b, RewardConfig cfg) {
    double r = 0.0;
    if (uses_task_reward(cfg)) r += b.task;
    if (uses_impact_penalty(cfg)) r += b.impact_penalty;
    if (uses_dynamics_surprise(cfg)) r += b.dynamics_surprise;
    if (uses_penalty_surprise(cfg)) r += b.penalty_surprise;
    b.combined = r;
    return r;
}

// Surprise rewards are withheld until warmup_steps training steps elapse.
struct WarmupSchedule {
    std::uint64_t warmup_steps = 2000;
    std::uint64_t current_step = 0;

    bool active() const { return current_step >= warmup_steps; }
    void advance() { current_step += 1; }
};

}  // namespace gentle
