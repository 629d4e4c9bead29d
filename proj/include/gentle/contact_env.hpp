#pragma once

// Deterministic toy contact environment: N position-controlled fingers on a
// 1-DOF joint range [0,1] pressing against a spring plane at contact_plane.
// Sensed normal force is k * penetration; two tangential channels are
// carried for interface parity but stay zero. Tasks: press (>= 5N force
// succeeds), fragile (impact > 3N breaks the block), or none.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gentle {

enum class Task { None, Press, Fragile };
enum class TerminalCause { None, Success, Break, Cap };

inline const char* to_string(Task t) {
    switch (t) {
        case Task::Press: return "press";
        case Task::Fragile: return "fragile";
        default: return "none";
    }
}

inline const char* to_string(TerminalCause c) {
    switch (c) {
        case TerminalCause::Success: return "success";
        case TerminalCause::Break: return "break";
        case TerminalCause::Cap: return "cap";
        default: return "none";
    }
}

struct EnvConfig {
    int num_fingers = 2;
    double contact_plane = 0.7;
    double contact_stiffness = 100.0;  // N per unit penetration
    double max_delta_per_step = 0.05;
    int episode_cap = 100;
    Task task = Task::Press;
    double fragile_break_threshold = 3.0;  // N of impact
    double press_success_threshold = 5.0;  // N of force
    double press_success_reward = 1.0;
    double fragile_success_reward = 5.0;
    double fragile_break_reward = -0.5;

    static constexpr int kForceChannels = 3;  // 1 normal + 2 tangential

    void validate() const {
        if (num_fingers <= 0) throw std::invalid_argument("EnvConfig: num_fingers must be > 0");
        if (fragile_break_threshold <= 0 || press_success_threshold <= 0)
            throw std::invalid_argument("EnvConfig: thresholds must be positive");
        if (max_delta_per_step * contact_stiffness < fragile_break_threshold)
            throw std::invalid_argument(
                "EnvConfig: max step impact below break threshold, fragile task is vacuous");
        if (contact_plane <= 0.0 || contact_plane >= 1.0)
            throw std::invalid_argument("EnvConfig: contact_plane must lie in (0,1)");
    }

    int observation_dim() const { return num_fingers * (2 + kForceChannels); }
    int action_dim() const { return num_fingers; }
};

// Per-finger, per-channel sensed force in Newtons, spatially summed.
struct ForceReading {
    int num_fingers = 0;
    std::vector<double> values;  // num_fingers * kForceChannels, finger-major

    static ForceReading zeros(int fingers) {
        ForceReading f;
        f.num_fingers = fingers;
        f.values.assign(static_cast<std::size_t>(fingers) * EnvConfig::kForceChannels, 0.0);
        return f;
    }
    double channel(int finger, int c) const {
        return values[static_cast<std::size_t>(finger) * EnvConfig::kForceChannels + c];
    }
    double& channel(int finger, int c) {
        return values[static_cast<std::size_t>(finger) * EnvConfig::kForceChannels + c];
    }
};

// Per-finger non-negative force increase m_t^i.
struct ImpactVector {
    std::vector<double> values;

    double max() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, v);
        return m;
    }
    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

// m^i = sum over channels of max(0, f_next - f_prev).
inline ImpactVector compute_impact(const ForceReading& prev, const ForceReading& next) {
    if (prev.num_fingers != next.num_fingers || prev.values.size() != next.values.size())
        throw std::invalid_argument("compute_impact: shape mismatch");
    ImpactVector m;
    m.values.assign(prev.num_fingers, 0.0);
    for (int i = 0; i < prev.num_fingers; ++i)
        for (int c = 0; c < EnvConfig::kForceChannels; ++c)
            m.values[i] += std::max(0.0, next.channel(i, c) - prev.channel(i, c));
    return m;
}

struct EnvState {
    std::vector<double> positions;   // q_i in [0,1]
    std::vector<double> velocities;  // finite-difference, per step
    int step_index = 0;
    bool broken = false;
    bool terminal = false;
};

struct StepResult {
    std::vector<double> observation;
    ForceReading force;
    ImpactVector impact;
    double task_reward = 0.0;
    bool terminal = false;
    TerminalCause cause = TerminalCause::None;
};

// Observation layout: [positions | velocities | per-finger 3-channel forces].
inline std::vector<double> observe(const EnvConfig& cfg, const EnvState& state,
                                   const ForceReading& last_force) {
    std::vector<double> obs;
    obs.reserve(cfg.observation_dim());
    obs.insert(obs.end(), state.positions.begin(), state.positions.end());
    obs.insert(obs.end(), state.velocities.begin(), state.velocities.end());
    obs.insert(obs.end(), last_force.values.begin(), last_force.values.end());
    return obs;
}

class ContactEnv {
 public:
    explicit ContactEnv(EnvConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const EnvConfig& config() const { return cfg_; }
    const EnvState& state() const { return state_; }
    const ForceReading& last_force() const { return force_; }

    std::vector<double> reset(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const double hi = cfg_.contact_plane - 2.0 * cfg_.max_delta_per_step;
        std::uniform_real_distribution<double> dist(0.0, hi);
        state_ = EnvState{};
        state_.positions.resize(cfg_.num_fingers);
        state_.velocities.assign(cfg_.num_fingers, 0.0);
        for (auto& q : state_.positions) q = dist(rng);
        force_ = sense(state_.positions);
        return observe(cfg_, state_, force_);
    }

    StepResult step(const std::vector<double>& action) {
        if (state_.terminal)
            throw std::logic_error("ContactEnv::step: episode already terminal");
        if (static_cast<int>(action.size()) != cfg_.num_fingers)
            throw std::invalid_argument("ContactEnv::step: action dimension mismatch");

        std::vector<double> q_next(cfg_.num_fingers);
        for (int i = 0; i < cfg_.num_fingers; ++i) {
            const double a = std::clamp(action[i], -1.0, 1.0);
            q_next[i] = std::clamp(state_.positions[i] + a * cfg_.max_delta_per_step, 0.0, 1.0);
        }
        ForceReading f_next = sense(q_next);
        StepResult res;
        res.impact = compute_impact(force_, f_next);

        for (int i = 0; i < cfg_.num_fingers; ++i)
            state_.velocities[i] = q_next[i] - state_.positions[i];
        state_.positions = q_next;
        state_.step_index += 1;

        double max_force = 0.0;
        for (int i = 0; i < cfg_.num_fingers; ++i)
            max_force = std::max(max_force, f_next.channel(i, 0));

        switch (cfg_.task) {
            case Task::Press:
                if (max_force >= cfg_.press_success_threshold) {
                    res.task_reward = cfg_.press_success_reward;
                    res.cause = TerminalCause::Success;
                }
                break;
            case Task::Fragile:
                if (res.impact.max() > cfg_.fragile_break_threshold) {
                    res.task_reward = cfg_.fragile_break_reward;
                    res.cause = TerminalCause::Break;
                    state_.broken = true;
                } else if (max_force >= cfg_.press_success_threshold) {
                    res.task_reward = cfg_.fragile_success_reward;
                    res.cause = TerminalCause::Success;
                }
                break;
            case Task::None:
                break;
        }
        if (res.cause == TerminalCause::None && state_.step_index >= cfg_.episode_cap)
            res.cause = TerminalCause::Cap;
        res.terminal = res.cause != TerminalCause::None;
        state_.terminal = res.terminal;

        force_ = std::move(f_next);
        res.force = force_;
        res.observation = observe(cfg_, state_, force_);
        return res;
    }

 private:
    ForceReading sense(const std::vector<double>& q) const {
        ForceReading f = ForceReading::zeros(cfg_.num_fingers);
        for (int i = 0; i < cfg_.num_fingers; ++i) {
            const double pen = std::max(0.0, q[i] - cfg_.contact_plane);
            f.channel(i, 0) = cfg_.contact_stiffness * pen;
        }
        return f;
    }

    EnvConfig cfg_;
    EnvState state_;
    ForceReading force_;
};

// One CSV row per step: step, positions, velocities, per-channel forces,
// impacts, task reward, terminal cause.
class TrajectoryTraceWriter {
 public:
    TrajectoryTraceWriter(const std::string& path, const EnvConfig& cfg) : os_(path) {
        if (!os_) throw std::runtime_error("TrajectoryTraceWriter: cannot open " + path);
        os_ << "step";
        for (int i = 0; i < cfg.num_fingers; ++i) os_ << ",q" << i;
        for (int i = 0; i < cfg.num_fingers; ++i) os_ << ",v" << i;
        for (int i = 0; i < cfg.num_fingers; ++i)
            for (int c = 0; c < EnvConfig::kForceChannels; ++c) os_ << ",f" << i << "_" << c;
        for (int i = 0; i < cfg.num_fingers; ++i) os_ << ",m" << i;
        os_ << ",task_reward,terminal_cause\n";
    }

    void write(const EnvState& state, const StepResult& res) {
        os_ << state.step_index;
        for (double q : state.positions) os_ << ',' << q;
        for (double v : state.velocities) os_ << ',' << v;
        for (double f : res.force.values) os_ << ',' << f;
        for (double m : res.impact.values) os_ << ',' << m;
        os_ << ',' << res.task_reward << ',' << to_string(res.cause) << '\n';
    }

 private:
    std::ofstream os_;
};

}  // namespace gentle
