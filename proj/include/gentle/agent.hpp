#pragma once

// Single-actor distributional deterministic-policy agent: one categorical
// critic per reward component, periodic hard target updates, uniform
// replay, additive Gaussian exploration noise. The actor ascends the sum
// of the configured critics' expected values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gentle/checkpoint.hpp"
#include "gentle/diffcore.hpp"
#include "gentle/distributional.hpp"
#include "gentle/replay.hpp"
#include "gentle/rewards.hpp"

namespace gentle {

enum class CriticComponent { Task, Penalty, DynSurprise, PenSurprise };

inline const char* to_string(CriticComponent c) {
    switch (c) {
        case CriticComponent::Task: return "task";
        case CriticComponent::Penalty: return "penalty";
        case CriticComponent::DynSurprise: return "dynamics_surprise";
        default: return "penalty_surprise";
    }
}

inline std::vector<CriticComponent> critic_components(RewardConfig cfg) {
    std::vector<CriticComponent> out;
    if (uses_task_reward(cfg)) out.push_back(CriticComponent::Task);
    if (uses_impact_penalty(cfg)) out.push_back(CriticComponent::Penalty);
    if (uses_dynamics_surprise(cfg)) out.push_back(CriticComponent::DynSurprise);
    if (uses_penalty_surprise(cfg)) out.push_back(CriticComponent::PenSurprise);
    return out;
}

inline double component_reward(const RewardBreakdown& b, CriticComponent c) {
    switch (c) {
        case CriticComponent::Task: return b.task;
        case CriticComponent::Penalty: return b.impact_penalty;
        case CriticComponent::DynSurprise: return b.dynamics_surprise;
        default: return b.penalty_surprise;
    }
}

struct AgentConfig {
    int observation_dim = 0;
    int action_dim = 0;
    double gamma = 0.99;
    AtomSupport support{-10.0, 10.0, 51};
    std::vector<int> actor_widths = {64, 48};
    std::vector<int> critic_widths = {64, 48};
    int batch_size = 64;
    std::size_t replay_capacity = 100000;
    int target_update_period = 100;  // learner steps between hard copies
    double noise_sigma_start = 0.3;
    double noise_sigma_end = 0.05;
    double actor_weight_decay = 1e-4;
    std::uint64_t noise_decay_steps = 50000;
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    std::vector<CriticComponent> critics = {CriticComponent::Task};

    void validate() const {
        support.validate();
        if (observation_dim <= 0 || action_dim <= 0)
            throw std::invalid_argument("AgentConfig: dimensions must be positive");
        if (critics.empty()) throw std::invalid_argument("AgentConfig: need at least one critic");
        if (batch_size <= 0) throw std::invalid_argument("AgentConfig: batch_size must be > 0");
    }

    // First hidden layer is followed by layer norm and tanh; remaining
    // hidden layers use ELU.
    NetworkSpec actor_spec() const {
        NetworkSpec s;
        s.layer_widths.push_back(observation_dim);
        s.layer_widths.insert(s.layer_widths.end(), actor_widths.begin(), actor_widths.end());
        s.layer_widths.push_back(action_dim);
        s.hidden_activations.assign(actor_widths.size(), Activation::Elu);
        s.hidden_activations[0] = Activation::Tanh;
        s.layer_norm_after_first = true;
        s.output_head = OutputHead::TanhBounded;
        s.validate();
        return s;
    }
    NetworkSpec critic_spec() const {
        NetworkSpec s;
        s.layer_widths.push_back(observation_dim + action_dim);
        s.layer_widths.insert(s.layer_widths.end(), critic_widths.begin(), critic_widths.end());
        s.layer_widths.push_back(support.count);
        s.hidden_activations.assign(critic_widths.size(), Activation::Elu);
        s.hidden_activations[0] = Activation::Tanh;
        s.layer_norm_after_first = true;
        s.output_head = OutputHead::CategoricalLogits;
        s.validate();
        return s;
    }
};

class Agent {
 public:
    Agent(AgentConfig cfg, std::uint64_t seed)
        : cfg_(cfg), replay_(cfg.replay_capacity), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
        cfg_.validate();
        actor_spec_ = cfg_.actor_spec();
        critic_spec_ = cfg_.critic_spec();
        actor_.params = build_network(actor_spec_, seed);
        actor_.opt = AdamState::zeros(actor_.params.values.size());
        actor_target_ = actor_.params;
        for (std::size_t i = 0; i < cfg_.critics.size(); ++i) {
            Net c;
            c.params = build_network(critic_spec_, seed + 101 * (i + 1));
            c.opt = AdamState::zeros(c.params.values.size());
            critic_targets_.push_back(c.params);
            critics_.push_back(std::move(c));
        }
    }

    const AgentConfig& config() const { return cfg_; }
    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }
    const ParamSet& actor_params() const { return actor_.params; }
    const NetworkSpec& actor_spec() const { return actor_spec_; }
    const ParamSet& critic_params(std::size_t i) const { return critics_[i].params; }
    ParamSet& critic_params_mutable(std::size_t i) { return critics_[i].params; }
    const ParamSet& critic_target_params(std::size_t i) const { return critic_targets_[i]; }
    const NetworkSpec& critic_spec() const { return critic_spec_; }
    std::uint64_t learner_steps() const { return learner_steps_; }

    static std::vector<double> greedy_action(const ParamSet& actor, const NetworkSpec& spec,
                                             const std::vector<double>& observation) {
        return forward(actor, spec, observation);
    }

    std::vector<double> act(const std::vector<double>& observation, double noise_scale) {
        std::vector<double> a = forward(actor_.params, actor_spec_, observation);
        if (noise_scale > 0.0) {
            std::normal_distribution<double> noise(0.0, noise_scale);
            for (double& v : a) v = std::clamp(v + noise(rng_), -1.0, 1.0);
        }
        return a;
    }

    double exploration_sigma() const {
        const double frac =
            std::min(1.0, static_cast<double>(learner_steps_) /
                              static_cast<double>(std::max<std::uint64_t>(1, cfg_.noise_decay_steps)));
        return cfg_.noise_sigma_start + frac * (cfg_.noise_sigma_end - cfg_.noise_sigma_start);
    }

    // Cross-entropy against the projected target distribution; one Adam step.
    double critic_update(std::size_t critic_index, const std::vector<const Transition*>& batch) {
        if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
        Net& critic = critics_[critic_index];
        const CriticComponent component = cfg_.critics[critic_index];
        const ParamSet& target_critic = critic_targets_[critic_index];
        const double inv_n = 1.0 / static_cast<double>(batch.size());

        GradSet grads;
        grads.values.assign(critic.params.values.size(), 0.0);
        Tape tape;
        double total_loss = 0.0;
        std::vector<double> input;
        for (const Transition* t : batch) {
            CategoricalValueDist target;
            if (t->terminal) {
                CategoricalValueDist dummy;
                dummy.p.assign(cfg_.support.count, 0.0);
                target = categorical_project(dummy, component_reward(t->rewards, component),
                                             cfg_.gamma, true, cfg_.support);
            } else {
                std::vector<double> next_action =
                    forward(actor_target_, actor_spec_, t->next_state);
                concat(t->next_state, next_action, input);
                CategoricalValueDist next_dist =
                    softmax_dist(forward(target_critic, critic_spec_, input));
                target = categorical_project(next_dist, component_reward(t->rewards, component),
                                             cfg_.gamma, false, cfg_.support);
            }
            concat(t->state, t->action, input);
            std::vector<double> logits = forward(critic.params, critic_spec_, input, tape);
            CategoricalValueDist pred = softmax_dist(logits);
            double loss = 0.0;
            std::vector<double> dlogits(logits.size());
            for (int k = 0; k < cfg_.support.count; ++k) {
                if (target.p[k] > 0.0) loss -= target.p[k] * std::log(std::max(pred.p[k], 1e-300));
                dlogits[k] = (pred.p[k] - target.p[k]) * inv_n;
            }
            total_loss += loss * inv_n;
            backward_accumulate(critic.params, critic_spec_, tape, dlogits, grads);
        }
        adam_step(critic.params, grads, critic.opt, AdamConfig{cfg_.lr_critic});
        return total_loss;
    }

    // Ascends the summed expected value of all configured critics; critic
    // parameters are frozen during this step. Returns the actor gradient
    // L2 norm.
    double actor_update(const std::vector<const Transition*>& batch) {
        GradSet actor_grads = actor_gradient(batch);
        double norm = 0.0;
        for (double g : actor_grads.values) norm += g * g;
        adam_step(actor_.params, actor_grads, actor_.opt, AdamConfig{cfg_.lr_actor});
        if (cfg_.actor_weight_decay > 0.0) {
            // Decoupled decay on affine weights and biases (LayerNorm params
            // excluded). Keeps the tanh head out of permanent saturation:
            // without it a policy that latches onto an all-out action early
            // loses its gradient entirely and can never be pulled back by
            // the critics.
            const std::size_t ln = ParamSet::ln_offset(actor_spec_);
            for (std::size_t i = 0; i < ln; ++i)
                actor_.params.values[i] *= 1.0 - cfg_.actor_weight_decay;
        }
        return std::sqrt(norm);
    }

    // Gradient of the mean over the batch of -sum_critics E[Q(s, actor(s))]
    // with respect to the actor parameters.
    GradSet actor_gradient(const std::vector<const Transition*>& batch) {
        if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
        const double inv_n = 1.0 / static_cast<double>(batch.size());
        GradSet actor_grads;
        actor_grads.values.assign(actor_.params.values.size(), 0.0);
        Tape actor_tape, critic_tape;
        std::vector<double> input;
        for (const Transition* t : batch) {
            std::vector<double> action =
                forward(actor_.params, actor_spec_, t->state, actor_tape);
            std::vector<double> dq_da(cfg_.action_dim, 0.0);
            concat(t->state, action, input);
            for (Net& critic : critics_) {
                std::vector<double> logits =
                    forward(critic.params, critic_spec_, input, critic_tape);
                CategoricalValueDist p = softmax_dist(logits);
                const double ev = p.expected_value(cfg_.support);
                std::vector<double> dlogits(logits.size());
                for (int k = 0; k < cfg_.support.count; ++k)
                    dlogits[k] = p.p[k] * (cfg_.support.atom(k) - ev);
                std::vector<double> dinput =
                    backward_input(critic.params, critic_spec_, critic_tape, dlogits);
                for (int j = 0; j < cfg_.action_dim; ++j)
                    dq_da[j] += dinput[cfg_.observation_dim + j];
            }
            // gradient ascent: minimize -Q
            for (double& g : dq_da) g *= -inv_n;
            backward_accumulate(actor_.params, actor_spec_, actor_tape, dq_da, actor_grads);
        }
        return actor_grads;
    }

    // Hook applied to each sampled transition before learning; used by the
    // harness to refresh surprise rewards against the current frozen
    // predictor targets (stored values go stale as the predictors learn).
    void set_relabel(std::function<void(Transition&)> hook) { relabel_ = std::move(hook); }

    // One learner step: per-critic update then actor update on a fresh batch.
    void learn_step() {
        auto mbatch = replay_.sample_mutable(cfg_.batch_size, rng_);
        if (relabel_)
            for (Transition* t : mbatch) relabel_(*t);
        std::vector<const Transition*> batch(mbatch.begin(), mbatch.end());
        for (std::size_t i = 0; i < critics_.size(); ++i) critic_update(i, batch);
        actor_update(batch);
        learner_steps_ += 1;
        if (learner_steps_ % cfg_.target_update_period == 0) sync_targets();
    }

    void sync_targets() {
        actor_target_ = actor_.params;
        for (std::size_t i = 0; i < critics_.size(); ++i) critic_targets_[i] = critics_[i].params;
    }

    std::mt19937_64& rng() { return rng_; }

    // Checkpoint directory layout: actor.bin, actor_target.bin,
    // critic<i>_<component>.bin and the matching _target files.
    void save(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        save_checkpoint(dir + "/actor.bin", actor_spec_, actor_.params);
        save_checkpoint(dir + "/actor_target.bin", actor_spec_, actor_target_);
        for (std::size_t i = 0; i < critics_.size(); ++i) {
            const std::string base =
                dir + "/critic" + std::to_string(i) + "_" + to_string(cfg_.critics[i]);
            save_checkpoint(base + ".bin", critic_spec_, critics_[i].params);
            save_checkpoint(base + "_target.bin", critic_spec_, critic_targets_[i]);
        }
    }

    void load(const std::string& dir) {
        auto [aspec, aparams] = load_checkpoint(dir + "/actor.bin");
        if (!(aspec == actor_spec_)) throw std::runtime_error("Agent::load: actor spec mismatch");
        actor_.params = std::move(aparams);
        actor_target_ = load_checkpoint(dir + "/actor_target.bin").second;
        for (std::size_t i = 0; i < critics_.size(); ++i) {
            const std::string base =
                dir + "/critic" + std::to_string(i) + "_" + to_string(cfg_.critics[i]);
            critics_[i].params = load_checkpoint(base + ".bin").second;
            critic_targets_[i] = load_checkpoint(base + "_target.bin").second;
        }
    }

 private:
    struct Net {
        ParamSet params;
        AdamState opt;
    };

    static void concat(const std::vector<double>& a, const std::vector<double>& b,
                       std::vector<double>& out) {
        out.clear();
        out.reserve(a.size() + b.size());
        out.insert(out.end(), a.begin(), a.end());
        out.insert(out.end(), b.begin(), b.end());
    }

    AgentConfig cfg_;
    NetworkSpec actor_spec_;
    NetworkSpec critic_spec_;
    Net actor_;
    ParamSet actor_target_;
    std::vector<Net> critics_;
    std::vector<ParamSet> critic_targets_;
    ReplayBuffer replay_;
    std::mt19937_64 rng_;
    std::uint64_t learner_steps_ = 0;
    std::function<void(Transition&)> relabel_;
};

}  // namespace gentle
