#pragma once

// Deep ensemble of M independently seeded Gaussian-output networks.
// Predictions are summarized by moment-matching the per-dimension mixture
// of Gaussians with a single Gaussian. Members train on bootstrap-resampled
// batches under the Gaussian negative log-likelihood. Frozen target
// snapshots serve intrinsic-reward computation.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gentle/checkpoint.hpp"
#include "gentle/diffcore.hpp"

namespace gentle {

struct EnsembleConfig {
    int members = 5;
    std::vector<int> hidden_widths = {32, 32, 32};
    Activation activation = Activation::Relu;
    int input_dim = 0;
    int output_dim = 0;
    int target_refresh_period = 500;  // training iterations between snapshots
    double lr = 1e-3;

    void validate() const {
        if (members < 2) throw std::invalid_argument("EnsembleConfig: need at least 2 members");
        if (target_refresh_period < 1)
            throw std::invalid_argument("EnsembleConfig: refresh period must be >= 1");
        if (input_dim <= 0 || output_dim <= 0)
            throw std::invalid_argument("EnsembleConfig: dimensions must be positive");
    }

    NetworkSpec member_spec() const {
        std::vector<int> widths;
        widths.push_back(input_dim);
        widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
        widths.push_back(output_dim);
        return make_mlp(std::move(widths), activation, OutputHead::GaussianMeanVar);
    }
};

// Per-dimension mixture members plus matched single-Gaussian moments.
struct EnsembleOutput {
    std::vector<std::vector<double>> member_means;      // M x output_dim
    std::vector<std::vector<double>> member_variances;  // M x output_dim
    std::vector<double> mean;                           // mu*
    std::vector<double> variance;                       // sigma*^2, floored

    int output_dim() const { return static_cast<int>(mean.size()); }
};

// mu*_d = (1/M) sum mu_i,d ; sigma*^2_d = (1/M) sum (sigma^2_i,d + mu^2_i,d) - mu*^2_d
inline EnsembleOutput match_moments(std::vector<std::vector<double>> means,
                                    std::vector<std::vector<double>> variances) {
    EnsembleOutput out;
    const std::size_t M = means.size();
    if (M == 0 || variances.size() != M)
        throw std::invalid_argument("match_moments: inconsistent member lists");
    const std::size_t d = means[0].size();
    out.mean.assign(d, 0.0);
    out.variance.assign(d, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            out.mean[k] += means[i][k];
            out.variance[k] += variances[i][k] + means[i][k] * means[i][k];
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        out.mean[k] /= static_cast<double>(M);
        out.variance[k] = out.variance[k] / static_cast<double>(M) - out.mean[k] * out.mean[k];
        out.variance[k] = std::max(out.variance[k], kVarianceFloor);
    }
    out.member_means = std::move(means);
    out.member_variances = std::move(variances);
    return out;
}

// sum_d -log N(target_d | mu*_d, sigma*^2_d)
inline double gaussian_nll(const EnsembleOutput& output, const std::vector<double>& target) {
    if (target.size() != output.mean.size())
        throw std::invalid_argument("gaussian_nll: target dimension mismatch");
    double nll = 0.0;
    for (std::size_t d = 0; d < target.size(); ++d) {
        const double diff = target[d] - output.mean[d];
        nll += 0.5 * std::log(2.0 * std::numbers::pi * output.variance[d]) +
               diff * diff / (2.0 * output.variance[d]);
    }
    return nll;
}

// Frozen parameter snapshot; immutable once created.
struct TargetEnsemble {
    NetworkSpec spec;
    std::vector<ParamSet> member_params;

    EnsembleOutput predict(const std::vector<double>& x) const {
        const int d = spec.layer_widths.back();
        std::vector<std::vector<double>> means, vars;
        means.reserve(member_params.size());
        vars.reserve(member_params.size());
        for (const ParamSet& p : member_params) {
            std::vector<double> out = forward(p, spec, x);
            means.emplace_back(out.begin(), out.begin() + d);
            vars.emplace_back(out.begin() + d, out.end());
        }
        return match_moments(std::move(means), std::move(vars));
    }
};

class Ensemble {
 public:
    Ensemble(EnsembleConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
        cfg_.validate();
        spec_ = cfg_.member_spec();
        members_.reserve(cfg_.members);
        for (int i = 0; i < cfg_.members; ++i) {
            Member m;
            m.params = build_network(spec_, seed * 1000003ULL + static_cast<std::uint64_t>(i));
            m.opt = AdamState::zeros(m.params.values.size());
            members_.push_back(std::move(m));
        }
    }

    const EnsembleConfig& config() const { return cfg_; }
    const NetworkSpec& member_spec() const { return spec_; }
    std::uint64_t train_iterations() const { return train_iterations_; }

    EnsembleOutput predict(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != cfg_.input_dim)
            throw std::invalid_argument("Ensemble::predict: input dimension mismatch");
        const int d = cfg_.output_dim;
        std::vector<std::vector<double>> means, vars;
        means.reserve(members_.size());
        vars.reserve(members_.size());
        for (const Member& m : members_) {
            std::vector<double> out = forward(m.params, spec_, x);
            means.emplace_back(out.begin(), out.begin() + d);
            vars.emplace_back(out.begin() + d, out.end());
        }
        return match_moments(std::move(means), std::move(vars));
    }

    // One Gaussian-NLL gradient step per member, each on an independently
    // bootstrap-resampled (with replacement) view of the batch. Returns the
    // mean NLL per member on its own sub-batch.
    std::vector<double> train_batch(const std::vector<std::vector<double>>& inputs,
                                    const std::vector<std::vector<double>>& targets) {
        if (inputs.empty()) throw std::invalid_argument("Ensemble::train_batch: empty batch");
        if (inputs.size() != targets.size())
            throw std::invalid_argument("Ensemble::train_batch: input/target size mismatch");
        const std::size_t n = inputs.size();
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const AdamConfig adam{cfg_.lr};
        const int d = cfg_.output_dim;

        std::vector<double> losses;
        losses.reserve(members_.size());
        GradSet grads;
        Tape tape;
        std::vector<double> output_grad(2 * d);
        for (Member& m : members_) {
            grads.values.assign(m.params.values.size(), 0.0);
            double loss = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t j = pick(rng_);
                const std::vector<double>& x = inputs[j];
                const std::vector<double>& t = targets[j];
                if (static_cast<int>(t.size()) != d)
                    throw std::invalid_argument("Ensemble::train_batch: target dim mismatch");
                std::vector<double> out = forward(m.params, spec_, x, tape);
                for (int k = 0; k < d; ++k) {
                    const double mu = out[k];
                    const double var = out[d + k];
                    const double diff = mu - t[k];
                    loss += 0.5 * std::log(2.0 * std::numbers::pi * var) +
                            diff * diff / (2.0 * var);
                    output_grad[k] = diff / var / static_cast<double>(n);
                    output_grad[d + k] =
                        0.5 * (1.0 / var - diff * diff / (var * var)) / static_cast<double>(n);
                }
                backward_accumulate(m.params, spec_, tape, output_grad, grads);
            }
            adam_step(m.params, grads, m.opt, adam);
            losses.push_back(loss / static_cast<double>(n));
        }
        train_iterations_ += 1;
        return losses;
    }

    TargetEnsemble snapshot_target() const {
        TargetEnsemble t;
        t.spec = spec_;
        t.member_params.reserve(members_.size());
        for (const Member& m : members_) t.member_params.push_back(m.params);
        return t;
    }

    // True exactly when target_refresh_period training iterations have
    // elapsed since the last refresh mark.
    bool refresh_due() const {
        return train_iterations_ - last_refresh_ >= static_cast<std::uint64_t>(cfg_.target_refresh_period);
    }
    void mark_refreshed() { last_refresh_ = train_iterations_; }

    // Checkpoints reuse the single-network format, one file per member.
    void save(const std::string& dir_prefix) const {
        for (std::size_t i = 0; i < members_.size(); ++i)
            save_checkpoint(dir_prefix + "member" + std::to_string(i) + ".bin", spec_,
                            members_[i].params);
    }
    void load(const std::string& dir_prefix) {
        for (std::size_t i = 0; i < members_.size(); ++i) {
            auto [spec, params] =
                load_checkpoint(dir_prefix + "member" + std::to_string(i) + ".bin");
            if (!(spec == spec_))
                throw std::runtime_error("Ensemble::load: member spec mismatch");
            members_[i].params = std::move(params);
        }
    }

    const ParamSet& member_params(int i) const { return members_[i].params; }
    ParamSet& member_params_mutable(int i) { return members_[i].params; }

 private:
    struct Member {
        ParamSet params;
        AdamState opt;
    };

    EnsembleConfig cfg_;
    NetworkSpec spec_;
    std::vector<Member> members_;
    std::mt19937_64 rng_;
    std::uint64_t train_iterations_ = 0;
    std::uint64_t last_refresh_ = 0;
};

}  // namespace gentle
