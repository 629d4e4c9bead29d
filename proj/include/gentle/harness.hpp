#pragma once

// Experiment runner: trains one agent per seed under a reward
// configuration, with periodic greedy evaluation, and writes CSV learning
// curves, impact histograms, per-step reward decompositions, and a
// manifest from which the run is exactly reproducible.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gentle/agent.hpp"
#include "gentle/config.hpp"
#include "gentle/contact_env.hpp"
#include "gentle/ensemble.hpp"
#include "gentle/rewards.hpp"

namespace gentle {

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string format_csv(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

struct ExperimentConfig {
    Task task = Task::Press;
    RewardConfig reward = RewardConfig::TaskOnly;
    AcceptabilityParams lambda{2.0, 2.0};        // impact acceptability
    AcceptabilityParams lambda_prime{2.0, 2.0};  // penalty acceptability
    std::uint64_t warmup_steps = 2000;
    std::uint64_t total_steps = 50000;  // learner steps
    std::uint64_t fill_steps = 1000;    // random-action replay fill (env steps)
    std::uint64_t eval_period = 1000;   // learner steps between evaluations
    int eval_episodes = 10;
    int ensemble_train_period = 1;  // learner steps between ensemble updates
    int ensemble_warmup_burst = 2000;  // extra ensemble iterations at warmup end
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    EnvConfig env;
    AgentConfig agent;  // observation/action dims and critic set filled at run time
    EnsembleConfig dynamics;  // dims filled at run time
    EnsembleConfig penalty;

    void validate() const {
        env.validate();
        lambda.validate();
        lambda_prime.validate();
        const bool no_reward_config = !uses_task_reward(reward);
        if (no_reward_config && task != Task::None)
            throw std::invalid_argument("ExperimentConfig: no-reward configs require task=none");
        if (!no_reward_config && task == Task::None)
            throw std::invalid_argument("ExperimentConfig: task configs require a task");
        if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: need at least one seed");
        if (total_steps == 0) throw std::invalid_argument("ExperimentConfig: total_steps must be > 0");
    }

    static ExperimentConfig from_config(const KeyValueConfig& kv) {
        ExperimentConfig c;
        const std::string task_s = kv.get_string("experiment.task", "press");
        if (task_s == "press") c.task = Task::Press;
        else if (task_s == "fragile") c.task = Task::Fragile;
        else if (task_s == "none") c.task = Task::None;
        else throw std::runtime_error("unknown task: " + task_s);
        c.reward = reward_config_from_string(kv.get_string("experiment.reward_config", "r"));
        c.lambda.steepness = kv.get_double("rewards.lambda1", 2.0);
        c.lambda.midpoint = kv.get_double("rewards.lambda2", 2.0);
        c.lambda_prime.steepness = kv.get_double("rewards.lambda1_prime", 2.0);
        c.lambda_prime.midpoint = kv.get_double("rewards.lambda2_prime", 2.0);
        c.warmup_steps = kv.get_int("experiment.warmup_steps", 2000);
        c.total_steps = kv.get_int("experiment.total_steps", 50000);
        c.fill_steps = kv.get_int("experiment.fill_steps", 1000);
        c.eval_period = kv.get_int("experiment.eval_period", 1000);
        c.eval_episodes = static_cast<int>(kv.get_int("experiment.eval_episodes", 10));
        c.ensemble_train_period =
            static_cast<int>(kv.get_int("experiment.ensemble_train_period", 1));
        c.ensemble_warmup_burst =
            static_cast<int>(kv.get_int("experiment.ensemble_warmup_burst", 2000));
        {
            std::vector<double> s = kv.get_double_list("experiment.seeds", {1, 2, 3, 4, 5});
            c.seeds.assign(s.begin(), s.end());
        }

        c.env.num_fingers = static_cast<int>(kv.get_int("env.num_fingers", 2));
        c.env.contact_plane = kv.get_double("env.contact_plane", 0.7);
        c.env.contact_stiffness = kv.get_double("env.contact_stiffness", 100.0);
        c.env.max_delta_per_step = kv.get_double("env.max_delta_per_step", 0.05);
        c.env.episode_cap = static_cast<int>(kv.get_int("env.episode_cap", 100));
        c.env.task = c.task;
        c.env.fragile_break_threshold = kv.get_double("env.fragile_break_threshold", 3.0);
        c.env.press_success_threshold = kv.get_double("env.press_success_threshold", 5.0);
        c.env.press_success_reward = kv.get_double("env.press_success_reward", 1.0);
        c.env.fragile_success_reward = kv.get_double("env.fragile_success_reward", 5.0);
        c.env.fragile_break_reward = kv.get_double("env.fragile_break_reward", -0.5);

        c.agent.gamma = kv.get_double("agent.gamma", 0.99);
        c.agent.support.v_min = kv.get_double("agent.v_min", -10.0);
        c.agent.support.v_max = kv.get_double("agent.v_max", 10.0);
        c.agent.support.count = static_cast<int>(kv.get_int("agent.atoms", 51));
        {
            std::vector<double> w = kv.get_double_list("agent.actor_widths", {64, 48});
            c.agent.actor_widths.assign(w.begin(), w.end());
            w = kv.get_double_list("agent.critic_widths", {64, 48});
            c.agent.critic_widths.assign(w.begin(), w.end());
        }
        c.agent.batch_size = static_cast<int>(kv.get_int("agent.batch_size", 64));
        c.agent.replay_capacity = kv.get_int("agent.replay_capacity", 100000);
        c.agent.target_update_period =
            static_cast<int>(kv.get_int("agent.target_update_period", 100));
        c.agent.noise_sigma_start = kv.get_double("agent.noise_sigma_start", 0.3);
        c.agent.noise_sigma_end = kv.get_double("agent.noise_sigma_end", 0.05);
        c.agent.actor_weight_decay = kv.get_double("agent.actor_weight_decay", 1e-4);
        c.agent.noise_decay_steps = kv.get_int("agent.noise_decay_steps", 50000);
        c.agent.lr_actor = kv.get_double("agent.lr_actor", 1e-3);
        c.agent.lr_critic = kv.get_double("agent.lr_critic", 1e-3);

        c.dynamics.members = static_cast<int>(kv.get_int("dynamics.members", 5));
        {
            std::vector<double> w = kv.get_double_list("dynamics.hidden_widths", {32, 32, 32});
            c.dynamics.hidden_widths.assign(w.begin(), w.end());
        }
        c.dynamics.target_refresh_period =
            static_cast<int>(kv.get_int("dynamics.target_refresh_period", 500));
        c.dynamics.lr = kv.get_double("dynamics.lr", 1e-3);

        c.penalty.members = static_cast<int>(kv.get_int("penalty.members", 5));
        {
            std::vector<double> w = kv.get_double_list("penalty.hidden_widths", {32, 32, 32});
            c.penalty.hidden_widths.assign(w.begin(), w.end());
        }
        c.penalty.target_refresh_period =
            static_cast<int>(kv.get_int("penalty.target_refresh_period", 100));
        c.penalty.lr = kv.get_double("penalty.lr", 1e-3);

        c.validate();
        return c;
    }
};

struct RolloutMetrics {
    bool success = false;
    double episode_return = 0.0;  // sum of combined rewards
    double max_impact = 0.0;      // N, max over steps of the summed per-finger impact
    int steps = 0;
    TerminalCause cause = TerminalCause::None;
    std::vector<RewardBreakdown> trace;
};

// Feature normalization for the predictive models. The raw observation
// mixes scales badly (positions ~1, velocities ~0.05, forces up to ~30),
// which stalls NLL training; the models see positions centered on the
// contact plane, velocities and forces brought to unit-ish range. The
// agent networks keep raw observations (layer norm absorbs the scales).
inline std::vector<double> model_features(const std::vector<double>& obs, const EnvConfig& env) {
    const int nf = env.num_fingers;
    std::vector<double> f(obs);
    for (int i = 0; i < nf; ++i) f[i] = (f[i] - env.contact_plane) * 10.0;
    for (int i = nf; i < 2 * nf; ++i) f[i] *= 20.0;
    for (std::size_t i = 2 * nf; i < f.size(); ++i) f[i] *= 0.1;
    return f;
}

inline std::vector<double> model_input(const std::vector<double>& obs,
                                       const std::vector<double>& action,
                                       const EnvConfig& env) {
    std::vector<double> in = model_features(obs, env);
    in.insert(in.end(), action.begin(), action.end());
    return in;
}

// The penalty predictor regresses r^f scaled into unit range; its matched
// moments are mapped back exactly (mean x c, variance x c^2) so Eq. 7 is
// evaluated in Newtons.
constexpr double kPenaltyTargetScale = 0.1;

inline EnsembleOutput rescale_moments(EnsembleOutput out, double c) {
    for (double& m : out.mean) m *= c;
    for (double& v : out.variance) v *= c * c;
    return out;
}

// Minimum predictive variance for the penalty model, in Newton units.
// At sigma^2 = 1/(2*pi) a perfectly predicted penalty scores NLL exactly 0,
// so a converged model neither pays a bonus nor drives the surprise term
// negative into the clamp. Without the floor the learned sigma keeps
// shrinking, NLL goes below -r^f even for tiny impacts, and the
// acceptability-weighted refund that keeps low-penalty contact explorable
// is silently zeroed out.
constexpr double kPenaltyVarianceFloor = 1.0 / (2.0 * std::numbers::pi);

inline EnsembleOutput predict_penalty(const TargetEnsemble& target,
                                      const std::vector<double>& input) {
    EnsembleOutput out = rescale_moments(target.predict(input), 1.0 / kPenaltyTargetScale);
    for (double& v : out.variance) v = std::max(v, kPenaltyVarianceFloor);
    return out;
}

// The dynamics model is three ensembles (positions, velocities, touch);
// the penalty predictor is a single scalar-output ensemble. Both work in
// normalized feature space.
struct DynamicsModel {
    std::vector<std::unique_ptr<Ensemble>> heads;
    std::vector<TargetEnsemble> targets;
    // normalized-observation slice [begin, end) predicted by each head
    std::vector<std::pair<int, int>> slices;

    double surprise(const std::vector<double>& input,
                    const std::vector<double>& next_features) const {
        double r = 0.0;
        for (std::size_t h = 0; h < targets.size(); ++h) {
            const auto [b, e] = slices[h];
            std::vector<double> target_slice(next_features.begin() + b,
                                             next_features.begin() + e);
            r += gaussian_nll(targets[h].predict(input), target_slice);
        }
        return r;
    }
};

// Noise-free rollouts; deterministic given seed. The reward trace carries
// task reward and impact penalty; surprise components are filled only when
// target models are supplied.
inline std::vector<RolloutMetrics> evaluate_policy(
    const ParamSet& actor, const NetworkSpec& actor_spec, const EnvConfig& env_cfg,
    RewardConfig reward, const AcceptabilityParams& lambda,
    const AcceptabilityParams& lambda_prime, int episodes, std::uint64_t seed,
    const DynamicsModel* dynamics = nullptr, const TargetEnsemble* penalty_target = nullptr,
    bool surprise_active = false) {
    std::vector<RolloutMetrics> out;
    out.reserve(episodes);
    ContactEnv env(env_cfg);
    for (int ep = 0; ep < episodes; ++ep) {
        RolloutMetrics m;
        std::vector<double> obs = env.reset(detail::mix_seed(seed, ep));
        bool done = false;
        while (!done) {
            std::vector<double> action = Agent::greedy_action(actor, actor_spec, obs);
            StepResult res = env.step(action);
            RewardBreakdown b;
            b.task = res.task_reward;
            b.impact_penalty = impact_penalty(res.impact, lambda);
            if (surprise_active) {
                std::vector<double> input = model_input(obs, action, env_cfg);
                if (uses_dynamics_surprise(reward) && dynamics)
                    b.dynamics_surprise =
                        dynamics->surprise(input, model_features(res.observation, env_cfg));
                if (uses_penalty_surprise(reward) && penalty_target)
                    b.penalty_surprise =
                        penalty_surprise(predict_penalty(*penalty_target, input),
                                         b.impact_penalty, lambda_prime)
                            .value;
            }
            combine(b, reward);
            m.episode_return += b.combined;
            m.max_impact = std::max(m.max_impact, res.impact.sum());
            m.steps += 1;
            m.trace.push_back(b);
            obs = res.observation;
            done = res.terminal;
            if (done) {
                m.cause = res.cause;
                m.success = res.cause == TerminalCause::Success;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

// Histogram rows over positive samples; zero-impact rollouts are excluded.
struct HistogramRow {
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    std::size_t count = 0;
};

inline std::vector<HistogramRow> make_histogram(const std::vector<double>& samples,
                                                double bin_width, std::size_t* excluded = nullptr) {
    if (bin_width <= 0) throw std::invalid_argument("make_histogram: bin_width must be > 0");
    std::map<long long, std::size_t> bins;
    std::size_t skipped = 0;
    for (double s : samples) {
        if (s <= 0.0) {
            ++skipped;
            continue;
        }
        bins[static_cast<long long>(std::floor(s / bin_width))] += 1;
    }
    if (excluded) *excluded = skipped;
    std::vector<HistogramRow> rows;
    rows.reserve(bins.size());
    for (const auto& [k, n] : bins)
        rows.push_back({k * bin_width, (k + 1) * bin_width, n});
    return rows;
}

inline void export_histogram(const std::vector<double>& samples, double bin_width,
                             const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_histogram: cannot open " + path);
    os << "bin_lo,bin_hi,count\n";
    for (const HistogramRow& r : make_histogram(samples, bin_width))
        os << detail::format_csv(r.bin_lo) << ',' << detail::format_csv(r.bin_hi) << ','
           << r.count << '\n';
}

// Artifacts produced by one (config, seed) training run.
struct TrainResult {
    std::vector<RolloutMetrics> final_eval;
    double final_success_rate = 0.0;
    std::string run_dir;
};

class Trainer {
 public:
    Trainer(ExperimentConfig cfg, std::uint64_t seed, std::string run_dir)
        : cfg_(std::move(cfg)), seed_(seed), run_dir_(std::move(run_dir)) {
        cfg_.validate();
        std::filesystem::create_directories(run_dir_);

        cfg_.agent.observation_dim = cfg_.env.observation_dim();
        cfg_.agent.action_dim = cfg_.env.action_dim();
        cfg_.agent.critics = critic_components(cfg_.reward);
        agent_ = std::make_unique<Agent>(cfg_.agent, seed);

        const int obs = cfg_.env.observation_dim();
        const int act = cfg_.env.action_dim();
        const int nf = cfg_.env.num_fingers;
        if (uses_dynamics_surprise(cfg_.reward)) {
            dynamics_.slices = {{0, nf}, {nf, 2 * nf}, {2 * nf, obs}};
            for (std::size_t h = 0; h < dynamics_.slices.size(); ++h) {
                EnsembleConfig ec = cfg_.dynamics;
                ec.input_dim = obs + act;
                ec.output_dim = dynamics_.slices[h].second - dynamics_.slices[h].first;
                dynamics_.heads.push_back(
                    std::make_unique<Ensemble>(ec, detail::mix_seed(seed, 7000 + h)));
                dynamics_.targets.push_back(dynamics_.heads.back()->snapshot_target());
            }
        }
        if (uses_penalty_surprise(cfg_.reward)) {
            EnsembleConfig ec = cfg_.penalty;
            ec.input_dim = obs + act;
            ec.output_dim = 1;
            penalty_model_ = std::make_unique<Ensemble>(ec, detail::mix_seed(seed, 9000));
            penalty_target_ = penalty_model_->snapshot_target();
        }
        // Surprise rewards are refreshed against the current frozen targets
        // whenever a transition is sampled for learning; stored values from
        // collection time go stale as the predictors improve (and are zero
        // for anything collected before warmup).
        if (uses_dynamics_surprise(cfg_.reward) || uses_penalty_surprise(cfg_.reward)) {
            agent_->set_relabel([this](Transition& t) {
                const bool warm = agent_->learner_steps() >= cfg_.warmup_steps;
                std::vector<double> input;
                if (warm) input = model_input(t.state, t.action, cfg_.env);
                if (uses_dynamics_surprise(cfg_.reward))
                    t.rewards.dynamics_surprise =
                        warm ? dynamics_.surprise(input, model_features(t.next_state, cfg_.env))
                             : 0.0;
                if (uses_penalty_surprise(cfg_.reward))
                    t.rewards.penalty_surprise =
                        warm ? penalty_surprise(predict_penalty(penalty_target_, input),
                                                t.rewards.impact_penalty, cfg_.lambda_prime)
                                   .value
                             : 0.0;
                combine(t.rewards, cfg_.reward);
            });
        }
    }

    TrainResult run() {
        namespace fs = std::filesystem;
        std::ofstream curve(run_dir_ + "/learning_curve.csv");
        std::ofstream impacts(run_dir_ + "/impacts.csv");
        std::ofstream rewards_csv(run_dir_ + "/rewards.csv");
        curve << "learner_step,env_step,success_rate,mean_return\n";
        impacts << "learner_step,episode,max_impact,success,steps,terminal_cause\n";
        rewards_csv << "learner_step,r,r_f,r_s,r_sp,r_prime\n";

        ContactEnv env(cfg_.env);
        std::vector<double> obs = env.reset(detail::mix_seed(seed_, episode_counter_++));
        std::mt19937_64 action_rng(detail::mix_seed(seed_, 0xAC710ull));
        std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);

        std::uint64_t env_steps = 0;
        RewardBreakdown window_sum;
        std::uint64_t window_count = 0;
        TrainResult result;
        result.run_dir = run_dir_;

        while (agent_->learner_steps() < cfg_.total_steps) {
            std::vector<double> action(cfg_.env.action_dim());
            if (env_steps < cfg_.fill_steps) {
                for (double& a : action) a = uniform_action(action_rng);
            } else {
                action = agent_->act(obs, agent_->exploration_sigma());
            }
            StepResult res = env.step(action);
            env_steps += 1;

            Transition t;
            t.state = obs;
            t.action = action;
            t.next_state = res.observation;
            t.terminal = res.terminal;
            t.rewards.task = res.task_reward;
            t.rewards.impact_penalty = impact_penalty(res.impact, cfg_.lambda);
            const bool warm = agent_->learner_steps() >= cfg_.warmup_steps;
            if (warm) {
                std::vector<double> input = model_input(obs, action, cfg_.env);
                if (uses_dynamics_surprise(cfg_.reward))
                    t.rewards.dynamics_surprise =
                        dynamics_.surprise(input, model_features(res.observation, cfg_.env));
                if (uses_penalty_surprise(cfg_.reward))
                    t.rewards.penalty_surprise =
                        penalty_surprise(predict_penalty(penalty_target_, input),
                                         t.rewards.impact_penalty, cfg_.lambda_prime)
                            .value;
            }
            combine(t.rewards, cfg_.reward);
            window_sum.task += t.rewards.task;
            window_sum.impact_penalty += t.rewards.impact_penalty;
            window_sum.dynamics_surprise += t.rewards.dynamics_surprise;
            window_sum.penalty_surprise += t.rewards.penalty_surprise;
            window_sum.combined += t.rewards.combined;
            window_count += 1;
            agent_->replay().push(std::move(t));

            obs = res.terminal ? env.reset(detail::mix_seed(seed_, episode_counter_++))
                               : res.observation;

            if (env_steps < cfg_.fill_steps) continue;

            agent_->learn_step();
            if (!warmup_burst_done_ && agent_->learner_steps() >= cfg_.warmup_steps) {
                // Calibrate the ensembles on everything collected so far, so
                // surprise rewards activate against a converged predictor
                // rather than paying out a large transient of model error.
                for (int i = 0; i < cfg_.ensemble_warmup_burst; ++i) train_models_once();
                warmup_burst_done_ = true;
            }
            train_models();

            if (agent_->learner_steps() % cfg_.eval_period == 0 ||
                agent_->learner_steps() >= cfg_.total_steps) {
                const std::uint64_t step = agent_->learner_steps();
                std::vector<RolloutMetrics> metrics = evaluate_now(step);
                double succ = 0.0, ret = 0.0;
                for (std::size_t ep = 0; ep < metrics.size(); ++ep) {
                    const RolloutMetrics& m = metrics[ep];
                    succ += m.success ? 1.0 : 0.0;
                    ret += m.episode_return;
                    impacts << step << ',' << ep << ',' << detail::format_csv(m.max_impact)
                            << ',' << (m.success ? 1 : 0) << ',' << m.steps << ','
                            << to_string(m.cause) << '\n';
                }
                succ /= metrics.size();
                ret /= metrics.size();
                curve << step << ',' << env_steps << ',' << detail::format_csv(succ) << ','
                      << detail::format_csv(ret) << '\n';
                const double inv = window_count ? 1.0 / static_cast<double>(window_count) : 0.0;
                rewards_csv << step << ',' << detail::format_csv(window_sum.task * inv) << ','
                            << detail::format_csv(window_sum.impact_penalty * inv) << ','
                            << detail::format_csv(window_sum.dynamics_surprise * inv) << ','
                            << detail::format_csv(window_sum.penalty_surprise * inv) << ','
                            << detail::format_csv(window_sum.combined * inv) << '\n';
                window_sum = RewardBreakdown{};
                window_count = 0;
                curve.flush();
                impacts.flush();
                rewards_csv.flush();
                if (log_level() >= 1)
                    std::cerr << "[gentle] " << run_dir_ << " step " << step << " success "
                              << succ << " return " << ret << "\n";
                if (agent_->learner_steps() >= cfg_.total_steps) {
                    result.final_eval = std::move(metrics);
                    result.final_success_rate = succ;
                }
            }
        }

        agent_->save(run_dir_ + "/checkpoint");
        if (penalty_model_) penalty_model_->save(run_dir_ + "/checkpoint/penalty_");
        for (std::size_t h = 0; h < dynamics_.heads.size(); ++h)
            dynamics_.heads[h]->save(run_dir_ + "/checkpoint/dynamics" + std::to_string(h) + "_");
        return result;
    }

    Agent& agent() { return *agent_; }
    const DynamicsModel& dynamics() const { return dynamics_; }
    const TargetEnsemble& penalty_target() const { return penalty_target_; }

 private:
    void train_models() {
        if (agent_->learner_steps() % cfg_.ensemble_train_period != 0) return;
        train_models_once();
    }

    void train_models_once() {
        if (!penalty_model_ && dynamics_.heads.empty()) return;
        auto batch = agent_->replay().sample(cfg_.agent.batch_size, agent_->rng());
        std::vector<std::vector<double>> inputs;
        inputs.reserve(batch.size());
        for (const Transition* t : batch)
            inputs.push_back(model_input(t->state, t->action, cfg_.env));
        std::vector<std::vector<double>> next_features;
        if (!dynamics_.heads.empty()) {
            next_features.reserve(batch.size());
            for (const Transition* t : batch)
                next_features.push_back(model_features(t->next_state, cfg_.env));
        }
        for (std::size_t h = 0; h < dynamics_.heads.size(); ++h) {
            const auto [b, e] = dynamics_.slices[h];
            std::vector<std::vector<double>> targets;
            targets.reserve(batch.size());
            for (const std::vector<double>& nf : next_features)
                targets.emplace_back(nf.begin() + b, nf.begin() + e);
            dynamics_.heads[h]->train_batch(inputs, targets);
            if (dynamics_.heads[h]->refresh_due()) {
                dynamics_.targets[h] = dynamics_.heads[h]->snapshot_target();
                dynamics_.heads[h]->mark_refreshed();
            }
        }
        if (penalty_model_) {
            std::vector<std::vector<double>> targets;
            targets.reserve(batch.size());
            for (const Transition* t : batch)
                targets.push_back({t->rewards.impact_penalty * kPenaltyTargetScale});
            penalty_model_->train_batch(inputs, targets);
            if (penalty_model_->refresh_due()) {
                penalty_target_ = penalty_model_->snapshot_target();
                penalty_model_->mark_refreshed();
            }
        }
    }

    std::vector<RolloutMetrics> evaluate_now(std::uint64_t step) {
        const bool warm = agent_->learner_steps() >= cfg_.warmup_steps;
        return evaluate_policy(agent_->actor_params(), agent_->actor_spec(), cfg_.env,
                               cfg_.reward, cfg_.lambda, cfg_.lambda_prime, cfg_.eval_episodes,
                               detail::mix_seed(seed_, 0xE7A1ull + step),
                               dynamics_.heads.empty() ? nullptr : &dynamics_,
                               penalty_model_ ? &penalty_target_ : nullptr, warm);
    }

    ExperimentConfig cfg_;
    std::uint64_t seed_;
    std::string run_dir_;
    std::unique_ptr<Agent> agent_;
    DynamicsModel dynamics_;
    std::unique_ptr<Ensemble> penalty_model_;
    TargetEnsemble penalty_target_;
    std::uint64_t episode_counter_ = 0;
    bool warmup_burst_done_ = false;
};

// Runs every seed of the experiment; writes one subdirectory per seed plus
// the resolved manifest at the top level.
inline std::vector<TrainResult> run_experiment(const KeyValueConfig& kv,
                                               const std::string& out_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream manifest(out_dir + "/manifest.txt");
        manifest << kv.manifest();
    }
    std::vector<TrainResult> results;
    for (std::uint64_t seed : cfg.seeds) {
        Trainer trainer(cfg, seed, out_dir + "/seed" + std::to_string(seed));
        results.push_back(trainer.run());
    }
    return results;
}

// Per-run summary over seeds, for cross-configuration comparison.
struct RunSummary {
    std::string run_dir;
    std::string task;
    std::string reward_config;
    double median_final_success = 0.0;
    double median_max_impact = 0.0;  // over final-evaluation episodes, all seeds
    double median_steps_to_first_success = -1.0;  // -1 when never successful
};

inline RunSummary summarize_run(const std::string& run_dir) {
    namespace fs = std::filesystem;
    RunSummary s;
    s.run_dir = run_dir;
    const std::string manifest_path = run_dir + "/manifest.txt";
    if (!fs::exists(manifest_path))
        throw std::runtime_error("compare: missing manifest " + manifest_path);
    {
        std::ifstream is(manifest_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.rfind("experiment.task = ", 0) == 0) s.task = line.substr(18);
            if (line.rfind("experiment.reward_config = ", 0) == 0)
                s.reward_config = line.substr(27);
        }
    }
    std::vector<double> finals, first_success, max_impacts;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("seed", 0) != 0) continue;
        const std::string curve_path = entry.path().string() + "/learning_curve.csv";
        std::ifstream curve(curve_path);
        if (!curve) throw std::runtime_error("compare: missing " + curve_path);
        std::string line;
        std::getline(curve, line);  // header
        double last_success = 0.0;
        double first = -1.0;
        std::uint64_t last_step = 0;
        while (std::getline(curve, line)) {
            std::istringstream ls(line);
            std::string field;
            std::getline(ls, field, ',');
            const std::uint64_t step = std::stoull(field);
            std::getline(ls, field, ',');
            std::getline(ls, field, ',');
            const double succ = std::stod(field);
            if (succ > 0.5 && first < 0) first = static_cast<double>(step);
            last_success = succ;
            last_step = step;
        }
        finals.push_back(last_success);
        if (first >= 0) first_success.push_back(first);

        const std::string impacts_path = entry.path().string() + "/impacts.csv";
        std::ifstream imp(impacts_path);
        if (!imp) throw std::runtime_error("compare: missing " + impacts_path);
        std::getline(imp, line);
        while (std::getline(imp, line)) {
            std::istringstream ls(line);
            std::string field;
            std::getline(ls, field, ',');
            if (std::stoull(field) != last_step) continue;
            std::getline(ls, field, ',');
            std::getline(ls, field, ',');
            max_impacts.push_back(std::stod(field));
        }
    }
    if (finals.empty()) throw std::runtime_error("compare: no seed directories in " + run_dir);
    s.median_final_success = detail::median(finals);
    if (!max_impacts.empty()) s.median_max_impact = detail::median(max_impacts);
    if (!first_success.empty())
        s.median_steps_to_first_success = detail::median(first_success);
    return s;
}

inline std::vector<RunSummary> compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.size() < 2) throw std::invalid_argument("compare_runs: need at least 2 runs");
    std::vector<RunSummary> out;
    for (const std::string& d : run_dirs) out.push_back(summarize_run(d));
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].task != out[0].task)
            throw std::runtime_error("compare_runs: mismatched tasks: " + out[0].task + " vs " +
                                     out[i].task);
    return out;
}

}  // namespace gentle
