// Command-line front end for the gentle-manipulation laboratory.
//
//   gentle run --config exp.cfg [--seed N] --out DIR
//   gentle eval --checkpoint DIR/checkpoint --episodes N [--config exp.cfg] [--trace out.csv]
//   gentle compare DIR...
//   gentle sweep --param lambda2_prime --values 1.5,2,3 --config exp.cfg --out DIR

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gentle/checkpoint.hpp"
#include "gentle/harness.hpp"

namespace {

gentle::KeyValueConfig load_config(const std::string& path) {
    if (path.empty()) return gentle::KeyValueConfig{};
    return gentle::KeyValueConfig::from_file(path);
}

int cmd_run(const std::string& config_path, long long seed, const std::string& out_dir) {
    gentle::KeyValueConfig kv = load_config(config_path);
    if (seed >= 0) kv.set("experiment.seeds", std::to_string(seed));
    const auto results = gentle::run_experiment(kv, out_dir);
    for (const auto& r : results)
        std::cout << r.run_dir << " final_success=" << r.final_success_rate << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_dir, int episodes, const std::string& config_path,
             const std::string& trace_path, long long seed) {
    gentle::KeyValueConfig kv = load_config(config_path);
    gentle::ExperimentConfig cfg = gentle::ExperimentConfig::from_config(kv);
    auto [actor_spec, actor] = gentle::load_checkpoint(checkpoint_dir + "/actor.bin");

    if (!trace_path.empty()) {
        gentle::ContactEnv env(cfg.env);
        gentle::TrajectoryTraceWriter trace(trace_path, cfg.env);
        std::vector<double> obs = env.reset(static_cast<std::uint64_t>(seed < 0 ? 0 : seed));
        bool done = false;
        while (!done) {
            gentle::StepResult res =
                env.step(gentle::Agent::greedy_action(actor, actor_spec, obs));
            trace.write(env.state(), res);
            obs = res.observation;
            done = res.terminal;
        }
    }

    const auto metrics = gentle::evaluate_policy(
        actor, actor_spec, cfg.env, cfg.reward, cfg.lambda, cfg.lambda_prime, episodes,
        static_cast<std::uint64_t>(seed < 0 ? 0 : seed));
    std::cout << "episode,success,return,max_impact,steps,terminal_cause\n";
    double succ = 0.0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        const auto& m = metrics[i];
        succ += m.success ? 1 : 0;
        std::cout << i << ',' << (m.success ? 1 : 0) << ',' << m.episode_return << ','
                  << m.max_impact << ',' << m.steps << ',' << gentle::to_string(m.cause) << "\n";
    }
    std::cout << "# success_rate=" << succ / metrics.size() << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& dirs) {
    const auto summaries = gentle::compare_runs(dirs);
    std::cout << "run_dir,task,reward_config,median_final_success,median_max_impact,"
                 "median_steps_to_first_success\n";
    for (const auto& s : summaries)
        std::cout << s.run_dir << ',' << s.task << ',' << s.reward_config << ','
                  << s.median_final_success << ',' << s.median_max_impact << ','
                  << s.median_steps_to_first_success << "\n";
    return 0;
}

int cmd_sweep(const std::string& param, const std::string& values_csv,
              const std::string& config_path, const std::string& out_dir) {
    std::vector<std::string> values;
    std::istringstream is(values_csv);
    std::string item;
    while (std::getline(is, item, ',')) values.push_back(item);
    if (values.empty()) {
        std::cerr << "sweep: no values given\n";
        return 1;
    }
    for (const std::string& v : values) {
        gentle::KeyValueConfig kv = load_config(config_path);
        kv.set("rewards." + param, v);
        const std::string dir = out_dir + "/" + param + "_" + v;
        std::cout << "sweep: " << param << "=" << v << " -> " << dir << "\n";
        gentle::run_experiment(kv, dir);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gentle: penalty-based-surprise intrinsic rewards on a toy contact task"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "runs/out", checkpoint_dir, trace_path;
    long long seed = -1;
    int episodes = 10;
    std::vector<std::string> compare_dirs;
    std::string sweep_param = "lambda2_prime", sweep_values;

    auto* run = app.add_subcommand("run", "train agents for an experiment configuration");
    run->add_option("--config", config_path, "key=value config file");
    run->add_option("--seed", seed, "train a single seed instead of the config's seed list");
    run->add_option("--out", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a trained actor checkpoint");
    eval->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
    eval->add_option("--episodes", episodes, "number of greedy episodes");
    eval->add_option("--config", config_path, "config file for the environment");
    eval->add_option("--trace", trace_path, "write a per-step trajectory trace CSV");
    eval->add_option("--seed", seed, "evaluation seed");

    auto* compare = app.add_subcommand("compare", "summarize and compare run directories");
    compare->add_option("dirs", compare_dirs, "run directories")->expected(-2);

    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    sweep->add_option("--param", sweep_param, "rewards.* parameter name");
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--config", config_path, "base config file");
    sweep->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed, out_dir);
        if (eval->parsed()) return cmd_eval(checkpoint_dir, episodes, config_path, trace_path, seed);
        if (compare->parsed()) return cmd_compare(compare_dirs);
        if (sweep->parsed()) return cmd_sweep(sweep_param, sweep_values, config_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
