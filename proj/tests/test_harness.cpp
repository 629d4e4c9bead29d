#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gentle/harness.hpp"

using namespace gentle;
namespace fs = std::filesystem;

namespace {

// Small-but-real training configuration for harness plumbing tests.
const char* kTinyConfig = R"(
experiment.task = press
experiment.reward_config = r
experiment.total_steps = 60
experiment.fill_steps = 40
experiment.eval_period = 30
experiment.eval_episodes = 2
experiment.warmup_steps = 10
experiment.seeds = 1
agent.actor_widths = 8,8
agent.critic_widths = 8,8
agent.batch_size = 8
agent.atoms = 11
env.episode_cap = 20
)";

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing and manifest") {
    KeyValueConfig kv = KeyValueConfig::from_string(
        "a.b = 3\n# comment\n c.d= hello # trailing\n e.f = 2.5 \n");
    CHECK(kv.get_int("a.b", 0) == 3);
    CHECK(kv.get_string("c.d", "") == "hello");
    CHECK(kv.get_double("e.f", 0.0) == 2.5);
    CHECK(kv.get_int("missing.key", 42) == 42);
    const std::string manifest = kv.manifest();
    CHECK(manifest.find("a.b = 3") != std::string::npos);
    CHECK(manifest.find("missing.key = 42") != std::string::npos);

    CHECK_THROWS(KeyValueConfig::from_string("no equals sign"));
}

TEST_CASE("invalid experiment configs rejected before any compute") {
    SUBCASE("no-reward config with a task") {
        KeyValueConfig kv = KeyValueConfig::from_string(
            "experiment.task = press\nexperiment.reward_config = rf+rsp\n");
        CHECK_THROWS_AS(ExperimentConfig::from_config(kv), std::invalid_argument);
    }
    SUBCASE("task config without a task") {
        KeyValueConfig kv = KeyValueConfig::from_string(
            "experiment.task = none\nexperiment.reward_config = r\n");
        CHECK_THROWS_AS(ExperimentConfig::from_config(kv), std::invalid_argument);
    }
    SUBCASE("unknown reward config") {
        KeyValueConfig kv =
            KeyValueConfig::from_string("experiment.reward_config = bogus\n");
        CHECK_THROWS(ExperimentConfig::from_config(kv));
    }
}

TEST_CASE("histogram export") {
    SUBCASE("zero samples excluded, counts conserved") {
        std::size_t excluded = 0;
        auto rows = make_histogram({0.0, 1.2, 1.3}, 1.0, &excluded);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].bin_lo == 1.0);
        CHECK(rows[0].bin_hi == 2.0);
        CHECK(rows[0].count == 2);
        CHECK(excluded == 1);
    }
    SUBCASE("empty after exclusion") {
        auto rows = make_histogram({0.0, 0.0}, 0.5);
        CHECK(rows.empty());
    }
    SUBCASE("conservation over random samples") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 10.0);
        std::vector<double> samples;
        for (int i = 0; i < 500; ++i) samples.push_back(std::max(0.0, u(rng)));
        std::size_t excluded = 0;
        auto rows = make_histogram(samples, 0.7, &excluded);
        std::size_t total = excluded;
        for (const auto& r : rows) total += r.count;
        CHECK(total == samples.size());
    }
    SUBCASE("invalid bin width") {
        CHECK_THROWS_AS(make_histogram({1.0}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("evaluate_policy determinism and shape") {
    EnvConfig env;
    env.task = Task::Press;
    AgentConfig acfg;
    acfg.observation_dim = env.observation_dim();
    acfg.action_dim = env.action_dim();
    acfg.actor_widths = {8, 8};
    const NetworkSpec spec = acfg.actor_spec();
    ParamSet actor = build_network(spec, 5);

    AcceptabilityParams lam{2.0, 2.0};
    auto m1 = evaluate_policy(actor, spec, env, RewardConfig::TaskOnly, lam, lam, 4, 77);
    auto m2 = evaluate_policy(actor, spec, env, RewardConfig::TaskOnly, lam, lam, 4, 77);
    REQUIRE(m1.size() == 4);
    for (std::size_t i = 0; i < m1.size(); ++i) {
        CHECK(m1[i].episode_return == m2[i].episode_return);
        CHECK(m1[i].max_impact == m2[i].max_impact);
        CHECK(m1[i].max_impact >= 0.0);
        CHECK(m1[i].steps == m2[i].steps);
        CHECK(m1[i].success == (m1[i].cause == TerminalCause::Success));
        CHECK(static_cast<int>(m1[i].trace.size()) == m1[i].steps);
    }
}

TEST_CASE("run_experiment emits complete artifacts") {
    TempDir tmp("gentle_harness_artifacts");
    KeyValueConfig kv = KeyValueConfig::from_string(kTinyConfig);
    auto results = run_experiment(kv, tmp.path.string());
    REQUIRE(results.size() == 1);

    const std::string seed_dir = tmp.path.string() + "/seed1";
    CHECK(fs::exists(tmp.path / "manifest.txt"));
    CHECK(fs::exists(seed_dir + "/learning_curve.csv"));
    CHECK(fs::exists(seed_dir + "/impacts.csv"));
    CHECK(fs::exists(seed_dir + "/rewards.csv"));
    CHECK(fs::exists(seed_dir + "/checkpoint/actor.bin"));

    const std::string curve = read_file(seed_dir + "/learning_curve.csv");
    CHECK(curve.rfind("learner_step,env_step,success_rate,mean_return\n", 0) == 0);
    const std::string rewards = read_file(seed_dir + "/rewards.csv");
    CHECK(rewards.rfind("learner_step,r,r_f,r_s,r_sp,r_prime\n", 0) == 0);
}

TEST_CASE("runs are byte-identical from the same manifest") {
    TempDir tmp1("gentle_harness_repro1");
    TempDir tmp2("gentle_harness_repro2");
    KeyValueConfig kv = KeyValueConfig::from_string(kTinyConfig);
    run_experiment(kv, tmp1.path.string());
    // rerun from the emitted manifest, as a user reproducing the run would
    KeyValueConfig manifest = KeyValueConfig::from_file(tmp1.path.string() + "/manifest.txt");
    run_experiment(manifest, tmp2.path.string());
    for (const char* file :
         {"/seed1/learning_curve.csv", "/seed1/impacts.csv", "/seed1/rewards.csv"}) {
        CHECK(read_file(tmp1.path.string() + file) == read_file(tmp2.path.string() + file));
    }
}

TEST_CASE("compare_runs") {
    TempDir tmp("gentle_harness_compare");
    KeyValueConfig kv = KeyValueConfig::from_string(kTinyConfig);
    const std::string run_a = tmp.path.string() + "/a";
    const std::string run_b = tmp.path.string() + "/b";
    run_experiment(kv, run_a);
    run_experiment(kv, run_b);

    SUBCASE("comparing a run with itself gives zero deltas") {
        auto summaries = compare_runs({run_a, run_b});
        REQUIRE(summaries.size() == 2);
        CHECK(summaries[0].median_final_success == summaries[1].median_final_success);
        CHECK(summaries[0].median_max_impact == summaries[1].median_max_impact);
        CHECK(summaries[0].task == "press");
    }
    SUBCASE("mismatched tasks rejected") {
        KeyValueConfig kv2 = KeyValueConfig::from_string(kTinyConfig);
        kv2.set("experiment.task", "fragile");
        const std::string run_c = tmp.path.string() + "/c";
        run_experiment(kv2, run_c);
        CHECK_THROWS(compare_runs({run_a, run_c}));
    }
    SUBCASE("missing files give an explicit diagnostic") {
        CHECK_THROWS_WITH_AS(compare_runs({run_a, tmp.path.string() + "/nope"}),
                             doctest::Contains("manifest"), std::runtime_error);
    }
}

TEST_CASE("trajectory trace export") {
    TempDir tmp("gentle_trace");
    EnvConfig cfg;
    cfg.task = Task::Press;
    ContactEnv env(cfg);
    const std::string path = tmp.path.string() + "/trace.csv";
    {
        TrajectoryTraceWriter trace(path, cfg);
        env.reset(3);
        for (int i = 0; i < 5; ++i) {
            StepResult res = env.step({0.5, -0.5});
            trace.write(env.state(), res);
            if (res.terminal) break;
        }
    }
    const std::string text = read_file(path);
    CHECK(text.rfind("step,q0,q1,v0,v1,f0_0,f0_1,f0_2,f1_0,f1_1,f1_2,m0,m1,task_reward,"
                     "terminal_cause\n",
                     0) == 0);
    // header + 5 rows
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("warmup gating and target freeze inside training") {
    // rf+rsp in a no-reward task: before warmup the surprise column must be
    // exactly zero; replayed transitions carry it.
    TempDir tmp("gentle_warmup");
    KeyValueConfig kv = KeyValueConfig::from_string(kTinyConfig);
    kv.set("experiment.task", "none");
    kv.set("experiment.reward_config", "rf+rsp");
    kv.set("experiment.warmup_steps", "1000000");  // never warm in this short run
    auto results = run_experiment(kv, tmp.path.string());
    const std::string rewards = read_file(tmp.path.string() + "/seed1/rewards.csv");
    std::istringstream is(rewards);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string field;
        for (int i = 0; i < 5; ++i) std::getline(ls, field, ',');  // r_sp column is index 4
        CHECK(std::stod(field) == 0.0);
    }
}

TEST_CASE("model feature normalization") {
    EnvConfig env;  // 2 fingers, plane 0.7
    // obs = [q0,q1, v0,v1, f0 x3, f1 x3]
    std::vector<double> obs = {0.8, 0.7, 0.05, -0.02, 12.0, 0.0, 0.0, 3.0, 0.0, 0.0};
    std::vector<double> f = model_features(obs, env);
    CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-12));   // (0.8-0.7)*10
    CHECK(f[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(1.0).epsilon(1e-12));   // 0.05*20
    CHECK(f[3] == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(f[4] == doctest::Approx(1.2).epsilon(1e-12));   // 12*0.1
    CHECK(f[7] == doctest::Approx(0.3).epsilon(1e-12));
    std::vector<double> in = model_input(obs, {0.5, -1.0}, env);
    CHECK(in.size() == obs.size() + 2);
    CHECK(in[10] == 0.5);  // actions appended raw
    CHECK(in[11] == -1.0);
}

TEST_CASE("penalty moment rescaling is exact") {
    EnsembleOutput out = match_moments({{0.3}, {0.5}}, {{0.04}, {0.02}});
    const double mu = out.mean[0], var = out.variance[0];
    EnsembleOutput scaled = rescale_moments(out, 10.0);
    CHECK(scaled.mean[0] == doctest::Approx(10.0 * mu).epsilon(1e-15));
    CHECK(scaled.variance[0] == doctest::Approx(100.0 * var).epsilon(1e-15));
}
