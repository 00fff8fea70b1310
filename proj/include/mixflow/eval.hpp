#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mixflow/controllers.hpp"
#include "mixflow/scenario.hpp"
#include "mixflow/train.hpp"

namespace mixflow {

inline constexpr int kDefaultEvalSteps = 3000;

struct MetricsReport {
    std::string scenario;
    std::string scenario_path;
    Topology topology = Topology::Intersection;
    std::string controller;
    double p_rv = 0.0;
    std::uint64_t seed = 0;
    int steps = 0;
    double throughput_rate = 0.0;  // exited / steps, vehicles per step
    double avg_wait = 0.0;         // mean final wait over all spawned vehicles, s
    double avg_wait_time_mean = 0.0;  // mean over steps of the live-vehicle mean wait, s
    long collisions = 0;
    long spawned = 0;
    long exited = 0;
    bool ok = true;
    std::string message;  // failure reason when !ok

    bool operator==(const MetricsReport&) const = default;
};

enum class ControllerKind { NoTL, TL, Policy };

const char* to_string(ControllerKind k);
/// Accepts notl, tl, policy in any case.
ControllerKind controller_from_string(const std::string& text);

struct ControllerChoice {
    ControllerKind kind = ControllerKind::NoTL;
    std::shared_ptr<const PolicyParams> policy;  // required for Policy
    PolicyMode mode = PolicyMode::Deterministic;
    ObsConfig obs;
};

/// Throws ConfigError when the scenario cannot host the controller
/// (TL without a program, Policy without parameters).
std::unique_ptr<Controller> make_controller(const ControllerChoice& choice, const ScenarioSpec& spec,
                                            const NetworkGraph& g);

struct EpisodeOptions {
    std::ostream* trajectory = nullptr;  // CSV rows for every step, including the initial state
    std::function<void(Simulation&)> prepare;  // runs once before the first step
};

SimConfig sim_config_for(const ScenarioSpec& spec);

/// One deterministic episode of `steps` steps under the scenario's demand and P_rv.
MetricsReport run_episode(const ScenarioSpec& spec, const NetworkGraph& g, const ControllerChoice& choice,
                          std::uint64_t seed, int steps = kDefaultEvalSteps, const EpisodeOptions& opts = {});

/// Report fields derived from a finished simulation state.
MetricsReport metrics_from(const SimState& state, int steps, double wait_time_sum);

/// Seed of the k-th repetition of a scenario.
std::uint64_t episode_seed(std::uint64_t scenario_seed, std::uint64_t master_seed, int k);

struct SweepConfig {
    std::string name = "sweep";
    std::vector<ControllerChoice> controllers;
    std::vector<double> p_rv_grid;  // empty: each scenario's own P_rv
    int seeds = 5;
    int steps = kDefaultEvalSteps;
    std::uint64_t master_seed = 0;
    int threads = 1;
    std::filesystem::path trajectory_dir;  // when set, row<N>.csv per episode (N = 1-based raw.csv row)

    void validate() const;
};

/// Mean and sample standard deviation over a group of reports.
struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

struct AggregateRow {
    std::string level;  // scenario | subset
    std::string key;    // scenario name or whole / intersection / roundabout
    std::string controller;
    double p_rv = 0.0;
    int n = 0;
    Stat throughput;
    Stat avg_wait;
    Stat avg_wait_time_mean;
    Stat collisions;
};

struct SweepResult {
    std::vector<MetricsReport> reports;  // job order: scenario, controller, P_rv, seed
    std::vector<AggregateRow> rows;
    std::vector<std::string> warnings;
};

/// Runs every (scenario, controller, P_rv, seed) episode, up to `threads` at a
/// time. Failed episodes are kept as !ok reports and excluded from the
/// aggregate with a warning.
SweepResult sweep(const std::vector<LoadedScenario>& scenarios, const SweepConfig& cfg);

/// Pure fold over completed reports.
std::vector<AggregateRow> aggregate(const std::vector<MetricsReport>& reports);
std::vector<std::string> failure_warnings(const std::vector<MetricsReport>& reports);

inline constexpr const char* kRawHeader =
    "scenario,scenario_path,topology,controller,P_rv,seed,steps,throughput_rate,throughput_e3,avg_wait,"
    "avg_wait_time_mean,collisions,spawned,exited,status,message";
inline constexpr const char* kSummaryHeader =
    "level,key,controller,P_rv,n,throughput_mean,throughput_std,throughput_e3_mean,avg_wait_mean,avg_wait_std,"
    "avg_wait_time_mean_mean,avg_wait_time_mean_std,collisions_mean,collisions_std";

std::string format_raw_csv(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> parse_raw_csv(const std::string& text);
std::string format_summary_csv(const std::vector<AggregateRow>& rows, const std::vector<std::string>& warnings);

/// Line chart of one metric against P_rv, one series per controller, over the whole-set rows.
std::string svg_plot(const std::vector<AggregateRow>& rows, const std::string& metric);

/// Writes raw.csv, summary.csv, throughput.svg and wait.svg into `dir`.
void write_sweep(const std::filesystem::path& dir, const SweepResult& result);

/// Training environments cycling round-robin over `scenarios`; each episode
/// uses the drawn P_rv and seed. `episode_steps` <= 0 keeps each spec's own length.
EnvFactory scenario_env_factory(const std::vector<LoadedScenario>& scenarios, const ObsConfig& obs,
                                const RewardWeights& weights, int episode_steps);

/// Worker count: MIXFLOW_THREADS when set, else `fallback`.
int thread_count(int fallback);

}  // namespace mixflow
