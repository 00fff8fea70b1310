#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "mixflow/env.hpp"
#include "mixflow/sac.hpp"

namespace mixflow {

inline const std::vector<double> kDefaultPrvSet{0.4, 0.5, 0.7, 0.8, 0.9, 1.0};

struct TrainConfig {
    int episodes = 100;
    std::size_t warmup = 5000;          // transitions before the first update
    int updates_per_step = 1;
    std::int64_t checkpoint_every = 0;  // updates; 0 keeps only the final checkpoint
    std::vector<double> p_rv_set = kDefaultPrvSet;
    std::size_t buffer_capacity = 50000;
    double per_alpha = 0.5;
    double per_beta0 = 0.4;
    std::int64_t beta_horizon = 0;      // updates over which beta reaches 1; 0 = episodes * 1000
    double time_budget_s = 0.0;         // stop starting new episodes after this; 0 = unlimited
    std::uint64_t seed = 0;
    SacHyper hyper;
    std::filesystem::path out_dir;      // empty: no files written

    void validate() const;
};

struct EpisodeLog {
    int episode = 0;
    int steps = 0;
    double ret = 0.0;
    double throughput = 0.0;
    double avg_wait = 0.0;
    long collisions = 0;
    std::size_t buffer_size = 0;
    double temperature = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "episode,steps,return,throughput,avg_wait,collisions,buffer_size,temperature";

/// Builds the environment for one episode.
using EnvFactory = std::function<std::unique_ptr<Environment>(int episode, double p_rv, std::uint64_t seed)>;

/// Versioned copy-on-publish parameter snapshots for acting threads.
class ParameterStore {
public:
    void publish(const PolicyParams& p);
    std::shared_ptr<const PolicyParams> snapshot() const;
    std::uint64_t version() const { return version_.load(); }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const PolicyParams> current_;
    std::atomic<std::uint64_t> version_{0};
};

struct TrainResult {
    PolicyParams params;
    std::vector<EpisodeLog> log;
    std::vector<std::filesystem::path> checkpoints;
    std::int64_t updates = 0;
};

using EpisodeCallback = std::function<void(const EpisodeLog&)>;

/// Soft actor-critic training over episodes from `make_env`, one transition
/// per acting agent per step into a shared prioritized buffer.
TrainResult train(const EnvFactory& make_env, const TrainConfig& cfg, const EpisodeCallback& on_episode = {});

/// Single robot vehicle on an empty 200 m lane that should cruise at 10 m/s.
/// The observation carries a virtual pacer 25 m ahead driving at 10 m/s, so
/// the speed error appears as the pacer's relative velocity; reward is
/// -|speed - 10| / 10 per step.
class SpeedTrackingEnv final : public Environment {
public:
    explicit SpeedTrackingEnv(std::uint64_t seed, int obs_size = 60);

    std::vector<AgentObservation> reset() override;
    EnvStep step(const std::map<int, double>& actions) override;
    EpisodeSummary summary() const override;
    int observation_size() const override { return obs_size_; }

    static constexpr double kLaneLength = 200.0;
    static constexpr double kTargetSpeed = 10.0;
    static constexpr double kSpeedLimit = 13.89;

private:
    Observation observation() const;

    int obs_size_;
    double position_ = 0.0;
    double speed_ = 0.0;
    int steps_ = 0;
};

}  // namespace mixflow
