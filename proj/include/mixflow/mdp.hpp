#pragma once

#include <memory>
#include <vector>

#include "mixflow/env.hpp"
#include "mixflow/sim.hpp"

namespace mixflow {

/// Observation box geometry and slot counts.
struct ObsConfig {
    double d_f = 50.0;  // front region length, m
    double d_b = 20.0;  // rear region length, m
    double d = 5.0;     // half width of both regions, m
    int n_front = 10;
    int n_rear = 5;

    void validate() const;
    int size() const { return (n_front + n_rear) * 4; }
};

/// Ego-centric encoding of neighbors: per vehicle (lateral, longitudinal,
/// lateral velocity, longitudinal velocity), each normalized into [-1, 1];
/// front slots first, then rear slots, each sorted by distance.
/// Throws ValidationError if `ego` is not live.
Observation observe(const SimState& state, int ego, const NetworkGraph& g, const ObsConfig& cfg);

/// Ids encoded by `observe`, in slot order (front region then rear region).
struct ObservedSet {
    std::vector<int> front;
    std::vector<int> rear;
};
ObservedSet observed_neighbors(const SimState& state, int ego, const NetworkGraph& g, const ObsConfig& cfg);

/// Observation of an empty neighborhood.
Observation padding_observation(const ObsConfig& cfg);

struct RewardWeights {
    double alpha = 1.0;    // throughput
    double beta = 2.0;     // collision
    double gamma_w = 5.0;  // waiting time
    double w_low = 20.0;   // s
    double w_high = 30.0;  // s
    double throughput_cap = 10.0;  // vehicles per step mapped to +1
    double collision_cap = 10.0;   // vehicles per step mapped to -1

    void validate() const;
};

struct RewardBreakdown {
    double total = 0.0;
    double throughput = 0.0;
    double collision = 0.0;
    double wait = 0.0;
};

/// Mean `wait` over live vehicles (0 with no vehicles).
double mean_live_wait(const SimState& state);

/// Global three-term reward, identical for every robot vehicle.
RewardBreakdown reward(const StepEvents& ev, const SimState& state, const RewardWeights& w);

/// Waiting-time term on its own, for a given mean wait `w_mean`.
double wait_reward(double w_mean, const RewardWeights& w);

/// Traffic simulation exposed as a multi-agent environment: agents are the
/// robot vehicles inside the control zone.
class TrafficEnv final : public Environment {
public:
    TrafficEnv(std::shared_ptr<const NetworkGraph> graph, SimConfig sim, ObsConfig obs, RewardWeights weights,
               int episode_steps, std::uint64_t seed);

    std::vector<AgentObservation> reset() override;
    EnvStep step(const std::map<int, double>& actions) override;
    EpisodeSummary summary() const override;
    int observation_size() const override { return obs_.size(); }

    const Simulation& simulation() const { return sim_; }
    const RewardBreakdown& last_reward() const { return last_reward_; }

private:
    std::vector<AgentObservation> controlled_agents() const;

    std::shared_ptr<const NetworkGraph> graph_;
    SimConfig sim_cfg_;
    ObsConfig obs_;
    RewardWeights weights_;
    int episode_steps_;
    std::uint64_t seed_;
    Simulation sim_;
    int steps_taken_ = 0;
    RewardBreakdown last_reward_;
};

/// Episode-level wait metric: final `wait` averaged over every spawned vehicle.
double average_final_wait(const SimState& state);

}  // namespace mixflow
