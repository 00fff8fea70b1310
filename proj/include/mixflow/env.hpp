#pragma once

#include <map>
#include <vector>

namespace mixflow {

using Observation = std::vector<double>;

struct AgentObservation {
    int agent = 0;
    Observation obs;
};

/// What became of an agent that acted this step.
struct AgentOutcome {
    int agent = 0;
    Observation next_obs;
    bool done = false;  // terminal for bootstrapping purposes
};

struct EnvStep {
    double reward = 0.0;  // shared by every agent
    std::vector<AgentOutcome> outcomes;
    std::vector<AgentObservation> next_agents;  // agents that must act next step
    bool episode_over = false;
};

struct EpisodeSummary {
    int steps = 0;
    double throughput_rate = 0.0;
    double avg_wait = 0.0;
    long collisions = 0;
};

/// Cooperative multi-agent environment with one shared scalar reward.
/// Agents come and go; each step the caller supplies one action per agent
/// listed in the previous `next_agents`.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::vector<AgentObservation> reset() = 0;
    virtual EnvStep step(const std::map<int, double>& actions) = 0;
    virtual EpisodeSummary summary() const = 0;
    virtual int observation_size() const = 0;
};

}  // namespace mixflow
