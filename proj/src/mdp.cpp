#include "mixflow/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "mixflow/error.hpp"

namespace mixflow {

namespace {

struct Candidate {
    int id;
    double distance;
    double lateral;
    double longitudinal;
    double lateral_velocity;
    double longitudinal_velocity;
};

struct Regions {
    std::vector<Candidate> front;
    std::vector<Candidate> rear;
};

// Vehicles with a nonnegative longitudinal offset belong to the front region.
Regions gather(const SimState& state, int ego, const NetworkGraph& g, const ObsConfig& cfg) {
    auto it = state.vehicles.find(ego);
    if (it == state.vehicles.end()) {
        throw ValidationError("ego", "vehicle " + std::to_string(ego) + " is not live");
    }
    const VehicleState& e = it->second;
    const Pose pe = vehicle_pose(e, g);
    const Vec2 forward = pe.heading;
    const Vec2 left{-forward.y, forward.x};
    const Vec2 ego_velocity = forward * e.speed;

    Regions r;
    for (const auto& [id, o] : state.vehicles) {
        if (id == ego) continue;
        const Pose po = vehicle_pose(o, g);
        const Vec2 rel = po.position - pe.position;
        const double lon = rel.dot(forward);
        const double lat = rel.dot(left);
        if (std::abs(lat) > cfg.d) continue;
        const bool front = lon >= 0.0;
        if (front ? lon > cfg.d_f : -lon > cfg.d_b) continue;
        const Vec2 rv = po.heading * o.speed - ego_velocity;
        Candidate c{id, rel.norm(), lat, lon, rv.dot(left), rv.dot(forward)};
        (front ? r.front : r.rear).push_back(c);
    }
    auto by_distance = [](const Candidate& a, const Candidate& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    };
    std::sort(r.front.begin(), r.front.end(), by_distance);
    std::sort(r.rear.begin(), r.rear.end(), by_distance);
    if (r.front.size() > static_cast<std::size_t>(cfg.n_front)) r.front.resize(static_cast<std::size_t>(cfg.n_front));
    if (r.rear.size() > static_cast<std::size_t>(cfg.n_rear)) r.rear.resize(static_cast<std::size_t>(cfg.n_rear));
    return r;
}

double unit_clamp(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

void ObsConfig::validate() const {
    if (!(d_f > 0.0)) throw ValidationError("d_f", "must be positive");
    if (!(d_b > 0.0)) throw ValidationError("d_b", "must be positive");
    if (!(d > 0.0)) throw ValidationError("d", "must be positive");
    if (n_front < 1) throw ValidationError("N_f", "must be at least 1");
    if (n_rear < 1) throw ValidationError("N_b", "must be at least 1");
}

Observation padding_observation(const ObsConfig& cfg) {
    Observation obs(static_cast<std::size_t>(cfg.size()), 1.0);
    std::fill(obs.begin() + cfg.n_front * 4, obs.end(), -1.0);
    return obs;
}

Observation observe(const SimState& state, int ego, const NetworkGraph& g, const ObsConfig& cfg) {
    const Regions r = gather(state, ego, g, cfg);
    const VehicleState& e = state.vehicles.at(ego);
    const double v_norm = g.lane(e.lane).speed_limit;
    Observation obs = padding_observation(cfg);
    auto encode = [&](const Candidate& c, std::size_t slot, double region_length) {
        obs[slot * 4 + 0] = unit_clamp(c.lateral / cfg.d);
        obs[slot * 4 + 1] = unit_clamp(c.longitudinal / region_length);
        obs[slot * 4 + 2] = unit_clamp(c.lateral_velocity / v_norm);
        obs[slot * 4 + 3] = unit_clamp(c.longitudinal_velocity / v_norm);
    };
    for (std::size_t i = 0; i < r.front.size(); ++i) encode(r.front[i], i, cfg.d_f);
    for (std::size_t i = 0; i < r.rear.size(); ++i) encode(r.rear[i], static_cast<std::size_t>(cfg.n_front) + i, cfg.d_b);
    return obs;
}

ObservedSet observed_neighbors(const SimState& state, int ego, const NetworkGraph& g, const ObsConfig& cfg) {
    const Regions r = gather(state, ego, g, cfg);
    ObservedSet out;
    for (const auto& c : r.front) out.front.push_back(c.id);
    for (const auto& c : r.rear) out.rear.push_back(c.id);
    return out;
}

void RewardWeights::validate() const {
    if (!(throughput_cap > 0.0)) throw ValidationError("C_tp", "must be positive");
    if (!(collision_cap > 0.0)) throw ValidationError("C_col", "must be positive");
    if (!(w_low >= 0.0 && w_high >= w_low)) throw ValidationError("W_h", "need 0 <= W_l <= W_h");
    if (!(w_low + w_high > 0.0)) throw ValidationError("W_h", "W_l + W_h must be positive");
}

double mean_live_wait(const SimState& state) {
    if (state.vehicles.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, v] : state.vehicles) sum += v.wait;
    return sum / static_cast<double>(state.vehicles.size());
}

double wait_reward(double w_mean, const RewardWeights& w) {
    if (w.w_low <= w_mean && w_mean <= w.w_high) return 1.0;
    const double mid = (w.w_low + w.w_high) / 2.0;
    return unit_clamp(-std::abs(w_mean - mid) / mid);
}

RewardBreakdown reward(const StepEvents& ev, const SimState& state, const RewardWeights& w) {
    RewardBreakdown r;
    r.throughput = unit_clamp(ev.exited_this_step / w.throughput_cap);
    const int collisions = ev.collision_count_this_step;
    r.collision = collisions < 1 ? 1.0 : std::clamp(-collisions / w.collision_cap, -1.0, 0.0);
    r.wait = wait_reward(mean_live_wait(state), w);
    r.total = w.alpha * r.throughput + w.beta * r.collision + w.gamma_w * r.wait;
    return r;
}

double average_final_wait(const SimState& state) {
    if (state.spawned_total == 0) return 0.0;
    double sum = state.removed_wait_sum;
    for (const auto& [id, v] : state.vehicles) sum += v.wait;
    return sum / static_cast<double>(state.spawned_total);
}

TrafficEnv::TrafficEnv(std::shared_ptr<const NetworkGraph> graph, SimConfig sim, ObsConfig obs,
                       RewardWeights weights, int episode_steps, std::uint64_t seed)
    : graph_(std::move(graph)),
      sim_cfg_(sim),
      obs_(obs),
      weights_(weights),
      episode_steps_(episode_steps),
      seed_(seed),
      sim_(graph_, sim_cfg_, seed_) {
    obs_.validate();
    weights_.validate();
    if (episode_steps_ < 1) throw ValidationError("episode_steps", "must be at least 1");
}

std::vector<AgentObservation> TrafficEnv::controlled_agents() const {
    std::vector<AgentObservation> agents;
    const SimState& s = sim_.state();
    for (const auto& [id, v] : s.vehicles) {
        if (v.kind == VehicleKind::RV && in_control_zone(v, *graph_, sim_cfg_)) {
            agents.push_back({id, observe(s, id, *graph_, obs_)});
        }
    }
    return agents;
}

std::vector<AgentObservation> TrafficEnv::reset() {
    sim_ = Simulation(graph_, sim_cfg_, seed_);
    steps_taken_ = 0;
    last_reward_ = {};
    return controlled_agents();
}

EnvStep TrafficEnv::step(const std::map<int, double>& actions) {
    StepCommands cmds;
    cmds.rv_accels = actions;
    const StepEvents ev = sim_.step(cmds);
    ++steps_taken_;
    last_reward_ = reward(ev, sim_.state(), weights_);

    EnvStep out;
    out.reward = last_reward_.total;
    out.next_agents = controlled_agents();
    const SimState& s = sim_.state();
    for (const auto& [id, a] : actions) {
        AgentOutcome o;
        o.agent = id;
        if (s.vehicles.contains(id)) {
            auto it = std::find_if(out.next_agents.begin(), out.next_agents.end(),
                                   [id = id](const AgentObservation& x) { return x.agent == id; });
            o.next_obs = it != out.next_agents.end() ? it->obs : observe(s, id, *graph_, obs_);
        } else {
            o.next_obs = padding_observation(obs_);
            o.done = std::binary_search(ev.collided.begin(), ev.collided.end(), id);
        }
        out.outcomes.push_back(std::move(o));
    }
    out.episode_over = steps_taken_ >= episode_steps_;
    return out;
}

EpisodeSummary TrafficEnv::summary() const {
    const SimState& s = sim_.state();
    EpisodeSummary sum;
    sum.steps = steps_taken_;
    sum.throughput_rate = steps_taken_ > 0 ? static_cast<double>(s.exited_total) / steps_taken_ : 0.0;
    sum.avg_wait = average_final_wait(s);
    sum.collisions = static_cast<long>(s.collisions_total);
    return sum;
}

}  // namespace mixflow
