#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <vector>

#include "mixflow/network.hpp"
#include "mixflow/rng.hpp"

namespace mixflow {

inline constexpr double kAccelLimit = 10.0;         // |commanded acceleration| bound, m/s^2
inline constexpr double kVehicleLength = 5.0;       // m
inline constexpr double kWaitSpeedThreshold = 0.1;  // m/s

enum class VehicleKind { RV, HV };

const char* to_string(VehicleKind k);

struct IdmParams {
    double desired_speed = kDefaultSpeedLimit;  // v0; the simulator substitutes the lane limit
    double time_headway = 1.0;                  // T
    double max_accel = 2.6;                     // a
    double comfort_decel = 4.5;                 // b
    double min_gap = 2.5;                       // s0
    double exponent = 4.0;                      // delta

    /// Throws ValidationError unless all fields are positive and exponent >= 1.
    void validate() const;
};

/// Intelligent Driver Model acceleration, clamped to [-10, 10] m/s^2.
/// `gap` is bumper to bumper; pass +infinity for a free road. A nonpositive
/// gap yields the emergency value -10.
double idm_acceleration(double speed, double gap, double leader_speed, const IdmParams& p);

struct VehicleState {
    int id = 0;
    VehicleKind kind = VehicleKind::HV;
    Route route;
    std::size_t route_pos = 0;  // index into route.edges of the current (or last) road edge
    LaneId lane = kNone;
    double offset = 0.0;        // front bumper arclength along `lane`
    double speed = 0.0;
    double length = kVehicleLength;
    double wait = 0.0;          // seconds below kWaitSpeedThreshold since last moving
    double spawn_time = 0.0;

    bool operator==(const VehicleState&) const = default;
};

struct PendingArrival {
    Route route;
    VehicleKind kind = VehicleKind::HV;
    double request_time = 0.0;
    bool operator==(const PendingArrival&) const = default;
};

struct SimState {
    double clock = 0.0;
    std::int64_t step_index = 0;
    std::map<int, VehicleState> vehicles;  // ordered by id
    int next_vehicle_id = 0;
    std::map<EdgeId, std::deque<PendingArrival>> pending;

    RngStream spawn_rng;
    RngStream kind_rng;
    RngStream policy_rng;

    std::int64_t spawned_total = 0;
    std::int64_t exited_total = 0;      // junction passings onto an outgoing edge
    std::int64_t arrived_total = 0;     // vehicles that completed their route
    std::int64_t collisions_total = 0;  // vehicles removed after colliding
    double removed_wait_sum = 0.0;      // final `wait` of every removed vehicle

    bool operator==(const SimState&) const = default;
};

SimState make_initial_state(std::uint64_t seed);

struct SimConfig {
    double dt = 1.0;
    IdmParams idm;
    double control_zone_radius = 100.0;
    double demand = 0.0;  // veh/hr over all origins
    double p_rv = 0.0;
    double collision_distance = 2.0;
    double lookahead = 150.0;

    void validate() const;
};

/// Per-step inputs from controllers.
struct StepCommands {
    std::map<int, double> rv_accels;   // robot vehicle id -> commanded acceleration
    std::set<int> stop_line_holds;     // vehicles that must stop at their stop line
};

struct StepEvents {
    int exited_this_step = 0;
    int collision_count_this_step = 0;
    std::vector<int> spawned;
    std::vector<int> removed;
    std::vector<int> collided;
    bool operator==(const StepEvents&) const = default;
};

struct Pose {
    Vec2 position;
    Vec2 heading;
};

Pose vehicle_pose(const VehicleState& v, const NetworkGraph& g);
bool in_control_zone(const VehicleState& v, const NetworkGraph& g, const SimConfig& cfg);

enum class NextLaneStatus { Ok, EndOfRoute, Blocked };

struct NextLane {
    NextLaneStatus status = NextLaneStatus::EndOfRoute;
    LaneId lane = kNone;
    std::size_t route_pos = 0;
};

/// Lane following `lane` along `route` (connector, then the outgoing road lane).
/// Blocked when the road lane has no connector to the next route edge.
NextLane next_lane(const NetworkGraph& g, const Route& route, LaneId lane, std::size_t route_pos);

/// Connector a vehicle on a road lane will take, or kNone.
ConnectorId upcoming_connector(const VehicleState& v, const NetworkGraph& g);

/// Advances the simulation by one step in place. Throws StaleCommandError
/// when a command or hold addresses a vehicle that is not a live RV
/// (holds: not live).
StepEvents step(SimState& state, const StepCommands& commands, const NetworkGraph& g, const SimConfig& cfg);

/// Draws this step's Poisson arrivals into the per-origin queues and releases
/// queued vehicles whose origin lane entrance is clear. Returns new ids.
std::vector<int> spawn_arrivals(SimState& state, double demand, const NetworkGraph& g, double p_rv,
                                const SimConfig& cfg);

/// Ids (ascending) of vehicles involved in a collision in the current state.
std::vector<int> detect_collisions(const SimState& state, const NetworkGraph& g, const SimConfig& cfg);

/// Mandatory lane change toward a lane connected to the vehicle's next edge.
std::optional<LaneId> lane_change_decide(const VehicleState& v, const SimState& state, const NetworkGraph& g,
                                         const SimConfig& cfg);

/// Owns one episode's state over a shared immutable network.
class Simulation {
public:
    Simulation(std::shared_ptr<const NetworkGraph> graph, SimConfig cfg, std::uint64_t seed);

    StepEvents step(const StepCommands& commands = {});

    const SimState& state() const { return state_; }
    SimState& mutable_state() { return state_; }
    const NetworkGraph& graph() const { return *graph_; }
    const std::shared_ptr<const NetworkGraph>& graph_ptr() const { return graph_; }
    const SimConfig& config() const { return cfg_; }

private:
    std::shared_ptr<const NetworkGraph> graph_;
    SimConfig cfg_;
    SimState state_;
};

/// CSV trajectory log: one row per live vehicle per step.
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::ostream& out);
    void write(const SimState& state, const NetworkGraph& g);

private:
    std::ostream& out_;
};

}  // namespace mixflow
