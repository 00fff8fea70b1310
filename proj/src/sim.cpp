#include "mixflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "mixflow/error.hpp"

namespace mixflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using LaneIndex = std::vector<std::vector<const VehicleState*>>;

// Vehicles per lane, ascending by offset (ties by id).
LaneIndex build_lane_index(const SimState& state, const NetworkGraph& g) {
    LaneIndex index(g.lanes().size());
    for (const auto& [id, v] : state.vehicles) index[static_cast<std::size_t>(v.lane)].push_back(&v);
    for (auto& list : index) {
        std::sort(list.begin(), list.end(), [](const VehicleState* a, const VehicleState* b) {
            return a->offset != b->offset ? a->offset < b->offset : a->id < b->id;
        });
    }
    return index;
}

struct Leader {
    double gap = kInf;
    double speed = 0.0;
};

Leader find_leader(const VehicleState& v, const LaneIndex& index, const NetworkGraph& g, const SimConfig& cfg) {
    const auto& here = index[static_cast<std::size_t>(v.lane)];
    for (const VehicleState* o : here) {
        if (o->id == v.id) continue;
        if (o->offset > v.offset || (o->offset == v.offset && o->id > v.id)) {
            return {o->offset - o->length - v.offset, o->speed};
        }
    }
    double travelled = g.lane(v.lane).length() - v.offset;
    LaneId lane = v.lane;
    std::size_t pos = v.route_pos;
    while (travelled <= cfg.lookahead) {
        const NextLane next = next_lane(g, v.route, lane, pos);
        if (next.status == NextLaneStatus::EndOfRoute) return {};
        if (next.status == NextLaneStatus::Blocked) return {travelled, 0.0};
        const auto& list = index[static_cast<std::size_t>(next.lane)];
        if (!list.empty()) {
            const VehicleState* back = list.front();
            return {travelled + back->offset - back->length, back->speed};
        }
        travelled += g.lane(next.lane).length();
        lane = next.lane;
        pos = next.route_pos;
    }
    return {};
}

IdmParams idm_for_lane(const SimConfig& cfg, const Lane& lane) {
    IdmParams p = cfg.idm;
    p.desired_speed = lane.speed_limit;
    return p;
}

void remove_vehicle(SimState& state, int id, StepEvents& ev) {
    auto it = state.vehicles.find(id);
    state.removed_wait_sum += it->second.wait;
    state.vehicles.erase(it);
    ev.removed.push_back(id);
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

}  // namespace

const char* to_string(VehicleKind k) { return k == VehicleKind::RV ? "RV" : "HV"; }

void IdmParams::validate() const {
    if (!(desired_speed > 0.0)) throw ValidationError("idm.desired_speed", "must be positive");
    if (!(time_headway > 0.0)) throw ValidationError("idm.time_headway", "must be positive");
    if (!(max_accel > 0.0)) throw ValidationError("idm.max_accel", "must be positive");
    if (!(comfort_decel > 0.0)) throw ValidationError("idm.comfort_decel", "must be positive");
    if (!(min_gap > 0.0)) throw ValidationError("idm.min_gap", "must be positive");
    if (!(exponent >= 1.0)) throw ValidationError("idm.exponent", "must be at least 1");
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
    idm.validate();
    if (!(control_zone_radius >= 0.0)) throw ValidationError("control_zone_radius", "must be nonnegative");
    if (!(demand >= 0.0)) throw ValidationError("demand", "must be nonnegative");
    if (!(p_rv >= 0.0 && p_rv <= 1.0)) throw ValidationError("P_rv", "must be in [0, 1]");
    if (!(collision_distance > 0.0)) throw ValidationError("collision_distance", "must be positive");
    if (!(lookahead > 0.0)) throw ValidationError("lookahead", "must be positive");
}

double idm_acceleration(double speed, double gap, double leader_speed, const IdmParams& p) {
    if (!(gap > 0.0)) return -kAccelLimit;
    const double dv = speed - leader_speed;
    const double s_star =
        p.min_gap + std::max(0.0, speed * p.time_headway + speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double interaction = std::isinf(gap) ? 0.0 : (s_star / gap) * (s_star / gap);
    const double acc = p.max_accel * (1.0 - std::pow(speed / p.desired_speed, p.exponent) - interaction);
    return std::clamp(acc, -kAccelLimit, kAccelLimit);
}

SimState make_initial_state(std::uint64_t seed) {
    SimState s;
    s.spawn_rng = RngStream(seed, "spawn");
    s.kind_rng = RngStream(seed, "kind-assignment");
    s.policy_rng = RngStream(seed, "policy");
    return s;
}

Pose vehicle_pose(const VehicleState& v, const NetworkGraph& g) {
    const Polyline& shape = g.lane(v.lane).shape;
    return {shape.point_at(v.offset), shape.heading_at(v.offset)};
}

bool in_control_zone(const VehicleState& v, const NetworkGraph& g, const SimConfig& cfg) {
    return (vehicle_pose(v, g).position - g.junction_center()).norm() <= cfg.control_zone_radius;
}

NextLane next_lane(const NetworkGraph& g, const Route& route, LaneId lane, std::size_t route_pos) {
    const Lane& l = g.lane(lane);
    if (l.is_connector()) {
        return {NextLaneStatus::Ok, g.connector(l.connector).to_lane, route_pos + 1};
    }
    if (route_pos + 1 >= route.edges.size()) return {NextLaneStatus::EndOfRoute, kNone, route_pos};
    const ConnectorId c = g.connector_towards(lane, route.edges[route_pos + 1]);
    if (c == kNone) return {NextLaneStatus::Blocked, kNone, route_pos};
    return {NextLaneStatus::Ok, g.connector(c).lane, route_pos};
}

ConnectorId upcoming_connector(const VehicleState& v, const NetworkGraph& g) {
    const Lane& l = g.lane(v.lane);
    if (l.is_connector() || v.route_pos + 1 >= v.route.edges.size()) return kNone;
    return g.connector_towards(v.lane, v.route.edges[v.route_pos + 1]);
}

std::optional<LaneId> lane_change_decide(const VehicleState& v, const SimState& state, const NetworkGraph& g,
                                         const SimConfig& cfg) {
    const Lane& lane = g.lane(v.lane);
    if (lane.is_connector()) return std::nullopt;
    const Edge& edge = g.edge(lane.edge);
    if (edge.lanes.size() < 2 || v.route_pos + 1 >= v.route.edges.size()) return std::nullopt;
    const EdgeId next_edge = v.route.edges[v.route_pos + 1];
    if (g.connector_towards(v.lane, next_edge) != kNone) return std::nullopt;

    int best = -1;
    for (std::size_t i = 0; i < edge.lanes.size(); ++i) {
        if (g.connector_towards(edge.lanes[i], next_edge) == kNone) continue;
        const int idx = static_cast<int>(i);
        if (best < 0 || std::abs(idx - lane.index) < std::abs(best - lane.index)) best = idx;
    }
    if (best < 0) return std::nullopt;
    const LaneId target = edge.lanes[static_cast<std::size_t>(lane.index + (best > lane.index ? 1 : -1))];

    for (const auto& [id, o] : state.vehicles) {
        if (o.lane != target) continue;
        if (o.offset >= v.offset) {
            if (!(o.offset - o.length - v.offset > cfg.idm.min_gap)) return std::nullopt;
        } else {
            if (!(v.offset - v.length - o.offset > cfg.idm.min_gap + o.speed * cfg.idm.time_headway)) {
                return std::nullopt;
            }
        }
    }
    return target;
}

std::vector<int> detect_collisions(const SimState& state, const NetworkGraph& g, const SimConfig& cfg) {
    const LaneIndex index = build_lane_index(state, g);
    std::set<int> hit;
    for (const auto& list : index) {
        for (std::size_t i = 1; i < list.size(); ++i) {
            const VehicleState* follower = list[i - 1];
            const VehicleState* leader = list[i];
            if (leader->offset - leader->length - follower->offset < 0.0) {
                hit.insert(follower->id);
                hit.insert(leader->id);
            }
        }
    }
    for (const Connector& c : g.connectors()) {
        const auto& mine = index[static_cast<std::size_t>(c.lane)];
        if (mine.empty()) continue;
        for (ConnectorId other : c.conflicts) {
            if (other < c.id) continue;
            const auto& theirs = index[static_cast<std::size_t>(g.connector(other).lane)];
            for (const VehicleState* a : mine) {
                const Vec2 pa = vehicle_pose(*a, g).position;
                for (const VehicleState* b : theirs) {
                    if ((pa - vehicle_pose(*b, g).position).norm() < cfg.collision_distance) {
                        hit.insert(a->id);
                        hit.insert(b->id);
                    }
                }
            }
        }
    }
    return {hit.begin(), hit.end()};
}

std::vector<int> spawn_arrivals(SimState& state, double demand, const NetworkGraph& g, double p_rv,
                                const SimConfig& cfg) {
    if (!(p_rv >= 0.0 && p_rv <= 1.0)) throw ValidationError("P_rv", "must be in [0, 1]");
    const auto& origins = g.origin_edges();
    if (demand > 0.0 && !origins.empty()) {
        const double mean = demand / (3600.0 * static_cast<double>(origins.size())) * cfg.dt;
        for (EdgeId origin : origins) {
            std::poisson_distribution<int> arrivals(mean);
            const int n = arrivals(state.spawn_rng);
            if (n == 0) continue;
            const int origin_leg = g.edge(origin).leg;
            std::vector<Route> candidates;
            for (EdgeId t : g.terminal_edges()) {
                if (origin_leg != kNone && g.edge(t).leg == origin_leg) continue;
                try {
                    candidates.push_back(shortest_route(g, origin, t));
                } catch (const NoRouteError&) {
                }
            }
            for (int k = 0; k < n && !candidates.empty(); ++k) {
                const auto pick = static_cast<std::size_t>(state.spawn_rng.uniform() * static_cast<double>(candidates.size()));
                const VehicleKind kind = state.kind_rng.uniform() < p_rv ? VehicleKind::RV : VehicleKind::HV;
                state.pending[origin].push_back({candidates[std::min(pick, candidates.size() - 1)], kind, state.clock});
            }
        }
    }

    std::vector<int> spawned;
    const double entrance = cfg.idm.min_gap + kVehicleLength;
    for (auto& [origin, queue] : state.pending) {
        while (!queue.empty()) {
            const PendingArrival& next = queue.front();
            // Clear lane with the most room at its entrance; lanes that cannot
            // reach the next route edge are only used if nothing else exists.
            LaneId chosen = kNone;
            double best_room = -1.0;
            bool chosen_connects = false;
            for (LaneId lane : g.edge(origin).lanes) {
                double room = kInf;
                for (const auto& [id, v] : state.vehicles) {
                    if (v.lane == lane) room = std::min(room, v.offset - v.length);
                }
                if (room < entrance) continue;
                const bool connects = next.route.edges.size() < 2 ||
                                      g.connector_towards(lane, next.route.edges[1]) != kNone;
                if (chosen == kNone || (connects && !chosen_connects) ||
                    (connects == chosen_connects && room > best_room)) {
                    chosen = lane;
                    best_room = room;
                    chosen_connects = connects;
                }
            }
            if (chosen == kNone) break;
            VehicleState v;
            v.id = state.next_vehicle_id++;
            v.kind = next.kind;
            v.route = next.route;
            v.lane = chosen;
            v.offset = kVehicleLength;
            v.spawn_time = state.clock;
            state.vehicles.emplace(v.id, std::move(v));
            spawned.push_back(state.next_vehicle_id - 1);
            ++state.spawned_total;
            queue.pop_front();
        }
    }
    return spawned;
}

StepEvents step(SimState& state, const StepCommands& commands, const NetworkGraph& g, const SimConfig& cfg) {
    std::vector<int> stale;
    for (const auto& [id, accel] : commands.rv_accels) {
        auto it = state.vehicles.find(id);
        if (it == state.vehicles.end() || it->second.kind != VehicleKind::RV || !std::isfinite(accel)) {
            stale.push_back(id);
        }
    }
    for (int id : commands.stop_line_holds) {
        if (!state.vehicles.contains(id)) stale.push_back(id);
    }
    if (!stale.empty()) {
        std::ostringstream msg;
        msg << "commands for vehicles that are not live RVs:";
        for (int id : stale) msg << ' ' << id;
        throw StaleCommandError(msg.str());
    }

    StepEvents ev;

    for (auto& [id, v] : state.vehicles) {
        if (auto target = lane_change_decide(v, state, g, cfg)) v.lane = *target;
    }

    std::map<int, double> accel;
    {
        const LaneIndex index = build_lane_index(state, g);
        for (const auto& [id, v] : state.vehicles) {
            const Lane& lane = g.lane(v.lane);
            const IdmParams p = idm_for_lane(cfg, lane);
            double a;
            auto cmd = commands.rv_accels.find(id);
            if (v.kind == VehicleKind::RV && cmd != commands.rv_accels.end() && in_control_zone(v, g, cfg)) {
                a = std::clamp(cmd->second, -kAccelLimit, kAccelLimit);
            } else {
                const Leader leader = find_leader(v, index, g, cfg);
                a = idm_acceleration(v.speed, leader.gap, leader.speed, p);
            }
            if (commands.stop_line_holds.contains(id) && !lane.is_connector()) {
                a = std::min(a, idm_acceleration(v.speed, lane.length() - v.offset, 0.0, p));
            }
            accel[id] = a;
        }
    }

    std::vector<int> arrived;
    for (auto& [id, v] : state.vehicles) {
        const double limit = g.lane(v.lane).speed_limit;
        v.speed = std::clamp(v.speed + accel[id] * cfg.dt, 0.0, limit);
        v.offset += v.speed * cfg.dt;
        // A held vehicle never crosses its stop line.
        if (commands.stop_line_holds.contains(id) && !g.lane(v.lane).is_connector() &&
            v.offset > g.lane(v.lane).length()) {
            v.offset = g.lane(v.lane).length();
            v.speed = 0.0;
        }
        while (v.offset > g.lane(v.lane).length()) {
            const Lane& cur = g.lane(v.lane);
            const NextLane next = next_lane(g, v.route, v.lane, v.route_pos);
            if (next.status == NextLaneStatus::EndOfRoute) {
                arrived.push_back(id);
                break;
            }
            if (next.status == NextLaneStatus::Blocked) {
                v.offset = cur.length();
                v.speed = 0.0;
                break;
            }
            v.offset -= cur.length();
            v.lane = next.lane;
            v.route_pos = next.route_pos;
            const Lane& now = g.lane(v.lane);
            if (cur.is_connector() && !now.is_connector() && g.edge(now.edge).role == EdgeRole::Outgoing) {
                ++ev.exited_this_step;
            }
            v.speed = std::min(v.speed, now.speed_limit);
        }
    }
    for (int id : arrived) {
        remove_vehicle(state, id, ev);
        ++state.arrived_total;
    }
    state.exited_total += ev.exited_this_step;

    ev.collided = detect_collisions(state, g, cfg);
    ev.collision_count_this_step = static_cast<int>(ev.collided.size());
    for (int id : ev.collided) remove_vehicle(state, id, ev);
    state.collisions_total += ev.collision_count_this_step;

    for (auto& [id, v] : state.vehicles) {
        if (v.speed < kWaitSpeedThreshold) {
            v.wait += cfg.dt;
        } else if (v.speed > kWaitSpeedThreshold) {
            v.wait = 0.0;
        }
    }

    ++state.step_index;
    state.clock = static_cast<double>(state.step_index) * cfg.dt;
    ev.spawned = spawn_arrivals(state, cfg.demand, g, cfg.p_rv, cfg);
    return ev;
}

Simulation::Simulation(std::shared_ptr<const NetworkGraph> graph, SimConfig cfg, std::uint64_t seed)
    : graph_(std::move(graph)), cfg_(cfg), state_(make_initial_state(seed)) {
    cfg_.validate();
}

StepEvents Simulation::step(const StepCommands& commands) { return mixflow::step(state_, commands, *graph_, cfg_); }

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(out) {
    out_ << "step,vehicle_id,kind,lane,offset_m,speed_mps,wait_s\n";
}

void TrajectoryWriter::write(const SimState& state, const NetworkGraph& g) {
    for (const auto& [id, v] : state.vehicles) {
        out_ << state.step_index << ',' << id << ',' << to_string(v.kind) << ',' << g.lane(v.lane).name << ','
             << format_double(v.offset) << ',' << format_double(v.speed) << ',' << format_double(v.wait) << '\n';
    }
}

}  // namespace mixflow
