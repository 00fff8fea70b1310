#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mixflow/mdp.hpp"
#include "mixflow/network.hpp"
#include "mixflow/sim.hpp"

namespace mixflow::testing {

inline EdgeId edge_named(const NetworkGraph& g, const std::string& name) {
    for (const auto& e : g.edges()) {
        if (e.name == name) return e.id;
    }
    return kNone;
}

// Scatters `count` vehicles uniformly over every lane of `g` with random
// speeds in [0, lane limit]. Routes are left empty; only poses matter here.
inline SimState random_state(const NetworkGraph& g, int count, std::mt19937_64& rng) {
    SimState s = make_initial_state(rng());
    std::uniform_int_distribution<std::size_t> pick_lane(0, g.lanes().size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int id = 0; id < count; ++id) {
        const Lane& lane = g.lanes()[pick_lane(rng)];
        VehicleState v;
        v.id = id;
        v.kind = unit(rng) < 0.5 ? VehicleKind::RV : VehicleKind::HV;
        v.lane = lane.id;
        v.offset = unit(rng) * lane.length();
        v.speed = unit(rng) * lane.speed_limit;
        v.wait = unit(rng) * 60.0;
        s.vehicles.emplace(id, v);
    }
    s.next_vehicle_id = count;
    s.spawned_total = count;
    return s;
}

struct OracleNeighbor {
    int id;
    double distance;
};

// Brute-force region membership: rotate every neighbor into the ego frame
// with an explicit angle, keep those inside each box, sort exhaustively.
inline ObservedSet brute_force_neighbors(const SimState& s, int ego, const NetworkGraph& g, const ObsConfig& cfg) {
    const VehicleState& e = s.vehicles.at(ego);
    const Vec2 p0 = g.lane(e.lane).shape.point_at(e.offset);
    const Vec2 h = g.lane(e.lane).shape.heading_at(e.offset);
    const double theta = std::atan2(h.y, h.x);
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    std::vector<OracleNeighbor> front;
    std::vector<OracleNeighbor> rear;
    for (const auto& [id, v] : s.vehicles) {
        if (id == ego) continue;
        const Vec2 p = g.lane(v.lane).shape.point_at(v.offset);
        const double dx = p.x - p0.x;
        const double dy = p.y - p0.y;
        const double lon = c * dx + sn * dy;
        const double lat = -sn * dx + c * dy;
        const double dist = std::hypot(dx, dy);
        if (std::abs(lat) > cfg.d) continue;
        if (lon >= 0.0 && lon <= cfg.d_f) front.push_back({id, dist});
        if (lon < 0.0 && -lon <= cfg.d_b) rear.push_back({id, dist});
    }
    auto take = [](std::vector<OracleNeighbor>& all, int k) {
        std::vector<int> ids;
        std::sort(all.begin(), all.end(), [](const OracleNeighbor& a, const OracleNeighbor& b) {
            return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
        });
        for (std::size_t i = 0; i < all.size() && static_cast<int>(i) < k; ++i) ids.push_back(all[i].id);
        return ids;
    };
    return {take(front, cfg.n_front), take(rear, cfg.n_rear)};
}

}  // namespace mixflow::testing
