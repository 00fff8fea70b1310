#include "mixflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "mixflow/error.hpp"

namespace mixflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kConnectorSegments = 12;
constexpr int kMaxLegs = 13;

double normalize_angle(double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0.0 ? a + kTwoPi : a;
}

struct Builder {
    GraphParts parts;

    NodeId add_node(std::string name, Vec2 pos, NodeKind kind) {
        const auto id = static_cast<NodeId>(parts.nodes.size());
        parts.nodes.push_back({id, std::move(name), pos, kind});
        return id;
    }

    EdgeId add_edge(std::string name, NodeId from, NodeId to, EdgeRole role, int leg) {
        const auto id = static_cast<EdgeId>(parts.edges.size());
        parts.edges.push_back({id, std::move(name), from, to, role, leg, {}});
        return id;
    }

    LaneId add_road_lane(EdgeId edge, std::vector<Vec2> points, double speed) {
        auto& e = parts.edges[static_cast<std::size_t>(edge)];
        const auto id = static_cast<LaneId>(parts.lanes.size());
        const int index = static_cast<int>(e.lanes.size());
        Lane lane;
        lane.id = id;
        lane.name = e.name + "_" + std::to_string(index);
        lane.edge = edge;
        lane.index = index;
        lane.shape = Polyline(std::move(points));
        lane.speed_limit = speed;
        parts.lanes.push_back(std::move(lane));
        e.lanes.push_back(id);
        return id;
    }

    ConnectorId add_connector(LaneId from, LaneId to, std::vector<Vec2> points) {
        const auto cid = static_cast<ConnectorId>(parts.connectors.size());
        const auto lid = static_cast<LaneId>(parts.lanes.size());
        const Lane& in = parts.lanes[static_cast<std::size_t>(from)];
        const Lane& out = parts.lanes[static_cast<std::size_t>(to)];
        Lane lane;
        lane.id = lid;
        lane.name = ":" + in.name + ">" + out.name;
        lane.connector = cid;
        lane.shape = Polyline(std::move(points));
        lane.speed_limit = std::min(in.speed_limit, out.speed_limit);
        parts.lanes.push_back(std::move(lane));
        parts.connectors.push_back({cid, lid, from, to, {}});
        return cid;
    }

    // Bezier connector leaving `from` tangentially and arriving tangentially.
    ConnectorId connect_smooth(LaneId from, LaneId to) {
        const Polyline& a = parts.lanes[static_cast<std::size_t>(from)].shape;
        const Polyline& b = parts.lanes[static_cast<std::size_t>(to)].shape;
        const Vec2 p0 = a.point_at(a.length());
        const Vec2 p3 = b.point_at(0.0);
        const double k = std::max(1.0, (p3 - p0).norm() / 3.0);
        return add_connector(from, to,
                             cubic_bezier(p0, p0 + a.heading_at(a.length()) * k,
                                          p3 - b.heading_at(0.0) * k, p3, kConnectorSegments));
    }
};

struct LegLanes {
    EdgeId in_edge = kNone;
    EdgeId out_edge = kNone;
    std::vector<LaneId> in;
    std::vector<LaneId> out;
};

// Incoming lanes sit on the counter-clockwise side of the leg axis (right of
// the inbound direction), outgoing lanes on the clockwise side.
LegLanes add_leg(Builder& b, const LegSpec& leg, int k, double stop_radius, NodeId junction_in,
                 NodeId junction_out) {
    const Vec2 u = unit_from_angle(leg.angle_rad);
    const NodeId terminal =
        b.add_node("T" + std::to_string(k), u * (stop_radius + leg.length), NodeKind::Terminal);
    LegLanes out;
    if (leg.in_lanes > 0) {
        out.in_edge = b.add_edge("in" + std::to_string(k), terminal, junction_in, EdgeRole::Incoming, k);
        const Vec2 side = (u * -1.0).right();
        for (int i = 0; i < leg.in_lanes; ++i) {
            const Vec2 off = side * ((leg.in_lanes - i - 0.5) * kLaneWidth);
            out.in.push_back(b.add_road_lane(
                out.in_edge, {u * (stop_radius + leg.length) + off, u * stop_radius + off}, leg.speed_limit));
        }
    }
    if (leg.out_lanes > 0) {
        out.out_edge = b.add_edge("out" + std::to_string(k), junction_out, terminal, EdgeRole::Outgoing, k);
        const Vec2 side = u.right();
        for (int j = 0; j < leg.out_lanes; ++j) {
            const Vec2 off = side * ((leg.out_lanes - j - 0.5) * kLaneWidth);
            out.out.push_back(b.add_road_lane(
                out.out_edge, {u * stop_radius + off, u * (stop_radius + leg.length) + off}, leg.speed_limit));
        }
    }
    return out;
}

void check_leg_count(int legs) {
    if (legs < 3 || legs > kMaxLegs) {
        throw ValidationError("legs", "must be in [3, 13], got " + std::to_string(legs));
    }
}

std::vector<LegSpec> sorted_legs(std::span<const LegSpec> legs) {
    check_leg_count(static_cast<int>(legs.size()));
    std::vector<LegSpec> out(legs.begin(), legs.end());
    int origins = 0;
    int terminals = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& leg = out[k];
        const std::string prefix = "legs[" + std::to_string(k) + "].";
        if (leg.in_lanes < 0) throw ValidationError(prefix + "in_lanes", "must be nonnegative");
        if (leg.out_lanes < 0) throw ValidationError(prefix + "out_lanes", "must be nonnegative");
        if (leg.in_lanes + leg.out_lanes == 0) throw ValidationError(prefix + "in_lanes", "leg has no lanes");
        if (!(leg.length > 20.0)) throw ValidationError(prefix + "length", "must exceed 20 m");
        if (!(leg.speed_limit > 0.0)) throw ValidationError(prefix + "speed_limit", "must be positive");
        leg.angle_rad = normalize_angle(leg.angle_rad);
        origins += leg.in_lanes > 0;
        terminals += leg.out_lanes > 0;
    }
    if (origins == 0 || terminals == 0) {
        throw TopologyError("junction needs at least one incoming and one outgoing leg");
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const LegSpec& a, const LegSpec& b) { return a.angle_rad < b.angle_rad; });
    return out;
}

double min_angular_gap(const std::vector<LegSpec>& legs) {
    double gap = kTwoPi;
    for (std::size_t k = 0; k < legs.size(); ++k) {
        const double next = k + 1 < legs.size() ? legs[k + 1].angle_rad : legs[0].angle_rad + kTwoPi;
        gap = std::min(gap, next - legs[k].angle_rad);
    }
    return gap;
}

struct Box {
    Vec2 lo;
    Vec2 hi;
};

Box bounds(const Polyline& p) {
    Box b{p.points().front(), p.points().front()};
    for (const Vec2& v : p.points()) {
        b.lo = {std::min(b.lo.x, v.x), std::min(b.lo.y, v.y)};
        b.hi = {std::max(b.hi.x, v.x), std::max(b.hi.y, v.y)};
    }
    return b;
}

bool boxes_near(const Box& a, const Box& b, double tol) {
    return a.lo.x - tol <= b.hi.x && b.lo.x - tol <= a.hi.x && a.lo.y - tol <= b.hi.y &&
           b.lo.y - tol <= a.hi.y;
}

// Connectors leaving the same lane are sequential (handled by car following),
// so only pairs from distinct lanes are tested.
void compute_conflicts(GraphParts& parts) {
    auto& cs = parts.connectors;
    std::vector<Box> boxes;
    boxes.reserve(cs.size());
    for (auto& c : cs) {
        c.conflicts.clear();
        boxes.push_back(bounds(parts.lanes[static_cast<std::size_t>(c.lane)].shape));
    }
    for (std::size_t i = 0; i < cs.size(); ++i) {
        for (std::size_t j = i + 1; j < cs.size(); ++j) {
            if (cs[i].from_lane == cs[j].from_lane) continue;
            if (!boxes_near(boxes[i], boxes[j], kConflictTolerance)) continue;
            const auto& a = parts.lanes[static_cast<std::size_t>(cs[i].lane)].shape;
            const auto& b = parts.lanes[static_cast<std::size_t>(cs[j].lane)].shape;
            if (a.distance_to(b) <= kConflictTolerance) {
                cs[i].conflicts.push_back(cs[j].id);
                cs[j].conflicts.push_back(cs[i].id);
            }
        }
    }
    for (auto& c : cs) std::sort(c.conflicts.begin(), c.conflicts.end());
}

}  // namespace

NetworkGraph NetworkGraph::assemble(GraphParts parts, bool recompute_conflicts) {
    NetworkGraph g;
    g.parts_ = std::move(parts);
    if (recompute_conflicts) compute_conflicts(g.parts_);
    g.index();
    g.validate();
    return g;
}

void NetworkGraph::index() {
    const std::size_t ne = parts_.edges.size();
    successors_.assign(ne, {});
    connectors_from_.assign(parts_.lanes.size(), {});
    std::vector<bool> has_pred(ne, false);
    for (const auto& c : parts_.connectors) {
        if (c.from_lane < 0 || c.to_lane < 0 || static_cast<std::size_t>(c.from_lane) >= parts_.lanes.size() ||
            static_cast<std::size_t>(c.to_lane) >= parts_.lanes.size()) {
            throw TopologyError("connector " + std::to_string(c.id) + " references a missing lane");
        }
        const EdgeId from = parts_.lanes[static_cast<std::size_t>(c.from_lane)].edge;
        const EdgeId to = parts_.lanes[static_cast<std::size_t>(c.to_lane)].edge;
        if (from == kNone || to == kNone) {
            throw TopologyError("connector " + std::to_string(c.id) + " does not join two road lanes");
        }
        successors_[static_cast<std::size_t>(from)].push_back(to);
        has_pred[static_cast<std::size_t>(to)] = true;
        connectors_from_[static_cast<std::size_t>(c.from_lane)].push_back(c.id);
    }
    origins_.clear();
    terminals_.clear();
    for (std::size_t e = 0; e < ne; ++e) {
        auto& s = successors_[e];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        if (!has_pred[e]) origins_.push_back(static_cast<EdgeId>(e));
        if (s.empty()) terminals_.push_back(static_cast<EdgeId>(e));
    }
    for (auto& v : connectors_from_) std::sort(v.begin(), v.end());
}

void NetworkGraph::validate() const {
    const auto nl = parts_.lanes.size();
    for (std::size_t i = 0; i < nl; ++i) {
        const Lane& l = parts_.lanes[i];
        if (l.id != static_cast<LaneId>(i)) throw TopologyError("lane ids must be dense and ordered");
        if ((l.edge == kNone) == (l.connector == kNone)) {
            throw TopologyError("lane " + l.name + " must belong to exactly one edge or connector");
        }
        if (l.shape.points().size() < 2 || !(l.length() > 0.0)) {
            throw TopologyError("lane " + l.name + " has zero length");
        }
    }
    for (const Edge& e : parts_.edges) {
        if (e.lanes.empty()) throw TopologyError("edge " + e.name + " has no lanes");
        for (LaneId id : e.lanes) {
            if (id < 0 || static_cast<std::size_t>(id) >= nl || parts_.lanes[static_cast<std::size_t>(id)].edge != e.id) {
                throw TopologyError("edge " + e.name + " lists a foreign lane");
            }
        }
    }
    for (const Connector& c : parts_.connectors) {
        if (c.lane < 0 || static_cast<std::size_t>(c.lane) >= nl ||
            parts_.lanes[static_cast<std::size_t>(c.lane)].connector != c.id) {
            throw TopologyError("connector " + std::to_string(c.id) + " has no internal lane");
        }
        for (ConnectorId o : c.conflicts) {
            if (o == c.id || o < 0 || static_cast<std::size_t>(o) >= parts_.connectors.size()) {
                throw TopologyError("connector " + std::to_string(c.id) + " has an invalid conflict entry");
            }
            const auto& back = parts_.connectors[static_cast<std::size_t>(o)].conflicts;
            if (!std::binary_search(back.begin(), back.end(), c.id)) {
                throw TopologyError("conflict sets are not symmetric between connectors " +
                                    std::to_string(c.id) + " and " + std::to_string(o));
            }
        }
    }
    if (origins_.empty()) throw TopologyError("network has no origin edge");
    for (EdgeId o : origins_) {
        std::vector<bool> seen(parts_.edges.size(), false);
        std::deque<EdgeId> queue{o};
        seen[static_cast<std::size_t>(o)] = true;
        bool reached = false;
        while (!queue.empty() && !reached) {
            const EdgeId e = queue.front();
            queue.pop_front();
            if (e != o && is_terminal(e)) reached = true;
            for (EdgeId s : successors(e)) {
                if (!seen[static_cast<std::size_t>(s)]) {
                    seen[static_cast<std::size_t>(s)] = true;
                    queue.push_back(s);
                }
            }
        }
        if (!reached) throw TopologyError("origin edge " + edge(o).name + " reaches no terminal edge");
    }
}

bool NetworkGraph::is_origin(EdgeId e) const { return std::binary_search(origins_.begin(), origins_.end(), e); }

bool NetworkGraph::is_terminal(EdgeId e) const {
    return std::binary_search(terminals_.begin(), terminals_.end(), e);
}

ConnectorId NetworkGraph::connector_towards(LaneId from_lane, EdgeId to_edge) const {
    const int want = lane(from_lane).index;
    ConnectorId best = kNone;
    int best_score = 0;
    for (ConnectorId c : connectors_from(from_lane)) {
        const Lane& target = lane(connector(c).to_lane);
        if (target.edge != to_edge) continue;
        const int score = target.index == want ? -1 : target.index;
        if (best == kNone || score < best_score) {
            best = c;
            best_score = score;
        }
    }
    return best;
}

double NetworkGraph::ring_circumference() const {
    double total = 0.0;
    auto ring_lane0 = [&](LaneId id) {
        const Lane& l = lane(id);
        return l.edge != kNone && edge(l.edge).role == EdgeRole::Ring && l.index == 0;
    };
    for (const Lane& l : parts_.lanes) {
        if (l.edge != kNone && ring_lane0(l.id)) total += l.length();
    }
    for (const Connector& c : parts_.connectors) {
        if (ring_lane0(c.from_lane) && ring_lane0(c.to_lane)) total += lane(c.lane).length();
    }
    return total;
}

bool NetworkGraph::operator==(const NetworkGraph& other) const { return parts_ == other.parts_; }

NetworkGraph build_intersection(const IntersectionParams& p) {
    check_leg_count(p.legs);
    if (p.in_lanes < 1) throw ValidationError("in_lanes", "must be at least 1");
    if (p.out_lanes < 1) throw ValidationError("out_lanes", "must be at least 1");
    if (!(p.leg_length > 20.0)) throw ValidationError("leg_length", "must exceed 20 m");
    std::vector<LegSpec> legs;
    for (int k = 0; k < p.legs; ++k) {
        legs.push_back({kTwoPi * k / p.legs, p.leg_length, p.in_lanes, p.out_lanes, p.speed_limit});
    }
    return build_intersection(legs);
}

NetworkGraph build_intersection(std::span<const LegSpec> input) {
    const auto legs = sorted_legs(input);
    const int n = static_cast<int>(legs.size());

    // Stop lines far enough out that adjacent approaches do not overlap.
    double half_width = 0.0;
    for (const auto& l : legs) half_width = std::max(half_width, (l.in_lanes + l.out_lanes) * kLaneWidth / 2.0);
    const double radius = std::clamp(half_width / std::tan(min_angular_gap(legs) / 2.0) + 2.0, 8.0, 40.0);

    Builder b;
    b.parts.topology = Topology::Intersection;
    const NodeId junction = b.add_node("J", {}, NodeKind::Junction);
    std::vector<LegLanes> lanes;
    for (int k = 0; k < n; ++k) lanes.push_back(add_leg(b, legs[static_cast<std::size_t>(k)], k, radius, junction, junction));

    for (int a = 0; a < n; ++a) {
        for (LaneId in : lanes[static_cast<std::size_t>(a)].in) {
            for (int step = 1; step < n; ++step) {
                const int target = (a + step) % n;
                for (LaneId out : lanes[static_cast<std::size_t>(target)].out) b.connect_smooth(in, out);
            }
        }
    }
    return NetworkGraph::assemble(std::move(b.parts));
}

NetworkGraph build_roundabout(const RoundaboutParams& p) {
    check_leg_count(p.legs);
    if (p.ring_lanes < 1) throw ValidationError("ring_lanes", "must be at least 1");
    if (p.in_lanes < 1) throw ValidationError("in_lanes", "must be at least 1");
    if (p.out_lanes < 1) throw ValidationError("out_lanes", "must be at least 1");
    if (!(p.leg_length > 20.0)) throw ValidationError("leg_length", "must exceed 20 m");
    std::vector<LegSpec> legs;
    for (int k = 0; k < p.legs; ++k) {
        legs.push_back({kTwoPi * k / p.legs, p.leg_length, p.in_lanes, p.out_lanes, p.speed_limit});
    }
    return build_roundabout(legs, p.ring_lanes, p.radius, p.ring_speed_limit);
}

NetworkGraph build_roundabout(std::span<const LegSpec> input, int ring_lanes, double radius,
                              double ring_speed_limit) {
    if (ring_lanes < 1) throw ValidationError("ring_lanes", "must be at least 1");
    if (!(radius >= 10.0)) throw ValidationError("radius", "must be at least 10 m");
    if (radius - (ring_lanes - 1) * kLaneWidth < 3.0) {
        throw ValidationError("ring_lanes", "too many ring lanes for the radius");
    }
    if (!(ring_speed_limit > 0.0)) throw ValidationError("ring_speed_limit", "must be positive");
    const auto legs = sorted_legs(input);
    const int n = static_cast<int>(legs.size());
    const double stop_radius = radius + kLaneWidth / 2.0 + 6.0;
    const double delta = std::min(6.0 / radius, 0.25 * min_angular_gap(legs));

    Builder b;
    b.parts.topology = Topology::Roundabout;
    std::vector<NodeId> ring_nodes;
    for (int k = 0; k < n; ++k) {
        ring_nodes.push_back(b.add_node("R" + std::to_string(k),
                                        unit_from_angle(legs[static_cast<std::size_t>(k)].angle_rad) * radius,
                                        NodeKind::Junction));
    }
    std::vector<LegLanes> leg_lanes;
    for (int k = 0; k < n; ++k) {
        leg_lanes.push_back(add_leg(b, legs[static_cast<std::size_t>(k)], k, stop_radius,
                                    ring_nodes[static_cast<std::size_t>(k)], ring_nodes[static_cast<std::size_t>(k)]));
    }

    // Ring edge k runs counter-clockwise from node k to node k+1.
    std::vector<std::vector<LaneId>> ring(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double from = legs[static_cast<std::size_t>(k)].angle_rad + delta;
        const double to = (k + 1 < n ? legs[static_cast<std::size_t>(k + 1)].angle_rad
                                     : legs[0].angle_rad + kTwoPi) - delta;
        const int segments = std::max(2, static_cast<int>(std::ceil(72.0 * (to - from) / kTwoPi)));
        const EdgeId e = b.add_edge("ring" + std::to_string(k), ring_nodes[static_cast<std::size_t>(k)],
                                    ring_nodes[static_cast<std::size_t>((k + 1) % n)], EdgeRole::Ring, kNone);
        for (int j = 0; j < ring_lanes; ++j) {
            ring[static_cast<std::size_t>(k)].push_back(
                b.add_road_lane(e, arc_points({}, radius - j * kLaneWidth, from, to, segments), ring_speed_limit));
        }
    }

    for (int k = 0; k < n; ++k) {
        const auto& here = ring[static_cast<std::size_t>(k)];
        const auto& prev = ring[static_cast<std::size_t>((k + n - 1) % n)];
        const auto& leg = leg_lanes[static_cast<std::size_t>(k)];
        const double theta = legs[static_cast<std::size_t>(k)].angle_rad;
        for (std::size_t i = 0; i < leg.in.size(); ++i) {
            b.connect_smooth(leg.in[i], here[std::min(i, here.size() - 1)]);
        }
        for (int j = 0; j < ring_lanes; ++j) {
            b.add_connector(prev[static_cast<std::size_t>(j)], here[static_cast<std::size_t>(j)],
                            arc_points({}, radius - j * kLaneWidth, theta - delta, theta + delta, 4));
        }
        if (!leg.out.empty()) {
            for (std::size_t j = 0; j < prev.size(); ++j) {
                b.connect_smooth(prev[j], leg.out[std::min(j, leg.out.size() - 1)]);
            }
        }
    }
    return NetworkGraph::assemble(std::move(b.parts));
}

Route shortest_route(const NetworkGraph& g, EdgeId origin, EdgeId destination) {
    if (origin < 0 || static_cast<std::size_t>(origin) >= g.edges().size() || !g.is_origin(origin)) {
        throw ValidationError("origin", "edge " + std::to_string(origin) + " is not an origin edge");
    }
    if (destination < 0 || static_cast<std::size_t>(destination) >= g.edges().size() ||
        !g.is_terminal(destination)) {
        throw ValidationError("destination", "edge " + std::to_string(destination) + " is not a terminal edge");
    }
    std::vector<EdgeId> parent(g.edges().size(), kNone);
    std::vector<bool> seen(g.edges().size(), false);
    std::deque<EdgeId> queue{origin};
    seen[static_cast<std::size_t>(origin)] = true;
    while (!queue.empty()) {
        const EdgeId e = queue.front();
        queue.pop_front();
        if (e == destination) break;
        for (EdgeId s : g.successors(e)) {
            if (seen[static_cast<std::size_t>(s)]) continue;
            seen[static_cast<std::size_t>(s)] = true;
            parent[static_cast<std::size_t>(s)] = e;
            queue.push_back(s);
        }
    }
    if (!seen[static_cast<std::size_t>(destination)]) {
        throw NoRouteError("no route from " + g.edge(origin).name + " to " + g.edge(destination).name);
    }
    Route r;
    for (EdgeId e = destination; e != kNone; e = parent[static_cast<std::size_t>(e)]) r.edges.push_back(e);
    std::reverse(r.edges.begin(), r.edges.end());
    return r;
}

const char* to_string(Topology t) { return t == Topology::Intersection ? "intersection" : "roundabout"; }

Topology topology_from_string(const std::string& text) {
    if (text == "intersection") return Topology::Intersection;
    if (text == "roundabout") return Topology::Roundabout;
    throw ValidationError("topology", "expected intersection or roundabout, got '" + text + "'");
}

}  // namespace mixflow
