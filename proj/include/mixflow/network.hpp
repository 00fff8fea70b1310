#pragma once

#include <span>
#include <string>
#include <vector>

#include "mixflow/geometry.hpp"

namespace mixflow {

using NodeId = int;
using EdgeId = int;
using LaneId = int;
using ConnectorId = int;

inline constexpr int kNone = -1;
inline constexpr double kLaneWidth = 3.2;
inline constexpr double kDefaultSpeedLimit = 13.89;
inline constexpr double kDefaultRingSpeedLimit = 8.33;
/// Connector polylines closer than this are treated as geometrically conflicting.
inline constexpr double kConflictTolerance = 0.5;

enum class NodeKind { Junction, Terminal };
enum class EdgeRole { Incoming, Outgoing, Ring };
enum class Topology { Intersection, Roundabout };

struct Node {
    NodeId id = kNone;
    std::string name;
    Vec2 pos;
    NodeKind kind = NodeKind::Terminal;
    bool operator==(const Node&) const = default;
};

struct Edge {
    EdgeId id = kNone;
    std::string name;
    NodeId from = kNone;
    NodeId to = kNone;
    EdgeRole role = EdgeRole::Incoming;
    int leg = kNone;  // leg index for incoming/outgoing edges; kNone on ring edges
    std::vector<LaneId> lanes;  // index 0 is the rightmost lane
    bool operator==(const Edge&) const = default;
};

/// A road lane (edge != kNone) or a junction-internal connector lane
/// (connector != kNone). Exactly one of the two is set.
struct Lane {
    LaneId id = kNone;
    std::string name;
    EdgeId edge = kNone;
    ConnectorId connector = kNone;
    int index = 0;
    Polyline shape;
    double width = kLaneWidth;
    double speed_limit = kDefaultSpeedLimit;

    double length() const { return shape.length(); }
    bool is_connector() const { return connector != kNone; }
    bool operator==(const Lane&) const = default;
};

struct Connector {
    ConnectorId id = kNone;
    LaneId lane = kNone;       // internal lane carrying the geometry
    LaneId from_lane = kNone;  // incoming road lane
    LaneId to_lane = kNone;    // outgoing road lane
    std::vector<ConnectorId> conflicts;  // sorted ascending
    bool operator==(const Connector&) const = default;
};

struct Route {
    std::vector<EdgeId> edges;
    bool operator==(const Route&) const = default;
};

/// Raw parts of a graph, the unit of construction and serialization.
struct GraphParts {
    Topology topology = Topology::Intersection;
    Vec2 junction_center;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<Lane> lanes;
    std::vector<Connector> connectors;
    bool has_signals = false;
    bool operator==(const GraphParts&) const = default;
};

/// Lane-level road network. Immutable once built; every instance satisfies
/// the structural invariants checked by `validate()`.
class NetworkGraph {
public:
    NetworkGraph() = default;

    /// Builds derived indexes and validates. When `compute_conflicts` is set
    /// the connector conflict sets are recomputed from geometry; otherwise the
    /// supplied sets are kept (and must be symmetric).
    static NetworkGraph assemble(GraphParts parts, bool compute_conflicts = true);

    const GraphParts& parts() const { return parts_; }
    Topology topology() const { return parts_.topology; }
    Vec2 junction_center() const { return parts_.junction_center; }
    bool has_signals() const { return parts_.has_signals; }

    const std::vector<Node>& nodes() const { return parts_.nodes; }
    const std::vector<Edge>& edges() const { return parts_.edges; }
    const std::vector<Lane>& lanes() const { return parts_.lanes; }
    const std::vector<Connector>& connectors() const { return parts_.connectors; }

    const Node& node(NodeId id) const { return parts_.nodes.at(static_cast<std::size_t>(id)); }
    const Edge& edge(EdgeId id) const { return parts_.edges.at(static_cast<std::size_t>(id)); }
    const Lane& lane(LaneId id) const { return parts_.lanes.at(static_cast<std::size_t>(id)); }
    const Connector& connector(ConnectorId id) const {
        return parts_.connectors.at(static_cast<std::size_t>(id));
    }

    /// Edges with no predecessor, ascending.
    const std::vector<EdgeId>& origin_edges() const { return origins_; }
    /// Edges with no successor, ascending.
    const std::vector<EdgeId>& terminal_edges() const { return terminals_; }
    /// Edges reachable in one connector hop, ascending and unique.
    const std::vector<EdgeId>& successors(EdgeId e) const { return successors_.at(static_cast<std::size_t>(e)); }
    /// Connectors leaving a road lane, ascending.
    const std::vector<ConnectorId>& connectors_from(LaneId lane) const {
        return connectors_from_.at(static_cast<std::size_t>(lane));
    }

    /// Preferred connector from `from_lane` onto any lane of `to_edge`:
    /// the one keeping the lane index where possible, else the lowest target
    /// index. kNone when the lane has no connector to that edge.
    ConnectorId connector_towards(LaneId from_lane, EdgeId to_edge) const;

    bool is_origin(EdgeId e) const;
    bool is_terminal(EdgeId e) const;

    /// Total lane-0 ring length (ring edges plus ring continuation connectors);
    /// zero for intersections.
    double ring_circumference() const;

    /// Throws TopologyError when an invariant is violated.
    void validate() const;

    bool operator==(const NetworkGraph& other) const;

private:
    void index();

    GraphParts parts_;
    std::vector<EdgeId> origins_;
    std::vector<EdgeId> terminals_;
    std::vector<std::vector<EdgeId>> successors_;
    std::vector<std::vector<ConnectorId>> connectors_from_;
};

/// One approach of a junction: outward direction, straight length and lane counts.
struct LegSpec {
    double angle_rad = 0.0;
    double length = 200.0;
    int in_lanes = 1;
    int out_lanes = 1;
    double speed_limit = kDefaultSpeedLimit;
};

struct IntersectionParams {
    int legs = 4;
    int in_lanes = 1;
    int out_lanes = 1;
    double leg_length = 200.0;
    double speed_limit = kDefaultSpeedLimit;
};

struct RoundaboutParams {
    int legs = 4;
    int ring_lanes = 1;
    double radius = 15.0;
    double leg_length = 200.0;
    int in_lanes = 1;
    int out_lanes = 1;
    double speed_limit = kDefaultSpeedLimit;
    double ring_speed_limit = kDefaultRingSpeedLimit;
};

/// Symmetric N-leg intersection; legs equally spaced, every incoming lane
/// connected to every outgoing lane of every other leg.
NetworkGraph build_intersection(const IntersectionParams& params);
/// Intersection with arbitrary leg directions and per-leg lane counts.
NetworkGraph build_intersection(std::span<const LegSpec> legs);

/// Symmetric N-leg roundabout with a counter-clockwise ring.
NetworkGraph build_roundabout(const RoundaboutParams& params);
/// Roundabout with arbitrary leg directions.
NetworkGraph build_roundabout(std::span<const LegSpec> legs, int ring_lanes, double radius,
                              double ring_speed_limit = kDefaultRingSpeedLimit);

/// Minimal-hop edge sequence from an origin edge to a terminal edge; ties are
/// broken toward ascending edge ids. Throws NoRouteError when unreachable.
Route shortest_route(const NetworkGraph& graph, EdgeId origin, EdgeId destination);

const char* to_string(Topology t);
Topology topology_from_string(const std::string& text);

}  // namespace mixflow
