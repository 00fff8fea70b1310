#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mixflow/network.hpp"

namespace mixflow {

using OsmId = long long;

struct OsmNode {
    OsmId id = 0;
    double lat = 0.0;
    double lon = 0.0;
    Vec2 pos;              // local planar meters
    bool signal = false;   // highway=traffic_signals

    bool operator==(const OsmNode&) const = default;
};

struct OsmWay {
    OsmId id = 0;
    std::vector<OsmId> refs;
    std::map<std::string, std::string> tags;  // supported subset only

    bool operator==(const OsmWay&) const = default;
};

/// Nodes and highway ways of an OSM extract, projected about the bounding-box
/// center with an equirectangular projection.
struct OsmDocument {
    std::map<OsmId, OsmNode> nodes;
    std::map<OsmId, OsmWay> ways;

    bool operator==(const OsmDocument&) const = default;
};

/// Throws ParseError (with line) on malformed XML and ReferenceError naming
/// the way when a node reference does not resolve.
OsmDocument parse_osm(std::string_view xml);
OsmDocument load_osm(const std::filesystem::path& path);

/// OSM XML v0.6 text for the document (supported tags only).
std::string serialize_osm(const OsmDocument& doc);

inline constexpr double kDefaultClipRadius = 250.0;

/// Speed in m/s from an OSM maxspeed value (km/h, or "mph" suffix);
/// kDefaultSpeedLimit when absent or unreadable.
double parse_maxspeed(const std::string& value);

/// Rebuilds the junction at `junction` from the ways meeting it, clipped to
/// `clip_radius`. A node on a junction=roundabout way yields a roundabout.
/// Throws TopologyError when fewer than 3 approaches meet.
NetworkGraph convert_osm(const OsmDocument& doc, OsmId junction, double clip_radius = kDefaultClipRadius);

}  // namespace mixflow
