#include "mixflow/osm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "mixflow/error.hpp"

namespace mixflow {

namespace pt = boost::property_tree;

namespace {

constexpr double kEarthRadius = 6371008.8;
const std::set<std::string> kSupportedTags{"highway", "lanes", "oneway", "junction", "maxspeed"};

template <typename T>
T attr(const pt::ptree& el, const char* name, const std::string& where) {
    const auto v = el.get_optional<T>(std::string("<xmlattr>.") + name);
    if (!v) throw ValidationError(where + "." + name, "missing or malformed attribute");
    return *v;
}

void project(OsmDocument& doc) {
    if (doc.nodes.empty()) return;
    double lat_min = std::numeric_limits<double>::infinity();
    double lat_max = -lat_min;
    double lon_min = lat_min;
    double lon_max = -lat_min;
    for (const auto& [id, n] : doc.nodes) {
        lat_min = std::min(lat_min, n.lat);
        lat_max = std::max(lat_max, n.lat);
        lon_min = std::min(lon_min, n.lon);
        lon_max = std::max(lon_max, n.lon);
    }
    const double lat0 = (lat_min + lat_max) / 2.0;
    const double lon0 = (lon_min + lon_max) / 2.0;
    const double rad = std::numbers::pi / 180.0;
    for (auto& [id, n] : doc.nodes) {
        n.pos = {kEarthRadius * (n.lon - lon0) * rad * std::cos(lat0 * rad), kEarthRadius * (n.lat - lat0) * rad};
    }
}

}  // namespace

OsmDocument parse_osm(std::string_view xml) {
    pt::ptree tree;
    std::istringstream in{std::string(xml)};
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(static_cast<long>(e.line()), e.message());
    }
    const auto root = tree.get_child_optional("osm");
    if (!root) throw ParseError(1, "missing <osm> root element");

    OsmDocument doc;
    std::vector<OsmWay> ways;
    for (const auto& [name, el] : *root) {
        if (name == "node") {
            OsmNode n;
            n.id = attr<OsmId>(el, "id", "node");
            const std::string where = "node[" + std::to_string(n.id) + "]";
            n.lat = attr<double>(el, "lat", where);
            n.lon = attr<double>(el, "lon", where);
            for (const auto& [child, tag] : el) {
                if (child == "tag" && tag.get<std::string>("<xmlattr>.k", "") == "highway" &&
                    tag.get<std::string>("<xmlattr>.v", "") == "traffic_signals") {
                    n.signal = true;
                }
            }
            doc.nodes[n.id] = n;
        } else if (name == "way") {
            OsmWay w;
            w.id = attr<OsmId>(el, "id", "way");
            const std::string where = "way[" + std::to_string(w.id) + "]";
            for (const auto& [child, sub] : el) {
                if (child == "nd") {
                    w.refs.push_back(attr<OsmId>(sub, "ref", where + ".nd"));
                } else if (child == "tag") {
                    const std::string k = sub.get<std::string>("<xmlattr>.k", "");
                    if (kSupportedTags.contains(k)) w.tags[k] = sub.get<std::string>("<xmlattr>.v", "");
                }
            }
            ways.push_back(std::move(w));
        }
    }
    for (auto& w : ways) {
        for (OsmId r : w.refs) {
            if (!doc.nodes.contains(r)) {
                throw ReferenceError("way " + std::to_string(w.id) + " references undefined node " + std::to_string(r));
            }
        }
        if (w.tags.contains("highway")) doc.ways[w.id] = std::move(w);
    }
    project(doc);
    return doc;
}

OsmDocument load_osm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_osm(text.str());
}

std::string serialize_osm(const OsmDocument& doc) {
    std::ostringstream out;
    out.precision(12);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n";
    for (const auto& [id, n] : doc.nodes) {
        out << "  <node id=\"" << id << "\" lat=\"" << n.lat << "\" lon=\"" << n.lon << "\"";
        if (n.signal) {
            out << ">\n    <tag k=\"highway\" v=\"traffic_signals\"/>\n  </node>\n";
        } else {
            out << "/>\n";
        }
    }
    for (const auto& [id, w] : doc.ways) {
        out << "  <way id=\"" << id << "\">\n";
        for (OsmId r : w.refs) out << "    <nd ref=\"" << r << "\"/>\n";
        for (const auto& [k, v] : w.tags) out << "    <tag k=\"" << k << "\" v=\"" << v << "\"/>\n";
        out << "  </way>\n";
    }
    out << "</osm>\n";
    return out.str();
}

double parse_maxspeed(const std::string& value) {
    std::istringstream in(value);
    double v = 0.0;
    if (!(in >> v) || !(v > 0.0)) return kDefaultSpeedLimit;
    std::string unit;
    in >> unit;
    const double kmh = unit == "mph" ? v * 1.609344 : v;
    return kmh / 3.6;
}

namespace {

struct Arm {
    std::vector<Vec2> points;  // starts at the junction side
    int in_lanes = 0;
    int out_lanes = 0;
    double speed = kDefaultSpeedLimit;
};

struct Direction {
    int forward = 1;   // lanes along the way's node order
    int backward = 1;
};

Direction lanes_of(const OsmWay& w) {
    int total = 0;
    if (auto it = w.tags.find("lanes"); it != w.tags.end()) {
        try {
            total = std::stoi(it->second);
        } catch (const std::exception&) {
            throw ValidationError("way[" + std::to_string(w.id) + "].lanes", "not an integer: " + it->second);
        }
    }
    const std::string oneway = w.tags.contains("oneway") ? w.tags.at("oneway") : "";
    if (oneway == "yes" || oneway == "true" || oneway == "1") return {std::max(1, total), 0};
    if (oneway == "-1" || oneway == "reverse") return {0, std::max(1, total)};
    const int per = std::max(1, total / 2);
    return {per, per};
}

double speed_of(const OsmWay& w) {
    auto it = w.tags.find("maxspeed");
    return it == w.tags.end() ? kDefaultSpeedLimit : parse_maxspeed(it->second);
}

// Cuts the polyline where it first leaves the disc of `radius` about `center`.
std::vector<Vec2> clip(const std::vector<Vec2>& pts, Vec2 center, double radius) {
    std::vector<Vec2> out{pts.front()};
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const Vec2 a = pts[i - 1];
        const Vec2 b = pts[i];
        if ((b - center).norm() <= radius) {
            out.push_back(b);
            continue;
        }
        // Solve |a + t (b - a) - center| = radius for t in [0, 1].
        const Vec2 d = b - a;
        const Vec2 f = a - center;
        const double qa = d.dot(d);
        const double qb = 2.0 * f.dot(d);
        const double qc = f.dot(f) - radius * radius;
        const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
        const double t = std::clamp((-qb + std::sqrt(disc)) / (2.0 * qa), 0.0, 1.0);
        out.push_back(a + d * t);
        break;
    }
    return out;
}

double path_length(const std::vector<Vec2>& pts) {
    double s = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
    return s;
}

// Arms of way `w` leaving node index i: toward the start (traffic along the
// way flows into the junction) and toward the end (flows out).
void arms_at(const OsmDocument& doc, const OsmWay& w, std::size_t i, std::vector<Arm>& out) {
    const Direction dir = lanes_of(w);
    const double speed = speed_of(w);
    if (i > 0) {
        Arm a;
        for (std::size_t k = i + 1; k-- > 0;) a.points.push_back(doc.nodes.at(w.refs[k]).pos);
        a.in_lanes = dir.forward;
        a.out_lanes = dir.backward;
        a.speed = speed;
        out.push_back(std::move(a));
    }
    if (i + 1 < w.refs.size()) {
        Arm a;
        for (std::size_t k = i; k < w.refs.size(); ++k) a.points.push_back(doc.nodes.at(w.refs[k]).pos);
        a.in_lanes = dir.backward;
        a.out_lanes = dir.forward;
        a.speed = speed;
        out.push_back(std::move(a));
    }
}

bool is_roundabout(const OsmWay& w) {
    auto it = w.tags.find("junction");
    return it != w.tags.end() && (it->second == "roundabout" || it->second == "circular");
}

LegSpec leg_from(const Arm& arm, Vec2 center, double clip_radius, double angle) {
    const auto clipped = clip(arm.points, center, clip_radius);
    return {angle, path_length(clipped), arm.in_lanes, arm.out_lanes, arm.speed};
}

// Builders place the junction at the origin; move it onto the projected position.
NetworkGraph place(const NetworkGraph& g, Vec2 offset, bool signals) {
    GraphParts parts = g.parts();
    for (auto& n : parts.nodes) n.pos = n.pos + offset;
    for (auto& l : parts.lanes) {
        std::vector<Vec2> pts = l.shape.points();
        for (auto& p : pts) p = p + offset;
        l.shape = Polyline(std::move(pts));
    }
    parts.junction_center = parts.junction_center + offset;
    parts.has_signals = signals;
    return NetworkGraph::assemble(std::move(parts), false);
}

}  // namespace

NetworkGraph convert_osm(const OsmDocument& doc, OsmId junction, double clip_radius) {
    if (!(clip_radius > 0.0)) throw ValidationError("radius", "must be positive");
    auto jn = doc.nodes.find(junction);
    if (jn == doc.nodes.end()) throw ReferenceError("junction node " + std::to_string(junction) + " is not in the document");
    const Vec2 j = jn->second.pos;

    const OsmWay* ring = nullptr;
    for (const auto& [id, w] : doc.ways) {
        if (is_roundabout(w) && std::find(w.refs.begin(), w.refs.end(), junction) != w.refs.end()) {
            ring = &w;
            break;
        }
    }

    if (!ring) {
        std::vector<Arm> arms;
        for (const auto& [id, w] : doc.ways) {
            for (std::size_t i = 0; i < w.refs.size(); ++i) {
                if (w.refs[i] == junction) arms_at(doc, w, i, arms);
            }
        }
        if (arms.size() < 3) {
            throw TopologyError("junction node " + std::to_string(junction) + " joins " + std::to_string(arms.size()) +
                                " approaches, need at least 3");
        }
        std::vector<LegSpec> legs;
        bool signals = jn->second.signal;
        for (const auto& arm : arms) {
            const auto clipped = clip(arm.points, j, clip_radius);
            // Approach direction from the first 30 m of road.
            Vec2 toward = clipped.back() - j;
            double walked = 0.0;
            for (std::size_t k = 1; k < clipped.size(); ++k) {
                walked += (clipped[k] - clipped[k - 1]).norm();
                if (walked >= 30.0) {
                    toward = clipped[k] - j;
                    break;
                }
            }
            legs.push_back(leg_from(arm, j, clip_radius, std::atan2(toward.y, toward.x)));
        }
        for (const auto& [id, n] : doc.nodes) {
            if (n.signal && (n.pos - j).norm() <= 30.0) signals = true;
        }
        return place(build_intersection(legs), j, signals);
    }

    // Roundabout: circle through the ring nodes, approaches attached to them.
    std::vector<OsmId> ring_nodes(ring->refs.begin(), ring->refs.end());
    if (ring_nodes.size() > 1 && ring_nodes.front() == ring_nodes.back()) ring_nodes.pop_back();
    Vec2 center;
    for (OsmId r : ring_nodes) center = center + doc.nodes.at(r).pos;
    center = center * (1.0 / static_cast<double>(ring_nodes.size()));
    double radius = 0.0;
    for (OsmId r : ring_nodes) radius += (doc.nodes.at(r).pos - center).norm();
    radius /= static_cast<double>(ring_nodes.size());
    const std::set<OsmId> on_ring(ring_nodes.begin(), ring_nodes.end());

    std::vector<LegSpec> legs;
    bool signals = false;
    for (const auto& [id, w] : doc.ways) {
        if (is_roundabout(w)) continue;
        for (std::size_t i = 0; i < w.refs.size(); ++i) {
            if (!on_ring.contains(w.refs[i])) continue;
            std::vector<Arm> arms;
            arms_at(doc, w, i, arms);
            const Vec2 attach = doc.nodes.at(w.refs[i]).pos - center;
            for (const auto& arm : arms) {
                // Skip pieces that run along or inside the ring.
                if ((arm.points[1] - center).norm() <= radius) continue;
                legs.push_back(leg_from(arm, center, clip_radius, std::atan2(attach.y, attach.x)));
            }
        }
    }
    for (OsmId r : ring_nodes) signals = signals || doc.nodes.at(r).signal;
    if (legs.size() < 3) {
        throw TopologyError("roundabout at node " + std::to_string(junction) + " has " + std::to_string(legs.size()) +
                            " approaches, need at least 3");
    }
    const Direction ring_dir = lanes_of(*ring);
    const int ring_lanes = std::max({1, ring_dir.forward, ring_dir.backward});
    const double ring_speed =
        ring->tags.contains("maxspeed") ? parse_maxspeed(ring->tags.at("maxspeed")) : kDefaultRingSpeedLimit;
    return place(build_roundabout(legs, ring_lanes, radius, ring_speed), center, signals);
}

}  // namespace mixflow
