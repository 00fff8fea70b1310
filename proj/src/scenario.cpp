#include "mixflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mixflow/error.hpp"
#include "mixflow/rng.hpp"

namespace mixflow {

namespace {

// Typed access to one JSON object with field paths in every error.
class Reader {
public:
    Reader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "document" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const ordered_json& raw(const std::string& key) const {
        if (!j_.contains(key)) throw ValidationError(at(key), "missing");
        return j_.at(key);
    }

    double number(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number()) throw ValidationError(at(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ValidationError(at(key), "expected an integer");
        return v.get<int>();
    }
    int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number_unsigned()) throw ValidationError(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    long long signed_integer(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ValidationError(at(key), "expected an integer");
        return v.get<long long>();
    }

    std::string string(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_string()) throw ValidationError(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }

    bool boolean(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_boolean()) throw ValidationError(at(key), "expected true or false");
        return v.get<bool>();
    }

    Reader object(const std::string& key) const { return Reader(raw(key), at(key)); }

    const ordered_json& array(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_array()) throw ValidationError(at(key), "expected an array");
        return v;
    }

    void only(std::initializer_list<const char*> keys) const {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items()) {
            if (!allowed.contains(k)) throw ValidationError(at(k), "unknown field");
        }
    }

private:
    const ordered_json& j_;
    std::string path_;
};

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

template <typename E>
E enum_from(const std::string& text, const std::map<std::string, E>& names, const std::string& field) {
    auto it = names.find(text);
    if (it == names.end()) throw ValidationError(field, "unrecognized value '" + text + "'");
    return it->second;
}

template <typename E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
    for (const auto& [k, v] : names) {
        if (v == value) return k;
    }
    return "?";
}

const std::map<std::string, NodeKind> kNodeKinds{{"junction", NodeKind::Junction}, {"terminal", NodeKind::Terminal}};
const std::map<std::string, EdgeRole> kEdgeRoles{
    {"incoming", EdgeRole::Incoming}, {"outgoing", EdgeRole::Outgoing}, {"ring", EdgeRole::Ring}};

ordered_json vec(Vec2 v) { return ordered_json::array({v.x, v.y}); }

Vec2 vec_from(const ordered_json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ValidationError(field, "expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<int> ints_from(const ordered_json& j, const std::string& field) {
    if (!j.is_array()) throw ValidationError(field, "expected an array");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_integer()) throw ValidationError(indexed(field, i), "expected an integer");
        out.push_back(j[i].get<int>());
    }
    return out;
}

ordered_json recipe_json(const GeneratorRecipe& r) {
    ordered_json j;
    j["topology"] = to_string(r.topology);
    j["legs"] = r.legs;
    j["in_lanes"] = r.in_lanes;
    j["out_lanes"] = r.out_lanes;
    j["ring_lanes"] = r.ring_lanes;
    j["radius"] = r.radius;
    j["leg_length"] = r.leg_length;
    j["speed_limit"] = r.speed_limit;
    return j;
}

GeneratorRecipe recipe_from(const Reader& r) {
    r.only({"topology", "legs", "in_lanes", "out_lanes", "ring_lanes", "radius", "leg_length", "speed_limit"});
    GeneratorRecipe g;
    try {
        g.topology = topology_from_string(r.string("topology"));
    } catch (const ValidationError&) {
        throw ValidationError(r.at("topology"), "expected intersection or roundabout");
    }
    g.legs = r.integer("legs");
    g.in_lanes = r.integer("in_lanes", 1);
    g.out_lanes = r.integer("out_lanes", 1);
    g.ring_lanes = r.integer("ring_lanes", 1);
    g.radius = r.number("radius", 15.0);
    g.leg_length = r.number("leg_length", 200.0);
    g.speed_limit = r.number("speed_limit", kDefaultSpeedLimit);
    return g;
}

ordered_json parts_json(const GraphParts& p) {
    ordered_json j;
    j["topology"] = to_string(p.topology);
    j["junction_center"] = vec(p.junction_center);
    j["has_signals"] = p.has_signals;
    j["nodes"] = ordered_json::array();
    for (const auto& n : p.nodes) {
        j["nodes"].push_back({{"id", n.id}, {"name", n.name}, {"pos", vec(n.pos)}, {"kind", enum_name(n.kind, kNodeKinds)}});
    }
    j["edges"] = ordered_json::array();
    for (const auto& e : p.edges) {
        j["edges"].push_back({{"id", e.id},
                              {"name", e.name},
                              {"from", e.from},
                              {"to", e.to},
                              {"role", enum_name(e.role, kEdgeRoles)},
                              {"leg", e.leg},
                              {"lanes", e.lanes}});
    }
    j["lanes"] = ordered_json::array();
    for (const auto& l : p.lanes) {
        ordered_json pts = ordered_json::array();
        for (const auto& q : l.shape.points()) pts.push_back(vec(q));
        j["lanes"].push_back({{"id", l.id},
                              {"name", l.name},
                              {"edge", l.edge},
                              {"connector", l.connector},
                              {"index", l.index},
                              {"width", l.width},
                              {"speed_limit", l.speed_limit},
                              {"shape", pts}});
    }
    j["connectors"] = ordered_json::array();
    for (const auto& c : p.connectors) {
        j["connectors"].push_back({{"id", c.id},
                                   {"lane", c.lane},
                                   {"from_lane", c.from_lane},
                                   {"to_lane", c.to_lane},
                                   {"conflicts", c.conflicts}});
    }
    return j;
}

GraphParts parts_from(const Reader& r) {
    r.only({"topology", "junction_center", "has_signals", "nodes", "edges", "lanes", "connectors"});
    GraphParts p;
    p.topology = enum_from(r.string("topology"),
                           std::map<std::string, Topology>{{"intersection", Topology::Intersection},
                                                           {"roundabout", Topology::Roundabout}},
                           r.at("topology"));
    p.junction_center = vec_from(r.raw("junction_center"), r.at("junction_center"));
    p.has_signals = r.boolean("has_signals");
    const auto& nodes = r.array("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Reader n(nodes[i], indexed(r.at("nodes"), i));
        n.only({"id", "name", "pos", "kind"});
        p.nodes.push_back({n.integer("id"), n.string("name"), vec_from(n.raw("pos"), n.at("pos")),
                           enum_from(n.string("kind"), kNodeKinds, n.at("kind"))});
    }
    const auto& edges = r.array("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Reader e(edges[i], indexed(r.at("edges"), i));
        e.only({"id", "name", "from", "to", "role", "leg", "lanes"});
        p.edges.push_back({e.integer("id"), e.string("name"), e.integer("from"), e.integer("to"),
                           enum_from(e.string("role"), kEdgeRoles, e.at("role")), e.integer("leg"),
                           ints_from(e.raw("lanes"), e.at("lanes"))});
    }
    const auto& lanes = r.array("lanes");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const Reader l(lanes[i], indexed(r.at("lanes"), i));
        l.only({"id", "name", "edge", "connector", "index", "width", "speed_limit", "shape"});
        Lane lane;
        lane.id = l.integer("id");
        lane.name = l.string("name");
        lane.edge = l.integer("edge");
        lane.connector = l.integer("connector");
        lane.index = l.integer("index");
        lane.width = l.number("width");
        lane.speed_limit = l.number("speed_limit");
        const auto& pts = l.array("shape");
        std::vector<Vec2> shape;
        for (std::size_t k = 0; k < pts.size(); ++k) shape.push_back(vec_from(pts[k], indexed(l.at("shape"), k)));
        try {
            lane.shape = Polyline(std::move(shape));
        } catch (const Error& err) {
            throw ValidationError(l.at("shape"), err.what());
        }
        p.lanes.push_back(std::move(lane));
    }
    const auto& conns = r.array("connectors");
    for (std::size_t i = 0; i < conns.size(); ++i) {
        const Reader c(conns[i], indexed(r.at("connectors"), i));
        c.only({"id", "lane", "from_lane", "to_lane", "conflicts"});
        p.connectors.push_back({c.integer("id"), c.integer("lane"), c.integer("from_lane"), c.integer("to_lane"),
                                ints_from(c.raw("conflicts"), c.at("conflicts"))});
    }
    return p;
}

ordered_json program_json(const TlProgram& p) {
    ordered_json j;
    j["all_red_s"] = p.all_red_s;
    j["phases"] = ordered_json::array();
    for (const auto& ph : p.phases) {
        j["phases"].push_back({{"green", ph.green}, {"green_s", ph.green_s}, {"yellow_s", ph.yellow_s}});
    }
    return j;
}

TlProgram program_from(const Reader& r) {
    r.only({"all_red_s", "phases"});
    TlProgram p;
    p.all_red_s = r.number("all_red_s");
    const auto& phases = r.array("phases");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const Reader ph(phases[i], indexed(r.at("phases"), i));
        ph.only({"green", "green_s", "yellow_s"});
        p.phases.push_back({ints_from(ph.raw("green"), ph.at("green")), ph.number("green_s"), ph.number("yellow_s")});
    }
    return p;
}

}  // namespace

GeneratorRecipe recipe_from_json(const ordered_json& doc, const std::string& path) {
    return recipe_from(Reader(doc, path));
}

NetworkGraph GeneratorRecipe::build() const {
    if (topology == Topology::Intersection) {
        return build_intersection(IntersectionParams{legs, in_lanes, out_lanes, leg_length, speed_limit});
    }
    RoundaboutParams p;
    p.legs = legs;
    p.ring_lanes = ring_lanes;
    p.radius = radius;
    p.leg_length = leg_length;
    p.in_lanes = in_lanes;
    p.out_lanes = out_lanes;
    p.speed_limit = speed_limit;
    return build_roundabout(p);
}

void ScenarioSpec::validate() const {
    if (format_version != kScenarioFormatVersion) {
        throw VersionError("scenario format_version " + std::to_string(format_version) + " is not supported (expected " +
                           std::to_string(kScenarioFormatVersion) + ")");
    }
    if (metadata.name.empty()) throw ValidationError("metadata.name", "must not be empty");
    const int sources = generator.has_value() + osm.has_value() + inline_network.has_value();
    if (sources != 1) throw ValidationError("network", "exactly one of generator, osm, inline is required");
    if (!(demand >= kMinDemand && demand <= kMaxDemand)) {
        throw ValidationError("demand", "must lie in [400, 5000] veh/hr");
    }
    if (!(p_rv >= 0.0 && p_rv <= 1.0)) throw ValidationError("P_rv", "must lie in [0, 1]");
    if (episode_steps < 1) throw ValidationError("episode_steps", "must be at least 1");
}

ordered_json to_json(const ScenarioSpec& s) {
    ordered_json j;
    j["format_version"] = s.format_version;
    j["metadata"] = {{"name", s.metadata.name}, {"country", s.metadata.country},
                     {"topology", to_string(s.metadata.topology)}};
    ordered_json net = ordered_json::object();
    if (s.generator) net["generator"] = recipe_json(*s.generator);
    if (s.osm) {
        net["osm"] = {{"path", s.osm->path}, {"junction_node", s.osm->junction_node}, {"clip_radius", s.osm->clip_radius}};
    }
    if (s.inline_network) net["inline"] = parts_json(*s.inline_network);
    j["network"] = net;
    j["demand"] = s.demand;
    j["P_rv"] = s.p_rv;
    j["episode_steps"] = s.episode_steps;
    j["seed"] = s.seed;
    if (s.tl_program) j["tl_program"] = program_json(*s.tl_program);
    return j;
}

ScenarioSpec scenario_from_json(const ordered_json& doc) {
    const Reader r(doc, "");
    ScenarioSpec s;
    s.format_version = r.integer("format_version");
    if (s.format_version != kScenarioFormatVersion) {
        throw VersionError("scenario format_version " + std::to_string(s.format_version) +
                           " is not supported (expected " + std::to_string(kScenarioFormatVersion) + ")");
    }
    r.only({"format_version", "metadata", "network", "demand", "P_rv", "episode_steps", "seed", "tl_program"});
    const Reader meta = r.object("metadata");
    meta.only({"name", "country", "topology"});
    s.metadata.name = meta.string("name");
    s.metadata.country = meta.string("country", "synthetic");
    s.metadata.topology = enum_from(meta.string("topology"),
                                    std::map<std::string, Topology>{{"intersection", Topology::Intersection},
                                                                    {"roundabout", Topology::Roundabout}},
                                    meta.at("topology"));
    const Reader net = r.object("network");
    net.only({"generator", "osm", "inline"});
    if (net.has("generator")) s.generator = recipe_from(net.object("generator"));
    if (net.has("osm")) {
        const Reader o = net.object("osm");
        o.only({"path", "junction_node", "clip_radius"});
        s.osm = OsmSource{o.string("path"), o.signed_integer("junction_node"), o.number("clip_radius", kDefaultClipRadius)};
    }
    if (net.has("inline")) s.inline_network = parts_from(net.object("inline"));
    s.demand = r.number("demand");
    s.p_rv = r.number("P_rv");
    s.episode_steps = r.integer("episode_steps");
    s.seed = r.unsigned_integer("seed");
    if (r.has("tl_program")) s.tl_program = program_from(r.object("tl_program"));
    s.validate();
    return s;
}

std::string dump_scenario(const ScenarioSpec& spec) { return to_json(spec).dump(2) + "\n"; }

ScenarioSpec parse_scenario(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Byte offset to line number.
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw ParseError(line, e.what());
    }
    return scenario_from_json(j);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void save_scenario(const std::filesystem::path& path, const ScenarioSpec& spec) {
    spec.validate();
    write_file(path, dump_scenario(spec));
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    try {
        return parse_scenario(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.what());
    }
}

NetworkGraph build_network(const ScenarioSpec& spec, const std::filesystem::path& base_dir) {
    if (spec.generator) return spec.generator->build();
    if (spec.osm) {
        return convert_osm(load_osm(base_dir / spec.osm->path), spec.osm->junction_node, spec.osm->clip_radius);
    }
    if (spec.inline_network) return NetworkGraph::assemble(*spec.inline_network, false);
    throw ValidationError("network", "exactly one of generator, osm, inline is required");
}

Manifest Manifest::only(const std::string& split) const {
    Manifest m;
    for (const auto& e : entries) {
        if (e.split == split) m.entries.push_back(e);
    }
    return m;
}

std::string dump_manifest(const Manifest& m) {
    ordered_json j;
    j["format_version"] = kScenarioFormatVersion;
    j["entries"] = ordered_json::array();
    for (const auto& e : m.entries) j["entries"].push_back({{"path", e.path}, {"split", e.split}});
    return j.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) { write_file(path, dump_manifest(m)); }

Manifest load_manifest(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
    const Reader r(j, "");
    r.only({"format_version", "entries"});
    if (r.integer("format_version") != kScenarioFormatVersion) {
        throw VersionError(path.string() + ": unsupported manifest format_version");
    }
    Manifest m;
    const auto& entries = r.array("entries");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Reader e(entries[i], indexed("entries", i));
        e.only({"path", "split"});
        ManifestEntry entry{e.string("path"), e.string("split")};
        if (entry.split != "train" && entry.split != "test") throw ValidationError(e.at("split"), "expected train or test");
        if (!seen.insert(entry.path).second) throw ValidationError(e.at("path"), "listed twice");
        m.entries.push_back(std::move(entry));
    }
    return m;
}

std::vector<LoadedScenario> load_manifest_scenarios(const std::filesystem::path& manifest_path) {
    const Manifest m = load_manifest(manifest_path);
    std::vector<LoadedScenario> out;
    for (const auto& e : m.entries) {
        const auto path = manifest_path.parent_path() / e.path;
        out.push_back({path, e.split, load_scenario(path)});
    }
    return out;
}

std::uint64_t scenario_seed(std::uint64_t master_seed, const std::string& name) {
    return mix64(master_seed ^ fnv1a64(name));
}

GeneratedSet generate_manifest(const std::vector<NamedRecipe>& recipes, const GenerateOptions& opts) {
    if (recipes.empty()) throw ValidationError("recipes", "at least one recipe is required");
    if (opts.demands.empty()) throw ValidationError("demands", "at least one demand is required");
    for (std::size_t i = 0; i < opts.demands.size(); ++i) {
        if (!(opts.demands[i] >= kMinDemand && opts.demands[i] <= kMaxDemand)) {
            throw ValidationError(indexed("demands", i), "must lie in [400, 5000] veh/hr");
        }
    }
    if (!(opts.split_ratio >= 0.0 && opts.split_ratio <= 1.0)) throw ValidationError("split_ratio", "must lie in [0, 1]");

    std::vector<ScenarioSpec> all;
    std::set<std::string> names;
    for (const auto& r : recipes) {
        std::optional<TlProgram> program;
        if (opts.with_tl_program) program = default_tl_program(r.recipe.build());
        for (double d : opts.demands) {
            ScenarioSpec s;
            std::ostringstream name;
            name << r.name << "_d" << d;
            s.metadata = {name.str(), r.country, r.recipe.topology};
            if (!names.insert(s.metadata.name).second) {
                throw ValidationError("recipes", "duplicate scenario name " + s.metadata.name);
            }
            s.generator = r.recipe;
            s.demand = d;
            s.p_rv = opts.p_rv;
            s.episode_steps = opts.episode_steps;
            s.seed = scenario_seed(opts.master_seed, s.metadata.name);
            s.tl_program = program;
            all.push_back(std::move(s));
        }
    }
    // Hash order decides the split; ties (never expected) fall back to the name.
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    for (std::size_t i = 0; i < all.size(); ++i) {
        order.emplace_back(mix64(scenario_seed(opts.master_seed, all[i].metadata.name) ^ 0x5eed), i);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : all[a.second].metadata.name < all[b.second].metadata.name;
    });
    const auto n_train = static_cast<std::size_t>(std::llround(opts.split_ratio * static_cast<double>(all.size())));
    GeneratedSet out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        (k < n_train ? out.train : out.test).push_back(all[order[k].second]);
    }
    auto by_name = [](const ScenarioSpec& a, const ScenarioSpec& b) { return a.metadata.name < b.metadata.name; };
    std::sort(out.train.begin(), out.train.end(), by_name);
    std::sort(out.test.begin(), out.test.end(), by_name);
    return out;
}

std::vector<NamedRecipe> default_recipes() {
    std::vector<NamedRecipe> out;
    for (int legs : {3, 4, 5}) {
        for (int lanes : {1, 2}) {
            GeneratorRecipe r;
            r.topology = Topology::Intersection;
            r.legs = legs;
            r.in_lanes = lanes;
            r.out_lanes = lanes;
            out.push_back({"int" + std::to_string(legs) + "_" + std::to_string(lanes) + "x" + std::to_string(lanes), r});
        }
    }
    for (int legs : {3, 4, 5}) {
        for (int ring : {1, 2}) {
            GeneratorRecipe r;
            r.topology = Topology::Roundabout;
            r.legs = legs;
            r.ring_lanes = ring;
            r.radius = ring == 1 ? 15.0 : 20.0;
            out.push_back({"rb" + std::to_string(legs) + "_ring" + std::to_string(ring), r});
        }
    }
    return out;
}

Manifest write_corpus(const std::filesystem::path& dir, const GeneratedSet& set) {
    Manifest all;
    auto emit = [&](const std::vector<ScenarioSpec>& specs, const std::string& split) {
        for (const auto& s : specs) {
            const std::string file = s.metadata.name + ".scenario.json";
            save_scenario(dir / file, s);
            all.entries.push_back({file, split});
        }
    };
    emit(set.train, "train");
    emit(set.test, "test");
    std::sort(all.entries.begin(), all.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    save_manifest(dir / "manifest.json", all);
    save_manifest(dir / "train.json", all.only("train"));
    save_manifest(dir / "test.json", all.only("test"));
    return all;
}

}  // namespace mixflow
