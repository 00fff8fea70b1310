#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixflow/controllers.hpp"
#include "mixflow/network.hpp"
#include "mixflow/osm.hpp"

namespace mixflow {

inline constexpr int kScenarioFormatVersion = 1;
inline constexpr double kMinDemand = 400.0;
inline constexpr double kMaxDemand = 5000.0;

/// Parameters for the procedural builders.
struct GeneratorRecipe {
    Topology topology = Topology::Intersection;
    int legs = 4;
    int in_lanes = 1;
    int out_lanes = 1;
    int ring_lanes = 1;       // roundabouts only
    double radius = 15.0;     // roundabouts only
    double leg_length = 200.0;
    double speed_limit = kDefaultSpeedLimit;

    NetworkGraph build() const;
    bool operator==(const GeneratorRecipe&) const = default;
};

struct OsmSource {
    std::string path;  // relative to the scenario file
    OsmId junction_node = 0;
    double clip_radius = kDefaultClipRadius;

    bool operator==(const OsmSource&) const = default;
};

struct ScenarioMetadata {
    std::string name;
    std::string country = "synthetic";
    Topology topology = Topology::Intersection;

    bool operator==(const ScenarioMetadata&) const = default;
};

struct ScenarioSpec {
    int format_version = kScenarioFormatVersion;
    ScenarioMetadata metadata;
    std::optional<GeneratorRecipe> generator;
    std::optional<OsmSource> osm;
    std::optional<GraphParts> inline_network;
    double demand = 1000.0;  // veh/hr
    double p_rv = 1.0;
    int episode_steps = 3000;
    std::uint64_t seed = 0;
    std::optional<TlProgram> tl_program;

    /// Throws ValidationError naming the field.
    void validate() const;
    bool operator==(const ScenarioSpec&) const = default;
};

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const ScenarioSpec& spec);
/// Throws VersionError for unknown versions and ValidationError with a field
/// path for schema violations.
ScenarioSpec scenario_from_json(const ordered_json& doc);

/// Generator block alone; errors carry `path` as the field prefix.
GeneratorRecipe recipe_from_json(const ordered_json& doc, const std::string& path);

std::string dump_scenario(const ScenarioSpec& spec);
ScenarioSpec parse_scenario(const std::string& text);
void save_scenario(const std::filesystem::path& path, const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// Network of a scenario; OSM paths resolve against `base_dir`.
NetworkGraph build_network(const ScenarioSpec& spec, const std::filesystem::path& base_dir = {});

struct ManifestEntry {
    std::string path;
    std::string split;  // train | test

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    Manifest only(const std::string& split) const;
    bool operator==(const Manifest&) const = default;
};

std::string dump_manifest(const Manifest& m);
void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

struct LoadedScenario {
    std::filesystem::path path;
    std::string split;
    ScenarioSpec spec;
};

/// Loads every scenario listed in a manifest (paths relative to it).
std::vector<LoadedScenario> load_manifest_scenarios(const std::filesystem::path& manifest_path);

struct NamedRecipe {
    std::string name;
    GeneratorRecipe recipe;
    std::string country = "synthetic";
};

struct GenerateOptions {
    std::vector<double> demands{400.0, 1000.0, 3000.0, 5000.0};
    double split_ratio = 372.0 / 444.0;  // fraction assigned to train
    std::uint64_t master_seed = 0;
    int episode_steps = 3000;
    double p_rv = 1.0;
    bool with_tl_program = true;
};

struct GeneratedSet {
    std::vector<ScenarioSpec> train;
    std::vector<ScenarioSpec> test;
};

/// Cross product recipes x demands with per-name seeds, split by hash order.
GeneratedSet generate_manifest(const std::vector<NamedRecipe>& recipes, const GenerateOptions& opts);

/// 3/4/5-leg intersections and roundabouts, one- and two-lane variants.
std::vector<NamedRecipe> default_recipes();

/// Writes <name>.scenario.json for each spec plus manifest.json, train.json and test.json.
Manifest write_corpus(const std::filesystem::path& dir, const GeneratedSet& set);

/// Seed derived from the master seed and the scenario name.
std::uint64_t scenario_seed(std::uint64_t master_seed, const std::string& name);

}  // namespace mixflow
