#include "mixflow/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "mixflow/error.hpp"
#include "mixflow/eval.hpp"
#include "mixflow/osm.hpp"
#include "mixflow/scenario.hpp"
#include "mixflow/train.hpp"

namespace mixflow {

namespace fs = std::filesystem;

namespace {

// Model hyperparameters plus training knobs.
struct Hyper {
    ObsConfig obs;
    RewardWeights reward;
    SacHyper sac;
    double per_alpha = 0.5;
    std::size_t buffer_capacity = 50000;
    std::size_t warmup = 5000;
    std::vector<double> p_rv;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = ".";
};

void add_hyper_options(CLI::App& app, Hyper& h) {
    const std::string group = "Hyperparameters";
    app.add_option("--alpha", h.reward.alpha, "Throughput reward weight")->group(group)->capture_default_str();
    app.add_option("--beta", h.reward.beta, "Collision reward weight")->group(group)->capture_default_str();
    app.add_option("--gamma", h.reward.gamma_w, "Waiting-time reward weight")->group(group)->capture_default_str();
    app.add_option("--W_l", h.reward.w_low, "Lower bound of the target wait band, s")->group(group)->capture_default_str();
    app.add_option("--W_h", h.reward.w_high, "Upper bound of the target wait band, s")->group(group)->capture_default_str();
    app.add_option("--C_tp", h.reward.throughput_cap, "Exits per step mapped to +1")->group(group)->capture_default_str();
    app.add_option("--C_col", h.reward.collision_cap, "Collisions per step mapped to -1")->group(group)->capture_default_str();
    app.add_option("--d_f", h.obs.d_f, "Front region length, m")->group(group)->capture_default_str();
    app.add_option("--d_b", h.obs.d_b, "Rear region length, m")->group(group)->capture_default_str();
    app.add_option("--d", h.obs.d, "Half width of the regions, m")->group(group)->capture_default_str();
    app.add_option("--N_f", h.obs.n_front, "Front neighbor slots")->group(group)->capture_default_str();
    app.add_option("--N_b", h.obs.n_rear, "Rear neighbor slots")->group(group)->capture_default_str();
    app.add_option("--per_alpha", h.per_alpha, "Prioritized replay exponent")->group(group)->capture_default_str();
    app.add_option("--buffer_capacity", h.buffer_capacity, "Replay capacity")->group(group)->capture_default_str();
    app.add_option("--hidden", h.sac.hidden, "Width of both hidden layers")->group(group)->capture_default_str();
    app.add_option("--discount", h.sac.gamma, "Discount factor")->group(group)->capture_default_str();
    app.add_option("--batch_size", h.sac.batch_size, "Minibatch size")->group(group)->capture_default_str();
    app.add_option("--lr", h.sac.lr, "Learning rate")->group(group)->capture_default_str();
    app.add_option("--tau", h.sac.tau, "Target smoothing coefficient")->group(group)->capture_default_str();
    app.add_option("--target_entropy", h.sac.target_entropy, "Entropy target")->group(group)->capture_default_str();
    app.add_option("--warmup", h.warmup, "Transitions before the first update")->group(group)->capture_default_str();
    app.add_option("--P_rv", h.p_rv,
                   "RV penetration: training set, evaluation grid, or the generated scenarios' value")
        ->group(group);
}

int threads_for(const Hyper& h) {
    if (h.threads < 1) throw ValidationError("threads", "must be at least 1");
    return thread_count(h.threads);
}

std::shared_ptr<const PolicyParams> load_policy(const std::string& path, const Hyper& h) {
    if (path.empty()) return nullptr;
    auto p = std::make_shared<const PolicyParams>(load_checkpoint(path));
    if (p->actor.input_size() != h.obs.size()) {
        throw ConfigError("checkpoint " + path + " expects " + std::to_string(p->actor.input_size()) +
                          " observation entries, the observation layout has " + std::to_string(h.obs.size()));
    }
    return p;
}

ControllerChoice choice_for(const std::string& name, const std::string& checkpoint, bool stochastic,
                            const Hyper& h) {
    ControllerChoice c;
    c.kind = controller_from_string(name);
    c.obs = h.obs;
    c.mode = stochastic ? PolicyMode::Stochastic : PolicyMode::Deterministic;
    if (c.kind == ControllerKind::Policy) {
        if (checkpoint.empty()) throw ValidationError("checkpoint", "the policy controller needs --checkpoint");
        c.policy = load_policy(checkpoint, h);
    }
    return c;
}

std::vector<NamedRecipe> load_recipes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ValidationError("recipes", "expected an array of {name, country, generator}");
    std::vector<NamedRecipe> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string at = "recipes[" + std::to_string(i) + "]";
        const auto& r = doc[i];
        if (!r.is_object() || !r.contains("name") || !r["name"].is_string() || !r.contains("generator")) {
            throw ValidationError(at, "expected {name, country, generator}");
        }
        const GeneratorRecipe recipe = recipe_from_json(r["generator"], at + ".generator");
        out.push_back({r["name"].get<std::string>(), recipe, r.value("country", std::string("synthetic"))});
    }
    return out;
}

struct GenerateArgs {
    std::string recipes;
    std::vector<double> demands{400.0, 1000.0, 3000.0, 5000.0};
    double split_ratio = 372.0 / 444.0;
    int episode_steps = 3000;
};

void cmd_generate(const GenerateArgs& a, const Hyper& h, std::ostream& out) {
    GenerateOptions opts;
    opts.demands = a.demands;
    opts.split_ratio = a.split_ratio;
    opts.master_seed = h.seed;
    opts.episode_steps = a.episode_steps;
    if (h.p_rv.size() > 1) throw ValidationError("P_rv", "generate takes a single value");
    opts.p_rv = h.p_rv.empty() ? 1.0 : h.p_rv.front();
    if (opts.episode_steps < 1) throw ValidationError("episode_steps", "must be at least 1");
    const auto recipes = a.recipes.empty() ? default_recipes() : load_recipes(a.recipes);
    const auto set = generate_manifest(recipes, opts);
    const Manifest m = write_corpus(h.out, set);
    out << "wrote " << m.entries.size() << " scenarios (" << set.train.size() << " train, " << set.test.size()
        << " test) to " << h.out << "\n";
}

struct ConvertArgs {
    std::string osm;
    OsmId junction = 0;
    double clip = kDefaultClipRadius;
    double demand = 1000.0;
    std::string name;
    std::string country = "unknown";
    int episode_steps = 3000;
};

void cmd_convert(const ConvertArgs& a, const Hyper& h, std::ostream& out) {
    if (h.p_rv.size() > 1) throw ValidationError("P_rv", "convert takes a single value");
    const NetworkGraph g = convert_osm(load_osm(a.osm), a.junction, a.clip);
    ScenarioSpec s;
    s.metadata.name = a.name.empty() ? fs::path(a.osm).stem().string() + "_" + std::to_string(a.junction) : a.name;
    s.metadata.country = a.country;
    s.metadata.topology = g.topology();
    s.inline_network = g.parts();
    s.demand = a.demand;
    s.p_rv = h.p_rv.empty() ? 1.0 : h.p_rv.front();
    s.episode_steps = a.episode_steps;
    s.seed = scenario_seed(h.seed, s.metadata.name);
    s.tl_program = default_tl_program(g);
    const fs::path path = fs::path(h.out) / (s.metadata.name + ".scenario.json");
    save_scenario(path, s);
    out << "wrote " << path.string() << " (" << g.origin_edges().size() << " approaches, " << g.connectors().size()
        << " connectors)\n";
}

struct TrainArgs {
    std::string scenarios;
    int episodes = 100;
    int steps = 1000;
    std::int64_t checkpoint_every = 0;
    double time_budget = 0.0;
};

void cmd_train(const TrainArgs& a, const Hyper& h, std::ostream& out) {
    if (a.steps < 1) throw ValidationError("steps", "must be at least 1");
    TrainConfig cfg;
    cfg.episodes = a.episodes;
    cfg.warmup = h.warmup;
    cfg.checkpoint_every = a.checkpoint_every;
    if (!h.p_rv.empty()) cfg.p_rv_set = h.p_rv;
    cfg.buffer_capacity = h.buffer_capacity;
    cfg.per_alpha = h.per_alpha;
    cfg.time_budget_s = a.time_budget;
    cfg.seed = h.seed;
    cfg.hyper = h.sac;
    cfg.out_dir = h.out;
    cfg.validate();
    const auto scenarios = load_manifest_scenarios(a.scenarios);
    const auto factory = scenario_env_factory(scenarios, h.obs, h.reward, a.steps);
    const auto result = train(factory, cfg, [&](const EpisodeLog& e) {
        out << "episode " << e.episode << " return " << e.ret << " throughput " << e.throughput << " wait "
            << e.avg_wait << " collisions " << e.collisions << "\n";
    });
    out << "trained " << result.log.size() << " episodes, " << result.updates << " updates; final checkpoint "
        << (fs::path(h.out) / "checkpoints" / "final.mxfw").string() << "\n";
}

struct EvalArgs {
    std::string manifest;
    std::vector<std::string> controllers{"notl"};
    std::string checkpoint;
    bool stochastic = false;
    int seeds = 5;
    int steps = kDefaultEvalSteps;
    std::string name = "sweep";
    bool trajectories = false;
};

void cmd_eval(const EvalArgs& a, const Hyper& h, std::ostream& out) {
    SweepConfig cfg;
    cfg.name = a.name;
    for (const auto& c : a.controllers) cfg.controllers.push_back(choice_for(c, a.checkpoint, a.stochastic, h));
    cfg.p_rv_grid = h.p_rv;
    cfg.seeds = a.seeds;
    cfg.steps = a.steps;
    cfg.master_seed = h.seed;
    cfg.threads = threads_for(h);
    const fs::path dir = fs::path(h.out) / "results" / a.name;
    if (a.trajectories) cfg.trajectory_dir = dir / "trajectories";
    cfg.validate();
    const auto scenarios = load_manifest_scenarios(fs::absolute(a.manifest));
    const SweepResult res = sweep(scenarios, cfg);
    write_sweep(dir, res);
    for (const auto& w : res.warnings) out << "warning: " << w << "\n";
    out << "wrote " << res.reports.size() << " episodes to " << (dir / "raw.csv").string() << " and "
        << (dir / "summary.csv").string() << "\n";
}

struct ReplayArgs {
    std::string report;
    int row = 0;
    std::string checkpoint;
    bool stochastic = false;
    std::string output;
};

void cmd_replay(const ReplayArgs& a, const Hyper& h, std::ostream& out) {
    std::ifstream in(a.report, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.report);
    std::ostringstream text;
    text << in.rdbuf();
    const auto reports = parse_raw_csv(text.str());
    if (a.row < 1 || a.row > static_cast<int>(reports.size())) {
        throw ValidationError("row", "must lie in [1, " + std::to_string(reports.size()) + "]");
    }
    const MetricsReport& want = reports[static_cast<std::size_t>(a.row - 1)];
    if (!want.ok) throw ConfigError("row " + std::to_string(a.row) + " records a failed episode: " + want.message);

    ScenarioSpec spec = load_scenario(want.scenario_path);
    spec.p_rv = want.p_rv;
    const NetworkGraph g = build_network(spec, fs::path(want.scenario_path).parent_path());
    const ControllerChoice choice = choice_for(want.controller, a.checkpoint, a.stochastic, h);

    const fs::path file = a.output.empty() ? fs::path(h.out) / ("replay_row" + std::to_string(a.row) + ".csv")
                                           : fs::path(a.output);
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream traj(file, std::ios::binary);
    if (!traj) throw IoError("cannot write " + file.string());
    EpisodeOptions opts;
    opts.trajectory = &traj;
    MetricsReport got = run_episode(spec, g, choice, want.seed, want.steps, opts);
    got.scenario_path = want.scenario_path;
    if (got != want) {
        throw Error("replay", "row " + std::to_string(a.row) + " did not reproduce (throughput " +
                                  std::to_string(got.throughput_rate) + " vs " + std::to_string(want.throughput_rate) +
                                  ")");
    }
    out << "replayed row " << a.row << " (" << want.scenario << ", " << want.controller << ", seed " << want.seed
        << "); metrics match; trajectory " << file.string() << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mixed-traffic junction control: scenarios, training, evaluation and replay", "mixflow"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file; keys are the long flag names, subcommand flags go in [<subcommand>]");
    Hyper h;
    add_hyper_options(app, h);
    app.add_option("--seed", h.seed, "Master seed for every stochastic choice")->capture_default_str();
    app.add_option("--threads", h.threads, "Concurrent episodes (MIXFLOW_THREADS overrides)")->capture_default_str();
    app.add_option("--out", h.out, "Output directory")->capture_default_str();

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Write a procedural scenario corpus with train/test manifests");
    gen->add_option("--recipes", ga.recipes, "JSON array of {name, country, generator}; default: built-in recipes");
    gen->add_option("--demands", ga.demands, "Demands in veh/hr")->capture_default_str();
    gen->add_option("--split_ratio", ga.split_ratio, "Fraction of scenarios assigned to train")->capture_default_str();
    gen->add_option("--episode_steps", ga.episode_steps, "Steps per scenario episode")->capture_default_str();

    ConvertArgs ca;
    auto* conv = app.add_subcommand("convert", "Convert an OSM extract around one junction into a scenario");
    conv->add_option("--osm", ca.osm, "OSM XML file")->required();
    conv->add_option("--junction", ca.junction, "OSM node id of the junction")->required();
    conv->add_option("--clip", ca.clip, "Clip radius, m")->capture_default_str();
    conv->add_option("--demand", ca.demand, "Demand, veh/hr")->capture_default_str();
    conv->add_option("--name", ca.name, "Scenario name (default <file>_<junction>)");
    conv->add_option("--country", ca.country, "Country tag")->capture_default_str();
    conv->add_option("--episode_steps", ca.episode_steps, "Steps per episode")->capture_default_str();

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train the shared policy on a scenario manifest");
    tr->add_option("--scenarios", ta.scenarios, "Manifest of training scenarios")->required();
    tr->add_option("--episodes", ta.episodes, "Episodes")->capture_default_str();
    tr->add_option("--steps", ta.steps, "Steps per training episode")->capture_default_str();
    tr->add_option("--checkpoint_every", ta.checkpoint_every, "Updates between checkpoints (0: final only)")
        ->capture_default_str();
    tr->add_option("--time_budget", ta.time_budget, "Wall-clock budget in seconds (0: none)")->capture_default_str();

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Evaluate controllers over a manifest");
    ev->add_option("--manifest", ea.manifest, "Scenario manifest")->required();
    ev->add_option("--controller", ea.controllers, "notl, tl or policy (repeatable)")->capture_default_str();
    ev->add_option("--checkpoint", ea.checkpoint, "Policy checkpoint");
    ev->add_flag("--stochastic", ea.stochastic, "Sample policy actions instead of using the mean");
    ev->add_option("--seeds", ea.seeds, "Repetitions per configuration")->capture_default_str();
    ev->add_option("--steps", ea.steps, "Steps per episode")->capture_default_str();
    ev->add_option("--name", ea.name, "Sweep name; results go to <out>/results/<name>")->capture_default_str();
    ev->add_flag("--trajectories", ea.trajectories, "Also write one trajectory CSV per episode");

    ReplayArgs ra;
    auto* rp = app.add_subcommand("replay", "Re-run one episode of a raw.csv report and write its trajectory");
    rp->add_option("--report", ra.report, "raw.csv from an eval run")->required();
    rp->add_option("--row", ra.row, "1-based data row")->required();
    rp->add_option("--checkpoint", ra.checkpoint, "Policy checkpoint for Policy rows");
    rp->add_flag("--stochastic", ra.stochastic, "Policy rows were evaluated stochastically");
    rp->add_option("--output", ra.output, "Trajectory CSV (default <out>/replay_row<N>.csv)");

    for (auto* sub : {gen, conv, tr, ev, rp}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        h.obs.validate();
        h.reward.validate();
        if (*gen) cmd_generate(ga, h, out);
        if (*conv) cmd_convert(ca, h, out);
        if (*tr) cmd_train(ta, h, out);
        if (*ev) cmd_eval(ea, h, out);
        if (*rp) cmd_replay(ra, h, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mixflow
