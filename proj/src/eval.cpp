#include "mixflow/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "mixflow/error.hpp"
#include "mixflow/mdp.hpp"
#include "mixflow/rng.hpp"

namespace mixflow {

namespace {

std::string num(double x) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Commas and line breaks would break the flat CSV layout.
std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T parse_field(const std::string& text, long line, const char* column) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(line, std::string("bad ") + column + " '" + text + "'");
    }
    return value;
}

Stat stat_of(const std::vector<double>& xs) {
    Stat s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

AggregateRow fold(const std::string& level, const std::string& key, const std::string& controller, double p_rv,
                  const std::vector<const MetricsReport*>& group) {
    std::vector<double> tp, w, wt, col;
    for (const auto* r : group) {
        tp.push_back(r->throughput_rate);
        w.push_back(r->avg_wait);
        wt.push_back(r->avg_wait_time_mean);
        col.push_back(static_cast<double>(r->collisions));
    }
    AggregateRow row;
    row.level = level;
    row.key = key;
    row.controller = controller;
    row.p_rv = p_rv;
    row.n = static_cast<int>(group.size());
    row.throughput = stat_of(tp);
    row.avg_wait = stat_of(w);
    row.avg_wait_time_mean = stat_of(wt);
    row.collisions = stat_of(col);
    return row;
}

}  // namespace

const char* to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::NoTL: return "NoTL";
        case ControllerKind::TL: return "TL";
        case ControllerKind::Policy: return "Policy";
    }
    return "?";
}

ControllerKind controller_from_string(const std::string& text) {
    const std::string t = lower(text);
    if (t == "notl") return ControllerKind::NoTL;
    if (t == "tl") return ControllerKind::TL;
    if (t == "policy") return ControllerKind::Policy;
    throw ValidationError("controller", "expected notl, tl or policy, got '" + text + "'");
}

std::unique_ptr<Controller> make_controller(const ControllerChoice& choice, const ScenarioSpec& spec,
                                            const NetworkGraph& g) {
    switch (choice.kind) {
        case ControllerKind::NoTL:
            return std::make_unique<NoTlController>();
        case ControllerKind::TL: {
            if (!spec.tl_program) {
                throw ConfigError("scenario " + spec.metadata.name + " has no tl_program; the TL controller needs one");
            }
            spec.tl_program->validate(g);
            return std::make_unique<TlController>(*spec.tl_program);
        }
        case ControllerKind::Policy:
            if (!choice.policy) throw ConfigError("the Policy controller needs trained parameters");
            if (choice.policy->actor.input_size() != choice.obs.size()) {
                throw ConfigError("policy input size does not match the observation layout");
            }
            return std::make_unique<PolicyController>(choice.policy, choice.obs, choice.mode);
    }
    throw ConfigError("unknown controller");
}

SimConfig sim_config_for(const ScenarioSpec& spec) {
    SimConfig cfg;
    cfg.demand = spec.demand;
    cfg.p_rv = spec.p_rv;
    return cfg;
}

MetricsReport metrics_from(const SimState& state, int steps, double wait_time_sum) {
    MetricsReport r;
    r.steps = steps;
    r.throughput_rate = steps > 0 ? static_cast<double>(state.exited_total) / steps : 0.0;
    r.avg_wait = average_final_wait(state);
    r.avg_wait_time_mean = steps > 0 ? wait_time_sum / steps : 0.0;
    r.collisions = static_cast<long>(state.collisions_total);
    r.spawned = static_cast<long>(state.spawned_total);
    r.exited = static_cast<long>(state.exited_total);
    return r;
}

MetricsReport run_episode(const ScenarioSpec& spec, const NetworkGraph& g, const ControllerChoice& choice,
                          std::uint64_t seed, int steps, const EpisodeOptions& opts) {
    if (steps < 1) throw ValidationError("steps", "must be at least 1");
    const SimConfig cfg = sim_config_for(spec);
    cfg.validate();
    auto controller = make_controller(choice, spec, g);
    Simulation sim(std::make_shared<const NetworkGraph>(g), cfg, seed);
    if (opts.prepare) opts.prepare(sim);

    std::optional<TrajectoryWriter> writer;
    if (opts.trajectory) {
        writer.emplace(*opts.trajectory);
        writer->write(sim.state(), g);
    }
    double wait_sum = 0.0;
    for (int t = 0; t < steps; ++t) {
        const StepCommands cmds = controller->decide(sim.mutable_state(), g, cfg);
        sim.step(cmds);
        wait_sum += mean_live_wait(sim.state());
        if (writer) writer->write(sim.state(), g);
    }
    MetricsReport r = metrics_from(sim.state(), steps, wait_sum);
    r.scenario = spec.metadata.name;
    r.topology = spec.metadata.topology;
    r.controller = controller->name();
    r.p_rv = spec.p_rv;
    r.seed = seed;
    return r;
}

std::uint64_t episode_seed(std::uint64_t scenario_seed, std::uint64_t master_seed, int k) {
    return mix64(scenario_seed ^ mix64(master_seed + static_cast<std::uint64_t>(k)));
}

void SweepConfig::validate() const {
    if (controllers.empty()) throw ValidationError("controllers", "at least one controller is required");
    for (std::size_t i = 0; i < p_rv_grid.size(); ++i) {
        if (!(p_rv_grid[i] >= 0.0 && p_rv_grid[i] <= 1.0)) {
            throw ValidationError("P_rv[" + std::to_string(i) + "]", "must lie in [0, 1]");
        }
    }
    if (seeds < 1) throw ValidationError("seeds", "must be at least 1");
    if (steps < 1) throw ValidationError("steps", "must be at least 1");
    if (threads < 1) throw ValidationError("threads", "must be at least 1");
}

SweepResult sweep(const std::vector<LoadedScenario>& scenarios, const SweepConfig& cfg) {
    cfg.validate();
    if (scenarios.empty()) throw ValidationError("manifest", "no scenarios to evaluate");

    struct Job {
        std::size_t scenario;
        std::size_t controller;
        double p_rv;
        int k;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto grid = cfg.p_rv_grid.empty() ? std::vector<double>{scenarios[s].spec.p_rv} : cfg.p_rv_grid;
        for (std::size_t c = 0; c < cfg.controllers.size(); ++c) {
            for (double p : grid) {
                for (int k = 0; k < cfg.seeds; ++k) jobs.push_back({s, c, p, k});
            }
        }
    }

    // Graphs are built once and shared read-only by the workers.
    std::vector<std::shared_ptr<const NetworkGraph>> graphs(scenarios.size());
    std::vector<std::string> graph_errors(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        try {
            graphs[s] = std::make_shared<const NetworkGraph>(
                build_network(scenarios[s].spec, scenarios[s].path.parent_path()));
        } catch (const std::exception& e) {
            graph_errors[s] = e.what();
        }
    }

    if (!cfg.trajectory_dir.empty()) std::filesystem::create_directories(cfg.trajectory_dir);

    std::vector<MetricsReport> reports(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            const auto& loaded = scenarios[job.scenario];
            ScenarioSpec spec = loaded.spec;
            spec.p_rv = job.p_rv;
            const std::uint64_t seed = episode_seed(spec.seed, cfg.master_seed, job.k);
            MetricsReport r;
            try {
                if (!graphs[job.scenario]) throw Error("network", graph_errors[job.scenario]);
                EpisodeOptions opts;
                std::ofstream traj;
                if (!cfg.trajectory_dir.empty()) {
                    const auto file = cfg.trajectory_dir / ("row" + std::to_string(i + 1) + ".csv");
                    traj.open(file, std::ios::binary);
                    if (!traj) throw IoError("cannot write " + file.string());
                    opts.trajectory = &traj;
                }
                r = run_episode(spec, *graphs[job.scenario], cfg.controllers[job.controller], seed, cfg.steps, opts);
            } catch (const std::exception& e) {
                r = MetricsReport{};
                r.scenario = spec.metadata.name;
                r.topology = spec.metadata.topology;
                r.controller = to_string(cfg.controllers[job.controller].kind);
                r.p_rv = job.p_rv;
                r.seed = seed;
                r.steps = cfg.steps;
                r.ok = false;
                const auto* err = dynamic_cast<const Error*>(&e);
                r.message = (err ? err->kind() + ": " : std::string()) + e.what();
            }
            r.scenario_path = loaded.path.string();
            reports[i] = std::move(r);
        }
    };
    const int n = std::min<int>(cfg.threads, static_cast<int>(jobs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    SweepResult out;
    out.reports = std::move(reports);
    out.rows = aggregate(out.reports);
    out.warnings = failure_warnings(out.reports);
    return out;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricsReport>& reports) {
    using Key = std::tuple<std::string, std::string, double>;
    std::map<Key, std::vector<const MetricsReport*>> by_scenario;
    std::map<Key, std::vector<const MetricsReport*>> by_subset;
    for (const auto& r : reports) {
        if (!r.ok) continue;
        by_scenario[{r.scenario, r.controller, r.p_rv}].push_back(&r);
        by_subset[{"whole", r.controller, r.p_rv}].push_back(&r);
        by_subset[{to_string(r.topology), r.controller, r.p_rv}].push_back(&r);
    }
    std::vector<AggregateRow> rows;
    for (const auto& [k, group] : by_scenario) {
        rows.push_back(fold("scenario", std::get<0>(k), std::get<1>(k), std::get<2>(k), group));
    }
    for (const char* subset : {"whole", "intersection", "roundabout"}) {
        for (const auto& [k, group] : by_subset) {
            if (std::get<0>(k) == subset) rows.push_back(fold("subset", subset, std::get<1>(k), std::get<2>(k), group));
        }
    }
    return rows;
}

std::vector<std::string> failure_warnings(const std::vector<MetricsReport>& reports) {
    std::vector<std::string> out;
    for (const auto& r : reports) {
        if (!r.ok) {
            out.push_back("excluded " + r.scenario + " " + r.controller + " P_rv=" + num(r.p_rv) +
                          " seed=" + std::to_string(r.seed) + ": " + r.message);
        }
    }
    return out;
}

std::string format_raw_csv(const std::vector<MetricsReport>& reports) {
    std::ostringstream o;
    o << kRawHeader << '\n';
    for (const auto& r : reports) {
        o << sanitize(r.scenario) << ',' << sanitize(r.scenario_path) << ',' << to_string(r.topology) << ','
          << r.controller << ',' << num(r.p_rv) << ',' << r.seed << ',' << r.steps << ',' << num(r.throughput_rate)
          << ',' << num(r.throughput_rate * 1e3) << ',' << num(r.avg_wait) << ',' << num(r.avg_wait_time_mean) << ','
          << r.collisions << ',' << r.spawned << ',' << r.exited << ',' << (r.ok ? "ok" : "failed") << ','
          << sanitize(r.message) << '\n';
    }
    return o.str();
}

std::vector<MetricsReport> parse_raw_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kRawHeader) throw ParseError(1, "unexpected raw.csv header");
    std::vector<MetricsReport> out;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_row(line);
        if (f.size() != 16) throw ParseError(lineno, "expected 16 columns, got " + std::to_string(f.size()));
        MetricsReport r;
        r.scenario = f[0];
        r.scenario_path = f[1];
        try {
            r.topology = topology_from_string(f[2]);
        } catch (const Error&) {
            throw ParseError(lineno, "bad topology '" + f[2] + "'");
        }
        r.controller = f[3];
        r.p_rv = parse_field<double>(f[4], lineno, "P_rv");
        r.seed = parse_field<std::uint64_t>(f[5], lineno, "seed");
        r.steps = parse_field<int>(f[6], lineno, "steps");
        r.throughput_rate = parse_field<double>(f[7], lineno, "throughput_rate");
        r.avg_wait = parse_field<double>(f[9], lineno, "avg_wait");
        r.avg_wait_time_mean = parse_field<double>(f[10], lineno, "avg_wait_time_mean");
        r.collisions = parse_field<long>(f[11], lineno, "collisions");
        r.spawned = parse_field<long>(f[12], lineno, "spawned");
        r.exited = parse_field<long>(f[13], lineno, "exited");
        if (f[14] != "ok" && f[14] != "failed") throw ParseError(lineno, "bad status '" + f[14] + "'");
        r.ok = f[14] == "ok";
        r.message = f[15];
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_summary_csv(const std::vector<AggregateRow>& rows, const std::vector<std::string>& warnings) {
    std::ostringstream o;
    o << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        o << r.level << ',' << sanitize(r.key) << ',' << r.controller << ',' << num(r.p_rv) << ',' << r.n << ','
          << num(r.throughput.mean) << ',' << num(r.throughput.std) << ',' << num(r.throughput.mean * 1e3) << ','
          << num(r.avg_wait.mean) << ',' << num(r.avg_wait.std) << ',' << num(r.avg_wait_time_mean.mean) << ','
          << num(r.avg_wait_time_mean.std) << ',' << num(r.collisions.mean) << ',' << num(r.collisions.std) << '\n';
    }
    for (const auto& w : warnings) o << "warning," << sanitize(w) << ",,,,,,,,,,,,\n";
    return o.str();
}

std::string svg_plot(const std::vector<AggregateRow>& rows, const std::string& metric) {
    auto value = [&](const AggregateRow& r) {
        if (metric == "throughput") return r.throughput.mean;
        if (metric == "avg_wait") return r.avg_wait.mean;
        throw ValidationError("metric", "expected throughput or avg_wait");
    };
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    double ymax = 0.0;
    for (const auto& r : rows) {
        if (r.level != "subset" || r.key != "whole") continue;
        const double y = value(r);
        series[r.controller].emplace_back(r.p_rv, y);
        ymax = std::max(ymax, y);
    }
    if (ymax <= 0.0) ymax = 1.0;
    const double w = 480, h = 320, left = 60, right = 20, top = 20, bottom = 50;
    auto px = [&](double x) { return left + x * (w - left - right); };
    auto py = [&](double y) { return top + (1.0 - y / ymax) * (h - top - bottom); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double x = i / 5.0;
        o << "<text x=\"" << px(x) << "\" y=\"" << py(0) + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << x
          << "</text>\n";
        const double y = ymax * i / 5.0;
        o << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
          << num(std::round(y * 1000.0) / 1000.0) << "</text>\n";
    }
    o << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">P_rv</text>\n";
    o << "<text x=\"14\" y=\"" << top + 4 << "\" font-size=\"12\">" << metric << "</text>\n";
    int idx = 0;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end());
        const char* color = colors[idx % 4];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) o << px(x) << ',' << py(y) << ' ';
        o << "\"/>\n";
        for (const auto& [x, y] : pts) {
            o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        o << "<text x=\"" << w - right - 60 << "\" y=\"" << top + 14 * (idx + 1) << "\" font-size=\"11\" fill=\""
          << color << "\">" << name << "</text>\n";
        ++idx;
    }
    o << "</svg>\n";
    return o.str();
}

void write_sweep(const std::filesystem::path& dir, const SweepResult& result) {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& file, const std::string& text) {
        std::ofstream out(dir / file, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / file).string());
        out << text;
    };
    put("raw.csv", format_raw_csv(result.reports));
    put("summary.csv", format_summary_csv(result.rows, result.warnings));
    put("throughput.svg", svg_plot(result.rows, "throughput"));
    put("wait.svg", svg_plot(result.rows, "avg_wait"));
}

EnvFactory scenario_env_factory(const std::vector<LoadedScenario>& scenarios, const ObsConfig& obs,
                                const RewardWeights& weights, int episode_steps) {
    if (scenarios.empty()) throw ValidationError("scenarios", "no training scenarios");
    obs.validate();
    weights.validate();
    std::vector<std::shared_ptr<const NetworkGraph>> graphs;
    for (const auto& s : scenarios) {
        graphs.push_back(std::make_shared<const NetworkGraph>(build_network(s.spec, s.path.parent_path())));
    }
    return [scenarios, graphs, obs, weights, episode_steps](int episode, double p_rv,
                                                             std::uint64_t seed) -> std::unique_ptr<Environment> {
        const std::size_t i = static_cast<std::size_t>(episode) % scenarios.size();
        ScenarioSpec spec = scenarios[i].spec;
        spec.p_rv = p_rv;
        const int steps = episode_steps > 0 ? episode_steps : spec.episode_steps;
        return std::make_unique<TrafficEnv>(graphs[i], sim_config_for(spec), obs, weights, steps, seed);
    };
}

int thread_count(int fallback) {
    const char* env = std::getenv("MIXFLOW_THREADS");
    if (!env || !*env) return fallback;
    int n = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n < 1) {
        throw ValidationError("MIXFLOW_THREADS", "must be a positive integer, got '" + s + "'");
    }
    return n;
}

}  // namespace mixflow
