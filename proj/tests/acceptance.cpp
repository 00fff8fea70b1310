// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mixflow/eval.hpp"
#include "mixflow/osm.hpp"
#include "mixflow/scenario.hpp"
#include "mixflow/train.hpp"
#include "sac_reference.hpp"
#include "support.hpp"

using namespace mixflow;
using namespace mixflow::testing;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kIdmTolerance = 1e-9;     // m
constexpr double kIdmRuntime = 1.0;        // s
constexpr int kObsStates = 10000;
constexpr double kObsRuntime = 10.0;       // s
constexpr int kRewardTrials = 20000;
constexpr double kGradTolerance = 1e-4;
constexpr int kGradProbes = 120;           // per network group
constexpr double kGradRuntime = 60.0;      // s
constexpr int kToyEpisodes = 200;
constexpr std::size_t kToyWarmup = 500;
constexpr double kToyImprovement = 0.5;
constexpr std::int64_t kToyMaxUpdates = 20000;
constexpr double kToyRuntime = 15.0 * 60.0;  // s, all three seeds
constexpr int kPolicyEpisodes = 30;        // training episodes on the trend scenario
constexpr int kPolicyEpisodeSteps = 1000;
constexpr double kPolicyBudget = 2.0 * 3600.0;  // s
constexpr int kEvalSeeds = 5;
constexpr int kEvalSteps = 3000;

const fs::path kOut = "acceptance_out";

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// 1 -------------------------------------------------------------------------

Outcome idm_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = build_intersection(IntersectionParams{4, 1, 1, 1000.0});
    SimState s = make_initial_state(1);
    const double x0[5] = {185.0, 161.0, 142.0, 120.0, 100.0};
    const double v0[5] = {8.0, 12.0, 9.0, 11.0, 10.0};
    const Route route = shortest_route(g, edge_named(g, "in0"), edge_named(g, "out2"));
    for (int i = 0; i < 5; ++i) {
        VehicleState v;
        v.id = i;
        v.route = route;
        v.lane = g.edge(route.edges[0]).lanes[0];
        v.offset = x0[i];
        v.speed = v0[i];
        s.vehicles.emplace(i, v);
        ++s.spawned_total;
    }
    s.next_vehicle_id = 5;
    std::map<LaneId, double> start;
    {
        double acc = 0.0;
        LaneId lane = g.edge(route.edges[0]).lanes[0];
        std::size_t pos = 0;
        for (;;) {
            start[lane] = acc;
            acc += g.lane(lane).length();
            const NextLane n = next_lane(g, route, lane, pos);
            if (n.status != NextLaneStatus::Ok) break;
            lane = n.lane;
            pos = n.route_pos;
        }
    }
    // Scalar platoon: vehicle i follows vehicle i - 1.
    std::vector<double> x(x0, x0 + 5), v(v0, v0 + 5);
    const double a = 2.6, b = 4.5, T = 1.0, s0 = 2.5, vmax = 13.89, len = 5.0;
    double err = 0.0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> acc(5);
        for (int i = 0; i < 5; ++i) {
            double inter = 0.0;
            if (i > 0) {
                const double gap = x[i - 1] - len - x[i];
                const double star = s0 + std::max(0.0, v[i] * T + v[i] * (v[i] - v[i - 1]) / (2.0 * std::sqrt(a * b)));
                inter = (star / gap) * (star / gap);
            }
            acc[i] = std::clamp(a * (1.0 - std::pow(v[i] / vmax, 4.0) - inter), -10.0, 10.0);
        }
        for (int i = 0; i < 5; ++i) {
            v[i] = std::clamp(v[i] + acc[i], 0.0, vmax);
            x[i] += v[i];
        }
        step(s, {}, g, SimConfig{});
        if (s.vehicles.size() != 5) return {false, "a platoon vehicle left the simulation at step " + std::to_string(t)};
        for (int i = 0; i < 5; ++i) {
            const auto& veh = s.vehicles.at(i);
            err = std::max(err, std::abs(start.at(veh.lane) + veh.offset - x[static_cast<std::size_t>(i)]));
        }
    }
    const double rt = seconds_since(t0);
    return {err <= kIdmTolerance && rt < kIdmRuntime,
            "max position error " + fmt(err) + " m (tol " + fmt(kIdmTolerance) + "), " + fmt(rt) + " s"};
}

// 2 -------------------------------------------------------------------------

Outcome observation_contract() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2);
    const NetworkGraph graphs[] = {build_intersection(IntersectionParams{4, 2, 2, 120.0}),
                                   build_roundabout(RoundaboutParams{4, 1, 15.0, 120.0}),
                                   build_intersection(IntersectionParams{3, 1, 1, 80.0}),
                                   build_roundabout(RoundaboutParams{5, 2, 20.0, 80.0})};
    const ObsConfig cfg;
    long observations = 0;
    for (int trial = 0; trial < kObsStates; ++trial) {
        const NetworkGraph& g = graphs[trial % 4];
        const SimState s = random_state(g, 2 + trial % 40, rng);
        for (const auto& [id, v] : s.vehicles) {
            const Observation o = observe(s, id, g, cfg);
            ++observations;
            if (o.size() != 60) return {false, "observation length " + std::to_string(o.size())};
            for (double x : o) {
                if (!(x >= -1.0 && x <= 1.0)) return {false, "entry " + fmt(x) + " outside [-1, 1]"};
            }
            const ObservedSet got = observed_neighbors(s, id, g, cfg);
            const ObservedSet want = brute_force_neighbors(s, id, g, cfg);
            if (got.front != want.front || got.rear != want.rear) {
                return {false, "neighbor set differs from brute force in state " + std::to_string(trial)};
            }
        }
    }
    const double rt = seconds_since(t0);
    return {rt < kObsRuntime, std::to_string(kObsStates) + " states, " + std::to_string(observations) +
                                  " observations match brute force, " + fmt(rt) + " s"};
}

// 3 -------------------------------------------------------------------------

Outcome reward_contract() {
    const RewardWeights w;
    SimState s = make_initial_state(1);
    VehicleState v;
    v.wait = 25.0;
    s.vehicles.emplace(0, v);
    const RewardBreakdown base = reward(StepEvents{}, s, w);
    const bool case_a = base.throughput == 0.0 && base.collision == 1.0 && base.wait == 1.0 && base.total == 7.0;
    s.vehicles.at(0).wait = 50.0;
    const bool case_b = reward(StepEvents{}, s, w).wait == -1.0;
    StepEvents three;
    three.collision_count_this_step = 3;
    const bool case_c = std::abs(reward(three, s, w).collision - (-0.3)) <= 1e-15;

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> count(0, 60);
    std::uniform_real_distribution<double> wait(0.0, 400.0);
    for (int trial = 0; trial < kRewardTrials; ++trial) {
        SimState st = make_initial_state(1);
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            VehicleState x;
            x.id = i;
            x.wait = wait(rng);
            st.vehicles.emplace(i, x);
        }
        StepEvents ev;
        ev.exited_this_step = count(rng);
        ev.collision_count_this_step = count(rng) / 3;
        const RewardBreakdown r = reward(ev, st, w);
        for (double c : {r.throughput, r.collision, r.wait}) {
            if (!(c >= -1.0 && c <= 1.0)) return {false, "component " + fmt(c) + " outside [-1, 1]"};
        }
    }
    return {case_a && case_b && case_c,
            "hand cases (total 7, R_wait -1, R_col -0.3): " + std::string(case_a && case_b && case_c ? "exact" : "MISMATCH") +
                "; " + std::to_string(kRewardTrials) + " random events in range"};
}

// 4 -------------------------------------------------------------------------

Outcome gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream rng(4, "acceptance-grad");
    PolicyParams p = PolicyParams::create(60, 256, 8, std::log(0.2));
    p.q1_target.init_uniform(rng);
    p.q2_target.init_uniform(rng);
    const Batch b = random_batch(16, 60, rng);
    const Vector eps = Vector::NullaryExpr(16, [&] { return 2.0 * rng.uniform() - 1.0; });
    const double alpha = std::exp(p.log_alpha);
    const double h = 1e-5;  // ~cbrt(machine eps); 1e-6 leaves roundoff near 5e-4 on gradients of 1e-7
    double worst = 0.0;
    int probes = 0;

    Mlp g1 = p.q1, g2 = p.q2, ga = p.actor;
    g1.set_zero();
    g2.set_zero();
    ga.set_zero();
    critic_losses(p, b, eps, 0.99, &g1, &g2);
    actor_loss(p, b.obs, eps, alpha, &ga);
    auto probe = [&](Mlp& net, const Mlp& grad, const std::function<double()>& loss, int n) {
        for (int k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(rng() % net.parameter_count());
            const double saved = net.parameter(i);
            net.parameter(i) = saved + h;
            const double up = loss();
            net.parameter(i) = saved - h;
            const double down = loss();
            net.parameter(i) = saved;
            worst = std::max(worst, relative_error(grad.parameter(i), (up - down) / (2.0 * h)));
            ++probes;
        }
    };
    probe(p.q1, g1, [&] { return reference_critic_loss(p, b, eps, 0.99, 1); }, kGradProbes / 2);
    probe(p.q2, g2, [&] { return reference_critic_loss(p, b, eps, 0.99, 2); }, kGradProbes / 2);
    probe(p.actor, ga, [&] { return reference_actor_loss(p, b.obs, eps, alpha); }, kGradProbes);
    const double rt = seconds_since(t0);
    return {worst <= kGradTolerance && probes >= 100 && rt < kGradRuntime,
            std::to_string(probes) + " probes, worst relative error " + fmt(worst) + " (tol " + fmt(kGradTolerance) +
                "), " + fmt(rt) + " s"};
}

// 5 -------------------------------------------------------------------------

Outcome toy_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    int passed = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        TrainConfig cfg;
        cfg.episodes = kToyEpisodes;
        cfg.warmup = kToyWarmup;
        cfg.p_rv_set = {1.0};
        cfg.seed = seed;
        cfg.beta_horizon = kToyMaxUpdates;
        const TrainResult r = train([](int, double, std::uint64_t s) { return std::make_unique<SpeedTrackingEnv>(s); },
                                    cfg);
        double first = 0.0, last = 0.0;
        for (int i = 0; i < 10; ++i) {
            first += r.log[static_cast<std::size_t>(i)].ret / 10.0;
            last += r.log[r.log.size() - 10 + static_cast<std::size_t>(i)].ret / 10.0;
        }
        const double improvement = (last - first) / std::abs(first);
        const bool ok = improvement >= kToyImprovement && r.updates <= kToyMaxUpdates;
        passed += ok;
        detail += "seed " + std::to_string(seed) + ": " + fmt(first) + " -> " + fmt(last) + " (" +
                  fmt(100.0 * improvement) + "%, " + std::to_string(r.updates) + " updates); ";
    }
    const double rt = seconds_since(t0);
    return {passed == 3 && rt <= kToyRuntime,
            detail + std::to_string(passed) + "/3 seeds improve >= 50%, " + fmt(rt) + " s"};
}

// 6, 7, 8, 9 share the trend scenario --------------------------------------

LoadedScenario trend_scenario(double demand) {
    ScenarioSpec s;
    s.metadata = {"int4_2x2_d" + std::to_string(static_cast<int>(demand)), "synthetic", Topology::Intersection};
    GeneratorRecipe r;
    r.legs = 4;
    r.in_lanes = 2;
    r.out_lanes = 2;
    s.generator = r;
    s.demand = demand;
    s.p_rv = 1.0;
    s.episode_steps = kEvalSteps;
    s.seed = scenario_seed(2024, s.metadata.name);
    s.tl_program = default_tl_program(r.build());
    return {kOut / (s.metadata.name + ".scenario.json"), "test", s};
}

struct TrendData {
    std::shared_ptr<const PolicyParams> policy;
    double train_seconds = 0.0;
    std::int64_t updates = 0;
    SweepResult policy_sweep;
    SweepResult notl_sweep;
};

const AggregateRow* row_for(const SweepResult& r, const std::string& controller, double p_rv) {
    for (const auto& row : r.rows) {
        if (row.level == "scenario" && row.controller == controller && row.p_rv == p_rv) return &row;
    }
    return nullptr;
}

TrendData run_trend() {
    TrendData d;
    const LoadedScenario sc = trend_scenario(1000.0);
    save_scenario(sc.path, sc.spec);
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.episodes = kPolicyEpisodes;
    cfg.seed = 6;
    cfg.time_budget_s = kPolicyBudget;
    cfg.out_dir = kOut / "train";
    const TrainResult tr =
        train(scenario_env_factory({sc}, ObsConfig{}, RewardWeights{}, kPolicyEpisodeSteps), cfg,
              [](const EpisodeLog& e) {
                  std::printf("  training episode %d: return %.1f, throughput %.3f, collisions %ld\n", e.episode,
                              e.ret, e.throughput, e.collisions);
                  std::fflush(stdout);
              });
    d.train_seconds = seconds_since(t0);
    d.updates = tr.updates;
    d.policy = std::make_shared<const PolicyParams>(tr.params);

    SweepConfig pol;
    pol.name = "policy";
    pol.controllers = {ControllerChoice{ControllerKind::Policy, d.policy, PolicyMode::Deterministic, ObsConfig{}}};
    pol.p_rv_grid = {0.4, 0.7, 1.0};
    pol.seeds = kEvalSeeds;
    pol.steps = kEvalSteps;
    pol.threads = thread_count(1);
    d.policy_sweep = sweep({sc}, pol);
    write_sweep(kOut / "results" / "policy", d.policy_sweep);

    SweepConfig base = pol;
    base.name = "notl";
    base.controllers = {ControllerChoice{ControllerKind::NoTL}};
    base.p_rv_grid = {1.0};
    d.notl_sweep = sweep({sc}, base);
    write_sweep(kOut / "results" / "notl", d.notl_sweep);
    return d;
}

Outcome trend(const TrendData& d) {
    const AggregateRow* p = row_for(d.policy_sweep, "Policy", 1.0);
    const AggregateRow* n = row_for(d.notl_sweep, "NoTL", 1.0);
    if (!p || !n) return {false, "missing evaluation rows"};
    const bool tp = p->throughput.mean > n->throughput.mean;
    const bool wait = p->avg_wait.mean < n->avg_wait.mean;
    return {tp && wait && d.train_seconds <= kPolicyBudget,
            "throughput policy " + fmt(p->throughput.mean) + " vs NoTL " + fmt(n->throughput.mean) +
                (tp ? " (higher)" : " (NOT higher)") + "; avg_wait policy " + fmt(p->avg_wait.mean) + " s vs NoTL " +
                fmt(n->avg_wait.mean) + " s" + (wait ? " (lower)" : " (NOT lower)") + "; collisions policy " +
                fmt(p->collisions.mean) + " vs NoTL " + fmt(n->collisions.mean) + "; trained " +
                std::to_string(kPolicyEpisodes) + " episodes, " + std::to_string(d.updates) + " updates in " +
                fmt(d.train_seconds) + " s"};
}

// Spearman rank correlation; ties get average ranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& x) {
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double less = 0, equal = 0;
            for (double y : x) {
                less += y < x[i];
                equal += y == x[i];
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i] / n;
        mb += rb[i] / n;
    }
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return va > 0 && vb > 0 ? cov / std::sqrt(va * vb) : 0.0;
}

Outcome penetration(const TrendData& d) {
    std::vector<double> p{0.4, 0.7, 1.0}, tp;
    std::string detail;
    for (double x : p) {
        const AggregateRow* r = row_for(d.policy_sweep, "Policy", x);
        if (!r) return {false, "missing P_rv " + fmt(x)};
        tp.push_back(r->throughput.mean);
        detail += "P_rv " + fmt(x) + ": " + fmt(r->throughput.mean) + "; ";
    }
    const double rho = spearman(p, tp);
    return {rho > 0.0, detail + "Spearman " + fmt(rho)};
}

Outcome tl_safety() {
    const LoadedScenario sc = trend_scenario(400.0);
    SweepConfig cfg;
    cfg.controllers = {ControllerChoice{ControllerKind::TL}};
    cfg.seeds = kEvalSeeds;
    cfg.steps = kEvalSteps;
    cfg.threads = thread_count(1);
    const SweepResult r = sweep({sc}, cfg);
    long collisions = 0, exited = 0;
    for (const auto& rep : r.reports) {
        if (!rep.ok) return {false, "episode failed: " + rep.message};
        collisions += rep.collisions;
        exited += rep.exited;
    }
    return {collisions == 0, std::to_string(collisions) + " collisions over " + std::to_string(r.reports.size()) +
                                 " x " + std::to_string(kEvalSteps) + " steps (" + std::to_string(exited) +
                                 " vehicles served)"};
}

Outcome determinism(const TrendData& d) {
    const LoadedScenario sc = trend_scenario(1000.0);
    const NetworkGraph g = build_network(sc.spec);
    const ControllerChoice choices[] = {
        {ControllerKind::NoTL}, {ControllerKind::TL}, {ControllerKind::Policy, d.policy, PolicyMode::Deterministic, {}},
        {ControllerKind::Policy, d.policy, PolicyMode::Stochastic, {}}};
    int checked = 0;
    for (const auto& c : choices) {
        for (std::uint64_t seed : {11u, 12u}) {
            std::ostringstream a, b;
            EpisodeOptions oa, ob;
            oa.trajectory = &a;
            ob.trajectory = &b;
            const auto ra = run_episode(sc.spec, g, c, seed, 600, oa);
            const auto rb = run_episode(sc.spec, g, c, seed, 600, ob);
            if (!(ra == rb) || a.str() != b.str()) {
                return {false, std::string(to_string(c.kind)) + " seed " + std::to_string(seed) + " diverged"};
            }
            ++checked;
        }
    }
    return {true, std::to_string(checked) + " (controller, seed) pairs replayed with identical trajectories and reports"};
}

// 10 ------------------------------------------------------------------------

Outcome osm_golden() {
    std::string detail;
    bool ok = true;
    for (const char* name : {"crossing", "roundabout"}) {
        const fs::path dir = MIXFLOW_TEST_DATA;
        std::ifstream in(dir / (std::string(name) + ".expected.json"));
        const auto e = nlohmann::json::parse(in);
        const NetworkGraph g =
            convert_osm(load_osm(dir / e["source"].get<std::string>()), e["junction_node"], e["clip_radius"]);
        const bool match = g.nodes().size() == e["nodes"].get<std::size_t>() &&
                           g.edges().size() == e["edges"].get<std::size_t>() &&
                           g.connectors().size() == e["connectors"].get<std::size_t>() &&
                           g.origin_edges().size() == e["origin_edges"].get<std::size_t>();
        ok = ok && match;
        detail += std::string(name) + ": " + std::to_string(g.nodes().size()) + " nodes, " +
                  std::to_string(g.edges().size()) + " edges, " + std::to_string(g.connectors().size()) +
                  " connectors" + (match ? "" : " (MISMATCH)") + "; ";
    }
    return {ok, detail};
}

// 11 ------------------------------------------------------------------------

Outcome scenario_roundtrip() {
    const fs::path dir = fs::path(MIXFLOW_TEST_DATA).parent_path().parent_path() / "scenarios";
    const Manifest all = load_manifest(dir / "manifest.json");
    const auto loaded = load_manifest_scenarios(dir / "manifest.json");
    for (const auto& s : loaded) {
        std::ifstream in(s.path, std::ios::binary);
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (dump_scenario(s.spec) != text || !(parse_scenario(dump_scenario(s.spec)) == s.spec)) {
            return {false, s.path.string() + " does not round-trip"};
        }
    }
    std::set<std::string> train, test, files;
    for (const auto& e : load_manifest(dir / "train.json").entries) train.insert(e.path);
    for (const auto& e : load_manifest(dir / "test.json").entries) test.insert(e.path);
    for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().string().ends_with(".scenario.json")) files.insert(f.path().filename().string());
    }
    std::set<std::string> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::inserter(both, both.begin()));
    std::set<std::string> either = train;
    either.insert(test.begin(), test.end());
    const bool split_ok = both.empty() && either == files && either.size() == all.entries.size();

    std::vector<NamedRecipe> recipes;
    for (int i = 0; i < 111; ++i) {
        GeneratorRecipe r;
        r.topology = i % 3 == 0 ? Topology::Intersection : Topology::Roundabout;
        r.legs = 3 + i % 4;
        recipes.push_back({"topology" + std::to_string(i), r});
    }
    GenerateOptions opts;
    opts.with_tl_program = false;
    const auto set = generate_manifest(recipes, opts);
    const bool arithmetic = set.train.size() + set.test.size() == 444 && set.train.size() == 372;
    return {split_ok && arithmetic,
            std::to_string(loaded.size()) + " shipped specs round-trip; split " + std::to_string(train.size()) + "/" +
                std::to_string(test.size()) + (split_ok ? " disjoint and exhaustive" : " BROKEN") + "; 111 x 4 -> " +
                std::to_string(set.train.size() + set.test.size()) + " (" + std::to_string(set.train.size()) + "/" +
                std::to_string(set.test.size()) + ")"};
}

}  // namespace

int main() {
    fs::create_directories(kOut);
    int failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    };
    report(1, "IDM oracle equivalence", idm_oracle);
    report(2, "observation contract", observation_contract);
    report(3, "reward contract", reward_contract);
    report(4, "gradient check", gradient_check);
    report(10, "OSM golden files", osm_golden);
    report(11, "scenario round-trip", scenario_roundtrip);
    report(8, "TL safety", tl_safety);
    report(5, "toy convergence", toy_convergence);

    std::optional<TrendData> trend_data;
    std::string trend_error;
    try {
        trend_data = run_trend();
    } catch (const std::exception& e) {
        trend_error = e.what();
    }
    auto needs_trend = [&](const std::function<Outcome(const TrendData&)>& fn) {
        return [&, fn] { return trend_data ? fn(*trend_data) : Outcome{false, "training failed: " + trend_error}; };
    };
    report(6, "trend reproduction", needs_trend(trend));
    report(7, "penetration monotonicity", needs_trend(penetration));
    report(9, "determinism", needs_trend(determinism));

    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
