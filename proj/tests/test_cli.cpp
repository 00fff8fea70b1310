#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mixflow/cli.hpp"
#include "mixflow/eval.hpp"

using namespace mixflow;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "mixflow");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mixflow_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("unknown flag prints usage and exits 2") {
    const auto r = run({"eval", "--manifest", "m.json", "--frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.starts_with("error: usage:"));
    CHECK(r.err.find("Usage:") != std::string::npos);
}

TEST_CASE("missing subcommand is a usage error") { CHECK(run({}).code == 2); }

TEST_CASE("training with zero steps is a validation error") {
    const auto dir = scratch("train0");
    REQUIRE(run({"--out", dir.string(), "generate"}).code == 0);
    const auto r = run({"train", "--scenarios", (dir / "train.json").string(), "--steps", "0"});
    CHECK(r.code == 2);
    CHECK(r.err == "error: validation: steps: must be at least 1\n");
}

TEST_CASE("failed run exits 1 with one error line") {
    const auto r = run({"eval", "--manifest", "/nonexistent/manifest.json"});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: io: "));
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("generate, eval and replay end to end") {
    const auto dir = scratch("e2e");
    REQUIRE(run({"--out", (dir / "corpus").string(), "--seed", "4", "generate", "--demands", "1000"}).code == 0);
    const auto manifest = load_manifest(dir / "corpus" / "manifest.json");
    CHECK(manifest.entries.size() == 12);

    const auto r = run({"--out", (dir / "o").string(), "--threads", "2", "eval", "--manifest",
                        (dir / "corpus" / "test.json").string(), "--controller", "notl", "--controller", "tl",
                        "--seeds", "2", "--steps", "60", "--trajectories"});
    REQUIRE(r.code == 0);
    const auto results = dir / "o" / "results" / "sweep";
    CHECK(fs::exists(results / "summary.csv"));
    CHECK(fs::exists(results / "throughput.svg"));
    const auto reports = parse_raw_csv(slurp(results / "raw.csv"));
    REQUIRE(reports.size() >= 4);

    for (int row : {1, 4}) {
        const auto out = dir / ("replay" + std::to_string(row) + ".csv");
        const auto rep = run({"replay", "--report", (results / "raw.csv").string(), "--row", std::to_string(row),
                              "--output", out.string()});
        CHECK(rep.code == 0);
        CHECK(slurp(out) == slurp(results / "trajectories" / ("row" + std::to_string(row) + ".csv")));
    }
    CHECK(run({"replay", "--report", (results / "raw.csv").string(), "--row", "999"}).code == 2);
}

TEST_CASE("config file sits between flags and defaults") {
    const auto dir = scratch("config");
    REQUIRE(run({"--out", (dir / "corpus").string(), "generate", "--demands", "400"}).code == 0);
    {
        std::ofstream cfg(dir / "run.toml");
        cfg << "seed = 7\nP_rv = [0.4]\n[eval]\nseeds = 3\nsteps = 40\nname = \"fromconfig\"\n";
    }
    const std::string manifest = (dir / "corpus" / "test.json").string();
    REQUIRE(run({"--config", (dir / "run.toml").string(), "--out", (dir / "o").string(), "eval", "--manifest",
                 manifest, "--steps", "30"})
                .code == 0);
    const auto reports = parse_raw_csv(slurp(dir / "o" / "results" / "fromconfig" / "raw.csv"));
    REQUIRE(!reports.empty());
    for (const auto& rep : reports) {
        CHECK(rep.steps == 30);    // flag beats config
        CHECK(rep.p_rv == 0.4);    // config beats default
    }
    const auto n_scenarios = load_manifest(manifest).entries.size();
    CHECK(reports.size() == 3 * n_scenarios);

    SUBCASE("the seed changes every episode seed") {
        REQUIRE(run({"--config", (dir / "run.toml").string(), "--seed", "8", "--out", (dir / "p").string(), "eval",
                     "--manifest", manifest})
                    .code == 0);
        const auto other = parse_raw_csv(slurp(dir / "p" / "results" / "fromconfig" / "raw.csv"));
        REQUIRE(other.size() == reports.size());
        CHECK(other[0].seed != reports[0].seed);
    }
}

TEST_CASE("policy evaluation needs a checkpoint") {
    const auto r = run({"eval", "--manifest", "x.json", "--controller", "policy"});
    CHECK(r.code == 2);
    CHECK(r.err.find("checkpoint") != std::string::npos);
}

TEST_CASE("hyperparameter overrides are type-checked") {
    CHECK(run({"--N_f", "ten", "eval", "--manifest", "x.json"}).code == 2);
    const auto r = run({"--d_f", "-3", "eval", "--manifest", "x.json"});
    CHECK(r.code == 2);
    CHECK(r.err == "error: validation: d_f: must be positive\n");
}

TEST_CASE("train writes a log and a final checkpoint") {
    const auto dir = scratch("train");
    REQUIRE(run({"--out", (dir / "corpus").string(), "generate", "--demands", "1000"}).code == 0);
    const auto r = run({"--out", (dir / "run").string(), "--warmup", "64", "--batch_size", "32", "--hidden", "16",
                        "train", "--scenarios", (dir / "corpus" / "train.json").string(), "--episodes", "2",
                        "--steps", "40"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "run" / "checkpoints" / "final.mxfw"));
    const std::string log = slurp(dir / "run" / "train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 3);
}
