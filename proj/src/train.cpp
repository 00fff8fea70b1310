#include "mixflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mixflow/error.hpp"
#include "mixflow/replay.hpp"

namespace mixflow {

void TrainConfig::validate() const {
    if (episodes < 0) throw ValidationError("episodes", "must be nonnegative");
    if (updates_per_step < 0) throw ValidationError("updates_per_step", "must be nonnegative");
    if (checkpoint_every < 0) throw ValidationError("checkpoint_every", "must be nonnegative");
    if (p_rv_set.empty()) throw ValidationError("P_rv", "set is empty");
    for (double p : p_rv_set) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("P_rv", "values must lie in [0, 1]");
    }
    if (buffer_capacity < hyper.batch_size) throw ValidationError("buffer_capacity", "smaller than the batch size");
    if (!(per_alpha >= 0.0)) throw ValidationError("per_alpha", "must be nonnegative");
    if (!(per_beta0 >= 0.0 && per_beta0 <= 1.0)) throw ValidationError("per_beta", "must lie in [0, 1]");
    hyper.validate();
}

void ParameterStore::publish(const PolicyParams& p) {
    auto next = std::make_shared<const PolicyParams>(p);
    std::lock_guard lock(mu_);
    current_ = std::move(next);
    version_.fetch_add(1);
}

std::shared_ptr<const PolicyParams> ParameterStore::snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
}

namespace {

void write_log_row(std::ostream& out, const EpisodeLog& e) {
    out << e.episode << ',' << e.steps << ',' << std::setprecision(10) << e.ret << ',' << e.throughput << ','
        << e.avg_wait << ',' << e.collisions << ',' << e.buffer_size << ',' << e.temperature << '\n';
    out.flush();
}

}  // namespace

TrainResult train(const EnvFactory& make_env, const TrainConfig& cfg, const EpisodeCallback& on_episode) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();

    std::ofstream log_file;
    std::filesystem::path ckpt_dir;
    if (!cfg.out_dir.empty()) {
        ckpt_dir = cfg.out_dir / "checkpoints";
        std::filesystem::create_directories(ckpt_dir);
        log_file.open(cfg.out_dir / "train_log.csv");
        if (!log_file) throw IoError("cannot write " + (cfg.out_dir / "train_log.csv").string());
        log_file << kTrainLogHeader << '\n';
    }

    TrainResult result;
    if (cfg.episodes == 0) {
        if (log_file) log_file.flush();
        return result;
    }

    RngStream episode_rng(cfg.seed, "episodes");
    RngStream act_rng(cfg.seed, "actions");
    RngStream sample_rng(cfg.seed, "replay");

    const int obs_size = make_env(0, cfg.p_rv_set[0], cfg.seed)->observation_size();
    SacLearner learner(obs_size, cfg.hyper, cfg.seed);
    PrioritizedReplay buffer(cfg.buffer_capacity, obs_size, cfg.per_alpha);
    ParameterStore store;
    store.publish(learner.params());
    const std::int64_t horizon = cfg.beta_horizon > 0 ? cfg.beta_horizon : static_cast<std::int64_t>(cfg.episodes) * 1000;

    auto save = [&](const std::filesystem::path& path) {
        save_checkpoint(path, learner.params());
        result.checkpoints.push_back(path);
    };

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        if (cfg.time_budget_s > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() > cfg.time_budget_s) {
            break;
        }
        const double p_rv = cfg.p_rv_set[episode_rng() % cfg.p_rv_set.size()];
        const std::uint64_t env_seed = episode_rng();
        std::unique_ptr<Environment> env = make_env(ep, p_rv, env_seed);
        EpisodeLog row;
        row.episode = ep;
        try {
            std::vector<AgentObservation> agents = env->reset();
            while (true) {
                std::map<int, double> actions;
                std::map<int, const Observation*> acted;
                if (!agents.empty()) {
                    const auto params = store.snapshot();
                    Matrix obs(obs_size, static_cast<Eigen::Index>(agents.size()));
                    for (std::size_t i = 0; i < agents.size(); ++i) {
                        obs.col(static_cast<Eigen::Index>(i)) =
                            Eigen::Map<const Vector>(agents[i].obs.data(), obs_size);
                    }
                    const auto samples = sample_actions(*params, obs, act_rng);
                    for (std::size_t i = 0; i < agents.size(); ++i) {
                        actions[agents[i].agent] = samples[i].action;
                        acted[agents[i].agent] = &agents[i].obs;
                    }
                }
                EnvStep st = env->step(actions);
                row.ret += st.reward;
                ++row.steps;
                for (const auto& o : st.outcomes) {
                    buffer.add(Transition{*acted.at(o.agent), actions.at(o.agent), st.reward, o.next_obs, o.done});
                }
                if (buffer.size() >= std::max(cfg.warmup, cfg.hyper.batch_size)) {
                    for (int u = 0; u < cfg.updates_per_step; ++u) {
                        const double beta = annealed_beta(cfg.per_beta0, learner.updates(), horizon);
                        const Batch batch = buffer.sample(cfg.hyper.batch_size, beta, sample_rng);
                        const UpdateStats s = learner.update(batch);
                        buffer.update_priorities(batch.indices, s.td_errors);
                        if (cfg.checkpoint_every > 0 && !ckpt_dir.empty() &&
                            learner.updates() % cfg.checkpoint_every == 0) {
                            std::ostringstream name;
                            name << "ckpt_" << std::setw(8) << std::setfill('0') << learner.updates() << ".mxfw";
                            save(ckpt_dir / name.str());
                        }
                    }
                    store.publish(learner.params());
                }
                agents = std::move(st.next_agents);
                if (st.episode_over) break;
            }
        } catch (const DivergenceError& e) {
            if (!cfg.out_dir.empty()) save_checkpoint(cfg.out_dir / "diverged.mxfw", learner.params());
            throw DivergenceError("episode " + std::to_string(ep) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(e.kind(), "episode " + std::to_string(ep) + ": " + e.what());
        }
        const EpisodeSummary sum = env->summary();
        row.throughput = sum.throughput_rate;
        row.avg_wait = sum.avg_wait;
        row.collisions = sum.collisions;
        row.buffer_size = buffer.size();
        row.temperature = std::exp(learner.params().log_alpha);
        result.log.push_back(row);
        if (log_file) write_log_row(log_file, row);
        if (on_episode) on_episode(row);
    }

    result.updates = learner.updates();
    result.params = learner.params();
    if (!ckpt_dir.empty()) save(ckpt_dir / "final.mxfw");
    return result;
}

SpeedTrackingEnv::SpeedTrackingEnv(std::uint64_t, int obs_size) : obs_size_(obs_size) {
    if (obs_size < 4) throw ValidationError("obs_size", "need at least one 4-value slot");
}

Observation SpeedTrackingEnv::observation() const {
    // Front slots padded with +1 except the pacer; trailing rear slots with -1.
    Observation o(static_cast<std::size_t>(obs_size_), 1.0);
    const std::size_t front = static_cast<std::size_t>(obs_size_) * 2 / 3;
    std::fill(o.begin() + static_cast<std::ptrdiff_t>(front - front % 4), o.end(), -1.0);
    o[0] = 0.0;
    o[1] = 0.5;
    o[2] = 0.0;
    o[3] = std::clamp((kTargetSpeed - speed_) / kSpeedLimit, -1.0, 1.0);
    return o;
}

std::vector<AgentObservation> SpeedTrackingEnv::reset() {
    position_ = 0.0;
    speed_ = 0.0;
    steps_ = 0;
    return {{0, observation()}};
}

EnvStep SpeedTrackingEnv::step(const std::map<int, double>& actions) {
    const auto it = actions.find(0);
    if (it == actions.end() || actions.size() != 1) throw StaleCommandError("speed tracking expects one action for agent 0");
    const double a = std::clamp(it->second, -kActionMax, kActionMax);
    speed_ = std::clamp(speed_ + a, 0.0, kSpeedLimit);
    position_ += speed_;
    ++steps_;
    EnvStep st;
    st.reward = -std::abs(speed_ - kTargetSpeed) / kTargetSpeed;
    st.outcomes.push_back({0, observation(), false});
    st.episode_over = position_ >= kLaneLength || steps_ >= 40;
    if (!st.episode_over) st.next_agents.push_back({0, observation()});
    return st;
}

EpisodeSummary SpeedTrackingEnv::summary() const {
    EpisodeSummary s;
    s.steps = steps_;
    return s;
}

}  // namespace mixflow
