#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mixflow/env.hpp"
#include "mixflow/nn.hpp"
#include "mixflow/replay.hpp"
#include "mixflow/rng.hpp"

namespace mixflow {

inline constexpr double kActionMax = 10.0;
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SacHyper {
    double gamma = 0.99;
    double tau = 5e-3;
    double lr = 3e-4;
    std::size_t batch_size = 256;
    double target_entropy = -1.0;
    double initial_log_alpha = 0.0;
    int hidden = 256;

    void validate() const;
};

/// Actor, twin critics and their targets, and the log entropy temperature.
struct PolicyParams {
    Mlp actor;      // obs -> (mean, log_std)
    Mlp q1;         // (obs, a / a_max) -> Q
    Mlp q2;
    Mlp q1_target;
    Mlp q2_target;
    double log_alpha = 0.0;

    static PolicyParams create(int obs_size, int hidden, std::uint64_t seed, double log_alpha = 0.0);

    int obs_size() const { return actor.input_size(); }
    bool all_finite() const;
    bool operator==(const PolicyParams&) const = default;
};

struct GaussianHead {
    Vector mean;
    Vector log_std;  // clamped
    Vector raw_log_std;
};

GaussianHead actor_head(const Mlp& actor, const Matrix& obs, MlpCache* cache = nullptr);

struct ActionSample {
    double action = 0.0;
    double log_prob = 0.0;
    double pre_tanh = 0.0;
};

/// Reparametrized squashed Gaussian: u = mean + exp(log_std) * eps,
/// action = a_max * tanh(u), with the change-of-variables log density.
ActionSample squash(double mean, double log_std, double eps);

/// One stochastic action per column of `obs`.
std::vector<ActionSample> sample_actions(const PolicyParams& p, const Matrix& obs, RngStream& rng);
ActionSample sample_action(const PolicyParams& p, const Observation& obs, RngStream& rng);

/// a_max * tanh(mean).
double deterministic_action(const PolicyParams& p, const Observation& obs);

/// Stacks observations and normalized actions as critic input columns.
Matrix critic_input(const Matrix& obs, const Vector& actions);

struct CriticLosses {
    double loss1 = 0.0;
    double loss2 = 0.0;
    Vector target;
    Vector td1;
    Vector td2;
};

/// Importance-weighted soft Bellman residuals, 0.5 * mean(w * (q - y)^2) per
/// critic. `eps_next` is the frozen noise for the resampled next action.
/// Gradients are accumulated into g1/g2 when given.
CriticLosses critic_losses(const PolicyParams& p, const Batch& batch, const Vector& eps_next, double gamma,
                           Mlp* g1 = nullptr, Mlp* g2 = nullptr);

struct ActorLoss {
    double loss = 0.0;
    Vector log_prob;
};

/// mean(alpha * log pi(a|o) - min(q1, q2)(o, a)) with a reparametrized by `eps`.
ActorLoss actor_loss(const PolicyParams& p, const Matrix& obs, const Vector& eps, double alpha, Mlp* grad = nullptr);

/// Gradient of -mean(log_alpha * (log_prob + target_entropy)) w.r.t. log_alpha.
double temperature_gradient(const Vector& log_prob, double target_entropy);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    Vector td_errors;  // per batch element, used as new priorities
};

/// Single learner: owns the parameters and optimizer state.
class SacLearner {
public:
    SacLearner(int obs_size, SacHyper hyper, std::uint64_t seed);
    SacLearner(PolicyParams params, SacHyper hyper, std::uint64_t seed);

    /// One gradient step on critics, actor and temperature, then Polyak
    /// averaging. Throws DivergenceError on non-finite losses or parameters.
    UpdateStats update(const Batch& batch);

    const PolicyParams& params() const { return params_; }
    PolicyParams& mutable_params() { return params_; }
    const SacHyper& hyper() const { return hyper_; }
    std::int64_t updates() const { return updates_; }

private:
    SacHyper hyper_;
    PolicyParams params_;
    Adam actor_opt_;
    Adam q1_opt_;
    Adam q2_opt_;
    ScalarAdam alpha_opt_;
    RngStream rng_;
    std::int64_t updates_ = 0;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Binary checkpoint: "MXFW", u16 version, u32 layer count, (rows, cols) per
/// layer, then weights and biases as little-endian f32, then log_alpha.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& p);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mixflow
