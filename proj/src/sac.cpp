#include "mixflow/sac.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "mixflow/error.hpp"

namespace mixflow {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

const double kLogNormConst = 0.5 * std::log(2.0 * std::numbers::pi) + std::log(kActionMax);

Vector standard_normals(Eigen::Index n, RngStream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = normal(rng);
    return eps;
}

}  // namespace

void SacHyper::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma", "must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau", "must lie in (0, 1]");
    if (!(lr > 0.0)) throw ValidationError("lr", "must be positive");
    if (batch_size < 1) throw ValidationError("batch_size", "must be positive");
    if (hidden < 1) throw ValidationError("hidden", "must be positive");
}

PolicyParams PolicyParams::create(int obs_size, int hidden, std::uint64_t seed, double log_alpha) {
    PolicyParams p;
    RngStream rng(seed, "init");
    p.actor = Mlp({obs_size, hidden, hidden, 2});
    p.q1 = Mlp({obs_size + 1, hidden, hidden, 1});
    p.q2 = Mlp({obs_size + 1, hidden, hidden, 1});
    p.actor.init_uniform(rng);
    p.q1.init_uniform(rng);
    p.q2.init_uniform(rng);
    p.q1_target = p.q1;
    p.q2_target = p.q2;
    p.log_alpha = log_alpha;
    return p;
}

bool PolicyParams::all_finite() const {
    return actor.all_finite() && q1.all_finite() && q2.all_finite() && q1_target.all_finite() &&
           q2_target.all_finite() && std::isfinite(log_alpha);
}

GaussianHead actor_head(const Mlp& actor, const Matrix& obs, MlpCache* cache) {
    if (obs.rows() != actor.input_size()) throw ValidationError("obs", "observation size does not match the actor");
    const Matrix out = cache ? actor.forward(obs, *cache) : actor.forward(obs);
    GaussianHead h;
    h.mean = out.row(0).transpose();
    h.raw_log_std = out.row(1).transpose();
    h.log_std = h.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    return h;
}

ActionSample squash(double mean, double log_std, double eps) {
    const double u = mean + std::exp(log_std) * eps;
    ActionSample s;
    s.pre_tanh = u;
    s.action = kActionMax * std::tanh(u);
    // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
    const double log_jac = 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
    s.log_prob = -0.5 * eps * eps - log_std - kLogNormConst - log_jac;
    return s;
}

std::vector<ActionSample> sample_actions(const PolicyParams& p, const Matrix& obs, RngStream& rng) {
    const GaussianHead h = actor_head(p.actor, obs);
    const Vector eps = standard_normals(obs.cols(), rng);
    std::vector<ActionSample> out;
    out.reserve(static_cast<std::size_t>(obs.cols()));
    for (Eigen::Index i = 0; i < obs.cols(); ++i) out.push_back(squash(h.mean(i), h.log_std(i), eps(i)));
    return out;
}

ActionSample sample_action(const PolicyParams& p, const Observation& obs, RngStream& rng) {
    const Matrix x = Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
    return sample_actions(p, x, rng).front();
}

double deterministic_action(const PolicyParams& p, const Observation& obs) {
    const Matrix x = Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
    return kActionMax * std::tanh(actor_head(p.actor, x).mean(0));
}

Matrix critic_input(const Matrix& obs, const Vector& actions) {
    Matrix x(obs.rows() + 1, obs.cols());
    x.topRows(obs.rows()) = obs;
    x.row(obs.rows()) = actions.transpose() / kActionMax;
    return x;
}

CriticLosses critic_losses(const PolicyParams& p, const Batch& batch, const Vector& eps_next, double gamma, Mlp* g1,
                           Mlp* g2) {
    const Eigen::Index n = batch.size();
    const double alpha = std::exp(p.log_alpha);

    const GaussianHead next = actor_head(p.actor, batch.next_obs);
    Vector a_next(n);
    Vector logp_next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ActionSample s = squash(next.mean(i), next.log_std(i), eps_next(i));
        a_next(i) = s.action;
        logp_next(i) = s.log_prob;
    }
    const Matrix x_next = critic_input(batch.next_obs, a_next);
    const Vector qt1 = p.q1_target.forward(x_next).row(0).transpose();
    const Vector qt2 = p.q2_target.forward(x_next).row(0).transpose();
    const Vector soft = qt1.cwiseMin(qt2) - alpha * logp_next;

    CriticLosses out;
    out.target = batch.reward + gamma * (Vector::Ones(n) - batch.done).cwiseProduct(soft);

    const Matrix x = critic_input(batch.obs, batch.action);
    auto one = [&](const Mlp& q, Mlp* grad, Vector& td) {
        MlpCache cache;
        const Vector qv = q.forward(x, cache).row(0).transpose();
        td = qv - out.target;
        const double loss = 0.5 * batch.weight.dot(td.cwiseProduct(td)) / static_cast<double>(n);
        if (grad) {
            const Matrix d = (batch.weight.cwiseProduct(td) / static_cast<double>(n)).transpose();
            q.backward(cache, d, grad);
        }
        return loss;
    };
    out.loss1 = one(p.q1, g1, out.td1);
    out.loss2 = one(p.q2, g2, out.td2);
    return out;
}

ActorLoss actor_loss(const PolicyParams& p, const Matrix& obs, const Vector& eps, double alpha, Mlp* grad) {
    const Eigen::Index n = obs.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    MlpCache actor_cache;
    const GaussianHead h = actor_head(p.actor, obs, grad ? &actor_cache : nullptr);
    Vector a(n);
    Vector u(n);
    ActorLoss out;
    out.log_prob.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ActionSample s = squash(h.mean(i), h.log_std(i), eps(i));
        a(i) = s.action;
        u(i) = s.pre_tanh;
        out.log_prob(i) = s.log_prob;
    }
    const Matrix x = critic_input(obs, a);
    MlpCache c1;
    MlpCache c2;
    const Vector q1 = p.q1.forward(x, c1).row(0).transpose();
    const Vector q2 = p.q2.forward(x, c2).row(0).transpose();
    const Vector qmin = q1.cwiseMin(q2);
    out.loss = inv_n * (alpha * out.log_prob - qmin).sum();
    if (!grad) return out;

    // dQmin/da through whichever critic is smaller per sample.
    Matrix d1 = Matrix::Zero(1, n);
    Matrix d2 = Matrix::Zero(1, n);
    for (Eigen::Index i = 0; i < n; ++i) (q1(i) <= q2(i) ? d1 : d2)(0, i) = 1.0;
    const Matrix dx1 = p.q1.backward(c1, d1, nullptr);
    const Matrix dx2 = p.q2.backward(c2, d2, nullptr);
    const Eigen::Index last = obs.rows();

    Matrix d_out(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dq_da = (dx1(last, i) + dx2(last, i)) / kActionMax;
        const double t = std::tanh(u(i));
        const double da_du = kActionMax * (1.0 - t * t);
        const double sigma_eps = std::exp(h.log_std(i)) * eps(i);
        const double d_mean = alpha * 2.0 * t - dq_da * da_du;
        double d_log_std = alpha * (-1.0 + 2.0 * t * sigma_eps) - dq_da * da_du * sigma_eps;
        if (h.raw_log_std(i) < kLogStdMin || h.raw_log_std(i) > kLogStdMax) d_log_std = 0.0;
        d_out(0, i) = inv_n * d_mean;
        d_out(1, i) = inv_n * d_log_std;
    }
    p.actor.backward(actor_cache, d_out, grad);
    return out;
}

double temperature_gradient(const Vector& log_prob, double target_entropy) {
    return -(log_prob.array() + target_entropy).mean();
}

SacLearner::SacLearner(int obs_size, SacHyper hyper, std::uint64_t seed)
    : SacLearner(PolicyParams::create(obs_size, hyper.hidden, seed, hyper.initial_log_alpha), hyper, seed) {}

SacLearner::SacLearner(PolicyParams params, SacHyper hyper, std::uint64_t seed)
    : hyper_(hyper),
      params_(std::move(params)),
      actor_opt_(params_.actor, {hyper.lr}),
      q1_opt_(params_.q1, {hyper.lr}),
      q2_opt_(params_.q2, {hyper.lr}),
      alpha_opt_({hyper.lr}),
      rng_(seed, "learner") {
    hyper_.validate();
}

UpdateStats SacLearner::update(const Batch& batch) {
    const Eigen::Index n = batch.size();
    const double alpha = std::exp(params_.log_alpha);

    Mlp g1 = params_.q1;
    Mlp g2 = params_.q2;
    g1.set_zero();
    g2.set_zero();
    const Vector eps_next = standard_normals(n, rng_);
    const CriticLosses cl = critic_losses(params_, batch, eps_next, hyper_.gamma, &g1, &g2);

    Mlp ga = params_.actor;
    ga.set_zero();
    const Vector eps = standard_normals(n, rng_);
    const ActorLoss al = actor_loss(params_, batch.obs, eps, alpha, &ga);
    const double g_alpha = temperature_gradient(al.log_prob, hyper_.target_entropy);

    if (!std::isfinite(cl.loss1) || !std::isfinite(cl.loss2) || !std::isfinite(al.loss) || !std::isfinite(g_alpha)) {
        throw DivergenceError("non-finite loss at update " + std::to_string(updates_) +
                              " (critic " + std::to_string(cl.loss1 + cl.loss2) + ", actor " +
                              std::to_string(al.loss) + ")");
    }

    q1_opt_.step(params_.q1, g1);
    q2_opt_.step(params_.q2, g2);
    actor_opt_.step(params_.actor, ga);
    alpha_opt_.step(params_.log_alpha, g_alpha);
    params_.q1_target.polyak(params_.q1, hyper_.tau);
    params_.q2_target.polyak(params_.q2, hyper_.tau);
    ++updates_;

    if (!params_.all_finite()) {
        throw DivergenceError("non-finite parameters after update " + std::to_string(updates_));
    }
    UpdateStats s;
    s.critic_loss = cl.loss1 + cl.loss2;
    s.actor_loss = al.loss;
    s.alpha = std::exp(params_.log_alpha);
    s.td_errors = 0.5 * (cl.td1.cwiseAbs() + cl.td2.cwiseAbs());
    return s;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::vector<const Mlp*> networks(const PolicyParams& p) {
    return {&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target};
}

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError(path.string() + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write("MXFW", 4);
    put<std::uint16_t>(out, kCheckpointVersion);
    std::uint32_t layers = 0;
    for (const Mlp* m : networks(p)) layers += static_cast<std::uint32_t>(m->layers().size());
    put<std::uint32_t>(out, layers);
    for (const Mlp* m : networks(p)) {
        for (const Dense& l : m->layers()) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(l.w.rows()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(l.w.cols()));
        }
    }
    // Per network (actor, q1, q2, q1 target, q2 target) and layer: row-major weights, then biases.
    for (const Mlp* m : networks(p)) {
        for (const Dense& l : m->layers()) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c) put<float>(out, static_cast<float>(l.w(r, c)));
            for (Eigen::Index r = 0; r < l.b.size(); ++r) put<float>(out, static_cast<float>(l.b(r)));
        }
    }
    put<float>(out, static_cast<float>(p.log_alpha));
    if (!out) throw IoError("failed writing " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MXFW", 4) != 0) {
        throw ParseError(0, path.string() + ": not a checkpoint (bad magic)");
    }
    const auto version = get<std::uint16_t>(in, path);
    if (version != kCheckpointVersion) {
        throw VersionError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                           std::to_string(kCheckpointVersion));
    }
    const auto layers = get<std::uint32_t>(in, path);
    if (layers != 15) throw ParseError(0, path.string() + ": expected 15 layers, found " + std::to_string(layers));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
    for (std::uint32_t i = 0; i < layers; ++i) {
        const auto rows = get<std::uint32_t>(in, path);
        const auto cols = get<std::uint32_t>(in, path);
        shapes.emplace_back(rows, cols);
    }
    const int obs = static_cast<int>(shapes[0].second);
    const int hidden = static_cast<int>(shapes[0].first);
    PolicyParams p;
    p.actor = Mlp({obs, hidden, hidden, 2});
    p.q1 = Mlp({obs + 1, hidden, hidden, 1});
    p.q2 = p.q1;
    p.q1_target = p.q1;
    p.q2_target = p.q1;
    std::size_t k = 0;
    for (Mlp* m : {&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target}) {
        for (Dense& l : m->layers()) {
            if (shapes[k] != std::pair<std::uint32_t, std::uint32_t>(static_cast<std::uint32_t>(l.w.rows()),
                                                                     static_cast<std::uint32_t>(l.w.cols()))) {
                throw ParseError(0, path.string() + ": layer " + std::to_string(k) + " has an unexpected shape");
            }
            ++k;
        }
    }
    for (Mlp* m : {&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target}) {
        for (Dense& l : m->layers()) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = get<float>(in, path);
            for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = get<float>(in, path);
        }
    }
    p.log_alpha = get<float>(in, path);
    return p;
}

}  // namespace mixflow
