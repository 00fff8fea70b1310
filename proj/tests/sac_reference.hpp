#pragma once

// Loop-based reference implementations of the actor and critic objectives,
// independent of the Eigen code paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixflow/replay.hpp"
#include "mixflow/sac.hpp"

namespace mixflow::testing {

// Plain loop forward pass used as an independent reference.
inline std::vector<double> scalar_forward(const Mlp& m, std::vector<double> x) {
    for (std::size_t k = 0; k < m.layers().size(); ++k) {
        const Dense& l = m.layers()[k];
        std::vector<double> y(static_cast<std::size_t>(l.w.rows()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
            double s = l.b(r);
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) s += l.w(r, c) * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = (k + 1 < m.layers().size()) ? std::max(0.0, s) : s;
        }
        x = std::move(y);
    }
    return x;
}

inline std::vector<double> column(const Matrix& m, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
    return v;
}

// Squashed Gaussian log density evaluated the textbook way.
inline double reference_log_prob(double mean, double log_std, double eps) {
    const double sd = std::exp(log_std);
    const double u = mean + sd * eps;
    const double t = std::tanh(u);
    const double normal = -0.5 * eps * eps - log_std - 0.5 * std::log(2.0 * M_PI);
    return normal - std::log(kActionMax * (1.0 - t * t));
}

inline double reference_critic_loss(const PolicyParams& p, const Batch& b, const Vector& eps_next, double gamma, int which) {
    const double alpha = std::exp(p.log_alpha);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const auto head = scalar_forward(p.actor, column(b.next_obs, i));
        const double ls = std::clamp(head[1], kLogStdMin, kLogStdMax);
        const double u = head[0] + std::exp(ls) * eps_next(i);
        const double a_next = kActionMax * std::tanh(u);
        auto xn = column(b.next_obs, i);
        xn.push_back(a_next / kActionMax);
        const double qt = std::min(scalar_forward(p.q1_target, xn)[0], scalar_forward(p.q2_target, xn)[0]);
        const double y = b.reward(i) + gamma * (1.0 - b.done(i)) * (qt - alpha * reference_log_prob(head[0], ls, eps_next(i)));
        auto x = column(b.obs, i);
        x.push_back(b.action(i) / kActionMax);
        const double q = scalar_forward(which == 1 ? p.q1 : p.q2, x)[0];
        loss += 0.5 * b.weight(i) * (q - y) * (q - y);
    }
    return loss / static_cast<double>(b.size());
}

inline double reference_actor_loss(const PolicyParams& p, const Matrix& obs, const Vector& eps, double alpha) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < obs.cols(); ++i) {
        const auto head = scalar_forward(p.actor, column(obs, i));
        const double ls = std::clamp(head[1], kLogStdMin, kLogStdMax);
        const double a = kActionMax * std::tanh(head[0] + std::exp(ls) * eps(i));
        auto x = column(obs, i);
        x.push_back(a / kActionMax);
        const double q = std::min(scalar_forward(p.q1, x)[0], scalar_forward(p.q2, x)[0]);
        loss += alpha * reference_log_prob(head[0], ls, eps(i)) - q;
    }
    return loss / static_cast<double>(obs.cols());
}

inline Batch random_batch(int n, int obs_size, RngStream& rng) {
    Batch b;
    b.obs = Matrix::NullaryExpr(obs_size, n, [&] { return 2.0 * rng.uniform() - 1.0; });
    b.next_obs = Matrix::NullaryExpr(obs_size, n, [&] { return 2.0 * rng.uniform() - 1.0; });
    b.action = Vector::NullaryExpr(n, [&] { return 20.0 * rng.uniform() - 10.0; });
    b.reward = Vector::NullaryExpr(n, [&] { return 16.0 * rng.uniform() - 8.0; });
    b.done = Vector::NullaryExpr(n, [&] { return rng.uniform() < 0.2 ? 1.0 : 0.0; });
    b.weight = Vector::NullaryExpr(n, [&] { return 0.2 + 0.8 * rng.uniform(); });
    return b;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace mixflow::testing
