#include "mixflow/nn.hpp"

#include <cmath>

#include "mixflow/error.hpp"

namespace mixflow {

Mlp::Mlp(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw ValidationError("layers", "need at least input and output sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] < 1 || sizes[i + 1] < 1) throw ValidationError("layers", "sizes must be positive");
        layers_.push_back({Matrix::Zero(sizes[i + 1], sizes[i]), Vector::Zero(sizes[i + 1])});
    }
}

void Mlp::init_uniform(RngStream& rng) {
    for (auto& l : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.w.cols()));
        for (Eigen::Index j = 0; j < l.w.cols(); ++j)
            for (Eigen::Index i = 0; i < l.w.rows(); ++i) l.w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = (2.0 * rng.uniform() - 1.0) * bound;
    }
}

Matrix Mlp::forward(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Matrix z = layers_[i].w * h;
        z.colwise() += layers_[i].b;
        h = i + 1 < layers_.size() ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
}

Matrix Mlp::forward(const Matrix& x, MlpCache& cache) const {
    cache.inputs.clear();
    cache.pre.clear();
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        cache.inputs.push_back(h);
        Matrix z = layers_[i].w * h;
        z.colwise() += layers_[i].b;
        if (i + 1 < layers_.size()) {
            h = z.cwiseMax(0.0);
            cache.pre.push_back(std::move(z));
        } else {
            h = std::move(z);
        }
    }
    return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& d_out, Mlp* grad) const {
    Matrix d = d_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        if (grad) {
            grad->layers_[k].w.noalias() += d * cache.inputs[k].transpose();
            grad->layers_[k].b += d.rowwise().sum();
        }
        Matrix d_in = layers_[k].w.transpose() * d;
        if (k > 0) d_in = d_in.cwiseProduct((cache.pre[k - 1].array() > 0.0).cast<double>().matrix());
        d = std::move(d_in);
    }
    return d;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
}

double& Mlp::parameter(std::size_t i) {
    for (auto& l : layers_) {
        const auto nw = static_cast<std::size_t>(l.w.size());
        if (i < nw) return l.w.data()[i];
        i -= nw;
        const auto nb = static_cast<std::size_t>(l.b.size());
        if (i < nb) return l.b.data()[i];
        i -= nb;
    }
    throw ValidationError("parameter", "index out of range");
}

double Mlp::parameter(std::size_t i) const { return const_cast<Mlp*>(this)->parameter(i); }

void Mlp::set_zero() {
    for (auto& l : layers_) {
        l.w.setZero();
        l.b.setZero();
    }
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.w.allFinite() || !l.b.allFinite()) return false;
    }
    return true;
}

void Mlp::polyak(const Mlp& source, double tau) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].w = (1.0 - tau) * layers_[k].w + tau * source.layers_[k].w;
        layers_[k].b = (1.0 - tau) * layers_[k].b + tau * source.layers_[k].b;
    }
}

Adam::Adam(const Mlp& shape, Config cfg) : cfg_(cfg), m_(shape), v_(shape) {
    m_.set_zero();
    v_.set_zero();
}

void Adam::step(Mlp& params, const Mlp& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto apply = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        p.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    };
    for (std::size_t k = 0; k < params.layers().size(); ++k) {
        apply(params.layers()[k].w, grad.layers()[k].w, m_.layers()[k].w, v_.layers()[k].w);
        apply(params.layers()[k].b, grad.layers()[k].b, m_.layers()[k].b, v_.layers()[k].b);
    }
}

void ScalarAdam::step(double& param, double grad) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad * grad;
    const double mh = m_ / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const double vh = v_ / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    param -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
}

}  // namespace mixflow
