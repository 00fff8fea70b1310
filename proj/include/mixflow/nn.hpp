#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mixflow/rng.hpp"

namespace mixflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dense {
    Matrix w;  // out x in
    Vector b;  // out

    bool operator==(const Dense& o) const { return w == o.w && b == o.b; }
};

/// Activations kept by a forward pass for the matching backward pass.
struct MlpCache {
    std::vector<Matrix> inputs;  // input to each layer, columns are samples
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
};

/// Fully connected network with ReLU between layers and a linear output.
class Mlp {
public:
    Mlp() = default;
    /// `sizes` = {in, hidden..., out}; all parameters zero.
    explicit Mlp(const std::vector<int>& sizes);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    void init_uniform(RngStream& rng);

    int input_size() const { return static_cast<int>(layers_.front().w.cols()); }
    int output_size() const { return static_cast<int>(layers_.back().w.rows()); }

    Matrix forward(const Matrix& x) const;
    Matrix forward(const Matrix& x, MlpCache& cache) const;

    /// Accumulates parameter gradients into `grad` (same shape, may be null)
    /// given dL/d(output) and returns dL/d(input).
    Matrix backward(const MlpCache& cache, const Matrix& d_out, Mlp* grad) const;

    std::vector<Dense>& layers() { return layers_; }
    const std::vector<Dense>& layers() const { return layers_; }

    std::size_t parameter_count() const;
    /// Flat view in declaration order: per layer, weights (column major) then biases.
    double& parameter(std::size_t i);
    double parameter(std::size_t i) const;

    void set_zero();
    bool all_finite() const;
    /// this <- (1 - tau) * this + tau * source
    void polyak(const Mlp& source, double tau);

    bool operator==(const Mlp&) const = default;

private:
    std::vector<Dense> layers_;
};

/// Adaptive moment estimation over one network.
class Adam {
public:
    struct Config {
        double lr = 3e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    Adam(const Mlp& shape, Config cfg);

    void step(Mlp& params, const Mlp& grad);

    std::int64_t steps() const { return t_; }

private:
    Config cfg_;
    Mlp m_;
    Mlp v_;
    std::int64_t t_ = 0;
};

/// Scalar Adam for the entropy temperature.
class ScalarAdam {
public:
    explicit ScalarAdam(Adam::Config cfg = {}) : cfg_(cfg) {}
    void step(double& param, double grad);

private:
    Adam::Config cfg_;
    double m_ = 0.0;
    double v_ = 0.0;
    std::int64_t t_ = 0;
};

}  // namespace mixflow
