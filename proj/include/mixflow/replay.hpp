#pragma once

#include <cstdint>
#include <vector>

#include "mixflow/nn.hpp"
#include "mixflow/rng.hpp"

namespace mixflow {

struct Transition {
    std::vector<double> obs;
    double action = 0.0;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

/// Columns are samples.
struct Batch {
    Matrix obs;
    Vector action;
    Vector reward;
    Matrix next_obs;
    Vector done;
    Vector weight;  // importance-sampling weights, max 1
    std::vector<std::size_t> indices;

    Eigen::Index size() const { return action.size(); }
};

/// Proportional prioritized replay over a ring buffer.
class PrioritizedReplay {
public:
    PrioritizedReplay(std::size_t capacity, int obs_size, double alpha = 0.5);

    /// New transitions get the largest priority seen so far.
    void add(const Transition& t);

    /// Stratified proportional sample with importance weights for exponent `beta`.
    Batch sample(std::size_t batch_size, double beta, RngStream& rng) const;

    /// p_i = (|td_i| + 1e-6)^alpha
    void update_priorities(const std::vector<std::size_t>& indices, const Vector& td_errors);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    double priority(std::size_t i) const { return sum_[leaf_ + i]; }
    double total_priority() const { return sum_[1]; }
    /// Sampling probability of slot i.
    double probability(std::size_t i) const { return priority(i) / total_priority(); }

private:
    void set_priority(std::size_t i, double p);
    std::size_t find_prefix(double mass) const;

    std::size_t capacity_;
    int obs_size_;
    double alpha_;
    std::size_t leaf_;  // first leaf index in the trees (power of two)
    std::vector<double> sum_;
    std::vector<double> min_;
    double max_priority_ = 1.0;
    std::size_t next_ = 0;
    std::size_t size_ = 0;

    Matrix obs_;
    Matrix next_obs_;
    Vector action_;
    Vector reward_;
    Vector done_;
};

/// Linear schedule from `start` to 1 over `horizon` calls.
double annealed_beta(double start, std::int64_t step, std::int64_t horizon);

}  // namespace mixflow
