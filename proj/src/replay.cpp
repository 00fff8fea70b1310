#include "mixflow/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixflow/error.hpp"

namespace mixflow {

namespace {
constexpr double kPriorityEps = 1e-6;
}

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, int obs_size, double alpha)
    : capacity_(capacity), obs_size_(obs_size), alpha_(alpha) {
    if (capacity == 0) throw ValidationError("capacity", "must be positive");
    if (obs_size < 1) throw ValidationError("obs_size", "must be positive");
    if (!(alpha >= 0.0)) throw ValidationError("alpha", "must be nonnegative");
    leaf_ = 1;
    while (leaf_ < capacity) leaf_ *= 2;
    sum_.assign(2 * leaf_, 0.0);
    min_.assign(2 * leaf_, std::numeric_limits<double>::infinity());
    obs_ = Matrix::Zero(obs_size, static_cast<Eigen::Index>(capacity));
    next_obs_ = Matrix::Zero(obs_size, static_cast<Eigen::Index>(capacity));
    action_ = Vector::Zero(static_cast<Eigen::Index>(capacity));
    reward_ = Vector::Zero(static_cast<Eigen::Index>(capacity));
    done_ = Vector::Zero(static_cast<Eigen::Index>(capacity));
}

void PrioritizedReplay::set_priority(std::size_t i, double p) {
    std::size_t k = leaf_ + i;
    sum_[k] = p;
    min_[k] = p;
    for (k /= 2; k >= 1; k /= 2) {
        sum_[k] = sum_[2 * k] + sum_[2 * k + 1];
        min_[k] = std::min(min_[2 * k], min_[2 * k + 1]);
    }
}

void PrioritizedReplay::add(const Transition& t) {
    if (static_cast<int>(t.obs.size()) != obs_size_ || static_cast<int>(t.next_obs.size()) != obs_size_) {
        throw ValidationError("obs", "transition observation has the wrong length");
    }
    const auto col = static_cast<Eigen::Index>(next_);
    obs_.col(col) = Eigen::Map<const Vector>(t.obs.data(), obs_size_);
    next_obs_.col(col) = Eigen::Map<const Vector>(t.next_obs.data(), obs_size_);
    action_(col) = t.action;
    reward_(col) = t.reward;
    done_(col) = t.done ? 1.0 : 0.0;
    set_priority(next_, max_priority_);
    next_ = (next_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

std::size_t PrioritizedReplay::find_prefix(double mass) const {
    std::size_t k = 1;
    while (k < leaf_) {
        if (mass < sum_[2 * k] || sum_[2 * k + 1] <= 0.0) {
            k = 2 * k;
        } else {
            mass -= sum_[2 * k];
            k = 2 * k + 1;
        }
    }
    return std::min(k - leaf_, size_ - 1);
}

Batch PrioritizedReplay::sample(std::size_t batch_size, double beta, RngStream& rng) const {
    if (size_ == 0 || batch_size == 0) throw ValidationError("batch_size", "cannot sample from an empty buffer");
    const auto n = static_cast<Eigen::Index>(batch_size);
    Batch b;
    b.obs.resize(obs_size_, n);
    b.next_obs.resize(obs_size_, n);
    b.action.resize(n);
    b.reward.resize(n);
    b.done.resize(n);
    b.weight.resize(n);
    b.indices.resize(batch_size);
    const double total = sum_[1];
    const double segment = total / static_cast<double>(batch_size);
    const double p_min = min_[1] / total;
    const double w_max = std::pow(static_cast<double>(size_) * p_min, -beta);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mass = std::min((static_cast<double>(j) + rng.uniform()) * segment, std::nextafter(total, 0.0));
        const std::size_t i = find_prefix(mass);
        const auto c = static_cast<Eigen::Index>(i);
        b.indices[static_cast<std::size_t>(j)] = i;
        b.obs.col(j) = obs_.col(c);
        b.next_obs.col(j) = next_obs_.col(c);
        b.action(j) = action_(c);
        b.reward(j) = reward_(c);
        b.done(j) = done_(c);
        b.weight(j) = std::pow(static_cast<double>(size_) * probability(i), -beta) / w_max;
    }
    return b;
}

void PrioritizedReplay::update_priorities(const std::vector<std::size_t>& indices, const Vector& td_errors) {
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const double p = std::pow(std::abs(td_errors(static_cast<Eigen::Index>(j))) + kPriorityEps, alpha_);
        set_priority(indices[j], p);
        max_priority_ = std::max(max_priority_, p);
    }
}

double annealed_beta(double start, std::int64_t step, std::int64_t horizon) {
    if (horizon <= 0) return 1.0;
    const double f = std::clamp(static_cast<double>(step) / static_cast<double>(horizon), 0.0, 1.0);
    return start + f * (1.0 - start);
}

}  // namespace mixflow
