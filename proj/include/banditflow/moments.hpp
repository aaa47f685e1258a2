#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace banditflow {

/// Streaming mean and co-moment of d-dimensional samples (Welford), with the
/// exact pairwise merge of Chan, Golub and LeVeque so shards can be combined
/// in any grouping.
class CovarianceAccumulator {
public:
    CovarianceAccumulator() = default;
    explicit CovarianceAccumulator(Eigen::Index dim)
        : mean_(Eigen::VectorXd::Zero(dim)), comoment_(Eigen::MatrixXd::Zero(dim, dim)) {}

    void add(const Eigen::Ref<const Eigen::VectorXd>& x) {
        ++count_;
        const Eigen::VectorXd delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        comoment_.noalias() += delta * (x - mean_).transpose();
    }

    void merge(const CovarianceAccumulator& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const double na = static_cast<double>(count_);
        const double nb = static_cast<double>(other.count_);
        const double n = na + nb;
        const Eigen::VectorXd delta = other.mean_ - mean_;
        comoment_ += other.comoment_ + delta * delta.transpose() * (na * nb / n);
        mean_ += delta * (nb / n);
        count_ += other.count_;
    }

    std::int64_t count() const noexcept { return count_; }
    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }

    /// Unbiased (n - 1) covariance. Zero matrix when fewer than two samples.
    Eigen::MatrixXd covariance() const {
        if (count_ < 2) return Eigen::MatrixXd::Zero(dim(), dim());
        Eigen::MatrixXd c = comoment_ / static_cast<double>(count_ - 1);
        // Welford's update is not exactly symmetric in floating point.
        return 0.5 * (c + c.transpose());
    }

private:
    std::int64_t count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd comoment_;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        comp_ += std::fabs(sum_) >= std::fabs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace banditflow
