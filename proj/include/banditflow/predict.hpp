#pragma once

// Closed-form asymptotic predictions for generalized UCB1: joint-CLT
// covariances of standardized pull counts W and sample means Z, the
// pseudo-regret's typical scale and deviation, and leading sample-bias terms.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banditflow/env.hpp"
#include "banditflow/fluid.hpp"

namespace banditflow {

enum class LambdaSource { FiniteT, Limit };

const char* to_string(LambdaSource source) noexcept;

/// One standardized coordinate: W = scale (N_arm - n*_arm) or Z = scale (mean_arm - mu_arm).
struct Coordinate {
    enum class Kind { W, Z };

    Kind kind = Kind::W;
    std::size_t arm = 0;
    double scale = 1.0;

    std::string label() const;
};

struct CltPrediction {
    enum class Form { TwoArm, KArm };

    Form form = Form::KArm;
    std::vector<Coordinate> coordinates;
    Eigen::VectorXd w_scale;
    Eigen::VectorXd z_scale;
    /// Covariance over `coordinates`, in order. For the K-arm form the blocks
    /// are [Sigma1, Sigma12; Sigma12^T, Sigma2] over (W_1..W_K, Z_1..Z_K).
    Eigen::MatrixXd cov;
    LambdaSource lambda_source = LambdaSource::FiniteT;
    /// Sampling ratios the covariance was evaluated with, lambda(i, j) = n_i/n_j.
    /// The two-arm form stores the 1 x 1 matrix [n_2/n_1].
    Eigen::MatrixXd lambda;

    Eigen::Index dim() const noexcept { return cov.rows(); }
};

/// Two-armed joint CLT over (W_2, Z_1, Z_2) with
/// W_2 = (1 + lambda^{3/2})/2 * f(T)/n*_2 * (N_2 - n*_2) and covariance
/// [[l s1^2 + s2^2, -s1^2 sqrt(l), s2^2], [-s1^2 sqrt(l), s1^2, 0], [s2^2, 0, s2^2]].
/// `lambda_limit` replaces the finite-T ratio n*_2/n*_1 when given.
CltPrediction clt_two_arm(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                          std::optional<double> lambda_limit = std::nullopt);

/// Covariance blocks of the K-arm joint CLT from a sampling-ratio matrix and
/// the arm variances, returned as the (2K x 2K) matrix [Sigma1, Sigma12; Sigma12^T, Sigma2].
Eigen::MatrixXd k_arm_covariance(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& variances);

/// K-arm joint CLT over (W_1..W_K, Z_1..Z_K), W_i = f(T)/(2 n*_{max(i,2)}) (N_i - n*_i).
/// `lambda_override` replaces the finite-T ratios (e.g. with a known limit).
CltPrediction clt_k_arm(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                        const std::optional<Eigen::MatrixXd>& lambda_override = std::nullopt);

/// Monte-Carlo oracle for clt_k_arm: Z_k ~ Normal(0, sigma_k^2) independently,
/// eps_k = Z_k / sqrt(n*_k), omega from solve_perturbation_ucb, W from the
/// K-arm scalings. Samples are split into `shards` with streams (seed, shard)
/// and merged pairwise, so the result does not depend on how shards are scheduled.
Eigen::MatrixXd clt_from_perturbation_mc(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                                         std::int64_t samples, std::uint64_t seed, int shards = 1);

struct RegretPrediction {
    double lambda = 0.0;
    double delta = 0.0;
    /// R*_T = n*_2 Delta^T.
    double typical_scale = 0.0;
    /// S*_T = sqrt(2 (l s1^2 + s2^2)) / sqrt(1 + l^{3/2}) * R*_T / f(T).
    double typical_deviation = 0.0;
    /// Standard deviation implied by the regret CLT:
    /// 2 sqrt(l s1^2 + s2^2) / (1 + l^{3/2}) * R*_T / f(T).
    double clt_implied_sd = 0.0;
};

/// Two-armed only.
RegretPrediction regret_prediction(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                                   std::optional<double> lambda_limit = std::nullopt);

struct ArmBias {
    /// Leading bias term E[mean] - mu (reward units, never positive).
    double bias = 0.0;
    /// Regime constant the scaled empirical bias is compared with, if one exists.
    std::optional<double> scaled_constant;
    /// Multiplier turning a bias into the scaled quantity (sqrt(T log T) or log T).
    double scale = 0.0;
    std::string scale_label;
};

struct BiasPrediction {
    std::vector<ArmBias> arms;
    RegimeLabel regime;
    double rho = 0.0;
    double lambda = 0.0;
    double horizon = 0.0;
};

/// Leading sample-bias terms for canonical UCB (f = sqrt(rho ln t)), two arms:
///   arm 2: -2 s2^2 / ((1 + l^{3/2}) sqrt(rho n*_2 ln T))
///   arm 1: -2 s1^2 / ((1 + l^{-3/2}) sqrt(rho n*_1 ln T))   (0 at l = 0)
/// Scaled constants: large gap, arm 2: -2 s2^2 Delta / rho against log T;
/// small/moderate gap: -2 s_i^2 sqrt(1 + l) / (sqrt(rho) c_i) against
/// sqrt(T log T), with c_2 = sqrt(l) + l^2 and c_1 = 1 + l^{-3/2}.
/// Throws UnsupportedConfiguration for non-canonical f or K != 2.
BiasPrediction bias_prediction(const FluidSolution& fluid, const BanditInstance& instance,
                               const ExplorationFunction& f, double horizon, const RegimeLabel& regime,
                               std::optional<double> lambda_limit = std::nullopt);

} // namespace banditflow
