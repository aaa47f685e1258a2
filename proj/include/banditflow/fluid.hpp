#pragma once

// Fluid approximation of generalized UCB1: the deterministic pull counts
// n*_i that equalize every arm's index at the mean rewards,
//
//     (n*_i)^{-1/2} - (n*_1)^{-1/2} = Delta_i / f(T),   sum_i n*_i = T.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banditflow/env.hpp"

namespace banditflow {

struct RegimeLabel {
    enum class Kind { LargeGap, ModerateGap, SmallGap };

    Kind kind = Kind::SmallGap;
    /// theta for ModerateGap (0 otherwise).
    double theta = 0.0;
    /// Delta^T sqrt(T) / f(T) at the horizon the label was derived from.
    double finite_ratio = 0.0;
};

const char* to_string(RegimeLabel::Kind kind) noexcept;

struct FluidSolution {
    double horizon = 0.0;
    double f_T = 0.0;
    /// Unrounded pull counts; n_star[0] belongs to the best arm.
    std::vector<double> n_star;
    /// Index-equation residuals (n_i)^{-1/2} - (n_0)^{-1/2} - Delta_i/f(T); entry 0 is 0.
    std::vector<double> residuals;
    /// sum_i n_star[i] - T.
    double sum_residual = 0.0;
    /// lambda(i, j) = n_star[i] / n_star[j].
    Eigen::MatrixXd lambda;
    /// Per arm; entry 0 (the best arm) is SmallGap with ratio 0 by convention.
    std::vector<RegimeLabel> regime;

    std::size_t arm_count() const noexcept { return n_star.size(); }
    /// n*_2 / n*_1 of a two-armed problem (first inferior arm against the best arm).
    double lambda21() const { return lambda(1, 0); }
};

struct FluidOptions {
    /// Single-horizon labelling: Delta sqrt(T)/f(T) above this is LargeGap.
    double large_gap_ratio = 10.0;
    int max_bisection_steps = 400;
    int max_newton_steps = 5;
};

/// Unique positive solution of the fluid system. Requires T >= K and f(T) > 0.
/// Bracketed geometric bisection on x = (n_1)^{-1/2} followed by Newton polish.
/// The regime labels come from the single-horizon ratio; classify_regime gives
/// the trend-based label over a horizon grid.
FluidSolution solve_fluid(const BanditInstance& instance, const ExplorationFunction& f, double horizon,
                          const FluidOptions& options = {});

/// Same system with Delta_i / f(T) supplied directly (gaps must be >= 0, gaps[0] = 0).
FluidSolution solve_fluid_scaled(std::span<const double> scaled_gaps, double horizon, double f_T,
                                 const FluidOptions& options = {});

/// Limit sampling ratio lambda* = lim n*_2/n*_1 for a gap parameterization:
/// 0 for FixedGap with Delta > 0, 1 for SmallGapZero, and for ModerateTheta the
/// root in (0, 1] of sqrt(1 + 1/lambda) - sqrt(1 + lambda) = theta.
double lambda_star_limit(const GapSpec& spec);

/// theta = sqrt(1 + 1/lambda) - sqrt(1 + lambda); inverse of the moderate-gap relation.
double theta_for_lambda(double lambda);

struct RegimeClassification {
    RegimeLabel label;
    std::vector<double> horizons;
    /// Delta^T sqrt(T)/f(T) at each horizon.
    std::vector<double> ratios;
};

/// Trend-based label over `horizons` (at least two distinct values). The ratio
/// Delta^T sqrt(T)/f(T) growing faster than 10^0.05 per decade is LargeGap,
/// shrinking faster than that (or identically zero) is SmallGap, otherwise
/// ModerateGap with theta taken from the largest horizon. theta = 0 is SmallGap.
RegimeClassification classify_regime(const GapSpec& spec, const ExplorationFunction& f,
                                     std::span<const double> horizons);

/// The same rule applied to an arbitrary ratio series.
RegimeLabel classify_ratio_series(std::span<const double> horizons, std::span<const double> ratios);

} // namespace banditflow
