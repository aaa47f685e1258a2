#pragma once

// Stylized data-generating model with one level of adaptivity:
//   1. draw n^d_i = round((1 - d_T) n*_i) rewards per arm,
//   2. Z^d_i = sqrt(n^d_i) (mean_i(n^d_i) - mu_i),
//   3. N~_2 = n*_2 (1 + 2 (Z^d_2 - Z^d_1 sqrt(l)) / ((1 + l^{3/2}) f(T))), N~_1 = T - N~_2,
//   4. draw N~_i - n^d_i further rewards and pool.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>

#include "banditflow/env.hpp"
#include "banditflow/fluid.hpp"

namespace banditflow {

struct DeltaRule {
    enum class Kind { PowerOfLogInv, Explicit };

    Kind kind = Kind::PowerOfLogInv;
    /// p for PowerOfLogInv (d_T = min(1/2, (ln T)^{-p})), d_T itself for Explicit.
    double value = 0.25;

    static DeltaRule power_of_log_inv(double p = 0.25) { return {Kind::PowerOfLogInv, p}; }
    static DeltaRule explicit_value(double delta) { return {Kind::Explicit, delta}; }

    /// Throws DomainError unless the result lies in (0, 1/2].
    double delta_at(double horizon) const;
};

struct StylizedConfig {
    BanditInstance instance;
    ExplorationFunction f = ExplorationFunction::sqrt_rho_log(2.0);
    std::int64_t horizon = 0;
    DeltaRule delta_rule;
    std::uint64_t seed = 0;
    std::uint32_t replication_index = 0;
    /// Replaces the finite-T ratio n*_2/n*_1 in step 3 when set.
    std::optional<double> lambda;
};

struct StylizedSample {
    std::uint32_t replication = 0;
    std::array<double, 2> mu_tilde{};
    /// Step-2 sample means over the first n^d_i rewards.
    std::array<double, 2> first_stage_mean{};
    std::array<std::int64_t, 2> n_tilde{};
    std::array<std::int64_t, 2> n_delta{};
    std::array<double, 2> z_delta{};
    /// N~_2 fell outside [n^d_2, T - n^d_1] and was clamped.
    bool clamped = false;
};

/// Throws ConfigError for anything but a valid two-armed instance with T >= 4.
void validate_stylized_config(const StylizedConfig& config);

/// Precomputed per-configuration quantities shared by all replications.
struct StylizedPlan {
    FluidSolution fluid;
    double delta = 0.0;
    double lambda = 0.0;
    std::array<std::int64_t, 2> n_delta{};
};

StylizedPlan plan_stylized(const StylizedConfig& config);

/// One replication. Arm i draws from stream (seed, replication, i).
StylizedSample stylized_sample(const StylizedConfig& config);
StylizedSample stylized_sample(const StylizedConfig& config, const StylizedPlan& plan);

using StylizedSink = std::function<void(const StylizedSample&)>;

/// Replications 0..replications-1 in replication order, independent of `parallelism`.
void run_stylized_ensemble(const StylizedConfig& config, std::int64_t replications, int parallelism,
                           const StylizedSink& sink);

struct StylizedArmBias {
    double bias = 0.0;
    double se = 0.0;
    double first_stage_bias = 0.0;
    double first_stage_se = 0.0;
};

struct StylizedBiasEstimate {
    std::int64_t count = 0;
    std::array<StylizedArmBias, 2> arms{};
    double clamp_frequency = 0.0;
    double delta = 0.0;
    double lambda = 0.0;
};

/// Ensemble mean of mu~_i - mu_i with 50-group jackknife standard errors.
/// Requires replications >= 1000.
StylizedBiasEstimate stylized_bias_estimate(const StylizedConfig& config, std::int64_t replications,
                                            int parallelism = 1);

/// Same columns as the engine CSV plus a trailing clamped flag.
void write_stylized_csv_row(std::ostream& os, const StylizedConfig& config, const StylizedSample& sample);

} // namespace banditflow
