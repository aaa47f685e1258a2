#pragma once

// Bandit environments, exploration functions and gap parameterizations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "banditflow/rng.hpp"

namespace banditflow {

enum class RewardFamily { Gaussian, Bernoulli };

const char* to_string(RewardFamily family) noexcept;

/// A stochastic K-armed bandit at one horizon. Arms are 0-based in code;
/// arm 0 is the best arm (means sorted non-increasing).
struct BanditInstance {
    RewardFamily family = RewardFamily::Gaussian;
    std::vector<double> means;
    std::vector<double> std_devs;
    /// Uniform bound on the reward standard deviations. 0 means "use max(std_devs)".
    double sigma_bound = 0.0;

    static BanditInstance gaussian(std::vector<double> means, std::vector<double> std_devs);
    /// Standard deviations are derived as sqrt(mu (1 - mu)).
    static BanditInstance bernoulli(std::vector<double> means);

    std::size_t arm_count() const noexcept { return means.size(); }
    /// Gap of arm i to the best arm, mu_0 - mu_i.
    double gap(std::size_t arm) const { return means.at(0) - means.at(arm); }
    double variance(std::size_t arm) const { return std_devs.at(arm) * std_devs.at(arm); }
    double effective_sigma_bound() const noexcept;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

/// Lists every violated invariant of `instance`. Pure; never throws.
ValidationReport validate_instance(const BanditInstance& instance);

/// Throws ConfigError with the first violation if the instance is invalid.
void require_valid(const BanditInstance& instance);

enum class ExplorationKind { SqrtRhoLog, Custom };

/// Exploration function f(t) of the generalized UCB1 index mu + f(t)/sqrt(n).
class ExplorationFunction {
public:
    using Evaluator = std::function<double(double)>;

    /// Canonical UCB, f(t) = sqrt(rho ln t). rho = 2 is UCB1.
    static ExplorationFunction sqrt_rho_log(double rho, double beta = 0.25);
    /// f(t) = scale * (ln t)^exponent.
    static ExplorationFunction log_power(double scale, double exponent, double beta = 0.25);
    static ExplorationFunction custom(std::string name, Evaluator f, double beta);

    /// f(t). Throws DomainError for t < 2.
    double operator()(double t) const;
    /// f(t) without the domain check; used in hot loops.
    double eval_unchecked(double t) const noexcept {
        return kind_ == ExplorationKind::SqrtRhoLog ? std::sqrt(rho_ * std::log(t)) : eval_(t);
    }

    ExplorationKind kind() const noexcept { return kind_; }
    bool is_canonical() const noexcept { return kind_ == ExplorationKind::SqrtRhoLog; }
    /// rho of the canonical form; NaN for custom functions.
    double rho() const noexcept { return rho_; }
    double beta() const noexcept { return beta_; }
    const std::string& name() const noexcept { return name_; }

private:
    ExplorationFunction() = default;

    ExplorationKind kind_ = ExplorationKind::SqrtRhoLog;
    double rho_ = 2.0;
    double beta_ = 0.25;
    std::string name_;
    Evaluator eval_;
};

/// f(t) for integer t >= 2.
double eval_f(const ExplorationFunction& f, std::int64_t t);

/// Finite-grid proxy for the exploration-function assumptions: f increasing on
/// t = 2..grid_max and f(t)/t^beta non-increasing on t = ratio_start..grid_max.
ValidationReport validate_exploration(const ExplorationFunction& f, std::int64_t grid_max = 1'000'000,
                                      std::int64_t ratio_start = 8);

/// How the gap Delta^T of a two-armed experiment depends on the horizon.
struct GapSpec {
    enum class Mode { FixedGap, ModerateTheta, SmallGapZero };

    Mode mode = Mode::SmallGapZero;
    /// Delta for FixedGap, theta for ModerateTheta, unused otherwise.
    double value = 0.0;

    static GapSpec fixed(double delta) { return {Mode::FixedGap, delta}; }
    static GapSpec moderate(double theta) { return {Mode::ModerateTheta, theta}; }
    static GapSpec zero() { return {Mode::SmallGapZero, 0.0}; }
    /// Moderate gap tuned so the fluid solution gives the best arm exactly
    /// `share * T` pulls for every T: theta = 1/sqrt(1 - share) - 1/sqrt(share).
    static GapSpec superior_share(double share);

    /// Delta^T: FixedGap -> Delta, ModerateTheta -> theta f(T)/sqrt(T), SmallGapZero -> 0.
    double delta_at(const ExplorationFunction& f, double horizon) const;
};

const char* to_string(GapSpec::Mode mode) noexcept;

/// Two-armed instance with arm 1 at `base_mean` and arm 0 at base_mean + Delta^T.
BanditInstance two_arm_instance(const GapSpec& gap, const ExplorationFunction& f, double horizon, double base_mean,
                                RewardFamily family, double sigma0, double sigma1);

struct RewardSum {
    double sum = 0.0;
    double sum_sq = 0.0;
};

/// Total of `count` rewards of `arm` drawn from `stream`, plus their sum of squares.
/// Gaussian totals are one Normal(count mu, count sigma^2) draw; the sum of
/// squares adds sigma^2 * chi^2_{count-1} around sum^2/count. Bernoulli totals
/// are Binomial(count, mu).
RewardSum sample_reward(const BanditInstance& instance, std::size_t arm, std::int64_t count, RandomStream& stream);

/// Same law for the total as sample_reward, without the sum of squares. A
/// Gaussian total consumes exactly one normal draw.
double sample_sum(const BanditInstance& instance, std::size_t arm, std::int64_t count, RandomStream& stream);

} // namespace banditflow
