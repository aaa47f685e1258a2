#include "banditflow/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "banditflow/error.hpp"

namespace banditflow {

const char* to_string(RegimeLabel::Kind kind) noexcept {
    switch (kind) {
    case RegimeLabel::Kind::LargeGap: return "large";
    case RegimeLabel::Kind::ModerateGap: return "moderate";
    case RegimeLabel::Kind::SmallGap: return "small";
    }
    return "?";
}

namespace {

// g(x) = sum_i (x + d_i)^{-2}; strictly decreasing on x > 0.
struct PullSum {
    std::span<const double> d;

    double value(double x) const noexcept {
        double s = 0.0;
        double c = 0.0;
        for (double di : d) {
            const double u = x + di;
            const double term = 1.0 / (u * u);
            // Neumaier summation: terms span many orders of magnitude in the large-gap regime.
            const double t = s + term;
            c += std::fabs(s) >= std::fabs(term) ? (s - t) + term : (term - t) + s;
            s = t;
        }
        return s + c;
    }

    double derivative(double x) const noexcept {
        double s = 0.0;
        for (double di : d) {
            const double u = x + di;
            s -= 2.0 / (u * u * u);
        }
        return s;
    }
};

RegimeLabel single_horizon_label(double ratio, double large_cut) {
    RegimeLabel label;
    label.finite_ratio = ratio;
    if (ratio == 0.0) {
        label.kind = RegimeLabel::Kind::SmallGap;
    } else if (ratio > large_cut) {
        label.kind = RegimeLabel::Kind::LargeGap;
    } else {
        label.kind = RegimeLabel::Kind::ModerateGap;
        label.theta = ratio;
    }
    return label;
}

} // namespace

FluidSolution solve_fluid_scaled(std::span<const double> scaled_gaps, double horizon, double f_T,
                                 const FluidOptions& options) {
    const std::size_t k = scaled_gaps.size();
    if (k < 2) throw DomainError("solve_fluid: need at least two arms");
    if (!(horizon >= static_cast<double>(k))) throw DomainError("solve_fluid: horizon must be at least K");
    if (!(f_T > 0.0) || !std::isfinite(f_T)) throw DomainError("solve_fluid: f(T) must be positive and finite");
    if (scaled_gaps[0] != 0.0) throw DomainError("solve_fluid: the best arm has zero gap");
    for (double d : scaled_gaps) {
        if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("solve_fluid: gaps must be finite and non-negative");
    }

    const PullSum g{scaled_gaps};
    const double root_t = std::sqrt(horizon);
    double lo = 1e-3 / root_t;
    double hi = std::sqrt(static_cast<double>(k)) * 1e3 / root_t;
    for (int widen = 0; g.value(lo) < horizon; ++widen) {
        if (widen > 200) throw SolverError("solve_fluid: cannot bracket root from below");
        lo *= 1e-3;
    }
    for (int widen = 0; g.value(hi) > horizon; ++widen) {
        if (widen > 200) throw SolverError("solve_fluid: cannot bracket root from above");
        hi *= 1e3;
    }

    int steps = 0;
    while (hi / lo - 1.0 > 1e-9) {
        if (++steps > options.max_bisection_steps) {
            std::ostringstream os;
            os.precision(17);
            os << "solve_fluid: bisection did not converge, bracket [" << lo << ", " << hi << "]";
            throw SolverError(os.str());
        }
        const double mid = std::sqrt(lo * hi);
        if (g.value(mid) > horizon) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    double x = std::sqrt(lo * hi);
    for (int i = 0; i < options.max_newton_steps; ++i) {
        const double step = (g.value(x) - horizon) / g.derivative(x);
        const double next = x - step;
        if (!(next > 0.0)) break;
        x = next;
        if (std::fabs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
    }

    FluidSolution sol;
    sol.horizon = horizon;
    sol.f_T = f_T;
    sol.n_star.resize(k);
    sol.residuals.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double u = x + scaled_gaps[i];
        sol.n_star[i] = 1.0 / (u * u);
    }
    const double inv_root_best = 1.0 / std::sqrt(sol.n_star[0]);
    for (std::size_t i = 1; i < k; ++i) {
        sol.residuals[i] = 1.0 / std::sqrt(sol.n_star[i]) - inv_root_best - scaled_gaps[i];
    }
    double total = 0.0;
    for (double n : sol.n_star) total += n;
    sol.sum_residual = total - horizon;
    if (!(std::fabs(sol.sum_residual) <= 1e-9 * horizon)) {
        std::ostringstream os;
        os.precision(17);
        os << "solve_fluid: conservation residual " << sol.sum_residual << " at x = " << x;
        throw SolverError(os.str());
    }

    sol.lambda.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            sol.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sol.n_star[i] / sol.n_star[j];
        }
    }
    sol.regime.resize(k);
    for (std::size_t i = 1; i < k; ++i) {
        sol.regime[i] = single_horizon_label(scaled_gaps[i] * root_t, options.large_gap_ratio);
    }
    return sol;
}

FluidSolution solve_fluid(const BanditInstance& instance, const ExplorationFunction& f, double horizon,
                          const FluidOptions& options) {
    require_valid(instance);
    const double f_T = f(horizon);
    std::vector<double> d(instance.arm_count());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = instance.gap(i) / f_T;
    return solve_fluid_scaled(d, horizon, f_T, options);
}

double theta_for_lambda(double lambda) {
    if (!(lambda > 0.0)) throw DomainError("theta_for_lambda: lambda must be positive");
    return std::sqrt(1.0 + 1.0 / lambda) - std::sqrt(1.0 + lambda);
}

double lambda_star_limit(const GapSpec& spec) {
    switch (spec.mode) {
    case GapSpec::Mode::SmallGapZero: return 1.0;
    case GapSpec::Mode::FixedGap:
        if (spec.value < 0.0) throw DomainError("lambda_star_limit: gap must be non-negative");
        return spec.value > 0.0 ? 0.0 : 1.0;
    case GapSpec::Mode::ModerateTheta: break;
    }
    const double theta = spec.value;
    if (!(theta >= 0.0)) throw DomainError("lambda_star_limit: theta must be non-negative");
    if (theta == 0.0) return 1.0;
    // h(lambda) = sqrt(1 + 1/lambda) - sqrt(1 + lambda) - theta decreases on (0, 1];
    // h(1) = -theta < 0 and h(1/(theta+2)^2) > 0.
    double lo = 1.0 / ((theta + 2.0) * (theta + 2.0));
    double hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (theta_for_lambda(mid) > theta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

RegimeLabel classify_ratio_series(std::span<const double> horizons, std::span<const double> ratios) {
    if (horizons.size() != ratios.size() || horizons.size() < 2) {
        throw DomainError("classify_regime: need at least two horizons with matching ratios");
    }
    std::size_t first = 0;
    std::size_t last = 0;
    for (std::size_t i = 1; i < horizons.size(); ++i) {
        if (horizons[i] < horizons[first]) first = i;
        if (horizons[i] > horizons[last]) last = i;
    }
    if (!(horizons[last] > horizons[first])) throw DomainError("classify_regime: horizons must not all be equal");

    RegimeLabel label;
    label.finite_ratio = ratios[last];
    const bool all_zero = std::all_of(ratios.begin(), ratios.end(), [](double r) { return r == 0.0; });
    if (all_zero) {
        label.kind = RegimeLabel::Kind::SmallGap;
        return label;
    }
    const double decades = std::log10(horizons[last] / horizons[first]);
    const double cut = 0.05 * decades;
    if (ratios[first] == 0.0) {
        label.kind = RegimeLabel::Kind::LargeGap;
        return label;
    }
    if (ratios[last] == 0.0) {
        label.kind = RegimeLabel::Kind::SmallGap;
        return label;
    }
    const double growth = std::log10(ratios[last] / ratios[first]);
    if (growth > cut) {
        label.kind = RegimeLabel::Kind::LargeGap;
    } else if (growth < -cut) {
        label.kind = RegimeLabel::Kind::SmallGap;
    } else {
        label.kind = RegimeLabel::Kind::ModerateGap;
        label.theta = ratios[last];
    }
    return label;
}

RegimeClassification classify_regime(const GapSpec& spec, const ExplorationFunction& f,
                                     std::span<const double> horizons) {
    RegimeClassification out;
    out.horizons.assign(horizons.begin(), horizons.end());
    out.ratios.reserve(horizons.size());
    for (double t : horizons) out.ratios.push_back(spec.delta_at(f, t) * std::sqrt(t) / f(t));
    out.label = classify_ratio_series(out.horizons, out.ratios);
    return out;
}

} // namespace banditflow
