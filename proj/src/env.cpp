#include "banditflow/env.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "banditflow/error.hpp"

namespace banditflow {

const char* to_string(RewardFamily family) noexcept {
    switch (family) {
    case RewardFamily::Gaussian: return "gaussian";
    case RewardFamily::Bernoulli: return "bernoulli";
    }
    return "?";
}

BanditInstance BanditInstance::gaussian(std::vector<double> means, std::vector<double> std_devs) {
    BanditInstance inst;
    inst.family = RewardFamily::Gaussian;
    inst.means = std::move(means);
    inst.std_devs = std::move(std_devs);
    return inst;
}

BanditInstance BanditInstance::bernoulli(std::vector<double> means) {
    BanditInstance inst;
    inst.family = RewardFamily::Bernoulli;
    inst.means = std::move(means);
    inst.std_devs.reserve(inst.means.size());
    for (double m : inst.means) {
        const double v = m * (1.0 - m);
        inst.std_devs.push_back(v > 0.0 ? std::sqrt(v) : 0.0);
    }
    return inst;
}

double BanditInstance::effective_sigma_bound() const noexcept {
    if (sigma_bound > 0.0) return sigma_bound;
    double s = 0.0;
    for (double sd : std_devs) s = std::max(s, sd);
    return s;
}

ValidationReport validate_instance(const BanditInstance& instance) {
    ValidationReport report;
    auto& v = report.violations;
    const std::size_t k = instance.means.size();
    if (k < 2) v.emplace_back("arm count below 2");
    if (instance.std_devs.size() != k) v.emplace_back("std_devs length differs from means length");
    for (std::size_t i = 0; i < k; ++i) {
        if (!std::isfinite(instance.means[i])) {
            std::ostringstream os;
            os << "mean of arm " << i + 1 << " not finite";
            v.push_back(os.str());
        }
    }
    for (std::size_t i = 1; i < k; ++i) {
        if (instance.means[i] > instance.means[i - 1]) {
            v.emplace_back("means not sorted");
            break;
        }
    }
    if (instance.family == RewardFamily::Bernoulli) {
        for (std::size_t i = 0; i < k; ++i) {
            if (!(instance.means[i] >= 0.0 && instance.means[i] <= 1.0)) {
                v.emplace_back("bernoulli mean outside [0, 1]");
                break;
            }
        }
        for (std::size_t i = 0; i < std::min(k, instance.std_devs.size()); ++i) {
            const double expect = std::sqrt(std::max(0.0, instance.means[i] * (1.0 - instance.means[i])));
            if (std::fabs(instance.std_devs[i] - expect) > 1e-12) {
                v.emplace_back("bernoulli std_dev not equal to sqrt(mu (1 - mu))");
                break;
            }
        }
    }
    for (double sd : instance.std_devs) {
        // sd = 0 is a deterministic arm (Bernoulli at mu in {0, 1}, or noiseless Gaussian).
        if (!(sd >= 0.0) || !std::isfinite(sd)) {
            v.emplace_back("std_dev negative or not finite");
            break;
        }
    }
    if (instance.sigma_bound > 0.0) {
        for (double sd : instance.std_devs) {
            if (sd > instance.sigma_bound) {
                v.emplace_back("std_dev exceeds declared bound");
                break;
            }
        }
    } else if (instance.sigma_bound < 0.0) {
        v.emplace_back("negative sigma bound");
    }
    return report;
}

void require_valid(const BanditInstance& instance) {
    const auto report = validate_instance(instance);
    if (!report.ok()) throw ConfigError("instance", report.violations.front());
}

ExplorationFunction ExplorationFunction::sqrt_rho_log(double rho, double beta) {
    if (!(rho > 0.0)) throw DomainError("sqrt_rho_log: rho must be positive");
    ExplorationFunction f;
    f.kind_ = ExplorationKind::SqrtRhoLog;
    f.rho_ = rho;
    f.beta_ = beta;
    std::ostringstream os;
    os << "sqrt(" << rho << " ln t)";
    f.name_ = os.str();
    return f;
}

ExplorationFunction ExplorationFunction::log_power(double scale, double exponent, double beta) {
    if (!(scale > 0.0)) throw DomainError("log_power: scale must be positive");
    std::ostringstream os;
    os << scale << " (ln t)^" << exponent;
    return custom(os.str(), [scale, exponent](double t) { return scale * std::pow(std::log(t), exponent); }, beta);
}

ExplorationFunction ExplorationFunction::custom(std::string name, Evaluator f, double beta) {
    if (!f) throw DomainError("custom exploration function needs an evaluator");
    ExplorationFunction out;
    out.kind_ = ExplorationKind::Custom;
    out.rho_ = std::numeric_limits<double>::quiet_NaN();
    out.beta_ = beta;
    out.name_ = std::move(name);
    out.eval_ = std::move(f);
    return out;
}

double ExplorationFunction::operator()(double t) const {
    if (!(t >= 2.0)) throw DomainError("exploration function evaluated at t < 2");
    return eval_unchecked(t);
}

double eval_f(const ExplorationFunction& f, std::int64_t t) {
    if (t < 2) throw DomainError("eval_f: t must be at least 2");
    return f.eval_unchecked(static_cast<double>(t));
}

ValidationReport validate_exploration(const ExplorationFunction& f, std::int64_t grid_max, std::int64_t ratio_start) {
    ValidationReport report;
    if (!(f.beta() >= 0.0 && f.beta() < 0.5)) report.violations.emplace_back("beta outside [0, 1/2)");
    if (f.is_canonical() && !(f.rho() > 0.0)) report.violations.emplace_back("rho not positive");

    double prev = f.eval_unchecked(2.0);
    if (!(prev > 0.0)) report.violations.emplace_back("f(2) not positive");
    bool monotone = true;
    bool ratio_ok = true;
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (std::int64_t t = 2; t <= grid_max; ++t) {
        const double td = static_cast<double>(t);
        const double ft = f.eval_unchecked(td);
        if (t > 2 && ft < prev) monotone = false;
        prev = ft;
        if (t >= ratio_start) {
            const double ratio = ft / std::pow(td, f.beta());
            // Relative slack absorbs rounding where the ratio is flat.
            if (ratio > prev_ratio * (1.0 + 1e-13)) ratio_ok = false;
            prev_ratio = ratio;
        }
    }
    if (!monotone) report.violations.emplace_back("f not monotone increasing on grid");
    if (!ratio_ok) report.violations.emplace_back("f(t)/t^beta not non-increasing on grid");
    return report;
}

GapSpec GapSpec::superior_share(double share) {
    if (!(share >= 0.5 && share < 1.0)) throw DomainError("superior_share: share must lie in [1/2, 1)");
    return moderate(1.0 / std::sqrt(1.0 - share) - 1.0 / std::sqrt(share));
}

double GapSpec::delta_at(const ExplorationFunction& f, double horizon) const {
    switch (mode) {
    case Mode::FixedGap: return value;
    case Mode::ModerateTheta: return value * f(horizon) / std::sqrt(horizon);
    case Mode::SmallGapZero: return 0.0;
    }
    return 0.0;
}

const char* to_string(GapSpec::Mode mode) noexcept {
    switch (mode) {
    case GapSpec::Mode::FixedGap: return "fixed";
    case GapSpec::Mode::ModerateTheta: return "moderate_theta";
    case GapSpec::Mode::SmallGapZero: return "small_zero";
    }
    return "?";
}

BanditInstance two_arm_instance(const GapSpec& gap, const ExplorationFunction& f, double horizon, double base_mean,
                                RewardFamily family, double sigma0, double sigma1) {
    const double delta = gap.delta_at(f, horizon);
    if (family == RewardFamily::Bernoulli) return BanditInstance::bernoulli({base_mean + delta, base_mean});
    return BanditInstance::gaussian({base_mean + delta, base_mean}, {sigma0, sigma1});
}

namespace {

void check_arm(const BanditInstance& instance, std::size_t arm, std::int64_t count) {
    if (arm >= instance.arm_count() || arm >= instance.std_devs.size()) {
        std::ostringstream os;
        os << "invalid arm index " << arm << " for " << instance.arm_count() << "-armed instance";
        throw std::out_of_range(os.str());
    }
    if (count < 1) throw DomainError("reward batch count must be at least 1");
}

std::int64_t binomial_draw(std::int64_t count, double p, RandomStream& stream) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return count;
    std::binomial_distribution<std::int64_t> dist(count, p);
    return dist(stream);
}

} // namespace

double sample_sum(const BanditInstance& instance, std::size_t arm, std::int64_t count, RandomStream& stream) {
    check_arm(instance, arm, count);
    const double n = static_cast<double>(count);
    if (instance.family == RewardFamily::Gaussian) {
        return n * instance.means[arm] + std::sqrt(n) * instance.std_devs[arm] * stream.normal();
    }
    return static_cast<double>(binomial_draw(count, instance.means[arm], stream));
}

RewardSum sample_reward(const BanditInstance& instance, std::size_t arm, std::int64_t count, RandomStream& stream) {
    check_arm(instance, arm, count);
    RewardSum out;
    if (instance.family == RewardFamily::Bernoulli) {
        out.sum = static_cast<double>(binomial_draw(count, instance.means[arm], stream));
        out.sum_sq = out.sum;
        return out;
    }
    out.sum = sample_sum(instance, arm, count, stream);
    const double n = static_cast<double>(count);
    out.sum_sq = out.sum * out.sum / n;
    if (count > 1) {
        const double var = instance.variance(arm);
        std::gamma_distribution<double> chi_sq(0.5 * (n - 1.0), 2.0);
        out.sum_sq += var * chi_sq(stream);
    }
    return out;
}

} // namespace banditflow
