#include "banditflow/stylized.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "banditflow/engine.hpp"
#include "banditflow/error.hpp"
#include "banditflow/stats.hpp"

namespace banditflow {

double DeltaRule::delta_at(double horizon) const {
    // The power rule exceeds 1/2 below ln T = 2^{1/p}; it is capped there.
    const double d = kind == Kind::Explicit ? value : std::min(0.5, std::pow(std::log(horizon), -value));
    if (!(d > 0.0 && d <= 0.5)) throw DomainError("delta rule: delta_T must lie in (0, 1/2]");
    return d;
}

void validate_stylized_config(const StylizedConfig& config) {
    const auto report = validate_instance(config.instance);
    if (!report.ok()) throw ConfigError("instance", report.violations.front());
    if (config.instance.arm_count() != 2) throw ConfigError("instance", "stylized model needs exactly two arms");
    if (config.horizon < 4) throw ConfigError("T", "horizon must be at least 4");
    if (config.horizon > kMaxHorizon) throw ConfigError("T", "horizon exceeds 2^53");
    if (config.delta_rule.kind == DeltaRule::Kind::PowerOfLogInv &&
        !(config.delta_rule.value > 0.0 && config.delta_rule.value < 1.0)) {
        throw ConfigError("delta_rule.p", "must lie in (0, 1)");
    }
    if (config.lambda && !(*config.lambda >= 0.0 && *config.lambda <= 1.0)) {
        throw ConfigError("lambda", "must lie in [0, 1]");
    }
}

StylizedPlan plan_stylized(const StylizedConfig& config) {
    validate_stylized_config(config);
    StylizedPlan plan;
    const double horizon = static_cast<double>(config.horizon);
    plan.fluid = solve_fluid(config.instance, config.f, horizon);
    plan.delta = config.delta_rule.delta_at(horizon);
    plan.lambda = config.lambda.value_or(plan.fluid.lambda21());
    for (std::size_t i = 0; i < 2; ++i) {
        const double nd = std::nearbyint((1.0 - plan.delta) * plan.fluid.n_star[i]);
        plan.n_delta[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(nd));
    }
    return plan;
}

StylizedSample stylized_sample(const StylizedConfig& config) { return stylized_sample(config, plan_stylized(config)); }

StylizedSample stylized_sample(const StylizedConfig& config, const StylizedPlan& plan) {
    const BanditInstance& inst = config.instance;
    const bool gaussian = inst.family == RewardFamily::Gaussian;
    const std::int64_t horizon = config.horizon;
    StylizedSample s;
    s.replication = config.replication_index;
    s.n_delta = plan.n_delta;

    std::array<RandomStream, 2> streams{RandomStream(config.seed, config.replication_index, 0),
                                        RandomStream(config.seed, config.replication_index, 1)};
    // Gaussian draws are tracked as deviations from mu so a noiseless arm returns mu exactly.
    std::array<double, 2> first_dev{};
    for (std::size_t i = 0; i < 2; ++i) {
        const auto n = static_cast<double>(s.n_delta[i]);
        if (gaussian) {
            first_dev[i] = std::sqrt(n) * inst.std_devs[i] * streams[i].normal();
        } else {
            first_dev[i] = sample_sum(inst, i, s.n_delta[i], streams[i]) - n * inst.means[i];
        }
        s.first_stage_mean[i] = inst.means[i] + first_dev[i] / n;
        s.z_delta[i] = first_dev[i] / std::sqrt(n);
    }

    const double l = plan.lambda;
    const double f_T = plan.fluid.f_T;
    const double n2 = plan.fluid.n_star[1] *
                      (1.0 + 2.0 * (s.z_delta[1] - s.z_delta[0] * std::sqrt(l)) / ((1.0 + l * std::sqrt(l)) * f_T));
    const double lo = static_cast<double>(s.n_delta[1]);
    const double hi = static_cast<double>(horizon - s.n_delta[0]);
    double rounded = std::nearbyint(n2);
    if (!(rounded >= lo && rounded <= hi)) {
        s.clamped = true;
        rounded = std::isnan(rounded) ? lo : std::clamp(rounded, lo, hi);
    }
    s.n_tilde[1] = static_cast<std::int64_t>(rounded);
    s.n_tilde[0] = horizon - s.n_tilde[1];

    for (std::size_t i = 0; i < 2; ++i) {
        const std::int64_t extra = s.n_tilde[i] - s.n_delta[i];
        double dev = first_dev[i];
        if (extra > 0) {
            const auto e = static_cast<double>(extra);
            if (gaussian) {
                dev += std::sqrt(e) * inst.std_devs[i] * streams[i].normal();
            } else {
                dev += sample_sum(inst, i, extra, streams[i]) - e * inst.means[i];
            }
        }
        s.mu_tilde[i] = inst.means[i] + dev / static_cast<double>(s.n_tilde[i]);
    }
    return s;
}

void run_stylized_ensemble(const StylizedConfig& config, std::int64_t replications, int parallelism,
                           const StylizedSink& sink) {
    if (replications < 1) throw ConfigError("replications", "must be at least 1");
    const StylizedPlan plan = plan_stylized(config);
    const std::int64_t chunk = std::max<std::int64_t>(1024, 64 * std::max(1, parallelism));
    std::vector<StylizedSample> slots(static_cast<std::size_t>(std::min(chunk, replications)));
    ordered_parallel_for(
        replications, parallelism, chunk,
        [&](std::int64_t r) {
            StylizedConfig c = config;
            c.replication_index = static_cast<std::uint32_t>(r);
            slots[static_cast<std::size_t>(r % chunk)] = stylized_sample(c, plan);
        },
        [&](std::int64_t r) { sink(slots[static_cast<std::size_t>(r % chunk)]); });
}

StylizedBiasEstimate stylized_bias_estimate(const StylizedConfig& config, std::int64_t replications,
                                            int parallelism) {
    if (replications < 1000) throw ConfigError("replications", "bias estimation needs at least 1000 replications");
    const StylizedPlan plan = plan_stylized(config);
    GroupedMoments moments(4);
    std::int64_t clamped = 0;
    Eigen::VectorXd row(4);
    run_stylized_ensemble(config, replications, parallelism, [&](const StylizedSample& s) {
        for (std::size_t i = 0; i < 2; ++i) {
            row[static_cast<Eigen::Index>(i)] = s.mu_tilde[i] - config.instance.means[i];
            row[static_cast<Eigen::Index>(2 + i)] = s.first_stage_mean[i] - config.instance.means[i];
        }
        moments.add(s.replication, row);
        if (s.clamped) ++clamped;
    });
    const MeanEstimate est = moments.mean_estimate();
    StylizedBiasEstimate out;
    out.count = replications;
    out.delta = plan.delta;
    out.lambda = plan.lambda;
    out.clamp_frequency = static_cast<double>(clamped) / static_cast<double>(replications);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.arms[i] = {est.mean[ii], est.se[ii], est.mean[2 + ii], est.se[2 + ii]};
    }
    return out;
}

void write_stylized_csv_row(std::ostream& os, const StylizedConfig& config, const StylizedSample& s) {
    os << s.replication << ',' << config.seed << ',' << config.horizon << ",stylized";
    for (auto n : s.n_tilde) os << ',' << n;
    for (double m : s.mu_tilde) os << ',' << format_double(m);
    const double regret = config.instance.gap(1) * static_cast<double>(s.n_tilde[1]);
    os << ',' << format_double(regret) << ',' << (s.clamped ? 1 : 0) << '\n';
}

} // namespace banditflow
