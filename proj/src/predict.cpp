#include "banditflow/predict.hpp"

#include <cmath>

#include "banditflow/error.hpp"
#include "banditflow/moments.hpp"
#include "banditflow/perturb.hpp"
#include "banditflow/rng.hpp"

namespace banditflow {

const char* to_string(LambdaSource source) noexcept {
    return source == LambdaSource::FiniteT ? "finite" : "limit";
}

std::string Coordinate::label() const {
    return (kind == Kind::W ? "W_" : "Z_") + std::to_string(arm + 1);
}

namespace {

Eigen::VectorXd variances_of(const BanditInstance& instance) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(instance.arm_count()));
    for (std::size_t i = 0; i < instance.arm_count(); ++i) v[static_cast<Eigen::Index>(i)] = instance.variance(i);
    return v;
}

void check_match(const FluidSolution& fluid, const BanditInstance& instance) {
    if (fluid.arm_count() != instance.arm_count()) throw DomainError("prediction: fluid and instance arm counts differ");
    if (instance.std_devs.size() != instance.arm_count()) throw DomainError("prediction: std_devs length mismatch");
}

double pow32(double x) { return x * std::sqrt(x); }

} // namespace

CltPrediction clt_two_arm(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                          std::optional<double> lambda_limit) {
    check_match(fluid, instance);
    if (instance.arm_count() != 2) throw DomainError("clt_two_arm: instance must have two arms");
    const double lambda = lambda_limit.value_or(fluid.lambda21());
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("clt_two_arm: lambda must lie in [0, 1]");
    const double v1 = instance.variance(0);
    const double v2 = instance.variance(1);
    const double rl = std::sqrt(lambda);

    CltPrediction p;
    p.form = CltPrediction::Form::TwoArm;
    p.lambda_source = lambda_limit ? LambdaSource::Limit : LambdaSource::FiniteT;
    p.lambda = Eigen::MatrixXd::Constant(1, 1, lambda);
    p.w_scale.resize(1);
    p.w_scale[0] = (1.0 + pow32(lambda)) / 2.0 * f_T / fluid.n_star[1];
    p.z_scale.resize(2);
    p.z_scale << std::sqrt(fluid.n_star[0]), std::sqrt(fluid.n_star[1]);
    p.coordinates = {{Coordinate::Kind::W, 1, p.w_scale[0]},
                     {Coordinate::Kind::Z, 0, p.z_scale[0]},
                     {Coordinate::Kind::Z, 1, p.z_scale[1]}};
    p.cov.resize(3, 3);
    p.cov << lambda * v1 + v2, -v1 * rl, v2,
             -v1 * rl, v1, 0.0,
             v2, 0.0, v2;
    return p;
}

Eigen::MatrixXd k_arm_covariance(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& var) {
    const Eigen::Index k = var.size();
    if (k < 2 || lambda.rows() != k || lambda.cols() != k) throw DomainError("k_arm_covariance: dimension mismatch");

    // Arm 0 is the best arm, arm 1 the reference inferior arm (the "2" in n*_{i v 2}).
    double denom = 1.0;
    double a = 0.0;
    for (Eigen::Index j = 1; j < k; ++j) {
        denom += pow32(lambda(j, 0));
        a += lambda(j, 1) * std::sqrt(lambda(j, 0));
    }
    // c(l, i) = 1{l = i} - lambda_{l1} sqrt(lambda_{i1}) / D
    auto c = [&](Eigen::Index l, Eigen::Index i) {
        return (l == i ? 1.0 : 0.0) - lambda(l, 0) * std::sqrt(lambda(i, 0)) / denom;
    };

    Eigen::MatrixXd s1(k, k);
    Eigen::MatrixXd s12(k, k);
    s12(0, 0) = a / denom * var[0];
    for (Eigen::Index j = 1; j < k; ++j) s12(0, j) = -lambda(j, 1) / denom * var[j];
    for (Eigen::Index i = 1; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) s12(i, j) = c(j, i) * var[j];
    }

    double s11 = (a / denom) * (a / denom) * var[0];
    for (Eigen::Index l = 1; l < k; ++l) s11 += (lambda(l, 1) / denom) * (lambda(l, 1) / denom) * var[l];
    s1(0, 0) = s11;
    for (Eigen::Index i = 1; i < k; ++i) {
        double v = -std::sqrt(lambda(i, 0)) * a / (denom * denom) * var[0];
        for (Eigen::Index l = 1; l < k; ++l) v -= lambda(l, 1) / denom * c(l, i) * var[l];
        s1(0, i) = v;
        s1(i, 0) = v;
    }
    for (Eigen::Index i = 1; i < k; ++i) {
        for (Eigen::Index j = 1; j < k; ++j) {
            double v = 0.0;
            for (Eigen::Index l = 0; l < k; ++l) v += c(l, i) * c(l, j) * var[l];
            s1(i, j) = v;
        }
    }

    Eigen::MatrixXd cov(2 * k, 2 * k);
    cov.topLeftCorner(k, k) = s1;
    cov.topRightCorner(k, k) = s12;
    cov.bottomLeftCorner(k, k) = s12.transpose();
    cov.bottomRightCorner(k, k) = var.asDiagonal();
    return cov;
}

CltPrediction clt_k_arm(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                        const std::optional<Eigen::MatrixXd>& lambda_override) {
    check_match(fluid, instance);
    const std::size_t k = instance.arm_count();
    const auto kk = static_cast<Eigen::Index>(k);

    CltPrediction p;
    p.form = CltPrediction::Form::KArm;
    p.lambda_source = lambda_override ? LambdaSource::Limit : LambdaSource::FiniteT;
    p.lambda = lambda_override.value_or(fluid.lambda);
    p.w_scale.resize(kk);
    p.z_scale.resize(kk);
    for (std::size_t i = 0; i < k; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        p.w_scale[ii] = f_T / (2.0 * fluid.n_star[std::max<std::size_t>(i, 1)]);
        p.z_scale[ii] = std::sqrt(fluid.n_star[i]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        p.coordinates.push_back({Coordinate::Kind::W, i, p.w_scale[static_cast<Eigen::Index>(i)]});
    }
    for (std::size_t i = 0; i < k; ++i) {
        p.coordinates.push_back({Coordinate::Kind::Z, i, p.z_scale[static_cast<Eigen::Index>(i)]});
    }
    p.cov = k_arm_covariance(p.lambda, variances_of(instance));
    return p;
}

Eigen::MatrixXd clt_from_perturbation_mc(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                                         std::int64_t samples, std::uint64_t seed, int shards) {
    check_match(fluid, instance);
    if (samples < 1) throw DomainError("clt_from_perturbation_mc: samples must be positive");
    if (shards < 1) shards = 1;
    const std::size_t k = instance.arm_count();
    const auto kk = static_cast<Eigen::Index>(k);

    // (W, Z) is linear in Z; build the map column by column through the
    // perturbation solution so the hot loop is one matrix-vector product.
    Eigen::MatrixXd map = Eigen::MatrixXd::Zero(2 * kk, kk);
    for (Eigen::Index col = 0; col < kk; ++col) {
        Eigen::VectorXd eps = Eigen::VectorXd::Zero(kk);
        eps[col] = 1.0 / std::sqrt(fluid.n_star[static_cast<std::size_t>(col)]);
        const auto sol = solve_perturbation_ucb(fluid, f_T, eps);
        for (Eigen::Index i = 0; i < kk; ++i) {
            const double n_ref = fluid.n_star[std::max<std::size_t>(static_cast<std::size_t>(i), 1)];
            map(i, col) = f_T / (2.0 * n_ref) * sol.omega[i];
        }
        map(kk + col, col) = 1.0;
    }

    const Eigen::VectorXd sd = variances_of(instance).cwiseSqrt();
    CovarianceAccumulator total(2 * kk);
    Eigen::VectorXd z(kk);
    Eigen::VectorXd y(2 * kk);
    for (int s = 0; s < shards; ++s) {
        const std::int64_t n = samples / shards + (s < samples % shards ? 1 : 0);
        RandomStream stream(seed, static_cast<std::uint32_t>(s), kAuxStreamBase);
        CovarianceAccumulator acc(2 * kk);
        for (std::int64_t m = 0; m < n; ++m) {
            for (Eigen::Index i = 0; i < kk; ++i) z[i] = sd[i] * stream.normal();
            y.noalias() = map * z;
            acc.add(y);
        }
        total.merge(acc);
    }
    return total.covariance();
}

RegretPrediction regret_prediction(const FluidSolution& fluid, const BanditInstance& instance, double f_T,
                                   std::optional<double> lambda_limit) {
    check_match(fluid, instance);
    if (instance.arm_count() != 2) throw DomainError("regret_prediction: instance must have two arms");
    const double delta = instance.gap(1);
    if (delta < 0.0) throw DomainError("regret_prediction: negative gap");
    RegretPrediction r;
    r.lambda = lambda_limit.value_or(fluid.lambda21());
    r.delta = delta;
    r.typical_scale = fluid.n_star[1] * delta;
    const double v = r.lambda * instance.variance(0) + instance.variance(1);
    const double l32 = pow32(r.lambda);
    r.typical_deviation = std::sqrt(2.0 * v) / std::sqrt(1.0 + l32) * r.typical_scale / f_T;
    r.clt_implied_sd = 2.0 * std::sqrt(v) / (1.0 + l32) * r.typical_scale / f_T;
    return r;
}

BiasPrediction bias_prediction(const FluidSolution& fluid, const BanditInstance& instance,
                               const ExplorationFunction& f, double horizon, const RegimeLabel& regime,
                               std::optional<double> lambda_limit) {
    if (!f.is_canonical()) {
        throw UnsupportedConfiguration("bias_prediction: only canonical UCB, f(t) = sqrt(rho ln t), is supported");
    }
    if (instance.arm_count() != 2) throw UnsupportedConfiguration("bias_prediction: two-armed instances only");
    check_match(fluid, instance);

    const double rho = f.rho();
    const double log_t = std::log(horizon);
    const double lambda = lambda_limit.value_or(fluid.lambda21());
    const double l32 = pow32(lambda);
    const double v1 = instance.variance(0);
    const double v2 = instance.variance(1);

    BiasPrediction out;
    out.regime = regime;
    out.rho = rho;
    out.lambda = lambda;
    out.horizon = horizon;
    out.arms.resize(2);

    ArmBias& best = out.arms[0];
    ArmBias& inferior = out.arms[1];
    inferior.bias = -2.0 * v2 / ((1.0 + l32) * std::sqrt(rho * fluid.n_star[1] * log_t));
    // 1 + lambda^{-3/2} diverges at lambda = 0: no bias at this order.
    best.bias = lambda > 0.0 ? -2.0 * v1 / ((1.0 + 1.0 / l32) * std::sqrt(rho * fluid.n_star[0] * log_t)) : 0.0;

    if (regime.kind == RegimeLabel::Kind::LargeGap) {
        inferior.scale = log_t;
        inferior.scale_label = "log T";
        inferior.scaled_constant = -2.0 * v2 * instance.gap(1) / rho;
    } else {
        const double root_tlog = std::sqrt(horizon * log_t);
        const double num = 2.0 * std::sqrt(1.0 + lambda) / std::sqrt(rho);
        inferior.scale = root_tlog;
        inferior.scale_label = "sqrt(T log T)";
        inferior.scaled_constant = -v2 * num / (std::sqrt(lambda) + lambda * lambda);
        best.scale = root_tlog;
        best.scale_label = "sqrt(T log T)";
        best.scaled_constant = -v1 * num / (1.0 + 1.0 / l32);
    }
    return out;
}

} // namespace banditflow
