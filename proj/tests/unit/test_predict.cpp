#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "banditflow/error.hpp"
#include "banditflow/predict.hpp"

using namespace banditflow;

namespace {

bool is_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, m.trace());
}


FluidSolution random_fluid(std::mt19937_64& rng, int k, double T, double fT) {
    std::uniform_real_distribution<double> gap(0.0, 3.0);
    std::vector<double> scaled{0.0};
    for (int i = 1; i < k; ++i) scaled.push_back(gap(rng) * fT / std::sqrt(T) / fT);
    std::sort(scaled.begin(), scaled.end());
    return solve_fluid_scaled(scaled, T, fT);
}

BanditInstance instance_with(const std::vector<double>& sd) {
    std::vector<double> means(sd.size(), 0.0);
    return BanditInstance::gaussian(means, sd);
}

} // namespace

TEST_CASE("two-arm matrix at lambda = 1 and lambda = 0") {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    const auto inst = BanditInstance::gaussian({0, 0}, {1, 1});
    const auto fluid = solve_fluid(inst, f, 1e5);
    const auto p = clt_two_arm(fluid, inst, fluid.f_T);
    Eigen::MatrixXd expect(3, 3);
    expect << 2, -1, 1, -1, 1, 0, 1, 0, 1;
    CHECK((p.cov - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.coordinates[0].label() == "W_2");
    CHECK(p.coordinates[2].label() == "Z_2");

    const auto inst2 = BanditInstance::gaussian({1, 0}, {0.5, 2.0});
    const auto p0 = clt_two_arm(solve_fluid(inst2, f, 1e5), inst2, f(1e5), 0.0);
    Eigen::MatrixXd e0(3, 3);
    e0 << 4, 0, 4, 0, 0.25, 0, 4, 0, 4;
    CHECK((p0.cov - e0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p0.lambda_source == LambdaSource::Limit);
}

TEST_CASE("two-arm covariance is PSD on a lambda grid") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> sd(0.1, 3.0);
    for (int i = 0; i <= 10; ++i) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto inst = BanditInstance::gaussian({0, 0}, {sd(rng), sd(rng)});
            const auto fluid = solve_fluid(inst, ExplorationFunction::sqrt_rho_log(2.0), 1e4);
            CHECK(is_psd(clt_two_arm(fluid, inst, fluid.f_T, i / 10.0).cov));
        }
    }
}

TEST_CASE("K-arm covariance is PSD with an exact Z block") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> sd(0.1, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 7;
        const auto fluid = random_fluid(rng, k, 1e6, 4.0);
        std::vector<double> s;
        for (int i = 0; i < k; ++i) s.push_back(sd(rng));
        const auto p = clt_k_arm(fluid, instance_with(s), 4.0);
        CHECK((p.cov - p.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(is_psd(p.cov));
        Eigen::MatrixXd z = p.cov.bottomRightCorner(k, k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) CHECK(z(i, j) == (i == j ? s[i] * s[i] : 0.0));
        }
    }
}

TEST_CASE("separated superior arm") {
    // lambda_{k1} = 0; the inferior-inferior ratios follow the fluid, (Delta_2/Delta_k)^2.
    const int k = 4;
    const std::vector<double> gaps{0.0, 1.0, 1.5, 3.0};
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(k, k);
    lambda(0, 0) = 1;
    for (int i = 1; i < k; ++i) {
        for (int j = 1; j < k; ++j) lambda(i, j) = std::pow(gaps[j] / gaps[i], 2);
    }
    Eigen::VectorXd var(k);
    var << 1.0, 0.5, 2.0, 3.0;
    const auto cov = k_arm_covariance(lambda, var);
    const Eigen::MatrixXd w = cov.block(1, 1, k - 1, k - 1);
    const Eigen::MatrixXd x = cov.block(1, k + 1, k - 1, k - 1);
    const Eigen::MatrixXd diag = var.tail(k - 1).asDiagonal();
    CHECK((w - diag).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((x - diag).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("indistinguishable arms") {
    for (int k = 2; k <= 6; ++k) {
        const Eigen::MatrixXd lambda = Eigen::MatrixXd::Ones(k, k);
        Eigen::VectorXd var = Eigen::VectorXd::LinSpaced(k, 0.5, 2.5);
        const auto cov = k_arm_covariance(lambda, var);
        for (int i = 0; i < k; ++i) {
            double expect = (1.0 - 1.0 / k) * (1.0 - 1.0 / k) * var[i];
            for (int j = 0; j < k; ++j) {
                if (j != i) expect += var[j] / (k * k);
            }
            CHECK(cov(i, i) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
}

TEST_CASE("K = 2 reduction agrees on the raw scale") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> sd(0.2, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto fluid = random_fluid(rng, 2, 1e7, 5.0);
        const auto inst = instance_with({sd(rng), sd(rng)});
        const auto two = clt_two_arm(fluid, inst, 5.0);
        const auto kk = clt_k_arm(fluid, inst, 5.0);
        // Map both onto (N_2 - n_2, Z_1, Z_2) before comparing.
        const Eigen::Vector3d s2(1.0 / two.w_scale[0], 1.0, 1.0);
        const Eigen::Vector3d sk(1.0 / kk.w_scale[1], 1.0, 1.0);
        const int idx[3] = {1, 2, 3};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double a = two.cov(i, j) * s2[i] * s2[j];
                const double b = kk.cov(idx[i], idx[j]) * sk[i] * sk[j];
                CHECK(a == doctest::Approx(b).epsilon(1e-12).scale(std::fabs(a) + 1e-300));
            }
        }
    }
}

TEST_CASE("Monte-Carlo oracle") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> sd(0.5, 1.5);
    const auto fluid = random_fluid(rng, 3, 1e6, 4.0);
    const auto inst = instance_with({sd(rng), sd(rng), sd(rng)});
    const auto p = clt_k_arm(fluid, inst, 4.0);
    const auto mc = clt_from_perturbation_mc(fluid, inst, 4.0, 200000, 5, 4);
    const double scale = p.cov.cwiseAbs().maxCoeff();
    CHECK((mc - p.cov).cwiseAbs().maxCoeff() < 0.03 * scale);

    const auto zero = clt_from_perturbation_mc(fluid, instance_with({0.0, 0.0, 0.0}), 4.0, 10000, 5);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

    // Shard count changes only the grouping, not the samples' law; same shards reproduce exactly.
    CHECK(clt_from_perturbation_mc(fluid, inst, 4.0, 5000, 9, 3) == clt_from_perturbation_mc(fluid, inst, 4.0, 5000, 9, 3));
}

TEST_CASE("Monte-Carlo oracle reproduces the identical-arms matrix") {
    const auto inst = BanditInstance::gaussian({0, 0}, {1, 1});
    const auto fluid = solve_fluid(inst, ExplorationFunction::sqrt_rho_log(2.0), 1e5);
    const auto mc = clt_from_perturbation_mc(fluid, inst, fluid.f_T, 400000, 1);
    // K-arm W_2 uses f/(2 n_2); the two-arm form uses (1 + l^{3/2}) f/(2 n_2), i.e. twice that at l = 1.
    const int idx[3] = {1, 2, 3};
    const double g[3] = {2.0, 1.0, 1.0};
    Eigen::MatrixXd expect(3, 3);
    expect << 2, -1, 1, -1, 1, 0, 1, 0, 1;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(std::fabs(mc(idx[i], idx[j]) * g[i] * g[j] - expect(i, j)) < 0.02);
    }
}

TEST_CASE("regret prediction") {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    const auto zero = BanditInstance::gaussian({0, 0}, {1, 1});
    const auto r0 = regret_prediction(solve_fluid(zero, f, 1e6), zero, f(1e6));
    CHECK(r0.typical_scale == 0.0);
    CHECK(r0.typical_deviation == 0.0);
    CHECK(r0.clt_implied_sd == 0.0);

    const auto gap = BanditInstance::gaussian({0.5, 0}, {1, 1});
    double prev_err = INFINITY;
    for (double T : {1e4, 1e6, 1e8, 1e10, 1e12}) {
        const auto r = regret_prediction(solve_fluid(gap, f, T), gap, f(T));
        const double err = std::fabs(r.typical_scale / (2 * std::log(T) / 0.5) - 1.0);
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err < 0.05);

    const auto lam1 = regret_prediction(solve_fluid(gap, f, 1e6), gap, f(1e6), 1.0);
    CHECK(lam1.typical_deviation == doctest::Approx(lam1.clt_implied_sd).epsilon(1e-15));

    // Larger exploration at the same T never lowers the typical regret.
    double prev = 0;
    for (double fT : {1.0, 2.0, 4.0, 8.0}) {
        const auto fl = solve_fluid_scaled(std::vector<double>{0.0, 0.5 / fT}, 1e6, fT);
        const double r = fl.n_star[1] * 0.5;
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("bias prediction constants") {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    const double T = 1e7;
    const auto small = BanditInstance::gaussian({1, 1}, {0.5, 0.5});
    const auto fs = solve_fluid(small, f, T);
    const auto bs = bias_prediction(fs, small, f, T, fs.regime[1]);
    CHECK(*bs.arms[1].scaled_constant == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(*bs.arms[0].scaled_constant == doctest::Approx(-0.25).epsilon(1e-12));
    // General form scaled by sqrt(T log T) equals the regime constant when n_2 = T/2.
    CHECK(bs.arms[1].bias * std::sqrt(T * std::log(T)) == doctest::Approx(-0.25).epsilon(1e-10));

    const auto large = BanditInstance::gaussian({1, 0}, {1, 1});
    const auto fl = solve_fluid(large, f, T);
    const auto bl = bias_prediction(fl, large, f, T, RegimeLabel{RegimeLabel::Kind::LargeGap, 0, 0}, 0.0);
    CHECK(*bl.arms[1].scaled_constant == doctest::Approx(-1.0));
    CHECK(!bl.arms[0].scaled_constant.has_value());
    CHECK(bl.arms[0].bias == 0.0);
    CHECK(bl.arms[1].scale_label == "log T");

    const auto g = GapSpec::superior_share(0.7);
    const auto mod = two_arm_instance(g, f, T, 0, RewardFamily::Gaussian, 1, 1);
    const auto fm = solve_fluid(mod, f, T);
    const auto bm = bias_prediction(fm, mod, f, T, fm.regime[1]);
    const double l = 3.0 / 7.0;
    CHECK(*bm.arms[1].scaled_constant ==
          doctest::Approx(-2.0 * std::sqrt(1 + l) / (std::sqrt(2.0) * (std::sqrt(l) + l * l))).epsilon(1e-8));

    CHECK_THROWS_AS(bias_prediction(fs, small, ExplorationFunction::log_power(1.0, 0.5), T, fs.regime[1]),
                    UnsupportedConfiguration);
}

TEST_CASE("bias is never positive") {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    for (double delta : {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0}) {
        for (double T : {1e3, 1e6, 1e9}) {
            const auto inst = BanditInstance::gaussian({delta, 0}, {0.7, 1.3});
            const auto fl = solve_fluid(inst, f, T);
            const auto b = bias_prediction(fl, inst, f, T, fl.regime[1]);
            for (const auto& a : b.arms) {
                CHECK(a.bias <= 0.0);
                if (a.scaled_constant) CHECK(*a.scaled_constant <= 0.0);
            }
        }
    }
}
