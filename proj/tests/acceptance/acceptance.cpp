// Acceptance suite: one PASS/FAIL line per criterion. All randomness comes
// from fixed seeds chosen before any run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banditflow/cli.hpp"
#include "banditflow/engine.hpp"
#include "banditflow/fluid.hpp"
#include "banditflow/perturb.hpp"
#include "banditflow/predict.hpp"
#include "banditflow/stats.hpp"
#include "banditflow/stylized.hpp"

using namespace banditflow;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* spec, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

std::string band(double mean, double half) { return "[" + fmt("%.3f", mean - half) + ", " + fmt("%.3f", mean + half) + "]"; }

// ---------------------------------------------------------------- 1

Outcome fluid_correctness() {
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> karms(2, 8);
    std::uniform_real_distribution<double> log_t(std::log(10.0), std::log(1e12));
    std::uniform_real_distribution<double> log_d(std::log(1e-4), std::log(3.0));
    std::uniform_real_distribution<double> rho(0.5, 4.0);
    double worst_res = 0, worst_sum = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = karms(rng);
        const double T = std::max<double>(k, std::floor(std::exp(log_t(rng))));
        std::vector<double> means{0.0};
        for (int i = 1; i < k; ++i) means.push_back(-std::exp(log_d(rng)));
        std::sort(means.begin(), means.end(), std::greater<>());
        const auto f = ExplorationFunction::sqrt_rho_log(rho(rng));
        const auto s = solve_fluid(BanditInstance::gaussian(means, std::vector<double>(k, 1.0)), f, T);
        double sum = 0;
        for (int i = 0; i < k; ++i) {
            sum += s.n_star[i];
            const double scale = std::max({1 / std::sqrt(s.n_star[i]), 1 / std::sqrt(s.n_star[0]), -means[i] / s.f_T});
            worst_res = std::max(worst_res, std::fabs(s.residuals[i]) / scale);
        }
        worst_sum = std::max(worst_sum, std::fabs(sum - T) / T);
    }
    double worst_share = 0;
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    for (double T : {1e3, 1e5, 1e7, 1e9}) {
        const auto inst = two_arm_instance(GapSpec::superior_share(0.7), f, T, 0.0, RewardFamily::Gaussian, 1, 1);
        const auto s = solve_fluid(inst, f, T);
        worst_share = std::max({worst_share, std::fabs(s.n_star[0] / (0.7 * T) - 1), std::fabs(s.n_star[1] / (0.3 * T) - 1)});
    }
    return {worst_res < 1e-12 && worst_sum < 1e-9 && worst_share < 1e-8,
            "max residual/scale " + fmt("%.2e", worst_res) + ", max |sum-T|/T " + fmt("%.2e", worst_sum) +
                ", 0.7T round-trip rel err " + fmt("%.2e", worst_share)};
}

// ---------------------------------------------------------------- 2

Outcome perturbation_closed_form() {
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> karms(2, 8);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> pos(0.1, 3.0);
    double worst_dense = 0, worst_sum = 0, worst_k2 = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = karms(rng);
        IndexDerivatives d;
        d.d_mu.resize(k);
        d.d_n.resize(k);
        Eigen::VectorXd eps(k);
        for (int i = 0; i < k; ++i) {
            d.d_mu[i] = pos(rng);
            d.d_n[i] = -pos(rng);
            eps[i] = normal(rng);
        }
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
        a.row(0).setOnes();
        for (int i = 1; i < k; ++i) {
            a(i, 0) = -d.d_n[0];
            a(i, i) = d.d_n[i];
            b[i] = d.d_mu[0] * eps[0] - d.d_mu[i] * eps[i];
        }
        const Eigen::VectorXd ref = a.partialPivLu().solve(b);
        const auto sol = solve_perturbation_closed_form(d, eps);
        worst_dense = std::max(worst_dense, (sol.omega - ref).norm() / std::max(1e-300, ref.norm()));
        worst_sum = std::max(worst_sum, std::fabs(sol.omega.sum()) / sol.omega.cwiseAbs().maxCoeff());
    }
    std::uniform_real_distribution<double> gap(0.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double fT = 1.0 + 4.0 * trial / 100.0;
        const std::vector<double> scaled{0.0, gap(rng) / fT / 100.0};
        const auto fluid = solve_fluid_scaled(scaled, 1e6, fT);
        const double z1 = normal(rng), z2 = normal(rng);
        Eigen::VectorXd eps(2);
        eps << z1 / std::sqrt(fluid.n_star[0]), z2 / std::sqrt(fluid.n_star[1]);
        const double l = fluid.lambda21();
        const double expected = fluid.n_star[1] * 2.0 * (z2 - z1 * std::sqrt(l)) / ((1.0 + std::pow(l, 1.5)) * fT);
        const auto sol = solve_perturbation_ucb(fluid, fT, eps);
        worst_k2 = std::max(worst_k2, std::fabs(sol.omega[1] - expected) / std::max(1.0, std::fabs(expected)));
        worst_sum = std::max(worst_sum, std::fabs(sol.omega.sum()) / sol.omega.cwiseAbs().maxCoeff());
    }
    return {worst_dense < 1e-9 && worst_sum < 1e-12 && worst_k2 < 1e-10,
            "closed form vs dense LU rel err " + fmt("%.2e", worst_dense) + ", max |sum omega|/max|omega| " +
                fmt("%.2e", worst_sum) + ", K=2 first-order formula err " + fmt("%.2e", worst_k2)};
}

// ---------------------------------------------------------------- 3

Outcome k_arm_vs_oracle() {
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> karms(2, 8);
    std::uniform_real_distribution<double> gap(0.0, 2.0);
    std::uniform_real_distribution<double> sd(0.2, 2.0);
    const double T = 1e6, fT = std::sqrt(2 * std::log(T));
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int k = karms(rng);
        std::vector<double> means{0.0}, sds;
        for (int i = 1; i < k; ++i) means.push_back(-gap(rng) * fT / std::sqrt(T));
        std::sort(means.begin(), means.end(), std::greater<>());
        for (int i = 0; i < k; ++i) sds.push_back(sd(rng));
        const auto inst = BanditInstance::gaussian(means, sds);
        const auto fluid = solve_fluid(inst, ExplorationFunction::sqrt_rho_log(2.0), T);
        const auto pred = clt_k_arm(fluid, inst, fluid.f_T);
        const auto mc = clt_from_perturbation_mc(fluid, inst, fluid.f_T, 1'000'000, kSeed + trial, 4);
        const double scale = pred.cov.cwiseAbs().maxCoeff();
        worst = std::max(worst, (mc - pred.cov).cwiseAbs().maxCoeff() / scale);
    }

    // Separated superior arm: lambda_{k1} = 0, lambda_{kj} = (Delta_j/Delta_k)^2.
    const std::vector<double> gaps{0.0, 1.0, 1.5, 3.0};
    const int k = 4;
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(k, k);
    lambda(0, 0) = 1;
    for (int i = 1; i < k; ++i) {
        for (int j = 1; j < k; ++j) lambda(i, j) = std::pow(gaps[j] / gaps[i], 2);
    }
    Eigen::VectorXd var(k);
    var << 1.0, 0.25, 2.0, 4.0;
    const auto sep = k_arm_covariance(lambda, var);
    const Eigen::MatrixXd diag = var.tail(k - 1).asDiagonal();
    const double sep_err = std::max((sep.block(1, 1, k - 1, k - 1) - diag).cwiseAbs().maxCoeff(),
                                    (sep.block(1, k + 1, k - 1, k - 1) - diag).cwiseAbs().maxCoeff());

    double ind_err = 0;
    for (int kk = 2; kk <= 8; ++kk) {
        const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(kk, 0.5, 3.0);
        const auto cov = k_arm_covariance(Eigen::MatrixXd::Ones(kk, kk), v);
        for (int i = 0; i < kk; ++i) {
            double expect = std::pow(1.0 - 1.0 / kk, 2) * v[i];
            for (int j = 0; j < kk; ++j) {
                if (j != i) expect += v[j] / (kk * kk);
            }
            ind_err = std::max(ind_err, std::fabs(cov(i, i) - expect) / expect);
        }
    }
    return {worst <= 0.02 && sep_err < 1e-12 && ind_err < 1e-13,
            "max |MC - closed form|/scale " + fmt("%.4f", worst) + " (20 instances, 1e6 samples), separated-arm err " +
                fmt("%.1e", sep_err) + ", indistinguishable Var(W_i) rel err " + fmt("%.1e", ind_err)};
}

// ---------------------------------------------------------------- 4

Outcome identical_arms_reproduction() {
    RunConfig rc;
    rc.instance = BanditInstance::gaussian({1.0, 1.0}, {1.0, 1.0});
    rc.horizon = 100'000;
    rc.seed = kSeed;
    const auto runs = run_ensemble(rc, 10'000, 1);
    const auto fluid = solve_fluid(rc.instance, rc.f, 1e5);
    const auto pred = clt_two_arm(fluid, rc.instance, fluid.f_T);
    const auto stats = standardize(runs, fluid, pred, rc.instance);
    Eigen::MatrixXd target(3, 3);
    target << 2, -1, 1, -1, 1, 0, 1, 0, 1;
    CovarianceTolerance tol;
    tol.abs_tol = 0.35;
    tol.k = 0.0;
    const auto v = compare_covariance(stats, target, tol);
    std::ostringstream d;
    d << "exact, 1e4 reps x 1e5 pulls; empirical cov";
    for (const auto& e : v.entries) d << " " << e.row << "," << e.col << "=" << fmt("%.3f", e.empirical) << "(+-" << fmt("%.2f", e.se) << ")";
    const auto& w = v.entries[v.worst];
    d << "; worst cov(" << w.row << "," << w.col << ") off by " << fmt("%.3f", std::fabs(w.empirical - w.target))
      << " vs tolerance 0.35; means";
    for (Eigen::Index i = 0; i < stats.emp_mean.size(); ++i) d << " " << fmt("%.3f", stats.emp_mean[i]);
    return {v.pass, d.str()};
}

// ---------------------------------------------------------------- 5

struct BiasRun {
    BiasPrediction prediction;
    std::vector<BiasEstimate> empirical;
    BiasReport report;
};

BiasRun bias_regime(const GapSpec& spec, double base_mean, double sd, std::int64_t T, Batching batching) {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    RunConfig rc;
    rc.instance = two_arm_instance(spec, f, double(T), base_mean, RewardFamily::Gaussian, sd, sd);
    rc.horizon = T;
    rc.seed = kSeed;
    rc.batching = batching;
    const auto runs = run_ensemble(rc, 10'000, 1);
    const auto fluid = solve_fluid(rc.instance, f, double(T));
    const std::vector<double> grid{double(T) / 100, double(T) / 10, double(T)};
    const auto regime = classify_regime(spec, f, grid).label;
    BiasRun out;
    out.prediction = bias_prediction(fluid, rc.instance, f, double(T), regime);
    const auto stats = standardize(runs, fluid, clt_two_arm(fluid, rc.instance, fluid.f_T), rc.instance);
    out.empirical = stats.emp_bias;
    // The criterion concerns the inferior arm only.
    BiasPrediction arm2 = out.prediction;
    arm2.arms[0].scaled_constant.reset();
    out.report = compare_bias(out.empirical, arm2);
    return out;
}

std::string bias_detail(const std::string& name, const BiasRun& r) {
    const auto& a = r.report.arms[1];
    std::string s = name + ": arm 2 scaled bias " + fmt("%.3f", a.scaled_empirical) + " (se " + fmt("%.3f", a.scaled_se) +
                    ") vs " + fmt("%.3f", a.target) + " x " + a.scale_label;
    if (r.prediction.arms[0].scaled_constant) {
        s += ", arm 1 " + fmt("%.3f", r.empirical[0].bias * r.prediction.arms[0].scale) + " vs " +
             fmt("%.3f", *r.prediction.arms[0].scaled_constant);
    }
    return s;
}

// ---------------------------------------------------------------- 6

Outcome regret_clt() {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    const double T = 1e6;
    RunConfig rc;
    rc.instance = two_arm_instance(GapSpec::moderate(1.0), f, T, 0.0, RewardFamily::Gaussian, 1, 1);
    rc.horizon = static_cast<std::int64_t>(T);
    rc.seed = kSeed;
    rc.batching = Batching::batched();
    const auto runs = run_ensemble(rc, 10'000, 1);
    const auto fluid = solve_fluid(rc.instance, f, T);
    const auto pred = regret_prediction(fluid, rc.instance, fluid.f_T);
    const auto s = regret_stats(runs, pred);
    const bool pass = s.defined && s.mean_ratio >= 0.85 && s.mean_ratio <= 1.15 && s.sd_ratio >= 0.7 && s.sd_ratio <= 1.3;
    return {pass, "batched, 1e4 reps: mean(R)/R* " + fmt("%.4f", s.mean_ratio) + " (se " + fmt("%.4f", s.mean_ratio_se) +
                      "), SD(R)/clt_implied_sd " + fmt("%.4f", s.sd_ratio) + " (se " + fmt("%.4f", s.sd_ratio_se) + ")"};
}

// ---------------------------------------------------------------- 7

Outcome batched_vs_exact() {
    RunConfig rc;
    rc.instance = BanditInstance::gaussian({0.0, 0.0}, {1.0, 1.0});
    rc.horizon = 10'000;
    rc.seed = kSeed;
    auto n2 = [&](Batching b) {
        rc.batching = b;
        std::vector<double> v;
        for (const auto& r : run_ensemble(rc, 5000, 1)) v.push_back(double(r.pulls[1]));
        return summarize_scalar(v);
    };
    const auto exact = n2(Batching::exact());
    const auto batched = n2(Batching::batched());
    const double mean_tol = 3 * std::hypot(exact.mean_se, batched.mean_se);
    const double sd_tol = 3 * std::hypot(exact.sd_se, batched.sd_se);
    const double dm = std::fabs(exact.mean - batched.mean), ds = std::fabs(exact.sd - batched.sd);
    return {dm <= mean_tol && ds <= sd_tol,
            "N_2 mean exact " + fmt("%.1f", exact.mean) + " batched " + fmt("%.1f", batched.mean) + " (|diff| " +
                fmt("%.1f", dm) + " <= " + fmt("%.1f", mean_tol) + "), SD exact " + fmt("%.1f", exact.sd) + " batched " +
                fmt("%.1f", batched.sd) + " (|diff| " + fmt("%.1f", ds) + " <= " + fmt("%.1f", sd_tol) + ")"};
}

// ---------------------------------------------------------------- 8

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "banditflow_acceptance";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"schema": "banditflow/v1",
        "instance": {"means": [0.3, 0.2, 0.0], "std_devs": [1.0, 0.5, 2.0]},
        "T": 20000, "replications": 300, "seed": 9})";
    const auto sty = dir / "stylized.json";
    std::ofstream(sty) << R"({"schema": "banditflow/v1", "gap": {"mode": "zero", "std_devs": [0.5, 0.5]},
        "T": 1000000, "replications": 300, "seed": 9})";
    struct Case {
        std::string cmd, config, csv;
        std::vector<std::string> extra;
    };
    const std::vector<Case> cases{{"simulate", cfg.string(), "runs.csv", {}},
                                  {"simulate", cfg.string(), "runs.csv", {"--batched"}},
                                  {"stylized", sty.string(), "stylized.csv", {}}};
    int identical = 0, total = 0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        std::string reference;
        for (int p : {1, 2, 5}) {
            const auto out = dir / (std::to_string(c) + "_p" + std::to_string(p));
            std::vector<std::string> args{cases[c].cmd, "--config", cases[c].config, "--parallel", std::to_string(p),
                                          "--out", out.string()};
            args.insert(args.end(), cases[c].extra.begin(), cases[c].extra.end());
            std::ostringstream o, e;
            if (run_cli(args, o, e) != kExitOk) return {false, cases[c].cmd + " failed: " + e.str()};
            const auto csv = slurp(out / cases[c].csv);
            if (p == 1) {
                reference = csv;
            } else {
                ++total;
                if (!reference.empty() && csv == reference) ++identical;
            }
        }
    }
    std::filesystem::remove_all(dir);
    return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                    " CSV outputs byte-identical across --parallel 1/2/5 (simulate exact, simulate batched, stylized)"};
}

// ---------------------------------------------------------------- 9

Outcome stylized_agreement(const BiasRun& ucb) {
    StylizedConfig sc;
    sc.instance = BanditInstance::gaussian({1.0, 1.0}, {0.5, 0.5});
    sc.horizon = 10'000'000;
    sc.seed = kSeed;
    const auto est = stylized_bias_estimate(sc, 10'000, 1);
    const double scale = ucb.prediction.arms[1].scale;
    const double target = *ucb.prediction.arms[1].scaled_constant;
    const double s_mean = est.arms[1].bias * scale, s_half = 3 * est.arms[1].se * scale;
    const auto& u = ucb.report.arms[1];
    const double u_half = 3 * u.scaled_se;
    const bool covers_prediction = std::fabs(s_mean - target) <= s_half;
    const bool overlaps_ucb = std::fabs(s_mean - u.scaled_empirical) <= s_half + u_half;
    return {covers_prediction && overlaps_ucb,
            "arm 2 scaled bias: stylized " + fmt("%.3f", s_mean) + " band " + band(s_mean, s_half) +
                (covers_prediction ? " contains " : " misses ") + fmt("%.3f", target) + "; UCB band " +
                band(u.scaled_empirical, u_half) + (overlaps_ucb ? " overlaps" : " disjoint") + "; delta_T " +
                fmt("%.3f", est.delta) + ", clamp freq " + fmt("%.4f", est.clamp_frequency) + ", arm 1 stylized " +
                fmt("%.3f", est.arms[0].bias * scale)};
}

template <class F>
Outcome timed(F&& f, double& seconds) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return o;
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const Outcome& o, double secs, double budget) {
        const bool in_time = budget <= 0 || secs <= budget;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::cout << "criterion " << n << ": " << (pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
                  << fmt("%.1f", secs) << " s";
        if (budget > 0) std::cout << ", budget " << fmt("%.0f", budget) << " s" << (in_time ? "" : " EXCEEDED");
        std::cout << "]" << std::endl;
    };
    double s = 0;
    Outcome o = timed(fluid_correctness, s);
    report(1, o, s, 5);
    o = timed(perturbation_closed_form, s);
    report(2, o, s, 1);
    o = timed(k_arm_vs_oracle, s);
    report(3, o, s, 60);
    o = timed(identical_arms_reproduction, s);
    report(4, o, s, 600);

    BiasRun small, large, moderate;
    double s_small = 0, s_large = 0, s_mod = 0;
    timed([&] { small = bias_regime(GapSpec::zero(), 1.0, 0.5, 10'000'000, Batching::batched()); return Outcome{}; }, s_small);
    timed([&] {
        large = bias_regime(GapSpec::fixed(2.0), 0.0, 1.0, 1'000'000'000,
                            Batching::batched(0.02, Batching::ApplyTo::SuperiorOnly));
        return Outcome{};
    }, s_large);
    timed([&] { moderate = bias_regime(GapSpec::superior_share(0.7), 0.0, 1.0, 10'000'000, Batching::batched()); return Outcome{}; },
          s_mod);
    const bool bias_pass = small.report.pass && large.report.pass && moderate.report.pass &&
                           std::max({s_small, s_large, s_mod}) <= 300;
    report(5,
           {bias_pass, bias_detail("small gap", small) + "; " + bias_detail("large gap", large) + "; " +
                           bias_detail("moderate gap", moderate) + "; per-regime seconds " + fmt("%.1f", s_small) + "/" +
                           fmt("%.1f", s_large) + "/" + fmt("%.1f", s_mod)},
           s_small + s_large + s_mod, 0);

    o = timed(regret_clt, s);
    report(6, o, s, 0);
    o = timed(batched_vs_exact, s);
    report(7, o, s, 0);
    o = timed(determinism, s);
    report(8, o, s, 0);
    o = timed([&] { return stylized_agreement(small); }, s);
    report(9, o, s, 0);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
