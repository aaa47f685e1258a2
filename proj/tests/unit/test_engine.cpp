#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "banditflow/engine.hpp"
#include "banditflow/error.hpp"
#include "banditflow/fluid.hpp"

using namespace banditflow;

namespace {

RunConfig two_arm(double gap, std::int64_t T, std::uint64_t seed = 1) {
    RunConfig c;
    c.instance = BanditInstance::gaussian({gap, 0.0}, {1.0, 1.0});
    c.horizon = T;
    c.seed = seed;
    return c;
}

// Straightforward re-implementation used as a reference.
std::vector<std::int64_t> reference_pulls(const BanditInstance& inst, std::int64_t T, std::uint64_t seed,
                                          std::uint32_t rep, std::vector<double>& means_out) {
    const std::size_t k = inst.arm_count();
    std::vector<RandomStream> s;
    for (std::size_t i = 0; i < k; ++i) s.emplace_back(seed, rep, static_cast<std::uint32_t>(i));
    std::vector<std::int64_t> n(k, 0);
    std::vector<double> sum(k, 0.0);
    auto pull = [&](std::size_t i) {
        sum[i] += inst.means[i] + inst.std_devs[i] * s[i].normal();
        ++n[i];
    };
    for (std::size_t i = 0; i < k; ++i) pull(i);
    for (std::int64_t t = static_cast<std::int64_t>(k) + 1; t <= T; ++t) {
        std::size_t best = 0;
        double best_val = -INFINITY;
        for (std::size_t i = 0; i < k; ++i) {
            const double v = sum[i] / n[i] + std::sqrt(2.0 * std::log(double(t))) / std::sqrt(double(n[i]));
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        pull(best);
    }
    means_out.resize(k);
    for (std::size_t i = 0; i < k; ++i) means_out[i] = sum[i] / n[i];
    return n;
}

} // namespace

TEST_CASE("T = K pulls every arm once") {
    RunConfig c;
    c.instance = BanditInstance::gaussian({1, 0.5, 0}, {1, 1, 1});
    c.horizon = 3;
    const auto r = run_ucb(c);
    CHECK(r.pulls == std::vector<std::int64_t>{1, 1, 1});
    CHECK(r.pseudo_regret == doctest::Approx(1.5));
    c.horizon = 2;
    CHECK_THROWS_AS(run_ucb(c), ConfigError);
}

TEST_CASE("matches a reference simulator") {
    for (std::uint32_t rep = 0; rep < 20; ++rep) {
        for (std::int64_t T : {10, 57, 400}) {
            RunConfig c;
            c.instance = BanditInstance::gaussian({0.3, 0.1, 0.0}, {1.0, 0.5, 2.0});
            c.horizon = T;
            c.seed = 99;
            c.replication_index = rep;
            std::vector<double> ref_means;
            const auto ref = reference_pulls(c.instance, T, 99, rep, ref_means);
            const auto r = run_ucb(c);
            CHECK(r.pulls == ref);
            for (std::size_t i = 0; i < 3; ++i) CHECK(r.sample_means[i] == doctest::Approx(ref_means[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("determinism and conservation") {
    const auto c = two_arm(0.2, 5000, 42);
    const auto a = run_ucb(c);
    const auto b = run_ucb(c);
    CHECK(a.pulls == b.pulls);
    CHECK(a.sample_means == b.sample_means);
    CHECK(std::accumulate(a.pulls.begin(), a.pulls.end(), std::int64_t{0}) == 5000);
    CHECK(a.pseudo_regret == doctest::Approx(0.2 * a.pulls[1]));

    auto c2 = c;
    c2.seed = 43;
    CHECK(run_ucb(c2).sample_means != a.sample_means);
}

TEST_CASE("ensemble output does not depend on parallelism") {
    const auto c = two_arm(0.0, 2000, 5);
    const auto one = run_ensemble(c, 150, 1);
    const auto four = run_ensemble(c, 150, 4);
    REQUIRE(one.size() == 150);
    REQUIRE(four.size() == 150);
    std::ostringstream a, b;
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].replication == i);
        write_run_csv_row(a, one[i]);
        write_run_csv_row(b, four[i]);
    }
    CHECK(a.str() == b.str());
    CHECK_THROWS_AS(run_ensemble(c, 0, 1), ConfigError);
}

TEST_CASE("ordered_parallel_for propagates job exceptions") {
    auto bad = [](std::int64_t i) {
        if (i == 7) throw DomainError("boom");
    };
    CHECK_THROWS_AS(ordered_parallel_for(20, 3, 8, bad, [](std::int64_t) {}), DomainError);
}

TEST_CASE("tie_break") {
    const std::vector<double> a{1.0, 3.0, 3.0, 2.0};
    CHECK(tie_break(a) == 1);
    const std::vector<double> b{5.0, 5.0};
    CHECK(tie_break(b) == 0);
    const std::vector<double> c{-1.0, 0.0, -INFINITY};
    CHECK(tie_break(c) == 1);
    CHECK_THROWS_AS(tie_break(std::span<const double>{}), DomainError);
}

TEST_CASE("configuration errors") {
    auto c = two_arm(0.1, kMaxHorizon + 1);
    CHECK_THROWS_AS(run_ucb(c), ConfigError);
    c = two_arm(0.1, 100);
    c.batching = Batching::batched(0.0);
    CHECK_THROWS_AS(run_ucb(c), ConfigError);
    c = two_arm(0.1, 100);
    c.instance.means = {0.0, 0.1};
    CHECK_THROWS_AS(run_ucb(c), ConfigError);
    c = two_arm(0.1, 100);
    c.checkpoints = {50, 10};
    CHECK_THROWS_AS(run_ucb(c), ConfigError);
}

TEST_CASE("batched runs conserve pulls") {
    for (auto apply : {Batching::ApplyTo::AllArms, Batching::ApplyTo::SuperiorOnly}) {
        auto c = two_arm(0.05, 1'000'000, 3);
        c.batching = Batching::batched(0.02, apply);
        const auto r = run_ucb(c);
        CHECK(r.pulls[0] + r.pulls[1] == 1'000'000);
        CHECK(r.mode == Batching::Mode::Batched);
    }
    CHECK(Batching::batched(0.02).batch_size(1'000'000) == 1447);
    CHECK(Batching::exact().batch_size(1'000'000) == 1);
    CHECK(Batching::batched(0.02).batch_size(10) == 1);
}

TEST_CASE("checkpoints record the trajectory") {
    auto c = two_arm(0.5, 1000, 8);
    c.checkpoints = {2, 10, 500, 1000};
    const auto r = run_ucb(c);
    REQUIRE(r.trajectory.size() == 4);
    for (const auto& cp : r.trajectory) CHECK(cp.pulls[0] + cp.pulls[1] == cp.epoch);
    CHECK(r.trajectory.back().pulls == r.pulls);
}

TEST_CASE("pull fractions approach the fluid solution") {
    // Weak law: N_i / n*_i -> 1; the spread shrinks along the horizon ladder.
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    double prev = INFINITY;
    for (std::int64_t T : {1'000, 10'000, 100'000}) {
        auto c = two_arm(0.0, T, 11);
        const auto fl = solve_fluid(c.instance, f, double(T));
        const auto runs = run_ensemble(c, 200, 1);
        double mad = 0;
        for (const auto& r : runs) mad += std::fabs(double(r.pulls[1]) / fl.n_star[1] - 1.0);
        mad /= double(runs.size());
        CHECK(mad < prev);
        prev = mad;
    }
    // Relative spread is of order sqrt(2)/f(T) ~ 0.3 at T = 1e5.
    CHECK(prev < 0.35);
}

TEST_CASE("csv formatting") {
    std::ostringstream os;
    write_run_csv_header(os, 2, true);
    CHECK(os.str() == "replication,seed,T[pulls],mode,N_1[pulls],N_2[pulls],mean_1[reward],mean_2[reward],"
                      "pseudo_regret[reward],clamped\n");
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
