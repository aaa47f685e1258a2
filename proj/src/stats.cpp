#include "banditflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "banditflow/error.hpp"

namespace banditflow {

GroupedMoments::GroupedMoments(Eigen::Index dim, int groups) : dim_(dim) {
    if (dim < 1 || groups < 2) throw DomainError("GroupedMoments: need dim >= 1 and at least two groups");
    groups_.assign(static_cast<std::size_t>(groups), CovarianceAccumulator(dim));
}

void GroupedMoments::add(std::uint64_t key, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != dim_) throw DomainError("GroupedMoments: dimension mismatch");
    groups_[static_cast<std::size_t>(key % groups_.size())].add(x);
    if (count_ < kJackknifeMinCount) head_.emplace_back(x);
    ++count_;
}

CovarianceAccumulator GroupedMoments::total() const {
    CovarianceAccumulator acc(dim_);
    for (const auto& g : groups_) acc.merge(g);
    return acc;
}

Eigen::VectorXd GroupedMoments::jackknife_se(const Functional& statistic) const {
    std::vector<Eigen::VectorXd> reps;
    if (count_ >= kJackknifeMinCount) {
        for (std::size_t out = 0; out < groups_.size(); ++out) {
            if (groups_[out].count() == 0) continue;
            CovarianceAccumulator acc(dim_);
            for (std::size_t g = 0; g < groups_.size(); ++g) {
                if (g != out) acc.merge(groups_[g]);
            }
            reps.push_back(statistic(acc));
        }
    } else {
        for (std::size_t out = 0; out < head_.size(); ++out) {
            CovarianceAccumulator acc(dim_);
            for (std::size_t i = 0; i < head_.size(); ++i) {
                if (i != out) acc.add(head_[i]);
            }
            reps.push_back(statistic(acc));
        }
    }
    if (reps.size() < 2) return Eigen::VectorXd::Zero(statistic(total()).size());
    const double m = static_cast<double>(reps.size());
    Eigen::VectorXd centre = Eigen::VectorXd::Zero(reps.front().size());
    for (const auto& r : reps) centre += r;
    centre /= m;
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(centre.size());
    for (const auto& r : reps) ss += (r - centre).cwiseAbs2();
    return ((m - 1.0) / m * ss).cwiseSqrt();
}

MeanEstimate GroupedMoments::mean_estimate() const {
    MeanEstimate e;
    e.mean = total().mean();
    e.se = jackknife_se([](const CovarianceAccumulator& a) { return a.mean(); });
    return e;
}

CovEstimate GroupedMoments::covariance_estimate() const {
    CovEstimate e;
    const CovarianceAccumulator all = total();
    e.cov = all.covariance();
    if (count_ >= kJackknifeMinCount) {
        const Eigen::VectorXd se = jackknife_se([](const CovarianceAccumulator& a) {
            Eigen::MatrixXd c = a.covariance();
            return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(c.data(), c.size()));
        });
        e.se = Eigen::Map<const Eigen::MatrixXd>(se.data(), dim_, dim_);
        return e;
    }
    // Plug-in: variance of the centred products u_a u_b, divided by n.
    e.se = Eigen::MatrixXd::Zero(dim_, dim_);
    const double n = static_cast<double>(count_);
    if (count_ < 2) return e;
    for (Eigen::Index a = 0; a < dim_; ++a) {
        for (Eigen::Index b = 0; b < dim_; ++b) {
            double ss = 0.0;
            for (const auto& x : head_) {
                const double u = (x[a] - all.mean()[a]) * (x[b] - all.mean()[b]) - e.cov(a, b);
                ss += u * u;
            }
            e.se(a, b) = std::sqrt(ss / (n - 1.0) / n);
        }
    }
    return e;
}

namespace {

void fill_shape_moments(EnsembleStats& s) {
    const Eigen::Index d = s.standardized.cols();
    s.skewness = Eigen::VectorXd::Zero(d);
    s.excess_kurtosis = Eigen::VectorXd::Zero(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        CompensatedSum sum;
        for (Eigen::Index r = 0; r < s.standardized.rows(); ++r) sum.add(s.standardized(r, j));
        const double mean = sum.value() / static_cast<double>(s.count);
        CompensatedSum m2, m3, m4;
        for (Eigen::Index r = 0; r < s.standardized.rows(); ++r) {
            const double u = s.standardized(r, j) - mean;
            m2.add(u * u);
            m3.add(u * u * u);
            m4.add(u * u * u * u);
        }
        const double n = static_cast<double>(s.count);
        const double v = m2.value() / n;
        if (v > 0.0) {
            s.skewness[j] = m3.value() / n / std::pow(v, 1.5);
            s.excess_kurtosis[j] = m4.value() / n / (v * v) - 3.0;
        }
    }
}

EnsembleStats finish(const Eigen::MatrixXd& rows, std::vector<std::uint32_t> reps, std::vector<std::string> labels,
                     Eigen::Index coordinate_dim) {
    EnsembleStats s;
    s.count = rows.rows();
    s.replications = std::move(reps);
    s.labels = std::move(labels);
    GroupedMoments moments(rows.cols());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) moments.add(s.replications[static_cast<std::size_t>(r)], rows.row(r).transpose());
    const MeanEstimate mean = moments.mean_estimate();
    const CovEstimate cov = moments.covariance_estimate();
    const Eigen::Index d = coordinate_dim;
    s.emp_mean = mean.mean.head(d);
    s.mean_se = mean.se.head(d);
    s.emp_cov = cov.cov.topLeftCorner(d, d);
    s.cov_se = cov.se.topLeftCorner(d, d);
    for (Eigen::Index j = d; j < rows.cols(); ++j) s.emp_bias.push_back({mean.mean[j], mean.se[j]});
    s.standardized = rows.leftCols(d);
    fill_shape_moments(s);
    return s;
}

} // namespace

EnsembleStats standardize(std::span<const RunResult> results, const FluidSolution& fluid,
                          const CltPrediction& prediction, const BanditInstance& instance) {
    if (results.empty()) throw DomainError("standardize: empty ensemble");
    const std::size_t k = instance.arm_count();
    if (fluid.arm_count() != k) throw DomainError("standardize: fluid and instance arm counts differ");
    for (const auto& c : prediction.coordinates) {
        if (c.arm >= k) throw DomainError("standardize: prediction refers to a missing arm");
    }
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return results[a].replication < results[b].replication; });

    const auto d = static_cast<Eigen::Index>(prediction.coordinates.size());
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(results.size()), d + kk);
    std::vector<std::uint32_t> reps;
    reps.reserve(results.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const RunResult& run = results[order[r]];
        if (run.pulls.size() != k || run.sample_means.size() != k) {
            throw DomainError("standardize: run has the wrong number of arms");
        }
        const auto rr = static_cast<Eigen::Index>(r);
        for (Eigen::Index j = 0; j < d; ++j) {
            const Coordinate& c = prediction.coordinates[static_cast<std::size_t>(j)];
            rows(rr, j) = c.kind == Coordinate::Kind::W
                              ? c.scale * (static_cast<double>(run.pulls[c.arm]) - fluid.n_star[c.arm])
                              : c.scale * (run.sample_means[c.arm] - instance.means[c.arm]);
        }
        for (std::size_t i = 0; i < k; ++i) rows(rr, d + static_cast<Eigen::Index>(i)) = run.sample_means[i] - instance.means[i];
        reps.push_back(run.replication);
    }
    std::vector<std::string> labels;
    for (const auto& c : prediction.coordinates) labels.push_back(c.label());
    return finish(rows, std::move(reps), std::move(labels), d);
}

EnsembleStats summarize_samples(const Eigen::MatrixXd& samples, std::vector<std::string> labels) {
    if (samples.rows() < 1) throw DomainError("summarize_samples: no samples");
    if (static_cast<Eigen::Index>(labels.size()) != samples.cols()) throw DomainError("summarize_samples: label count mismatch");
    std::vector<std::uint32_t> reps(static_cast<std::size_t>(samples.rows()));
    std::iota(reps.begin(), reps.end(), 0u);
    return finish(samples, std::move(reps), std::move(labels), samples.cols());
}

CovarianceVerdict compare_covariance(const EnsembleStats& stats, const Eigen::MatrixXd& target,
                                     const CovarianceTolerance& tol) {
    const Eigen::Index d = stats.emp_cov.rows();
    if (target.rows() != d || target.cols() != d) throw DomainError("compare_covariance: dimension mismatch");
    CovarianceVerdict v;
    double worst_ratio = -1.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            EntryVerdict e;
            e.row = stats.labels[static_cast<std::size_t>(i)];
            e.col = stats.labels[static_cast<std::size_t>(j)];
            e.target = target(i, j);
            e.empirical = stats.emp_cov(i, j);
            e.se = stats.cov_se(i, j);
            e.tolerance = std::max(tol.abs_tol, tol.k * e.se);
            const double diff = std::fabs(e.empirical - e.target);
            e.pass = diff <= e.tolerance;
            const double ratio = e.tolerance > 0.0 ? diff / e.tolerance : (diff > 0.0 ? INFINITY : 0.0);
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                v.worst = v.entries.size();
            }
            v.entries.push_back(e);
        }
    }
    v.pass = std::all_of(v.entries.begin(), v.entries.end(), [](const EntryVerdict& e) { return e.pass; });
    v.normality_pass = true;
    for (Eigen::Index j = 0; j < d; ++j) {
        NormalityDiagnostic n;
        n.label = stats.labels[static_cast<std::size_t>(j)];
        n.skewness = stats.skewness[j];
        n.excess_kurtosis = stats.excess_kurtosis[j];
        n.pass = std::fabs(n.skewness) <= tol.max_abs_skewness && std::fabs(n.excess_kurtosis) <= tol.max_abs_excess_kurtosis;
        v.normality_pass = v.normality_pass && n.pass;
        v.normality.push_back(n);
    }
    return v;
}

CovarianceVerdict compare_covariance(const EnsembleStats& stats, const CltPrediction& prediction,
                                     const CovarianceTolerance& tol) {
    return compare_covariance(stats, prediction.cov, tol);
}

BiasReport compare_bias(std::span<const BiasEstimate> empirical, const BiasPrediction& prediction,
                        const BiasTolerance& tol) {
    if (empirical.size() != prediction.arms.size()) throw DomainError("compare_bias: arm count mismatch");
    BiasReport report;
    bool any = false;
    bool all = true;
    for (std::size_t i = 0; i < empirical.size(); ++i) {
        const ArmBias& p = prediction.arms[i];
        BiasVerdict v;
        v.arm = i;
        v.scale_label = p.scale_label;
        if (p.scaled_constant) {
            v.compared = true;
            v.target = *p.scaled_constant;
            v.scaled_empirical = p.scale * empirical[i].bias;
            v.scaled_se = p.scale * empirical[i].se;
            v.tolerance = std::max({tol.abs_tol, tol.rel * std::fabs(v.target), tol.k * v.scaled_se});
            v.pass = std::fabs(v.scaled_empirical - v.target) <= v.tolerance;
            if (tol.require_sign && v.target < 0.0 && !(v.scaled_empirical < 0.0)) v.pass = false;
            any = true;
            all = all && v.pass;
        }
        report.arms.push_back(v);
    }
    report.pass = any && all;
    return report;
}

ScalarSummary summarize_scalar(std::span<const double> values) {
    ScalarSummary s;
    s.count = static_cast<std::int64_t>(values.size());
    if (values.empty()) return s;
    GroupedMoments m(1);
    Eigen::VectorXd x(1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        x[0] = values[i];
        m.add(i, x);
    }
    const MeanEstimate mean = m.mean_estimate();
    s.mean = mean.mean[0];
    s.mean_se = mean.se[0];
    auto sd_of = [](const CovarianceAccumulator& a) {
        return Eigen::VectorXd::Constant(1, std::sqrt(a.covariance()(0, 0)));
    };
    s.sd = sd_of(m.total())[0];
    s.sd_se = m.jackknife_se(sd_of)[0];
    return s;
}

RegretStats regret_stats(std::span<const RunResult> results, const RegretPrediction& prediction) {
    std::vector<const RunResult*> sorted;
    for (const auto& r : results) {
        if (r.pulls.size() != 2) throw DomainError("regret_stats: two-armed runs only");
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->replication < b->replication; });
    std::vector<double> values;
    values.reserve(sorted.size());
    for (auto* r : sorted) values.push_back(r->pseudo_regret);
    const ScalarSummary s = summarize_scalar(values);

    RegretStats out;
    out.count = s.count;
    out.mean = s.mean;
    out.sd = s.sd;
    out.mean_se = s.mean_se;
    out.sd_se = s.sd_se;
    out.defined = prediction.delta > 0.0 && prediction.typical_scale > 0.0 && prediction.clt_implied_sd > 0.0;
    if (out.defined) {
        out.mean_ratio = s.mean / prediction.typical_scale;
        out.mean_ratio_se = s.mean_se / prediction.typical_scale;
        out.sd_ratio = s.sd / prediction.clt_implied_sd;
        out.sd_ratio_se = s.sd_se / prediction.clt_implied_sd;
    }
    return out;
}

void write_standardized_csv(std::ostream& os, const EnsembleStats& stats) {
    os << "replication";
    for (const auto& l : stats.labels) os << ',' << l << "[std]";
    os << '\n';
    for (Eigen::Index r = 0; r < stats.standardized.rows(); ++r) {
        os << stats.replications[static_cast<std::size_t>(r)];
        for (Eigen::Index j = 0; j < stats.standardized.cols(); ++j) os << ',' << format_double(stats.standardized(r, j));
        os << '\n';
    }
}

} // namespace banditflow
