#pragma once

// Ensemble statistics: standardized coordinates, moment estimates with
// grouped-jackknife standard errors, and verdicts against predictions.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "banditflow/engine.hpp"
#include "banditflow/fluid.hpp"
#include "banditflow/moments.hpp"
#include "banditflow/predict.hpp"

namespace banditflow {

struct MeanEstimate {
    Eigen::VectorXd mean;
    Eigen::VectorXd se;
};

struct CovEstimate {
    Eigen::MatrixXd cov;
    Eigen::MatrixXd se;
};

/// Streaming moments split into groups by key mod `groups`. Standard errors
/// are leave-one-group-out jackknife estimates; below `kJackknifeMinCount`
/// samples the jackknife deletes single samples instead.
class GroupedMoments {
public:
    static constexpr std::int64_t kJackknifeMinCount = 100;

    explicit GroupedMoments(Eigen::Index dim, int groups = 50);

    void add(std::uint64_t key, const Eigen::Ref<const Eigen::VectorXd>& x);

    std::int64_t count() const noexcept { return count_; }
    Eigen::Index dim() const noexcept { return dim_; }
    /// All groups merged in group order.
    CovarianceAccumulator total() const;
    MeanEstimate mean_estimate() const;
    CovEstimate covariance_estimate() const;

    using Functional = std::function<Eigen::VectorXd(const CovarianceAccumulator&)>;
    /// Jackknife standard error of an arbitrary smooth functional of the moments.
    Eigen::VectorXd jackknife_se(const Functional& statistic) const;

private:
    Eigen::Index dim_;
    std::int64_t count_ = 0;
    std::vector<CovarianceAccumulator> groups_;
    std::vector<Eigen::VectorXd> head_; // first kJackknifeMinCount samples, for the fallback
};

struct BiasEstimate {
    double bias = 0.0;
    double se = 0.0;
};

struct EnsembleStats {
    std::int64_t count = 0;
    /// Replication ids in ascending order; row r of `standardized` belongs to replications[r].
    std::vector<std::uint32_t> replications;
    std::vector<std::string> labels;
    Eigen::MatrixXd standardized;
    Eigen::VectorXd emp_mean;
    Eigen::VectorXd mean_se;
    Eigen::MatrixXd emp_cov;
    Eigen::MatrixXd cov_se;
    Eigen::VectorXd skewness;
    Eigen::VectorXd excess_kurtosis;
    /// mean(sample mean_i) - mu_i per arm; empty for synthetic input.
    std::vector<BiasEstimate> emp_bias;
};

/// Builds the prediction's coordinates from each run: W = scale (N_arm - n*_arm),
/// Z = scale (mean_arm - mu_arm). Runs are processed in replication order.
/// Throws DomainError on dimension mismatch or an empty ensemble.
EnsembleStats standardize(std::span<const RunResult> results, const FluidSolution& fluid,
                          const CltPrediction& prediction, const BanditInstance& instance);

/// Statistics of given samples (one row per replication, replication id = row).
EnsembleStats summarize_samples(const Eigen::MatrixXd& samples, std::vector<std::string> labels);

struct CovarianceTolerance {
    double abs_tol = 0.02;
    double k = 4.0;
    double max_abs_skewness = 0.5;
    double max_abs_excess_kurtosis = 1.0;
};

struct EntryVerdict {
    std::string row;
    std::string col;
    double target = 0.0;
    double empirical = 0.0;
    double se = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct NormalityDiagnostic {
    std::string label;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    bool pass = false;
};

struct CovarianceVerdict {
    std::vector<EntryVerdict> entries; ///< upper triangle, row-major
    /// Entry with the largest |empirical - target| / tolerance.
    std::size_t worst = 0;
    std::vector<NormalityDiagnostic> normality;
    bool pass = false;           ///< every entry within tolerance
    bool normality_pass = false; ///< informational
};

/// Entrywise |emp - target| <= max(abs_tol, k SE).
CovarianceVerdict compare_covariance(const EnsembleStats& stats, const Eigen::MatrixXd& target,
                                     const CovarianceTolerance& tolerance = {});
CovarianceVerdict compare_covariance(const EnsembleStats& stats, const CltPrediction& prediction,
                                     const CovarianceTolerance& tolerance = {});

struct BiasTolerance {
    /// Fraction of |target| allowed.
    double rel = 0.4;
    double abs_tol = 0.0;
    /// Multiple of the scaled standard error allowed (0 disables).
    double k = 0.0;
    /// A negative target also requires a negative estimate.
    bool require_sign = true;
};

struct BiasVerdict {
    std::size_t arm = 0;
    bool compared = false; ///< false when the prediction has no constant for this arm
    double target = 0.0;
    double scaled_empirical = 0.0;
    double scaled_se = 0.0;
    double tolerance = 0.0;
    std::string scale_label;
    bool pass = false;
};

struct BiasReport {
    std::vector<BiasVerdict> arms;
    bool pass = false; ///< all compared arms pass (and at least one was compared)
};

/// Scales each arm's bias by the prediction's scale and compares it with the
/// scaled constant: |emp - target| <= max(abs_tol, rel |target|, k SE).
BiasReport compare_bias(std::span<const BiasEstimate> empirical, const BiasPrediction& prediction,
                        const BiasTolerance& tolerance = {});

struct RegretStats {
    std::int64_t count = 0;
    double mean = 0.0;
    double sd = 0.0;
    double mean_se = 0.0;
    double sd_se = 0.0;
    /// Ratios are undefined for a zero gap.
    bool defined = false;
    double mean_ratio = 0.0;
    double mean_ratio_se = 0.0;
    double sd_ratio = 0.0;
    double sd_ratio_se = 0.0;
};

/// mean(R)/R*_T and SD(R)/clt_implied_sd with standard errors. Two arms only.
RegretStats regret_stats(std::span<const RunResult> results, const RegretPrediction& prediction);

struct ScalarSummary {
    std::int64_t count = 0;
    double mean = 0.0;
    double sd = 0.0;
    double mean_se = 0.0;
    double sd_se = 0.0;
};

/// Mean and standard deviation of values listed in replication order.
ScalarSummary summarize_scalar(std::span<const double> values);

/// Header "replication,<label>[std],..." then one row per replication.
void write_standardized_csv(std::ostream& os, const EnsembleStats& stats);

} // namespace banditflow
