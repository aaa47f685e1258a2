#pragma once

// Generalized UCB1 simulation: exact step-by-step runs, batch-accelerated
// runs, and deterministic replication ensembles.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "banditflow/env.hpp"

namespace banditflow {

struct Batching {
    enum class Mode { Exact, Batched };
    enum class ApplyTo { AllArms, SuperiorOnly };

    Mode mode = Mode::Exact;
    /// Batch size is max(1, floor(fraction * T / ln T)).
    double fraction = 0.02;
    ApplyTo apply_to = ApplyTo::AllArms;

    static Batching exact() { return {}; }
    static Batching batched(double fraction = 0.02, ApplyTo apply_to = ApplyTo::AllArms) {
        return {Mode::Batched, fraction, apply_to};
    }

    std::int64_t batch_size(std::int64_t horizon) const;
};

const char* to_string(Batching::Mode mode) noexcept;
const char* to_string(Batching::ApplyTo apply_to) noexcept;

/// Epoch at which f is evaluated when choosing A_t: f(t) as in the algorithm
/// listing, or f(t + 1) as used in the analysis.
enum class ExplorationTiming { CurrentEpoch, NextEpoch };

struct RunConfig {
    BanditInstance instance;
    ExplorationFunction f = ExplorationFunction::sqrt_rho_log(2.0);
    std::int64_t horizon = 0;
    Batching batching;
    std::uint64_t seed = 0;
    std::uint32_t replication_index = 0;
    ExplorationTiming timing = ExplorationTiming::CurrentEpoch;
    /// Epochs at which to record pull counts (ascending). In batched mode the
    /// record is taken at the first batch boundary at or after the checkpoint.
    std::vector<std::int64_t> checkpoints;
};

struct Checkpoint {
    std::int64_t epoch = 0;
    std::vector<std::int64_t> pulls;
};

struct RunResult {
    std::uint32_t replication = 0;
    std::uint64_t seed = 0;
    std::int64_t horizon = 0;
    Batching::Mode mode = Batching::Mode::Exact;
    std::vector<std::int64_t> pulls;
    std::vector<double> sample_means;
    /// sum_i Delta_i N_i.
    double pseudo_regret = 0.0;
    std::vector<Checkpoint> trajectory;
};

/// Largest horizon accepted; pull counts stay exact in double arithmetic.
inline constexpr std::int64_t kMaxHorizon = std::int64_t{1} << 53;

/// Throws ConfigError if the configuration cannot be run.
void validate_run_config(const RunConfig& config);

/// One run of generalized UCB1. Epochs 1..K pull arms 1..K once each; every
/// later epoch t selects argmax_i mean_i + f(t)/sqrt(N_i) (lowest index on
/// ties). Arm i draws rewards from stream (seed, replication, i).
RunResult run_ucb(const RunConfig& config);

/// Lowest index among exact maximizers. Requires a nonempty span.
std::size_t tie_break(std::span<const double> indices);

using RunSink = std::function<void(const RunResult&)>;

/// Runs replications 0..replications-1 of `config` (replication_index is
/// overwritten) on up to `parallelism` threads and hands results to `sink`
/// in replication order. Output is independent of `parallelism`.
void run_ensemble(const RunConfig& config, std::int64_t replications, int parallelism, const RunSink& sink);

std::vector<RunResult> run_ensemble(const RunConfig& config, std::int64_t replications, int parallelism = 1);

/// Runs jobs 0..count-1 on up to `parallelism` threads in consecutive chunks
/// of `chunk` indices. All jobs of a chunk finish before `emit` is called for
/// them in index order, and emits finish before the next chunk starts, so a
/// job may write to slot i % chunk of a shared buffer.
void ordered_parallel_for(std::int64_t count, int parallelism, std::int64_t chunk,
                          const std::function<void(std::int64_t)>& job, const std::function<void(std::int64_t)>& emit);

/// CSV columns: replication,seed,T,mode,N_1..N_K,mean_1..mean_K,pseudo_regret,
/// with units in brackets.
void write_run_csv_header(std::ostream& os, std::size_t arm_count, bool with_clamped = false);
void write_run_csv_row(std::ostream& os, const RunResult& result);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

} // namespace banditflow
