#include "banditflow/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include "banditflow/error.hpp"
#include "banditflow/moments.hpp"

namespace banditflow {

std::int64_t Batching::batch_size(std::int64_t horizon) const {
    if (mode == Mode::Exact || horizon < 2) return 1;
    const double t = static_cast<double>(horizon);
    const double b = std::floor(fraction * t / std::log(t));
    return b >= 1.0 ? static_cast<std::int64_t>(b) : 1;
}

const char* to_string(Batching::Mode mode) noexcept { return mode == Batching::Mode::Exact ? "exact" : "batched"; }

const char* to_string(Batching::ApplyTo apply_to) noexcept {
    return apply_to == Batching::ApplyTo::AllArms ? "all" : "superior";
}

void validate_run_config(const RunConfig& config) {
    const auto report = validate_instance(config.instance);
    if (!report.ok()) throw ConfigError("instance", report.violations.front());
    const auto k = static_cast<std::int64_t>(config.instance.arm_count());
    if (config.horizon < k) throw ConfigError("T", "horizon must be at least the number of arms");
    if (config.horizon > kMaxHorizon) throw ConfigError("T", "horizon exceeds 2^53");
    if (config.batching.mode == Batching::Mode::Batched && !(config.batching.fraction > 0.0)) {
        throw ConfigError("batching.fraction", "must be positive");
    }
    if (!std::is_sorted(config.checkpoints.begin(), config.checkpoints.end())) {
        throw ConfigError("checkpoints", "must be ascending");
    }
}

std::size_t tie_break(std::span<const double> indices) {
    if (indices.empty()) throw DomainError("tie_break: no arms");
    std::size_t best = 0;
    for (std::size_t i = 1; i < indices.size(); ++i) {
        if (indices[i] > indices[best]) best = i;
    }
    return best;
}

RunResult run_ucb(const RunConfig& config) {
    validate_run_config(config);
    const BanditInstance& inst = config.instance;
    const std::size_t k = inst.arm_count();
    const std::int64_t horizon = config.horizon;
    const bool gaussian = inst.family == RewardFamily::Gaussian;

    std::vector<RandomStream> streams;
    streams.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        streams.emplace_back(config.seed, config.replication_index, static_cast<std::uint32_t>(i));
    }
    std::vector<std::int64_t> pulls(k, 0);
    std::vector<CompensatedSum> sums(k);
    std::vector<double> means(k, 0.0);
    std::vector<double> inv_root(k, 0.0);
    std::vector<double> index(k, 0.0);

    auto draw = [&](std::size_t arm, std::int64_t count) {
        if (gaussian) {
            const double n = static_cast<double>(count);
            const double z = streams[arm].normal();
            return count == 1 ? inst.means[arm] + inst.std_devs[arm] * z
                              : n * inst.means[arm] + std::sqrt(n) * inst.std_devs[arm] * z;
        }
        return sample_sum(inst, arm, count, streams[arm]);
    };
    auto record = [&](std::size_t arm, std::int64_t count) {
        sums[arm].add(draw(arm, count));
        pulls[arm] += count;
        const double n = static_cast<double>(pulls[arm]);
        means[arm] = sums[arm].value() / n;
        inv_root[arm] = 1.0 / std::sqrt(n);
    };

    RunResult result;
    result.replication = config.replication_index;
    result.seed = config.seed;
    result.horizon = horizon;
    result.mode = config.batching.mode;

    std::size_t next_checkpoint = 0;
    auto maybe_checkpoint = [&](std::int64_t done) {
        while (next_checkpoint < config.checkpoints.size() && config.checkpoints[next_checkpoint] <= done) {
            result.trajectory.push_back({done, pulls});
            ++next_checkpoint;
        }
    };

    for (std::size_t i = 0; i < k; ++i) {
        record(i, 1);
        maybe_checkpoint(static_cast<std::int64_t>(i) + 1);
    }

    const bool batched = config.batching.mode == Batching::Mode::Batched;
    const bool batch_all = config.batching.apply_to == Batching::ApplyTo::AllArms;
    const std::int64_t batch = config.batching.batch_size(horizon);
    const std::int64_t timing_shift = config.timing == ExplorationTiming::NextEpoch ? 1 : 0;

    std::int64_t t = static_cast<std::int64_t>(k) + 1;
    while (t <= horizon) {
        const double ft = config.f.eval_unchecked(static_cast<double>(t + timing_shift));
        for (std::size_t i = 0; i < k; ++i) index[i] = means[i] + ft * inv_root[i];
        const std::size_t arm = tie_break(index);
        std::int64_t count = 1;
        if (batched && (batch_all || arm == 0)) count = std::min(batch, horizon - t + 1);
        record(arm, count);
        t += count;
        if (next_checkpoint < config.checkpoints.size()) maybe_checkpoint(t - 1);
    }

    result.pulls = std::move(pulls);
    result.sample_means = std::move(means);
    double regret = 0.0;
    for (std::size_t i = 1; i < k; ++i) regret += inst.gap(i) * static_cast<double>(result.pulls[i]);
    result.pseudo_regret = regret;
    return result;
}

void ordered_parallel_for(std::int64_t count, int parallelism, std::int64_t chunk,
                          const std::function<void(std::int64_t)>& job,
                          const std::function<void(std::int64_t)>& emit) {
    if (chunk < 1) chunk = 1;
    const int workers = std::max(1, parallelism);
    for (std::int64_t base = 0; base < count; base += chunk) {
        const std::int64_t end = std::min(count, base + chunk);
        const auto n_threads = static_cast<int>(std::min<std::int64_t>(workers, end - base));
        if (n_threads <= 1) {
            for (std::int64_t i = base; i < end; ++i) job(i);
        } else {
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
            std::vector<std::thread> threads;
            threads.reserve(static_cast<std::size_t>(n_threads));
            for (int w = 0; w < n_threads; ++w) {
                threads.emplace_back([&, w] {
                    try {
                        for (std::int64_t i = base + w; i < end; i += n_threads) job(i);
                    } catch (...) {
                        errors[static_cast<std::size_t>(w)] = std::current_exception();
                    }
                });
            }
            for (auto& th : threads) th.join();
            for (auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        }
        for (std::int64_t i = base; i < end; ++i) emit(i);
    }
}

void run_ensemble(const RunConfig& config, std::int64_t replications, int parallelism, const RunSink& sink) {
    validate_run_config(config);
    if (replications < 1) throw ConfigError("replications", "must be at least 1");
    const std::int64_t chunk = std::max<std::int64_t>(64, 16 * std::max(1, parallelism));
    std::vector<RunResult> slots(static_cast<std::size_t>(std::min(chunk, replications)));
    ordered_parallel_for(
        replications, parallelism, chunk,
        [&](std::int64_t r) {
            RunConfig c = config;
            c.replication_index = static_cast<std::uint32_t>(r);
            slots[static_cast<std::size_t>(r % chunk)] = run_ucb(c);
        },
        [&](std::int64_t r) { sink(slots[static_cast<std::size_t>(r % chunk)]); });
}

std::vector<RunResult> run_ensemble(const RunConfig& config, std::int64_t replications, int parallelism) {
    std::vector<RunResult> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(replications, 0)));
    run_ensemble(config, replications, parallelism, [&](const RunResult& r) { out.push_back(r); });
    return out;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_run_csv_header(std::ostream& os, std::size_t arm_count, bool with_clamped) {
    os << "replication,seed,T[pulls],mode";
    for (std::size_t i = 1; i <= arm_count; ++i) os << ",N_" << i << "[pulls]";
    for (std::size_t i = 1; i <= arm_count; ++i) os << ",mean_" << i << "[reward]";
    os << ",pseudo_regret[reward]";
    if (with_clamped) os << ",clamped";
    os << '\n';
}

void write_run_csv_row(std::ostream& os, const RunResult& r) {
    os << r.replication << ',' << r.seed << ',' << r.horizon << ',' << to_string(r.mode);
    for (auto n : r.pulls) os << ',' << n;
    for (double m : r.sample_means) os << ',' << format_double(m);
    os << ',' << format_double(r.pseudo_regret) << '\n';
}

} // namespace banditflow
