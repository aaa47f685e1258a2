#include "banditflow/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "banditflow/engine.hpp"
#include "banditflow/error.hpp"
#include "banditflow/fluid.hpp"
#include "banditflow/predict.hpp"
#include "banditflow/stats.hpp"
#include "banditflow/stylized.hpp"

namespace banditflow {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSchema = "banditflow/v1";

// ---------------------------------------------------------------- JSON helpers

json matrix_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw ConfigError(path, "expected {rows, cols, data}");
    }
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ConfigError(path + ".data", "length does not match rows * cols");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& x = data[static_cast<std::size_t>(i * cols + c)];
            if (!x.is_number()) throw ConfigError(path + ".data", "entries must be numbers");
            m(i, c) = x.get<double>();
        }
    }
    return m;
}

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(join_path(path, it.key()), "unknown key");
    }
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> get_numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

std::int64_t parse_integer_value(double x, const std::string& path) {
    if (!std::isfinite(x) || x != std::floor(x)) throw ConfigError(path, "expected an integer");
    if (x < 0 || x > static_cast<double>(kMaxHorizon)) throw ConfigError(path, "value out of range");
    return static_cast<std::int64_t>(x);
}

std::int64_t parse_integer_text(const std::string& text, const std::string& path) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(path, "cannot parse '" + text + "' as a number");
    }
    if (used != text.size()) throw ConfigError(path, "cannot parse '" + text + "' as a number");
    return parse_integer_value(x, path);
}

std::int64_t get_integer(const json& j, const std::string& path) {
    if (j.is_number_integer()) return parse_integer_value(static_cast<double>(j.get<std::int64_t>()), path);
    if (j.is_number()) return parse_integer_value(j.get<double>(), path);
    if (j.is_string()) return parse_integer_text(j.get<std::string>(), path);
    throw ConfigError(path, "expected an integer");
}

std::uint64_t get_seed(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw ConfigError(path, "expected a non-negative integer");
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigError(path, "seed out of range");
        }
    }
    throw ConfigError(path, "expected a non-negative integer");
}

std::uint64_t parse_seed_text(const std::string& s, const std::string& path) { return get_seed(json(s), path); }

// ---------------------------------------------------------------- experiment config

struct GapConfig {
    std::string mode = "zero"; // zero | fixed | moderate | superior_share
    double value = 0.0;
    double base_mean = 0.0;
    std::vector<double> std_devs{1.0, 1.0};
    RewardFamily family = RewardFamily::Gaussian;

    GapSpec spec() const {
        if (mode == "fixed") return GapSpec::fixed(value);
        if (mode == "moderate") return GapSpec::moderate(value);
        if (mode == "superior_share") return GapSpec::superior_share(value);
        return GapSpec::zero();
    }
};

struct ExplorationConfig {
    std::string kind = "sqrt_rho_log"; // sqrt_rho_log | log_power
    double rho = 2.0;
    double scale = 1.0;
    double exponent = 0.5;
    double beta = 0.25;

    ExplorationFunction make() const {
        return kind == "log_power" ? ExplorationFunction::log_power(scale, exponent, beta)
                                   : ExplorationFunction::sqrt_rho_log(rho, beta);
    }
};

struct ExperimentConfig {
    std::optional<BanditInstance> instance;
    std::optional<GapConfig> gap;
    ExplorationConfig exploration;
    std::vector<std::int64_t> horizons{10000};
    std::int64_t replications = 1000;
    Batching batching;
    ExplorationTiming timing = ExplorationTiming::CurrentEpoch;
    std::uint64_t seed = 0;
    int parallel = 1;
    std::string out;
    LambdaSource lambda_source = LambdaSource::FiniteT;
    DeltaRule delta_rule;
    std::string check = "covariance"; // covariance | bias | regret
    std::string prediction;
    CovarianceTolerance cov_tol;
    BiasTolerance bias_tol;
    double mean_ratio_lo = 0.85;
    double mean_ratio_hi = 1.15;
    double sd_ratio_lo = 0.7;
    double sd_ratio_hi = 1.3;

    BanditInstance instance_at(std::int64_t horizon) const {
        if (instance) return *instance;
        const GapConfig g = gap.value_or(GapConfig{});
        return two_arm_instance(g.spec(), exploration.make(), static_cast<double>(horizon), g.base_mean, g.family,
                                g.std_devs.at(0), g.std_devs.at(1));
    }

    std::optional<double> lambda_limit() const {
        if (lambda_source == LambdaSource::FiniteT) return std::nullopt;
        if (instance) {
            throw ConfigError("lambda_source", "'limit' needs a two-armed gap specification");
        }
        return lambda_star_limit(gap.value_or(GapConfig{}).spec());
    }
};

RewardFamily parse_family(const json& j, const std::string& path) {
    const std::string s = get_string(j, path);
    if (s == "gaussian") return RewardFamily::Gaussian;
    if (s == "bernoulli") return RewardFamily::Bernoulli;
    throw ConfigError(path, "expected 'gaussian' or 'bernoulli'");
}

std::string family_name(RewardFamily f) { return f == RewardFamily::Gaussian ? "gaussian" : "bernoulli"; }

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "", {"schema", "instance", "gap", "exploration", "T", "replications", "batching", "timing", "seed",
                       "parallel", "out", "lambda_source", "delta_rule", "check", "prediction", "tolerance"});
    if (!j.contains("schema")) throw ConfigError("schema", "missing (expected \"banditflow/v1\")");
    if (get_string(j.at("schema"), "schema") != kSchema) throw ConfigError("schema", "unsupported schema version");
    ExperimentConfig c;
    if (j.contains("instance") && j.contains("gap")) throw ConfigError("instance", "give either 'instance' or 'gap', not both");
    if (j.contains("instance")) {
        const auto& ji = j.at("instance");
        check_keys(ji, "instance", {"family", "means", "std_devs", "sigma_bound"});
        const RewardFamily fam = ji.contains("family") ? parse_family(ji.at("family"), "instance.family") : RewardFamily::Gaussian;
        if (!ji.contains("means")) throw ConfigError("instance.means", "missing");
        const auto means = get_numbers(ji.at("means"), "instance.means");
        BanditInstance inst;
        if (fam == RewardFamily::Bernoulli) {
            if (ji.contains("std_devs")) throw ConfigError("instance.std_devs", "not allowed for bernoulli rewards");
            inst = BanditInstance::bernoulli(means);
        } else {
            if (!ji.contains("std_devs")) throw ConfigError("instance.std_devs", "missing");
            inst = BanditInstance::gaussian(means, get_numbers(ji.at("std_devs"), "instance.std_devs"));
        }
        if (ji.contains("sigma_bound")) inst.sigma_bound = get_number(ji.at("sigma_bound"), "instance.sigma_bound");
        const auto report = validate_instance(inst);
        if (!report.ok()) throw ConfigError("instance", report.violations.front());
        c.instance = inst;
    }
    if (j.contains("gap")) {
        const auto& jg = j.at("gap");
        check_keys(jg, "gap", {"mode", "value", "base_mean", "std_devs", "family"});
        GapConfig g;
        if (jg.contains("mode")) g.mode = get_string(jg.at("mode"), "gap.mode");
        if (g.mode != "zero" && g.mode != "fixed" && g.mode != "moderate" && g.mode != "superior_share") {
            throw ConfigError("gap.mode", "expected zero, fixed, moderate or superior_share");
        }
        if (jg.contains("value")) g.value = get_number(jg.at("value"), "gap.value");
        if (g.mode != "zero" && !jg.contains("value")) throw ConfigError("gap.value", "missing");
        if (jg.contains("base_mean")) g.base_mean = get_number(jg.at("base_mean"), "gap.base_mean");
        if (jg.contains("std_devs")) g.std_devs = get_numbers(jg.at("std_devs"), "gap.std_devs");
        if (g.std_devs.size() != 2) throw ConfigError("gap.std_devs", "expected two entries");
        if (jg.contains("family")) g.family = parse_family(jg.at("family"), "gap.family");
        try {
            (void)g.spec();
        } catch (const DomainError& e) {
            throw ConfigError("gap.value", e.what());
        }
        c.gap = g;
    }
    if (j.contains("exploration")) {
        const auto& je = j.at("exploration");
        check_keys(je, "exploration", {"kind", "rho", "scale", "exponent", "beta"});
        if (je.contains("kind")) c.exploration.kind = get_string(je.at("kind"), "exploration.kind");
        if (c.exploration.kind != "sqrt_rho_log" && c.exploration.kind != "log_power") {
            throw ConfigError("exploration.kind", "expected sqrt_rho_log or log_power");
        }
        if (je.contains("rho")) c.exploration.rho = get_number(je.at("rho"), "exploration.rho");
        if (je.contains("scale")) c.exploration.scale = get_number(je.at("scale"), "exploration.scale");
        if (je.contains("exponent")) c.exploration.exponent = get_number(je.at("exponent"), "exploration.exponent");
        if (je.contains("beta")) c.exploration.beta = get_number(je.at("beta"), "exploration.beta");
        try {
            const auto report = validate_exploration(c.exploration.make());
            if (!report.ok()) throw ConfigError("exploration", report.violations.front());
        } catch (const DomainError& e) {
            throw ConfigError("exploration", e.what());
        }
    }
    if (j.contains("T")) {
        const auto& jt = j.at("T");
        c.horizons.clear();
        if (jt.is_array()) {
            for (std::size_t i = 0; i < jt.size(); ++i) c.horizons.push_back(get_integer(jt[i], "T[" + std::to_string(i) + "]"));
        } else {
            c.horizons.push_back(get_integer(jt, "T"));
        }
        if (c.horizons.empty()) throw ConfigError("T", "empty ladder");
    }
    if (j.contains("replications")) c.replications = get_integer(j.at("replications"), "replications");
    if (j.contains("batching")) {
        const auto& jb = j.at("batching");
        check_keys(jb, "batching", {"mode", "fraction", "apply_to"});
        if (jb.contains("mode")) {
            const std::string m = get_string(jb.at("mode"), "batching.mode");
            if (m != "exact" && m != "batched") throw ConfigError("batching.mode", "expected exact or batched");
            c.batching.mode = m == "exact" ? Batching::Mode::Exact : Batching::Mode::Batched;
        }
        if (jb.contains("fraction")) c.batching.fraction = get_number(jb.at("fraction"), "batching.fraction");
        if (jb.contains("apply_to")) {
            const std::string a = get_string(jb.at("apply_to"), "batching.apply_to");
            if (a != "all" && a != "superior") throw ConfigError("batching.apply_to", "expected all or superior");
            c.batching.apply_to = a == "all" ? Batching::ApplyTo::AllArms : Batching::ApplyTo::SuperiorOnly;
        }
    }
    if (j.contains("timing")) {
        const std::string t = get_string(j.at("timing"), "timing");
        if (t != "current" && t != "next") throw ConfigError("timing", "expected current or next");
        c.timing = t == "current" ? ExplorationTiming::CurrentEpoch : ExplorationTiming::NextEpoch;
    }
    if (j.contains("seed")) c.seed = get_seed(j.at("seed"), "seed");
    if (j.contains("parallel")) c.parallel = static_cast<int>(get_integer(j.at("parallel"), "parallel"));
    if (j.contains("out")) c.out = get_string(j.at("out"), "out");
    if (j.contains("lambda_source")) {
        const std::string s = get_string(j.at("lambda_source"), "lambda_source");
        if (s != "finite" && s != "limit") throw ConfigError("lambda_source", "expected finite or limit");
        c.lambda_source = s == "finite" ? LambdaSource::FiniteT : LambdaSource::Limit;
    }
    if (j.contains("delta_rule")) {
        const auto& jd = j.at("delta_rule");
        check_keys(jd, "delta_rule", {"kind", "value"});
        const std::string k = jd.contains("kind") ? get_string(jd.at("kind"), "delta_rule.kind") : "power_of_log_inv";
        if (k != "power_of_log_inv" && k != "explicit") throw ConfigError("delta_rule.kind", "expected power_of_log_inv or explicit");
        const double v = jd.contains("value") ? get_number(jd.at("value"), "delta_rule.value") : 0.25;
        c.delta_rule = k == "explicit" ? DeltaRule::explicit_value(v) : DeltaRule::power_of_log_inv(v);
    }
    if (j.contains("check")) {
        c.check = get_string(j.at("check"), "check");
        if (c.check != "covariance" && c.check != "bias" && c.check != "regret") {
            throw ConfigError("check", "expected covariance, bias or regret");
        }
    }
    if (j.contains("prediction")) c.prediction = get_string(j.at("prediction"), "prediction");
    if (j.contains("tolerance")) {
        const auto& jt = j.at("tolerance");
        check_keys(jt, "tolerance", {"abs_tol", "k", "rel", "max_abs_skewness", "max_abs_excess_kurtosis",
                                     "mean_ratio", "sd_ratio"});
        if (jt.contains("abs_tol")) {
            c.cov_tol.abs_tol = get_number(jt.at("abs_tol"), "tolerance.abs_tol");
            c.bias_tol.abs_tol = c.cov_tol.abs_tol;
        }
        if (jt.contains("k")) {
            c.cov_tol.k = get_number(jt.at("k"), "tolerance.k");
            c.bias_tol.k = c.cov_tol.k;
        }
        if (jt.contains("rel")) c.bias_tol.rel = get_number(jt.at("rel"), "tolerance.rel");
        if (jt.contains("max_abs_skewness")) c.cov_tol.max_abs_skewness = get_number(jt.at("max_abs_skewness"), "tolerance.max_abs_skewness");
        if (jt.contains("max_abs_excess_kurtosis")) {
            c.cov_tol.max_abs_excess_kurtosis = get_number(jt.at("max_abs_excess_kurtosis"), "tolerance.max_abs_excess_kurtosis");
        }
        if (jt.contains("mean_ratio")) {
            const auto b = get_numbers(jt.at("mean_ratio"), "tolerance.mean_ratio");
            if (b.size() != 2) throw ConfigError("tolerance.mean_ratio", "expected [lo, hi]");
            c.mean_ratio_lo = b[0];
            c.mean_ratio_hi = b[1];
        }
        if (jt.contains("sd_ratio")) {
            const auto b = get_numbers(jt.at("sd_ratio"), "tolerance.sd_ratio");
            if (b.size() != 2) throw ConfigError("tolerance.sd_ratio", "expected [lo, hi]");
            c.sd_ratio_lo = b[0];
            c.sd_ratio_hi = b[1];
        }
    }
    return c;
}

json config_json(const ExperimentConfig& c) {
    json j;
    j["schema"] = kSchema;
    if (c.instance) {
        json ji;
        ji["family"] = family_name(c.instance->family);
        ji["means"] = c.instance->means;
        if (c.instance->family == RewardFamily::Gaussian) ji["std_devs"] = c.instance->std_devs;
        ji["sigma_bound"] = c.instance->sigma_bound;
        j["instance"] = ji;
    } else {
        const GapConfig g = c.gap.value_or(GapConfig{});
        j["gap"] = {{"mode", g.mode}, {"value", g.value}, {"base_mean", g.base_mean}, {"std_devs", g.std_devs},
                    {"family", family_name(g.family)}};
    }
    j["exploration"] = {{"kind", c.exploration.kind}, {"rho", c.exploration.rho}, {"scale", c.exploration.scale},
                        {"exponent", c.exploration.exponent}, {"beta", c.exploration.beta}};
    j["T"] = c.horizons;
    j["replications"] = c.replications;
    j["batching"] = {{"mode", to_string(c.batching.mode)}, {"fraction", c.batching.fraction},
                     {"apply_to", to_string(c.batching.apply_to)}};
    j["timing"] = c.timing == ExplorationTiming::CurrentEpoch ? "current" : "next";
    j["seed"] = c.seed;
    j["parallel"] = c.parallel;
    j["out"] = c.out;
    j["lambda_source"] = to_string(c.lambda_source);
    j["delta_rule"] = {{"kind", c.delta_rule.kind == DeltaRule::Kind::Explicit ? "explicit" : "power_of_log_inv"},
                       {"value", c.delta_rule.value}};
    j["check"] = c.check;
    j["prediction"] = c.prediction;
    j["tolerance"] = {{"abs_tol", c.cov_tol.abs_tol},
                      {"k", c.cov_tol.k},
                      {"rel", c.bias_tol.rel},
                      {"max_abs_skewness", c.cov_tol.max_abs_skewness},
                      {"max_abs_excess_kurtosis", c.cov_tol.max_abs_excess_kurtosis},
                      {"mean_ratio", {c.mean_ratio_lo, c.mean_ratio_hi}},
                      {"sd_ratio", {c.sd_ratio_lo, c.sd_ratio_hi}}};
    return j;
}

json read_json_file(const std::string& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size()); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(field, path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
    }
}

// ---------------------------------------------------------------- common flags

struct CommonFlags {
    std::string config;
    std::string seed;
    std::string reps;
    std::string horizons;
    int parallel = 0;
    std::string out;
    bool batched = false;
    bool exact = false;
    std::string lambda_source;
    std::string prediction;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "experiment config (JSON, schema banditflow/v1)");
    app->add_option("--seed", f.seed, "master seed (falls back to BANDITFLOW_SEED)");
    app->add_option("--reps", f.reps, "replications");
    app->add_option("--T", f.horizons, "horizon, e.g. 1e7, or a ladder 1e3,1e4,1e5");
    app->add_option("--parallel", f.parallel, "worker threads");
    app->add_option("--out", f.out, "output directory");
    auto* b = app->add_flag("--batched", f.batched, "batch-accelerated runs");
    auto* e = app->add_flag("--exact", f.exact, "step-by-step runs");
    b->excludes(e);
    app->add_option("--lambda-source", f.lambda_source, "sampling ratio used in predictions: finite or limit");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig c;
    bool seed_set = false;
    if (!f.config.empty()) {
        const json j = read_json_file(f.config, "config");
        c = parse_config(j);
        seed_set = j.contains("seed");
    }
    if (!f.seed.empty()) {
        c.seed = parse_seed_text(f.seed, "--seed");
    } else if (!seed_set) {
        if (const char* env = std::getenv("BANDITFLOW_SEED"); env != nullptr && *env != '\0') {
            c.seed = parse_seed_text(env, "BANDITFLOW_SEED");
        }
    }
    if (!f.reps.empty()) c.replications = parse_integer_text(f.reps, "--reps");
    if (!f.horizons.empty()) {
        const auto h = parse_horizons(f.horizons);
        c.horizons.assign(h.begin(), h.end());
    }
    if (f.parallel > 0) c.parallel = f.parallel;
    if (!f.out.empty()) c.out = f.out;
    if (f.batched) c.batching.mode = Batching::Mode::Batched;
    if (f.exact) c.batching.mode = Batching::Mode::Exact;
    if (!f.lambda_source.empty()) {
        if (f.lambda_source != "finite" && f.lambda_source != "limit") throw ConfigError("--lambda-source", "expected finite or limit");
        c.lambda_source = f.lambda_source == "finite" ? LambdaSource::FiniteT : LambdaSource::Limit;
    }
    if (!f.prediction.empty()) c.prediction = f.prediction;
    if (c.replications < 1) throw ConfigError("replications", "must be at least 1");
    if (c.parallel < 1) throw ConfigError("parallel", "must be at least 1");
    return c;
}

json report_header(const std::string& command, const ExperimentConfig& c) {
    json r;
    r["schema"] = kSchema;
    r["command"] = command;
    r["seed"] = c.seed;
    r["effective_config"] = config_json(c);
    r["run_metadata"] = {{"initialization", "each arm pulled once, in index order"},
                         {"exploration_timing", c.timing == ExplorationTiming::CurrentEpoch ? "f(t)" : "f(t+1)"},
                         {"tie_break", "lowest arm index"},
                         {"normal_generator", "Philox4x32-10 + AS241 inverse CDF"}};
    return r;
}

std::filesystem::path ensure_out(const std::string& dir) {
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw ConfigError("out", "cannot write '" + path.string() + "'");
    o << text;
}

void emit_report(const json& report, const ExperimentConfig& c, const std::string& name, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (!c.out.empty()) write_text(ensure_out(c.out) / name, text);
    out << text;
}

json regime_json(const RegimeLabel& r) {
    return {{"kind", to_string(r.kind)}, {"theta", r.theta}, {"ratio", r.finite_ratio}};
}

RegimeLabel regime_for(const ExperimentConfig& c, const FluidSolution& fluid, std::int64_t horizon) {
    if (c.gap) {
        const double t = static_cast<double>(horizon);
        std::vector<double> grid{t / 100.0, t / 10.0, t};
        if (grid.front() < 3.0) grid = {3.0, std::max(4.0, std::sqrt(t)), std::max(5.0, t)};
        return classify_regime(c.gap->spec(), c.exploration.make(), grid).label;
    }
    return fluid.regime.at(1);
}

CltPrediction clt_for(const ExperimentConfig& c, const FluidSolution& fluid, const BanditInstance& inst) {
    if (inst.arm_count() == 2) return clt_two_arm(fluid, inst, fluid.f_T, c.lambda_limit());
    if (c.lambda_source == LambdaSource::Limit) {
        throw ConfigError("lambda_source", "'limit' is only available for two-armed gap specifications");
    }
    return clt_k_arm(fluid, inst, fluid.f_T);
}

json clt_json(const CltPrediction& p) {
    json labels = json::array();
    for (const auto& co : p.coordinates) labels.push_back(co.label());
    return {{"form", p.form == CltPrediction::Form::TwoArm ? "two-arm" : "k-arm"},
            {"labels", labels},
            {"w_scale", vector_json(p.w_scale)},
            {"z_scale", vector_json(p.z_scale)},
            {"cov", matrix_json(p.cov)},
            {"lambda_source", to_string(p.lambda_source)},
            {"lambda", matrix_json(p.lambda)}};
}

json fluid_json(const FluidSolution& s) {
    json regimes = json::array();
    for (const auto& r : s.regime) regimes.push_back(regime_json(r));
    return {{"T", s.horizon},         {"f_T", s.f_T},       {"n_star", s.n_star},
            {"residuals", s.residuals}, {"sum_residual", s.sum_residual}, {"lambda", matrix_json(s.lambda)},
            {"regime", regimes}};
}

RunConfig run_config_for(const ExperimentConfig& c, std::int64_t horizon) {
    RunConfig rc;
    rc.instance = c.instance_at(horizon);
    rc.f = c.exploration.make();
    rc.horizon = horizon;
    rc.batching = c.batching;
    rc.seed = c.seed;
    rc.timing = c.timing;
    return rc;
}

// ---------------------------------------------------------------- subcommands

int cmd_fluid(const ExperimentConfig& c, std::ostream& out) {
    json report = report_header("fluid", c);
    json results = json::array();
    for (auto t : c.horizons) {
        const auto inst = c.instance_at(t);
        results.push_back(fluid_json(solve_fluid(inst, c.exploration.make(), static_cast<double>(t))));
    }
    report["results"] = results;
    emit_report(report, c, "fluid.json", out);
    return kExitOk;
}

int cmd_predict_clt(const ExperimentConfig& c, std::ostream& out) {
    json report = report_header("predict-clt", c);
    json results = json::array();
    for (auto t : c.horizons) {
        const auto inst = c.instance_at(t);
        const auto fluid = solve_fluid(inst, c.exploration.make(), static_cast<double>(t));
        json r = clt_json(clt_for(c, fluid, inst));
        r["T"] = t;
        results.push_back(r);
    }
    report["results"] = results;
    emit_report(report, c, "predict-clt.json", out);
    return kExitOk;
}

int cmd_predict_regret(const ExperimentConfig& c, std::ostream& out) {
    json report = report_header("predict-regret", c);
    json results = json::array();
    for (auto t : c.horizons) {
        const auto inst = c.instance_at(t);
        if (inst.arm_count() != 2) throw ConfigError("instance", "regret prediction needs two arms");
        const auto fluid = solve_fluid(inst, c.exploration.make(), static_cast<double>(t));
        const auto p = regret_prediction(fluid, inst, fluid.f_T, c.lambda_limit());
        results.push_back({{"T", t},
                           {"lambda", p.lambda},
                           {"delta[reward]", p.delta},
                           {"typical_scale[reward]", p.typical_scale},
                           {"typical_deviation[reward]", p.typical_deviation},
                           {"clt_implied_sd[reward]", p.clt_implied_sd}});
    }
    report["results"] = results;
    emit_report(report, c, "predict-regret.json", out);
    return kExitOk;
}

json bias_json(const BiasPrediction& p) {
    json arms = json::array();
    for (std::size_t i = 0; i < p.arms.size(); ++i) {
        const auto& a = p.arms[i];
        json ja = {{"arm", i + 1}, {"bias[reward]", a.bias}, {"scale", a.scale}, {"scale_label", a.scale_label}};
        ja["scaled_constant"] = a.scaled_constant ? json(*a.scaled_constant) : json(nullptr);
        arms.push_back(ja);
    }
    json scaled = json::array();
    for (const auto& a : p.arms) scaled.push_back(a.scaled_constant ? json(*a.scaled_constant) : json(nullptr));
    return {{"T", p.horizon}, {"regime", regime_json(p.regime)}, {"rho", p.rho}, {"lambda", p.lambda},
            {"arms", arms},   {"scaled_constants", scaled}};
}

BiasPrediction bias_for(const ExperimentConfig& c, std::int64_t t) {
    const auto inst = c.instance_at(t);
    const auto f = c.exploration.make();
    const auto fluid = solve_fluid(inst, f, static_cast<double>(t));
    try {
        return bias_prediction(fluid, inst, f, static_cast<double>(t), regime_for(c, fluid, t), c.lambda_limit());
    } catch (const UnsupportedConfiguration& e) {
        throw ConfigError("exploration", e.what());
    }
}

int cmd_predict_bias(const ExperimentConfig& c, std::ostream& out) {
    json report = report_header("predict-bias", c);
    json results = json::array();
    for (auto t : c.horizons) results.push_back(bias_json(bias_for(c, t)));
    report["results"] = results;
    emit_report(report, c, "predict-bias.json", out);
    return kExitOk;
}

int cmd_simulate(const ExperimentConfig& c, std::ostream& out) {
    std::ostringstream csv;
    const std::size_t k = c.instance_at(c.horizons.front()).arm_count();
    write_run_csv_header(csv, k);
    json summaries = json::array();
    for (auto t : c.horizons) {
        const RunConfig rc = run_config_for(c, t);
        GroupedMoments pulls(static_cast<Eigen::Index>(k));
        Eigen::VectorXd row(static_cast<Eigen::Index>(k));
        run_ensemble(rc, c.replications, c.parallel, [&](const RunResult& r) {
            write_run_csv_row(csv, r);
            for (std::size_t i = 0; i < k; ++i) row[static_cast<Eigen::Index>(i)] = static_cast<double>(r.pulls[i]);
            pulls.add(r.replication, row);
        });
        const auto est = pulls.mean_estimate();
        summaries.push_back({{"T", t}, {"mean_pulls", vector_json(est.mean)}, {"mean_pulls_se", vector_json(est.se)},
                             {"batch_size", rc.batching.batch_size(t)}});
    }
    if (c.out.empty()) {
        out << csv.str();
        return kExitOk;
    }
    const auto dir = ensure_out(c.out);
    write_text(dir / "runs.csv", csv.str());
    json report = report_header("simulate", c);
    report["csv"] = "runs.csv";
    report["results"] = summaries;
    write_text(dir / "report.json", report.dump(2) + "\n");
    return kExitOk;
}

StylizedConfig stylized_config_for(const ExperimentConfig& c, std::int64_t t) {
    StylizedConfig sc;
    sc.instance = c.instance_at(t);
    sc.f = c.exploration.make();
    sc.horizon = t;
    sc.delta_rule = c.delta_rule;
    sc.seed = c.seed;
    sc.lambda = c.lambda_limit();
    return sc;
}

int cmd_stylized(const ExperimentConfig& c, std::ostream& out) {
    std::ostringstream csv;
    write_run_csv_header(csv, 2, true);
    json results = json::array();
    for (auto t : c.horizons) {
        const StylizedConfig sc = stylized_config_for(c, t);
        GroupedMoments m(2);
        Eigen::VectorXd row(2);
        std::int64_t clamped = 0;
        run_stylized_ensemble(sc, c.replications, c.parallel, [&](const StylizedSample& s) {
            write_stylized_csv_row(csv, sc, s);
            for (std::size_t i = 0; i < 2; ++i) row[static_cast<Eigen::Index>(i)] = s.mu_tilde[i] - sc.instance.means[i];
            m.add(s.replication, row);
            clamped += s.clamped ? 1 : 0;
        });
        const auto est = m.mean_estimate();
        const auto plan = plan_stylized(sc);
        results.push_back({{"T", t},
                           {"delta_T", plan.delta},
                           {"lambda", plan.lambda},
                           {"bias[reward]", vector_json(est.mean)},
                           {"bias_se[reward]", vector_json(est.se)},
                           {"clamp_frequency", static_cast<double>(clamped) / static_cast<double>(c.replications)}});
    }
    if (c.out.empty()) {
        out << csv.str();
        return kExitOk;
    }
    const auto dir = ensure_out(c.out);
    write_text(dir / "stylized.csv", csv.str());
    json report = report_header("stylized", c);
    report["csv"] = "stylized.csv";
    report["results"] = results;
    write_text(dir / "report.json", report.dump(2) + "\n");
    return kExitOk;
}

json covariance_verdict_json(const CovarianceVerdict& v) {
    json entries = json::array();
    for (const auto& e : v.entries) {
        entries.push_back({{"entry", "cov(" + e.row + "," + e.col + ")"},
                           {"target", e.target},
                           {"empirical", e.empirical},
                           {"se", e.se},
                           {"tolerance", e.tolerance},
                           {"pass", e.pass}});
    }
    json normality = json::array();
    for (const auto& n : v.normality) {
        normality.push_back({{"coordinate", n.label}, {"skewness", n.skewness}, {"excess_kurtosis", n.excess_kurtosis},
                             {"pass", n.pass}});
    }
    return {{"entries", entries},
            {"worst", v.entries.empty() ? json(nullptr) : json(v.entries[v.worst].row + "," + v.entries[v.worst].col)},
            {"normality", normality},
            {"normality_pass", v.normality_pass},
            {"pass", v.pass}};
}

json bias_report_json(const BiasReport& r) {
    json arms = json::array();
    for (const auto& a : r.arms) {
        json ja = {{"arm", a.arm + 1}, {"compared", a.compared}};
        if (a.compared) {
            ja["target"] = a.target;
            ja["empirical"] = a.scaled_empirical;
            ja["se"] = a.scaled_se;
            ja["tolerance"] = a.tolerance;
            ja["scale"] = a.scale_label;
            ja["pass"] = a.pass;
        }
        arms.push_back(ja);
    }
    return {{"arms", arms}, {"pass", r.pass}};
}

const json& prediction_result(const json& file) {
    if (file.contains("results") && file.at("results").is_array() && !file.at("results").empty()) return file.at("results").back();
    return file;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& out) {
    const std::int64_t t = c.horizons.back();
    const RunConfig rc = run_config_for(c, t);
    const auto& inst = rc.instance;
    const auto fluid = solve_fluid(inst, rc.f, static_cast<double>(t));
    json report = report_header("verify", c);
    report["T"] = t;
    report["check"] = c.check;
    std::optional<json> file;
    if (!c.prediction.empty()) file = prediction_result(read_json_file(c.prediction, "prediction"));
    const auto runs = run_ensemble(rc, c.replications, c.parallel);
    bool pass = false;

    if (c.check == "covariance") {
        const CltPrediction pred = clt_for(c, fluid, inst);
        Eigen::MatrixXd target = pred.cov;
        if (file) {
            if (!file->contains("cov")) throw ConfigError("prediction", "missing 'cov'");
            target = matrix_from_json(file->at("cov"), "prediction.cov");
            if (file->contains("labels")) {
                json expected = json::array();
                for (const auto& co : pred.coordinates) expected.push_back(co.label());
                if (file->at("labels") != expected) throw ConfigError("prediction.labels", "coordinates do not match the config");
            }
            if (target.rows() != pred.dim() || target.cols() != pred.dim()) throw ConfigError("prediction.cov", "dimension mismatch");
        }
        const EnsembleStats stats = standardize(runs, fluid, pred, inst);
        const auto verdict = compare_covariance(stats, target, c.cov_tol);
        report["verdict"] = covariance_verdict_json(verdict);
        report["empirical_mean"] = vector_json(stats.emp_mean);
        pass = verdict.pass;
        if (!c.out.empty()) {
            std::ostringstream csv;
            write_standardized_csv(csv, stats);
            write_text(ensure_out(c.out) / "standardized.csv", csv.str());
        }
    } else if (c.check == "bias") {
        BiasPrediction pred = bias_for(c, t);
        if (file) {
            if (!file->contains("scaled_constants")) throw ConfigError("prediction", "missing 'scaled_constants'");
            const auto& sc = file->at("scaled_constants");
            if (!sc.is_array() || sc.size() != pred.arms.size()) throw ConfigError("prediction.scaled_constants", "expected one entry per arm");
            for (std::size_t i = 0; i < pred.arms.size(); ++i) {
                pred.arms[i].scaled_constant = sc[i].is_null() ? std::nullopt : std::optional<double>(get_number(sc[i], "prediction.scaled_constants"));
            }
        }
        const CltPrediction clt = clt_for(c, fluid, inst);
        const EnsembleStats stats = standardize(runs, fluid, clt, inst);
        const auto r = compare_bias(stats.emp_bias, pred, c.bias_tol);
        report["verdict"] = bias_report_json(r);
        pass = r.pass;
    } else {
        if (inst.arm_count() != 2) throw ConfigError("check", "regret verification needs two arms");
        RegretPrediction pred = regret_prediction(fluid, inst, fluid.f_T, c.lambda_limit());
        if (file) {
            if (file->contains("typical_scale[reward]")) pred.typical_scale = get_number(file->at("typical_scale[reward]"), "prediction.typical_scale");
            if (file->contains("clt_implied_sd[reward]")) pred.clt_implied_sd = get_number(file->at("clt_implied_sd[reward]"), "prediction.clt_implied_sd");
        }
        const auto rs = regret_stats(runs, pred);
        json v = {{"defined", rs.defined}, {"mean[reward]", rs.mean}, {"sd[reward]", rs.sd}};
        if (rs.defined) {
            const bool mean_ok = rs.mean_ratio >= c.mean_ratio_lo && rs.mean_ratio <= c.mean_ratio_hi;
            const bool sd_ok = rs.sd_ratio >= c.sd_ratio_lo && rs.sd_ratio <= c.sd_ratio_hi;
            v["mean_ratio"] = {{"target", json::array({c.mean_ratio_lo, c.mean_ratio_hi})}, {"empirical", rs.mean_ratio},
                               {"se", rs.mean_ratio_se}, {"pass", mean_ok}};
            v["sd_ratio"] = {{"target", json::array({c.sd_ratio_lo, c.sd_ratio_hi})}, {"empirical", rs.sd_ratio},
                             {"se", rs.sd_ratio_se}, {"pass", sd_ok}};
            pass = mean_ok && sd_ok;
        } else {
            pass = true;
        }
        v["pass"] = pass;
        report["verdict"] = v;
    }
    emit_report(report, c, "verify.json", out);
    return pass ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------- reproduce

struct BiasSeries {
    std::string label;
    double parameter = 0.0;
    std::function<BanditInstance(std::int64_t)> instance;
    std::optional<GapSpec> gap;
};

struct ReproduceSettings {
    std::vector<std::int64_t> horizons;
    std::int64_t replications = 10000;
    std::uint64_t seed = 0;
    int parallel = 1;
    std::string out;
    Batching batching;
};

json settings_json(const std::string& name, const ReproduceSettings& s) {
    return {{"experiment", name},
            {"T", s.horizons},
            {"replications", s.replications},
            {"seed", s.seed},
            {"parallel", s.parallel},
            {"out", s.out},
            {"batching", {{"mode", to_string(s.batching.mode)}, {"fraction", s.batching.fraction}, {"apply_to", to_string(s.batching.apply_to)}}},
            {"exploration", {{"kind", "sqrt_rho_log"}, {"rho", 2.0}}}};
}

int run_bias_experiment(const std::string& name, const std::string& parameter_name, const std::vector<BiasSeries>& series,
                        const ReproduceSettings& s, std::ostream& out) {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    std::ostringstream csv;
    csv << "series," << parameter_name << ",T[pulls],scale,scaled_bias_2[reward*scale],scaled_bias_2_se[reward*scale],"
        << "constant_2[reward*scale]\n";
    json verdicts = json::array();
    json constants = json::array();
    bool pass = true;
    for (const auto& sr : series) {
        for (std::size_t ti = 0; ti < s.horizons.size(); ++ti) {
            const std::int64_t t = s.horizons[ti];
            RunConfig rc;
            rc.instance = sr.instance(t);
            rc.f = f;
            rc.horizon = t;
            rc.batching = s.batching;
            rc.seed = s.seed;
            GroupedMoments m(2);
            Eigen::VectorXd row(2);
            run_ensemble(rc, s.replications, s.parallel, [&](const RunResult& r) {
                for (std::size_t i = 0; i < 2; ++i) row[static_cast<Eigen::Index>(i)] = r.sample_means[i] - rc.instance.means[i];
                m.add(r.replication, row);
            });
            const auto est = m.mean_estimate();
            const double tt = static_cast<double>(t);
            const auto fluid = solve_fluid(rc.instance, f, tt);
            RegimeLabel regime = fluid.regime[1];
            if (sr.gap) {
                const std::vector<double> grid{std::max(3.0, tt / 100.0), std::max(4.0, tt / 10.0), tt};
                regime = classify_regime(*sr.gap, f, grid).label;
            }
            const auto pred = bias_prediction(fluid, rc.instance, f, tt, regime);
            const std::vector<BiasEstimate> emp{{est.mean[0], est.se[0]}, {est.mean[1], est.se[1]}};
            const auto& arm2 = pred.arms[1];
            csv << sr.label << ',' << format_double(sr.parameter) << ',' << t << ',' << arm2.scale_label << ','
                << format_double(arm2.scale * emp[1].bias) << ',' << format_double(arm2.scale * emp[1].se) << ','
                << format_double(arm2.scaled_constant.value_or(NAN)) << '\n';
            if (ti + 1 == s.horizons.size()) {
                BiasPrediction only2 = pred;
                only2.arms[0].scaled_constant.reset();
                const auto r = compare_bias(emp, only2, BiasTolerance{});
                json v = bias_report_json(r);
                v["series"] = sr.label;
                v["T"] = t;
                verdicts.push_back(v);
                constants.push_back(arm2.scaled_constant.value_or(NAN));
                pass = pass && r.pass;
            }
        }
    }
    json report;
    report["schema"] = kSchema;
    report["command"] = "reproduce";
    report["seed"] = s.seed;
    report["effective_config"] = settings_json(name, s);
    report["csv"] = "series.csv";
    report["overlay_constants"] = constants;
    report["verdicts"] = verdicts;
    report["pass"] = pass;
    if (!s.out.empty()) {
        const auto dir = ensure_out(s.out);
        write_text(dir / "series.csv", csv.str());
        write_text(dir / "report.json", report.dump(2) + "\n");
    } else {
        out << csv.str();
    }
    out << report.dump(2) << "\n";
    return pass ? kExitOk : kExitVerifyFailed;
}

int run_identical_arms(const std::string& name, const ReproduceSettings& s, bool covariance_check, std::ostream& out) {
    const auto f = ExplorationFunction::sqrt_rho_log(2.0);
    RunConfig rc;
    rc.instance = BanditInstance::gaussian({covariance_check ? 1.0 : 0.0, covariance_check ? 1.0 : 0.0}, {1.0, 1.0});
    rc.f = f;
    rc.horizon = s.horizons.back();
    rc.batching = s.batching;
    rc.seed = s.seed;
    const auto runs = run_ensemble(rc, s.replications, s.parallel);
    const auto fluid = solve_fluid(rc.instance, f, static_cast<double>(rc.horizon));
    const auto pred = clt_two_arm(fluid, rc.instance, fluid.f_T);
    const auto stats = standardize(runs, fluid, pred, rc.instance);
    json report;
    report["schema"] = kSchema;
    report["command"] = "reproduce";
    report["seed"] = s.seed;
    report["effective_config"] = settings_json(name, s);
    report["T"] = rc.horizon;
    report["csv"] = "standardized.csv";
    report["empirical_mean"] = vector_json(stats.emp_mean);
    report["empirical_mean_se"] = vector_json(stats.mean_se);
    report["empirical_cov"] = matrix_json(stats.emp_cov);
    report["skewness"] = vector_json(stats.skewness);
    report["excess_kurtosis"] = vector_json(stats.excess_kurtosis);
    bool pass = true;
    if (covariance_check) {
        Eigen::MatrixXd target(3, 3);
        target << 2, -1, 1, -1, 1, 0, 1, 0, 1;
        const auto v = compare_covariance(stats, target, CovarianceTolerance{0.35, 0.0, 0.5, 1.0});
        report["verdict"] = covariance_verdict_json(v);
        pass = v.pass;
    } else {
        report["normal_fit_Z_2"] = {{"mean", stats.emp_mean[2]}, {"sd", std::sqrt(stats.emp_cov(2, 2))}};
        report["verdict"] = nullptr;
    }
    report["pass"] = pass;
    std::ostringstream csv;
    write_standardized_csv(csv, stats);
    if (!s.out.empty()) {
        const auto dir = ensure_out(s.out);
        write_text(dir / "standardized.csv", csv.str());
        write_text(dir / "report.json", report.dump(2) + "\n");
    }
    out << report.dump(2) << "\n";
    return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_reproduce(const std::string& name, const CommonFlags& f, std::ostream& out) {
    ReproduceSettings s;
    if (!f.seed.empty()) {
        s.seed = parse_seed_text(f.seed, "--seed");
    } else if (const char* env = std::getenv("BANDITFLOW_SEED"); env != nullptr && *env != '\0') {
        s.seed = parse_seed_text(env, "BANDITFLOW_SEED");
    }
    if (!f.reps.empty()) s.replications = parse_integer_text(f.reps, "--reps");
    if (s.replications < 1) throw ConfigError("--reps", "must be at least 1");
    s.parallel = f.parallel > 0 ? f.parallel : 1;
    s.out = f.out;
    std::vector<std::int64_t> ladder;
    if (!f.horizons.empty()) ladder = parse_horizons(f.horizons);
    auto horizons_or = [&](std::vector<std::int64_t> d) {
        return ladder.empty() ? d : std::vector<std::int64_t>(ladder.begin(), ladder.end());
    };
    auto mode_or = [&](Batching d) {
        if (f.exact) return Batching::exact();
        if (f.batched && d.mode == Batching::Mode::Exact) return Batching::batched();
        return d;
    };
    const auto fe = ExplorationFunction::sqrt_rho_log(2.0);

    if (name == "fig-bias-small") {
        s.horizons = horizons_or({10000, 100000, 1000000, 10000000});
        s.batching = mode_or(Batching::batched());
        std::vector<BiasSeries> series;
        for (double sigma : {0.5, 0.7, 0.9}) {
            series.push_back({"sigma=" + format_double(sigma), sigma,
                              [sigma](std::int64_t) { return BanditInstance::gaussian({1.0, 1.0}, {sigma, sigma}); },
                              GapSpec::zero()});
        }
        return run_bias_experiment(name, "sigma", series, s, out);
    }
    if (name == "fig-bias-large") {
        s.horizons = horizons_or({100000, 10000000, 1000000000});
        s.batching = mode_or(Batching::batched(0.02, Batching::ApplyTo::SuperiorOnly));
        std::vector<BiasSeries> series;
        for (double mu2 : {0.0, 1.0, 1.5}) {
            series.push_back({"mu_2=" + format_double(mu2), mu2,
                              [mu2](std::int64_t) { return BanditInstance::gaussian({2.0, mu2}, {1.0, 1.0}); },
                              GapSpec::fixed(2.0 - mu2)});
        }
        return run_bias_experiment(name, "mu_2", series, s, out);
    }
    if (name == "fig-bias-moderate") {
        s.horizons = horizons_or({10000, 100000, 1000000, 10000000});
        s.batching = mode_or(Batching::batched());
        std::vector<BiasSeries> series;
        for (double share : {0.7, 0.8, 0.9}) {
            const GapSpec g = GapSpec::superior_share(share);
            series.push_back({"n1_share=" + format_double(share), share,
                              [g, fe](std::int64_t t) {
                                  return two_arm_instance(g, fe, static_cast<double>(t), 0.0, RewardFamily::Gaussian, 1.0, 1.0);
                              },
                              g});
        }
        return run_bias_experiment(name, "n1_share", series, s, out);
    }
    if (name == "fig-empirical-mean" || name == "cov-identical-arms") {
        s.horizons = horizons_or({100000});
        s.batching = mode_or(Batching::exact());
        return run_identical_arms(name, s, name == "cov-identical-arms", out);
    }
    throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

} // namespace

std::vector<std::int64_t> parse_horizons(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("T", "empty entry in '" + text + "'");
        out.push_back(parse_integer_text(item.substr(b, e - b + 1), "T"));
    }
    if (out.empty()) throw ConfigError("T", "no horizon given");
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"banditflow: generalized UCB1 simulation and asymptotic predictions"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string experiment;

    struct Entry {
        const char* name;
        const char* help;
    };
    const Entry entries[] = {{"fluid", "solve the fluid system"},
                             {"predict-clt", "joint CLT covariance"},
                             {"predict-regret", "pseudo-regret scale and deviation"},
                             {"predict-bias", "leading sample-bias terms"},
                             {"simulate", "run a replication ensemble, CSV output"},
                             {"stylized", "stylized-model ensemble, CSV output"},
                             {"verify", "simulate and compare with a prediction"},
                             {"reproduce", "run a named experiment end to end"}};
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, flags);
        subs.push_back(sub);
    }
    subs[6]->add_option("--prediction", flags.prediction, "prediction JSON (output of a predict-* command)");
    subs[7]->add_option("experiment", experiment,
                        "fig-bias-small | fig-bias-large | fig-bias-moderate | fig-empirical-mean | cov-identical-arms")
        ->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        if (subs[7]->parsed()) return cmd_reproduce(experiment, flags, out);
        const ExperimentConfig c = resolve_config(flags);
        if (subs[0]->parsed()) return cmd_fluid(c, out);
        if (subs[1]->parsed()) return cmd_predict_clt(c, out);
        if (subs[2]->parsed()) return cmd_predict_regret(c, out);
        if (subs[3]->parsed()) return cmd_predict_bias(c, out);
        if (subs[4]->parsed()) return cmd_simulate(c, out);
        if (subs[5]->parsed()) return cmd_stylized(c, out);
        if (subs[6]->parsed()) return cmd_verify(c, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const UnsupportedConfiguration& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInternalError;
    }
    return kExitConfigError;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace banditflow
