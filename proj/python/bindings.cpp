#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "banditflow/cli.hpp"
#include "banditflow/engine.hpp"
#include "banditflow/error.hpp"
#include "banditflow/fluid.hpp"
#include "banditflow/predict.hpp"
#include "banditflow/stats.hpp"
#include "banditflow/stylized.hpp"

namespace py = pybind11;
using namespace banditflow;

namespace {

BanditInstance make_instance(const std::vector<double>& means, const std::vector<double>& std_devs) {
    auto inst = BanditInstance::gaussian(means, std_devs);
    require_valid(inst);
    return inst;
}

py::dict fluid_dict(const FluidSolution& s) {
    py::dict d;
    d["T"] = s.horizon;
    d["f_T"] = s.f_T;
    d["n_star"] = s.n_star;
    d["residuals"] = s.residuals;
    d["lambda"] = s.lambda;
    py::list regimes;
    for (const auto& r : s.regime) regimes.append(to_string(r.kind));
    d["regime"] = regimes;
    return d;
}

py::dict clt_dict(const CltPrediction& p) {
    py::dict d;
    py::list labels;
    for (const auto& c : p.coordinates) labels.append(c.label());
    d["labels"] = labels;
    d["cov"] = p.cov;
    d["w_scale"] = p.w_scale;
    d["z_scale"] = p.z_scale;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Generalized UCB1 simulation and asymptotic predictions";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<UnsupportedConfiguration>(m, "UnsupportedConfiguration", PyExc_ValueError);
    py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);

    m.def(
        "solve_fluid",
        [](const std::vector<double>& means, const std::vector<double>& std_devs, double T, double rho) {
            return fluid_dict(solve_fluid(make_instance(means, std_devs), ExplorationFunction::sqrt_rho_log(rho), T));
        },
        py::arg("means"), py::arg("std_devs"), py::arg("T"), py::arg("rho") = 2.0);

    m.def(
        "predict_clt",
        [](const std::vector<double>& means, const std::vector<double>& std_devs, double T, double rho, bool two_arm) {
            const auto inst = make_instance(means, std_devs);
            const auto fluid = solve_fluid(inst, ExplorationFunction::sqrt_rho_log(rho), T);
            return clt_dict(two_arm ? clt_two_arm(fluid, inst, fluid.f_T) : clt_k_arm(fluid, inst, fluid.f_T));
        },
        py::arg("means"), py::arg("std_devs"), py::arg("T"), py::arg("rho") = 2.0, py::arg("two_arm") = true);

    m.def(
        "predict_regret",
        [](const std::vector<double>& means, const std::vector<double>& std_devs, double T, double rho) {
            const auto inst = make_instance(means, std_devs);
            const auto fluid = solve_fluid(inst, ExplorationFunction::sqrt_rho_log(rho), T);
            const auto r = regret_prediction(fluid, inst, fluid.f_T);
            py::dict d;
            d["lambda"] = r.lambda;
            d["typical_scale"] = r.typical_scale;
            d["typical_deviation"] = r.typical_deviation;
            d["clt_implied_sd"] = r.clt_implied_sd;
            return d;
        },
        py::arg("means"), py::arg("std_devs"), py::arg("T"), py::arg("rho") = 2.0);

    m.def(
        "simulate",
        [](const std::vector<double>& means, const std::vector<double>& std_devs, std::int64_t T, std::int64_t reps,
           std::uint64_t seed, bool batched, int parallel) {
            RunConfig rc;
            rc.instance = make_instance(means, std_devs);
            rc.horizon = T;
            rc.seed = seed;
            if (batched) rc.batching = Batching::batched();
            std::vector<RunResult> runs;
            {
                py::gil_scoped_release release;
                runs = run_ensemble(rc, reps, parallel);
            }
            const auto k = static_cast<Eigen::Index>(means.size());
            Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> pulls(runs.size(), k);
            Eigen::MatrixXd sample_means(runs.size(), k);
            Eigen::VectorXd regret(runs.size());
            for (std::size_t r = 0; r < runs.size(); ++r) {
                for (Eigen::Index i = 0; i < k; ++i) {
                    pulls(r, i) = runs[r].pulls[i];
                    sample_means(r, i) = runs[r].sample_means[i];
                }
                regret[r] = runs[r].pseudo_regret;
            }
            py::dict d;
            d["pulls"] = pulls;
            d["sample_means"] = sample_means;
            d["pseudo_regret"] = regret;
            return d;
        },
        py::arg("means"), py::arg("std_devs"), py::arg("T"), py::arg("reps"), py::arg("seed") = 0,
        py::arg("batched") = false, py::arg("parallel") = 1);

    m.def(
        "stylized_bias",
        [](const std::vector<double>& means, const std::vector<double>& std_devs, std::int64_t T, std::int64_t reps,
           std::uint64_t seed, int parallel) {
            StylizedConfig c;
            c.instance = make_instance(means, std_devs);
            c.horizon = T;
            c.seed = seed;
            StylizedBiasEstimate e;
            {
                py::gil_scoped_release release;
                e = stylized_bias_estimate(c, reps, parallel);
            }
            py::dict d;
            d["bias"] = std::vector<double>{e.arms[0].bias, e.arms[1].bias};
            d["se"] = std::vector<double>{e.arms[0].se, e.arms[1].se};
            d["clamp_frequency"] = e.clamp_frequency;
            d["delta"] = e.delta;
            return d;
        },
        py::arg("means"), py::arg("std_devs"), py::arg("T"), py::arg("reps"), py::arg("seed") = 0,
        py::arg("parallel") = 1);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line interface; returns (exit_code, stdout, stderr).");
}
