#include "banditflow/perturb.hpp"

#include <cmath>

#include "banditflow/error.hpp"

namespace banditflow {

IndexDerivatives IndexDerivatives::ucb(const FluidSolution& fluid, double f_T) {
    const auto k = static_cast<Eigen::Index>(fluid.arm_count());
    IndexDerivatives d;
    d.d_mu = Eigen::VectorXd::Ones(k);
    d.d_n.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double n = fluid.n_star[static_cast<std::size_t>(i)];
        d.d_n[i] = -0.5 * f_T / (n * std::sqrt(n));
    }
    return d;
}

PerturbationSolution solve_perturbation_closed_form(const IndexDerivatives& deriv, const Eigen::VectorXd& eps_bar) {
    const Eigen::Index k = eps_bar.size();
    if (k < 2) throw DomainError("perturbation: need at least two arms");
    if (deriv.d_mu.size() != k || deriv.d_n.size() != k) throw DomainError("perturbation: dimension mismatch");
    for (Eigen::Index i = 0; i < k; ++i) {
        if (deriv.d_n[i] == 0.0 || !std::isfinite(deriv.d_n[i])) {
            throw SingularityError("perturbation: dI/dn vanishes or is not finite");
        }
    }

    double denom = 1.0;
    double scale = 1.0;
    double weighted = 0.0;
    const double lead = deriv.d_mu[0] * eps_bar[0];
    for (Eigen::Index i = 1; i < k; ++i) {
        const double r = deriv.d_n[0] / deriv.d_n[i];
        denom += r;
        scale += std::fabs(r);
        weighted += (lead - deriv.d_mu[i] * eps_bar[i]) / deriv.d_n[i];
    }
    if (std::fabs(denom) < 1e-14 * scale) throw SingularityError("perturbation: singular system");

    PerturbationSolution out;
    out.eps_bar = eps_bar;
    out.omega.resize(k);
    out.omega[0] = -weighted / denom;
    for (Eigen::Index i = 1; i < k; ++i) {
        out.omega[i] = (lead - deriv.d_mu[i] * eps_bar[i]) / deriv.d_n[i] + deriv.d_n[0] / deriv.d_n[i] * out.omega[0];
    }
    return out;
}

PerturbationSolution solve_perturbation_ucb(const FluidSolution& fluid, double f_T, const Eigen::VectorXd& eps_bar) {
    const auto k = static_cast<Eigen::Index>(fluid.arm_count());
    if (eps_bar.size() != k) throw DomainError("perturbation: dimension mismatch");
    if (!(f_T > 0.0)) throw DomainError("perturbation: f(T) must be positive");

    const double n1 = fluid.n_star[0];
    double denom = 1.0;
    double weighted = 0.0;
    Eigen::VectorXd n32(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double n = fluid.n_star[static_cast<std::size_t>(i)];
        n32[i] = n * std::sqrt(n);
    }
    for (Eigen::Index i = 1; i < k; ++i) {
        const double r = fluid.n_star[static_cast<std::size_t>(i)] / n1;
        denom += r * std::sqrt(r);
        weighted += n32[i] * (eps_bar[0] - eps_bar[i]);
    }

    PerturbationSolution out;
    out.eps_bar = eps_bar;
    out.omega.resize(k);
    out.omega[0] = 2.0 / f_T * weighted / denom;
    for (Eigen::Index i = 1; i < k; ++i) {
        const double r = fluid.n_star[static_cast<std::size_t>(i)] / n1;
        out.omega[i] = 2.0 / f_T * n32[i] * (eps_bar[i] - eps_bar[0]) + r * std::sqrt(r) * out.omega[0];
    }
    return out;
}

} // namespace banditflow
