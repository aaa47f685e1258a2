#pragma once

// First-order perturbation of the fluid system. Linearizing every arm's index
// I(mu, n, T) around (mu_k, n*_k) and keeping the indices equal gives the
// K x K system
//
//     sum_k omega_k = 0
//     -I'_{1,2} omega_1 + I'_{i,2} omega_i = I'_{1,1} eps_1 - I'_{i,1} eps_i,   i = 2..K
//
// relating pull-count deviations omega to sample-mean deviations eps.

#include <Eigen/Dense>

#include "banditflow/fluid.hpp"

namespace banditflow {

/// Partial derivatives of the index at (mu_k, n*_k, T).
struct IndexDerivatives {
    Eigen::VectorXd d_mu; ///< dI/dmu
    Eigen::VectorXd d_n;  ///< dI/dn, must be nonzero

    /// Generalized UCB1: d_mu = 1, d_n = -f(T) n^{-3/2} / 2.
    static IndexDerivatives ucb(const FluidSolution& fluid, double f_T);
};

struct PerturbationSolution {
    Eigen::VectorXd omega;   ///< pull-count deviations
    Eigen::VectorXd eps_bar; ///< sample-mean deviations (input)
};

/// Closed-form solution for a generic index. Throws SingularityError when
/// 1 + sum_{k>=2} d_n[1]/d_n[k] vanishes relative to its terms (|.| < 1e-14 sum|terms|).
PerturbationSolution solve_perturbation_closed_form(const IndexDerivatives& deriv, const Eigen::VectorXd& eps_bar);

/// Closed form specialized to generalized UCB1:
///   omega_1 = (2/f) (1 + sum_k (n_k/n_1)^{3/2})^{-1} sum_k n_k^{3/2} (eps_1 - eps_k)
///   omega_i = (2/f) n_i^{3/2} (eps_i - eps_1) + (n_i/n_1)^{3/2} omega_1
PerturbationSolution solve_perturbation_ucb(const FluidSolution& fluid, double f_T, const Eigen::VectorXd& eps_bar);

} // namespace banditflow
