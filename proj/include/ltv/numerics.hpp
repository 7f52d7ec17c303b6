#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ltv::numerics {

/// ln Gamma(z) for z > 0. Lanczos approximation, relative error ~1e-14.
double ln_gamma(double z);

/// ln Beta(a, b) = lnGamma(a) + lnGamma(b) - lnGamma(a+b), a, b > 0.
double ln_beta(double a, double b);

/// lnGamma(z + delta) - lnGamma(z) without the catastrophic cancellation the
/// naive difference suffers once lnGamma(z) outgrows double precision.
double ln_gamma_ratio(double z, double delta);

/// Gauss hypergeometric 2F1(a, b; c; z) for |z| < 1, c not a non-positive
/// integer. Direct power series; the Euler transformation
/// 2F1(a,b;c;z) = (1-z)^(c-a-b) 2F1(c-a, c-b; c; z) is applied for z > 0.9.
/// Throws NumericError if the series fails to converge within 10000 terms.
double gauss_2f1(double a, double b, double c, double z);

/// ln 2F1(a, b; c; z) for a, b, c > 0 and z in [0, 1), summed in log space
/// so extreme parameter magnitudes cannot overflow. The Euler transformation
/// is applied for z > 0.9 and additionally requires c > a and c > b (the
/// likelihood call sites guarantee it).
double ln_gauss_2f1_pos(double a, double b, double c, double z);

/// log(exp(a) + exp(b)) without overflow; handles -inf arguments.
double log_sum_exp(double a, double b);

/// log(exp(a) - exp(b)) for a >= b; returns -inf when a == b.
double log_diff_exp(double a, double b);

struct OptimProblem {
    // objective to MAXIMIZE, evaluated at the natural-scale parameter vector
    std::function<double(const std::vector<double>&)> objective;
    // per-coordinate lower bounds; parameters live on (lower, +inf) and are
    // optimized as log(param - lower)
    std::vector<double> lower_bounds;
    std::vector<double> initial_point;
};

struct OptimConfig {
    std::size_t max_evals = 20000;
    double tol = 1e-8;       // convergence when simplex value spread < tol
    double coord_tol = 1e-6; // ... and log-space coordinate spread < coord_tol
    int multistarts = 4;     // deterministic perturbed restarts, best kept
};

struct OptimResult {
    std::vector<double> argmax;
    double max_value = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
};

/// Nelder-Mead simplex maximization (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5) in log-reparameterized space.
/// Throws NumericError if no start yields a finite objective.
OptimResult nelder_mead(const OptimProblem& problem, const OptimConfig& config = {});

}  // namespace ltv::numerics
