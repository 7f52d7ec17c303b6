#include "ltv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ltv/errors.hpp"

namespace ltv::numerics {

namespace {

// Lanczos g=7, n=9 coefficients (Godfrey).
constexpr double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

constexpr double kHalfLogTwoPi = 0.91893853320467274178032973640562;

}  // namespace

double ln_gamma(double z) {
    if (!(z > 0.0)) throw NumericError("ln_gamma: argument must be > 0");
    if (z < 0.5) {
        // reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        const double pi = 3.14159265358979323846264338327950288;
        return std::log(pi / std::sin(pi * z)) - ln_gamma(1.0 - z);
    }
    const double x = z - 1.0;
    double acc = kLanczos[0];
    for (int i = 1; i < 9; ++i) acc += kLanczos[i] / (x + i);
    const double t = x + 7.5;
    return kHalfLogTwoPi + (x + 0.5) * std::log(t) - t + std::log(acc);
}

double ln_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw NumericError("ln_beta: arguments must be > 0");
    return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
}

double ln_gamma_ratio(double z, double delta) {
    if (!(z > 0.0) || !(z + delta > 0.0))
        throw NumericError("ln_gamma_ratio: arguments must be > 0");
    if (z < 30.0 || std::abs(delta) > z) return ln_gamma(z + delta) - ln_gamma(z);
    // Stirling difference arranged so no large terms cancel:
    // (z+d-1/2) ln(z+d) - (z-1/2) ln z - d + [series(z+d) - series(z)]
    const double zd = z + delta;
    const double lead = (z - 0.5) * std::log1p(delta / z) + delta * std::log(zd) - delta;
    auto series = [](double v) { return 1.0 / (12.0 * v) - 1.0 / (360.0 * v * v * v); };
    return lead + series(zd) - series(z);
}

namespace {

double series_2f1(double a, double b, double c, double z) {
    double term = 1.0;
    double sum = 1.0;
    for (int n = 0; n < 10000; ++n) {
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        sum += term;
        if (std::abs(term) < 1e-15 * std::abs(sum)) return sum;
    }
    std::ostringstream os;
    os << "gauss_2f1: series did not converge (a=" << a << " b=" << b << " c=" << c
       << " z=" << z << ")";
    throw NumericError(os.str());
}

}  // namespace

double gauss_2f1(double a, double b, double c, double z) {
    if (c <= 0.0 && c == std::floor(c))
        throw NumericError("gauss_2f1: c must not be a non-positive integer");
    if (!(std::abs(z) < 1.0)) throw NumericError("gauss_2f1: |z| must be < 1");
    if (z == 0.0) return 1.0;
    // exponent written c - (a+b) so the result stays bit-symmetric in (a, b)
    if (z > 0.9) return std::pow(1.0 - z, c - (a + b)) * series_2f1(c - a, c - b, c, z);
    return series_2f1(a, b, c, z);
}

namespace {

// all-positive-term series in log space; terms may grow for a long stretch
// before decaying when the parameters are large
double ln_series_2f1_pos(double a, double b, double c, double z) {
    constexpr double kCap = 200000.0;
    // fail fast on parameter corners where the series cannot finish: the
    // term ratio may start above 1, crossing it near n*, then decays at
    // asymptotic rate z
    const double one_minus_z = 1.0 - z;
    double peak = 0.0;
    if (a * b * z > c) {
        peak = (z * (a + b) +
                std::sqrt(z * z * (a + b) * (a + b) + 4.0 * one_minus_z * z * a * b)) /
               (2.0 * one_minus_z);
    }
    const double decay_terms = std::log(1e-16) / std::log(z);
    if (peak + decay_terms > kCap) {
        std::ostringstream os;
        os << "ln_gauss_2f1_pos: series too slow to converge (a=" << a << " b=" << b
           << " c=" << c << " z=" << z << ")";
        throw NumericError(os.str());
    }

    // fast path: plain summation while magnitudes stay in range (the large
    // majority of likelihood evaluations)
    {
        double term = 1.0;
        double sum = 1.0;
        for (long n = 0; n < static_cast<long>(kCap); ++n) {
            const double dn = static_cast<double>(n);
            term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * z;
            sum += term;
            if (term > 1e280) break;  // redo in log space
            if (term < 1e-16 * sum &&
                (a + dn) * (b + dn) * z < (c + dn) * (dn + 1.0))
                return std::log(sum);
        }
    }

    const double ln_z = std::log(z);
    double ln_term = 0.0;
    double ln_sum = 0.0;
    double ratio = 1.0;
    for (long n = 0; n < static_cast<long>(kCap); ++n) {
        const double dn = static_cast<double>(n);
        ratio = (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * z;
        ln_term += std::log(a + dn) + std::log(b + dn) - std::log(c + dn) -
                   std::log(dn + 1.0) + ln_z;
        ln_sum = log_sum_exp(ln_sum, ln_term);
        if (ratio < 1.0 && ln_term - ln_sum < -34.6) return ln_sum;  // term < 1e-15 of sum
    }
    // geometric tail bound at the cap
    if (ratio < 1.0) {
        const double ln_tail = ln_term + std::log(ratio / (1.0 - ratio));
        if (ln_tail - ln_sum < std::log(1e-9)) return ln_sum;
    }
    std::ostringstream os;
    os << "ln_gauss_2f1_pos: series did not converge (a=" << a << " b=" << b << " c=" << c
       << " z=" << z << ")";
    throw NumericError(os.str());
}

}  // namespace

double ln_gauss_2f1_pos(double a, double b, double c, double z) {
    if (!(a > 0.0 && b > 0.0 && c > 0.0))
        throw NumericError("ln_gauss_2f1_pos: parameters must be positive");
    if (!(z >= 0.0 && z < 1.0)) throw NumericError("ln_gauss_2f1_pos: z must be in [0, 1)");
    if (z == 0.0) return 0.0;
    if (z > 0.9) {
        if (!(c > a && c > b))
            throw NumericError("ln_gauss_2f1_pos: Euler transform needs c > a and c > b");
        return (c - (a + b)) * std::log1p(-z) + ln_series_2f1_pos(c - a, c - b, c, z);
    }
    return ln_series_2f1_pos(a, b, c, z);
}

double log_sum_exp(double a, double b) {
    if (std::isinf(a) && a < 0.0) return b;
    if (std::isinf(b) && b < 0.0) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_diff_exp(double a, double b) {
    if (std::isinf(b) && b < 0.0) return a;
    if (b > a) throw NumericError("log_diff_exp: requires a >= b");
    if (a == b) return -std::numeric_limits<double>::infinity();
    return a + std::log1p(-std::exp(b - a));
}

namespace {

struct SimplexPoint {
    std::vector<double> theta;  // log-reparameterized coordinates
    double value;               // objective (natural scale), to maximize
};

std::vector<double> to_natural(const std::vector<double>& theta,
                               const std::vector<double>& lower) {
    std::vector<double> x(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        // clamp so the natural parameter stays strictly above its bound and
        // exp never overflows
        const double th = std::clamp(theta[i], -700.0, 700.0);
        x[i] = lower[i] + std::exp(th);
    }
    return x;
}

}  // namespace

OptimResult nelder_mead(const OptimProblem& problem, const OptimConfig& config) {
    const std::size_t d = problem.initial_point.size();
    if (d == 0) throw NumericError("nelder_mead: empty initial point");
    std::vector<double> lower = problem.lower_bounds;
    if (lower.empty()) lower.assign(d, 0.0);
    if (lower.size() != d) throw NumericError("nelder_mead: bounds/point size mismatch");

    std::vector<double> theta0(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double gap = problem.initial_point[i] - lower[i];
        if (!(gap > 0.0)) throw NumericError("nelder_mead: initial point not above lower bound");
        theta0[i] = std::log(gap);
    }

    std::size_t n_evals = 0;
    auto eval = [&](const std::vector<double>& theta) {
        ++n_evals;
        const double v = problem.objective(to_natural(theta, lower));
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };

    OptimResult best;
    best.max_value = -std::numeric_limits<double>::infinity();
    bool any_finite_start = false;

    // Deterministic start points: the given point plus sign-alternating
    // offsets in log-space.
    for (int start = 0; start < std::max(1, config.multistarts); ++start) {
        std::vector<double> base = theta0;
        if (start > 0) {
            for (std::size_t i = 0; i < d; ++i)
                base[i] += 0.4 * start * (((start + i) % 2 == 0) ? 1.0 : -1.0);
        }

        // initial simplex: base + 5% perturbation per coordinate
        std::vector<SimplexPoint> simplex(d + 1);
        simplex[0] = {base, eval(base)};
        for (std::size_t i = 0; i < d; ++i) {
            std::vector<double> v = base;
            v[i] += (v[i] != 0.0) ? 0.05 * std::abs(v[i]) : 0.05;
            simplex[i + 1] = {v, eval(v)};
        }
        if (!std::isfinite(simplex[0].value)) continue;
        any_finite_start = true;

        bool converged = false;
        int flat_iterations = 0;
        while (n_evals < config.max_evals * static_cast<std::size_t>(start + 1)) {
            std::sort(simplex.begin(), simplex.end(),
                      [](const SimplexPoint& p, const SimplexPoint& q) { return p.value > q.value; });
            const double spread = simplex.front().value - simplex.back().value;
            double coord_spread = 0.0;
            for (std::size_t i = 1; i <= d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    coord_spread = std::max(
                        coord_spread, std::abs(simplex[i].theta[j] - simplex[0].theta[j]));
            // a long stretch of value-flat iterations means a ridge the
            // coordinate criterion will never collapse
            flat_iterations = std::isfinite(spread) && spread < config.tol
                                  ? flat_iterations + 1
                                  : 0;
            if (std::isfinite(spread) && spread < config.tol &&
                (coord_spread < config.coord_tol || flat_iterations > 60)) {
                converged = true;
                break;
            }

            // centroid of all but the worst
            std::vector<double> centroid(d, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[i].theta[j];
            }
            for (double& c : centroid) c /= static_cast<double>(d);

            auto blend = [&](double coef) {
                std::vector<double> p(d);
                for (std::size_t j = 0; j < d; ++j)
                    p[j] = centroid[j] + coef * (centroid[j] - simplex[d].theta[j]);
                return p;
            };

            const auto reflected = blend(1.0);
            const double fr = eval(reflected);
            if (fr > simplex[0].value) {
                const auto expanded = blend(2.0);
                const double fe = eval(expanded);
                if (fe > fr)
                    simplex[d] = {expanded, fe};
                else
                    simplex[d] = {reflected, fr};
            } else if (fr > simplex[d - 1].value) {
                simplex[d] = {reflected, fr};
            } else {
                const auto contracted = blend(-0.5);
                const double fc = eval(contracted);
                if (fc > simplex[d].value) {
                    simplex[d] = {contracted, fc};
                } else {
                    // shrink toward the best point
                    for (std::size_t i = 1; i <= d; ++i) {
                        for (std::size_t j = 0; j < d; ++j)
                            simplex[i].theta[j] =
                                simplex[0].theta[j] + 0.5 * (simplex[i].theta[j] - simplex[0].theta[j]);
                        simplex[i].value = eval(simplex[i].theta);
                    }
                }
            }
        }

        std::sort(simplex.begin(), simplex.end(),
                  [](const SimplexPoint& p, const SimplexPoint& q) { return p.value > q.value; });
        if (simplex[0].value > best.max_value) {
            best.max_value = simplex[0].value;
            best.argmax = to_natural(simplex[0].theta, lower);
            best.converged = converged;
        }
    }

    if (!any_finite_start)
        throw NumericError("nelder_mead: objective not finite at any start point");
    best.n_evals = n_evals;
    return best;
}

}  // namespace ltv::numerics
