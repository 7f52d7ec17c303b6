#include "ltv/btyd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <map>
#include <tuple>
#include <unordered_map>

#include "ltv/errors.hpp"
#include "ltv/simgen.hpp"

namespace ltv::btyd {

using numerics::gauss_2f1;
using numerics::ln_beta;
using numerics::ln_gamma;
using numerics::log_diff_exp;
using numerics::log_sum_exp;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_pareto(const ParetoNBDParams& p) {
    if (!(p.r > 0.0 && p.alpha > 0.0 && p.s > 0.0 && p.beta > 0.0))
        throw NumericError("pareto_nbd: parameters must be strictly positive");
}

void check_bg(const BetaGeomParams& p) {
    if (!(p.r > 0.0 && p.alpha > 0.0 && p.a > 0.0 && p.b > 0.0))
        throw NumericError("bg_family: parameters must be strictly positive");
    if (p.k < 1) throw NumericError("bg_family: k must be >= 1");
}

void check_rfm(const rfm::RFMSummary& f) {
    if (f.x < 0 || f.t_x < 0.0 || f.t_x > f.T)
        throw NumericError("btyd: RFM summary violates 0 <= t_x <= T");
}

// ln A0 of the Pareto/NBD likelihood: the hypergeometric difference term,
// with the (alpha, s+1) / (beta, r+x) role swap for alpha < beta.
double pareto_ln_a0(const ParetoNBDParams& p, double x, double t_x, double T) {
    const double h = p.r + p.s + x;
    double big, small, second;
    if (p.alpha >= p.beta) {
        big = p.alpha;
        small = p.beta;
        second = p.s + 1.0;
    } else {
        big = p.beta;
        small = p.alpha;
        second = p.r + x;
    }
    const double z1 = (big - small) / (big + t_x);
    const double z2 = (big - small) / (big + T);
    const double ln_a1 = numerics::ln_gauss_2f1_pos(h, second, h + 1.0, z1) - h * std::log(big + t_x);
    const double ln_a2 = numerics::ln_gauss_2f1_pos(h, second, h + 1.0, z2) - h * std::log(big + T);
    // a1 >= a2 holds mathematically (t_x <= T); rounding can cross them when
    // t_x is within ulps of T, in which case A0 is zero
    if (ln_a2 >= ln_a1) return -std::numeric_limits<double>::infinity();
    return log_diff_exp(ln_a1, ln_a2);
}

}  // namespace

std::string to_string(BGVariant v) { return v == BGVariant::BG ? "bg" : "mbg"; }

double pareto_nbd_log_lik(const ParetoNBDParams& p, const rfm::RFMSummary& f) {
    check_pareto(p);
    check_rfm(f);
    const auto x = static_cast<double>(f.x);
    const double h = p.r + p.s + x;
    const double ln_a0 = pareto_ln_a0(p, x, f.t_x, f.T);
    const double survive = -(p.r + x) * std::log(p.alpha + f.T) - p.s * std::log(p.beta + f.T);
    const double ln_l = ln_gamma(p.r + x) - ln_gamma(p.r) + p.r * std::log(p.alpha) +
                        p.s * std::log(p.beta) +
                        log_sum_exp(survive, std::log(p.s) - std::log(h) + ln_a0);
    if (!std::isfinite(ln_l)) {
        std::ostringstream os;
        os << "pareto_nbd_log_lik: non-finite result (r=" << p.r << " alpha=" << p.alpha
           << " s=" << p.s << " beta=" << p.beta << " x=" << f.x << " t_x=" << f.t_x
           << " T=" << f.T << ")";
        throw NumericError(os.str());
    }
    return ln_l;
}

double pareto_nbd_p_alive(const ParetoNBDParams& p, const rfm::RFMSummary& f) {
    check_pareto(p);
    check_rfm(f);
    const auto x = static_cast<double>(f.x);
    const double h = p.r + p.s + x;
    const double ln_a0 = pareto_ln_a0(p, x, f.t_x, f.T);
    if (std::isinf(ln_a0)) return 1.0;
    const double ln_odds = std::log(p.s) - std::log(h) + (p.r + x) * std::log(p.alpha + f.T) +
                           p.s * std::log(p.beta + f.T) + ln_a0;
    if (ln_odds > 700.0) return 0.0;
    return 1.0 / (1.0 + std::exp(ln_odds));
}

double pareto_nbd_cond_expected(const ParetoNBDParams& p, const rfm::RFMSummary& f, double t) {
    check_pareto(p);
    check_rfm(f);
    if (t < 0.0) throw NumericError("pareto_nbd_cond_expected: horizon must be >= 0");
    if (t == 0.0) return 0.0;
    const auto x = static_cast<double>(f.x);
    const double alive = pareto_nbd_p_alive(p, f);
    const double base = (p.r + x) * (p.beta + f.T) / (p.alpha + f.T);
    double growth;
    if (std::abs(p.s - 1.0) < 1e-6)
        growth = std::log1p(t / (p.beta + f.T));
    else
        growth = (1.0 - std::pow((p.beta + f.T) / (p.beta + f.T + t), p.s - 1.0)) / (p.s - 1.0);
    return base * growth * alive;
}

namespace {

struct BGBranches {
    double ln_alive;  // log weight of the still-active path
    double ln_dead;   // log weight of the died-at-t_x path, -inf when absent
};

BGBranches bg_branches(const BetaGeomParams& p, const rfm::RFMSummary& f) {
    const auto x = static_cast<double>(f.x);
    const double rkx = p.r + p.k * x;
    const double ln_b_ab = ln_beta(p.a, p.b);
    BGBranches br{};
    if (p.variant == BGVariant::MBG) {
        br.ln_alive = ln_beta(p.a, p.b + x + 1.0) - ln_b_ab - rkx * std::log(p.alpha + f.T);
        br.ln_dead = ln_beta(p.a + 1.0, p.b + x) - ln_b_ab - rkx * std::log(p.alpha + f.t_x);
    } else {
        br.ln_alive = ln_beta(p.a, p.b + x) - ln_b_ab - rkx * std::log(p.alpha + f.T);
        br.ln_dead = f.x > 0 ? ln_beta(p.a + 1.0, p.b + x - 1.0) - ln_b_ab -
                                   rkx * std::log(p.alpha + f.t_x)
                             : kNegInf;
    }
    return br;
}

}  // namespace

double bg_family_log_lik(const BetaGeomParams& p, const rfm::RFMSummary& f) {
    check_bg(p);
    check_rfm(f);
    const auto x = static_cast<double>(f.x);
    const double k = p.k;
    const auto br = bg_branches(p, f);
    double ln_l = ln_gamma(p.r + k * x) - ln_gamma(p.r) + p.r * std::log(p.alpha) +
                  log_sum_exp(br.ln_alive, br.ln_dead);
    if (p.k > 1) ln_l += (k - 1.0) * f.sum_log_itt - x * ln_gamma(k);
    if (!std::isfinite(ln_l)) {
        std::ostringstream os;
        os << "bg_family_log_lik: non-finite result (variant=" << to_string(p.variant)
           << " k=" << p.k << " r=" << p.r << " alpha=" << p.alpha << " a=" << p.a
           << " b=" << p.b << " x=" << f.x << ")";
        throw NumericError(os.str());
    }
    return ln_l;
}

double bg_family_p_alive(const BetaGeomParams& p, const rfm::RFMSummary& f) {
    check_bg(p);
    check_rfm(f);
    const auto br = bg_branches(p, f);
    if (std::isinf(br.ln_dead)) return 1.0;
    const double d = br.ln_dead - br.ln_alive;
    if (d > 700.0) return 0.0;
    return 1.0 / (1.0 + std::exp(d));
}

double bg_family_cond_expected_closed(const BetaGeomParams& p, const rfm::RFMSummary& f,
                                      double t) {
    check_bg(p);
    check_rfm(f);
    if (t < 0.0) throw NumericError("bg_family_cond_expected_closed: horizon must be >= 0");
    if (p.k != 1)
        throw NumericError("bg_family_cond_expected_closed: no closed form for k > 1, "
                           "use the monte_carlo method");
    if (!(p.a > 1.0))
        throw NumericError("bg_family_cond_expected_closed: requires a > 1");
    if (t == 0.0) return 0.0;
    const auto x = static_cast<double>(f.x);
    const double z = t / (p.alpha + f.T + t);
    const double pow_term = std::pow((p.alpha + f.T) / (p.alpha + f.T + t), p.r + x);
    double lead, hyp;
    if (p.variant == BGVariant::MBG) {
        lead = (p.a + p.b + x) / (p.a - 1.0);
        hyp = gauss_2f1(p.r + x, p.b + x + 1.0, p.a + p.b + x, z);
    } else {
        lead = (p.a + p.b + x - 1.0) / (p.a - 1.0);
        hyp = gauss_2f1(p.r + x, p.b + x, p.a + p.b + x - 1.0, z);
    }
    return lead * (1.0 - pow_term * hyp) * bg_family_p_alive(p, f);
}

double p_alive(const TxnModel& model, const rfm::RFMSummary& f) {
    return std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ParetoNBDParams>)
                return pareto_nbd_p_alive(m, f);
            else
                return bg_family_p_alive(m, f);
        },
        model);
}

double cond_expected_transactions(const TxnModel& model, const rfm::RFMSummary& f, double t,
                                  ExpectationMethod method, const McConfig& mc) {
    if (t < 0.0) throw NumericError("cond_expected_transactions: horizon must be >= 0");
    if (method == ExpectationMethod::monte_carlo)
        return simgen::mc_conditional_expectation(model, f, t, mc.n_draws, mc.seed).estimate;
    return std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ParetoNBDParams>)
                return pareto_nbd_cond_expected(m, f, t);
            else
                return bg_family_cond_expected_closed(m, f, t);
        },
        model);
}

double gamma_gamma_log_lik(const GammaGammaParams& g, long x_total, double m_bar) {
    if (!(g.p > 0.0 && g.q > 0.0 && g.gamma > 0.0))
        throw NumericError("gamma_gamma: parameters must be strictly positive");
    if (x_total < 1) throw NumericError("gamma_gamma_log_lik: requires x >= 1 purchases");
    if (!(m_bar > 0.0)) throw NumericError("gamma_gamma_log_lik: requires m_bar > 0");
    const auto x = static_cast<double>(x_total);
    const double px = g.p * x;
    // the px-proportional pieces collapse to -px log1p(gamma/(m x)), which
    // stays finite where the naive sum of huge terms loses all precision
    return numerics::ln_gamma_ratio(px, g.q) - ln_gamma(g.q) + g.q * std::log(g.gamma) -
           px * std::log1p(g.gamma / (m_bar * x)) - std::log(m_bar) -
           g.q * std::log(g.gamma + m_bar * x);
}

double cond_expected_spend(const GammaGammaParams& g, long x_total, double m_bar) {
    if (x_total < 1) throw NumericError("cond_expected_spend: requires x >= 1 purchases");
    if (!(m_bar > 0.0)) throw NumericError("cond_expected_spend: requires m_bar > 0");
    if (!(g.q > 1.0)) throw NumericError("cond_expected_spend: requires q > 1");
    const auto x = static_cast<double>(x_total);
    return g.p * (g.gamma + m_bar * x) / (g.p * x + g.q - 1.0);
}

namespace {

void check_table(const std::vector<rfm::RFMSummary>& table, std::size_t min_users) {
    if (table.size() < min_users) {
        std::ostringstream os;
        os << "fit: need at least " << min_users << " paying users, got " << table.size();
        throw DataError(os.str());
    }
}

struct WeightedRfm {
    rfm::RFMSummary f;
    double count = 1.0;
};

// Daily-resolution data produces many identical (x, t_x, T, sum_log_itt)
// rows; collapsing them cuts the per-evaluation cost of large fits.
std::vector<WeightedRfm> dedupe_table(const std::vector<rfm::RFMSummary>& table) {
    std::map<std::tuple<long, double, double, double>, std::size_t> index;
    std::vector<WeightedRfm> out;
    for (const auto& f : table) {
        const auto key = std::make_tuple(f.x, f.t_x, f.T, f.sum_log_itt);
        auto [it, inserted] = index.emplace(key, out.size());
        if (inserted)
            out.push_back({f, 1.0});
        else
            out[it->second].count += 1.0;
    }
    return out;
}

// Log-likelihood summed over customers; per-x constants cached, which
// dominates the fit cost at large cohort sizes.
struct BGTableObjective {
    const std::vector<WeightedRfm>& table;
    BGVariant variant;
    int k;

    struct XTerms {
        double ln_gamma_rkx;
        double alive_w;
        double dead_w;
    };

    double operator()(const std::vector<double>& v) const {
        const BetaGeomParams p{v[0], v[1], v[2], v[3], k, variant};
        const double ln_b_ab = ln_beta(p.a, p.b);
        const double ln_gamma_r = ln_gamma(p.r);
        const double ln_alpha = std::log(p.alpha);
        const double ln_gamma_k = k > 1 ? ln_gamma(static_cast<double>(k)) : 0.0;
        std::unordered_map<long, XTerms> by_x;
        double total = 0.0;
        for (const auto& [f, count] : table) {
            const auto x = static_cast<double>(f.x);
            auto it = by_x.find(f.x);
            if (it == by_x.end()) {
                XTerms terms{};
                terms.ln_gamma_rkx = ln_gamma(p.r + k * x);
                if (variant == BGVariant::MBG) {
                    terms.alive_w = ln_beta(p.a, p.b + x + 1.0) - ln_b_ab;
                    terms.dead_w = ln_beta(p.a + 1.0, p.b + x) - ln_b_ab;
                } else {
                    terms.alive_w = ln_beta(p.a, p.b + x) - ln_b_ab;
                    terms.dead_w =
                        f.x > 0 ? ln_beta(p.a + 1.0, p.b + x - 1.0) - ln_b_ab : kNegInf;
                }
                it = by_x.emplace(f.x, terms).first;
            }
            const XTerms& terms = it->second;
            const double rkx = p.r + k * x;
            const double ln_alive = terms.alive_w - rkx * std::log(p.alpha + f.T);
            const double ln_dead = std::isinf(terms.dead_w)
                                       ? kNegInf
                                       : terms.dead_w - rkx * std::log(p.alpha + f.t_x);
            double ln_l =
                terms.ln_gamma_rkx - ln_gamma_r + p.r * ln_alpha + log_sum_exp(ln_alive, ln_dead);
            if (k > 1) ln_l += (k - 1.0) * f.sum_log_itt - x * ln_gamma_k;
            total += count * ln_l;
        }
        return total;
    }
};

}  // namespace

FitResult<ParetoNBDParams> fit_pareto_nbd(const std::vector<rfm::RFMSummary>& table,
                                          const FitConfig& config) {
    check_table(table, config.min_users);
    const auto weighted = dedupe_table(table);
    numerics::OptimProblem problem;
    problem.lower_bounds = {0.0, 0.0, 0.0, 0.0};
    problem.initial_point = config.initial_point.value_or(std::vector<double>{1.0, 1.0, 1.0, 1.0});
    // A non-finite likelihood during the search just marks a bad region.
    problem.objective = [&weighted](const std::vector<double>& v) -> double {
        const ParetoNBDParams p{v[0], v[1], v[2], v[3]};
        try {
            double total = 0.0;
            for (const auto& [f, count] : weighted) total += count * pareto_nbd_log_lik(p, f);
            return total;
        } catch (const NumericError&) {
            return kNegInf;
        }
    };
    const auto res = numerics::nelder_mead(problem, config.optim);
    return {ParetoNBDParams{res.argmax[0], res.argmax[1], res.argmax[2], res.argmax[3]},
            res.max_value, res.converged, res.n_evals};
}

FitResult<BetaGeomParams> fit_bg_family(const std::vector<rfm::RFMSummary>& table,
                                        BGVariant variant, int k, const FitConfig& config) {
    check_table(table, config.min_users);
    if (k < 1) throw NumericError("fit_bg_family: k must be >= 1");
    const auto weighted = dedupe_table(table);
    numerics::OptimProblem problem;
    problem.lower_bounds = {0.0, 0.0, 0.0, 0.0};
    problem.initial_point = config.initial_point.value_or(std::vector<double>{1.0, 1.0, 1.0, 1.0});
    BGTableObjective obj{weighted, variant, k};
    problem.objective = [obj](const std::vector<double>& v) -> double {
        try {
            return obj(v);
        } catch (const NumericError&) {
            return kNegInf;
        }
    };
    const auto res = numerics::nelder_mead(problem, config.optim);
    return {BetaGeomParams{res.argmax[0], res.argmax[1], res.argmax[2], res.argmax[3], k, variant},
            res.max_value, res.converged, res.n_evals};
}

FitResult<GammaGammaParams> fit_gamma_gamma(const std::vector<rfm::RFMSummary>& table,
                                            const FitConfig& config) {
    check_table(table, config.min_users);
    numerics::OptimProblem problem;
    // q bounded above 1 so the conditional expectation stays finite
    problem.lower_bounds = {0.0, 1.0 + 1e-6, 0.0};
    problem.initial_point = config.initial_point.value_or(std::vector<double>{1.0, 2.0, 1.0});
    problem.objective = [&table](const std::vector<double>& v) -> double {
        const GammaGammaParams g{v[0], v[1], v[2]};
        try {
            double total = 0.0;
            for (const auto& f : table) total += gamma_gamma_log_lik(g, f.x + 1, f.m_bar);
            return total;
        } catch (const NumericError&) {
            return kNegInf;
        }
    };
    const auto res = numerics::nelder_mead(problem, config.optim);
    return {GammaGammaParams{res.argmax[0], res.argmax[1], res.argmax[2]}, res.max_value,
            res.converged, res.n_evals};
}

KSelection select_k(const std::vector<rfm::RFMSummary>& table, BGVariant variant, int k_min,
                    int k_max, const FitConfig& config) {
    if (k_min < 1 || k_max < k_min) throw NumericError("select_k: bad k range");
    KSelection sel;
    double best = kNegInf;
    std::optional<std::vector<double>> warm;
    for (int k = k_min; k <= k_max; ++k) {
        FitConfig c = config;
        if (warm) {
            // warm-start from the previous k's optimum; parameters move
            // smoothly in k, so a lighter search suffices
            c.initial_point = warm;
            c.optim.multistarts = std::max(1, config.optim.multistarts / 2);
        }
        try {
            auto fit = fit_bg_family(table, variant, k, c);
            sel.log_lik_by_k.emplace_back(k, fit.log_lik);
            warm = {fit.params.r, fit.params.alpha, fit.params.a, fit.params.b};
            if (fit.log_lik > best) {
                best = fit.log_lik;
                sel.k = k;
                sel.fit = std::move(fit);
            }
        } catch (const std::exception& e) {
            sel.warnings.push_back("k=" + std::to_string(k) + " fit failed: " + e.what());
        }
    }
    if (sel.log_lik_by_k.empty())
        throw NumericError("select_k: every k in range failed to fit");
    return sel;
}

LTVPrediction predict_ltv(const TxnModel& txn_model, SpendModel spend_model,
                          const std::optional<GammaGammaParams>& gg, const rfm::RFMSummary& f,
                          int horizon_days, ExpectationMethod method, const McConfig& mc) {
    if (horizon_days < 0) throw NumericError("predict_ltv: horizon must be >= 0");
    LTVPrediction out;
    out.player_id = f.player_id;
    out.horizon_days = horizon_days;
    out.expected_transactions =
        cond_expected_transactions(txn_model, f, static_cast<double>(horizon_days), method, mc);
    if (spend_model == SpendModel::gamma_gamma) {
        if (!gg) throw UsageError("predict_ltv: gamma_gamma spend model without fitted params");
        out.expected_spend_per_txn = cond_expected_spend(*gg, f.x + 1, f.m_bar);
    } else {
        out.expected_spend_per_txn = f.m_bar;
    }
    out.ltv = out.expected_transactions * out.expected_spend_per_txn;
    out.p_alive = p_alive(txn_model, f);
    return out;
}

}  // namespace ltv::btyd
