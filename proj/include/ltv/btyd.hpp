#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ltv/numerics.hpp"
#include "ltv/rfm.hpp"

namespace ltv::btyd {

// Gamma mixing over individual purchase rates (r, alpha) and dropout rates
// (s, beta). Rates are per day.
struct ParetoNBDParams {
    double r = 1.0;
    double alpha = 1.0;
    double s = 1.0;
    double beta = 1.0;
};

enum class BGVariant { BG, MBG };

std::string to_string(BGVariant v);

// Gamma mixing over the per-day event rate plus a beta-distributed
// per-transaction dropout probability. k is the Erlang regularity of the
// inter-purchase times; k = 1 recovers BG/NBD and MBG/NBD.
struct BetaGeomParams {
    double r = 1.0;
    double alpha = 1.0;
    double a = 1.0;
    double b = 1.0;
    int k = 1;
    BGVariant variant = BGVariant::MBG;
};

// Spend per transaction ~ gamma(p, nu) with nu ~ gamma(q, gamma). q > 1 is
// required for a finite conditional expectation and is enforced at fit time.
struct GammaGammaParams {
    double p = 1.0;
    double q = 2.0;
    double gamma = 1.0;
};

using TxnModel = std::variant<ParetoNBDParams, BetaGeomParams>;

double pareto_nbd_log_lik(const ParetoNBDParams& params, const rfm::RFMSummary& rfm);
double pareto_nbd_p_alive(const ParetoNBDParams& params, const rfm::RFMSummary& rfm);
/// Expected transactions in (T, T+t] given (x, t_x, T).
double pareto_nbd_cond_expected(const ParetoNBDParams& params, const rfm::RFMSummary& rfm,
                                double t);

/// Condensed BG/CNBD-k and MBG/CNBD-k log-likelihood; k = 1 is the exact
/// BG/NBD or MBG/NBD likelihood. Requires rfm.sum_log_itt for k > 1.
double bg_family_log_lik(const BetaGeomParams& params, const rfm::RFMSummary& rfm);
double bg_family_p_alive(const BetaGeomParams& params, const rfm::RFMSummary& rfm);
/// Closed-form expected transactions; defined for k = 1 and a > 1 only.
double bg_family_cond_expected_closed(const BetaGeomParams& params, const rfm::RFMSummary& rfm,
                                      double t);

double p_alive(const TxnModel& model, const rfm::RFMSummary& rfm);

enum class ExpectationMethod { closed_form, monte_carlo };

struct McConfig {
    std::size_t n_draws = 100000;
    std::uint64_t seed = 1;
};

/// Dispatches to the per-model closed form or to the posterior-weighted
/// Monte Carlo in simgen. closed_form is unsupported for k > 1.
double cond_expected_transactions(const TxnModel& model, const rfm::RFMSummary& rfm, double t,
                                  ExpectationMethod method, const McConfig& mc = {});

/// x_total is the number of purchases (>= 1), m_bar their mean spend.
double gamma_gamma_log_lik(const GammaGammaParams& params, long x_total, double m_bar);
double cond_expected_spend(const GammaGammaParams& params, long x_total, double m_bar);

struct FitConfig {
    numerics::OptimConfig optim;
    std::size_t min_users = 50;
    std::optional<std::vector<double>> initial_point;  // model-specific default otherwise
};

template <typename Params>
struct FitResult {
    Params params;
    double log_lik = 0.0;
    bool converged = false;
    std::size_t n_evals = 0;
};

FitResult<ParetoNBDParams> fit_pareto_nbd(const std::vector<rfm::RFMSummary>& table,
                                          const FitConfig& config = {});
FitResult<BetaGeomParams> fit_bg_family(const std::vector<rfm::RFMSummary>& table,
                                        BGVariant variant, int k, const FitConfig& config = {});
FitResult<GammaGammaParams> fit_gamma_gamma(const std::vector<rfm::RFMSummary>& table,
                                            const FitConfig& config = {});

struct KSelection {
    int k = 1;
    FitResult<BetaGeomParams> fit;
    std::vector<std::pair<int, double>> log_lik_by_k;  // successfully fitted k only
    std::vector<std::string> warnings;
};

/// Fits the BG/MBG family for each k in [k_min, k_max] and returns the k
/// with the highest total log-likelihood (Erlang timing terms included,
/// without which values are not comparable across k).
KSelection select_k(const std::vector<rfm::RFMSummary>& table, BGVariant variant, int k_min = 1,
                    int k_max = 12, const FitConfig& config = {});

enum class SpendModel { gamma_gamma, historical_average };

struct LTVPrediction {
    std::string player_id;
    double expected_transactions = 0.0;
    double expected_spend_per_txn = 0.0;
    double ltv = 0.0;
    double p_alive = 0.0;
    int horizon_days = 365;
};

LTVPrediction predict_ltv(const TxnModel& txn_model, SpendModel spend_model,
                          const std::optional<GammaGammaParams>& gg,
                          const rfm::RFMSummary& rfm, int horizon_days = 365,
                          ExpectationMethod method = ExpectationMethod::closed_form,
                          const McConfig& mc = {});

}  // namespace ltv::btyd
