#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ltv/btyd.hpp"
#include "ltv/dates.hpp"
#include "ltv/ingest.hpp"
#include "ltv/rfm.hpp"

namespace ltv::simgen {

enum class World { pareto_nbd, bg, mbg };

std::string to_string(World w);

struct CustomerLatent {
    double lambda = 0.0;  // purchase-phase rate per day
    double mu = 0.0;      // dropout rate per day (pareto_nbd world)
    double p = 0.0;       // per-transaction dropout probability (bg/mbg worlds)
    double nu = 0.0;      // individual spend-rate parameter
};

struct SimSpec {
    World world = World::pareto_nbd;
    int k = 1;  // Erlang regularity of inter-purchase times
    btyd::ParetoNBDParams pareto;
    btyd::BetaGeomParams beta_geom;  // r, alpha, a, b used for bg/mbg worlds
    btyd::GammaGammaParams spend;
    std::size_t n_customers = 1000;
    double observation_days = 365.0;
    std::uint64_t seed = 1;

    // acquisition days drawn uniformly from [0, stagger_days]
    double stagger_days = 0.0;
    CalendarDay start_day = 0;  // calendar day of simulation time zero

    // behavior synthesis: daily playtime is lognormal with median
    // base_playtime * (lambda / E[lambda])^behavior_linkage
    double behavior_linkage = 1.0;
    double base_playtime = 30.0;
    double playtime_sigma = 0.5;
    // players may keep playing after the purchase process dies: activity
    // continues for an exponential tail of this mean beyond the latent
    // death (0 = activity stops at the death day)
    double behavior_tail_mean_days = 0.0;
};

struct SimulatedCustomer {
    std::string id;
    CustomerLatent latent;
    CalendarDay acquisition_day = 0;
    // death time in days from acquisition; +inf when still alive at the end
    double death_time = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> purchases;  // (days from acquisition, spend)
};

struct SimResult {
    std::vector<SimulatedCustomer> customers;
    double observation_days = 0.0;
};

/// Draws latents from the truth mixing distributions and generates the
/// purchase/dropout process per customer. Deterministic given spec.seed;
/// customers use independent derived substreams.
SimResult simulate_cohort(const SimSpec& spec);

/// Purchase events only, ordered by (timestamp, player id).
std::vector<ingest::EventRecord> purchase_events(const SimResult& sim);

/// Full telemetry: purchases plus daily logins, sessions (playtime) and
/// level-ups on every day the customer is alive. Activity stops at the
/// latent death day so downstream churn labeling applies.
std::vector<ingest::EventRecord> simulate_behavior(const SimResult& sim, const SimSpec& spec);

std::string latents_csv(const SimResult& sim);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double effective_sample_size = 0.0;
    bool low_ess_warning = false;
};

/// Posterior-weighted Monte Carlo estimate of the expected transactions in
/// (T, T+t]. The purchase rate is drawn from its conjugate update
/// Gamma(r + k x, alpha + t_x) with the exact importance correction, the
/// remaining latents from their priors; each draw is weighted by its
/// individual-level likelihood of (x, t_x, T) and simulated forward.
McEstimate mc_conditional_expectation(const btyd::TxnModel& model, const rfm::RFMSummary& rfm,
                                      double t, std::size_t n_draws, std::uint64_t seed);

}  // namespace ltv::simgen
