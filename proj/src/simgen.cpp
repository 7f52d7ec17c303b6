#include "ltv/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ltv/errors.hpp"
#include "ltv/numerics.hpp"
#include "ltv/rng.hpp"

namespace ltv::simgen {

using numerics::log_diff_exp;
using numerics::log_sum_exp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string customer_id(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "p%06zu", index);
    return buf;
}

}  // namespace

std::string to_string(World w) {
    switch (w) {
        case World::pareto_nbd: return "pareto_nbd";
        case World::bg: return "bg";
        case World::mbg: return "mbg";
    }
    return "?";
}

SimResult simulate_cohort(const SimSpec& spec) {
    if (spec.n_customers < 1) throw UsageError("simulate_cohort: n_customers must be >= 1");
    if (spec.observation_days < 1.0)
        throw UsageError("simulate_cohort: observation_days must be >= 1");
    const int k = spec.world == World::pareto_nbd ? spec.k : spec.beta_geom.k;
    if (k < 1) throw UsageError("simulate_cohort: k must be >= 1");

    SimResult out;
    out.observation_days = spec.observation_days;
    out.customers.reserve(spec.n_customers);

    for (std::size_t i = 0; i < spec.n_customers; ++i) {
        Rng rng(derive_seed(spec.seed, i));
        SimulatedCustomer c;
        c.id = customer_id(i);

        c.acquisition_day = spec.start_day;
        if (spec.stagger_days > 0.0)
            c.acquisition_day += static_cast<CalendarDay>(
                rng.below(static_cast<std::uint64_t>(spec.stagger_days) + 1));
        const double horizon =
            spec.observation_days - static_cast<double>(c.acquisition_day - spec.start_day);

        double p_dropout = 0.0;
        if (spec.world == World::pareto_nbd) {
            c.latent.lambda = rng.gamma(spec.pareto.r, spec.pareto.alpha);
            c.latent.mu = rng.gamma(spec.pareto.s, spec.pareto.beta);
            c.death_time = rng.exponential(c.latent.mu);
        } else {
            c.latent.lambda = rng.gamma(spec.beta_geom.r, spec.beta_geom.alpha);
            p_dropout = rng.beta(spec.beta_geom.a, spec.beta_geom.b);
            c.latent.p = p_dropout;
        }
        c.latent.nu = rng.gamma(spec.spend.q, spec.spend.gamma);

        // acquisition purchase at time zero
        bool alive = true;
        c.purchases.emplace_back(0.0, rng.gamma(spec.spend.p, c.latent.nu));
        if (spec.world == World::mbg && rng.uniform() < p_dropout) {
            alive = false;
            c.death_time = 0.0;
        }
        if (spec.world == World::pareto_nbd && c.death_time == 0.0) alive = false;

        double t = 0.0;
        while (alive) {
            const double gap = rng.erlang(static_cast<unsigned>(k), c.latent.lambda);
            const double t_next = t + gap;
            if (spec.world == World::pareto_nbd && t_next >= c.death_time) break;
            if (t_next > horizon) break;
            t = t_next;
            c.purchases.emplace_back(t, rng.gamma(spec.spend.p, c.latent.nu));
            if (spec.world != World::pareto_nbd && rng.uniform() < p_dropout) {
                alive = false;
                c.death_time = t;
            }
        }
        out.customers.push_back(std::move(c));
    }
    return out;
}

namespace {

ingest::EventRecord make_event(const std::string& id, CalendarDay base_day, double t_days,
                               ingest::EventKind kind, double value) {
    ingest::EventRecord e;
    e.player_id = id;
    e.timestamp = (base_day + static_cast<CalendarDay>(std::floor(t_days))) * 86400 +
                  static_cast<UtcSeconds>(std::floor((t_days - std::floor(t_days)) * 86400.0));
    e.kind = kind;
    e.value = value;
    return e;
}

void sort_events(std::vector<ingest::EventRecord>& events) {
    std::stable_sort(events.begin(), events.end(),
                     [](const ingest::EventRecord& a, const ingest::EventRecord& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         if (a.player_id != b.player_id) return a.player_id < b.player_id;
                         return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                     });
}

}  // namespace

std::vector<ingest::EventRecord> purchase_events(const SimResult& sim) {
    std::vector<ingest::EventRecord> events;
    for (const auto& c : sim.customers)
        for (const auto& [t, spend] : c.purchases)
            events.push_back(make_event(c.id, c.acquisition_day, t, ingest::EventKind::purchase,
                                        spend));
    sort_events(events);
    return events;
}

std::vector<ingest::EventRecord> simulate_behavior(const SimResult& sim, const SimSpec& spec) {
    std::vector<ingest::EventRecord> events = purchase_events(sim);

    const double lambda_ref =
        (spec.world == World::pareto_nbd ? spec.pareto.r / spec.pareto.alpha
                                         : spec.beta_geom.r / spec.beta_geom.alpha);
    for (std::size_t i = 0; i < sim.customers.size(); ++i) {
        const auto& c = sim.customers[i];
        // separate substream so behavior draws do not disturb the purchase process
        Rng rng(derive_seed(spec.seed ^ 0x5eedbeef11ULL, i));
        const auto acquisition_offset = static_cast<double>(c.acquisition_day - spec.start_day);
        const double horizon = sim.observation_days - acquisition_offset;
        double behavior_end = c.death_time;
        if (spec.behavior_tail_mean_days > 0.0 && !std::isinf(c.death_time))
            behavior_end += rng.exponential(1.0 / spec.behavior_tail_mean_days);
        const double active_until = std::min(behavior_end, horizon);
        const double median_playtime =
            spec.base_playtime *
            std::pow(c.latent.lambda / lambda_ref, spec.behavior_linkage);
        // day d spans [d, d+1); the customer is active on it if alive at its start
        for (double day = 0.0; day < active_until || day == 0.0; day += 1.0) {
            if (day + acquisition_offset >= sim.observation_days) break;
            const double playtime = rng.lognormal(std::log(median_playtime), spec.playtime_sigma);
            const auto sessions = 1 + rng.poisson(playtime / 60.0);
            const auto levelups = rng.poisson(playtime / 90.0);
            events.push_back(make_event(c.id, c.acquisition_day, day + 0.25,
                                        ingest::EventKind::login, 0.0));
            for (long s = 0; s < sessions; ++s)
                events.push_back(make_event(c.id, c.acquisition_day, day + 0.3 + 0.02 * s,
                                            ingest::EventKind::session,
                                            playtime / static_cast<double>(sessions)));
            for (long l = 0; l < levelups; ++l)
                events.push_back(make_event(c.id, c.acquisition_day, day + 0.5 + 0.01 * l,
                                            ingest::EventKind::levelup, 0.0));
        }
    }
    sort_events(events);
    return events;
}

std::string latents_csv(const SimResult& sim) {
    std::ostringstream os;
    os << "player_id,lambda,mu,p,nu,acquisition_day,death_time,n_purchases\n";
    char buf[256];
    for (const auto& c : sim.customers) {
        std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%lld,%.10g,%zu\n",
                      c.id.c_str(), c.latent.lambda, c.latent.mu, c.latent.p, c.latent.nu,
                      static_cast<long long>(c.acquisition_day),
                      std::isinf(c.death_time) ? -1.0 : c.death_time, c.purchases.size());
        os << buf;
    }
    return os.str();
}

namespace {

// ln P(Erlang(k, lambda) > u) = ln of the Poisson(lambda u) cdf at k-1
double ln_erlang_survival(int k, double lambda, double u) {
    if (u <= 0.0) return 0.0;
    const double lu = lambda * u;
    double ln_term = -lu;  // j = 0
    double ln_sum = ln_term;
    for (int j = 1; j < k; ++j) {
        ln_term += std::log(lu / static_cast<double>(j));
        ln_sum = log_sum_exp(ln_sum, ln_term);
    }
    return ln_sum;
}

// residual time to the next Erlang-k renewal given elapsed u without one:
// completed phases ~ Poisson(lambda u) truncated to <= k-1, remainder fresh
double sample_erlang_residual(Rng& rng, int k, double lambda, double u) {
    int j = 0;
    if (u > 0.0 && k > 1) {
        const double lu = lambda * u;
        double ln_w = -lu;
        double ln_total = ln_w;
        std::vector<double> ln_ws(static_cast<std::size_t>(k));
        ln_ws[0] = ln_w;
        for (int i = 1; i < k; ++i) {
            ln_w += std::log(lu / static_cast<double>(i));
            ln_ws[static_cast<std::size_t>(i)] = ln_w;
            ln_total = log_sum_exp(ln_total, ln_w);
        }
        const double target = rng.uniform();
        double cum = 0.0;
        for (int i = 0; i < k; ++i) {
            cum += std::exp(ln_ws[static_cast<std::size_t>(i)] - ln_total);
            if (target < cum) {
                j = i;
                break;
            }
            j = i;  // guard against rounding at the top of the cdf
        }
    }
    return rng.erlang(static_cast<unsigned>(k - j), lambda);
}

struct BranchWeights {
    double ln_alive;
    double ln_dead;
    double ln_total() const { return log_sum_exp(ln_alive, ln_dead); }
    double p_alive() const {
        if (std::isinf(ln_dead)) return 1.0;
        const double d = ln_dead - ln_alive;
        return d > 700.0 ? 0.0 : 1.0 / (1.0 + std::exp(d));
    }
};

}  // namespace

McEstimate mc_conditional_expectation(const btyd::TxnModel& model, const rfm::RFMSummary& f,
                                      double t, std::size_t n_draws, std::uint64_t seed) {
    if (t < 0.0) throw NumericError("mc_conditional_expectation: horizon must be >= 0");
    if (n_draws < 2) throw UsageError("mc_conditional_expectation: need at least 2 draws");
    McEstimate out;
    if (t == 0.0) {
        out.effective_sample_size = static_cast<double>(n_draws);
        return out;
    }

    const bool is_pareto = std::holds_alternative<btyd::ParetoNBDParams>(model);
    const auto* pn = std::get_if<btyd::ParetoNBDParams>(&model);
    const auto* bg = std::get_if<btyd::BetaGeomParams>(&model);
    const int k = is_pareto ? 1 : bg->k;
    const bool dropout_at_zero = !is_pareto && bg->variant == btyd::BGVariant::MBG;
    const auto x = static_cast<double>(f.x);

    // The purchase rate is drawn from its conjugate update
    // Gamma(r + k x, alpha + t_x) instead of the prior: the lambda^(kx)
    // e^(-lambda t_x) likelihood factor cancels exactly against the proposal
    // kernel, leaving near-flat weights. Prior sampling collapses to a
    // useless effective sample size once k x is large.
    const double shape = (is_pareto ? pn->r : bg->r) + static_cast<double>(k) * x;
    const double rate = (is_pareto ? pn->alpha : bg->alpha) + f.t_x;

    Rng rng(seed);
    std::vector<double> ln_w(n_draws);
    std::vector<double> contrib(n_draws);

    for (std::size_t i = 0; i < n_draws; ++i) {
        double count_if_alive = 0.0;
        BranchWeights w{};
        const double lambda = rng.gamma(shape, rate);
        if (is_pareto) {
            const double mu = rng.gamma(pn->s, pn->beta);
            // individual likelihood divided by lambda^x e^(-lambda t_x)
            w.ln_alive = -mu * f.T - lambda * (f.T - f.t_x);
            w.ln_dead = f.T > f.t_x
                            ? std::log(mu) - std::log(lambda + mu) +
                                  log_diff_exp(-mu * f.t_x,
                                               -mu * f.T - lambda * (f.T - f.t_x))
                            : -kInf;
            const double alive_span = std::min(t, rng.exponential(mu));
            count_if_alive = static_cast<double>(rng.poisson(lambda * alive_span));
        } else {
            const double p = rng.beta(bg->a, bg->b);
            const double theta = dropout_at_zero ? 1.0 : 0.0;
            // individual likelihood divided by lambda^(kx) e^(-lambda t_x)
            w.ln_alive =
                (x + theta) * std::log1p(-p) + ln_erlang_survival(k, lambda, f.T - f.t_x);
            w.ln_dead = x + theta >= 1.0
                            ? (x - 1.0 + theta) * std::log1p(-p) + std::log(p)
                            : -kInf;
            double tt = sample_erlang_residual(rng, k, lambda, f.T - f.t_x);
            long n = 0;
            while (tt <= t) {
                ++n;
                if (rng.uniform() < p) break;
                tt += rng.erlang(static_cast<unsigned>(k), lambda);
            }
            count_if_alive = static_cast<double>(n);
        }
        ln_w[i] = w.ln_total();
        contrib[i] = w.p_alive() * count_if_alive;
    }

    const double m = *std::max_element(ln_w.begin(), ln_w.end());
    if (!std::isfinite(m))
        throw NumericError("mc_conditional_expectation: all draws have zero likelihood");
    double sum_w = 0.0, sum_wc = 0.0, sum_w2 = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
        const double w = std::exp(ln_w[i] - m);
        sum_w += w;
        sum_wc += w * contrib[i];
        sum_w2 += w * w;
    }
    out.estimate = sum_wc / sum_w;
    double var = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
        const double w = std::exp(ln_w[i] - m);
        const double d = contrib[i] - out.estimate;
        var += w * w * d * d;
    }
    out.std_error = std::sqrt(var) / sum_w;
    out.effective_sample_size = sum_w * sum_w / sum_w2;
    out.low_ess_warning = out.effective_sample_size < 1000.0;
    return out;
}

}  // namespace ltv::simgen
