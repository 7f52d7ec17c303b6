#include "ltv/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ltv/errors.hpp"
#include "ltv/rng.hpp"

namespace ltv::pipeline {

std::string to_string(ModelKind m) {
    switch (m) {
        case ModelKind::pareto_nbd: return "pareto_nbd";
        case ModelKind::bg: return "bg";
        case ModelKind::mbg: return "mbg";
        case ModelKind::bg_cnbd_k: return "bg_cnbd_k";
        case ModelKind::mbg_cnbd_k: return "mbg_cnbd_k";
        case ModelKind::dnn: return "dnn";
        case ModelKind::cnn: return "cnn";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "pareto_nbd") return ModelKind::pareto_nbd;
    if (s == "bg") return ModelKind::bg;
    if (s == "mbg") return ModelKind::mbg;
    if (s == "bg_cnbd_k") return ModelKind::bg_cnbd_k;
    if (s == "mbg_cnbd_k") return ModelKind::mbg_cnbd_k;
    if (s == "dnn") return ModelKind::dnn;
    if (s == "cnn") return ModelKind::cnn;
    throw UsageError("unknown model kind: " + s);
}

namespace {

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using KeyMap = std::map<std::string, std::string>;

double to_double(const KeyMap& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw UsageError("config: bad numeric value for " + key + ": " + it->second);
    }
}

std::int64_t to_int(const KeyMap& kv, const std::string& key, std::int64_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (...) {
        throw UsageError("config: bad integer value for " + key + ": " + it->second);
    }
}

std::string to_str(const KeyMap& kv, const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

CalendarDay to_date(const KeyMap& kv, const std::string& key, CalendarDay fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    auto d = parse_date(it->second);
    if (!d) throw UsageError("config: bad date for " + key + ": " + it->second);
    return *d;
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
    KeyMap kv;
    std::istringstream is(text);
    std::string line, section;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config: expected key=value, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        kv[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }

    PipelineConfig c;
    c.events_path = to_str(kv, "paths.events", c.events_path);
    c.workdir = to_str(kv, "paths.workdir", c.workdir);

    c.window_start = to_date(kv, "cohort.window_start", c.window_start);
    c.window_end = to_date(kv, "cohort.window_end", c.window_end);
    c.churn_gap_days = static_cast<int>(to_int(kv, "cohort.churn_gap_days", c.churn_gap_days));
    for (const auto& m : split_list(to_str(kv, "cohort.whale_months", ""))) {
        auto day = parse_date(m + "-01");
        if (!day) throw UsageError("config: bad whale month: " + m);
        int y;
        unsigned mo, dd;
        civil_from_days(*day, y, mo, dd);
        c.whale_months.push_back({y, mo});
    }

    c.horizon_days = static_cast<int>(to_int(kv, "predict.horizon_days", c.horizon_days));
    for (const auto& m : split_list(to_str(kv, "predict.models", "")))
        c.models.push_back(model_kind_from_string(m));
    const std::string spend = to_str(kv, "predict.spend_model", "gamma_gamma");
    if (spend == "gamma_gamma")
        c.spend_model = btyd::SpendModel::gamma_gamma;
    else if (spend == "historical_average")
        c.spend_model = btyd::SpendModel::historical_average;
    else
        throw UsageError("config: unknown spend_model: " + spend);
    c.predict_all_cohort = to_str(kv, "predict.scope", "test") == "cohort";
    c.mc_draws = static_cast<std::size_t>(to_int(kv, "predict.mc_draws",
                                                 static_cast<std::int64_t>(c.mc_draws)));

    c.fit_min_users = static_cast<std::size_t>(
        to_int(kv, "fit.min_users", static_cast<std::int64_t>(c.fit_min_users)));
    c.k_min = static_cast<int>(to_int(kv, "fit.k_min", c.k_min));
    c.k_max = static_cast<int>(to_int(kv, "fit.k_max", c.k_max));
    c.fit_multistarts = static_cast<int>(to_int(kv, "fit.multistarts", c.fit_multistarts));
    c.fit_max_evals = static_cast<std::size_t>(
        to_int(kv, "fit.max_evals", static_cast<std::int64_t>(c.fit_max_evals)));
    c.fit_tol = to_double(kv, "fit.tol", c.fit_tol);

    c.train.learning_rate = to_double(kv, "train.learning_rate", c.train.learning_rate);
    c.train.batch_size = static_cast<std::size_t>(
        to_int(kv, "train.batch_size", static_cast<std::int64_t>(c.train.batch_size)));
    c.train.max_epochs = static_cast<std::size_t>(
        to_int(kv, "train.max_epochs", static_cast<std::int64_t>(c.train.max_epochs)));
    c.train.patience = static_cast<std::size_t>(
        to_int(kv, "train.patience", static_cast<std::int64_t>(c.train.patience)));
    c.train.adam_beta1 = to_double(kv, "train.adam_beta1", c.train.adam_beta1);
    c.train.adam_beta2 = to_double(kv, "train.adam_beta2", c.train.adam_beta2);
    c.train.adam_eps = to_double(kv, "train.adam_eps", c.train.adam_eps);
    c.series_len = static_cast<std::size_t>(
        to_int(kv, "train.series_len", static_cast<std::int64_t>(c.series_len)));

    if (kv.count("sim.world")) {
        simgen::SimSpec s;
        const std::string world = kv.at("sim.world");
        if (world == "pareto_nbd")
            s.world = simgen::World::pareto_nbd;
        else if (world == "bg")
            s.world = simgen::World::bg;
        else if (world == "mbg")
            s.world = simgen::World::mbg;
        else
            throw UsageError("config: unknown sim world: " + world);
        s.k = static_cast<int>(to_int(kv, "sim.k", 1));
        s.beta_geom.k = s.k;
        s.beta_geom.variant = s.world == simgen::World::bg ? btyd::BGVariant::BG
                                                           : btyd::BGVariant::MBG;
        s.pareto.r = to_double(kv, "sim.r", 1.0);
        s.pareto.alpha = to_double(kv, "sim.alpha", 10.0);
        s.pareto.s = to_double(kv, "sim.s", 1.0);
        s.pareto.beta = to_double(kv, "sim.beta", 20.0);
        s.beta_geom.r = s.pareto.r;
        s.beta_geom.alpha = s.pareto.alpha;
        s.beta_geom.a = to_double(kv, "sim.a", 1.5);
        s.beta_geom.b = to_double(kv, "sim.b", 5.0);
        s.spend.p = to_double(kv, "sim.p_spend", 6.0);
        s.spend.q = to_double(kv, "sim.q_spend", 4.0);
        s.spend.gamma = to_double(kv, "sim.gamma_spend", 15.0);
        s.n_customers = static_cast<std::size_t>(to_int(kv, "sim.n_customers", 1000));
        s.observation_days = to_double(kv, "sim.observation_days", 365.0);
        s.stagger_days = to_double(kv, "sim.stagger_days", 0.0);
        s.start_day = to_date(kv, "sim.start_date", 0);
        s.behavior_linkage = to_double(kv, "sim.behavior_linkage", 1.0);
        s.base_playtime = to_double(kv, "sim.base_playtime", 30.0);
        s.playtime_sigma = to_double(kv, "sim.playtime_sigma", 0.5);
        s.behavior_tail_mean_days = to_double(kv, "sim.behavior_tail_days", 0.0);
        c.sim = s;
    }

    c.master_seed = static_cast<std::uint64_t>(to_int(kv, "seeds.master", 1));
    if (c.sim) c.sim->seed = derive_seed(c.master_seed, 101);
    c.train.seed = derive_seed(c.master_seed, 103);

    // horizon 0 is degenerate but well defined (every LTV is zero)
    if (c.horizon_days < 0) throw UsageError("config: horizon_days must be >= 0");
    if (c.churn_gap_days < 1) throw UsageError("config: churn_gap_days must be >= 1");
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config_text(os.str());
}

std::string render_config(const PipelineConfig& c) {
    std::ostringstream os;
    char buf[256];
    os << "[paths]\nevents = " << c.events_path << "\nworkdir = " << c.workdir << "\n\n";
    os << "[cohort]\nwindow_start = " << format_date(c.window_start)
       << "\nwindow_end = " << format_date(c.window_end)
       << "\nchurn_gap_days = " << c.churn_gap_days << "\n";
    os << "whale_months =";
    for (std::size_t i = 0; i < c.whale_months.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s %04d-%02u", i ? "," : "", c.whale_months[i].year,
                      c.whale_months[i].month);
        os << buf;
    }
    os << "\n\n[predict]\nhorizon_days = " << c.horizon_days << "\nmodels =";
    for (std::size_t i = 0; i < c.models.size(); ++i)
        os << (i ? ", " : " ") << to_string(c.models[i]);
    os << "\nspend_model = "
       << (c.spend_model == btyd::SpendModel::gamma_gamma ? "gamma_gamma" : "historical_average")
       << "\nscope = " << (c.predict_all_cohort ? "cohort" : "test")
       << "\nmc_draws = " << c.mc_draws << "\n\n";
    os << "[fit]\nmin_users = " << c.fit_min_users << "\nk_min = " << c.k_min
       << "\nk_max = " << c.k_max << "\nmultistarts = " << c.fit_multistarts
       << "\nmax_evals = " << c.fit_max_evals;
    std::snprintf(buf, sizeof(buf), "\ntol = %g\n\n", c.fit_tol);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "[train]\nlearning_rate = %g\nbatch_size = %zu\nmax_epochs = %zu\n"
                  "patience = %zu\nadam_beta1 = %g\nadam_beta2 = %g\nadam_eps = %g\n"
                  "series_len = %zu\n\n",
                  c.train.learning_rate, c.train.batch_size, c.train.max_epochs,
                  c.train.patience, c.train.adam_beta1, c.train.adam_beta2, c.train.adam_eps,
                  c.series_len);
    os << buf;
    if (c.sim) {
        const auto& s = *c.sim;
        os << "[sim]\nworld = " << simgen::to_string(s.world) << "\nk = " << s.k << "\n";
        std::snprintf(buf, sizeof(buf),
                      "r = %g\nalpha = %g\ns = %g\nbeta = %g\na = %g\nb = %g\n"
                      "p_spend = %g\nq_spend = %g\ngamma_spend = %g\n",
                      s.pareto.r, s.pareto.alpha, s.pareto.s, s.pareto.beta, s.beta_geom.a,
                      s.beta_geom.b, s.spend.p, s.spend.q, s.spend.gamma);
        os << buf;
        std::snprintf(buf, sizeof(buf),
                      "n_customers = %zu\nobservation_days = %g\nstagger_days = %g\n"
                      "start_date = %s\nbehavior_linkage = %g\nbase_playtime = %g\n"
                      "playtime_sigma = %g\nbehavior_tail_days = %g\n\n",
                      s.n_customers, s.observation_days, s.stagger_days,
                      format_date(s.start_day).c_str(), s.behavior_linkage, s.base_playtime,
                      s.playtime_sigma, s.behavior_tail_mean_days);
        os << buf;
    }
    os << "[seeds]\nmaster = " << c.master_seed << "\n";
    return os.str();
}

std::uint64_t config_hash(const PipelineConfig& config) {
    // FNV-1a over the canonical rendering
    const std::string text = render_config(config);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace ltv::pipeline
