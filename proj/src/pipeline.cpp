#include "ltv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ltv/btyd.hpp"
#include "ltv/errors.hpp"
#include "ltv/neural.hpp"
#include "ltv/rng.hpp"
#include "ltv/simgen.hpp"

namespace ltv::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitSeedTag = 102;
constexpr std::uint64_t kMcSeedTag = 104;

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

fs::path workpath(const PipelineConfig& c, const std::string& rel) {
    return fs::path(c.workdir) / rel;
}

void echo_config(const PipelineConfig& c) {
    write_file(workpath(c, "effective_config.ini"), render_config(c));
}

void merge_manifest(const PipelineConfig& c, const std::string& section,
                    const nlohmann::json& entry) {
    const fs::path path = workpath(c, "manifest.json");
    nlohmann::json manifest;
    if (fs::exists(path)) {
        std::ifstream f(path);
        f >> manifest;
    }
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(c)));
    manifest["config_hash"] = hash;
    manifest["master_seed"] = c.master_seed;
    manifest["version"] = "ltvlab 0.1.0";
    manifest[section] = entry;
    write_file(path, manifest.dump(1) + "\n");
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    return format_timestamp(static_cast<UtcSeconds>(t));
}

std::string events_jsonl(const std::vector<ingest::EventRecord>& events) {
    std::ostringstream os;
    char buf[512];
    for (const auto& e : events) {
        if (e.kind == ingest::EventKind::session || e.kind == ingest::EventKind::purchase)
            std::snprintf(buf, sizeof(buf),
                          "{\"player_id\":\"%s\",\"ts\":\"%s\",\"kind\":\"%s\",\"value\":%.10g}\n",
                          e.player_id.c_str(), format_timestamp(e.timestamp).c_str(),
                          ingest::to_string(e.kind).c_str(), e.value);
        else
            std::snprintf(buf, sizeof(buf), "{\"player_id\":\"%s\",\"ts\":\"%s\",\"kind\":\"%s\"}\n",
                          e.player_id.c_str(), format_timestamp(e.timestamp).c_str(),
                          ingest::to_string(e.kind).c_str());
        os << buf;
    }
    return os.str();
}

// cohort members with at least one purchase before the window, i.e. those
// every model family can score
std::vector<const ingest::PlayerTimeline*> scoreable_players(const StageData& stage) {
    std::vector<const ingest::PlayerTimeline*> out;
    for (const auto& t : stage.cohort.players) {
        bool has_prior_purchase = false;
        for (std::size_t i = 0; i < t.n_days(); ++i) {
            const CalendarDay d = t.start_date + static_cast<CalendarDay>(i);
            if (d > stage.rfm_day) break;
            if (t.channels[i][ingest::kSpend] > 0.0) {
                has_prior_purchase = true;
                break;
            }
        }
        if (has_prior_purchase) out.push_back(&t);
    }
    std::sort(out.begin(), out.end(),
              [](const auto* a, const auto* b) { return a->player_id < b->player_id; });
    return out;
}

double observed_remaining_spend(const ingest::PlayerTimeline& t, CalendarDay from) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t.n_days(); ++i) {
        const CalendarDay d = t.start_date + static_cast<CalendarDay>(i);
        if (d >= from) sum += t.channels[i][ingest::kSpend];
    }
    return sum;
}

}  // namespace

StageData load_stage(const PipelineConfig& config) {
    std::ifstream f(config.events_path);
    if (!f) throw DataError("cannot open events file: " + config.events_path);
    auto parsed = ingest::parse_events(f);
    if (!parsed.errors.empty()) {
        std::ostringstream os;
        for (const auto& e : parsed.errors)
            os << "line " << e.line_no << ": " << e.message << ": " << e.raw_line << '\n';
        write_file(workpath(config, "ingest_errors.txt"), os.str());
    }
    if (parsed.records.empty()) throw DataError("events file contains no valid records");

    ingest::CohortSpec spec;
    spec.window_start = config.window_start;
    spec.window_end = config.window_end;
    spec.churn_gap_days = config.churn_gap_days;
    spec.seed = derive_seed(config.master_seed, kSplitSeedTag);

    StageData stage;
    stage.all_timelines = ingest::aggregate_daily(parsed.records);
    for (auto& t : stage.all_timelines) t = ingest::label_churn(t, spec, config.window_end);
    stage.cohort = ingest::build_cohort(stage.all_timelines, spec);
    stage.rfm_day = config.window_start - 1;
    stage.feature_day = config.window_start;
    return stage;
}

void cmd_simulate(const PipelineConfig& config) {
    if (!config.sim) throw UsageError("simulate: config has no [sim] section");
    echo_config(config);
    const auto sim = simgen::simulate_cohort(*config.sim);
    const auto events = simgen::simulate_behavior(sim, *config.sim);
    write_file(config.events_path, events_jsonl(events));
    write_file(workpath(config, "latents.csv"), simgen::latents_csv(sim));
    merge_manifest(config, "simulate",
                   {{"n_customers", config.sim->n_customers},
                    {"world", simgen::to_string(config.sim->world)},
                    {"seed", config.sim->seed},
                    {"n_events", events.size()},
                    {"events_path", config.events_path}});
}

void cmd_ingest(const PipelineConfig& config) {
    echo_config(config);
    const auto stage = load_stage(config);
    write_file(workpath(config, "timelines.csv"), ingest::timelines_csv(stage.cohort.players));
    write_file(workpath(config, "split.csv"), ingest::split_csv(stage.cohort.split));
    merge_manifest(config, "ingest",
                   {{"cohort_size", stage.cohort.players.size()},
                    {"churned", stage.cohort.split.labels.size()}});
}

namespace {

std::vector<rfm::Month> default_whale_months(const PipelineConfig& config) {
    std::vector<rfm::Month> months;
    int y;
    unsigned m, d;
    civil_from_days(config.window_start, y, m, d);
    for (int i = 0; i < 3; ++i) {
        months.push_back({y, m});
        if (++m > 12) {
            m = 1;
            ++y;
        }
    }
    return months;
}

std::vector<rfm::RFMSummary> rfm_table_for(const std::vector<const ingest::PlayerTimeline*>& players,
                                           CalendarDay rfm_day) {
    std::vector<rfm::RFMSummary> table;
    table.reserve(players.size());
    for (const auto* t : players) table.push_back(rfm::compute_rfm(*t, rfm_day));
    return table;
}

}  // namespace

void cmd_rfm(const PipelineConfig& config) {
    echo_config(config);
    const auto stage = load_stage(config);
    const auto players = scoreable_players(stage);
    if (players.empty()) throw DataError("rfm: no cohort player has purchases before the window");
    const auto table = rfm_table_for(players, stage.rfm_day);
    write_file(workpath(config, "rfm.csv"), rfm::rfm_csv(table));

    const auto months = config.whale_months.empty() ? default_whale_months(config)
                                                    : config.whale_months;
    const auto threshold = rfm::whale_threshold(stage.cohort.players, months);
    write_file(workpath(config, "whale_report.json"), rfm::whale_report_json(threshold));
    merge_manifest(config, "rfm",
                   {{"players", table.size()},
                    {"whale_threshold", threshold.monthly_threshold},
                    {"skipped_months", threshold.warnings.size()}});
}

namespace {

struct SupervisedSets {
    std::vector<const ingest::PlayerTimeline*> train;
    std::vector<const ingest::PlayerTimeline*> validation;
    std::vector<const ingest::PlayerTimeline*> test;
};

SupervisedSets supervised_sets(const StageData& stage) {
    SupervisedSets sets;
    for (const auto* t : scoreable_players(stage)) {
        auto it = stage.cohort.split.labels.find(t->player_id);
        if (it == stage.cohort.split.labels.end()) continue;  // not churned: scored only
        switch (it->second) {
            case ingest::SplitLabel::train: sets.train.push_back(t); break;
            case ingest::SplitLabel::validation: sets.validation.push_back(t); break;
            case ingest::SplitLabel::test: sets.test.push_back(t); break;
        }
    }
    return sets;
}

nlohmann::json parametric_artifact(const std::string& kind, const std::string& variant, int k,
                                   const std::vector<double>& params, double log_lik,
                                   bool converged, std::uint64_t seed) {
    return {{"model_kind", kind},    {"variant", variant},     {"k", k},
            {"parameters", params},  {"log_lik", log_lik},     {"converged", converged},
            {"fit_timestamp", now_utc()}, {"seed", seed}};
}

btyd::FitConfig fit_config_from(const PipelineConfig& c) {
    btyd::FitConfig fc;
    fc.min_users = c.fit_min_users;
    fc.optim.multistarts = c.fit_multistarts;
    fc.optim.max_evals = c.fit_max_evals;
    fc.optim.tol = c.fit_tol;
    return fc;
}

void fit_network(const PipelineConfig& config, const StageData& stage,
                 const SupervisedSets& sets, ModelKind kind, nlohmann::json& manifest_models) {
    const bool is_cnn = kind == ModelKind::cnn;
    const auto mode = is_cnn ? neural::FeatureMode::series : neural::FeatureMode::flat;

    auto deref = [](const std::vector<const ingest::PlayerTimeline*>& v) {
        std::vector<ingest::PlayerTimeline> out;
        out.reserve(v.size());
        for (const auto* t : v) out.push_back(*t);
        return out;
    };
    const auto train_tl = deref(sets.train);
    const auto val_tl = deref(sets.validation);

    auto train_x = neural::build_features(train_tl, stage.feature_day, mode, config.series_len);
    auto val_x = neural::build_features(val_tl, stage.feature_day, mode, config.series_len);
    const auto stats = neural::fit_standardization(train_x, mode);
    neural::apply_standardization(train_x, stats, mode);
    neural::apply_standardization(val_x, stats, mode);

    auto targets = [&](const std::vector<const ingest::PlayerTimeline*>& v) {
        std::vector<double> y;
        y.reserve(v.size());
        for (const auto* t : v)
            y.push_back(neural::transform_target(
                observed_remaining_spend(*t, stage.feature_day)));
        return y;
    };
    const auto train_y = targets(sets.train);
    const auto val_y = targets(sets.validation);

    const auto spec = is_cnn
                          ? neural::build_cnn_spec(config.series_len, ingest::kNumChannels)
                          : neural::build_mlp_spec(train_x.x.per_sample());
    const auto t0 = std::chrono::steady_clock::now();
    const auto model =
        neural::train_with_early_stopping(spec, train_x.x, train_y, val_x.x, val_y, config.train);
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

    neural::ModelArtifact artifact;
    artifact.spec = model.spec;
    artifact.weights = model.weights;
    artifact.stats = stats;
    artifact.mode = mode;
    artifact.series_len = config.series_len;
    artifact.config = config.train;
    artifact.history = model.history;
    artifact.best_epoch = model.best_epoch;
    artifact.target_cap = *std::max_element(train_y.begin(), train_y.end()) + 1.0;
    const std::string name = to_string(kind);
    fs::create_directories(workpath(config, "models"));
    neural::save_model(artifact, workpath(config, "models/" + name + ".json").string(),
                       workpath(config, "models/" + name + ".weights").string());

    manifest_models.push_back(
        {{"model", name},
         {"seed", config.train.seed},
         {"wall_ms", wall_ms},
         {"best_epoch", model.best_epoch},
         {"epochs_run", model.history.size()},
         {"best_validation_loss", model.history[model.best_epoch - 1].validation_loss},
         {"converged", true}});
}

}  // namespace

void cmd_fit(const PipelineConfig& config) {
    if (config.models.empty()) throw UsageError("fit: no models requested");
    echo_config(config);
    const auto stage = load_stage(config);
    const auto sets = supervised_sets(stage);

    // parametric models are fitted on the full 80% pool; networks use the
    // validation part for early stopping
    std::vector<const ingest::PlayerTimeline*> pool = sets.train;
    pool.insert(pool.end(), sets.validation.begin(), sets.validation.end());
    std::sort(pool.begin(), pool.end(),
              [](const auto* a, const auto* b) { return a->player_id < b->player_id; });
    const auto pool_rfm = rfm_table_for(pool, stage.rfm_day);

    const auto fc = fit_config_from(config);
    nlohmann::json manifest_models = nlohmann::json::array();
    std::vector<std::string> failures;
    bool needs_spend_model = false;

    for (const ModelKind kind : config.models) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (kind) {
                case ModelKind::pareto_nbd: {
                    const auto fit = btyd::fit_pareto_nbd(pool_rfm, fc);
                    write_file(workpath(config, "models/pareto_nbd.json"),
                               parametric_artifact(
                                   "pareto_nbd", "", 1,
                                   {fit.params.r, fit.params.alpha, fit.params.s, fit.params.beta},
                                   fit.log_lik, fit.converged, config.master_seed)
                                       .dump(1) +
                                   "\n");
                    needs_spend_model = true;
                    manifest_models.push_back({{"model", "pareto_nbd"},
                                               {"log_lik", fit.log_lik},
                                               {"converged", fit.converged},
                                               {"n_evals", fit.n_evals}});
                    break;
                }
                case ModelKind::bg:
                case ModelKind::mbg: {
                    const auto variant =
                        kind == ModelKind::bg ? btyd::BGVariant::BG : btyd::BGVariant::MBG;
                    const auto fit = btyd::fit_bg_family(pool_rfm, variant, 1, fc);
                    write_file(workpath(config, "models/" + to_string(kind) + ".json"),
                               parametric_artifact(
                                   to_string(kind), btyd::to_string(variant), 1,
                                   {fit.params.r, fit.params.alpha, fit.params.a, fit.params.b},
                                   fit.log_lik, fit.converged, config.master_seed)
                                       .dump(1) +
                                   "\n");
                    needs_spend_model = true;
                    manifest_models.push_back({{"model", to_string(kind)},
                                               {"log_lik", fit.log_lik},
                                               {"converged", fit.converged},
                                               {"n_evals", fit.n_evals}});
                    break;
                }
                case ModelKind::bg_cnbd_k:
                case ModelKind::mbg_cnbd_k: {
                    const auto variant =
                        kind == ModelKind::bg_cnbd_k ? btyd::BGVariant::BG : btyd::BGVariant::MBG;
                    const auto sel =
                        btyd::select_k(pool_rfm, variant, config.k_min, config.k_max, fc);
                    auto artifact = parametric_artifact(
                        to_string(kind), btyd::to_string(variant), sel.k,
                        {sel.fit.params.r, sel.fit.params.alpha, sel.fit.params.a,
                         sel.fit.params.b},
                        sel.fit.log_lik, sel.fit.converged, config.master_seed);
                    nlohmann::json by_k = nlohmann::json::array();
                    for (const auto& [k, ll] : sel.log_lik_by_k)
                        by_k.push_back({{"k", k}, {"log_lik", ll}});
                    artifact["log_lik_by_k"] = by_k;
                    write_file(workpath(config, "models/" + to_string(kind) + ".json"),
                               artifact.dump(1) + "\n");
                    needs_spend_model = true;
                    manifest_models.push_back({{"model", to_string(kind)},
                                               {"k", sel.k},
                                               {"log_lik", sel.fit.log_lik},
                                               {"converged", sel.fit.converged}});
                    break;
                }
                case ModelKind::dnn:
                case ModelKind::cnn:
                    fit_network(config, stage, sets, kind, manifest_models);
                    break;
            }
        } catch (const std::exception& e) {
            failures.push_back(to_string(kind) + ": " + e.what());
            manifest_models.push_back({{"model", to_string(kind)}, {"error", e.what()}});
        }
        const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        if (!manifest_models.empty()) manifest_models.back()["wall_ms"] = wall_ms;
    }

    if (needs_spend_model && config.spend_model == btyd::SpendModel::gamma_gamma) {
        try {
            const auto fit = btyd::fit_gamma_gamma(pool_rfm, fc);
            write_file(workpath(config, "models/gamma_gamma.json"),
                       parametric_artifact("gamma_gamma", "", 1,
                                           {fit.params.p, fit.params.q, fit.params.gamma},
                                           fit.log_lik, fit.converged, config.master_seed)
                               .dump(1) +
                           "\n");
            manifest_models.push_back({{"model", "gamma_gamma"},
                                       {"log_lik", fit.log_lik},
                                       {"converged", fit.converged}});
        } catch (const std::exception& e) {
            failures.push_back(std::string("gamma_gamma: ") + e.what());
        }
    }

    merge_manifest(config, "fit",
                   {{"models", manifest_models},
                    {"train_players", sets.train.size()},
                    {"validation_players", sets.validation.size()},
                    {"failures", failures}});
    if (failures.size() == config.models.size() && !config.models.empty())
        throw NumericError("fit: every requested model failed");
}

namespace {

struct ParametricArtifact {
    btyd::TxnModel model;
};

ParametricArtifact load_parametric(const PipelineConfig& config, ModelKind kind) {
    const fs::path path =
        fs::path(config.workdir) / "models" / (to_string(kind) + ".json");
    if (!fs::exists(path))
        throw UsageError("predict: missing model artifact " + path.string() + "; run fit first");
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (kind == ModelKind::pareto_nbd)
        return {btyd::ParetoNBDParams{params[0], params[1], params[2], params[3]}};
    const auto variant = j.at("variant") == "bg" ? btyd::BGVariant::BG : btyd::BGVariant::MBG;
    return {btyd::BetaGeomParams{params[0], params[1], params[2], params[3], j.at("k"), variant}};
}

std::optional<btyd::GammaGammaParams> load_gamma_gamma(const PipelineConfig& config) {
    const fs::path path = fs::path(config.workdir) / "models" / "gamma_gamma.json";
    if (!fs::exists(path)) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    const auto params = j.at("parameters").get<std::vector<double>>();
    return btyd::GammaGammaParams{params[0], params[1], params[2]};
}

}  // namespace

void cmd_predict(const PipelineConfig& config) {
    if (config.models.empty()) throw UsageError("predict: no models requested");
    echo_config(config);
    const auto stage = load_stage(config);
    const auto sets = supervised_sets(stage);

    std::vector<const ingest::PlayerTimeline*> players;
    if (config.predict_all_cohort)
        players = scoreable_players(stage);
    else
        players = sets.test;
    if (players.empty()) throw DataError("predict: no players to score");

    const auto gg = load_gamma_gamma(config);

    for (const ModelKind kind : config.models) {
        std::ostringstream csv;
        csv << "player_id,p_alive,expected_transactions,expected_spend,ltv,horizon\n";
        char buf[256];

        if (kind == ModelKind::dnn || kind == ModelKind::cnn) {
            const fs::path jpath =
                fs::path(config.workdir) / "models" / (to_string(kind) + ".json");
            const fs::path wpath =
                fs::path(config.workdir) / "models" / (to_string(kind) + ".weights");
            if (!fs::exists(jpath))
                throw UsageError("predict: missing model artifact " + jpath.string() +
                                 "; run fit first");
            const auto artifact = neural::load_model(jpath.string(), wpath.string());
            std::vector<ingest::PlayerTimeline> tls;
            tls.reserve(players.size());
            for (const auto* t : players) tls.push_back(*t);
            auto feats = neural::build_features(tls, stage.feature_day, artifact.mode,
                                                artifact.series_len);
            neural::apply_standardization(feats, artifact.stats, artifact.mode);
            const auto out = neural::forward(artifact.spec, artifact.weights, feats.x);
            for (std::size_t i = 0; i < players.size(); ++i) {
                const double ltv =
                    config.horizon_days == 0
                        ? 0.0
                        : neural::inverse_transform_target(
                              std::min(out.values[i], artifact.target_cap));
                std::snprintf(buf, sizeof(buf), "%s,,,,%.10g,%d\n",
                              players[i]->player_id.c_str(), ltv, config.horizon_days);
                csv << buf;
            }
        } else {
            const auto artifact = load_parametric(config, kind);
            if (config.spend_model == btyd::SpendModel::gamma_gamma && !gg)
                throw UsageError("predict: missing model artifact " +
                                 workpath(config, "models/gamma_gamma.json").string() +
                                 "; run fit first");
            const auto* bg = std::get_if<btyd::BetaGeomParams>(&artifact.model);
            // closed forms exist for Pareto/NBD and k=1 with a > 1; Monte
            // Carlo otherwise
            const bool closed =
                !bg || (bg->k == 1 && bg->a > 1.0 + 1e-9);
            for (std::size_t i = 0; i < players.size(); ++i) {
                const auto summary = rfm::compute_rfm(*players[i], stage.rfm_day);
                btyd::McConfig mc;
                mc.n_draws = config.mc_draws;
                // seeded from the RFM content, not the player index, so that
                // identical summaries always yield identical predictions
                std::uint64_t rfm_tag = static_cast<std::uint64_t>(summary.x);
                auto mix = [&rfm_tag](double v) {
                    std::uint64_t bits;
                    std::memcpy(&bits, &v, sizeof(bits));
                    rfm_tag = derive_seed(rfm_tag, bits);
                };
                mix(summary.t_x);
                mix(summary.T);
                mc.seed = derive_seed(derive_seed(config.master_seed, kMcSeedTag), rfm_tag);
                const auto pred = btyd::predict_ltv(
                    artifact.model, config.spend_model, gg, summary, config.horizon_days,
                    closed ? btyd::ExpectationMethod::closed_form
                           : btyd::ExpectationMethod::monte_carlo,
                    mc);
                std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%d\n",
                              pred.player_id.c_str(), pred.p_alive, pred.expected_transactions,
                              pred.expected_spend_per_txn, pred.ltv, pred.horizon_days);
                csv << buf;
            }
        }
        write_file(workpath(config, "predictions/" + to_string(kind) + ".csv"), csv.str());
    }
    merge_manifest(config, "predict",
                   {{"players", players.size()},
                    {"scope", config.predict_all_cohort ? "cohort" : "test"},
                    {"horizon", config.horizon_days}});
}

namespace {

std::map<std::string, double> read_prediction_ltv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("evaluate: missing predictions " + path.string() +
                             "; run predict first");
    std::map<std::string, double> out;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::istringstream is(line);
        std::string col;
        while (std::getline(is, col, ',')) cols.push_back(col);
        if (cols.size() < 6) throw DataError("evaluate: malformed prediction row: " + line);
        out[cols[0]] = std::stod(cols[4]);
    }
    return out;
}

}  // namespace

std::vector<metrics::EvalReport> cmd_evaluate(const PipelineConfig& config) {
    if (config.models.empty()) throw UsageError("evaluate: no models requested");
    echo_config(config);
    const auto stage = load_stage(config);
    const auto sets = supervised_sets(stage);
    if (sets.test.empty()) throw DataError("evaluate: no churned test players");

    std::vector<std::string> ids;
    std::vector<double> observed;
    for (const auto* t : sets.test) {
        ids.push_back(t->player_id);
        observed.push_back(observed_remaining_spend(*t, stage.feature_day));
    }

    std::vector<metrics::EvalReport> reports;
    for (const ModelKind kind : config.models) {
        const auto preds =
            read_prediction_ltv(workpath(config, "predictions/" + to_string(kind) + ".csv"));
        std::vector<double> yhat;
        yhat.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = preds.find(id);
            if (it == preds.end())
                throw DataError("evaluate: no prediction for player " + id + " in model " +
                                to_string(kind));
            yhat.push_back(it->second);
        }
        for (auto& r : metrics::build_report(observed, yhat, to_string(kind), ids))
            reports.push_back(std::move(r));
    }

    write_file(workpath(config, "reports/eval.csv"), metrics::report_csv(reports));
    write_file(workpath(config, "reports/eval.txt"), metrics::report_table(reports));

    const auto months = config.whale_months.empty() ? default_whale_months(config)
                                                    : config.whale_months;
    const auto threshold = rfm::whale_threshold(stage.cohort.players, months);
    write_file(workpath(config, "reports/whale_report.json"), rfm::whale_report_json(threshold));

    merge_manifest(config, "evaluate",
                   {{"test_players", ids.size()}, {"reports", reports.size()}});
    return reports;
}

std::vector<metrics::EvalReport> run_full_pipeline(const PipelineConfig& config) {
    cmd_simulate(config);
    cmd_ingest(config);
    cmd_rfm(config);
    cmd_fit(config);
    cmd_predict(config);
    return cmd_evaluate(config);
}

}  // namespace ltv::pipeline
