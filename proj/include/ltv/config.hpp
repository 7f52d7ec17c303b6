#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltv/btyd.hpp"
#include "ltv/dates.hpp"
#include "ltv/neural.hpp"
#include "ltv/rfm.hpp"
#include "ltv/simgen.hpp"

namespace ltv::pipeline {

enum class ModelKind { pareto_nbd, bg, mbg, bg_cnbd_k, mbg_cnbd_k, dnn, cnn };

std::string to_string(ModelKind m);
ModelKind model_kind_from_string(const std::string& s);

struct PipelineConfig {
    std::string events_path = "events.jsonl";
    std::string workdir = "work";

    CalendarDay window_start = 0;
    CalendarDay window_end = 0;
    int churn_gap_days = 9;
    std::vector<rfm::Month> whale_months;  // empty: first three window months

    int horizon_days = 365;
    std::vector<ModelKind> models;
    btyd::SpendModel spend_model = btyd::SpendModel::gamma_gamma;
    bool predict_all_cohort = false;  // default: test split only
    std::size_t mc_draws = 100000;

    std::size_t fit_min_users = 50;
    int k_min = 1;
    int k_max = 12;
    int fit_multistarts = 4;
    std::size_t fit_max_evals = 20000;
    double fit_tol = 1e-8;

    neural::TrainConfig train;
    std::size_t series_len = 365;

    std::optional<simgen::SimSpec> sim;

    std::uint64_t master_seed = 1;
};

/// Flat sectioned key=value config file ("[section]" headers, '#' comments).
PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);

/// Canonical echo of the effective configuration; also the hashing input
/// for the run manifest.
std::string render_config(const PipelineConfig& config);

std::uint64_t config_hash(const PipelineConfig& config);

}  // namespace ltv::pipeline
