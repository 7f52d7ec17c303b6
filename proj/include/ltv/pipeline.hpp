#pragma once

#include <string>
#include <vector>

#include "ltv/config.hpp"
#include "ltv/ingest.hpp"
#include "ltv/metrics.hpp"

namespace ltv::pipeline {

// Stage outputs shared by the commands. History is everything strictly
// before window_start; RFM summaries are taken at window_start - 1 and the
// supervised target is the observed spend from window_start until churn.
struct StageData {
    std::vector<ingest::PlayerTimeline> all_timelines;  // churn-labeled
    ingest::Cohort cohort;
    CalendarDay rfm_day = 0;      // window_start - 1
    CalendarDay feature_day = 0;  // window_start
};

StageData load_stage(const PipelineConfig& config);

void cmd_simulate(const PipelineConfig& config);
void cmd_ingest(const PipelineConfig& config);
void cmd_rfm(const PipelineConfig& config);
void cmd_fit(const PipelineConfig& config);
void cmd_predict(const PipelineConfig& config);
std::vector<metrics::EvalReport> cmd_evaluate(const PipelineConfig& config);

/// simulate -> ingest -> rfm -> fit -> predict -> evaluate
std::vector<metrics::EvalReport> run_full_pipeline(const PipelineConfig& config);

}  // namespace ltv::pipeline
