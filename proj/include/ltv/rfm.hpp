#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ltv/dates.hpp"
#include "ltv/ingest.hpp"

namespace ltv::rfm {

struct RFMSummary {
    std::string player_id;
    long x = 0;              // repeat purchases (total purchase days - 1)
    double t_x = 0.0;        // days, first purchase to last purchase
    double T = 0.0;          // days, first purchase to analysis date
    double m_bar = 0.0;      // mean spend per purchase
    double sum_log_itt = 0.0;  // sum of ln inter-purchase gaps (0 when x = 0)
    double total_spend = 0.0;
};

// Same-day repeat purchases are unobservable at daily resolution; their gap
// is floored so ln(gap) stays finite.
constexpr double kMinInterPurchaseGapDays = 0.25;

/// RFM summary of one paying user at analysis_date. Purchase times at daily
/// resolution; a day with any spend counts as one purchase of that day's
/// total. Throws DataError when the player has no purchase on or before
/// analysis_date.
RFMSummary compute_rfm(const ingest::PlayerTimeline& timeline, CalendarDay analysis_date,
                       double min_gap_days = kMinInterPurchaseGapDays);

struct Month {
    int year = 0;
    unsigned month = 1;  // 1..12
};

struct WhaleThreshold {
    double monthly_threshold = 0.0;
    std::vector<std::pair<Month, double>> per_month_values;
    std::vector<std::string> warnings;  // months skipped for zero revenue
};

/// Per month: sort players by monthly spend descending and take the spend of
/// the first player at which the cumulative sum reaches 50% of that month's
/// revenue; the final threshold is the mean over months. Skips zero-revenue
/// months with a warning; throws DataError when all months are skipped.
WhaleThreshold whale_threshold(const std::vector<ingest::PlayerTimeline>& timelines,
                               const std::vector<Month>& months);

std::string rfm_csv(const std::vector<RFMSummary>& table);
std::string whale_report_json(const WhaleThreshold& threshold);

}  // namespace ltv::rfm
