#include "ltv/rfm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ltv/errors.hpp"

namespace ltv::rfm {

RFMSummary compute_rfm(const ingest::PlayerTimeline& timeline, CalendarDay analysis_date,
                       double min_gap_days) {
    // A purchase here is a day with nonzero spend: daily aggregation does not
    // retain same-day multiplicity.
    std::vector<CalendarDay> purchase_days;
    for (std::size_t i = 0; i < timeline.n_days(); ++i) {
        const CalendarDay d = timeline.start_date + static_cast<CalendarDay>(i);
        if (d > analysis_date) break;
        if (timeline.channels[i][ingest::kSpend] > 0.0) purchase_days.push_back(d);
    }
    if (purchase_days.empty())
        throw DataError("compute_rfm: not a paying user at analysis date (" +
                        timeline.player_id + ")");

    RFMSummary s;
    s.player_id = timeline.player_id;
    s.x = static_cast<long>(purchase_days.size()) - 1;
    const CalendarDay first = purchase_days.front();
    const CalendarDay last = purchase_days.back();
    s.t_x = static_cast<double>(last - first);
    s.T = static_cast<double>(analysis_date - first);
    double spend = 0.0;
    for (std::size_t i = 0; i < timeline.n_days(); ++i) {
        const CalendarDay d = timeline.start_date + static_cast<CalendarDay>(i);
        if (d > analysis_date) break;
        spend += timeline.channels[i][ingest::kSpend];
    }
    s.total_spend = spend;
    s.m_bar = spend / static_cast<double>(purchase_days.size());
    for (std::size_t i = 1; i < purchase_days.size(); ++i) {
        const double gap = std::max(static_cast<double>(purchase_days[i] - purchase_days[i - 1]),
                                    min_gap_days);
        s.sum_log_itt += std::log(gap);
    }
    return s;
}

WhaleThreshold whale_threshold(const std::vector<ingest::PlayerTimeline>& timelines,
                               const std::vector<Month>& months) {
    WhaleThreshold out;
    for (const Month& m : months) {
        const CalendarDay from = days_from_civil(m.year, m.month, 1);
        const CalendarDay to =
            (m.month == 12 ? days_from_civil(m.year + 1, 1, 1) : days_from_civil(m.year, m.month + 1, 1)) - 1;

        std::vector<double> spends;
        for (const auto& t : timelines) {
            double monthly = 0.0;
            for (std::size_t i = 0; i < t.n_days(); ++i) {
                const CalendarDay d = t.start_date + static_cast<CalendarDay>(i);
                if (d < from || d > to) continue;
                monthly += t.channels[i][ingest::kSpend];
            }
            if (monthly > 0.0) spends.push_back(monthly);
        }
        const double total = std::accumulate(spends.begin(), spends.end(), 0.0);
        if (total <= 0.0) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "month %04d-%02u has zero revenue, skipped", m.year,
                          m.month);
            out.warnings.emplace_back(buf);
            continue;
        }
        std::sort(spends.begin(), spends.end(), std::greater<>());
        double cumulative = 0.0;
        double threshold = spends.back();
        for (double v : spends) {
            cumulative += v;
            if (cumulative >= 0.5 * total) {
                threshold = v;
                break;
            }
        }
        out.per_month_values.emplace_back(m, threshold);
    }
    if (out.per_month_values.empty())
        throw DataError("whale_threshold: every requested month had zero revenue");
    double sum = 0.0;
    for (const auto& [m, v] : out.per_month_values) sum += v;
    out.monthly_threshold = sum / static_cast<double>(out.per_month_values.size());
    return out;
}

std::string rfm_csv(const std::vector<RFMSummary>& table) {
    std::ostringstream os;
    os << "player_id,x,t_x,T,m_bar,sum_log_itt,total_spend\n";
    char buf[256];
    for (const auto& r : table) {
        std::snprintf(buf, sizeof(buf), "%s,%ld,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      r.player_id.c_str(), r.x, r.t_x, r.T, r.m_bar, r.sum_log_itt,
                      r.total_spend);
        os << buf;
    }
    return os.str();
}

std::string whale_report_json(const WhaleThreshold& t) {
    std::ostringstream os;
    char buf[128];
    os << "{\n  \"monthly_threshold\": ";
    std::snprintf(buf, sizeof(buf), "%.10g", t.monthly_threshold);
    os << buf << ",\n  \"per_month\": [";
    for (std::size_t i = 0; i < t.per_month_values.size(); ++i) {
        const auto& [m, v] = t.per_month_values[i];
        std::snprintf(buf, sizeof(buf), "%s{\"month\": \"%04d-%02u\", \"threshold\": %.10g}",
                      i ? ", " : "", m.year, m.month, v);
        os << buf;
    }
    os << "],\n  \"warnings\": [";
    for (std::size_t i = 0; i < t.warnings.size(); ++i)
        os << (i ? ", " : "") << '"' << t.warnings[i] << '"';
    os << "]\n}\n";
    return os.str();
}

}  // namespace ltv::rfm
