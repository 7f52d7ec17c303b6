#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltv/dates.hpp"

namespace ltv::ingest {

enum class EventKind { login, session, purchase, levelup };

std::string to_string(EventKind k);

struct EventRecord {
    std::string player_id;
    UtcSeconds timestamp = 0;
    EventKind kind = EventKind::login;
    double value = 0.0;  // minutes for session, currency for purchase, else 0
};

// Channel indices of a timeline row.
enum Channel : std::size_t {
    kPlaytime = 0,
    kSessions = 1,
    kSpend = 2,
    kLevelups = 3,
    kLogins = 4,
    kNumChannels = 5
};

struct PlayerTimeline {
    std::string player_id;
    CalendarDay start_date = 0;
    // one row per calendar day from start_date; columns per Channel
    std::vector<std::array<double, kNumChannels>> channels;
    std::optional<CalendarDay> churn_date;

    std::size_t n_days() const { return channels.size(); }
    CalendarDay last_day() const { return start_date + static_cast<CalendarDay>(n_days()) - 1; }
    /// Last calendar day with any nonzero activity, or nullopt for an
    /// all-zero timeline (cannot happen for aggregated event data).
    std::optional<CalendarDay> last_active_day() const;
    bool active_within(CalendarDay from, CalendarDay to) const;
    double total_spend() const;
    std::size_t purchase_days() const;
};

struct CohortSpec {
    CalendarDay window_start = 0;
    CalendarDay window_end = 0;
    int churn_gap_days = 9;
    std::uint64_t seed = 0;
};

enum class SplitLabel { train, validation, test };

std::string to_string(SplitLabel s);

struct SplitAssignment {
    std::map<std::string, SplitLabel> labels;
};

struct ParseError {
    std::size_t line_no = 0;  // 1-based
    std::string message;
    std::string raw_line;
};

struct ParseResult {
    std::vector<EventRecord> records;
    std::vector<ParseError> errors;
};

/// Parses a JSON-lines event stream (keys: player_id, ts, kind, value).
/// Malformed lines become error entries; records keep input order.
ParseResult parse_events(std::istream& stream);

/// Aggregates events into one per-player daily timeline. Days without
/// events are zero rows; rows span first to last event day per player.
std::vector<PlayerTimeline> aggregate_daily(const std::vector<EventRecord>& events);

/// Sets churn_date = last active day when the gap to data_end is at least
/// spec.churn_gap_days; clears it otherwise. Returns an updated copy.
PlayerTimeline label_churn(const PlayerTimeline& timeline, const CohortSpec& spec,
                           CalendarDay data_end);

struct Cohort {
    std::vector<PlayerTimeline> players;
    SplitAssignment split;  // covers churned cohort members only
};

/// Paying users (>= 1 purchase) active within the cohort window, plus a
/// deterministic 64/16/20 train/validation/test split over the churned ones.
Cohort build_cohort(const std::vector<PlayerTimeline>& timelines, const CohortSpec& spec);

std::string timelines_csv(const std::vector<PlayerTimeline>& timelines);
std::string split_csv(const SplitAssignment& split);

}  // namespace ltv::ingest
