#include "ltv/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ltv/errors.hpp"
#include "ltv/rng.hpp"

namespace ltv::ingest {

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::login: return "login";
        case EventKind::session: return "session";
        case EventKind::purchase: return "purchase";
        case EventKind::levelup: return "levelup";
    }
    return "?";
}

std::string to_string(SplitLabel s) {
    switch (s) {
        case SplitLabel::train: return "train";
        case SplitLabel::validation: return "validation";
        case SplitLabel::test: return "test";
    }
    return "?";
}

std::optional<CalendarDay> PlayerTimeline::last_active_day() const {
    for (std::size_t i = n_days(); i-- > 0;) {
        const auto& row = channels[i];
        for (double v : row)
            if (v != 0.0) return start_date + static_cast<CalendarDay>(i);
    }
    return std::nullopt;
}

bool PlayerTimeline::active_within(CalendarDay from, CalendarDay to) const {
    for (std::size_t i = 0; i < n_days(); ++i) {
        const CalendarDay d = start_date + static_cast<CalendarDay>(i);
        if (d < from || d > to) continue;
        for (double v : channels[i])
            if (v != 0.0) return true;
    }
    return false;
}

double PlayerTimeline::total_spend() const {
    double sum = 0.0;
    for (const auto& row : channels) sum += row[kSpend];
    return sum;
}

std::size_t PlayerTimeline::purchase_days() const {
    std::size_t n = 0;
    for (const auto& row : channels) n += row[kSpend] > 0.0 ? 1 : 0;
    return n;
}

namespace {

std::optional<EventKind> kind_from_string(const std::string& s) {
    if (s == "login") return EventKind::login;
    if (s == "session") return EventKind::session;
    if (s == "purchase") return EventKind::purchase;
    if (s == "levelup") return EventKind::levelup;
    return std::nullopt;
}

}  // namespace

ParseResult parse_events(std::istream& stream) {
    ParseResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) {
            out.errors.push_back({line_no, msg, line});
        };
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail("not a JSON object");
            continue;
        }
        if (!j.contains("player_id") || !j["player_id"].is_string()) {
            fail("missing player_id");
            continue;
        }
        if (!j.contains("ts") || !j["ts"].is_string()) {
            fail("missing ts");
            continue;
        }
        if (!j.contains("kind") || !j["kind"].is_string()) {
            fail("missing kind");
            continue;
        }
        auto ts = parse_timestamp(j["ts"].get<std::string>());
        if (!ts) {
            fail("unparseable timestamp");
            continue;
        }
        auto kind = kind_from_string(j["kind"].get<std::string>());
        if (!kind) {
            fail("unknown kind");
            continue;
        }
        double value = 0.0;
        if (j.contains("value")) {
            if (!j["value"].is_number()) {
                fail("non-numeric value");
                continue;
            }
            value = j["value"].get<double>();
        }
        if (*kind == EventKind::purchase && !(value > 0.0)) {
            fail("purchase value must be > 0");
            continue;
        }
        if (*kind == EventKind::session && value < 0.0) {
            fail("session value must be >= 0");
            continue;
        }
        if (value < 0.0) {
            fail("negative value");
            continue;
        }
        out.records.push_back({j["player_id"].get<std::string>(), *ts, *kind, value});
    }
    if (stream.bad()) throw DataError("parse_events: stream I/O failure");
    return out;
}

std::vector<PlayerTimeline> aggregate_daily(const std::vector<EventRecord>& events) {
    struct Acc {
        CalendarDay first_day = 0;
        CalendarDay last_day = 0;
        std::vector<std::pair<CalendarDay, std::array<double, kNumChannels>>> deltas;
    };
    std::unordered_map<std::string, Acc> by_player;
    std::vector<std::string> order;  // first-seen order, for deterministic output

    for (const auto& e : events) {
        const CalendarDay d = day_of(e.timestamp);
        auto [it, inserted] = by_player.try_emplace(e.player_id);
        if (inserted) {
            order.push_back(e.player_id);
            it->second.first_day = d;
            it->second.last_day = d;
        } else {
            it->second.first_day = std::min(it->second.first_day, d);
            it->second.last_day = std::max(it->second.last_day, d);
        }
        std::array<double, kNumChannels> row{};
        switch (e.kind) {
            case EventKind::login: row[kLogins] = 1.0; break;
            case EventKind::session:
                row[kPlaytime] = e.value;
                row[kSessions] = 1.0;
                break;
            case EventKind::purchase: row[kSpend] = e.value; break;
            case EventKind::levelup: row[kLevelups] = 1.0; break;
        }
        it->second.deltas.emplace_back(d, row);
    }

    std::vector<PlayerTimeline> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        const Acc& acc = by_player.at(id);
        PlayerTimeline t;
        t.player_id = id;
        t.start_date = acc.first_day;
        t.channels.assign(static_cast<std::size_t>(acc.last_day - acc.first_day + 1), {});
        for (const auto& [day, row] : acc.deltas) {
            auto& dst = t.channels[static_cast<std::size_t>(day - acc.first_day)];
            for (std::size_t c = 0; c < kNumChannels; ++c) dst[c] += row[c];
        }
        out.push_back(std::move(t));
    }
    return out;
}

PlayerTimeline label_churn(const PlayerTimeline& timeline, const CohortSpec& spec,
                           CalendarDay data_end) {
    PlayerTimeline out = timeline;
    out.churn_date.reset();
    const auto last_active = timeline.last_active_day();
    if (last_active && data_end - *last_active >= spec.churn_gap_days)
        out.churn_date = *last_active;
    return out;
}

Cohort build_cohort(const std::vector<PlayerTimeline>& timelines, const CohortSpec& spec) {
    if (spec.window_start >= spec.window_end)
        throw DataError("build_cohort: window_start must precede window_end");

    Cohort cohort;
    std::vector<std::string> churned_ids;
    for (const auto& t : timelines) {
        if (t.total_spend() <= 0.0) continue;  // paying users only
        if (!t.active_within(spec.window_start, spec.window_end)) continue;
        cohort.players.push_back(t);
        if (t.churn_date) churned_ids.push_back(t.player_id);
    }
    if (cohort.players.empty())
        throw DataError("build_cohort: empty cohort (no paying users active in window)");

    // Deterministic split over churned players: 80% train pool of which 20%
    // validation, 20% test.
    std::sort(churned_ids.begin(), churned_ids.end());
    Rng rng(spec.seed);
    for (std::size_t i = churned_ids.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(churned_ids[i - 1], churned_ids[j]);
    }
    const std::size_t n = churned_ids.size();
    const auto n_train_pool = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n_train_pool)));
    for (std::size_t i = 0; i < n; ++i) {
        SplitLabel label;
        if (i < n_train_pool - n_val)
            label = SplitLabel::train;
        else if (i < n_train_pool)
            label = SplitLabel::validation;
        else
            label = SplitLabel::test;
        cohort.split.labels.emplace(churned_ids[i], label);
    }
    return cohort;
}

std::string timelines_csv(const std::vector<PlayerTimeline>& timelines) {
    std::ostringstream os;
    os << "player_id,date,playtime,sessions,spend,levelups,logins,churned_flag\n";
    char buf[256];
    for (const auto& t : timelines) {
        const int churned = t.churn_date ? 1 : 0;
        for (std::size_t i = 0; i < t.n_days(); ++i) {
            const auto& r = t.channels[i];
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.6g,%.6g,%.6g,%.6g,%d\n",
                          t.player_id.c_str(),
                          format_date(t.start_date + static_cast<CalendarDay>(i)).c_str(),
                          r[kPlaytime], r[kSessions], r[kSpend], r[kLevelups], r[kLogins],
                          churned);
            os << buf;
        }
    }
    return os.str();
}

std::string split_csv(const SplitAssignment& split) {
    std::ostringstream os;
    os << "player_id,split\n";
    for (const auto& [id, label] : split.labels) os << id << ',' << to_string(label) << '\n';
    return os.str();
}

}  // namespace ltv::ingest
