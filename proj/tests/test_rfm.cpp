#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ltv/errors.hpp"
#include "ltv/ingest.hpp"
#include "ltv/rfm.hpp"
#include "ltv/rng.hpp"

using namespace ltv;
using namespace ltv::rfm;

namespace {

CalendarDay day(const char* s) { return *parse_date(s); }

ingest::PlayerTimeline with_purchases(CalendarDay start,
                                      const std::vector<std::pair<int, double>>& purchases,
                                      int n_days) {
    ingest::PlayerTimeline t;
    t.player_id = "p";
    t.start_date = start;
    t.channels.assign(n_days, {});
    for (const auto& [offset, spend] : purchases) t.channels[offset][ingest::kSpend] += spend;
    return t;
}

}  // namespace

TEST_CASE("compute_rfm single purchase") {
    auto t = with_purchases(1000, {{0, 42.0}}, 1);
    auto s = compute_rfm(t, 1030);
    CHECK(s.x == 0);
    CHECK(s.t_x == 0.0);
    CHECK(s.T == 30.0);
    CHECK(s.m_bar == 42.0);
    CHECK(s.sum_log_itt == 0.0);
    CHECK(s.total_spend == 42.0);
}

TEST_CASE("compute_rfm repeat purchases") {
    auto t = with_purchases(1000, {{0, 100.0}, {10, 100.0}, {20, 100.0}}, 21);
    auto s = compute_rfm(t, 1030);
    CHECK(s.x == 2);
    CHECK(s.t_x == 20.0);
    CHECK(s.T == 30.0);
    CHECK(s.m_bar == doctest::Approx(100.0));
    CHECK(s.sum_log_itt == doctest::Approx(2.0 * std::log(10.0)));
}

TEST_CASE("compute_rfm not a paying user") {
    auto t = with_purchases(1000, {{25, 10.0}}, 26);
    CHECK_THROWS_AS(compute_rfm(t, 1010), DataError);  // purchase after analysis date
    ingest::PlayerTimeline empty;
    empty.player_id = "q";
    empty.start_date = 1000;
    empty.channels.assign(5, {});
    CHECK_THROWS_AS(compute_rfm(empty, 1010), DataError);
}

TEST_CASE("compute_rfm matches a brute-force event scan on random histories") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        const CalendarDay start = 500 + static_cast<CalendarDay>(rng.below(100));
        const int horizon = 5 + static_cast<int>(rng.below(200));
        std::vector<std::pair<int, double>> purchases;
        const int n = 1 + static_cast<int>(rng.below(20));
        for (int i = 0; i < n; ++i)
            purchases.emplace_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon))),
                                   rng.uniform(1.0, 300.0));
        auto t = with_purchases(start, purchases, horizon);
        const CalendarDay analysis = start + horizon + static_cast<CalendarDay>(rng.below(30));

        // brute force from the raw event list
        std::set<int> days;
        double total = 0.0;
        for (const auto& [offset, spend] : purchases) {
            days.insert(offset);
            total += spend;
        }
        const int first = *days.begin();
        const int last = *days.rbegin();

        auto s = compute_rfm(t, analysis);
        CHECK(s.x == static_cast<long>(days.size()) - 1);
        CHECK(s.t_x == doctest::Approx(last - first));
        CHECK(s.T == doctest::Approx(static_cast<double>(analysis - start - first)));
        CHECK(s.m_bar == doctest::Approx(total / static_cast<double>(days.size())));
        CHECK(s.total_spend == doctest::Approx(total));
        double itt = 0.0;
        int prev = first;
        for (auto it = std::next(days.begin()); it != days.end(); ++it) {
            itt += std::log(std::max(0.25, static_cast<double>(*it - prev)));
            prev = *it;
        }
        CHECK(s.sum_log_itt == doctest::Approx(itt));
    }
}

TEST_CASE("compute_rfm invariant to zero-activity padding") {
    auto t = with_purchases(1000, {{2, 50.0}, {9, 70.0}}, 10);
    auto padded = t;
    padded.channels.resize(40);  // trailing zero days
    const auto a = compute_rfm(t, 1050);
    const auto b = compute_rfm(padded, 1050);
    CHECK(a.x == b.x);
    CHECK(a.t_x == b.t_x);
    CHECK(a.T == b.T);
    CHECK(a.m_bar == b.m_bar);
    CHECK(a.sum_log_itt == b.sum_log_itt);
}

namespace {

std::vector<ingest::PlayerTimeline> monthly_spenders(const std::vector<double>& spends,
                                                     const char* month_first_day) {
    std::vector<ingest::PlayerTimeline> out;
    int serial = 0;
    for (double v : spends) {
        ingest::PlayerTimeline t;
        t.player_id = "w" + std::to_string(serial++);
        t.start_date = day(month_first_day);
        t.channels.assign(3, {});
        t.channels[1][ingest::kSpend] = v;
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_CASE("whale_threshold hand-walked examples") {
    // spends 60/30/10: cumulative 60 >= 50 at the first player
    auto players = monthly_spenders({60, 30, 10}, "2016-05-01");
    auto th = whale_threshold(players, {{2016, 5}});
    CHECK(th.monthly_threshold == doctest::Approx(60.0));

    // four equal spenders: threshold at the second player
    players = monthly_spenders({25, 25, 25, 25}, "2016-05-01");
    th = whale_threshold(players, {{2016, 5}});
    CHECK(th.monthly_threshold == doctest::Approx(25.0));
}

TEST_CASE("whale_threshold averages over months") {
    auto may = monthly_spenders({60, 30, 10}, "2016-05-01");
    auto june = monthly_spenders({40, 15, 15, 10}, "2016-06-01");
    may.insert(may.end(), june.begin(), june.end());
    auto th = whale_threshold(may, {{2016, 5}, {2016, 6}});
    REQUIRE(th.per_month_values.size() == 2);
    CHECK(th.per_month_values[0].second == doctest::Approx(60.0));
    CHECK(th.per_month_values[1].second == doctest::Approx(40.0));
    CHECK(th.monthly_threshold == doctest::Approx(50.0));
}

TEST_CASE("whale_threshold skips empty months, fatal when all empty") {
    auto players = monthly_spenders({60, 30, 10}, "2016-05-01");
    auto th = whale_threshold(players, {{2016, 5}, {2016, 7}});
    CHECK(th.per_month_values.size() == 1);
    CHECK(th.warnings.size() == 1);
    CHECK_THROWS_AS(whale_threshold(players, {{2016, 7}}), DataError);
}

TEST_CASE("whale_threshold scales linearly with spend") {
    Rng rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> spends;
        const int n = 3 + static_cast<int>(rng.below(30));
        for (int i = 0; i < n; ++i) spends.push_back(rng.uniform(1.0, 500.0));
        auto base = whale_threshold(monthly_spenders(spends, "2016-05-01"), {{2016, 5}});
        const double c = rng.uniform(0.01, 100.0);
        std::vector<double> scaled;
        for (double v : spends) scaled.push_back(c * v);
        auto sc = whale_threshold(monthly_spenders(scaled, "2016-05-01"), {{2016, 5}});
        CHECK(sc.monthly_threshold ==
              doctest::Approx(c * base.monthly_threshold).epsilon(1e-12));
    }
}

TEST_CASE("whale prefix captures at least half the revenue, minimally") {
    // the cumulative construction: the sorted prefix ending at the threshold
    // player reaches 50%, and without its last member falls short
    Rng rng(33);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> spends;
        const int n = 2 + static_cast<int>(rng.below(40));
        for (int i = 0; i < n; ++i) spends.push_back(rng.uniform(1.0, 1000.0));
        auto th = whale_threshold(monthly_spenders(spends, "2016-05-01"), {{2016, 5}});
        std::sort(spends.begin(), spends.end(), std::greater<>());
        const double total = std::accumulate(spends.begin(), spends.end(), 0.0);
        double prefix = 0.0;
        for (double v : spends) {
            const double before = prefix;
            prefix += v;
            if (prefix >= 0.5 * total) {
                CHECK(v == doctest::Approx(th.monthly_threshold));
                CHECK(before < 0.5 * total);
                break;
            }
        }
        // every member at or above the threshold is a whale; together they
        // cover at least the prefix, hence at least half of the revenue
        double whales = 0.0;
        for (double v : spends)
            if (v >= th.monthly_threshold) whales += v;
        CHECK(whales >= 0.5 * total - 1e-9);
    }
}
