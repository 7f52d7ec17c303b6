#include "ltv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ltv/errors.hpp"

namespace ltv::metrics {

namespace {

void check_same_nonempty(std::span<const double> y, std::span<const double> yhat) {
    if (y.empty()) throw DataError("metrics: empty observation vector");
    if (y.size() != yhat.size()) throw DataError("metrics: size mismatch");
}

}  // namespace

std::string to_string(Slice s) { return s == Slice::all_pu ? "all_pu" : "top_spenders"; }

std::string to_string(NrmseNormalizer n) {
    switch (n) {
        case NrmseNormalizer::mean: return "mean";
        case NrmseNormalizer::range: return "range";
        case NrmseNormalizer::stddev: return "stddev";
    }
    return "?";
}

double rmsle(std::span<const double> y, std::span<const double> yhat) {
    check_same_nonempty(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0 || yhat[i] < 0.0) throw DataError("rmsle: negative entry");
        const double d = std::log1p(yhat[i]) - std::log1p(y[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double nrmse(std::span<const double> y, std::span<const double> yhat, NrmseNormalizer norm) {
    check_same_nonempty(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = yhat[i] - y[i];
        acc += d * d;
    }
    const double rmse = std::sqrt(acc / static_cast<double>(y.size()));
    double denom = 0.0;
    switch (norm) {
        case NrmseNormalizer::mean:
            denom = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
            break;
        case NrmseNormalizer::range: {
            auto [lo, hi] = std::minmax_element(y.begin(), y.end());
            denom = *hi - *lo;
            break;
        }
        case NrmseNormalizer::stddev: {
            const double mu = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
            double var = 0.0;
            for (double v : y) var += (v - mu) * (v - mu);
            denom = std::sqrt(var / static_cast<double>(y.size()));
            break;
        }
    }
    if (denom == 0.0) throw DataError("nrmse: normalizer of observed values is zero");
    return rmse / denom;
}

double smape(std::span<const double> y, std::span<const double> yhat) {
    check_same_nonempty(y, yhat);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double denom = (std::abs(y[i]) + std::abs(yhat[i])) / 2.0;
        if (denom == 0.0) continue;  // y = yhat = 0
        acc += std::abs(yhat[i] - y[i]) / denom;
    }
    return 100.0 * acc / static_cast<double>(y.size());
}

double percent_error(std::span<const double> y, std::span<const double> yhat) {
    check_same_nonempty(y, yhat);
    const double ymax = *std::max_element(y.begin(), y.end());
    if (ymax == 0.0) throw DataError("percent_error: max of observed values is zero");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(yhat[i] - y[i]);
    return 100.0 * (acc / static_cast<double>(y.size())) / ymax;
}

std::vector<std::size_t> top_spender_slice(std::span<const double> observed_spend,
                                           std::span<const std::string> player_ids,
                                           double fraction) {
    if (observed_spend.size() != player_ids.size())
        throw DataError("top_spender_slice: size mismatch");
    const std::size_t n = observed_spend.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (observed_spend[i] != observed_spend[j]) return observed_spend[i] > observed_spend[j];
        return player_ids[i] < player_ids[j];
    });
    const auto take = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n)));
    order.resize(std::min(take, n));
    return order;
}

std::vector<EvalReport> build_report(std::span<const double> y, std::span<const double> yhat,
                                     const std::string& model_label,
                                     std::span<const std::string> player_ids,
                                     double top_fraction, NrmseNormalizer norm) {
    check_same_nonempty(y, yhat);
    auto make = [&](std::span<const double> yy, std::span<const double> hh, Slice slice) {
        EvalReport r;
        r.model_label = model_label;
        r.slice = slice;
        r.n = yy.size();
        r.rmsle = rmsle(yy, hh);
        r.nrmse = nrmse(yy, hh, norm);
        r.nrmse_normalizer = norm;
        r.smape = smape(yy, hh);
        r.percent_error = percent_error(yy, hh);
        return r;
    };

    std::vector<EvalReport> out;
    out.push_back(make(y, yhat, Slice::all_pu));

    const auto top = top_spender_slice(y, player_ids, top_fraction);
    std::vector<double> ty, th;
    ty.reserve(top.size());
    th.reserve(top.size());
    for (std::size_t i : top) {
        ty.push_back(y[i]);
        th.push_back(yhat[i]);
    }
    out.push_back(make(ty, th, Slice::top_spenders));
    return out;
}

std::string report_csv(std::span<const EvalReport> reports) {
    std::ostringstream os;
    os << "model,slice,n,rmsle,nrmse,nrmse_normalizer,smape,percent_error\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.6f,%.6f,%s,%.6f,%.6f\n",
                      r.model_label.c_str(), to_string(r.slice).c_str(), r.n, r.rmsle, r.nrmse,
                      to_string(r.nrmse_normalizer).c_str(), r.smape, r.percent_error);
        os << buf;
    }
    return os.str();
}

std::string report_table(std::span<const EvalReport> reports) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %-13s %6s %9s %8s %8s %8s\n", "model", "slice", "n",
                  "rmsle", "nrmse", "smape", "%err");
    os << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-24s %-13s %6zu %9.4f %8.4f %8.2f %8.2f\n",
                      r.model_label.c_str(), to_string(r.slice).c_str(), r.n, r.rmsle, r.nrmse,
                      r.smape, r.percent_error);
        os << buf;
    }
    return os.str();
}

}  // namespace ltv::metrics
