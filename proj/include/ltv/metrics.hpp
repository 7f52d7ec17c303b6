#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ltv::metrics {

enum class Slice { all_pu, top_spenders };

enum class NrmseNormalizer { mean, range, stddev };

std::string to_string(Slice s);
std::string to_string(NrmseNormalizer n);

struct EvalReport {
    std::string model_label;
    Slice slice = Slice::all_pu;
    std::size_t n = 0;
    double rmsle = 0.0;
    double nrmse = 0.0;
    NrmseNormalizer nrmse_normalizer = NrmseNormalizer::mean;
    double smape = 0.0;
    double percent_error = 0.0;
};

/// sqrt(mean((log1p(yhat) - log1p(y))^2)). Requires nonnegative entries.
double rmsle(std::span<const double> y, std::span<const double> yhat);

/// RMSE divided by the chosen normalizer of the observed values.
double nrmse(std::span<const double> y, std::span<const double> yhat,
             NrmseNormalizer norm = NrmseNormalizer::mean);

/// 100 * mean(|yhat-y| / ((|y|+|yhat|)/2)); terms with y = yhat = 0 contribute 0.
double smape(std::span<const double> y, std::span<const double> yhat);

/// 100 * mean(|yhat-y|) / max(y).
double percent_error(std::span<const double> y, std::span<const double> yhat);

/// Indices of the ceil(fraction*n) players with the highest observed spend;
/// ties broken by ascending player id.
std::vector<std::size_t> top_spender_slice(std::span<const double> observed_spend,
                                           std::span<const std::string> player_ids,
                                           double fraction = 0.20);

std::vector<EvalReport> build_report(std::span<const double> y, std::span<const double> yhat,
                                     const std::string& model_label,
                                     std::span<const std::string> player_ids,
                                     double top_fraction = 0.20,
                                     NrmseNormalizer norm = NrmseNormalizer::mean);

std::string report_csv(std::span<const EvalReport> reports);
std::string report_table(std::span<const EvalReport> reports);

}  // namespace ltv::metrics
