#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ltv/dates.hpp"
#include "ltv/ingest.hpp"

namespace ltv::neural {

// Row-major (batch, length, channels); flat feature matrices use
// channels = 1 with length = feature count.
struct Tensor {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::size_t channels = 1;
    std::vector<double> values;

    static Tensor zeros(std::size_t b, std::size_t l, std::size_t c = 1) {
        Tensor t;
        t.batch = b;
        t.length = l;
        t.channels = c;
        t.values.assign(b * l * c, 0.0);
        return t;
    }
    double& at(std::size_t b, std::size_t l, std::size_t c = 0) {
        return values[(b * length + l) * channels + c];
    }
    double at(std::size_t b, std::size_t l, std::size_t c = 0) const {
        return values[(b * length + l) * channels + c];
    }
    std::size_t per_sample() const { return length * channels; }
};

enum class Activation { identity, sigmoid, relu };

std::string to_string(Activation a);

struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::identity;
};
struct Conv1D {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    Activation act = Activation::relu;
};
struct MaxPool1D {
    std::size_t pool = 2;
};
struct Flatten {};

using LayerSpec = std::variant<Dense, Conv1D, MaxPool1D, Flatten>;

struct NetworkSpec {
    std::vector<LayerSpec> layers;
};

/// n_features -> 300 -> 200 -> 100 -> 1, sigmoid hidden activations,
/// identity output.
NetworkSpec build_mlp_spec(std::size_t n_features);

/// Conv(32 filters, size 7) -> MaxPool(2) -> Conv(16, 3) -> Conv(1, 1) ->
/// Flatten -> 300 -> 150 -> 60 -> 1, rectifier hidden activations. Valid
/// (unpadded) convolutions, stride 1. Throws when the series is too short
/// for the receptive field.
NetworkSpec build_cnn_spec(std::size_t series_len, std::size_t n_channels);

std::size_t parameter_count(const NetworkSpec& spec);

struct LayerWeights {
    std::vector<double> w;
    std::vector<double> b;
};

using Weights = std::vector<LayerWeights>;

/// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
Weights xavier_init(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardCache {
    std::vector<Tensor> inputs;          // input to each layer
    std::vector<Tensor> pre_activation;  // z for layers with activations
    std::vector<std::vector<std::size_t>> pool_argmax;
    Tensor output;
};

Tensor forward(const NetworkSpec& spec, const Weights& weights, const Tensor& batch,
               ForwardCache* cache = nullptr);

/// Exact gradients of mean squared error over the batch w.r.t. every weight
/// and bias. Max-pool routes gradient to the argmax (first index on ties).
Weights backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                 const std::vector<double>& target);

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;
    std::uint64_t seed = 1;
};

struct AdamState {
    Weights m;
    Weights v;
};

AdamState make_adam_state(const NetworkSpec& spec);

/// One ADAM update with bias-corrected moments. step_index starts at 1.
void adam_step(Weights& weights, const Weights& grads, AdamState& state,
               const TrainConfig& config, std::size_t step_index);

struct EpochRecord {
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

// Patience rule: training stops once the validation loss has gone
// `patience` consecutive epochs without a strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    /// Feed one epoch's validation loss; returns true when training should
    /// stop after this epoch.
    bool observe(double validation_loss) {
        ++epoch_;
        if (validation_loss < best_) {
            best_ = validation_loss;
            best_epoch_ = epoch_;
            bad_ = 0;
        } else {
            ++bad_;
        }
        return bad_ >= patience_;
    }

    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t bad_ = 0;
    double best_ = 1.7976931348623157e308;
};

struct TrainedModel {
    NetworkSpec spec;
    Weights weights;  // weights of best_epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  // 1-based
    TrainConfig config;
};

double mse(const NetworkSpec& spec, const Weights& weights, const Tensor& x,
           const std::vector<double>& y);

/// Minibatch ADAM with seeded shuffling; stops once validation loss has not
/// improved for `patience` consecutive epochs and returns the weights of the
/// best epoch. Throws NumericError (with epoch/batch) on NaN loss.
TrainedModel train_with_early_stopping(const NetworkSpec& spec, const Tensor& train_x,
                                       const std::vector<double>& train_y, const Tensor& val_x,
                                       const std::vector<double>& val_y,
                                       const TrainConfig& config);

// --- feature construction ---------------------------------------------

enum class FeatureMode { flat, series };

struct Standardization {
    // per feature (flat) or per channel (series)
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct FeatureSet {
    Tensor x;
    std::vector<std::string> names;       // flat mode
    std::vector<std::size_t> observed_len;  // series mode, per player
};

/// Raw (unstandardized) features at analysis_date. Series mode: the last
/// series_len days strictly before analysis_date, left-padded with zeros.
/// Flat mode: per-channel statistics, RFM fields, lifetime length and
/// active-day count.
FeatureSet build_features(const std::vector<ingest::PlayerTimeline>& timelines,
                          CalendarDay analysis_date, FeatureMode mode,
                          std::size_t series_len = 365);

/// Mean/stddev over the training set; for series mode statistics cover
/// observed (non-padding) cells only.
Standardization fit_standardization(const FeatureSet& features, FeatureMode mode);

/// In-place z-scoring. Padding cells stay exactly zero; zero-stddev
/// features map to zero.
void apply_standardization(FeatureSet& features, const Standardization& stats, FeatureMode mode);

/// ln(1 + spend); target transform for regression on heavy-tailed spend.
double transform_target(double spend);
/// inverse of transform_target, clamped at zero
double inverse_transform_target(double z);

// --- model artifact io -------------------------------------------------

struct ModelArtifact {
    NetworkSpec spec;
    Weights weights;
    Standardization stats;
    FeatureMode mode = FeatureMode::flat;
    std::size_t series_len = 0;
    TrainConfig config;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    // predictions in transformed-target space are clamped here; rectifier
    // networks extrapolate linearly on inputs far outside the training
    // range, and a single such row must not dominate the evaluation
    double target_cap = 1.7976931348623157e308;
};

/// JSON description plus little-endian float64 weights in layer order.
void save_model(const ModelArtifact& artifact, const std::string& json_path,
                const std::string& weights_path);
ModelArtifact load_model(const std::string& json_path, const std::string& weights_path);

}  // namespace ltv::neural
