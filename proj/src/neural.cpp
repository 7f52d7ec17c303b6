#include "ltv/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ltv/errors.hpp"
#include "ltv/rfm.hpp"
#include "ltv/rng.hpp"

namespace ltv::neural {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

// derivative from pre-activation z and post-activation y
double activate_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

struct Shape {
    std::size_t length = 0;
    std::size_t channels = 1;
};

Shape layer_output_shape(const LayerSpec& layer, Shape in, std::size_t layer_index) {
    return std::visit(
        [&](const auto& l) -> Shape {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Dense>) {
                if (in.length * in.channels != l.in) {
                    std::ostringstream os;
                    os << "layer " << layer_index << ": dense expects " << l.in
                       << " inputs, got " << in.length * in.channels;
                    throw NumericError(os.str());
                }
                return {l.out, 1};
            } else if constexpr (std::is_same_v<L, Conv1D>) {
                if (in.channels != l.in_channels) {
                    std::ostringstream os;
                    os << "layer " << layer_index << ": conv expects " << l.in_channels
                       << " channels, got " << in.channels;
                    throw NumericError(os.str());
                }
                if (in.length < l.kernel_size) {
                    std::ostringstream os;
                    os << "layer " << layer_index << ": series length " << in.length
                       << " shorter than kernel " << l.kernel_size;
                    throw NumericError(os.str());
                }
                return {in.length - l.kernel_size + 1, l.out_channels};
            } else if constexpr (std::is_same_v<L, MaxPool1D>) {
                const std::size_t out_len = in.length / l.pool;
                if (out_len == 0) {
                    std::ostringstream os;
                    os << "layer " << layer_index << ": pool " << l.pool
                       << " empties series of length " << in.length;
                    throw NumericError(os.str());
                }
                return {out_len, in.channels};
            } else {
                return {in.length * in.channels, 1};
            }
        },
        layer);
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
    }
    return "?";
}

NetworkSpec build_mlp_spec(std::size_t n_features) {
    if (n_features < 1) throw UsageError("build_mlp_spec: need at least one feature");
    NetworkSpec spec;
    spec.layers = {Dense{n_features, 300, Activation::sigmoid},
                   Dense{300, 200, Activation::sigmoid}, Dense{200, 100, Activation::sigmoid},
                   Dense{100, 1, Activation::identity}};
    return spec;
}

NetworkSpec build_cnn_spec(std::size_t series_len, std::size_t n_channels) {
    if (n_channels < 1) throw UsageError("build_cnn_spec: need at least one channel");
    NetworkSpec spec;
    spec.layers = {Conv1D{n_channels, 32, 7, Activation::relu}, MaxPool1D{2},
                   Conv1D{32, 16, 3, Activation::relu}, Conv1D{16, 1, 1, Activation::relu},
                   Flatten{}};
    // derive the flattened width to size the first dense layer
    Shape shape{series_len, n_channels};
    try {
        for (std::size_t i = 0; i < spec.layers.size(); ++i)
            shape = layer_output_shape(spec.layers[i], shape, i);
    } catch (const NumericError&) {
        std::ostringstream os;
        os << "build_cnn_spec: series length " << series_len
           << " too short for the receptive field";
        throw UsageError(os.str());
    }
    spec.layers.push_back(Dense{shape.length, 300, Activation::relu});
    spec.layers.push_back(Dense{300, 150, Activation::relu});
    spec.layers.push_back(Dense{150, 60, Activation::relu});
    spec.layers.push_back(Dense{60, 1, Activation::identity});
    return spec;
}

std::size_t parameter_count(const NetworkSpec& spec) {
    std::size_t n = 0;
    for (const auto& layer : spec.layers) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Dense>)
                    n += l.in * l.out + l.out;
                else if constexpr (std::is_same_v<L, Conv1D>)
                    n += l.in_channels * l.out_channels * l.kernel_size + l.out_channels;
            },
            layer);
    }
    return n;
}

Weights xavier_init(const NetworkSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Weights weights(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Dense>) {
                    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
                    weights[i].w.resize(l.in * l.out);
                    for (auto& w : weights[i].w) w = rng.uniform(-bound, bound);
                    weights[i].b.assign(l.out, 0.0);
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    const std::size_t fan_in = l.in_channels * l.kernel_size;
                    const std::size_t fan_out = l.out_channels * l.kernel_size;
                    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
                    weights[i].w.resize(l.out_channels * l.in_channels * l.kernel_size);
                    for (auto& w : weights[i].w) w = rng.uniform(-bound, bound);
                    weights[i].b.assign(l.out_channels, 0.0);
                }
            },
            spec.layers[i]);
    }
    return weights;
}

Tensor forward(const NetworkSpec& spec, const Weights& weights, const Tensor& batch,
               ForwardCache* cache) {
    if (weights.size() != spec.layers.size())
        throw NumericError("forward: weights do not match the network spec");
    Tensor x = batch;
    if (cache) {
        cache->inputs.assign(spec.layers.size(), Tensor{});
        cache->pre_activation.assign(spec.layers.size(), Tensor{});
        cache->pool_argmax.assign(spec.layers.size(), {});
    }

    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        if (cache) cache->inputs[li] = x;
        const auto& lw = weights[li];
        Tensor y;
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Dense>) {
                    if (x.per_sample() != l.in)
                        throw NumericError("forward: dense input size mismatch");
                    y = Tensor::zeros(x.batch, l.out, 1);
                    Tensor z = Tensor::zeros(x.batch, l.out, 1);
                    for (std::size_t b = 0; b < x.batch; ++b) {
                        const double* xin = &x.values[b * l.in];
                        for (std::size_t o = 0; o < l.out; ++o) {
                            const double* wrow = &lw.w[o * l.in];
                            double acc = lw.b[o];
                            for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * xin[i];
                            z.values[b * l.out + o] = acc;
                            y.values[b * l.out + o] = activate(l.act, acc);
                        }
                    }
                    if (cache) cache->pre_activation[li] = std::move(z);
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    if (x.channels != l.in_channels)
                        throw NumericError("forward: conv channel mismatch");
                    if (x.length < l.kernel_size)
                        throw NumericError("forward: series shorter than conv kernel");
                    const std::size_t out_len = x.length - l.kernel_size + 1;
                    y = Tensor::zeros(x.batch, out_len, l.out_channels);
                    Tensor z = Tensor::zeros(x.batch, out_len, l.out_channels);
                    const std::size_t ci = l.in_channels;
                    for (std::size_t b = 0; b < x.batch; ++b) {
                        for (std::size_t i = 0; i < out_len; ++i) {
                            const double* xbase = &x.values[(b * x.length + i) * ci];
                            for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
                                const double* wbase = &lw.w[oc * ci * l.kernel_size];
                                double acc = lw.b[oc];
                                for (std::size_t j = 0; j < l.kernel_size; ++j)
                                    for (std::size_t ic = 0; ic < ci; ++ic)
                                        acc += xbase[j * ci + ic] * wbase[ic * l.kernel_size + j];
                                z.at(b, i, oc) = acc;
                                y.at(b, i, oc) = activate(l.act, acc);
                            }
                        }
                    }
                    if (cache) cache->pre_activation[li] = std::move(z);
                } else if constexpr (std::is_same_v<L, MaxPool1D>) {
                    const std::size_t out_len = x.length / l.pool;
                    if (out_len == 0) throw NumericError("forward: pool empties the series");
                    y = Tensor::zeros(x.batch, out_len, x.channels);
                    std::vector<std::size_t> argmax(y.values.size());
                    for (std::size_t b = 0; b < x.batch; ++b) {
                        for (std::size_t i = 0; i < out_len; ++i) {
                            for (std::size_t c = 0; c < x.channels; ++c) {
                                double best = -kInf;
                                std::size_t best_idx = 0;
                                for (std::size_t j = 0; j < l.pool; ++j) {
                                    const std::size_t src =
                                        (b * x.length + i * l.pool + j) * x.channels + c;
                                    if (x.values[src] > best) {
                                        best = x.values[src];
                                        best_idx = src;
                                    }
                                }
                                const std::size_t dst = (b * out_len + i) * x.channels + c;
                                y.values[dst] = best;
                                argmax[dst] = best_idx;
                            }
                        }
                    }
                    if (cache) cache->pool_argmax[li] = std::move(argmax);
                } else {  // Flatten
                    y = x;
                    y.length = x.length * x.channels;
                    y.channels = 1;
                }
            },
            spec.layers[li]);
        x = std::move(y);
    }
    if (cache) cache->output = x;
    return x;
}

Weights backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                 const std::vector<double>& target) {
    const Tensor& out = cache.output;
    if (out.per_sample() != 1)
        throw NumericError("backward: network output dimension must be 1");
    if (target.size() != out.batch) throw NumericError("backward: target size mismatch");

    Weights grads(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        grads[i].w.assign(weights[i].w.size(), 0.0);
        grads[i].b.assign(weights[i].b.size(), 0.0);
    }

    // d(MSE)/d(prediction)
    Tensor delta = Tensor::zeros(out.batch, 1, 1);
    const double scale = 2.0 / static_cast<double>(out.batch);
    for (std::size_t b = 0; b < out.batch; ++b)
        delta.values[b] = scale * (out.values[b] - target[b]);

    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const Tensor& x = cache.inputs[li];
        const auto& lw = weights[li];
        const Tensor& post = li + 1 < spec.layers.size() ? cache.inputs[li + 1] : cache.output;
        Tensor dx;
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Dense>) {
                    const Tensor& z = cache.pre_activation[li];
                    dx = Tensor::zeros(x.batch, x.length, x.channels);
                    for (std::size_t b = 0; b < x.batch; ++b) {
                        const double* xin = &x.values[b * l.in];
                        double* dxin = &dx.values[b * l.in];
                        for (std::size_t o = 0; o < l.out; ++o) {
                            const std::size_t oi = b * l.out + o;
                            const double dz = delta.values[oi] *
                                              activate_grad(l.act, z.values[oi], post.values[oi]);
                            if (dz == 0.0) continue;
                            grads[li].b[o] += dz;
                            double* gw = &grads[li].w[o * l.in];
                            const double* wrow = &lw.w[o * l.in];
                            for (std::size_t i = 0; i < l.in; ++i) {
                                gw[i] += dz * xin[i];
                                dxin[i] += dz * wrow[i];
                            }
                        }
                    }
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    const Tensor& z = cache.pre_activation[li];
                    const std::size_t out_len = x.length - l.kernel_size + 1;
                    const std::size_t ci = l.in_channels;
                    dx = Tensor::zeros(x.batch, x.length, x.channels);
                    for (std::size_t b = 0; b < x.batch; ++b) {
                        for (std::size_t i = 0; i < out_len; ++i) {
                            const double* xbase = &x.values[(b * x.length + i) * ci];
                            double* dxbase = &dx.values[(b * x.length + i) * ci];
                            for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
                                const std::size_t oi = (b * out_len + i) * l.out_channels + oc;
                                const double dz =
                                    delta.values[oi] *
                                    activate_grad(l.act, z.values[oi], post.values[oi]);
                                if (dz == 0.0) continue;
                                grads[li].b[oc] += dz;
                                double* gw = &grads[li].w[oc * ci * l.kernel_size];
                                const double* wbase = &lw.w[oc * ci * l.kernel_size];
                                for (std::size_t j = 0; j < l.kernel_size; ++j) {
                                    for (std::size_t ic = 0; ic < ci; ++ic) {
                                        gw[ic * l.kernel_size + j] += dz * xbase[j * ci + ic];
                                        dxbase[j * ci + ic] += dz * wbase[ic * l.kernel_size + j];
                                    }
                                }
                            }
                        }
                    }
                } else if constexpr (std::is_same_v<L, MaxPool1D>) {
                    dx = Tensor::zeros(x.batch, x.length, x.channels);
                    const auto& argmax = cache.pool_argmax[li];
                    for (std::size_t i = 0; i < delta.values.size(); ++i)
                        dx.values[argmax[i]] += delta.values[i];
                } else {  // Flatten
                    dx = delta;
                    dx.length = x.length;
                    dx.channels = x.channels;
                }
            },
            spec.layers[li]);
        delta = std::move(dx);
    }
    return grads;
}

AdamState make_adam_state(const NetworkSpec& spec) {
    AdamState st;
    st.m.resize(spec.layers.size());
    st.v.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                std::size_t nw = 0, nb = 0;
                if constexpr (std::is_same_v<L, Dense>) {
                    nw = l.in * l.out;
                    nb = l.out;
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    nw = l.in_channels * l.out_channels * l.kernel_size;
                    nb = l.out_channels;
                }
                st.m[i].w.assign(nw, 0.0);
                st.m[i].b.assign(nb, 0.0);
                st.v[i].w.assign(nw, 0.0);
                st.v[i].b.assign(nb, 0.0);
            },
            spec.layers[i]);
    }
    return st;
}

void adam_step(Weights& weights, const Weights& grads, AdamState& state,
               const TrainConfig& config, std::size_t step_index) {
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_index));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_index));
    auto update = [&](std::vector<double>& w, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
        }
    };
    for (std::size_t li = 0; li < weights.size(); ++li) {
        update(weights[li].w, grads[li].w, state.m[li].w, state.v[li].w);
        update(weights[li].b, grads[li].b, state.m[li].b, state.v[li].b);
    }
}

double mse(const NetworkSpec& spec, const Weights& weights, const Tensor& x,
           const std::vector<double>& y) {
    const Tensor out = forward(spec, weights, x);
    if (out.batch != y.size()) throw NumericError("mse: target size mismatch");
    double acc = 0.0;
    for (std::size_t b = 0; b < y.size(); ++b) {
        const double d = out.values[b] - y[b];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

namespace {

Tensor gather_batch(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t from,
                    std::size_t to) {
    Tensor out = Tensor::zeros(to - from, x.length, x.channels);
    const std::size_t stride = x.per_sample();
    for (std::size_t i = from; i < to; ++i)
        std::copy_n(&x.values[idx[i] * stride], stride, &out.values[(i - from) * stride]);
    return out;
}

}  // namespace

TrainedModel train_with_early_stopping(const NetworkSpec& spec, const Tensor& train_x,
                                       const std::vector<double>& train_y, const Tensor& val_x,
                                       const std::vector<double>& val_y,
                                       const TrainConfig& config) {
    if (train_x.batch != train_y.size() || val_x.batch != val_y.size())
        throw DataError("train_with_early_stopping: target size mismatch");
    if (train_x.batch == 0 || val_x.batch == 0)
        throw DataError("train_with_early_stopping: empty train or validation set");
    if (config.patience < 1) throw UsageError("train_with_early_stopping: patience must be >= 1");
    for (double v : train_x.values)
        if (!std::isfinite(v)) throw NumericError("train_with_early_stopping: NaN in inputs");

    TrainedModel model;
    model.spec = spec;
    model.config = config;
    Weights weights = xavier_init(spec, config.seed);
    AdamState adam = make_adam_state(spec);

    Weights best_weights = weights;
    EarlyStopper stopper(config.patience);
    std::size_t step = 0;

    std::vector<std::size_t> idx(train_x.batch);
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, epoch));
        for (std::size_t i = idx.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuffle_rng.below(i));
            std::swap(idx[i - 1], idx[j]);
        }

        double train_sse = 0.0;
        for (std::size_t from = 0; from < idx.size(); from += config.batch_size) {
            const std::size_t to = std::min(from + config.batch_size, idx.size());
            const Tensor bx = gather_batch(train_x, idx, from, to);
            std::vector<double> by(to - from);
            for (std::size_t i = from; i < to; ++i) by[i - from] = train_y[idx[i]];

            ForwardCache cache;
            const Tensor out = forward(spec, weights, bx, &cache);
            double batch_sse = 0.0;
            for (std::size_t b = 0; b < by.size(); ++b) {
                const double d = out.values[b] - by[b];
                batch_sse += d * d;
            }
            if (!std::isfinite(batch_sse)) {
                std::ostringstream os;
                os << "training aborted: non-finite loss at epoch " << epoch << ", batch "
                   << from / config.batch_size;
                throw NumericError(os.str());
            }
            train_sse += batch_sse;

            const Weights grads = backward(spec, weights, cache, by);
            adam_step(weights, grads, adam, config, ++step);
        }

        EpochRecord rec;
        rec.train_loss = train_sse / static_cast<double>(train_x.batch);
        rec.validation_loss = mse(spec, weights, val_x, val_y);
        if (!std::isfinite(rec.validation_loss)) {
            std::ostringstream os;
            os << "training aborted: non-finite validation loss at epoch " << epoch;
            throw NumericError(os.str());
        }
        model.history.push_back(rec);

        const bool stop = stopper.observe(rec.validation_loss);
        if (stopper.best_epoch() == epoch) {
            best_weights = weights;
            model.best_epoch = epoch;
        }
        if (stop) break;
    }

    model.weights = std::move(best_weights);
    return model;
}

// --- feature construction ---------------------------------------------

namespace {

double channel_at(const ingest::PlayerTimeline& t, CalendarDay day, std::size_t channel) {
    if (day < t.start_date) return 0.0;
    const auto offset = static_cast<std::size_t>(day - t.start_date);
    if (offset >= t.n_days()) return 0.0;
    return t.channels[offset][channel];
}

const char* kChannelNames[ingest::kNumChannels] = {"playtime", "sessions", "spend", "levelups",
                                                   "logins"};

}  // namespace

FeatureSet build_features(const std::vector<ingest::PlayerTimeline>& timelines,
                          CalendarDay analysis_date, FeatureMode mode, std::size_t series_len) {
    FeatureSet out;
    if (mode == FeatureMode::series) {
        out.x = Tensor::zeros(timelines.size(), series_len, ingest::kNumChannels);
        out.observed_len.resize(timelines.size());
        for (std::size_t pi = 0; pi < timelines.size(); ++pi) {
            const auto& t = timelines[pi];
            if (analysis_date <= t.start_date)
                throw DataError("build_features: analysis date not after player start (" +
                                t.player_id + ")");
            const auto lifetime = static_cast<std::size_t>(analysis_date - t.start_date);
            const std::size_t observed = std::min(series_len, lifetime);
            out.observed_len[pi] = observed;
            for (std::size_t d = 0; d < observed; ++d) {
                // row (series_len - observed + d) holds calendar day
                // analysis_date - observed + d; earlier rows are padding
                const CalendarDay day =
                    analysis_date - static_cast<CalendarDay>(observed) + static_cast<CalendarDay>(d);
                for (std::size_t c = 0; c < ingest::kNumChannels; ++c)
                    out.x.at(pi, series_len - observed + d, c) = channel_at(t, day, c);
            }
        }
        return out;
    }

    // flat statistics catalog
    for (std::size_t c = 0; c < ingest::kNumChannels; ++c) {
        const std::string base = kChannelNames[c];
        for (const char* stat :
             {"mean", "stddev", "min", "max", "last7_mean", "last30_mean", "total",
              "days_since_nonzero"})
            out.names.push_back(base + "_" + stat);
    }
    for (const char* f : {"rfm_x", "rfm_t_x", "rfm_T", "rfm_m_bar", "rfm_total_spend",
                          "lifetime_days", "active_days"})
        out.names.emplace_back(f);

    out.x = Tensor::zeros(timelines.size(), out.names.size(), 1);
    for (std::size_t pi = 0; pi < timelines.size(); ++pi) {
        const auto& t = timelines[pi];
        if (analysis_date <= t.start_date)
            throw DataError("build_features: analysis date not after player start (" +
                            t.player_id + ")");
        const auto lifetime = static_cast<std::size_t>(analysis_date - t.start_date);
        std::size_t fi = 0;
        std::size_t active_days = 0;
        for (std::size_t d = 0; d < lifetime; ++d) {
            const CalendarDay day = t.start_date + static_cast<CalendarDay>(d);
            for (std::size_t c = 0; c < ingest::kNumChannels; ++c)
                if (channel_at(t, day, c) != 0.0) {
                    ++active_days;
                    break;
                }
        }
        for (std::size_t c = 0; c < ingest::kNumChannels; ++c) {
            double sum = 0.0, sumsq = 0.0;
            double vmin = kInf, vmax = -kInf;
            double last7 = 0.0, last30 = 0.0;
            double days_since = static_cast<double>(lifetime);
            for (std::size_t d = 0; d < lifetime; ++d) {
                const CalendarDay day = t.start_date + static_cast<CalendarDay>(d);
                const double v = channel_at(t, day, c);
                sum += v;
                sumsq += v * v;
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
                if (v != 0.0) days_since = static_cast<double>(lifetime - 1 - d);
                const std::size_t back = lifetime - d;  // 1 = most recent day
                if (back <= 7) last7 += v;
                if (back <= 30) last30 += v;
            }
            const double n = static_cast<double>(lifetime);
            const double mean = sum / n;
            const double var = std::max(0.0, sumsq / n - mean * mean);
            out.x.at(pi, fi++) = mean;
            out.x.at(pi, fi++) = std::sqrt(var);
            out.x.at(pi, fi++) = vmin;
            out.x.at(pi, fi++) = vmax;
            out.x.at(pi, fi++) = last7 / std::min<double>(7.0, n);
            out.x.at(pi, fi++) = last30 / std::min<double>(30.0, n);
            out.x.at(pi, fi++) = sum;
            out.x.at(pi, fi++) = days_since;
        }
        // RFM block; zeros for players with no purchase history yet
        double x_rfm = 0.0, t_x = 0.0, T = 0.0, m_bar = 0.0, total_spend = 0.0;
        try {
            const auto summary = rfm::compute_rfm(t, analysis_date - 1);
            x_rfm = static_cast<double>(summary.x);
            t_x = summary.t_x;
            T = summary.T;
            m_bar = summary.m_bar;
            total_spend = summary.total_spend;
        } catch (const DataError&) {
        }
        out.x.at(pi, fi++) = x_rfm;
        out.x.at(pi, fi++) = t_x;
        out.x.at(pi, fi++) = T;
        out.x.at(pi, fi++) = m_bar;
        out.x.at(pi, fi++) = total_spend;
        out.x.at(pi, fi++) = static_cast<double>(lifetime);
        out.x.at(pi, fi++) = static_cast<double>(active_days);
    }
    return out;
}

Standardization fit_standardization(const FeatureSet& features, FeatureMode mode) {
    Standardization st;
    if (mode == FeatureMode::series) {
        const std::size_t nc = features.x.channels;
        st.mean.assign(nc, 0.0);
        st.stddev.assign(nc, 0.0);
        std::vector<double> count(nc, 0.0);
        std::vector<double> sumsq(nc, 0.0);
        for (std::size_t b = 0; b < features.x.batch; ++b) {
            const std::size_t observed = features.observed_len[b];
            for (std::size_t l = features.x.length - observed; l < features.x.length; ++l) {
                for (std::size_t c = 0; c < nc; ++c) {
                    const double v = features.x.at(b, l, c);
                    st.mean[c] += v;
                    sumsq[c] += v * v;
                    count[c] += 1.0;
                }
            }
        }
        for (std::size_t c = 0; c < nc; ++c) {
            if (count[c] > 0.0) {
                st.mean[c] /= count[c];
                st.stddev[c] = std::sqrt(std::max(0.0, sumsq[c] / count[c] - st.mean[c] * st.mean[c]));
            }
        }
        return st;
    }
    const std::size_t nf = features.x.length;
    st.mean.assign(nf, 0.0);
    st.stddev.assign(nf, 0.0);
    const double n = static_cast<double>(features.x.batch);
    for (std::size_t b = 0; b < features.x.batch; ++b)
        for (std::size_t f = 0; f < nf; ++f) st.mean[f] += features.x.at(b, f);
    for (auto& m : st.mean) m /= n;
    for (std::size_t b = 0; b < features.x.batch; ++b)
        for (std::size_t f = 0; f < nf; ++f) {
            const double d = features.x.at(b, f) - st.mean[f];
            st.stddev[f] += d * d;
        }
    for (auto& s : st.stddev) s = std::sqrt(s / n);
    return st;
}

void apply_standardization(FeatureSet& features, const Standardization& stats, FeatureMode mode) {
    if (mode == FeatureMode::series) {
        const std::size_t nc = features.x.channels;
        if (stats.mean.size() != nc) throw DataError("apply_standardization: channel mismatch");
        for (std::size_t b = 0; b < features.x.batch; ++b) {
            const std::size_t observed = features.observed_len[b];
            for (std::size_t l = features.x.length - observed; l < features.x.length; ++l)
                for (std::size_t c = 0; c < nc; ++c) {
                    double& v = features.x.at(b, l, c);
                    v = stats.stddev[c] > 0.0 ? (v - stats.mean[c]) / stats.stddev[c] : 0.0;
                }
        }
        return;
    }
    const std::size_t nf = features.x.length;
    if (stats.mean.size() != nf) throw DataError("apply_standardization: feature mismatch");
    for (std::size_t b = 0; b < features.x.batch; ++b)
        for (std::size_t f = 0; f < nf; ++f) {
            double& v = features.x.at(b, f);
            v = stats.stddev[f] > 0.0 ? (v - stats.mean[f]) / stats.stddev[f] : 0.0;
        }
}

double transform_target(double spend) { return std::log1p(spend); }

double inverse_transform_target(double z) { return std::max(0.0, std::expm1(z)); }

// --- model artifact io -------------------------------------------------

namespace {

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : spec.layers) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                nlohmann::json j;
                if constexpr (std::is_same_v<L, Dense>) {
                    j = {{"type", "dense"}, {"in", l.in}, {"out", l.out},
                         {"activation", to_string(l.act)}};
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    j = {{"type", "conv1d"},
                         {"in_channels", l.in_channels},
                         {"out_channels", l.out_channels},
                         {"kernel_size", l.kernel_size},
                         {"activation", to_string(l.act)}};
                } else if constexpr (std::is_same_v<L, MaxPool1D>) {
                    j = {{"type", "maxpool1d"}, {"pool", l.pool}};
                } else {
                    j = {{"type", "flatten"}};
                }
                layers.push_back(j);
            },
            layer);
    }
    return layers;
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "relu") return Activation::relu;
    throw DataError("unknown activation: " + s);
}

NetworkSpec spec_from_json(const nlohmann::json& layers) {
    NetworkSpec spec;
    for (const auto& j : layers) {
        const std::string type = j.at("type");
        if (type == "dense")
            spec.layers.push_back(Dense{j.at("in"), j.at("out"),
                                        activation_from_string(j.at("activation"))});
        else if (type == "conv1d")
            spec.layers.push_back(Conv1D{j.at("in_channels"), j.at("out_channels"),
                                         j.at("kernel_size"),
                                         activation_from_string(j.at("activation"))});
        else if (type == "maxpool1d")
            spec.layers.push_back(MaxPool1D{j.at("pool")});
        else if (type == "flatten")
            spec.layers.push_back(Flatten{});
        else
            throw DataError("unknown layer type: " + type);
    }
    return spec;
}

}  // namespace

void save_model(const ModelArtifact& artifact, const std::string& json_path,
                const std::string& weights_path) {
    nlohmann::json j;
    j["layers"] = spec_to_json(artifact.spec);
    j["mode"] = artifact.mode == FeatureMode::flat ? "flat" : "series";
    j["series_len"] = artifact.series_len;
    j["standardization"] = {{"mean", artifact.stats.mean}, {"stddev", artifact.stats.stddev}};
    j["config"] = {{"learning_rate", artifact.config.learning_rate},
                   {"adam_beta1", artifact.config.adam_beta1},
                   {"adam_beta2", artifact.config.adam_beta2},
                   {"adam_eps", artifact.config.adam_eps},
                   {"batch_size", artifact.config.batch_size},
                   {"max_epochs", artifact.config.max_epochs},
                   {"patience", artifact.config.patience},
                   {"seed", artifact.config.seed}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : artifact.history)
        hist.push_back({{"train", h.train_loss}, {"validation", h.validation_loss}});
    j["history"] = hist;
    j["best_epoch"] = artifact.best_epoch;
    j["target_cap"] = artifact.target_cap;

    std::ofstream jf(json_path);
    if (!jf) throw DataError("save_model: cannot write " + json_path);
    jf << j.dump(1) << '\n';

    std::ofstream wf(weights_path, std::ios::binary);
    if (!wf) throw DataError("save_model: cannot write " + weights_path);
    for (const auto& lw : artifact.weights) {
        // float64 little-endian in layer order, weights then biases
        wf.write(reinterpret_cast<const char*>(lw.w.data()),
                 static_cast<std::streamsize>(lw.w.size() * sizeof(double)));
        wf.write(reinterpret_cast<const char*>(lw.b.data()),
                 static_cast<std::streamsize>(lw.b.size() * sizeof(double)));
    }
}

ModelArtifact load_model(const std::string& json_path, const std::string& weights_path) {
    std::ifstream jf(json_path);
    if (!jf) throw DataError("load_model: cannot read " + json_path);
    nlohmann::json j;
    jf >> j;

    ModelArtifact a;
    a.spec = spec_from_json(j.at("layers"));
    a.mode = j.at("mode") == "flat" ? FeatureMode::flat : FeatureMode::series;
    a.series_len = j.at("series_len");
    a.stats.mean = j.at("standardization").at("mean").get<std::vector<double>>();
    a.stats.stddev = j.at("standardization").at("stddev").get<std::vector<double>>();
    const auto& c = j.at("config");
    a.config.learning_rate = c.at("learning_rate");
    a.config.adam_beta1 = c.at("adam_beta1");
    a.config.adam_beta2 = c.at("adam_beta2");
    a.config.adam_eps = c.at("adam_eps");
    a.config.batch_size = c.at("batch_size");
    a.config.max_epochs = c.at("max_epochs");
    a.config.patience = c.at("patience");
    a.config.seed = c.at("seed");
    for (const auto& h : j.at("history"))
        a.history.push_back({h.at("train"), h.at("validation")});
    a.best_epoch = j.at("best_epoch");
    if (j.contains("target_cap")) a.target_cap = j.at("target_cap");

    std::ifstream wf(weights_path, std::ios::binary);
    if (!wf) throw DataError("load_model: cannot read " + weights_path);
    a.weights.resize(a.spec.layers.size());
    for (std::size_t i = 0; i < a.spec.layers.size(); ++i) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                std::size_t nw = 0, nb = 0;
                if constexpr (std::is_same_v<L, Dense>) {
                    nw = l.in * l.out;
                    nb = l.out;
                } else if constexpr (std::is_same_v<L, Conv1D>) {
                    nw = l.in_channels * l.out_channels * l.kernel_size;
                    nb = l.out_channels;
                }
                a.weights[i].w.resize(nw);
                a.weights[i].b.resize(nb);
                wf.read(reinterpret_cast<char*>(a.weights[i].w.data()),
                        static_cast<std::streamsize>(nw * sizeof(double)));
                wf.read(reinterpret_cast<char*>(a.weights[i].b.data()),
                        static_cast<std::streamsize>(nb * sizeof(double)));
            },
            a.spec.layers[i]);
    }
    if (!wf) throw DataError("load_model: truncated weights file " + weights_path);
    return a;
}

}  // namespace ltv::neural
