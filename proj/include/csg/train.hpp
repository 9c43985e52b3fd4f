#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "csg/errors.hpp"
#include "csg/generator.hpp"
#include "csg/nn.hpp"
#include "csg/rng.hpp"
#include "csg/slicer.hpp"
#include "csg/tensor.hpp"
#include "csg/tensor_io.hpp"

namespace csg {

/// Inputs (n, channels, height, width) with per-sample label rows.
struct Dataset {
    Tensor4 inputs;
    Matrix labels;

    std::int64_t size() const { return inputs.shape()[0]; }
    std::int64_t features_per_point() const { return inputs.shape()[2] * inputs.shape()[3]; }
};

/// The non-degeneracy quantities of the convergence analysis.
struct DatasetStats {
    std::int64_t n = 0;        // points
    std::int64_t d = 0;        // features per point (pixels)
    std::int64_t m = 0;        // input channels
    std::int64_t d_prime = 0;  // labels
    double delta = 0.0;        // minimum pairwise input distance
};

/// Minimum Euclidean distance over all pairs of flattened inputs.
inline double min_pairwise_distance(const Dataset& data) {
    const std::int64_t n = data.size();
    if (n < 2) throw value_error("min_pairwise_distance: need at least two points");
    const std::int64_t stride = data.inputs.size() / n;
    const auto& v = data.inputs.data();
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + 1; j < n; ++j) {
            double sq = 0.0;
            for (std::int64_t k = 0; k < stride; ++k) {
                const double d = v[static_cast<std::size_t>(i * stride + k)] -
                                 v[static_cast<std::size_t>(j * stride + k)];
                sq += d * d;
            }
            best = std::min(best, std::sqrt(sq));
        }
    }
    return best;
}

inline DatasetStats dataset_stats(const Dataset& data) {
    DatasetStats s;
    s.n = data.size();
    s.m = data.inputs.shape()[1];
    s.d = data.features_per_point();
    s.d_prime = data.labels.cols();
    s.delta = (s.n >= 2) ? min_pairwise_distance(data) : 0.0;
    return s;
}

struct TrainConfig {
    LossKind loss = LossKind::cross_entropy;
    double learning_rate = 0.05;
    std::int64_t batch_size = 8;
    std::int64_t max_iterations = 5000;
    double target_loss = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0.0) throw value_error("TrainConfig: learning rate must be positive");
        if (batch_size < 1) throw value_error("TrainConfig: batch size must be >= 1");
        if (max_iterations < 1) throw value_error("TrainConfig: max iterations must be >= 1");
        if (target_loss <= 0.0) throw value_error("TrainConfig: target loss must be positive");
    }
};

/// Full-dataset training loss before any update (initial_loss) and after
/// each performed update (losses, one entry per iteration).
struct LossCurve {
    double initial_loss = 0.0;
    std::vector<double> losses;
    double final_loss = 0.0;
    std::int64_t iterations = 0;
};

inline void write_loss_curve_csv(std::ostream& out, const LossCurve& curve) {
    char buf[64];
    out << "iteration,loss\n";
    std::snprintf(buf, sizeof buf, "%.12g", curve.initial_loss);
    out << "0," << buf << "\n";
    for (std::size_t i = 0; i < curve.losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", curve.losses[i]);
        out << (i + 1) << "," << buf << "\n";
    }
}

/// One convolutional layer, relu, then a fully connected classifier.
struct CnnModel {
    Tensor4 filters;  // (conv_channels, in_channels, k, k)
    Matrix fc_weights;
    std::vector<double> fc_bias;
    std::int64_t height = 0, width = 0;
};

/// The same network with its convolutional filters produced from code
/// vectors by a single shared generator. The generator may be frozen, in
/// which case only the codes and the classifier train.
struct CnnCsgModel {
    CsgMatrix generator;
    std::vector<CodeVector> codes;
    SliceGrid grid;
    bool freeze_generator = false;
    Matrix fc_weights;
    std::vector<double> fc_bias;
    std::int64_t height = 0, width = 0;
};

struct ModelWidths {
    std::int64_t in_channels = 1;
    std::int64_t height = 8;
    std::int64_t width = 8;
    std::int64_t conv_channels = 8;
    std::int64_t kernel = 3;
    std::int64_t classes = 2;
};

namespace train_detail {

inline void init_uniform(std::vector<double>& v, double bound, Rng& rng) {
    for (double& x : v) x = rng.uniform(-bound, bound);
}

inline double glorot_bound(std::int64_t fan_in, std::int64_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace train_detail

inline CnnModel build_cnn(const ModelWidths& w, std::uint64_t seed) {
    Rng rng(seed);
    CnnModel m;
    m.height = w.height;
    m.width = w.width;
    m.filters = Tensor4({w.conv_channels, w.in_channels, w.kernel, w.kernel});
    train_detail::init_uniform(m.filters.data(),
                               train_detail::glorot_bound(w.in_channels * w.kernel * w.kernel,
                                                          w.conv_channels * w.kernel * w.kernel),
                               rng);
    const std::int64_t flat = w.conv_channels * w.height * w.width;
    m.fc_weights = Matrix(w.classes, flat);
    train_detail::init_uniform(m.fc_weights.data(), train_detail::glorot_bound(flat, w.classes),
                               rng);
    m.fc_bias.assign(static_cast<std::size_t>(w.classes), 0.0);
    return m;
}

/// Model around an existing generator (e.g. a pretrained, frozen one).
/// Codes and classifier are freshly seeded.
inline CnnCsgModel build_cnn_csg(const ModelWidths& w, CsgMatrix generator, std::uint64_t seed,
                                 bool freeze = false) {
    Rng rng(seed);
    rng.next_u64();  // keep the draw sequence aligned with the from-scratch builder
    CnnCsgModel m;
    m.height = w.height;
    m.width = w.width;
    m.freeze_generator = freeze;
    m.grid = make_grid({w.conv_channels, w.in_channels, w.kernel, w.kernel},
                       generator.slice_shape);
    m.codes = init_code_bank(generator.code_size(), m.grid.slice_count(), rng.next_u64());
    m.generator = std::move(generator);
    const std::int64_t flat = w.conv_channels * w.height * w.width;
    m.fc_weights = Matrix(w.classes, flat);
    train_detail::init_uniform(m.fc_weights.data(), train_detail::glorot_bound(flat, w.classes),
                               rng);
    m.fc_bias.assign(static_cast<std::size_t>(w.classes), 0.0);
    return m;
}

inline CnnCsgModel build_cnn_csg(const ModelWidths& w, const SliceShape& slice_shape,
                                 std::int64_t n_c, std::uint64_t seed, bool freeze = false) {
    Rng rng(seed);
    return build_cnn_csg(w, init_csg(slice_shape, n_c, rng.next_u64()), seed, freeze);
}

inline std::int64_t trainable_parameter_count(const CnnModel& m) {
    return m.filters.size() + m.fc_weights.rows() * m.fc_weights.cols() +
           static_cast<std::int64_t>(m.fc_bias.size());
}

/// With a frozen generator this is exactly |codes| + |classifier|.
inline std::int64_t trainable_parameter_count(const CnnCsgModel& m) {
    std::int64_t n = m.fc_weights.rows() * m.fc_weights.cols() +
                     static_cast<std::int64_t>(m.fc_bias.size());
    for (const CodeVector& c : m.codes) n += c.size();
    if (!m.freeze_generator) n += m.generator.parameter_count();
    return n;
}

namespace train_detail {

struct Forward {
    Tensor4 conv_out;
    Tensor4 relu_out;
    Matrix flat;
    Matrix logits;
};

/// Flatten (n, c, h, w) into rows; the per-sample block is already
/// contiguous in row-major order.
inline Matrix flatten(const Tensor4& t) {
    const std::int64_t n = t.shape()[0];
    const std::int64_t per = t.size() / n;
    return Matrix(n, per, t.data());
}

inline Tensor4 unflatten(const Matrix& m, const Shape4& shape) {
    return Tensor4(shape, m.data());
}

inline Forward forward_pass(const Tensor4& filters, const Matrix& fc_w,
                            const std::vector<double>& fc_b, const Tensor4& inputs) {
    Forward f;
    f.conv_out = conv2d_forward(inputs, filters);
    f.relu_out = relu_forward(f.conv_out);
    f.flat = flatten(f.relu_out);
    f.logits = fc_forward(f.flat, fc_w, fc_b);
    return f;
}

struct BackwardResult {
    Tensor4 grad_filters;
    Matrix grad_fc_w;
    std::vector<double> grad_fc_b;
};

inline BackwardResult backward_pass(const Tensor4& filters, const Matrix& fc_w,
                                    const Tensor4& inputs, const Forward& f,
                                    const Matrix& grad_logits) {
    FcGradients fc = fc_backward(f.flat, fc_w, grad_logits);
    Tensor4 grad_relu = unflatten(fc.grad_input, f.relu_out.shape());
    Tensor4 grad_conv = relu_backward(f.conv_out, grad_relu);
    auto [grad_input, grad_filters] = conv2d_backward(inputs, filters, grad_conv);
    (void)grad_input;
    return {std::move(grad_filters), std::move(fc.grad_weights), std::move(fc.grad_bias)};
}

inline Tensor4 gather_batch(const Tensor4& inputs, const std::vector<std::int64_t>& idx) {
    const Shape4& s = inputs.shape();
    Tensor4 out({static_cast<std::int64_t>(idx.size()), s[1], s[2], s[3]});
    const std::int64_t per = s[1] * s[2] * s[3];
    for (std::size_t b = 0; b < idx.size(); ++b) {
        std::copy_n(inputs.data().begin() + idx[b] * per, per,
                    out.data().begin() + static_cast<std::int64_t>(b) * per);
    }
    return out;
}

inline Matrix gather_labels(const Matrix& labels, const std::vector<std::int64_t>& idx) {
    Matrix out(static_cast<std::int64_t>(idx.size()), labels.cols());
    for (std::size_t b = 0; b < idx.size(); ++b)
        for (std::int64_t k = 0; k < labels.cols(); ++k)
            out(static_cast<std::int64_t>(b), k) = labels(idx[b], k);
    return out;
}

inline void axpy(std::vector<double>& x, const std::vector<double>& g, double alpha) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * g[i];
}

/// Refuse to train on identical inputs that carry different labels; the
/// convergence guarantees assume a non-degenerate dataset.
inline void check_non_degenerate(const Dataset& data) {
    const std::int64_t n = data.size();
    const std::int64_t stride = data.inputs.size() / n;
    const auto& v = data.inputs.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + 1; j < n; ++j) {
            bool same_input = true;
            for (std::int64_t k = 0; k < stride && same_input; ++k) {
                same_input = v[static_cast<std::size_t>(i * stride + k)] ==
                             v[static_cast<std::size_t>(j * stride + k)];
            }
            if (!same_input) continue;
            for (std::int64_t k = 0; k < data.labels.cols(); ++k) {
                if (data.labels(i, k) != data.labels(j, k)) {
                    throw value_error("train: degenerate dataset, points " + std::to_string(i) +
                                      " and " + std::to_string(j) +
                                      " are identical with different labels");
                }
            }
        }
    }
}

/// Plain SGD shared by both model variants. `filters_of` materializes the
/// convolution weights; `apply_step` consumes the raw filter gradient plus
/// the classifier gradients.
template <typename FiltersOf, typename ApplyStep>
inline LossCurve sgd_loop(const Dataset& data, const TrainConfig& cfg, const Matrix& fc_w_ref,
                          FiltersOf&& filters_of, ApplyStep&& apply_step,
                          const std::vector<double>& fc_b_ref) {
    cfg.validate();
    check_non_degenerate(data);
    Rng rng(cfg.seed);
    const std::int64_t n = data.size();

    auto full_loss = [&]() {
        const Forward f = forward_pass(filters_of(), fc_w_ref, fc_b_ref, data.inputs);
        return loss_eval(cfg.loss, f.logits, data.labels);
    };

    LossCurve curve;
    curve.initial_loss = full_loss();
    curve.final_loss = curve.initial_loss;
    if (curve.initial_loss <= cfg.target_loss) return curve;

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // forces a reshuffle on first use

    for (std::int64_t it = 0; it < cfg.max_iterations; ++it) {
        // Without-replacement sampling, reshuffled each epoch.
        if (cursor >= order.size()) {
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::swap(order[i], order[rng.below(i + 1)]);
            }
            cursor = 0;
        }
        std::vector<std::int64_t> idx;
        while (idx.size() < static_cast<std::size_t>(cfg.batch_size) && cursor < order.size()) {
            idx.push_back(order[cursor++]);
        }

        const Tensor4 batch_x = gather_batch(data.inputs, idx);
        const Matrix batch_y = gather_labels(data.labels, idx);
        const Tensor4 filters = filters_of();
        const Forward f = forward_pass(filters, fc_w_ref, fc_b_ref, batch_x);
        const Matrix grad_logits = loss_backward(cfg.loss, f.logits, batch_y);
        BackwardResult grads = backward_pass(filters, fc_w_ref, batch_x, f, grad_logits);
        apply_step(grads);

        const double loss = full_loss();
        if (!std::isfinite(loss)) {
            throw numeric_error("train: loss diverged at iteration " + std::to_string(it + 1));
        }
        curve.losses.push_back(loss);
        curve.final_loss = loss;
        curve.iterations = it + 1;
        if (loss <= cfg.target_loss) break;
    }
    return curve;
}

}  // namespace train_detail

inline LossCurve train(CnnModel& model, const Dataset& data, const TrainConfig& cfg) {
    const double lr = cfg.learning_rate;
    return train_detail::sgd_loop(
        data, cfg, model.fc_weights, [&]() -> Tensor4 { return model.filters; },
        [&](const train_detail::BackwardResult& g) {
            train_detail::axpy(model.filters.data(), g.grad_filters.data(), -lr);
            train_detail::axpy(model.fc_weights.data(), g.grad_fc_w.data(), -lr);
            train_detail::axpy(model.fc_bias, g.grad_fc_b, -lr);
        },
        model.fc_bias);
}

inline LossCurve train(CnnCsgModel& model, const Dataset& data, const TrainConfig& cfg) {
    const double lr = cfg.learning_rate;
    return train_detail::sgd_loop(
        data, cfg, model.fc_weights,
        [&]() -> Tensor4 { return generate_filterset(model.generator, model.codes, model.grid); },
        [&](const train_detail::BackwardResult& g) {
            // The filter gradient splits into per-slice upstreams; partition
            // zero-fills beyond fractional extents, which is exactly the
            // gradient of reassembly. Contributions to the shared generator
            // accumulate in slice order.
            auto [grid, upstreams] = partition(g.grad_filters, model.grid.slice_shape);
            (void)grid;
            Matrix grad_gen(model.generator.rows(), model.generator.code_size());
            for (std::size_t i = 0; i < upstreams.size(); ++i) {
                CsgGradients cg = csg_backward(model.generator, model.codes[i], upstreams[i]);
                train_detail::axpy(model.codes[i].values, cg.grad_code, -lr);
                if (!model.freeze_generator) {
                    train_detail::axpy(grad_gen.data(), cg.grad_weights.data(), 1.0);
                }
            }
            if (!model.freeze_generator) {
                train_detail::axpy(model.generator.weights.data(), grad_gen.data(), -lr);
            }
            train_detail::axpy(model.fc_weights.data(), g.grad_fc_w.data(), -lr);
            train_detail::axpy(model.fc_bias, g.grad_fc_b, -lr);
        },
        model.fc_bias);
}

/// Forward pass to logits; used by tests and the divergence check alike.
inline Matrix predict_logits(const CnnModel& m, const Tensor4& inputs) {
    return train_detail::forward_pass(m.filters, m.fc_weights, m.fc_bias, inputs).logits;
}

inline Matrix predict_logits(const CnnCsgModel& m, const Tensor4& inputs) {
    return train_detail::forward_pass(generate_filterset(m.generator, m.codes, m.grid),
                                      m.fc_weights, m.fc_bias, inputs)
        .logits;
}

inline double evaluate_loss(const CnnModel& m, const Tensor4& inputs, const Matrix& labels,
                            LossKind kind) {
    return loss_eval(kind, predict_logits(m, inputs), labels);
}

inline double evaluate_loss(const CnnCsgModel& m, const Tensor4& inputs, const Matrix& labels,
                            LossKind kind) {
    return loss_eval(kind, predict_logits(m, inputs), labels);
}

struct CnnGradients {
    Tensor4 filters;
    Matrix fc_weights;
    std::vector<double> fc_bias;
};

/// Loss gradients for one batch at the current parameters.
inline CnnGradients model_gradients(const CnnModel& m, const Tensor4& inputs,
                                    const Matrix& labels, LossKind kind) {
    const train_detail::Forward f =
        train_detail::forward_pass(m.filters, m.fc_weights, m.fc_bias, inputs);
    const Matrix grad_logits = loss_backward(kind, f.logits, labels);
    train_detail::BackwardResult g =
        train_detail::backward_pass(m.filters, m.fc_weights, inputs, f, grad_logits);
    return {std::move(g.grad_filters), std::move(g.grad_fc_w), std::move(g.grad_fc_b)};
}

struct CnnCsgGradients {
    Matrix generator;
    std::vector<std::vector<double>> codes;
    Matrix fc_weights;
    std::vector<double> fc_bias;
};

/// Gradients flowing through the generated filters into the codes and the
/// shared generator; generator contributions accumulate in slice order.
inline CnnCsgGradients model_gradients(const CnnCsgModel& m, const Tensor4& inputs,
                                       const Matrix& labels, LossKind kind) {
    const Tensor4 filters = generate_filterset(m.generator, m.codes, m.grid);
    const train_detail::Forward f =
        train_detail::forward_pass(filters, m.fc_weights, m.fc_bias, inputs);
    const Matrix grad_logits = loss_backward(kind, f.logits, labels);
    train_detail::BackwardResult g =
        train_detail::backward_pass(filters, m.fc_weights, inputs, f, grad_logits);

    CnnCsgGradients out;
    out.generator = Matrix(m.generator.rows(), m.generator.code_size());
    auto [grid, upstreams] = partition(g.grad_filters, m.grid.slice_shape);
    (void)grid;
    for (std::size_t i = 0; i < upstreams.size(); ++i) {
        CsgGradients cg = csg_backward(m.generator, m.codes[i], upstreams[i]);
        out.codes.push_back(std::move(cg.grad_code));
        train_detail::axpy(out.generator.data(), cg.grad_weights.data(), 1.0);
    }
    out.fc_weights = std::move(g.grad_fc_w);
    out.fc_bias = std::move(g.grad_fc_b);
    return out;
}

/// Compare the two readings of slice generation followed by convolution:
/// (a) convolve with the assembled generated filter set; (b) treat each
/// generator column as a slice placed at its grid position and sum the
/// per-column convolutions weighted by the code coordinates. Returns the
/// maximum absolute deviation between the two outputs.
inline double equivalence_check(const CsgMatrix& g, const std::vector<CodeVector>& codes,
                                const SliceGrid& grid, const Tensor4& input) {
    const Tensor4 assembled = conv2d_forward(input, generate_filterset(g, codes, grid));

    Tensor4 summed(assembled.shape());
    const std::int64_t n_slices = grid.slice_count();
    for (std::int64_t i = 0; i < n_slices; ++i) {
        for (std::int64_t j = 0; j < g.code_size(); ++j) {
            // Basis filter: column j of the generator, devectorized and placed
            // at slice i's block; everywhere else zero.
            std::vector<double> column(static_cast<std::size_t>(g.rows()));
            for (std::int64_t r = 0; r < g.rows(); ++r) column[static_cast<std::size_t>(r)] = g.weights(r, j);
            std::vector<Tensor4> slices;
            slices.reserve(static_cast<std::size_t>(n_slices));
            const Tensor4 zero(g.slice_shape.as_shape());
            for (std::int64_t s = 0; s < n_slices; ++s) {
                slices.push_back(s == i ? devectorize(column, g.slice_shape.as_shape()) : zero);
            }
            const Tensor4 basis = reassemble(grid, slices);
            const Tensor4 contribution = conv2d_forward(input, basis);
            const double coeff = codes[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
            for (std::int64_t k = 0; k < summed.size(); ++k) {
                summed.data()[static_cast<std::size_t>(k)] +=
                    coeff * contribution.data()[static_cast<std::size_t>(k)];
            }
        }
    }

    double dev = 0.0;
    for (std::int64_t k = 0; k < summed.size(); ++k) {
        dev = std::max(dev, std::abs(summed.data()[static_cast<std::size_t>(k)] -
                                     assembled.data()[static_cast<std::size_t>(k)]));
    }
    return dev;
}

/// Dataset from tensor container files: inputs as a rank-4 (n, channels,
/// height, width) tensor, labels as rank-4 (n, label_count, 1, 1).
inline Dataset read_dataset(const std::string& inputs_path, const std::string& labels_path) {
    Dataset data;
    data.inputs = read_tensor_file(inputs_path);
    const Tensor4 labels = read_tensor_file(labels_path);
    if (labels.shape()[2] != 1 || labels.shape()[3] != 1) {
        throw shape_error(labels_path + ": labels must be shaped (n, labels, 1, 1)");
    }
    if (labels.shape()[0] != data.inputs.shape()[0]) {
        throw shape_error("dataset: " + std::to_string(data.inputs.shape()[0]) +
                          " inputs but " + std::to_string(labels.shape()[0]) + " label rows");
    }
    data.labels = Matrix(labels.shape()[0], labels.shape()[1], labels.data());
    return data;
}

inline void write_dataset(const std::string& inputs_path, const std::string& labels_path,
                          const Dataset& data) {
    write_tensor_file(inputs_path, data.inputs);
    write_tensor_file(labels_path,
                      Tensor4({data.labels.rows(), data.labels.cols(), 1, 1}, data.labels.data()));
}

/// Seeded two-class toy set: each class is a bright corner patch plus small
/// noise, linearly separable with positive minimum pairwise distance.
inline Dataset make_separable_dataset(std::int64_t n, std::int64_t height, std::int64_t width,
                                      std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw value_error("make_separable_dataset: n must be even and >= 2");
    Rng rng(seed);
    Dataset data;
    data.inputs = Tensor4({n, 1, height, width});
    data.labels = Matrix(n, 2);
    const std::int64_t ph = std::max<std::int64_t>(1, height / 2);
    const std::int64_t pw = std::max<std::int64_t>(1, width / 2);
    for (std::int64_t s = 0; s < n; ++s) {
        const std::int64_t label = s % 2;
        data.labels(s, label) = 1.0;
        for (std::int64_t i = 0; i < height; ++i) {
            for (std::int64_t j = 0; j < width; ++j) {
                const bool in_patch = (label == 0) ? (i < ph && j < pw)
                                                   : (i >= height - ph && j >= width - pw);
                data.inputs(s, 0, i, j) = (in_patch ? 1.0 : 0.0) + rng.normal(0.0, 0.05);
            }
        }
    }
    return data;
}

}  // namespace csg
