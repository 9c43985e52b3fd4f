#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csg/errors.hpp"

namespace csg {

/// One parameterized layer of an architecture inventory.
///
/// Counting conventions, fixed by reconciling the published totals:
/// convolutions carry no bias, every convolution is followed by an affine
/// batchnorm (2 parameters per channel, running statistics not counted),
/// fully connected layers carry a bias, and shortcut downsampling in the
/// CIFAR ResNets is parameter-free.
struct LayerSpec {
    enum class Kind { conv, fc, batchnorm };

    Kind kind = Kind::conv;
    // conv
    std::int64_t out_channels = 0;
    std::int64_t in_channels = 0;
    std::int64_t kernel_h = 0;
    std::int64_t kernel_w = 0;
    bool has_bias = false;
    bool csg_eligible = false;
    // fc
    std::int64_t out_features = 0;
    std::int64_t in_features = 0;
    // batchnorm
    std::int64_t channels = 0;

    static LayerSpec conv(std::int64_t out, std::int64_t in, std::int64_t kh, std::int64_t kw,
                          bool eligible, bool bias = false) {
        LayerSpec l;
        l.kind = Kind::conv;
        l.out_channels = out;
        l.in_channels = in;
        l.kernel_h = kh;
        l.kernel_w = kw;
        l.csg_eligible = eligible;
        l.has_bias = bias;
        return l;
    }

    static LayerSpec fc(std::int64_t out, std::int64_t in, bool bias = true) {
        LayerSpec l;
        l.kind = Kind::fc;
        l.out_features = out;
        l.in_features = in;
        l.has_bias = bias;
        return l;
    }

    static LayerSpec batchnorm(std::int64_t ch) {
        LayerSpec l;
        l.kind = Kind::batchnorm;
        l.channels = ch;
        return l;
    }

    std::int64_t params() const {
        switch (kind) {
            case Kind::conv:
                return out_channels * in_channels * kernel_h * kernel_w +
                       (has_bias ? out_channels : 0);
            case Kind::fc:
                return out_features * in_features + (has_bias ? out_features : 0);
            case Kind::batchnorm:
                return 2 * channels;
        }
        return 0;
    }
};

/// Ordered layer inventory of one network.
struct ArchSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::string notes;

    /// Index of the first convolutional layer; it is never slice-generated.
    std::int64_t first_conv_index() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].kind == LayerSpec::Kind::conv) return static_cast<std::int64_t>(i);
        }
        return -1;
    }

    void validate() const {
        if (layers.empty()) throw value_error("ArchSpec '" + name + "': no layers");
        const std::int64_t first = first_conv_index();
        if (first < 0) throw value_error("ArchSpec '" + name + "': no convolutional layer");
        if (layers[static_cast<std::size_t>(first)].csg_eligible) {
            throw value_error("ArchSpec '" + name +
                              "': the first convolutional layer cannot be slice-generated");
        }
        for (const LayerSpec& l : layers) {
            switch (l.kind) {
                case LayerSpec::Kind::conv:
                    if (l.out_channels <= 0 || l.in_channels <= 0 || l.kernel_h <= 0 ||
                        l.kernel_w <= 0) {
                        throw value_error("ArchSpec '" + name + "': non-positive conv dimension");
                    }
                    break;
                case LayerSpec::Kind::fc:
                    if (l.out_features <= 0 || l.in_features <= 0) {
                        throw value_error("ArchSpec '" + name + "': non-positive fc dimension");
                    }
                    break;
                case LayerSpec::Kind::batchnorm:
                    if (l.channels <= 0) {
                        throw value_error("ArchSpec '" + name + "': non-positive batchnorm size");
                    }
                    break;
            }
        }
    }
};

inline std::int64_t count_params(const ArchSpec& spec) {
    spec.validate();
    std::int64_t total = 0;
    for (const LayerSpec& l : spec.layers) total += l.params();
    return total;
}

/// He-style CIFAR ResNet: 3x3 stem to 16 channels, three stages of
/// (n - 2) / 6 basic blocks at widths 16/32/64, parameter-free identity
/// shortcuts, and a 10-way classifier.
inline ArchSpec resnet_cifar(std::int64_t n_layers) {
    if (n_layers < 8 || (n_layers - 2) % 6 != 0) {
        throw value_error("resnet_cifar: depth must satisfy (n - 2) divisible by 6, got " +
                          std::to_string(n_layers));
    }
    const std::int64_t blocks = (n_layers - 2) / 6;
    ArchSpec spec;
    spec.name = "resnet" + std::to_string(n_layers);

    spec.layers.push_back(LayerSpec::conv(16, 3, 3, 3, /*eligible=*/false));
    spec.layers.push_back(LayerSpec::batchnorm(16));

    std::int64_t in = 16;
    for (std::int64_t stage = 0; stage < 3; ++stage) {
        const std::int64_t width = 16 << stage;
        for (std::int64_t b = 0; b < blocks; ++b) {
            spec.layers.push_back(LayerSpec::conv(width, in, 3, 3, /*eligible=*/true));
            spec.layers.push_back(LayerSpec::batchnorm(width));
            spec.layers.push_back(LayerSpec::conv(width, width, 3, 3, /*eligible=*/true));
            spec.layers.push_back(LayerSpec::batchnorm(width));
            in = width;
        }
    }
    spec.layers.push_back(LayerSpec::fc(10, 64));
    spec.validate();
    return spec;
}

/// Standard ImageNet ResNet-18 (basic blocks) or ResNet-50 (bottlenecks)
/// with projection shortcuts and a 1000-way classifier.
inline ArchSpec resnet_imagenet(std::int64_t depth) {
    if (depth != 18 && depth != 50) {
        throw value_error("resnet_imagenet: supported depths are 18 and 50, got " +
                          std::to_string(depth));
    }
    ArchSpec spec;
    spec.name = "resnet" + std::to_string(depth);
    spec.layers.push_back(LayerSpec::conv(64, 3, 7, 7, /*eligible=*/false));
    spec.layers.push_back(LayerSpec::batchnorm(64));

    const std::int64_t stage_blocks_18[4] = {2, 2, 2, 2};
    const std::int64_t stage_blocks_50[4] = {3, 4, 6, 3};
    const std::int64_t* stage_blocks = (depth == 18) ? stage_blocks_18 : stage_blocks_50;
    const std::int64_t expansion = (depth == 18) ? 1 : 4;

    std::int64_t in = 64;
    for (int stage = 0; stage < 4; ++stage) {
        const std::int64_t mid = 64 << stage;
        const std::int64_t out = mid * expansion;
        for (std::int64_t b = 0; b < stage_blocks[stage]; ++b) {
            if (depth == 18) {
                spec.layers.push_back(LayerSpec::conv(mid, in, 3, 3, /*eligible=*/true));
                spec.layers.push_back(LayerSpec::batchnorm(mid));
                spec.layers.push_back(LayerSpec::conv(mid, mid, 3, 3, /*eligible=*/true));
                spec.layers.push_back(LayerSpec::batchnorm(mid));
            } else {
                spec.layers.push_back(LayerSpec::conv(mid, in, 1, 1, /*eligible=*/false));
                spec.layers.push_back(LayerSpec::batchnorm(mid));
                spec.layers.push_back(LayerSpec::conv(mid, mid, 3, 3, /*eligible=*/true));
                spec.layers.push_back(LayerSpec::batchnorm(mid));
                spec.layers.push_back(LayerSpec::conv(out, mid, 1, 1, /*eligible=*/false));
                spec.layers.push_back(LayerSpec::batchnorm(out));
            }
            if (b == 0 && in != out) {  // projection shortcut
                spec.layers.push_back(LayerSpec::conv(out, in, 1, 1, /*eligible=*/false));
                spec.layers.push_back(LayerSpec::batchnorm(out));
            }
            in = out;
        }
    }
    spec.layers.push_back(LayerSpec::fc(1000, in));
    spec.validate();
    return spec;
}

/// DenseNet-BC for CIFAR: bottleneck layers, transition compression theta,
/// depth L, growth rate K, stem to 2K channels.
inline ArchSpec densenet_bc(std::int64_t depth, std::int64_t growth, double theta) {
    if (depth < 10 || (depth - 4) % 6 != 0) {
        throw value_error("densenet_bc: depth must satisfy (L - 4) divisible by 6, got " +
                          std::to_string(depth));
    }
    if (growth < 1) throw value_error("densenet_bc: growth rate must be positive");
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw value_error("densenet_bc: compression factor must lie in (0, 1]");
    }
    const std::int64_t per_block = (depth - 4) / 6;
    ArchSpec spec;
    spec.name = "densenet-bc-" + std::to_string(depth) + "-" + std::to_string(growth);
    {
        char note[48];
        std::snprintf(note, sizeof note, "theta=%.2f", theta);
        spec.notes = note;
    }

    std::int64_t in = 2 * growth;
    spec.layers.push_back(LayerSpec::conv(in, 3, 3, 3, /*eligible=*/false));

    for (int block = 0; block < 3; ++block) {
        for (std::int64_t l = 0; l < per_block; ++l) {
            spec.layers.push_back(LayerSpec::batchnorm(in));
            spec.layers.push_back(LayerSpec::conv(4 * growth, in, 1, 1, /*eligible=*/false));
            spec.layers.push_back(LayerSpec::batchnorm(4 * growth));
            spec.layers.push_back(LayerSpec::conv(growth, 4 * growth, 3, 3, /*eligible=*/true));
            in += growth;
        }
        if (block < 2) {  // transition
            const std::int64_t compressed =
                static_cast<std::int64_t>(theta * static_cast<double>(in));
            spec.layers.push_back(LayerSpec::batchnorm(in));
            spec.layers.push_back(LayerSpec::conv(compressed, in, 1, 1, /*eligible=*/false));
            in = compressed;
        }
    }
    spec.layers.push_back(LayerSpec::batchnorm(in));
    spec.layers.push_back(LayerSpec::fc(10, in));
    spec.validate();
    return spec;
}

// ---- JSON serialization -----------------------------------------------

inline nlohmann::json to_json(const LayerSpec& l) {
    nlohmann::json j;
    switch (l.kind) {
        case LayerSpec::Kind::conv:
            j = {{"kind", "conv"},         {"out", l.out_channels},
                 {"in", l.in_channels},    {"kernel_h", l.kernel_h},
                 {"kernel_w", l.kernel_w}, {"bias", l.has_bias},
                 {"csg_eligible", l.csg_eligible}};
            break;
        case LayerSpec::Kind::fc:
            j = {{"kind", "fc"}, {"out", l.out_features}, {"in", l.in_features},
                 {"bias", l.has_bias}};
            break;
        case LayerSpec::Kind::batchnorm:
            j = {{"kind", "batchnorm"}, {"channels", l.channels}};
            break;
    }
    return j;
}

inline nlohmann::json to_json(const ArchSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& l : spec.layers) layers.push_back(to_json(l));
    nlohmann::json j = {{"name", spec.name}, {"layers", layers}};
    if (!spec.notes.empty()) j["notes"] = spec.notes;
    return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv") {
        return LayerSpec::conv(j.at("out").get<std::int64_t>(), j.at("in").get<std::int64_t>(),
                               j.at("kernel_h").get<std::int64_t>(),
                               j.at("kernel_w").get<std::int64_t>(),
                               j.value("csg_eligible", false), j.value("bias", false));
    }
    if (kind == "fc") {
        return LayerSpec::fc(j.at("out").get<std::int64_t>(), j.at("in").get<std::int64_t>(),
                             j.value("bias", true));
    }
    if (kind == "batchnorm") {
        return LayerSpec::batchnorm(j.at("channels").get<std::int64_t>());
    }
    throw io_error("ArchSpec JSON: unknown layer kind '" + kind + "'");
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
    ArchSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.notes = j.value("notes", "");
    for (const nlohmann::json& lj : j.at("layers")) spec.layers.push_back(layer_from_json(lj));
    spec.validate();
    return spec;
}

inline ArchSpec load_arch_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
        return arch_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path + ": " + e.what());
    }
}

inline void save_arch_file(const std::string& path, const ArchSpec& spec) {
    std::ofstream out(path);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << to_json(spec).dump(2) << "\n";
}

}  // namespace csg
