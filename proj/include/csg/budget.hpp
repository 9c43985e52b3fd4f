#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csg/arch.hpp"
#include "csg/errors.hpp"
#include "csg/slicer.hpp"

namespace csg {

/// How a network is slice-generated for budgeting purposes.
struct CsgConfig {
    SliceShape slice_shape;
    std::int64_t n_c = 0;
    bool pretrained_csg = false;  // frozen generator: its weights are not trainable
    bool compress_1x1 = false;    // also generate 1x1 kernels with a second generator

    void validate() const {
        if (n_c < 1) throw value_error("CsgConfig: code size must be >= 1");
        if (slice_shape.volume() < 1) {
            throw value_error("CsgConfig: slice shape must have positive volume");
        }
    }

    /// 1x1 policy: slices of shape (s1, s2, 1, 1) from their own generator,
    /// with code length round(s1 * s2 / 18).
    SliceShape one_by_one_slice_shape() const {
        return SliceShape{{slice_shape.dims[0], slice_shape.dims[1], 1, 1}};
    }
    std::int64_t one_by_one_code_size() const {
        return std::max<std::int64_t>(
            1, std::llround(static_cast<double>(slice_shape.dims[0] * slice_shape.dims[1]) / 18.0));
    }
};

/// Exact parameter decomposition of a slice-generated network: the codes,
/// the generator, and everything else. Trainable total drops the generator
/// when it is pretrained.
struct ParamBudget {
    std::string arch_name;
    std::int64_t original_total = 0;
    std::int64_t o_count = 0;  // untouched parameters
    std::int64_t g_count = 0;  // generator weights (zero contribution when pretrained)
    std::int64_t c_count = 0;  // code-vector parameters
    std::int64_t csg_total = 0;
    bool pretrained = false;
    double ratio = 0.0;  // original_total / csg_total, exact quotient
    std::int64_t original_bytes_f32 = 0;
    std::int64_t csg_bytes_f32 = 0;
    std::vector<std::string> warnings;
};

namespace budget_detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline std::int64_t slice_count_for(const LayerSpec& l, const SliceShape& s) {
    return ceil_div(l.out_channels, s.dims[0]) * ceil_div(l.in_channels, s.dims[1]) *
           ceil_div(l.kernel_h, s.dims[2]) * ceil_div(l.kernel_w, s.dims[3]);
}

}  // namespace budget_detail

inline std::int64_t total_slice_count(const ArchSpec& spec, const SliceShape& slice_shape) {
    std::int64_t n = 0;
    for (const LayerSpec& l : spec.layers) {
        if (l.kind == LayerSpec::Kind::conv && l.csg_eligible) {
            n += budget_detail::slice_count_for(l, slice_shape);
        }
    }
    return n;
}

inline ParamBudget csg_budget(const ArchSpec& spec, const CsgConfig& cfg) {
    cfg.validate();
    ParamBudget b;
    b.arch_name = spec.name;
    b.pretrained = cfg.pretrained_csg;
    b.original_total = count_params(spec);

    std::int64_t replaced_params = 0;
    std::int64_t eligible_layers = 0;
    std::int64_t layers_smaller_than_slice = 0;

    const std::int64_t first_conv = spec.first_conv_index();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind != LayerSpec::Kind::conv) continue;
        if (l.csg_eligible) {
            ++eligible_layers;
            b.c_count += budget_detail::slice_count_for(l, cfg.slice_shape) * cfg.n_c;
            replaced_params += l.params();
            const std::int64_t filter_volume =
                l.out_channels * l.in_channels * l.kernel_h * l.kernel_w;
            if (filter_volume < cfg.slice_shape.volume()) ++layers_smaller_than_slice;
        } else if (cfg.compress_1x1 && l.kernel_h == 1 && l.kernel_w == 1 &&
                   static_cast<std::int64_t>(i) != first_conv) {
            b.c_count += budget_detail::slice_count_for(l, cfg.one_by_one_slice_shape()) *
                         cfg.one_by_one_code_size();
            replaced_params += l.params();
        }
    }

    b.g_count = cfg.slice_shape.volume() * cfg.n_c;
    if (cfg.compress_1x1) {
        b.g_count += cfg.one_by_one_slice_shape().volume() * cfg.one_by_one_code_size();
    }

    if (eligible_layers == 0) {
        b.warnings.push_back("no slice-eligible layer in '" + spec.name + "'");
    } else if (layers_smaller_than_slice == eligible_layers) {
        b.warnings.push_back("slice shape is at least as large as every eligible layer in '" +
                             spec.name + "'; nothing to compress");
    }

    b.o_count = b.original_total - replaced_params;
    b.csg_total = b.o_count + b.c_count + (cfg.pretrained_csg ? 0 : b.g_count);
    b.ratio = static_cast<double>(b.original_total) / static_cast<double>(b.csg_total);
    b.original_bytes_f32 = 4 * b.original_total;
    b.csg_bytes_f32 = 4 * b.csg_total;
    return b;
}

inline double compression_ratio(const ParamBudget& b) { return b.ratio; }

/// Published tables floor their ratios at two decimals in several rows;
/// render the same way, using integer arithmetic so no rounding creeps in.
inline std::string ratio_floor2(std::int64_t original, std::int64_t compressed) {
    if (compressed <= 0) throw value_error("ratio_floor2: non-positive compressed count");
    const std::int64_t hundredths = (original * 100) / compressed;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(hundredths / 100),
                  static_cast<long long>(hundredths % 100));
    return buf;
}

inline std::string ratio_floor2(const ParamBudget& b) {
    return ratio_floor2(b.original_total, b.csg_total);
}

inline std::string format_with_commas(std::int64_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    const std::size_t head = digits.size() % 3 == 0 ? 3 : digits.size() % 3;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (i - head) % 3 == 0 && i >= head) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

inline nlohmann::json to_json(const ParamBudget& b) {
    nlohmann::json j = {{"arch", b.arch_name},
                        {"original_total", b.original_total},
                        {"o_count", b.o_count},
                        {"g_count", b.g_count},
                        {"c_count", b.c_count},
                        {"pretrained_csg", b.pretrained},
                        {"csg_total", b.csg_total},
                        {"ratio", b.ratio},
                        {"ratio_floor2", ratio_floor2(b)},
                        {"original_bytes_f32", b.original_bytes_f32},
                        {"csg_bytes_f32", b.csg_bytes_f32}};
    if (!b.warnings.empty()) j["warnings"] = b.warnings;
    return j;
}

inline void render_budget_table(std::ostream& out, const ParamBudget& b) {
    out << "Network: " << b.arch_name << (b.pretrained ? " (pretrained generator)" : "") << "\n";
    out << "  original # param.   " << format_with_commas(b.original_total) << "\n";
    out << "  |O| untouched       " << format_with_commas(b.o_count) << "\n";
    out << "  |G| generator       " << format_with_commas(b.g_count)
        << (b.pretrained ? "  (frozen, not trainable)" : "") << "\n";
    out << "  |C| codes           " << format_with_commas(b.c_count) << "\n";
    out << "  csg # param.        " << format_with_commas(b.csg_total) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", b.ratio);
    out << "  ratio               " << ratio_floor2(b) << "x (exact " << buf << ")\n";
    out << "  model bytes (f32)   " << format_with_commas(b.original_bytes_f32) << " -> "
        << format_with_commas(b.csg_bytes_f32) << "\n";
}

}  // namespace csg
