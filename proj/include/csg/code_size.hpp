#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "csg/dct.hpp"
#include "csg/errors.hpp"
#include "csg/slicer.hpp"
#include "csg/tensor.hpp"

namespace csg {

/// Knobs for the compressibility analysis.
struct EstimateConfig {
    SliceShape slice_shape;
    double target_psnr_db = 20.0;
    double tolerance_db = 0.1;  // threshold search convergence, in dB
    double cap_db = 100.0;      // score assigned to (near-)exact reconstructions

    void validate() const {
        if (target_psnr_db <= 0.0) throw value_error("EstimateConfig: target must be positive");
        if (cap_db <= target_psnr_db) {
            throw value_error("EstimateConfig: cap must exceed the target");
        }
        if (tolerance_db <= 0.0) throw value_error("EstimateConfig: tolerance must be positive");
    }
};

/// Per-slice reconstruction scores at one threshold, with corpus means taken
/// in fixed corpus order.
struct PsnrReport {
    std::vector<double> psnr_db;
    std::vector<std::int64_t> retained;
    double mean_psnr_db = 0.0;
    double mean_retained = 0.0;
};

struct CodeSizeEstimate {
    PsnrReport report;
    double threshold = 0.0;
    std::int64_t recommended_nc = 0;  // ceil(mean retained)
    std::int64_t nc18 = 0;            // round(slice elements / 18)
};

/// Min-max map of a slice onto [0,1]. A constant slice maps to all 0.5.
inline Tensor4 rescale01(const Tensor4& slice) {
    const auto [lo_it, hi_it] = std::minmax_element(slice.data().begin(), slice.data().end());
    const double lo = *lo_it, hi = *hi_it;
    Tensor4 out(slice.shape());
    if (hi == lo) {
        std::fill(out.data().begin(), out.data().end(), 0.5);
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::int64_t i = 0; i < slice.size(); ++i) {
        out.data()[static_cast<std::size_t>(i)] =
            (slice.data()[static_cast<std::size_t>(i)] - lo) * inv;
    }
    return out;
}

/// Apply the reference slice's min-max map to another tensor, so original and
/// reconstruction are measured in the same frame. Degenerate (zero-range)
/// references map everything to 0.5, matching rescale01.
inline Tensor4 rescale_like(const Tensor4& t, const Tensor4& reference) {
    if (!t.same_shape(reference)) {
        throw shape_error("rescale_like: shape mismatch " + shape_to_string(t.shape()) + " vs " +
                          shape_to_string(reference.shape()));
    }
    const auto [lo_it, hi_it] =
        std::minmax_element(reference.data().begin(), reference.data().end());
    const double lo = *lo_it, hi = *hi_it;
    Tensor4 out(t.shape());
    if (hi == lo) {
        std::fill(out.data().begin(), out.data().end(), 0.5);
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::int64_t i = 0; i < t.size(); ++i) {
        out.data()[static_cast<std::size_t>(i)] = (t.data()[static_cast<std::size_t>(i)] - lo) * inv;
    }
    return out;
}

/// 10 log10(1 / MSE) on slices already rescaled to [0,1] under a shared map.
/// Returns cap_db when the MSE falls below 10^(-cap/10).
inline double psnr_star(const Tensor4& orig, const Tensor4& approx, double cap_db = 100.0) {
    if (!orig.same_shape(approx)) {
        throw shape_error("psnr_star: shape mismatch " + shape_to_string(orig.shape()) + " vs " +
                          shape_to_string(approx.shape()));
    }
    double sq = 0.0;
    for (std::int64_t i = 0; i < orig.size(); ++i) {
        const double d = orig.data()[static_cast<std::size_t>(i)] -
                         approx.data()[static_cast<std::size_t>(i)];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(orig.size());
    if (mse < std::pow(10.0, -cap_db / 10.0)) return cap_db;
    return 10.0 * std::log10(1.0 / mse);
}

/// Zero every coefficient with |K| < tau; report how many survive.
inline std::pair<DctSpectrum, std::int64_t> prune_spectrum(const DctSpectrum& spec, double tau) {
    if (tau < 0.0) throw value_error("prune_spectrum: threshold must be >= 0");
    DctSpectrum out = spec;
    std::int64_t retained = 0;
    for (double& v : out.coefficients.data()) {
        if (std::abs(v) < tau) {
            v = 0.0;
        } else {
            ++retained;
        }
    }
    return {std::move(out), retained};
}

namespace estimate_detail {

struct PreparedSlice {
    DctSpectrum spectrum;
    Tensor4 rescaled_orig;
    double lo, hi;  // original min/max, the single rescaling frame
};

inline std::vector<PreparedSlice> prepare(const std::vector<Tensor4>& corpus,
                                          const EstimateConfig& cfg) {
    cfg.validate();
    if (corpus.empty()) throw value_error("code-size estimate: empty corpus");
    std::vector<PreparedSlice> prepared;
    prepared.reserve(corpus.size());
    for (const Tensor4& slice : corpus) {
        if (slice.shape() != cfg.slice_shape.as_shape()) {
            throw shape_error("code-size estimate: corpus slice shape " +
                              shape_to_string(slice.shape()) + " does not match configured " +
                              shape_to_string(cfg.slice_shape.as_shape()));
        }
        const auto [lo_it, hi_it] = std::minmax_element(slice.data().begin(), slice.data().end());
        prepared.push_back(
            PreparedSlice{dct4(slice), rescale01(slice), *lo_it, *hi_it});
    }
    return prepared;
}

inline double score_slice(const PreparedSlice& p, double tau, double cap_db) {
    auto [pruned, retained] = prune_spectrum(p.spectrum, tau);
    (void)retained;
    Tensor4 recon = idct4(pruned);
    // Rescale the reconstruction in the original's frame.
    Tensor4 scaled(recon.shape());
    if (p.hi == p.lo) {
        std::fill(scaled.data().begin(), scaled.data().end(), 0.5);
    } else {
        const double inv = 1.0 / (p.hi - p.lo);
        for (std::int64_t i = 0; i < recon.size(); ++i) {
            scaled.data()[static_cast<std::size_t>(i)] =
                (recon.data()[static_cast<std::size_t>(i)] - p.lo) * inv;
        }
    }
    return psnr_star(p.rescaled_orig, scaled, cap_db);
}

inline double mean_psnr(const std::vector<PreparedSlice>& prepared, double tau, double cap_db) {
    double sum = 0.0;
    for (const PreparedSlice& p : prepared) sum += score_slice(p, tau, cap_db);
    return sum / static_cast<double>(prepared.size());
}

inline double max_coefficient_magnitude(const std::vector<PreparedSlice>& prepared) {
    double m = 0.0;
    for (const PreparedSlice& p : prepared) {
        for (double v : p.spectrum.coefficients.data()) m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace estimate_detail

/// Largest pruning threshold whose corpus-mean PSNR* stays at or above the
/// target, found by bisection over [0, max corpus coefficient magnitude].
/// Converges when the bracket's PSNR gap drops to the configured tolerance
/// or after 60 steps.
inline double find_threshold(const std::vector<Tensor4>& corpus, const EstimateConfig& cfg) {
    using namespace estimate_detail;
    const std::vector<PreparedSlice> prepared = prepare(corpus, cfg);

    const double psnr_at_zero = mean_psnr(prepared, 0.0, cfg.cap_db);
    if (psnr_at_zero < cfg.target_psnr_db) {
        throw numeric_error(
            "find_threshold: corpus-mean PSNR* at tau=0 is " + std::to_string(psnr_at_zero) +
            " dB, below the target; the transform round-trip is numerically broken");
    }

    const double upper = max_coefficient_magnitude(prepared);
    if (upper == 0.0) return 0.0;  // all-zero corpus, nothing to prune

    double hi_psnr = mean_psnr(prepared, upper, cfg.cap_db);
    if (hi_psnr >= cfg.target_psnr_db) return upper;  // whole range feasible

    double lo = 0.0, lo_psnr = psnr_at_zero;
    double hi = upper;
    for (int step = 0; step < 60 && (lo_psnr - hi_psnr) > cfg.tolerance_db; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double mid_psnr = mean_psnr(prepared, mid, cfg.cap_db);
        if (mid_psnr >= cfg.target_psnr_db) {
            lo = mid;
            lo_psnr = mid_psnr;
        } else {
            hi = mid;
            hi_psnr = mid_psnr;
        }
    }
    return lo;
}

/// Score every slice at one threshold.
inline PsnrReport corpus_report(const std::vector<Tensor4>& corpus, double tau,
                                const EstimateConfig& cfg) {
    using namespace estimate_detail;
    const std::vector<PreparedSlice> prepared = prepare(corpus, cfg);
    PsnrReport report;
    double psnr_sum = 0.0;
    double retained_sum = 0.0;
    for (const PreparedSlice& p : prepared) {
        const auto [pruned, retained] = prune_spectrum(p.spectrum, tau);
        (void)pruned;
        report.retained.push_back(retained);
        const double psnr = score_slice(p, tau, cfg.cap_db);
        report.psnr_db.push_back(psnr);
        psnr_sum += psnr;
        retained_sum += static_cast<double>(retained);
    }
    report.mean_psnr_db = psnr_sum / static_cast<double>(prepared.size());
    report.mean_retained = retained_sum / static_cast<double>(prepared.size());
    return report;
}

/// Full pipeline: find the threshold, score the corpus at it, and recommend
/// a code size. recommended_nc = ceil(mean retained); nc18 reports the
/// 18x-divisor convention round(elements / 18) alongside.
inline CodeSizeEstimate estimate_code_size(const std::vector<Tensor4>& corpus,
                                           const EstimateConfig& cfg) {
    CodeSizeEstimate est;
    est.threshold = find_threshold(corpus, cfg);
    est.report = corpus_report(corpus, est.threshold, cfg);
    est.recommended_nc =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(est.report.mean_retained)));
    est.nc18 = static_cast<std::int64_t>(
        std::llround(static_cast<double>(cfg.slice_shape.volume()) / 18.0));
    return est;
}

/// CSV report: slice_index, psnr_db, retained rows, then one summary row.
inline void write_psnr_report_csv(std::ostream& out, const PsnrReport& report) {
    char buf[64];
    out << "slice_index,psnr_db,retained\n";
    for (std::size_t i = 0; i < report.psnr_db.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", report.psnr_db[i]);
        out << i << "," << buf << "," << report.retained[i] << "\n";
    }
    std::snprintf(buf, sizeof buf, "%.6f", report.mean_psnr_db);
    out << "mean," << buf << ",";
    std::snprintf(buf, sizeof buf, "%.6f", report.mean_retained);
    out << buf << "\n";
}

}  // namespace csg
