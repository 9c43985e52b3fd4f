#pragma once

// Independent reference implementations used only by the tests. These stay
// deliberately naive (direct sums, quadruple loops, dense sweeps) so the
// library paths they check cannot share a bug with them.

#include <cmath>
#include <cstdint>
#include <vector>

#include "csg/code_size.hpp"
#include "csg/dct.hpp"
#include "csg/tensor.hpp"

namespace oracle {

/// Naive triple-loop matrix-vector product.
inline std::vector<double> matvec_naive(const csg::Matrix& a, const std::vector<double>& x) {
    std::vector<double> y(static_cast<std::size_t>(a.rows()), 0.0);
    for (std::int64_t r = 0; r < a.rows(); ++r)
        for (std::int64_t c = 0; c < a.cols(); ++c)
            y[static_cast<std::size_t>(r)] += a(r, c) * x[static_cast<std::size_t>(c)];
    return y;
}

inline double dct_alpha(std::int64_t k, std::int64_t len) {
    return k == 0 ? std::sqrt(1.0 / static_cast<double>(len))
                  : std::sqrt(2.0 / static_cast<double>(len));
}

/// Quadruple-sum DCT-II with orthonormal factors, evaluated directly from
/// the definition: O(N^2) in the element count.
inline csg::Tensor4 dct4_bruteforce(const csg::Tensor4& x) {
    const csg::Shape4& s = x.shape();
    const double pi = 3.14159265358979323846;
    csg::Tensor4 out(s);
    for (std::int64_t u = 0; u < s[0]; ++u)
        for (std::int64_t v = 0; v < s[1]; ++v)
            for (std::int64_t w = 0; w < s[2]; ++w)
                for (std::int64_t t = 0; t < s[3]; ++t) {
                    double sum = 0.0;
                    for (std::int64_t i = 0; i < s[0]; ++i)
                        for (std::int64_t j = 0; j < s[1]; ++j)
                            for (std::int64_t k = 0; k < s[2]; ++k)
                                for (std::int64_t l = 0; l < s[3]; ++l)
                                    sum += x(i, j, k, l) *
                                           std::cos(pi / s[0] * (i + 0.5) * u) *
                                           std::cos(pi / s[1] * (j + 0.5) * v) *
                                           std::cos(pi / s[2] * (k + 0.5) * w) *
                                           std::cos(pi / s[3] * (l + 0.5) * t);
                    out(u, v, w, t) = dct_alpha(u, s[0]) * dct_alpha(v, s[1]) *
                                      dct_alpha(w, s[2]) * dct_alpha(t, s[3]) * sum;
                }
    return out;
}

/// Quadruple-sum inverse with the same orthonormal factors.
inline csg::Tensor4 idct4_bruteforce(const csg::Tensor4& spec) {
    const csg::Shape4& s = spec.shape();
    const double pi = 3.14159265358979323846;
    csg::Tensor4 out(s);
    for (std::int64_t i = 0; i < s[0]; ++i)
        for (std::int64_t j = 0; j < s[1]; ++j)
            for (std::int64_t k = 0; k < s[2]; ++k)
                for (std::int64_t l = 0; l < s[3]; ++l) {
                    double sum = 0.0;
                    for (std::int64_t u = 0; u < s[0]; ++u)
                        for (std::int64_t v = 0; v < s[1]; ++v)
                            for (std::int64_t w = 0; w < s[2]; ++w)
                                for (std::int64_t t = 0; t < s[3]; ++t)
                                    sum += spec(u, v, w, t) * dct_alpha(u, s[0]) *
                                           dct_alpha(v, s[1]) * dct_alpha(w, s[2]) *
                                           dct_alpha(t, s[3]) *
                                           std::cos(pi / s[0] * (i + 0.5) * u) *
                                           std::cos(pi / s[1] * (j + 0.5) * v) *
                                           std::cos(pi / s[2] * (k + 0.5) * w) *
                                           std::cos(pi / s[3] * (l + 0.5) * t);
                    out(i, j, k, l) = sum;
                }
    return out;
}

/// Central finite difference of eval() with respect to one stored scalar.
template <typename Eval>
inline double central_diff(double& coord, Eval&& eval, double step = 1e-6) {
    const double orig = coord;
    coord = orig + step;
    const double hi = eval();
    coord = orig - step;
    const double lo = eval();
    coord = orig;
    return (hi - lo) / (2.0 * step);
}

/// Mixed relative/absolute gradient agreement: relative where the gradient
/// is O(1) or larger, absolute below that.
inline double grad_discrepancy(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
    return std::abs(analytic - numeric) / denom;
}

struct SweepPoint {
    double tau;
    double mean_psnr;
    double mean_retained;
};

/// Dense threshold sweep over [0, max coefficient magnitude]: the reference
/// for monotonicity and for "largest feasible threshold" claims.
inline std::vector<SweepPoint> threshold_sweep(const std::vector<csg::Tensor4>& corpus,
                                               const csg::EstimateConfig& cfg, int points) {
    std::vector<csg::DctSpectrum> spectra;
    double upper = 0.0;
    for (const csg::Tensor4& s : corpus) {
        spectra.push_back(csg::dct4(s));
        for (double v : spectra.back().coefficients.data()) upper = std::max(upper, std::abs(v));
    }
    std::vector<SweepPoint> sweep;
    for (int p = 0; p < points; ++p) {
        const double tau = upper * static_cast<double>(p) / static_cast<double>(points - 1);
        double psnr_sum = 0.0, retained_sum = 0.0;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            auto [pruned, retained] = csg::prune_spectrum(spectra[i], tau);
            const csg::Tensor4 recon = csg::idct4(pruned);
            psnr_sum += csg::psnr_star(csg::rescale01(corpus[i]),
                                       csg::rescale_like(recon, corpus[i]), cfg.cap_db);
            retained_sum += static_cast<double>(retained);
        }
        sweep.push_back({tau, psnr_sum / static_cast<double>(corpus.size()),
                         retained_sum / static_cast<double>(corpus.size())});
    }
    return sweep;
}

}  // namespace oracle
