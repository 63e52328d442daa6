#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "relume/core/serialize.hpp"
#include "relume/imaging/image.hpp"
#include "relume/tad/tad.hpp"

namespace relume::metrics {

// ---------------------------------------------------------------------------
// PSNR

// peak signal-to-noise ratio against a [0,1] peak; identical inputs hit the
// +infinity sentinel
inline double psnr(const imaging::ImageTensor& a, const imaging::ImageTensor& b) {
    if (a.range != imaging::Range::Unit || b.range != imaging::Range::Unit)
        throw ArgumentError("psnr: inputs must be in [0,1]");
    if (!(a.data.shape() == b.data.shape())) throw ArgumentError("psnr: shape mismatch");
    double mse = 0;
    for (std::int64_t i = 0; i < a.data.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// ---------------------------------------------------------------------------
// SSIM

namespace detail {

// separable valid-mode correlation with a normalized 1-D kernel
inline std::vector<double> window_filter(const std::vector<double>& img, int h, int w,
                                         const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size());
    const int ow = w - r + 1;
    std::vector<double> rows(static_cast<size_t>(h) * ow);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < ow; ++j) {
            double s = 0;
            for (int k = 0; k < r; ++k) s += taps[k] * img[static_cast<size_t>(i) * w + j + k];
            rows[static_cast<size_t>(i) * ow + j] = s;
        }
    const int oh = h - r + 1;
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double s = 0;
            for (int k = 0; k < r; ++k) s += taps[k] * rows[static_cast<size_t>(i + k) * ow + j];
            out[static_cast<size_t>(i) * ow + j] = s;
        }
    return out;
}

inline std::vector<double> luma_vec(const imaging::ImageTensor& img) {
    Tensor<float> y =
        img.color_space == imaging::ColorSpace::Luma ? img.data : imaging::luma_plane(img.data);
    std::vector<double> out(static_cast<size_t>(y.numel()));
    for (std::int64_t i = 0; i < y.numel(); ++i) out[static_cast<size_t>(i)] = y[i];
    return out;
}

} // namespace detail

// structural similarity on luma: 11x11 Gaussian window (sigma 1.5),
// C1 = 0.01^2, C2 = 0.03^2, mean of the local map
inline double ssim(const imaging::ImageTensor& a, const imaging::ImageTensor& b) {
    if (a.range != imaging::Range::Unit || b.range != imaging::Range::Unit)
        throw ArgumentError("ssim: inputs must be in [0,1]");
    if (!(a.data.shape() == b.data.shape())) throw ArgumentError("ssim: shape mismatch");
    const int h = static_cast<int>(a.data.shape()[1]);
    const int w = static_cast<int>(a.data.shape()[2]);
    if (h < 11 || w < 11) throw ArgumentError("ssim: image smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    Tensor<double> taps_t = imaging::gaussian_taps<double>(1.5, 5);
    std::vector<double> taps(taps_t.data(), taps_t.data() + 11);
    std::vector<double> x = detail::luma_vec(a), y = detail::luma_vec(b);
    const size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    auto mu1 = detail::window_filter(x, h, w, taps);
    auto mu2 = detail::window_filter(y, h, w, taps);
    auto exx = detail::window_filter(xx, h, w, taps);
    auto eyy = detail::window_filter(yy, h, w, taps);
    auto exy = detail::window_filter(xy, h, w, taps);
    double acc = 0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double s1 = exx[i] - m1 * m1;
        const double s2 = eyy[i] - m2 * m2;
        const double s12 = exy[i] - m1 * m2;
        acc += ((2 * m1 * m2 + c1) * (2 * s12 + c2)) / ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
    }
    return acc / static_cast<double>(mu1.size());
}

// ---------------------------------------------------------------------------
// LOE

namespace detail {

// order-preserving reduction: point sampling keeps each output value equal to
// some input value, so monotone remappings of the input stay monotone here
inline std::vector<double> loe_luma_grid(const imaging::ImageTensor& img, int& oh, int& ow) {
    Tensor<float> y =
        img.color_space == imaging::ColorSpace::Luma ? img.data : imaging::luma_plane(img.data);
    const int h = static_cast<int>(y.shape()[1]);
    const int w = static_cast<int>(y.shape()[2]);
    oh = std::min(h, 50);
    ow = std::min(w, 50);
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            const int si = static_cast<int>((static_cast<std::int64_t>(i) * h) / oh);
            const int sj = static_cast<int>((static_cast<std::int64_t>(j) * w) / ow);
            out[static_cast<size_t>(i) * ow + j] = y.at(0, si, sj);
        }
    return out;
}

} // namespace detail

// lightness-order error: mean fraction of pixel pairs whose brightness
// ordering differs between the enhanced image and the original, scaled by
// 1000; both lumas are point-sampled down to at most 50x50 first
inline double loe(const imaging::ImageTensor& enhanced, const imaging::ImageTensor& original) {
    if (!(enhanced.data.shape()[1] == original.data.shape()[1] &&
          enhanced.data.shape()[2] == original.data.shape()[2]))
        throw ArgumentError("loe: spatial shape mismatch");
    int oh = 0, ow = 0, oh2 = 0, ow2 = 0;
    std::vector<double> e = detail::loe_luma_grid(enhanced, oh, ow);
    std::vector<double> o = detail::loe_luma_grid(original, oh2, ow2);
    const std::int64_t m = static_cast<std::int64_t>(e.size());
    if (m < 2) return 0.0;
    double acc = 0;
    for (std::int64_t i = 0; i < m; ++i) {
        std::int64_t flips = 0;
        for (std::int64_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const bool u = o[static_cast<size_t>(i)] >= o[static_cast<size_t>(j)];
            const bool v = e[static_cast<size_t>(i)] >= e[static_cast<size_t>(j)];
            flips += (u != v);
        }
        acc += static_cast<double>(flips) / static_cast<double>(m - 1);
    }
    return 1000.0 * acc / static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// NIQE
//
// Natural-scene statistics: mean-subtracted contrast-normalized (MSCN)
// coefficients and their pairwise products, fit with (asymmetric)
// generalized Gaussians at two scales; 18 features per scale. The score is
// the Mahalanobis distance to a pristine model (mean + covariance) shipped
// as a data file. Absolute values are not comparable across NIQE variants.

inline constexpr int kNiqeDim = 36;
inline constexpr char kNiqeMagic[8] = {'R', 'L', 'M', 'N', 'I', 'Q', 'E', '1'};

struct NiqeModel {
    Tensor<double> mean; // (36)
    Tensor<double> cov;  // (36,36)
};

inline void save_niqe_model(const std::string& path, const NiqeModel& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write NIQE model: " + path);
    os.write(kNiqeMagic, sizeof(kNiqeMagic));
    write_u64(os, 1);
    write_tensor(os, model.mean);
    write_tensor(os, model.cov);
    if (!os) throw IoError("short write on NIQE model: " + path);
}

inline NiqeModel load_niqe_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("NIQE pristine model file missing: " + path);
    char magic[8] = {};
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kNiqeMagic, sizeof(magic)) != 0)
        throw FormatError("not a NIQE model file: " + path);
    if (read_u64(is) != 1) throw FormatError("unsupported NIQE model version");
    NiqeModel m;
    m.mean = read_tensor<double>(is);
    m.cov = read_tensor<double>(is);
    if (!is) throw FormatError("NIQE model truncated: " + path);
    if (m.mean.shape() != Shape{kNiqeDim} || m.cov.shape() != (Shape{kNiqeDim, kNiqeDim}))
        throw FormatError("NIQE model has wrong dimensions");
    return m;
}

namespace detail {

// ratio r(alpha) = gamma(2/a)^2 / (gamma(1/a) gamma(3/a)), precomputed on the
// standard alpha grid; both GGD and AGGD fits invert it by nearest match
struct AlphaTable {
    std::vector<double> alpha, ratio;
    AlphaTable() {
        for (double a = 0.2; a <= 10.0 + 1e-12; a += 0.001) {
            alpha.push_back(a);
            const double g1 = std::tgamma(1.0 / a), g2 = std::tgamma(2.0 / a),
                         g3 = std::tgamma(3.0 / a);
            ratio.push_back(g2 * g2 / (g1 * g3));
        }
    }
    double lookup(double target) const {
        size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < ratio.size(); ++i) {
            const double d = std::abs(ratio[i] - target);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return alpha[best];
    }
};

inline const AlphaTable& alpha_table() {
    static const AlphaTable t;
    return t;
}

// symmetric generalized Gaussian: returns (alpha, variance)
inline void fit_ggd(const std::vector<double>& x, double& alpha, double& sigma_sq) {
    double m2 = 0, m1 = 0;
    for (double v : x) {
        m2 += v * v;
        m1 += std::abs(v);
    }
    m2 /= static_cast<double>(x.size());
    m1 /= static_cast<double>(x.size());
    sigma_sq = m2;
    const double rho = m2 > 0 ? (m1 * m1) / m2 : 1.0;
    alpha = alpha_table().lookup(rho);
}

// asymmetric generalized Gaussian: returns (alpha, eta, sigma_l^2, sigma_r^2)
inline void fit_aggd(const std::vector<double>& x, double& alpha, double& eta, double& sl_sq,
                     double& sr_sq) {
    double l2 = 0, r2 = 0, m1 = 0, m2 = 0;
    std::int64_t ln = 0, rn = 0;
    for (double v : x) {
        if (v < 0) {
            l2 += v * v;
            ++ln;
        } else {
            r2 += v * v;
            ++rn;
        }
        m1 += std::abs(v);
        m2 += v * v;
    }
    const double n = static_cast<double>(x.size());
    sl_sq = ln > 0 ? l2 / static_cast<double>(ln) : 0.0;
    sr_sq = rn > 0 ? r2 / static_cast<double>(rn) : 0.0;
    m1 /= n;
    m2 /= n;
    const double sl = std::sqrt(sl_sq), sr = std::sqrt(sr_sq);
    const double g = sr > 0 ? sl / sr : 1.0;
    const double r_hat = m2 > 0 ? (m1 * m1) / m2 : 1.0;
    const double rr = r_hat * (g * g * g + 1.0) * (g + 1.0) /
                      ((g * g + 1.0) * (g * g + 1.0));
    alpha = alpha_table().lookup(rr);
    eta = (sr - sl) * std::tgamma(2.0 / alpha) / std::tgamma(1.0 / alpha);
}

// MSCN transform of a [0,255] luma plane: 7x7 Gaussian local mean and
// deviation, unit-offset normalization
inline std::vector<double> mscn(const std::vector<double>& y, int h, int w) {
    Tensor<double> taps_t = imaging::gaussian_taps<double>(7.0 / 6.0, 3);
    const int r = 3;
    auto blur = [&](const std::vector<double>& img) {
        // replicate-edge separable filtering at full size
        std::vector<double> rows(img.size()), out(img.size());
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double s = 0;
                for (int k = -r; k <= r; ++k) {
                    const int jj = std::clamp(j + k, 0, w - 1);
                    s += taps_t[k + r] * img[static_cast<size_t>(i) * w + jj];
                }
                rows[static_cast<size_t>(i) * w + j] = s;
            }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double s = 0;
                for (int k = -r; k <= r; ++k) {
                    const int ii = std::clamp(i + k, 0, h - 1);
                    s += taps_t[k + r] * rows[static_cast<size_t>(ii) * w + j];
                }
                out[static_cast<size_t>(i) * w + j] = s;
            }
        return out;
    };
    std::vector<double> sq(y.size());
    for (size_t i = 0; i < y.size(); ++i) sq[i] = y[i] * y[i];
    std::vector<double> mu = blur(y), musq = blur(sq);
    std::vector<double> out(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const double var = std::abs(musq[i] - mu[i] * mu[i]);
        out[i] = (y[i] - mu[i]) / (std::sqrt(var) + 1.0);
    }
    return out;
}

// 18 NSS features of one scale
inline void scale_features(const std::vector<double>& y, int h, int w, std::vector<double>& out) {
    std::vector<double> m = mscn(y, h, w);
    double alpha = 0, sigma_sq = 0;
    fit_ggd(m, alpha, sigma_sq);
    out.push_back(alpha);
    out.push_back(sigma_sq);
    // pairwise products: horizontal, vertical, main diagonal, anti-diagonal
    const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (const auto& d : dirs) {
        std::vector<double> prod;
        prod.reserve(m.size());
        for (int i = 0; i + d[0] < h; ++i)
            for (int j = std::max(0, -d[1]); j + d[1] < w && j < w; ++j)
                prod.push_back(m[static_cast<size_t>(i) * w + j] *
                               m[static_cast<size_t>(i + d[0]) * w + (j + d[1])]);
        double a = 0, eta = 0, sl = 0, sr = 0;
        fit_aggd(prod, a, eta, sl, sr);
        out.push_back(a);
        out.push_back(eta);
        out.push_back(sl);
        out.push_back(sr);
    }
}

} // namespace detail

// 36-dimensional NSS feature vector (two scales)
inline std::vector<double> niqe_features(const imaging::ImageTensor& img) {
    if (img.range != imaging::Range::Unit) throw ArgumentError("niqe: input must be in [0,1]");
    Tensor<float> yt =
        img.color_space == imaging::ColorSpace::Luma ? img.data : imaging::luma_plane(img.data);
    const int h = static_cast<int>(yt.shape()[1]);
    const int w = static_cast<int>(yt.shape()[2]);
    if (h < 96 || w < 96) throw ArgumentError("niqe: image must be at least 96x96");
    std::vector<double> features;
    features.reserve(kNiqeDim);
    std::vector<double> y(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < y.size(); ++i) y[i] = 255.0 * static_cast<double>(yt[static_cast<std::int64_t>(i)]);
    detail::scale_features(y, h, w, features);
    Tensor<float> half = imaging::bilinear_resize(yt, h / 2, w / 2);
    std::vector<double> y2(static_cast<size_t>(half.numel()));
    for (size_t i = 0; i < y2.size(); ++i)
        y2[i] = 255.0 * static_cast<double>(half[static_cast<std::int64_t>(i)]);
    detail::scale_features(y2, h / 2, w / 2, features);
    return features;
}

// Mahalanobis distance from the pristine model
inline double niqe_from_features(const std::vector<double>& f, const NiqeModel& model) {
    if (static_cast<int>(f.size()) != kNiqeDim)
        throw ArgumentError("niqe: feature vector must have 36 entries");
    Eigen::VectorXd d(kNiqeDim);
    for (int i = 0; i < kNiqeDim; ++i) d[i] = f[static_cast<size_t>(i)] - model.mean[i];
    Eigen::MatrixXd cov(kNiqeDim, kNiqeDim);
    for (int i = 0; i < kNiqeDim; ++i)
        for (int j = 0; j < kNiqeDim; ++j)
            cov(i, j) = model.cov[static_cast<std::int64_t>(i) * kNiqeDim + j];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericError("niqe: pristine covariance is not positive definite");
    const double q = d.dot(llt.solve(d));
    return std::sqrt(std::max(0.0, q));
}

inline double niqe(const imaging::ImageTensor& img, const NiqeModel& model) {
    return niqe_from_features(niqe_features(img), model);
}

// ---------------------------------------------------------------------------
// semantic score

// softmax over the two prompt similarities at logit scale tau; returns the
// probability assigned to the high-light prompt
inline double semantic_score(const imaging::ImageTensor& img,
                             const tad::VlBackend<float>& backend,
                             const tad::PromptPair<float>& prompts, double tau = 100.0) {
    // embeddings are measured in the signed range the backend trains on
    const imaging::ImageTensor s =
        img.range == imaging::Range::Unit ? imaging::to_signed(img) : img;
    const double d_high = tad::cosine_discrepancy(s, backend, prompts.emb_high);
    const double d_low = tad::cosine_discrepancy(s, backend, prompts.emb_low);
    // stable two-way softmax
    return 1.0 / (1.0 + std::exp(tau * (d_low - d_high)));
}

// ---------------------------------------------------------------------------
// reporting

struct MetricRow {
    std::string name;
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
    double loe = std::numeric_limits<double>::quiet_NaN();
    double niqe = std::numeric_limits<double>::quiet_NaN();
    double semantic = std::numeric_limits<double>::quiet_NaN();
};

struct MetricReport {
    std::vector<MetricRow> rows;
    MetricRow mean; // unweighted arithmetic mean, name "mean"
};

// corpus means are plain arithmetic means of the per-image values
inline MetricReport assemble_report(std::vector<MetricRow> rows) {
    MetricReport rep;
    rep.rows = std::move(rows);
    rep.mean.name = "mean";
    if (rep.rows.empty()) return rep;
    double p = 0, s = 0, l = 0, n = 0, m = 0;
    for (const MetricRow& r : rep.rows) {
        p += r.psnr;
        s += r.ssim;
        l += r.loe;
        n += r.niqe;
        m += r.semantic;
    }
    const double cnt = static_cast<double>(rep.rows.size());
    rep.mean.psnr = p / cnt;
    rep.mean.ssim = s / cnt;
    rep.mean.loe = l / cnt;
    rep.mean.niqe = n / cnt;
    rep.mean.semantic = m / cnt;
    return rep;
}

inline void write_csv(std::ostream& os, const MetricReport& rep) {
    os << "name,psnr,ssim,loe,niqe,semantic_score\n";
    auto row = [&os](const MetricRow& r) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.name.c_str(), r.psnr,
                      r.ssim, r.loe, r.niqe, r.semantic);
        os << buf;
    };
    for (const MetricRow& r : rep.rows) row(r);
    row(rep.mean);
}

} // namespace relume::metrics
