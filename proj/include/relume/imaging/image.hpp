#pragma once

#include <cmath>
#include <string>

#include "relume/core/autograd.hpp"
#include "relume/core/tensor.hpp"

namespace relume::imaging {

enum class Range { Unit, Signed, Unbounded }; // [0,1], [-1,1], no tag
enum class ColorSpace { Rgb, Luma };

// Planar (C,H,W) float image with an explicit range declaration. Conversions
// between ranges are spelled out; nothing rescales silently.
struct ImageTensor {
    Tensor<float> data;
    Range range = Range::Unit;
    ColorSpace color_space = ColorSpace::Rgb;

    ImageTensor() = default;
    ImageTensor(Tensor<float> d, Range r, ColorSpace cs)
        : data(std::move(d)), range(r), color_space(cs) {
        if (data.shape().rank() != 3)
            throw ArgumentError("ImageTensor: expected (C,H,W), got " + data.shape().str());
        const int c = data.shape()[0];
        if (c != 1 && c != 3) throw ArgumentError("ImageTensor: C must be 1 or 3");
        if (cs == ColorSpace::Rgb && c != 3) throw TypeError("ImageTensor: RGB needs 3 channels");
        if (cs == ColorSpace::Luma && c != 1) throw TypeError("ImageTensor: Y needs 1 channel");
    }

    int channels() const { return data.shape()[0]; }
    int height() const { return data.shape()[1]; }
    int width() const { return data.shape()[2]; }

    // range-containment check; Unbounded is exempt by definition
    bool in_declared_range() const {
        if (range == Range::Unbounded) return true;
        const float lo = range == Range::Unit ? 0.0f : -1.0f;
        for (std::int64_t i = 0; i < data.numel(); ++i)
            if (!(data[i] >= lo && data[i] <= 1.0f)) return false;
        return true;
    }
};

inline ImageTensor to_signed(const ImageTensor& img) {
    if (img.range != Range::Unit) throw ArgumentError("to_signed: input must be in [0,1]");
    Tensor<float> out = img.data;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 2.0f * out[i] - 1.0f;
    return {std::move(out), Range::Signed, img.color_space};
}

inline ImageTensor to_unit(const ImageTensor& img) {
    if (img.range != Range::Signed) throw ArgumentError("to_unit: input must be in [-1,1]");
    Tensor<float> out = img.data;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 0.5f * (out[i] + 1.0f);
    return {std::move(out), Range::Unit, img.color_space};
}

// BT.601 luma. Weights sum to 1, so gray stays gray and the range is kept.
inline constexpr float kLumaR = 0.299f, kLumaG = 0.587f, kLumaB = 0.114f;

template <class T>
Tensor<T> luma_plane(const Tensor<T>& rgb) {
    if (rgb.shape().rank() != 3 || rgb.shape()[0] != 3)
        throw TypeError("luma_plane: expected (3,H,W), got " + rgb.shape().str());
    const int h = rgb.shape()[1], w = rgb.shape()[2];
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor<T> y(Shape{1, h, w});
    for (std::int64_t p = 0; p < hw; ++p)
        y[p] = T(kLumaR) * rgb[p] + T(kLumaG) * rgb[hw + p] + T(kLumaB) * rgb[2 * hw + p];
    return y;
}

inline ImageTensor to_luma(const ImageTensor& img) {
    if (img.color_space != ColorSpace::Rgb) throw TypeError("to_luma: input must be RGB");
    return {luma_plane(img.data), img.range, ColorSpace::Luma};
}

// differentiable luma, used inside feature encoders
template <class T>
Var<T> to_luma_var(const Var<T>& rgb) {
    if (rgb.shape().rank() != 3 || rgb.shape()[0] != 3)
        throw TypeError("to_luma_var: expected (3,H,W), got " + rgb.shape().str());
    Tensor<T> w(Shape{1, 3, 1, 1});
    w[0] = T(kLumaR);
    w[1] = T(kLumaG);
    w[2] = T(kLumaB);
    return conv2d_valid(rgb, Var<T>::constant(std::move(w)), 1);
}

// ---------------------------------------------------------------------------
// Gaussian blur and the high-pass residual.
//
// One tap table feeds both the plain-tensor path and the autograd path; the
// plain path literally runs the autograd path on a constant, so the two can
// never drift apart.

template <class T>
Tensor<T> gaussian_taps(double sigma, int radius) {
    if (sigma <= 0 || radius < 1) throw ArgumentError("gaussian_taps: bad parameters");
    Tensor<T> taps(Shape{2 * radius + 1});
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[i + radius] = static_cast<T>(v);
        sum += v;
    }
    for (std::int64_t i = 0; i < taps.numel(); ++i) taps[i] = static_cast<T>(taps[i] / sum);
    return taps;
}

// separable blur: replicate pad, horizontal pass, vertical pass
template <class T>
Var<T> gaussian_blur(const Var<T>& x, double sigma = 2.0, int radius = 4) {
    const Tensor<T> taps = gaussian_taps<T>(sigma, radius);
    Tensor<T> row(Shape{1, 2 * radius + 1});
    Tensor<T> col(Shape{2 * radius + 1, 1});
    for (std::int64_t i = 0; i < taps.numel(); ++i) {
        row[i] = taps[i];
        col[i] = taps[i];
    }
    Var<T> p = pad2d(x, radius, radius, radius, radius, PadMode::Replicate);
    return depthwise_conv_fixed(depthwise_conv_fixed(p, row), col);
}

template <class T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma = 2.0, int radius = 4) {
    return gaussian_blur(Var<T>::constant(x), sigma, radius).value();
}

template <class T>
Var<T> high_pass(const Var<T>& x, double sigma = 2.0, int radius = 4) {
    return sub(x, gaussian_blur(x, sigma, radius));
}

inline ImageTensor high_pass(const ImageTensor& img) {
    Tensor<float> out = high_pass(Var<float>::constant(img.data)).value();
    return {std::move(out), Range::Unbounded, img.color_space};
}

// ---------------------------------------------------------------------------
// geometry

// standard half-pixel-center bilinear sampling
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
    if (x.shape().rank() != 3) throw ArgumentError("bilinear_resize: expected (C,H,W)");
    if (out_h < 1 || out_w < 1) throw ArgumentError("bilinear_resize: bad target size");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (out_h == h && out_w == w) return x;
    Tensor<T> out(Shape{c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int i = 0; i < out_h; ++i) {
        const double fy = std::max(0.0, std::min((i + 0.5) * sy - 0.5, static_cast<double>(h - 1)));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int j = 0; j < out_w; ++j) {
            const double fx =
                std::max(0.0, std::min((j + 0.5) * sx - 0.5, static_cast<double>(w - 1)));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int ci = 0; ci < c; ++ci) {
                const double v00 = x.at(ci, y0, x0), v01 = x.at(ci, y0, x1);
                const double v10 = x.at(ci, y1, x0), v11 = x.at(ci, y1, x1);
                out.at(ci, i, j) = static_cast<T>((1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                                  wy * ((1 - wx) * v10 + wx * v11));
            }
        }
    }
    return out;
}

template <class T>
Tensor<T> crop(const Tensor<T>& x, int top, int left, int h, int w) {
    if (x.shape().rank() != 3) throw ArgumentError("crop: expected (C,H,W)");
    const int c = x.shape()[0];
    if (top < 0 || left < 0 || top + h > x.shape()[1] || left + w > x.shape()[2])
        throw ArgumentError("crop: window outside image");
    Tensor<T> out(Shape{c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at(ci, i, j) = x.at(ci, top + i, left + j);
    return out;
}

template <class T>
Tensor<T> flip_horizontal(const Tensor<T>& x) {
    if (x.shape().rank() != 3) throw ArgumentError("flip_horizontal: expected (C,H,W)");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    Tensor<T> out(x.shape());
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at(ci, i, j) = x.at(ci, i, w - 1 - j);
    return out;
}

} // namespace relume::imaging
