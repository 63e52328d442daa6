#pragma once

#include <algorithm>
#include <cmath>

#include "relume/core/rng.hpp"
#include "relume/imaging/image.hpp"

namespace relume::imaging {

// Procedural scenes used by the test suites and the statistics-calibration
// tools. Multi-octave noise gives a roughly 1/f spectrum; shapes add edges.

// per-channel octave noise in [0,1] with a roughly 1/f amplitude law,
// channels loosely correlated through a shared luminance base
template <class T = float>
Tensor<T> octave_noise(int h, int w, std::uint64_t seed, int channels = 3) {
    Rng rng(seed);
    Tensor<T> out(Shape{channels, h, w});
    const int mn = std::min(h, w);
    for (int base = 2; base <= mn / 2; base *= 2) {
        const double amp = 1.6 * base / mn; // coarse octaves dominate
        Tensor<T> coarse(Shape{channels, std::max(2, h / base), std::max(2, w / base)});
        Tensor<T> shared(Shape{1, coarse.shape()[1], coarse.shape()[2]});
        for (std::int64_t i = 0; i < shared.numel(); ++i)
            shared[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
        for (int c = 0; c < channels; ++c)
            for (std::int64_t i = 0; i < shared.numel(); ++i)
                coarse[c * shared.numel() + i] =
                    static_cast<T>(0.7 * shared[i] + 0.3 * rng.uniform(-1.0, 1.0));
        Tensor<T> up = bilinear_resize(coarse, h, w);
        for (std::int64_t i = 0; i < out.numel(); ++i)
            out[i] += static_cast<T>(amp) * up[i];
    }
    // squash into [0,1] around mid-gray
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<T>(0.5 + 0.5 * std::tanh(static_cast<double>(out[i])));
    return out;
}

// octave noise plus random rectangles and disks, finished with fine pixel
// grain; the grain carries energy at the highest spatial frequencies, which
// only a wide positional encoding can represent
template <class T = float>
Tensor<T> textured_scene(int h, int w, std::uint64_t seed, double grain = 0.06) {
    Rng rng(Rng::mix(seed, 0x5ce9e));
    Tensor<T> img = octave_noise<T>(h, w, Rng::mix(seed, 1));
    const int n_shapes = 3 + static_cast<int>(rng.below(4));
    for (int s = 0; s < n_shapes; ++s) {
        const bool disk = rng.coin();
        const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
        const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int r = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(h, w) / 3)));
        T color[3];
        for (auto& c : color) c = static_cast<T>(rng.uniform(0.05, 0.95));
        const double blend = rng.uniform(0.5, 1.0);
        for (int i = std::max(0, cy - r); i < std::min(h, cy + r); ++i)
            for (int j = std::max(0, cx - r); j < std::min(w, cx + r); ++j) {
                if (disk) {
                    const int dy = i - cy, dx = j - cx;
                    if (dy * dy + dx * dx > r * r) continue;
                }
                for (int c = 0; c < 3; ++c)
                    img.at(c, i, j) = static_cast<T>((1.0 - blend) * img.at(c, i, j) +
                                                     blend * color[c]);
            }
    }
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        const double v = static_cast<double>(img[i]) + rng.uniform(-grain, grain);
        img[i] = static_cast<T>(std::min(1.0, std::max(0.0, v)));
    }
    return img;
}

// exposure bracket: clip(gain * img), in [0,1]
template <class T>
Tensor<T> apply_gain(const Tensor<T>& img, double gain) {
    Tensor<T> out = img;
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<T>(std::min(1.0, std::max(0.0, gain * static_cast<double>(out[i]))));
    return out;
}

// monotone tone curve, used by the lightness-order metric tests
template <class T>
Tensor<T> apply_gamma(const Tensor<T>& img, double g) {
    Tensor<T> out = img;
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<T>(std::pow(std::min(1.0, std::max(0.0, static_cast<double>(out[i]))), g));
    return out;
}

} // namespace relume::imaging
