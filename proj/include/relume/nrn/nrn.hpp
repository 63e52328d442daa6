#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "relume/core/adam.hpp"
#include "relume/core/nn.hpp"
#include "relume/imaging/image.hpp"

namespace relume::nrn {

// Degradation normalization: the input image is reproduced through a
// coordinate MLP whose positional-encoding bandwidth L caps how precisely it
// can fit, so diverse degradations regress toward a shared appearance.

inline constexpr int kFeatChannels = 64;   // encoder output width C_feat
inline constexpr int kHiddenWidth = 256;   // decoder MLP hidden width
inline constexpr int kDefaultLevels = 8;   // positional-encoding L

// (H, W, 2) normalized pixel locations; [..., 0] = x, [..., 1] = y
template <class T>
Tensor<T> make_grid(int h, int w) {
    if (h < 2 || w < 2) throw ArgumentError("make_grid: h and w must be >= 2");
    Tensor<T> g(Shape{h, w, 2});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            g.at(i, j, 0) = static_cast<T>(-1.0 + 2.0 * j / (w - 1));
            g.at(i, j, 1) = static_cast<T>(-1.0 + 2.0 * i / (h - 1));
        }
    return g;
}

// gamma(x) = [sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(...)],
// applied to each of the two coordinates: (H, W, 4L)
template <class T>
Tensor<T> positional_encode(const Tensor<T>& grid, int levels) {
    if (levels < 1 || levels > 16) throw ArgumentError("positional_encode: L must be in [1,16]");
    if (grid.shape().rank() != 3 || grid.shape()[2] != 2)
        throw ArgumentError("positional_encode: expected (H,W,2), got " + grid.shape().str());
    const int h = grid.shape()[0], w = grid.shape()[1];
    Tensor<T> out(Shape{h, w, 4 * levels});
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int axis = 0; axis < 2; ++axis) {
                const double x = static_cast<double>(grid.at(i, j, axis));
                double freq = pi;
                for (int l = 0; l < levels; ++l) {
                    out.at(i, j, axis * 2 * levels + 2 * l) = static_cast<T>(std::sin(freq * x));
                    out.at(i, j, axis * 2 * levels + 2 * l + 1) = static_cast<T>(std::cos(freq * x));
                    freq *= 2.0;
                }
            }
    return out;
}

// Encoder (3 stride-1 conv layers, instance-normalized) plus coordinate MLP.
// A fixed Gaussian prefilter in front of the first conv keeps fine detail out
// of E, so high-frequency content can only enter through gamma(X); without it
// the per-pixel decoder learns to copy the input through E and the encoding
// bandwidth L stops mattering.
template <class T>
class NrnModel {
public:
    NrnModel() = default;
    NrnModel(ParamStore<T>& store, const std::string& prefix, int pe_levels, Rng& rng)
        : levels_(pe_levels),
          c1_(store, prefix + ".enc1", 3, 32, 3, 1, 1, PadMode::Reflect, rng),
          n1_(store, prefix + ".enc1n", 32),
          c2_(store, prefix + ".enc2", 32, 32, 3, 1, 1, PadMode::Reflect, rng),
          n2_(store, prefix + ".enc2n", 32),
          c3_(store, prefix + ".enc3", 32, kFeatChannels, 3, 1, 1, PadMode::Reflect, rng),
          n3_(store, prefix + ".enc3n", kFeatChannels),
          fc1_(store, prefix + ".mlp1", kFeatChannels + 4 * pe_levels, kHiddenWidth, rng),
          fc2_(store, prefix + ".mlp2", kHiddenWidth, kHiddenWidth, rng),
          fc3_(store, prefix + ".mlp3", kHiddenWidth, kHiddenWidth, rng),
          out_(store, prefix + ".mlpout", kHiddenWidth, 3, rng) {
        if (pe_levels < 1 || pe_levels > 16) throw ArgumentError("NrnModel: L must be in [1,16]");
    }

    int pe_levels() const { return levels_; }

    // (3,H,W) -> (C_feat,H,W), pixel-aligned with the coordinate grid
    Var<T> encode(const Var<T>& img) const {
        Var<T> x = imaging::gaussian_blur(img);
        x = relu(n1_.forward(c1_.forward(x)));
        x = relu(n2_.forward(c2_.forward(x)));
        return relu(n3_.forward(c3_.forward(x)));
    }

    // decoder over per-pixel rows: (N, C_feat + 4L) -> (N, 3) in [-1,1]
    Var<T> decode_rows(const Var<T>& rows) const {
        Var<T> h = relu(fc1_.forward(rows));
        h = relu(fc2_.forward(h));
        h = relu(fc3_.forward(h));
        return tanh_(out_.forward(h));
    }

    // full-image reconstruction I_NR, shape preserved
    Var<T> forward(const Var<T>& img) const {
        const Shape& s = img.shape();
        if (s.rank() != 3 || s[0] != 3)
            throw ArgumentError("NrnModel::forward: expected (3,H,W), got " + s.str());
        const int h = s[1], w = s[2];
        Var<T> feat_mat = chw_to_mat(encode(img));
        if (feat_mat.shape()[0] != h * w)
            throw InternalError("NrnModel: encoder output not pixel-aligned with grid");
        Var<T> pe = Var<T>::constant(
            reshape_pe(positional_encode(make_grid<T>(h, w), levels_), h * w));
        return mat_to_chw(decode_rows(concat_cols(feat_mat, pe)), h, w);
    }

    // reconstruction restricted to a pixel subset: (n,3) rows
    Var<T> forward_rows(const Var<T>& img, const std::vector<int>& pixels) const {
        const Shape& s = img.shape();
        if (s.rank() != 3 || s[0] != 3)
            throw ArgumentError("NrnModel::forward_rows: expected (3,H,W), got " + s.str());
        const int h = s[1], w = s[2];
        Var<T> feat_rows = gather_rows(chw_to_mat(encode(img)), pixels);
        Tensor<T> pe_all = reshape_pe(positional_encode(make_grid<T>(h, w), levels_), h * w);
        Tensor<T> pe_rows(Shape{static_cast<int>(pixels.size()), 4 * levels_});
        for (size_t i = 0; i < pixels.size(); ++i)
            for (int c = 0; c < 4 * levels_; ++c)
                pe_rows.at(static_cast<int>(i), c) = pe_all.at(pixels[i], c);
        return decode_rows(concat_cols(feat_rows, Var<T>::constant(std::move(pe_rows))));
    }

private:
    static Tensor<T> reshape_pe(Tensor<T> pe, int n_px) {
        // (H,W,4L) is row-major, so the flat view already is (H*W, 4L)
        return Tensor<T>(Shape{n_px, pe.shape()[2]},
                         std::vector<T>(pe.data(), pe.data() + pe.numel()));
    }

    int levels_ = kDefaultLevels;
    Conv2d<T> c1_, c2_, c3_;
    InstanceNorm2d<T> n1_, n2_, n3_;
    Linear<T> fc1_, fc2_, fc3_, out_;
};

// mean absolute difference; the normalization reconstruction objective
template <class T>
Var<T> nrn_loss(const Var<T>& i_nr, const Var<T>& i_l) {
    if (i_nr.shape() != i_l.shape())
        throw ArgumentError("nrn_loss: shape mismatch " + i_nr.shape().str() + " vs " +
                            i_l.shape().str());
    return mean_abs_diff(i_nr, i_l);
}

template <class T>
T nrn_loss(const Tensor<T>& i_nr, const Tensor<T>& i_l) {
    return nrn_loss(Var<T>::constant(i_nr), Var<T>::constant(i_l)).value().item();
}

// ImageTensor wrapper over the differentiable path
inline imaging::ImageTensor nrn_forward(const NrnModel<float>& model,
                                        const imaging::ImageTensor& img) {
    if (img.range != imaging::Range::Signed)
        throw ArgumentError("nrn_forward: input must be in [-1,1]");
    Tensor<float> out = model.forward(Var<float>::constant(img.data)).value();
    return {std::move(out), imaging::Range::Signed, img.color_space};
}

// ---------------------------------------------------------------------------
// fitting harnesses (also exercised by the acceptance suite)

struct FitOptions {
    int steps = 500;
    double lr = 1e-3;
    int pixel_sample = 2048; // 0 = all pixels every step
    std::uint64_t seed = 0;
};

// fit one signed-range image; returns the per-step losses
template <class T>
std::vector<double> fit_images(NrnModel<T>& model, ParamStore<T>& store,
                               const std::vector<Tensor<T>>& images, const FitOptions& opt) {
    if (images.empty()) throw ArgumentError("fit_images: empty image set");
    Adam<T> adam(store, static_cast<T>(opt.lr));
    Rng rng(Rng::mix(opt.seed, 0xf17));
    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(opt.steps));
    for (int step = 0; step < opt.steps; ++step) {
        const Tensor<T>& img =
            images[images.size() == 1 ? 0 : static_cast<size_t>(rng.below(images.size()))];
        const int n_px = img.shape()[1] * img.shape()[2];
        store.zero_grads();
        Var<T> input = Var<T>::constant(img);
        Var<T> loss;
        if (opt.pixel_sample > 0 && opt.pixel_sample < n_px) {
            std::vector<int> pixels(static_cast<size_t>(opt.pixel_sample));
            for (auto& p : pixels) p = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_px)));
            Var<T> pred = model.forward_rows(input, pixels);
            Var<T> target = gather_rows(chw_to_mat(input), pixels);
            loss = nrn_loss(pred, target);
        } else {
            loss = nrn_loss(model.forward(input), input);
        }
        if (!loss.value().all_finite()) throw NumericError("fit_images: non-finite loss");
        losses.push_back(static_cast<double>(loss.value().item()));
        backward(loss);
        adam.clip_grad_norm(T(10));
        adam.step();
    }
    return losses;
}

} // namespace relume::nrn
