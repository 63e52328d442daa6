#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "relume/core/nn.hpp"
#include "relume/imaging/image.hpp"

namespace relume::generators {

// ---------------------------------------------------------------------------
// GeneratorNet: residual image-to-image translator shared by the enhancement
// and degradation directions. Layout: 7x7 stem at width 32, two stride-2
// downsampling convs to width 128, 6 residual blocks, two nearest-neighbor
// upsampling convs back to width 32, 7x7 head, tanh.
//
// Replicate padding throughout: the residual blocks must survive 1x1 feature
// maps (a 4x4 input reaches them at 1x1), where reflect padding is undefined.

template <class T>
class GeneratorNet {
public:
    static constexpr int kBaseWidth = 32;
    static constexpr int kResBlocks = 6;

    GeneratorNet() = default;
    GeneratorNet(ParamStore<T>& store, const std::string& prefix, Rng& rng) {
        const int w1 = kBaseWidth, w2 = 2 * kBaseWidth, w4 = 4 * kBaseWidth;
        stem_ = Conv2d<T>(store, prefix + ".stem", 3, w1, 7, 1, 3, PadMode::Replicate, rng);
        stem_n_ = InstanceNorm2d<T>(store, prefix + ".stemn", w1);
        down1_ = Conv2d<T>(store, prefix + ".down1", w1, w2, 3, 2, 1, PadMode::Replicate, rng);
        down1_n_ = InstanceNorm2d<T>(store, prefix + ".down1n", w2);
        down2_ = Conv2d<T>(store, prefix + ".down2", w2, w4, 3, 2, 1, PadMode::Replicate, rng);
        down2_n_ = InstanceNorm2d<T>(store, prefix + ".down2n", w4);
        for (int b = 0; b < kResBlocks; ++b) {
            const std::string rp = prefix + ".res" + std::to_string(b);
            blocks_.push_back(Res{
                Conv2d<T>(store, rp + "a", w4, w4, 3, 1, 1, PadMode::Replicate, rng),
                InstanceNorm2d<T>(store, rp + "an", w4),
                Conv2d<T>(store, rp + "b", w4, w4, 3, 1, 1, PadMode::Replicate, rng),
                InstanceNorm2d<T>(store, rp + "bn", w4),
            });
        }
        up1_ = Conv2d<T>(store, prefix + ".up1", w4, w2, 3, 1, 1, PadMode::Replicate, rng);
        up1_n_ = InstanceNorm2d<T>(store, prefix + ".up1n", w2);
        up2_ = Conv2d<T>(store, prefix + ".up2", w2, w1, 3, 1, 1, PadMode::Replicate, rng);
        up2_n_ = InstanceNorm2d<T>(store, prefix + ".up2n", w1);
        head_ = Conv2d<T>(store, prefix + ".head", w1, 3, 7, 1, 3, PadMode::Replicate, rng);
    }

    // x: (3,H,W) in [-1,1], H and W divisible by 4 so the up path restores
    // the input shape exactly
    Var<T> forward(const Var<T>& x) const {
        const Shape& s = x.shape();
        if (s.rank() != 3 || s[0] != 3)
            throw ArgumentError("GeneratorNet: input must be (3,H,W)");
        if (s[1] % 4 != 0 || s[2] % 4 != 0)
            throw ArgumentError("GeneratorNet: spatial dims must be divisible by 4");
        Var<T> h = relu(stem_n_.forward(stem_.forward(x)));
        h = relu(down1_n_.forward(down1_.forward(h)));
        h = relu(down2_n_.forward(down2_.forward(h)));
        for (const Res& r : blocks_) {
            Var<T> y = relu(r.n1.forward(r.c1.forward(h)));
            y = r.n2.forward(r.c2.forward(y));
            h = add(h, y);
        }
        h = relu(up1_n_.forward(up1_.forward(upsample_nearest(h, 2))));
        h = relu(up2_n_.forward(up2_.forward(upsample_nearest(h, 2))));
        return tanh_(head_.forward(h));
    }

private:
    struct Res {
        Conv2d<T> c1;
        InstanceNorm2d<T> n1;
        Conv2d<T> c2;
        InstanceNorm2d<T> n2;
    };
    Conv2d<T> stem_, down1_, down2_, up1_, up2_, head_;
    InstanceNorm2d<T> stem_n_, down1_n_, down2_n_, up1_n_, up2_n_;
    std::vector<Res> blocks_;
};

// ---------------------------------------------------------------------------
// MaskExtractor: shared 4-conv trunk at width 64; a channel-attention module
// (squeeze-excite gating followed by a 1-channel spatial head) produces the
// attention map I_A, and a separate 3-channel head produces the lightness
// mask I_M. Both heads end in sigmoid, so outputs live in [0,1].

template <class T>
class MaskExtractor {
public:
    static constexpr int kTrunkWidth = 64;
    static constexpr int kReduction = 4;

    MaskExtractor() = default;
    MaskExtractor(ParamStore<T>& store, const std::string& prefix, Rng& rng) {
        const int w = kTrunkWidth;
        trunk_[0] = Conv2d<T>(store, prefix + ".t0", 3, w, 3, 1, 1, PadMode::Replicate, rng);
        for (int i = 1; i < 4; ++i)
            trunk_[i] = Conv2d<T>(store, prefix + ".t" + std::to_string(i), w, w, 3, 1, 1,
                                  PadMode::Replicate, rng);
        for (int i = 0; i < 4; ++i)
            trunk_n_[i] = InstanceNorm2d<T>(store, prefix + ".t" + std::to_string(i) + "n", w);
        gate1_ = Linear<T>(store, prefix + ".gate1", w, w / kReduction, rng);
        gate2_ = Linear<T>(store, prefix + ".gate2", w / kReduction, w, rng);
        attn_head_ = Conv2d<T>(store, prefix + ".attn", w, 1, 3, 1, 1, PadMode::Replicate, rng);
        mask_head_ = Conv2d<T>(store, prefix + ".mask", w, 3, 3, 1, 1, PadMode::Replicate, rng);
    }

    // returns {I_A (1,H,W) in [0,1], I_M (3,H,W) in [0,1]}
    std::pair<Var<T>, Var<T>> forward(const Var<T>& x) const {
        const Shape& s = x.shape();
        if (s.rank() != 3 || s[0] != 3)
            throw ArgumentError("MaskExtractor: input must be (3,H,W)");
        Var<T> h = x;
        for (int i = 0; i < 4; ++i) h = relu(trunk_n_[i].forward(trunk_[i].forward(h)));
        // channel attention: pooled descriptor -> bottleneck MLP -> per-channel gates
        Var<T> pooled = reshape(global_avg_pool(h), Shape{1, kTrunkWidth});
        Var<T> gates = sigmoid_(gate2_.forward(relu(gate1_.forward(pooled))));
        Var<T> gated = scale_channels(h, reshape(gates, Shape{kTrunkWidth}));
        Var<T> i_a = sigmoid_(attn_head_.forward(gated));
        Var<T> i_m = sigmoid_(mask_head_.forward(h));
        return {i_a, i_m};
    }

private:
    std::array<Conv2d<T>, 4> trunk_;
    std::array<InstanceNorm2d<T>, 4> trunk_n_;
    Linear<T> gate1_, gate2_;
    Conv2d<T> attn_head_, mask_head_;
};

// ---------------------------------------------------------------------------
// masked generator application

// applies the (1,H,W) attention map to the (3,H,W) image by broadcast
// product, then runs the generator; i_a of all ones is the exact identity on
// the input (IEEE x*1 == x), so the generator sees the unmasked image
template <class T>
Var<T> apply_masked(const GeneratorNet<T>& g, const Var<T>& img, const Var<T>& i_a) {
    const Shape& is = img.shape();
    const Shape& as = i_a.shape();
    if (as.rank() != 3 || as[0] != 1 || as[1] != is[1] || as[2] != is[2])
        throw ArgumentError("attention map must be (1,H,W) matching the image");
    return g.forward(mul_map(img, i_a));
}

// enhancement direction: I~_H = G_H(i_a (x) img)
template <class T>
Var<T> enhance(const GeneratorNet<T>& g_h, const Var<T>& img, const Var<T>& i_a) {
    return apply_masked(g_h, img, i_a);
}

// degradation direction: I~_L = G_L(i_a (x) img)
template <class T>
Var<T> degrade(const GeneratorNet<T>& g_l, const Var<T>& img, const Var<T>& i_a) {
    return apply_masked(g_l, img, i_a);
}

// ImageTensor wrappers for single-image use outside the training graph
inline imaging::ImageTensor enhance(const GeneratorNet<float>& g_h,
                                    const imaging::ImageTensor& img,
                                    const imaging::ImageTensor& i_a) {
    if (img.range != imaging::Range::Signed)
        throw ArgumentError("enhance: image must be in [-1,1]");
    Var<float> out = enhance(g_h, Var<float>::constant(img.data), Var<float>::constant(i_a.data));
    return imaging::ImageTensor(out.value(), imaging::Range::Signed, imaging::ColorSpace::Rgb);
}

inline imaging::ImageTensor degrade(const GeneratorNet<float>& g_l,
                                    const imaging::ImageTensor& img,
                                    const imaging::ImageTensor& i_a) {
    if (img.range != imaging::Range::Signed)
        throw ArgumentError("degrade: image must be in [-1,1]");
    Var<float> out = degrade(g_l, Var<float>::constant(img.data), Var<float>::constant(i_a.data));
    return imaging::ImageTensor(out.value(), imaging::Range::Signed, imaging::ColorSpace::Rgb);
}

// ---------------------------------------------------------------------------
// dual-loop wiring

// The hooks run_dual_loops composes. Tests inject identities here; the
// trainer binds the real modules.
template <class T>
struct DualLoopModels {
    std::function<Var<T>(const Var<T>&)> normalize;                   // NRN
    std::function<std::pair<Var<T>, Var<T>>(const Var<T>&)> extract;  // ME -> (I_A, I_M)
    std::function<Var<T>(const Var<T>&)> enhance;                     // G_H on a masked input
    std::function<Var<T>(const Var<T>&)> degrade;                     // G_L on a masked input
};

// Every tensor the objective consumes, named after its role. The pre-clamp
// pseudo-high is kept alongside the clamped one so the additive identity
// pseudo_high_pre == i_l + i_m stays checkable exactly.
template <class T>
struct LoopOutputs {
    Var<T> i_a;                // attention map from I_L
    Var<T> i_m;                // lightness mask from I_L
    Var<T> i_nrn;              // normalized low-light input
    Var<T> fake_high;          // I~_H = G_H(I_A (x) I_NRN)
    Var<T> cyc_low;            // I~~_L = G_L(I~_H)
    Var<T> fake_low;           // I~_L = G_L(I_A (x) I_H)
    Var<T> cyc_high;           // I~~_H = G_H(I~_L)
    Var<T> re_mask;            // I~_M re-extracted from I~_L
    Var<T> pseudo_high_pre;    // I_L + I_M before clamping
    Var<T> pseudo_high;        // I-_H = clamp(I_L + I_M)
    Var<T> pseudo_mask;        // I-_M = I~_H - I_L
    Var<T> pseudo_high_right;  // I~-_H = clamp(I~_L + I~_M)
    Var<T> pseudo_low;         // I-_L = clamp(I_H - I_M)
};

namespace detail {

template <class T>
void require_finite(const Var<T>& v, const char* name) {
    const Tensor<T>& t = v.value();
    for (std::int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(static_cast<double>(t[i])))
            throw NumericError(std::string("run_dual_loops: ") + name + " is not finite");
}

} // namespace detail

// Runs both closed loops and forms the pseudo images. i_l and i_h are
// unpaired low/high training patches in [-1,1].
template <class T>
LoopOutputs<T> run_dual_loops(const DualLoopModels<T>& m, const Var<T>& i_l, const Var<T>& i_h) {
    if (!(i_l.shape() == i_h.shape()))
        throw ArgumentError("run_dual_loops: input shapes must match");
    LoopOutputs<T> out;
    auto [i_a, i_m] = m.extract(i_l);
    out.i_a = i_a;
    out.i_m = i_m;
    detail::require_finite(out.i_a, "i_a");
    detail::require_finite(out.i_m, "i_m");
    out.i_nrn = m.normalize(i_l);
    detail::require_finite(out.i_nrn, "i_nrn");

    // enhancement-degradation loop on the low-light input
    out.fake_high = m.enhance(mul_map(out.i_nrn, out.i_a));
    detail::require_finite(out.fake_high, "fake_high");
    out.cyc_low = m.degrade(out.fake_high);
    detail::require_finite(out.cyc_low, "cyc_low");

    // degradation-enhancement loop on the high-light input; reuses the
    // attention map extracted from the low-light image
    out.fake_low = m.degrade(mul_map(i_h, out.i_a));
    detail::require_finite(out.fake_low, "fake_low");
    out.cyc_high = m.enhance(out.fake_low);
    detail::require_finite(out.cyc_high, "cyc_high");

    // pseudo images tying the mask extractor to the generators
    auto [re_a, re_m] = m.extract(out.fake_low);
    (void)re_a;
    out.re_mask = re_m;
    detail::require_finite(out.re_mask, "re_mask");
    out.pseudo_high_pre = add(i_l, out.i_m);
    out.pseudo_high = clamp(out.pseudo_high_pre, T(-1), T(1));
    out.pseudo_mask = sub(out.fake_high, i_l);
    out.pseudo_high_right = clamp(add(out.fake_low, out.re_mask), T(-1), T(1));
    out.pseudo_low = clamp(sub(i_h, out.i_m), T(-1), T(1));
    detail::require_finite(out.pseudo_mask, "pseudo_mask");
    return out;
}

// binds the real modules; NrnLike needs forward(Var), MeLike forward(Var) ->
// pair, generators are GeneratorNet
template <class T, class NrnLike>
DualLoopModels<T> bind_models(const NrnLike& nrn, const MaskExtractor<T>& me,
                              const GeneratorNet<T>& g_h, const GeneratorNet<T>& g_l) {
    DualLoopModels<T> m;
    m.normalize = [&nrn](const Var<T>& x) { return nrn.forward(x); };
    m.extract = [&me](const Var<T>& x) { return me.forward(x); };
    m.enhance = [&g_h](const Var<T>& x) { return g_h.forward(x); };
    m.degrade = [&g_l](const Var<T>& x) { return g_l.forward(x); };
    return m;
}

// identity bundle for the closed-loop sanity checks: generators and NRN pass
// inputs through untouched and the attention map is forced to ones, while the
// lightness-mask head still runs so the pseudo-image identities see a real
// network output
template <class T>
DualLoopModels<T> identity_models(const MaskExtractor<T>& me) {
    DualLoopModels<T> m;
    m.normalize = [](const Var<T>& x) { return x; };
    m.extract = [&me](const Var<T>& x) {
        Tensor<T> ones(Shape{1, x.shape()[1], x.shape()[2]});
        ones.fill(T(1));
        return std::pair<Var<T>, Var<T>>{Var<T>::constant(ones), me.forward(x).second};
    };
    m.enhance = [](const Var<T>& x) { return x; };
    m.degrade = [](const Var<T>& x) { return x; };
    return m;
}

} // namespace relume::generators
