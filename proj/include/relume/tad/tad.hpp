#pragma once

#include <cctype>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "relume/core/nn.hpp"
#include "relume/core/serialize.hpp"
#include "relume/imaging/image.hpp"

namespace relume::tad {

inline constexpr int kEmbedDim = 512;

namespace detail {

// scalar mean expanded back to a full shape (backward sums the incoming grad)
template <class T>
Var<T> broadcast_scalar(const Var<T>& scalar, const Shape& s) {
    Tensor<T> out(s, scalar.value()[0]);
    return relume::detail::make_op<T>(std::move(out), {scalar}, [](relume::detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        T acc = 0;
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) acc += n.grad[i];
        p.grad[0] += acc;
    });
}

// normalized coordinate ramps used by spatial moments
template <class T>
std::pair<Tensor<T>, Tensor<T>> coord_ramps(int h, int w) {
    Tensor<T> gx(Shape{1, h, w}), gy(Shape{1, h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            gx.at(0, i, j) = w > 1 ? static_cast<T>(-1.0 + 2.0 * j / (w - 1)) : T(0);
            gy.at(0, i, j) = h > 1 ? static_cast<T>(-1.0 + 2.0 * i / (h - 1)) : T(0);
        }
    return {std::move(gx), std::move(gy)};
}

// Smooth differentiable image statistics shared by both backends. Every term
// is a polynomial or tanh moment, free of kinks, so finite-difference checks
// of losses built on top stay tight.
template <class T>
std::vector<Var<T>> moment_features(const Var<T>& img) {
    const Shape& s = img.shape();
    if (s.rank() != 3 || s[0] != 3)
        throw ArgumentError("moment_features: expected (3,H,W), got " + s.str());
    const int h = s[1], w = s[2];
    auto ramps = coord_ramps<T>(h, w);
    Var<T> gx = Var<T>::constant(std::move(ramps.first));
    Var<T> gy = Var<T>::constant(std::move(ramps.second));
    Var<T> luma = imaging::to_luma_var(img);

    std::vector<Var<T>> f;
    Var<T> ch_means = reshape(global_avg_pool(img), Shape{3, 1});
    Var<T> ch_sq = reshape(global_avg_pool(square(img)), Shape{3, 1});
    for (int c = 0; c < 3; ++c) {
        f.push_back(gather_rows(ch_means, {c}));
        f.push_back(gather_rows(ch_sq, {c}));
    }
    f.push_back(mean_all(luma));
    f.push_back(mean_all(square(luma)));
    f.push_back(mean_all(mul(luma, gx)));
    f.push_back(mean_all(mul(luma, gy)));
    f.push_back(mean_all(mul(luma, mul(gx, gy))));
    f.push_back(mean_all(mul(luma, square(gx))));
    f.push_back(mean_all(mul(luma, square(gy))));
    f.push_back(mean_all(tanh_(scale(luma, T(3)))));
    f.push_back(mean_all(mul(square(luma), gx)));
    f.push_back(mean_all(mul(square(luma), gy)));
    // contrast moment: saturated deviation from the global mean
    Var<T> centered = sub(luma, broadcast_scalar(mean_all(luma), luma.shape()));
    f.push_back(mean_all(square(tanh_(scale(centered, T(5))))));
    return f;
}

inline constexpr int kMomentCount = 17;

inline std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// vision-language backends
//
// Both encoders are frozen: they supply supervision, never receive parameter
// updates. encode_image is differentiable in the image so the cosine losses
// can steer the generators.

template <class T>
class VlBackend {
public:
    virtual ~VlBackend() = default;
    // (3,H,W) in model range [-1,1] -> unit-norm (512)
    virtual Var<T> encode_image(const Var<T>& img) const = 0;
    // prompt text -> unit-norm (512)
    virtual Tensor<T> encode_text(const std::string& text) const = 0;
};

// Deterministic test backend: fixed random projection of the image moments
// and of a text-hash direction. No learned weights anywhere.
template <class T>
class StubBackend final : public VlBackend<T> {
public:
    explicit StubBackend(std::uint64_t seed = 0) : seed_(seed), proj_(Shape{kEmbedDim, detail::kMomentCount}) {
        Rng rng(Rng::mix(seed, 0x57ab, 0x1ca6e));
        for (std::int64_t i = 0; i < proj_.numel(); ++i)
            proj_[i] = static_cast<T>(rng.gaussian() / std::sqrt(double(detail::kMomentCount)));
    }

    Var<T> encode_image(const Var<T>& img) const override {
        Var<T> fvec = stack_scalars(detail::moment_features(img));
        Var<T> raw = matmul(Var<T>::constant(proj_), reshape(fvec, Shape{detail::kMomentCount, 1}));
        return l2_normalize(reshape(raw, Shape{kEmbedDim}));
    }

    Tensor<T> encode_text(const std::string& text) const override {
        Rng rng(Rng::mix(seed_, fnv1a(text), 0x7e57));
        Tensor<T> v(Shape{kEmbedDim});
        double nrm2 = 0;
        for (std::int64_t i = 0; i < v.numel(); ++i) {
            v[i] = static_cast<T>(rng.gaussian());
            nrm2 += static_cast<double>(v[i]) * static_cast<double>(v[i]);
        }
        const T inv = static_cast<T>(1.0 / std::sqrt(nrm2));
        for (std::int64_t i = 0; i < v.numel(); ++i) v[i] *= inv;
        return v;
    }

private:
    std::uint64_t seed_;
    Tensor<T> proj_;
};

inline constexpr int kPretrainedFeats = 64 + detail::kMomentCount + 2;

// raw feature vector of the weights-file backend: 8x8 luma thumbnail, the
// shared moments, and two high-pass energy terms; also used by the
// calibration tool so both sides see identical features
template <class T>
Var<T> pretrained_features(const Var<T>& img) {
    std::vector<Var<T>> feats = detail::moment_features(img);
    Var<T> luma = imaging::to_luma_var(img);
    Var<T> hp = imaging::high_pass(luma);
    feats.push_back(mean_all(square(hp)));
    feats.push_back(mean_all(square(tanh_(scale(hp, T(5))))));
    Var<T> thumb = reshape(adaptive_avg_pool(luma, 8, 8), Shape{64});
    return concat_vec(thumb, stack_scalars(feats));
}

// Frozen weights-file backend. Image features are the shared moments plus an
// 8x8 luma thumbnail and high-pass energy terms; the projection matrices come
// from a small contrastively calibrated weights file shipped with the repo.
template <class T>
class PretrainedBackend final : public VlBackend<T> {
public:
    static constexpr int kImageFeats = kPretrainedFeats;
    static constexpr int kTextBuckets = 256;
    static constexpr char kMagic[8] = {'R', 'L', 'M', 'V', 'L', 'W', '1', '\n'};

    explicit PretrainedBackend(const std::string& weights_path) {
        std::ifstream f(weights_path, std::ios::binary);
        if (!f) throw ConfigError("vision-language weights file not found: " + weights_path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::string(magic, 8) != std::string(kMagic, 8))
            throw FormatError("bad vision-language weights file: " + weights_path);
        const std::uint64_t version = read_u64(f);
        if (version != 1) throw FormatError("unsupported weights version");
        Tensor<float> img32 = read_tensor<float>(f);
        Tensor<float> txt32 = read_tensor<float>(f);
        if (img32.shape() != Shape{kEmbedDim, kImageFeats} ||
            txt32.shape() != Shape{kEmbedDim, kTextBuckets})
            throw FormatError("weights file has unexpected shapes");
        img_proj_ = img32.template cast<T>();
        txt_proj_ = txt32.template cast<T>();
    }

    Var<T> encode_image(const Var<T>& img) const override {
        Var<T> fvec = pretrained_features(img);
        Var<T> raw =
            matmul(Var<T>::constant(img_proj_), reshape(fvec, Shape{kImageFeats, 1}));
        return l2_normalize(reshape(raw, Shape{kEmbedDim}));
    }

    Tensor<T> encode_text(const std::string& text) const override {
        Tensor<T> bag = text_bag(text);
        Tensor<T> out(Shape{kEmbedDim});
        double nrm2 = 0;
        for (int i = 0; i < kEmbedDim; ++i) {
            T acc = 0;
            for (int j = 0; j < kTextBuckets; ++j) acc += txt_proj_.at(i, j) * bag[j];
            out[i] = acc;
            nrm2 += static_cast<double>(acc) * static_cast<double>(acc);
        }
        if (!(nrm2 > 0)) throw NumericError("encode_text: zero-norm embedding for '" + text + "'");
        const T inv = static_cast<T>(1.0 / std::sqrt(nrm2));
        for (int i = 0; i < kEmbedDim; ++i) out[i] *= inv;
        return out;
    }

    // token-hash bag, normalized by token count; shared with the weights tool
    static Tensor<T> text_bag(const std::string& text) {
        const auto tokens = detail::tokenize_lower(text);
        Tensor<T> bag(Shape{kTextBuckets});
        if (tokens.empty()) return bag;
        for (const auto& tok : tokens)
            bag[static_cast<std::int64_t>(fnv1a(tok) % kTextBuckets)] += T(1);
        for (std::int64_t i = 0; i < bag.numel(); ++i) bag[i] /= static_cast<T>(tokens.size());
        return bag;
    }

private:
    Tensor<T> img_proj_, txt_proj_;
};

// ---------------------------------------------------------------------------
// prompts and cosine supervision

template <class T>
struct PromptPair {
    std::string t_low = "low-light image";
    std::string t_high = "high-light image";
    Tensor<T> emb_low, emb_high; // unit norm, frozen for the whole run
};

template <class T>
PromptPair<T> make_prompt_pair(const VlBackend<T>& backend,
                               const std::string& t_low = "low-light image",
                               const std::string& t_high = "high-light image") {
    PromptPair<T> p;
    p.t_low = t_low;
    p.t_high = t_high;
    p.emb_low = backend.encode_text(t_low);
    p.emb_high = backend.encode_text(t_high);
    return p;
}

namespace detail {

template <class T>
Tensor<T> normalized_or_throw(const Tensor<T>& emb) {
    double nrm2 = 0;
    for (std::int64_t i = 0; i < emb.numel(); ++i)
        nrm2 += static_cast<double>(emb[i]) * static_cast<double>(emb[i]);
    if (!(nrm2 > 0)) throw NumericError("cosine_discrepancy: zero-norm text embedding");
    Tensor<T> out = emb;
    const T inv = static_cast<T>(1.0 / std::sqrt(nrm2));
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= inv;
    return out;
}

} // namespace detail

// cosine similarity between the image embedding and a text embedding; both
// sides are normalized here, making the value scale-invariant in either input
template <class T>
Var<T> cosine_discrepancy(const Var<T>& img, const VlBackend<T>& backend,
                          const Tensor<T>& emb_text) {
    Var<T> e = l2_normalize(backend.encode_image(img));
    return dot(e, Var<T>::constant(detail::normalized_or_throw(emb_text)));
}

// enhanced predictions should sit near T_H and far from T_L
template <class T>
Var<T> cosine_loss_high(const Var<T>& img, const VlBackend<T>& backend,
                        const PromptPair<T>& prompts) {
    Var<T> e = l2_normalize(backend.encode_image(img));
    return sub(dot(e, Var<T>::constant(detail::normalized_or_throw(prompts.emb_low))),
               dot(e, Var<T>::constant(detail::normalized_or_throw(prompts.emb_high))));
}

// mirror for degraded predictions
template <class T>
Var<T> cosine_loss_low(const Var<T>& img, const VlBackend<T>& backend,
                       const PromptPair<T>& prompts) {
    Var<T> e = l2_normalize(backend.encode_image(img));
    return sub(dot(e, Var<T>::constant(detail::normalized_or_throw(prompts.emb_high))),
               dot(e, Var<T>::constant(detail::normalized_or_throw(prompts.emb_low))));
}

// ImageTensor wrappers over the differentiable paths
inline double cosine_discrepancy(const imaging::ImageTensor& img, const VlBackend<float>& backend,
                                 const Tensor<float>& emb_text) {
    return cosine_discrepancy(Var<float>::constant(img.data), backend, emb_text).value().item();
}
inline double cosine_loss_high(const imaging::ImageTensor& img, const VlBackend<float>& backend,
                               const PromptPair<float>& prompts) {
    return cosine_loss_high(Var<float>::constant(img.data), backend, prompts).value().item();
}
inline double cosine_loss_low(const imaging::ImageTensor& img, const VlBackend<float>& backend,
                              const PromptPair<float>& prompts) {
    return cosine_loss_low(Var<float>::constant(img.data), backend, prompts).value().item();
}

// ---------------------------------------------------------------------------
// double-path appearance discriminator
//
// Two identical 70x70 patch critics: one on color, one on the high-pass
// residual. Outputs are logit maps; the loss applies the sigmoid.

template <class T>
class PatchCritic {
public:
    PatchCritic() = default;
    PatchCritic(ParamStore<T>& store, const std::string& prefix, Rng& rng)
        : c1_(store, prefix + ".c1", 3, 64, 4, 2, 1, PadMode::Zero, rng),
          c2_(store, prefix + ".c2", 64, 128, 4, 2, 1, PadMode::Zero, rng),
          n2_(store, prefix + ".c2n", 128),
          c3_(store, prefix + ".c3", 128, 256, 4, 2, 1, PadMode::Zero, rng),
          n3_(store, prefix + ".c3n", 256),
          c4_(store, prefix + ".c4", 256, 512, 4, 1, 1, PadMode::Zero, rng),
          n4_(store, prefix + ".c4n", 512),
          c5_(store, prefix + ".c5", 512, 1, 4, 1, 1, PadMode::Zero, rng) {}

    // frozen passes contribute no gradient to critic parameters
    Var<T> forward(const Var<T>& img, bool frozen = false) const {
        Var<T> x = leaky_relu(c1_.forward(img, frozen), T(0.2));
        x = leaky_relu(n2_.forward(c2_.forward(x, frozen), frozen), T(0.2));
        x = leaky_relu(n3_.forward(c3_.forward(x, frozen), frozen), T(0.2));
        x = leaky_relu(n4_.forward(c4_.forward(x, frozen), frozen), T(0.2));
        return c5_.forward(x, frozen);
    }

private:
    Conv2d<T> c1_, c2_, c3_, c4_, c5_;
    InstanceNorm2d<T> n2_, n3_, n4_;
};

template <class T>
class AppearanceDiscriminator {
public:
    // the stride pyramid collapses below this input size
    static constexpr int kMinInput = 32;

    AppearanceDiscriminator() = default;
    AppearanceDiscriminator(ParamStore<T>& store, const std::string& prefix, Rng& rng)
        : color_(store, prefix + ".color", rng), edge_(store, prefix + ".edge", rng) {}

    // the edge path sees exactly high_pass(img); exposed so tests can assert
    // the tensor identity
    Var<T> edge_input(const Var<T>& img) const { return imaging::high_pass(img); }

    // toy inputs smaller than the receptive pyramid are nearest-upsampled, a
    // differentiable embedding that leaves production sizes untouched
    Var<T> fit_size(const Var<T>& img) const {
        const int mn = std::min(img.shape()[1], img.shape()[2]);
        if (mn >= kMinInput) return img;
        return upsample_nearest(img, (kMinInput + mn - 1) / mn);
    }

    // frozen: parameters enter the graph detached, so generator-side terms
    // leave no gradient in the discriminator
    std::pair<Var<T>, Var<T>> discriminate(const Var<T>& img, bool frozen = false) const {
        Var<T> sized = fit_size(img);
        return {color_.forward(sized, frozen), edge_.forward(edge_input(sized), frozen)};
    }

private:
    PatchCritic<T> color_, edge_;
};

// ---------------------------------------------------------------------------
// adversarial objective

enum class Direction { ToHigh, ToLow };

template <class T>
struct AdvLosses {
    Var<T> loss_g; // non-saturating generator term + matching cosine loss
    Var<T> loss_d; // real -> 1, detached fake -> 0
};

template <class T>
AdvLosses<T> adversarial_loss(const Var<T>& real, const Var<T>& fake,
                              const AppearanceDiscriminator<T>& d, const VlBackend<T>& backend,
                              const PromptPair<T>& prompts, Direction direction) {
    auto [real_color, real_edge] = d.discriminate(real);
    // the generator term runs through a frozen discriminator: gradients reach
    // the generator but not the critic
    auto [fake_color, fake_edge] = d.discriminate(fake, true);
    // the discriminator step sees the fake image with generator history cut
    auto [fake_color_d, fake_edge_d] = d.discriminate(detach(fake));
    if (!real_color.value().all_finite() || !real_edge.value().all_finite() ||
        !fake_color.value().all_finite() || !fake_edge.value().all_finite())
        throw NumericError("adversarial_loss: non-finite discriminator logits");

    // color and edge paths weighted equally
    auto both = [](Var<T> a, Var<T> b) { return scale(add(a, b), T(0.5)); };

    Var<T> loss_d = both(
        scale(add(bce_with_logits_mean(real_color, T(1)),
                  bce_with_logits_mean(fake_color_d, T(0))),
              T(0.5)),
        scale(add(bce_with_logits_mean(real_edge, T(1)),
                  bce_with_logits_mean(fake_edge_d, T(0))),
              T(0.5)));

    Var<T> gan_g = both(bce_with_logits_mean(fake_color, T(1)), bce_with_logits_mean(fake_edge, T(1)));
    Var<T> cos = direction == Direction::ToHigh ? cosine_loss_high(fake, backend, prompts)
                                                : cosine_loss_low(fake, backend, prompts);
    return {add(gan_g, cos), loss_d};
}

} // namespace relume::tad
