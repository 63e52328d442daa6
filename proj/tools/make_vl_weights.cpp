// Calibrates the frozen vision-language weights file.
//
// The backend embeds images through a fixed 83-dimensional statistic vector
// and text through a 256-bucket token hash; the two projection matrices are
// the only free parameters. This tool fits them contrastively on synthetic
// bright/dark scene pairs against a small vocabulary of exposure prompts, so
// cosine similarity separates exposure levels for any of the prompt pairs the
// training config may select. Held-out checks must pass before the file is
// written.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <vector>

#include "relume/core/adam.hpp"
#include "relume/imaging/synth.hpp"
#include "relume/metrics/metrics.hpp"
#include "relume/tad/tad.hpp"

using namespace relume;
using Backend = tad::PretrainedBackend<float>;

namespace {

// exposure-graded signed scene; dark uses low gain and a crushing gamma
Tensor<float> graded_scene(std::uint64_t seed, bool bright, Rng& rng) {
    Tensor<float> base = imaging::textured_scene(48, 48, seed);
    Tensor<float> out =
        bright ? imaging::apply_gain(imaging::apply_gamma(base, rng.uniform(0.7, 0.95)),
                                     rng.uniform(1.2, 1.9))
               : imaging::apply_gamma(imaging::apply_gain(base, rng.uniform(0.05, 0.3)),
                                      rng.uniform(1.1, 1.8));
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 2.0f * out[i] - 1.0f;
    return out;
}

imaging::ImageTensor unit_scene(std::uint64_t seed, double gain) {
    Tensor<float> t = imaging::apply_gain(imaging::textured_scene(64, 64, seed), gain);
    return {std::move(t), imaging::Range::Unit, imaging::ColorSpace::Rgb};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibrate the vision-language projection weights"};
    std::string out = "data/vl_tiny.bin";
    int scenes = 40, steps = 400;
    double lr = 5e-3, tau = 10.0;
    std::uint64_t seed = 2024;
    app.add_option("-o,--out", out, "output weights path");
    app.add_option("--scenes", scenes, "scene pairs in the calibration set");
    app.add_option("--steps", steps, "optimization steps");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--tau", tau, "contrastive logit scale");
    app.add_option("--seed", seed, "calibration seed");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::string> low_prompts = {
        "low-light image", "dark image",  "dim image",
        "night image",     "a photo taken at night", "underexposed dark photo"};
    const std::vector<std::string> high_prompts = {
        "high-light image", "bright image", "light image",
        "day image",        "a photo taken in daylight", "well exposed bright photo"};

    // precompute constant feature vectors and prompt bags
    Rng grade_rng(Rng::mix(seed, 0x9aded));
    std::vector<Tensor<float>> feats;
    std::vector<bool> bright;
    for (int i = 0; i < scenes; ++i) {
        for (int b = 0; b < 2; ++b) {
            Var<float> img = Var<float>::constant(graded_scene(seed * 100 + i, b == 1, grade_rng));
            feats.push_back(tad::pretrained_features(img).value());
            bright.push_back(b == 1);
        }
    }
    std::vector<Tensor<float>> low_bags, high_bags;
    for (const auto& p : low_prompts) low_bags.push_back(Backend::text_bag(p));
    for (const auto& p : high_prompts) high_bags.push_back(Backend::text_bag(p));

    ParamStore<float> store;
    Rng init_rng(Rng::mix(seed, 0x171f));
    Var<float> img_proj =
        store.create("img_proj", Shape{tad::kEmbedDim, Backend::kImageFeats});
    Var<float> txt_proj = store.create("txt_proj", Shape{tad::kEmbedDim, Backend::kTextBuckets});
    init::normal(img_proj.value_mut(), init_rng, 0.02f);
    init::normal(txt_proj.value_mut(), init_rng, 0.02f);
    Adam<float> opt(store, lr);

    for (int step = 0; step < steps; ++step) {
        std::vector<Var<float>> low_embs, high_embs;
        for (const auto& b : low_bags)
            low_embs.push_back(l2_normalize(
                reshape(matmul(txt_proj, reshape(Var<float>::constant(b), Shape{Backend::kTextBuckets, 1})),
                        Shape{tad::kEmbedDim})));
        for (const auto& b : high_bags)
            high_embs.push_back(l2_normalize(
                reshape(matmul(txt_proj, reshape(Var<float>::constant(b), Shape{Backend::kTextBuckets, 1})),
                        Shape{tad::kEmbedDim})));
        Var<float> loss = Var<float>::constant(Tensor<float>::scalar(0.0f));
        for (size_t i = 0; i < feats.size(); ++i) {
            Var<float> e = l2_normalize(reshape(
                matmul(img_proj, reshape(Var<float>::constant(feats[i]),
                                          Shape{Backend::kImageFeats, 1})),
                Shape{tad::kEmbedDim}));
            const auto& match = bright[i] ? high_embs : low_embs;
            const auto& oppose = bright[i] ? low_embs : high_embs;
            for (size_t k = 0; k < match.size(); ++k) {
                Var<float> margin = sub(dot(e, match[k]), dot(e, oppose[k]));
                loss = add(loss, bce_with_logits_mean(
                                     scale(margin, static_cast<float>(tau)), 1.0f));
            }
        }
        store.zero_grads();
        backward(loss);
        opt.step();
        if (step % 100 == 0 || step == steps - 1)
            std::printf("step %4d  loss %.6f\n", step, loss.value().item());
    }

    // stage to a temp path so checks run against the real file format
    const std::string tmp = out + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            std::fprintf(stderr, "cannot write %s\n", tmp.c_str());
            return 1;
        }
        f.write(Backend::kMagic, 8);
        write_u64(f, 1);
        write_tensor(f, img_proj.value());
        write_tensor(f, txt_proj.value());
    }
    Backend be(tmp);

    // held-out checks: exposure ordering for every prompt pair, and the
    // gain-0.1 ordering used by the metric oracle
    bool ok = true;
    for (int i = 0; i < 8; ++i) {
        imaging::ImageTensor photo = unit_scene(99000 + i, 1.4);
        imaging::ImageTensor dimmed = {imaging::apply_gain(photo.data, 0.1), imaging::Range::Unit,
                                       imaging::ColorSpace::Rgb};
        for (size_t k = 0; k < low_prompts.size(); ++k) {
            tad::PromptPair<float> pp = tad::make_prompt_pair(be, low_prompts[k], high_prompts[k]);
            const double sb = metrics::semantic_score(photo, be, pp);
            const double sd = metrics::semantic_score(dimmed, be, pp);
            if (!(sb > sd)) {
                std::fprintf(stderr, "ordering failed: scene %d prompts '%s'/'%s' %.4f !> %.4f\n",
                             i, low_prompts[k].c_str(), high_prompts[k].c_str(), sb, sd);
                ok = false;
            }
            if (k == 0 && !(sb > 0.5 && sd < 0.5)) {
                std::fprintf(stderr, "default-prompt margin failed: %.4f / %.4f\n", sb, sd);
                ok = false;
            }
        }
    }
    if (!ok) {
        std::remove(tmp.c_str());
        std::fprintf(stderr, "calibration checks failed; weights not written\n");
        return 1;
    }
    std::rename(tmp.c_str(), out.c_str());
    std::printf("wrote %s\n", out.c_str());
    return 0;
}
