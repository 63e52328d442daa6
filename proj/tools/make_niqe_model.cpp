// Builds the pristine natural-scene-statistics model used by the NIQE metric.
//
// The model is the sample mean and covariance of the 36-dimensional NSS
// feature vector over a corpus of clean synthetic scenes (multi-octave noise
// textures with geometric primitives, the same family the test fixtures use).
// A small ridge keeps the covariance positive definite. The tool refuses to
// write a model that fails the basic sanity ordering: white noise must score
// worse than held-out clean scenes.

#include <CLI11.hpp>

#include <cstdio>
#include <vector>

#include "relume/imaging/synth.hpp"
#include "relume/metrics/metrics.hpp"

using namespace relume;

namespace {

imaging::ImageTensor scene(int h, int w, std::uint64_t seed) {
    return {imaging::textured_scene(h, w, seed), imaging::Range::Unit, imaging::ColorSpace::Rgb};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"build the pristine NSS model for the NIQE metric"};
    std::string out = "data/niqe_pristine.bin";
    int count = 96;
    double ridge = 1e-3;
    app.add_option("-o,--out", out, "output model path");
    app.add_option("--count", count, "number of pristine scenes");
    app.add_option("--ridge", ridge, "diagonal ridge added to the covariance");
    CLI11_PARSE(app, argc, argv);

    const int sizes[][2] = {{128, 128}, {160, 120}, {120, 160}, {192, 144}};
    std::vector<std::vector<double>> feats;
    feats.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const auto& sz = sizes[i % 4];
        feats.push_back(metrics::niqe_features(scene(sz[0], sz[1], 1000 + i)));
    }

    const int d = metrics::kNiqeDim;
    metrics::NiqeModel model;
    model.mean = Tensor<double>(Shape{d});
    model.cov = Tensor<double>(Shape{d, d});
    for (const auto& f : feats)
        for (int i = 0; i < d; ++i) model.mean[i] += f[static_cast<size_t>(i)];
    for (int i = 0; i < d; ++i) model.mean[i] /= static_cast<double>(feats.size());
    for (const auto& f : feats)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                model.cov.at(i, j) += (f[static_cast<size_t>(i)] - model.mean[i]) *
                                      (f[static_cast<size_t>(j)] - model.mean[j]);
    double tr = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) model.cov.at(i, j) /= static_cast<double>(feats.size() - 1);
        tr += model.cov.at(i, i);
    }
    for (int i = 0; i < d; ++i) model.cov.at(i, i) += ridge * tr / d;

    // sanity: held-out clean scenes must beat white noise
    double worst_clean = 0, best_noise = 1e18;
    for (int i = 0; i < 6; ++i) {
        const double sc = metrics::niqe(scene(144, 128, 777000 + i), model);
        worst_clean = std::max(worst_clean, sc);
        Tensor<float> wn(Shape{3, 144, 128});
        Rng rng(555000 + i);
        for (std::int64_t k = 0; k < wn.numel(); ++k) wn[k] = static_cast<float>(rng.uniform());
        const double sn = metrics::niqe(
            {std::move(wn), imaging::Range::Unit, imaging::ColorSpace::Rgb}, model);
        best_noise = std::min(best_noise, sn);
    }
    std::printf("held-out clean worst %.3f | white noise best %.3f\n", worst_clean, best_noise);
    if (!(best_noise > worst_clean)) {
        std::fprintf(stderr, "sanity ordering failed; model not written\n");
        return 1;
    }
    metrics::save_niqe_model(out, model);
    std::printf("wrote %s (%d scenes, ridge %.1e)\n", out.c_str(), count, ridge);
    return 0;
}
