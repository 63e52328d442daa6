#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "relume/core/rng.hpp"
#include "relume/imaging/image.hpp"
#include "relume/imaging/io.hpp"

namespace relume::datasets {

namespace detail {

inline bool has_image_ext(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline std::vector<std::string> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NotFoundError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_ext(entry.path()))
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace detail

// ---------------------------------------------------------------------------
// training corpus

// Unpaired pools of low-light and reference-style images. The pools imply no
// correspondence: training draws one random member from each.
struct UnpairedCorpus {
    std::vector<std::string> low_files;
    std::vector<std::string> high_files;
    int patch_size = 256;

    // an epoch walks the larger pool once; the smaller pool wraps
    long long epoch_length() const {
        return static_cast<long long>(std::max(low_files.size(), high_files.size()));
    }
};

// expects <low_dir>/*.png|jpg and <high_dir>/*.png|jpg, both non-empty
inline UnpairedCorpus open_corpus(const std::string& low_dir, const std::string& high_dir,
                                  int patch_size = 256) {
    if (patch_size < 8) throw ArgumentError("open_corpus: patch_size must be >= 8");
    UnpairedCorpus c;
    c.low_files = detail::list_images(low_dir);
    c.high_files = detail::list_images(high_dir);
    c.patch_size = patch_size;
    if (c.low_files.empty()) throw DataError("no images in low pool: " + low_dir);
    if (c.high_files.empty()) throw DataError("no images in high pool: " + high_dir);
    return c;
}

namespace detail {

// one training patch: minimal resize up to the patch size if needed, random
// crop, random horizontal flip, then [-1,1]
inline imaging::ImageTensor load_patch(const std::string& path, int patch, Rng& rng) {
    imaging::ImageTensor img = imaging::load_image(path);
    const int h = static_cast<int>(img.data.shape()[1]);
    const int w = static_cast<int>(img.data.shape()[2]);
    if (h < 8 || w < 8) throw DataError("image smaller than 8x8: " + path);
    Tensor<float> t = img.data;
    int th = h, tw = w;
    if (std::min(h, w) < patch) {
        // scale the short side up to the patch size, preserving aspect ratio
        const double s = static_cast<double>(patch) / std::min(h, w);
        th = std::max(patch, static_cast<int>(std::lround(h * s)));
        tw = std::max(patch, static_cast<int>(std::lround(w * s)));
        t = imaging::bilinear_resize(t, th, tw);
    }
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(th - patch + 1)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(tw - patch + 1)));
    t = imaging::crop(t, top, left, patch, patch);
    if (rng.coin()) t = imaging::flip_horizontal(t);
    return imaging::to_signed(imaging::ImageTensor(t, imaging::Range::Unit,
                                                   imaging::ColorSpace::Rgb));
}

} // namespace detail

// Independent draws from the two pools; deterministic in the seed, stateless
// across calls. Draw order: low index, low patch, high index, high patch.
inline std::pair<imaging::ImageTensor, imaging::ImageTensor>
sample_training_pair(const UnpairedCorpus& corpus, std::uint64_t rng_seed) {
    Rng rng(Rng::mix(rng_seed, 0xda7a5e7));
    const auto& low = corpus.low_files[rng.below(corpus.low_files.size())];
    imaging::ImageTensor i_l = detail::load_patch(low, corpus.patch_size, rng);
    const auto& high = corpus.high_files[rng.below(corpus.high_files.size())];
    imaging::ImageTensor i_h = detail::load_patch(high, corpus.patch_size, rng);
    return {std::move(i_l), std::move(i_h)};
}

// ---------------------------------------------------------------------------
// evaluation iteration

// A full-resolution eval image, reflect-padded so both dimensions divide by
// 4; pad_bottom/pad_right record how much to crop back off the output.
struct EvalItem {
    std::string name; // file name without directory
    imaging::ImageTensor image;
    int orig_h = 0, orig_w = 0;
    int pad_bottom = 0, pad_right = 0;
};

// lexicographically ordered full-resolution images in [-1,1]
inline std::vector<EvalItem> iterate_eval(const std::string& dir) {
    std::vector<std::string> files = detail::list_images(dir);
    if (files.empty()) throw DataError("no images to evaluate in: " + dir);
    std::vector<EvalItem> items;
    items.reserve(files.size());
    for (const auto& path : files) {
        imaging::ImageTensor img = imaging::load_image(path);
        EvalItem item;
        item.name = std::filesystem::path(path).filename().string();
        item.orig_h = static_cast<int>(img.data.shape()[1]);
        item.orig_w = static_cast<int>(img.data.shape()[2]);
        item.pad_bottom = (4 - item.orig_h % 4) % 4;
        item.pad_right = (4 - item.orig_w % 4) % 4;
        Tensor<float> t = img.data;
        if (item.pad_bottom > 0 || item.pad_right > 0) {
            Var<float> padded = pad2d(Var<float>::constant(t), 0, item.pad_bottom, 0,
                                      item.pad_right, PadMode::Reflect);
            t = padded.value();
        }
        item.image = imaging::to_signed(
            imaging::ImageTensor(t, imaging::Range::Unit, imaging::ColorSpace::Rgb));
        items.push_back(std::move(item));
    }
    return items;
}

// removes the reflection padding recorded in the item
inline Tensor<float> crop_back(const Tensor<float>& out, const EvalItem& item) {
    return imaging::crop(out, 0, 0, item.orig_h, item.orig_w);
}

} // namespace relume::datasets
