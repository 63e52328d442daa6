#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

#include "relume/core/rng.hpp"
#include "relume/imaging/image.hpp"
#include "relume/imaging/io.hpp"

using namespace relume;
using namespace relume::imaging;

namespace {

std::string fixture(const std::string& name) {
    return std::string(TEST_DATA_DIR) + "/" + name;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("load: black, white, and mid-gray PNGs") {
    auto black = load_image(fixture("black2x2.png"));
    CHECK(black.data.shape() == Shape{3, 2, 2});
    CHECK(black.range == Range::Unit);
    CHECK(black.color_space == ColorSpace::Rgb);
    for (std::int64_t i = 0; i < black.data.numel(); ++i) CHECK(black.data[i] == 0.0f);

    auto white = load_image(fixture("white2x2.png"));
    for (std::int64_t i = 0; i < white.data.numel(); ++i) CHECK(white.data[i] == 1.0f);

    auto gray = load_image(fixture("gray128.png"));
    for (std::int64_t i = 0; i < gray.data.numel(); ++i)
        CHECK(gray.data[i] == Catch::Approx(128.0 / 255.0).epsilon(1e-6));
}

TEST_CASE("load: non-RGB layouts normalize to 3-channel RGB") {
    auto g = load_image(fixture("gray_l.png"));
    CHECK(g.data.shape() == Shape{3, 3, 4});
    for (std::int64_t i = 0; i < g.data.numel(); ++i)
        CHECK(g.data[i] == Catch::Approx(200.0 / 255.0).epsilon(1e-6));

    auto rgba = load_image(fixture("rgba.png"));
    CHECK(rgba.data.shape() == Shape{3, 2, 2});
    CHECK(rgba.data[0] == Catch::Approx(10.0 / 255.0).epsilon(1e-6));

    auto pal = load_image(fixture("palette.png"));
    CHECK(pal.data.shape() == Shape{3, 4, 4});
    CHECK(pal.data[0] == 1.0f); // red channel

    auto deep = load_image(fixture("deep16.png"));
    CHECK(deep.data.shape() == Shape{3, 3, 4});
}

TEST_CASE("load: JPEG decodes close to its PNG source") {
    auto png = load_image(fixture("smooth.png"));
    auto jpg = load_image(fixture("smooth.jpg"));
    CHECK(jpg.data.shape() == png.data.shape());
    CHECK(max_abs_diff(png.data, jpg.data) < 0.05f);
    double mean_err = 0;
    for (std::int64_t i = 0; i < png.data.numel(); ++i)
        mean_err += std::abs(png.data[i] - jpg.data[i]);
    CHECK(mean_err / static_cast<double>(png.data.numel()) < 0.01);
}

TEST_CASE("load: error taxonomy") {
    CHECK_THROWS_AS(load_image(fixture("does_not_exist.png")), NotFoundError);
    CHECK_THROWS_AS(load_image(fixture("broken.png")), FormatError);
    CHECK_THROWS_AS(load_image(fixture("notimage.txt")), FormatError);
}

TEST_CASE("save/load round trip bounded by quantization") {
    Rng rng(99);
    Tensor<float> t(Shape{3, 9, 13});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform());
    ImageTensor img{t, Range::Unit, ColorSpace::Rgb};

    const std::string png = tmp_path("relume_rt.png");
    save_image(img, png);
    auto back = load_image(png);
    CHECK(back.data.shape() == t.shape());
    CHECK(max_abs_diff(back.data, t) <= 1.0f / 255.0f + 1e-6f);
    std::filesystem::remove(png);

    const std::string jpg = tmp_path("relume_rt.jpg");
    save_image(img, jpg);
    auto backj = load_image(jpg);
    CHECK(backj.data.shape() == t.shape());
    std::filesystem::remove(jpg);

    // zeros -> all-black file, ones -> all-white file
    ImageTensor zeros{Tensor<float>(Shape{3, 8, 8}), Range::Unit, ColorSpace::Rgb};
    const std::string zp = tmp_path("relume_zero.png");
    save_image(zeros, zp);
    auto zb = load_image(zp);
    for (std::int64_t i = 0; i < zb.data.numel(); ++i) CHECK(zb.data[i] == 0.0f);
    std::filesystem::remove(zp);

    ImageTensor ones{Tensor<float>(Shape{3, 8, 8}, 1.0f), Range::Unit, ColorSpace::Rgb};
    const std::string op = tmp_path("relume_one.png");
    save_image(ones, op);
    auto ob = load_image(op);
    for (std::int64_t i = 0; i < ob.data.numel(); ++i) CHECK(ob.data[i] == 1.0f);
    std::filesystem::remove(op);

    ImageTensor sgn = to_signed(img);
    CHECK_THROWS_AS(save_image(sgn, tmp_path("x.png")), ArgumentError);
    CHECK_THROWS_AS(save_image(img, "/nonexistent_dir_zz/x.png"), IoError);
}

TEST_CASE("range conversions are explicit and inverse") {
    Rng rng(5);
    Tensor<float> t(Shape{3, 4, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform());
    ImageTensor u{t, Range::Unit, ColorSpace::Rgb};
    ImageTensor s = to_signed(u);
    CHECK(s.range == Range::Signed);
    CHECK(s.data[0] == Catch::Approx(2.0f * t[0] - 1.0f));
    ImageTensor u2 = to_unit(s);
    CHECK(max_abs_diff(u2.data, t) < 1e-6f);
    CHECK_THROWS_AS(to_unit(u), ArgumentError);
    CHECK_THROWS_AS(to_signed(s), ArgumentError);
    CHECK(u.in_declared_range());
    t[0] = 1.5f;
    ImageTensor bad{t, Range::Unit, ColorSpace::Rgb};
    CHECK_FALSE(bad.in_declared_range());
}

TEST_CASE("luma: gray fixed point and primary weights") {
    Tensor<float> t(Shape{3, 2, 2}, 0.37f);
    ImageTensor gray{t, Range::Unit, ColorSpace::Rgb};
    auto y = to_luma(gray);
    CHECK(y.color_space == ColorSpace::Luma);
    CHECK(y.data.shape() == Shape{1, 2, 2});
    for (std::int64_t i = 0; i < 4; ++i)
        CHECK(y.data[i] == Catch::Approx(0.37f).epsilon(1e-6));

    Tensor<float> red(Shape{3, 1, 1});
    red[0] = 1.0f;
    ImageTensor r{red, Range::Unit, ColorSpace::Rgb};
    CHECK(to_luma(r).data[0] == Catch::Approx(0.299).epsilon(1e-6));

    Tensor<float> blue(Shape{3, 1, 1});
    blue[2] = 1.0f;
    ImageTensor b{blue, Range::Unit, ColorSpace::Rgb};
    CHECK(to_luma(b).data[0] == Catch::Approx(0.114).epsilon(1e-6));

    CHECK_THROWS_AS(to_luma(y), TypeError);

    // differentiable path agrees with the plain path
    auto v = to_luma_var(Var<double>::constant(gray.data.cast<double>()));
    CHECK(v.shape() == Shape{1, 2, 2});
    CHECK(std::abs(v.value()[0] - 0.37) < 1e-6);
}

TEST_CASE("high_pass: constant kill, impulse response, zero sum") {
    ImageTensor flat{Tensor<float>(Shape{3, 12, 12}, 0.6f), Range::Unit, ColorSpace::Rgb};
    auto hp = high_pass(flat);
    CHECK(hp.range == Range::Unbounded);
    CHECK(max_abs_diff(hp.data, Tensor<float>(Shape{3, 12, 12})) < 1e-6f);

    // single bright pixel on black, away from borders
    Tensor<float> imp(Shape{1, 21, 21});
    imp.at(0, 10, 10) = 1.0f;
    ImageTensor impulse{imp, Range::Unit, ColorSpace::Luma};
    auto h = high_pass(impulse);
    CHECK(h.data.at(0, 10, 10) > 0.5f);
    CHECK(h.data.at(0, 10, 12) < 0.0f); // halo
    double total = 0;
    for (std::int64_t i = 0; i < h.data.numel(); ++i) total += h.data[i];
    CHECK(std::abs(total) < 1e-4); // blur preserves mass away from borders

    // step edge: response concentrated within 4 px of the edge
    Tensor<float> step(Shape{1, 16, 32});
    for (int i = 0; i < 16; ++i)
        for (int j = 16; j < 32; ++j) step.at(0, i, j) = 1.0f;
    auto hs = high_pass(ImageTensor{step, Range::Unit, ColorSpace::Luma});
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 32; ++j) {
            if (std::abs(j - 16) > 4 && std::abs(j - 15) > 4)
                CHECK(std::abs(hs.data.at(0, i, j)) < 1e-5f);
        }
}

TEST_CASE("high_pass: linearity and route identity") {
    Rng rng(17);
    Tensor<float> xa(Shape{3, 10, 10}), xb(Shape{3, 10, 10});
    for (std::int64_t i = 0; i < xa.numel(); ++i) {
        xa[i] = static_cast<float>(rng.uniform());
        xb[i] = static_cast<float>(rng.uniform());
    }
    const float a = 0.7f, b = -0.4f;
    Tensor<float> mix(Shape{3, 10, 10});
    for (std::int64_t i = 0; i < mix.numel(); ++i) mix[i] = a * xa[i] + b * xb[i];
    auto ha = high_pass(ImageTensor{xa, Range::Unit, ColorSpace::Rgb});
    auto hb = high_pass(ImageTensor{xb, Range::Unit, ColorSpace::Rgb});
    auto hm = high_pass(ImageTensor{mix, Range::Unbounded, ColorSpace::Rgb});
    Tensor<float> lin(Shape{3, 10, 10});
    for (std::int64_t i = 0; i < lin.numel(); ++i) lin[i] = a * ha.data[i] + b * hb.data[i];
    CHECK(max_abs_diff(hm.data, lin) < 1e-6f);

    // the tensor route is the autograd route run on a constant: identical bits
    auto via_var = high_pass(Var<float>::constant(xa)).value();
    CHECK(same_data(via_var, ha.data));

    // gradient flows through the blur
    auto xv = Var<double>::leaf(xa.cast<double>(), true);
    backward(mean_all(square(high_pass(xv))));
    bool any = false;
    for (std::int64_t i = 0; i < xv.grad().numel(); ++i)
        if (xv.grad()[i] != 0.0) any = true;
    CHECK(any);
}

TEST_CASE("gaussian taps normalize and blur preserves mean") {
    auto taps = gaussian_taps<double>(2.0, 4);
    CHECK(taps.numel() == 9);
    double s = 0;
    for (int i = 0; i < 9; ++i) s += taps[i];
    CHECK(s == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(taps[4] > taps[3]);
    CHECK(taps[3] == taps[5]); // symmetry

    CHECK_THROWS_AS(gaussian_taps<double>(-1.0, 4), ArgumentError);
}

TEST_CASE("bilinear resize, crop, flip") {
    // constant image resizes to constant
    Tensor<float> c(Shape{3, 5, 7}, 0.42f);
    auto up = bilinear_resize(c, 11, 23);
    CHECK(up.shape() == Shape{3, 11, 23});
    for (std::int64_t i = 0; i < up.numel(); ++i) CHECK(up[i] == Catch::Approx(0.42f));

    // horizontal ramp stays monotone when resized
    Tensor<float> ramp(Shape{1, 4, 16});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 16; ++j) ramp.at(0, i, j) = static_cast<float>(j);
    auto half = bilinear_resize(ramp, 4, 8);
    for (int j = 0; j + 1 < 8; ++j) CHECK(half.at(0, 0, j) < half.at(0, 0, j + 1));

    // identity target size returns the input unchanged
    CHECK(same_data(bilinear_resize(ramp, 4, 16), ramp));

    Tensor<float> x(Shape{1, 4, 4});
    for (int i = 0; i < 16; ++i) x[i] = static_cast<float>(i);
    auto cr = crop(x, 1, 2, 2, 2);
    CHECK(cr.at(0, 0, 0) == 6.0f);
    CHECK(cr.at(0, 1, 1) == 11.0f);
    CHECK_THROWS_AS(crop(x, 3, 3, 2, 2), ArgumentError);

    auto fl = flip_horizontal(x);
    CHECK(fl.at(0, 0, 0) == 3.0f);
    CHECK(same_data(flip_horizontal(fl), x));
}
