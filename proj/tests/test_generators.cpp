#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "relume/generators/generators.hpp"
#include "relume/imaging/synth.hpp"
#include "relume/nrn/nrn.hpp"

using namespace relume;
using namespace relume::generators;

namespace {

Tensor<float> random_signed(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<float> t(Shape{3, h, w});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0f, 1.0f);
    return t;
}

bool bitwise_equal(const Tensor<float>& a, const Tensor<float>& b) {
    if (!(a.shape() == b.shape())) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

std::int64_t param_count(ParamStore<float>& store, const std::string& prefix) {
    std::int64_t n = 0;
    for (const auto& name : store.names())
        if (name.rfind(prefix, 0) == 0) n += store.at(name).value().numel();
    return n;
}

} // namespace

TEST_CASE("MaskExtractor: head shapes, ranges, and input sensitivity") {
    ParamStore<float> store;
    Rng rng(3);
    MaskExtractor<float> me(store, "me", rng);

    Var<float> x = Var<float>::constant(random_signed(20, 24, 1));
    auto [i_a, i_m] = me.forward(x);
    REQUIRE(i_a.shape() == Shape{1, 20, 24});
    REQUIRE(i_m.shape() == Shape{3, 20, 24});
    for (std::int64_t i = 0; i < i_a.value().numel(); ++i) {
        CHECK(i_a.value()[i] >= 0.0f);
        CHECK(i_a.value()[i] <= 1.0f);
    }
    for (std::int64_t i = 0; i < i_m.value().numel(); ++i) {
        CHECK(i_m.value()[i] >= 0.0f);
        CHECK(i_m.value()[i] <= 1.0f);
    }

    // untrained net is not a constant function
    Var<float> y = Var<float>::constant(random_signed(20, 24, 2));
    auto [j_a, j_m] = me.forward(y);
    CHECK(max_abs_diff(i_a.value(), j_a.value()) > 0.0f);
    CHECK(max_abs_diff(i_m.value(), j_m.value()) > 0.0f);

    // deterministic under fixed parameters
    auto [k_a, k_m] = me.forward(x);
    CHECK(bitwise_equal(i_a.value(), k_a.value()));
    CHECK(bitwise_equal(i_m.value(), k_m.value()));

    Tensor<float> flat(Shape{20, 24});
    CHECK_THROWS_AS(me.forward(Var<float>::constant(flat)), ArgumentError);
}

TEST_CASE("enhance/degrade: attention identity and annihilator") {
    ParamStore<float> store;
    Rng rng(5);
    GeneratorNet<float> g(store, "g", rng);

    Var<float> img = Var<float>::constant(random_signed(16, 16, 7));
    Tensor<float> ones(Shape{1, 16, 16});
    ones.fill(1.0f);
    Tensor<float> zeros(Shape{1, 16, 16});

    // i_a of all ones feeds img through unchanged: same forward path, bitwise
    Tensor<float> masked = enhance(g, img, Var<float>::constant(ones)).value();
    Tensor<float> direct = g.forward(img).value();
    CHECK(bitwise_equal(masked, direct));

    // i_a of all zeros annihilates the input
    Tensor<float> zero_img(Shape{3, 16, 16});
    Tensor<float> from_zeros = degrade(g, img, Var<float>::constant(zeros)).value();
    Tensor<float> from_zero_img = g.forward(Var<float>::constant(zero_img)).value();
    CHECK(bitwise_equal(from_zeros, from_zero_img));

    // attention map must match the image spatially
    Tensor<float> small(Shape{1, 8, 16});
    CHECK_THROWS_AS(enhance(g, img, Var<float>::constant(small)), ArgumentError);
    Tensor<float> multi(Shape{3, 16, 16});
    CHECK_THROWS_AS(enhance(g, img, Var<float>::constant(multi)), ArgumentError);
}

TEST_CASE("GeneratorNet: shape preservation and output range") {
    ParamStore<float> store;
    Rng rng(9);
    GeneratorNet<float> g(store, "g", rng);

    for (auto [h, w] : {std::pair{256, 256}, std::pair{400, 600}}) {
        Var<float> img = Var<float>::constant(random_signed(h, w, 11));
        Tensor<float> ones(Shape{1, h, w});
        ones.fill(1.0f);
        Tensor<float> out = enhance(g, img, Var<float>::constant(ones)).value();
        REQUIRE(out.shape() == Shape{3, h, w});
        float lo = 0.0f, hi = 0.0f;
        for (std::int64_t i = 0; i < out.numel(); ++i) {
            lo = std::min(lo, out[i]);
            hi = std::max(hi, out[i]);
        }
        CHECK(lo >= -1.0f);
        CHECK(hi <= 1.0f);
    }

    // deterministic under fixed parameters
    Var<float> img = Var<float>::constant(random_signed(16, 16, 13));
    Tensor<float> a = g.forward(img).value();
    Tensor<float> b = g.forward(img).value();
    CHECK(bitwise_equal(a, b));

    // dims must allow the two exact up/down round trips
    CHECK_THROWS_AS(g.forward(Var<float>::constant(random_signed(18, 16, 1))), ArgumentError);
    Tensor<float> gray(Shape{1, 16, 16});
    CHECK_THROWS_AS(g.forward(Var<float>::constant(gray)), ArgumentError);
}

TEST_CASE("enhance wrapper: rejects unit-range images") {
    ParamStore<float> store;
    Rng rng(15);
    GeneratorNet<float> g(store, "g", rng);
    imaging::ImageTensor unit{imaging::textured_scene(16, 16, 2), imaging::Range::Unit,
                              imaging::ColorSpace::Rgb};
    imaging::ImageTensor ones{Tensor<float>(Shape{1, 16, 16}), imaging::Range::Unit,
                              imaging::ColorSpace::Luma};
    ones.data.fill(1.0f);
    CHECK_THROWS_AS(enhance(g, unit, ones), ArgumentError);
    CHECK_THROWS_AS(degrade(g, unit, ones), ArgumentError);
}

TEST_CASE("run_dual_loops: identity bundle collapses the left loop") {
    ParamStore<float> store;
    Rng rng(17);
    MaskExtractor<float> me(store, "me", rng);
    auto models = identity_models(me);

    Var<float> i_l = Var<float>::constant(random_signed(12, 12, 19));
    Var<float> i_h = Var<float>::constant(random_signed(12, 12, 23));
    LoopOutputs<float> lo = run_dual_loops(models, i_l, i_h);

    // identity NRN and generators with unit attention: the cycle returns the
    // normalized input untouched
    CHECK(bitwise_equal(lo.i_nrn.value(), i_l.value()));
    CHECK(bitwise_equal(lo.fake_high.value(), i_l.value()));
    CHECK(bitwise_equal(lo.cyc_low.value(), lo.i_nrn.value()));
    CHECK(bitwise_equal(lo.fake_low.value(), i_h.value()));
    CHECK(bitwise_equal(lo.cyc_high.value(), i_h.value()));
}

TEST_CASE("run_dual_loops: pre-clamp pseudo identity is exact") {
    ParamStore<float> store;
    Rng rng(29);
    MaskExtractor<float> me(store, "me", rng);
    GeneratorNet<float> g_h(store, "g_h", rng);
    GeneratorNet<float> g_l(store, "g_l", rng);
    ParamStore<float> nrn_store;
    Rng nrn_rng(31);
    nrn::NrnModel<float> nrn(nrn_store, "nrn", 2, nrn_rng);

    Var<float> i_l = Var<float>::constant(random_signed(16, 16, 37));
    Var<float> i_h = Var<float>::constant(random_signed(16, 16, 41));
    auto models = bind_models<float>(nrn, me, g_h, g_l);
    LoopOutputs<float> lo = run_dual_loops(models, i_l, i_h);

    // pseudo_high_pre is literally i_l + i_m, before any clamping
    Tensor<float> expect = add(i_l, lo.i_m).value();
    CHECK(bitwise_equal(lo.pseudo_high_pre.value(), expect));

    // the published pseudo image is its clamp
    Tensor<float> clamped = clamp(lo.pseudo_high_pre, -1.0f, 1.0f).value();
    CHECK(bitwise_equal(lo.pseudo_high.value(), clamped));

    // pseudo_mask is the mask the left branch implies
    Tensor<float> pm = sub(lo.fake_high, i_l).value();
    CHECK(bitwise_equal(lo.pseudo_mask.value(), pm));

    // pseudo_low mirrors with subtraction
    Tensor<float> pl = clamp(sub(i_h, lo.i_m), -1.0f, 1.0f).value();
    CHECK(bitwise_equal(lo.pseudo_low.value(), pl));

    // every tensor the objective consumes is populated and finite
    for (const Var<float>* v :
         {&lo.i_a, &lo.i_m, &lo.i_nrn, &lo.fake_high, &lo.cyc_low, &lo.fake_low, &lo.cyc_high,
          &lo.re_mask, &lo.pseudo_high_pre, &lo.pseudo_high, &lo.pseudo_mask,
          &lo.pseudo_high_right, &lo.pseudo_low}) {
        REQUIRE(v->value().numel() > 0);
        CHECK(v->value().all_finite());
    }
}

TEST_CASE("run_dual_loops: finite outputs across 100 random inits") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ParamStore<float> store;
        Rng rng(Rng::mix(900, seed));
        MaskExtractor<float> me(store, "me", rng);
        GeneratorNet<float> g_h(store, "g_h", rng);
        GeneratorNet<float> g_l(store, "g_l", rng);
        ParamStore<float> nrn_store;
        Rng nrn_rng(Rng::mix(901, seed));
        nrn::NrnModel<float> nrn(nrn_store, "nrn", 2, nrn_rng);

        Var<float> i_l = Var<float>::constant(random_signed(8, 8, Rng::mix(902, seed)));
        Var<float> i_h = Var<float>::constant(random_signed(8, 8, Rng::mix(903, seed)));
        LoopOutputs<float> lo = run_dual_loops(bind_models<float>(nrn, me, g_h, g_l), i_l, i_h);
        REQUIRE(lo.fake_high.value().all_finite());
        REQUIRE(lo.fake_low.value().all_finite());
        REQUIRE(lo.cyc_low.value().all_finite());
        REQUIRE(lo.cyc_high.value().all_finite());
        REQUIRE(lo.pseudo_high.value().all_finite());
        REQUIRE(lo.pseudo_low.value().all_finite());
        REQUIRE(lo.pseudo_high_right.value().all_finite());
    }
}

TEST_CASE("GeneratorNet: both directions share one architecture") {
    ParamStore<float> store;
    Rng rng(43);
    GeneratorNet<float> g_h(store, "g_h", rng);
    GeneratorNet<float> g_l(store, "g_l", rng);
    const std::int64_t n_h = param_count(store, "g_h.");
    const std::int64_t n_l = param_count(store, "g_l.");
    CHECK(n_h == n_l);
    CHECK(n_h > 0);
}
