#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "relume/imaging/synth.hpp"
#include "relume/tad/tad.hpp"
#include "relume/trainer/trainer.hpp"

using namespace relume;
using trainer::TrainingConfig;

namespace {

imaging::ImageTensor signed_img(Tensor<float> t) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = 2.0f * t[i] - 1.0f;
    return {std::move(t), imaging::Range::Signed, imaging::ColorSpace::Rgb};
}

// deterministic low/high training pair: the high image is the scene, the low
// image is the scene at half gain
std::pair<imaging::ImageTensor, imaging::ImageTensor> toy_pair(int size, std::uint64_t seed) {
    Tensor<float> scene = imaging::textured_scene(size, size, seed);
    return {signed_img(imaging::apply_gain(scene, 0.5f)), signed_img(scene)};
}

std::uint64_t hash_store(const ParamStore<float>& store) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const std::string& name : store.names()) {
        mix(name.data(), name.size());
        const Tensor<float>& t = store.at(name).value();
        mix(t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
    }
    return h;
}

TrainingConfig small_config(long long patch, std::uint64_t seed) {
    TrainingConfig cfg;
    cfg.patch = patch;
    cfg.seed = seed;
    return cfg;
}

bool reports_equal(const losses::LossReport& a, const losses::LossReport& b) {
    return a.step == b.step && a.nr == b.nr && a.adv_g == b.adv_g && a.adv_d == b.adv_d &&
           a.con == b.con && a.rec1 == b.rec1 && a.rec2 == b.rec2 && a.insp == b.insp &&
           a.cl == b.cl && a.total == b.total;
}

} // namespace

TEST_CASE("config: validation rejects out-of-contract values") {
    TrainingConfig ok;
    CHECK_NOTHROW(trainer::validate(ok));

    auto broken = [](auto&& mutate) {
        TrainingConfig c;
        mutate(c);
        return c;
    };
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.epochs = 0; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.lr = 0.0; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.lr = -1e-4; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.batch = 2; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.patch = 4; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.patch = 18; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.pe_levels = 0; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.pe_levels = 17; })), ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.checkpoint_every = 0; })),
                    ConfigError);
    CHECK_THROWS_AS(trainer::validate(broken([](auto& c) { c.w_adv = -0.5; })), ConfigError);
}

TEST_CASE("config: canonical text round trip, hash, parse errors") {
    TrainingConfig c;
    c.lr = 3e-4;
    c.patch = 64;
    c.seed = 42;
    c.prompt_low = "dim photo";
    const std::string text = trainer::canonical_text(c);
    TrainingConfig back = trainer::parse_config(text);
    CHECK(back == c);
    CHECK(trainer::config_hash(back) == trainer::config_hash(c));

    TrainingConfig d = c;
    d.pe_levels = 4;
    CHECK(trainer::config_hash(d) != trainer::config_hash(c));

    // comments and blank lines are ignored; unknown keys and bad values are not
    TrainingConfig commented = trainer::parse_config("# header\n\nlr = 1e-3\n");
    CHECK(commented.lr == 1e-3);
    CHECK_THROWS_AS(trainer::parse_config("granularity=9\n"), ConfigError);
    CHECK_THROWS_AS(trainer::parse_config("lr=abc\n"), ConfigError);
    CHECK_THROWS_AS(trainer::parse_config("just a line\n"), ConfigError);
    CHECK_THROWS_AS(trainer::parse_config("batch=2\n"), ConfigError);
}

TEST_CASE("lr schedule: constant head, linear tail, endpoints") {
    TrainingConfig c; // epochs=300, lr=2e-4

    CHECK(trainer::lr_at(c, 0) == 2e-4);
    CHECK(trainer::lr_at(c, 99) == 2e-4);
    // continuous at the joint
    CHECK(trainer::lr_at(c, 100) == Catch::Approx(2e-4).margin(1e-16));
    // midpoint of the ramp
    CHECK(trainer::lr_at(c, 200) == Catch::Approx(1e-4).margin(1e-16));
    CHECK(trainer::lr_at(c, 300) == 0.0);

    // monotone nonincreasing across the whole range
    double prev = trainer::lr_at(c, 0);
    for (long long e = 1; e <= 300; ++e) {
        const double cur = trainer::lr_at(c, e);
        CHECK(cur <= prev);
        prev = cur;
    }

    CHECK_THROWS_AS(trainer::lr_at(c, -1), ArgumentError);
    CHECK_THROWS_AS(trainer::lr_at(c, 301), ArgumentError);

    // short runs decay over the whole run
    TrainingConfig s;
    s.epochs = 50;
    CHECK(trainer::lr_at(s, 0) == Catch::Approx(2e-4).margin(1e-16));
    CHECK(trainer::lr_at(s, 25) == Catch::Approx(1e-4).margin(1e-16));
    CHECK(trainer::lr_at(s, 50) == 0.0);
}

TEST_CASE("make_trainer: seed determines weights, stores split by role") {
    auto backend = std::make_shared<tad::StubBackend<float>>(0);
    auto a = trainer::make_trainer(small_config(16, 9), backend);
    auto b = trainer::make_trainer(small_config(16, 9), backend);
    CHECK(hash_store(a->gen_store) == hash_store(b->gen_store));
    CHECK(hash_store(a->disc_store) == hash_store(b->disc_store));

    auto c = trainer::make_trainer(small_config(16, 10), backend);
    CHECK(hash_store(a->gen_store) != hash_store(c->gen_store));

    // generator-side store holds NRN+ME+G_H+G_L, discriminator-side both critics
    for (const std::string& name : a->gen_store.names()) {
        const bool gen_side = name.rfind("nrn.", 0) == 0 || name.rfind("me.", 0) == 0 ||
                              name.rfind("g_h.", 0) == 0 || name.rfind("g_l.", 0) == 0;
        CHECK(gen_side);
    }
    for (const std::string& name : a->disc_store.names()) {
        const bool disc_side = name.rfind("d_h.", 0) == 0 || name.rfind("d_l.", 0) == 0;
        CHECK(disc_side);
    }
    CHECK(a->gen_store.size() > 0);
    CHECK(a->disc_store.size() > 0);
}

TEST_CASE("train_step: report invariants, step counter, input contract") {
    auto st = trainer::make_trainer(small_config(16, 3), std::make_shared<tad::StubBackend<float>>(0));
    auto [il, ih] = toy_pair(16, 501);

    for (int s = 0; s < 5; ++s) {
        losses::LossReport r = trainer::train_step(*st, il, ih);
        CHECK(r.step == s);
        for (double v : {r.nr, r.adv_g, r.adv_d, r.con, r.rec1, r.rec2, r.insp, r.cl, r.total}) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
        CHECK(r.cl == r.rec1 + r.rec2 + r.insp);
        CHECK(r.total == r.nr + r.adv_g + r.con + r.cl);
    }

    // inputs must be signed-range patches of identical shape
    auto [ul, uh] = toy_pair(16, 502);
    imaging::ImageTensor unit_range(Tensor<float>(Shape{3, 16, 16}), imaging::Range::Unit,
                                    imaging::ColorSpace::Rgb);
    CHECK_THROWS_AS(trainer::train_step(*st, unit_range, uh), ArgumentError);
    auto [big_l, big_h] = toy_pair(32, 503);
    CHECK_THROWS_AS(trainer::train_step(*st, ul, big_h), ArgumentError);

    // a numeric fault in the inputs aborts the step
    auto [nl, nh] = toy_pair(16, 504);
    nl.data[7] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(trainer::train_step(*st, nl, nh), NumericError);
}

TEST_CASE("half-steps: each side's update leaves the other side's weights untouched") {
    auto st = trainer::make_trainer(small_config(16, 21), std::make_shared<tad::StubBackend<float>>(0));
    auto [il, ih] = toy_pair(16, 77);
    Var<float> vl = Var<float>::constant(il.data);
    Var<float> vh = Var<float>::constant(ih.data);

    // replay the two half-steps through the public pieces so the stores can be
    // hashed between them
    for (int s = 0; s < 10; ++s) {
        auto models = generators::bind_models<float>(st->nrn, st->me, st->g_h, st->g_l);
        auto lo = generators::run_dual_loops(models, vl, vh);
        auto adv_h = tad::adversarial_loss(vh, lo.fake_high, st->d_h, *st->backend, st->prompts,
                                           tad::Direction::ToHigh);
        auto adv_l = tad::adversarial_loss(vl, lo.fake_low, st->d_l, *st->backend, st->prompts,
                                           tad::Direction::ToLow);
        Var<float> nr = nrn::nrn_loss(lo.i_nrn, vl);
        Var<float> adv_g = add(adv_h.loss_g, adv_l.loss_g);
        Var<float> con = losses::consistency_loss(vl, lo.cyc_low, vh, lo.cyc_high);
        Var<float> rec1 =
            losses::cooperative_rec1(lo.pseudo_mask, lo.i_m, lo.pseudo_high, lo.fake_high);
        Var<float> rec2 =
            losses::cooperative_rec2(lo.pseudo_high_right, vh, lo.fake_low, lo.re_mask);
        Var<float> insp = losses::inspection_loss(lo.pseudo_high, lo.pseudo_low, st->d_h, st->d_l);
        Var<float> g_total = losses::generator_total(nr, adv_g, con, rec1, rec2, insp);

        const std::uint64_t disc_before = hash_store(st->disc_store);
        st->gen_store.zero_grads();
        backward(g_total);
        st->opt_g.clip_grad_norm(10.0f);
        st->opt_g.step();
        CHECK(hash_store(st->disc_store) == disc_before);

        Var<float> d_total = add(adv_h.loss_d, adv_l.loss_d);
        const std::uint64_t gen_before = hash_store(st->gen_store);
        st->disc_store.zero_grads();
        backward(d_total);
        st->opt_d.clip_grad_norm(10.0f);
        st->opt_d.step();
        CHECK(hash_store(st->gen_store) == gen_before);
    }
}

TEST_CASE("train_step: deterministic given config seed and input sequence") {
    auto backend = std::make_shared<tad::StubBackend<float>>(0);
    auto a = trainer::make_trainer(small_config(16, 12), backend);
    auto b = trainer::make_trainer(small_config(16, 12), backend);

    std::vector<losses::LossReport> ra, rb;
    for (int s = 0; s < 10; ++s) {
        auto [il, ih] = toy_pair(16, 600 + static_cast<std::uint64_t>(s));
        ra.push_back(trainer::train_step(*a, il, ih));
        rb.push_back(trainer::train_step(*b, il, ih));
    }
    for (int s = 0; s < 10; ++s) CHECK(reports_equal(ra[static_cast<size_t>(s)], rb[static_cast<size_t>(s)]));

    // a different weight-init seed changes the trajectory
    auto c = trainer::make_trainer(small_config(16, 13), backend);
    auto [il, ih] = toy_pair(16, 600);
    CHECK(trainer::train_step(*c, il, ih).total != ra[0].total);
}

TEST_CASE("train_step: 200 steps on one pair reduces the total loss") {
    auto st = trainer::make_trainer(small_config(16, 4), std::make_shared<tad::StubBackend<float>>(0));
    auto [il, ih] = toy_pair(16, 321);
    double first = 0.0, last = 0.0;
    for (int s = 0; s < 200; ++s) {
        losses::LossReport r = trainer::train_step(*st, il, ih);
        if (s == 0) first = r.total;
        last = r.total;
        REQUIRE(std::isfinite(r.total));
    }
    CHECK(last < first);
}

TEST_CASE("train_step: finite reports across 100 init seeds x 3 steps") {
    auto backend = std::make_shared<tad::StubBackend<float>>(0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto st = trainer::make_trainer(small_config(8, seed), backend);
        auto [il, ih] = toy_pair(8, Rng::mix(1000, seed));
        for (int s = 0; s < 3; ++s) {
            losses::LossReport r = trainer::train_step(*st, il, ih);
            for (double v :
                 {r.nr, r.adv_g, r.adv_d, r.con, r.rec1, r.rec2, r.insp, r.cl, r.total})
                REQUIRE(std::isfinite(v));
        }
    }
}

TEST_CASE("infer: range, shape preservation, determinism") {
    auto st = trainer::make_trainer(small_config(16, 6), std::make_shared<tad::StubBackend<float>>(0));

    // non-multiple-of-4 spatial size exercises the pad/crop-back path; an
    // untrained model must still emit a valid in-range image
    Tensor<float> scene = imaging::textured_scene(18, 22, 8);
    imaging::ImageTensor img(scene, imaging::Range::Unit, imaging::ColorSpace::Rgb);
    imaging::ImageTensor out = trainer::infer(*st, img);
    CHECK(out.range == imaging::Range::Unit);
    CHECK(out.data.shape() == Shape{3, 18, 22});
    for (std::int64_t i = 0; i < out.data.numel(); ++i) {
        CHECK(out.data[i] >= 0.0f);
        CHECK(out.data[i] <= 1.0f);
    }

    imaging::ImageTensor again = trainer::infer(*st, img);
    CHECK(std::memcmp(out.data.data(), again.data.data(),
                      sizeof(float) * static_cast<size_t>(out.data.numel())) == 0);
}

TEST_CASE("checkpoint: round trip restores inference and training bit for bit") {
    const std::string path = "ckpt_roundtrip.bin";
    auto backend = std::make_shared<tad::StubBackend<float>>(0);
    auto st = trainer::make_trainer(small_config(16, 30), backend);
    for (int s = 0; s < 3; ++s) {
        auto [il, ih] = toy_pair(16, 700 + static_cast<std::uint64_t>(s));
        trainer::train_step(*st, il, ih);
    }
    trainer::save_checkpoint(*st, path);
    auto re = trainer::load_checkpoint(path, backend);

    CHECK(re->global_step == st->global_step);
    CHECK(re->epoch == st->epoch);
    CHECK(trainer::config_hash(re->config) == trainer::config_hash(st->config));
    CHECK(hash_store(re->gen_store) == hash_store(st->gen_store));
    CHECK(hash_store(re->disc_store) == hash_store(st->disc_store));

    Tensor<float> scene = imaging::textured_scene(20, 20, 9);
    imaging::ImageTensor img(scene, imaging::Range::Unit, imaging::ColorSpace::Rgb);
    imaging::ImageTensor a = trainer::infer(*st, img);
    imaging::ImageTensor b = trainer::infer(*re, img);
    CHECK(std::memcmp(a.data.data(), b.data.data(),
                      sizeof(float) * static_cast<size_t>(a.data.numel())) == 0);

    // optimizer moments round-trip too: the next step matches exactly
    auto [il, ih] = toy_pair(16, 710);
    CHECK(reports_equal(trainer::train_step(*st, il, ih), trainer::train_step(*re, il, ih)));

    std::remove(path.c_str());
}

TEST_CASE("checkpoint: error taxonomy") {
    auto backend = std::make_shared<tad::StubBackend<float>>(0);
    CHECK_THROWS_AS(trainer::load_checkpoint("no_such_checkpoint.bin", backend), NotFoundError);

    const std::string garbage = "ckpt_garbage.bin";
    {
        std::ofstream os(garbage, std::ios::binary);
        os << "NOTACHECKPOINT";
    }
    CHECK_THROWS_AS(trainer::load_checkpoint(garbage, backend), FormatError);
    std::remove(garbage.c_str());

    const std::string wrong_version = "ckpt_version.bin";
    {
        std::ofstream os(wrong_version, std::ios::binary);
        os.write(trainer::kCheckpointMagic, sizeof(trainer::kCheckpointMagic));
        write_u64(os, trainer::kCheckpointVersion + 1);
    }
    CHECK_THROWS_AS(trainer::load_checkpoint(wrong_version, backend), CompatibilityError);
    std::remove(wrong_version.c_str());

    // config guard: a checkpoint trained at pe_levels=8 refuses pe_levels=4
    const std::string path = "ckpt_guard.bin";
    auto st = trainer::make_trainer(small_config(16, 31), backend);
    trainer::save_checkpoint(*st, path);
    TrainingConfig expected = small_config(16, 31);
    expected.pe_levels = 4;
    CHECK_THROWS_AS(trainer::load_checkpoint(path, backend, expected), CompatibilityError);
    TrainingConfig match = small_config(16, 31);
    CHECK_NOTHROW(trainer::load_checkpoint(path, backend, match));
    std::remove(path.c_str());

    // truncated file: cut a valid checkpoint short
    const std::string trunc = "ckpt_trunc.bin";
    trainer::save_checkpoint(*st, trunc);
    std::ifstream is(trunc, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    {
        std::ofstream os(trunc, std::ios::binary | std::ios::trunc);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS(trainer::load_checkpoint(trunc, backend));
    std::remove(trunc.c_str());
}
