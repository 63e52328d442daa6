#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>

#include "relume/core/adam.hpp"
#include "relume/core/serialize.hpp"
#include "relume/generators/generators.hpp"
#include "relume/losses/losses.hpp"
#include "relume/nrn/nrn.hpp"
#include "relume/tad/tad.hpp"
#include "relume/trainer/config.hpp"

namespace relume::trainer {

// ---------------------------------------------------------------------------
// training state
//
// Generator-side parameters (NRN, ME, G_H, G_L) and discriminator-side
// parameters (both appearance discriminators) live in two separate stores,
// each owned by its own optimizer, so the half-steps cannot touch each
// other's weights.

struct TrainerState {
    TrainingConfig config;
    ParamStore<float> gen_store;
    ParamStore<float> disc_store;
    nrn::NrnModel<float> nrn;
    generators::MaskExtractor<float> me;
    generators::GeneratorNet<float> g_h;
    generators::GeneratorNet<float> g_l;
    tad::AppearanceDiscriminator<float> d_h;
    tad::AppearanceDiscriminator<float> d_l;
    std::shared_ptr<tad::VlBackend<float>> backend;
    tad::PromptPair<float> prompts;
    Adam<float> opt_g;
    Adam<float> opt_d;
    Rng rng;
    long long epoch = 0;
    long long global_step = 0;

    TrainerState(const TrainingConfig& cfg, std::shared_ptr<tad::VlBackend<float>> vl, Rng init)
        : config(cfg),
          nrn(gen_store, "nrn", static_cast<int>(cfg.pe_levels), init),
          me(gen_store, "me", init),
          g_h(gen_store, "g_h", init),
          g_l(gen_store, "g_l", init),
          d_h(disc_store, "d_h", init),
          d_l(disc_store, "d_l", init),
          backend(std::move(vl)),
          prompts(tad::make_prompt_pair(*backend, cfg.prompt_low, cfg.prompt_high)),
          opt_g(gen_store, static_cast<float>(cfg.lr), static_cast<float>(cfg.adam_beta1),
                static_cast<float>(cfg.adam_beta2), static_cast<float>(cfg.adam_eps)),
          opt_d(disc_store, static_cast<float>(cfg.lr), static_cast<float>(cfg.adam_beta1),
                static_cast<float>(cfg.adam_beta2), static_cast<float>(cfg.adam_eps)),
          rng(Rng::mix(cfg.seed, 0x7ea11e5)) {}

    TrainerState(const TrainerState&) = delete;
    TrainerState& operator=(const TrainerState&) = delete;
};

// parameter initialization consumes one deterministic stream per run, so a
// config seed fully determines the starting weights
inline std::unique_ptr<TrainerState> make_trainer(const TrainingConfig& cfg,
                                                  std::shared_ptr<tad::VlBackend<float>> backend) {
    validate(cfg);
    return std::make_unique<TrainerState>(cfg, std::move(backend), Rng(Rng::mix(cfg.seed, 0x1217)));
}

// ---------------------------------------------------------------------------
// one optimization step: generator side first, then discriminator side

namespace detail {

inline double scalar(const Var<float>& v) { return static_cast<double>(v.value()[0]); }

} // namespace detail

inline losses::LossReport train_step(TrainerState& st, const imaging::ImageTensor& i_l,
                                     const imaging::ImageTensor& i_h) {
    if (i_l.range != imaging::Range::Signed || i_h.range != imaging::Range::Signed)
        throw ArgumentError("train_step: inputs must be in [-1,1]");
    if (!(i_l.data.shape() == i_h.data.shape()))
        throw ArgumentError("train_step: low/high patch shapes must match");
    Var<float> vl = Var<float>::constant(i_l.data);
    Var<float> vh = Var<float>::constant(i_h.data);

    // generator half-step: the full objective; discriminators participate
    // frozen, so gradients stay on the generator side
    auto models = generators::bind_models<float>(st.nrn, st.me, st.g_h, st.g_l);
    generators::LoopOutputs<float> lo = generators::run_dual_loops(models, vl, vh);

    tad::AdvLosses<float> adv_h =
        tad::adversarial_loss(vh, lo.fake_high, st.d_h, *st.backend, st.prompts,
                              tad::Direction::ToHigh);
    tad::AdvLosses<float> adv_l =
        tad::adversarial_loss(vl, lo.fake_low, st.d_l, *st.backend, st.prompts,
                              tad::Direction::ToLow);

    Var<float> nr = scale(nrn::nrn_loss(lo.i_nrn, vl), static_cast<float>(st.config.w_nr));
    Var<float> adv_g =
        scale(add(adv_h.loss_g, adv_l.loss_g), static_cast<float>(st.config.w_adv));
    Var<float> con = scale(losses::consistency_loss(vl, lo.cyc_low, vh, lo.cyc_high),
                           static_cast<float>(st.config.w_con));
    const float w_cl = static_cast<float>(st.config.w_cl);
    Var<float> rec1 = scale(
        losses::cooperative_rec1(lo.pseudo_mask, lo.i_m, lo.pseudo_high, lo.fake_high), w_cl);
    Var<float> rec2 = scale(
        losses::cooperative_rec2(lo.pseudo_high_right, vh, lo.fake_low, lo.re_mask), w_cl);
    Var<float> insp =
        scale(losses::inspection_loss(lo.pseudo_high, lo.pseudo_low, st.d_h, st.d_l), w_cl);
    Var<float> g_total = losses::generator_total(nr, adv_g, con, rec1, rec2, insp);

    const float lr = static_cast<float>(lr_at(st.config, st.epoch));
    st.gen_store.zero_grads();
    backward(g_total);
    st.opt_g.clip_grad_norm(10.0f);
    st.opt_g.set_lr(lr);
    st.opt_g.step();

    // discriminator half-step: real vs generated, plus rejection of the
    // pseudo images (their generator history is cut). Generated and pseudo
    // images split the negative-class budget so each critic objective stays
    // class balanced; with an unbalanced sum a small-corpus critic collapses
    // to rejecting everything, including the reals.
    auto reject = [&](const tad::AppearanceDiscriminator<float>& d, const Var<float>& pseudo) {
        auto [pc, pe] = d.discriminate(detach(pseudo));
        return scale(add(bce_with_logits_mean(pc, 0.0f), bce_with_logits_mean(pe, 0.0f)), 0.5f);
    };
    auto endorse = [&](const tad::AppearanceDiscriminator<float>& d, const Var<float>& real) {
        auto [rc, re] = d.discriminate(real);
        return scale(add(bce_with_logits_mean(rc, 1.0f), bce_with_logits_mean(re, 1.0f)), 0.5f);
    };
    auto d_side = [&](const tad::AppearanceDiscriminator<float>& d, const Var<float>& adv_loss_d,
                      const Var<float>& real, const Var<float>& pseudo) {
        return add(scale(adv_loss_d, 0.5f),
                   add(scale(endorse(d, real), 0.25f), scale(reject(d, pseudo), 0.25f)));
    };
    Var<float> d_total = add(d_side(st.d_h, adv_h.loss_d, vh, lo.pseudo_high),
                             d_side(st.d_l, adv_l.loss_d, vl, lo.pseudo_low));
    st.disc_store.zero_grads();
    backward(d_total);
    st.opt_d.clip_grad_norm(10.0f);
    st.opt_d.set_lr(lr);
    st.opt_d.step();

    losses::LossReport report = losses::total_loss(
        detail::scalar(nr), detail::scalar(adv_g), detail::scalar(d_total), detail::scalar(con),
        detail::scalar(rec1), detail::scalar(rec2), detail::scalar(insp), st.global_step);
    ++st.global_step;
    return report;
}

// ---------------------------------------------------------------------------
// inference: normalize, mask, enhance; any input size (reflect padding to a
// multiple of 4 is applied and cropped back)

inline imaging::ImageTensor infer(const TrainerState& st, const imaging::ImageTensor& img) {
    imaging::ImageTensor input =
        img.range == imaging::Range::Signed ? img : imaging::to_signed(img);
    const int h = static_cast<int>(input.data.shape()[1]);
    const int w = static_cast<int>(input.data.shape()[2]);
    const int pad_b = (4 - h % 4) % 4;
    const int pad_r = (4 - w % 4) % 4;
    Var<float> x = Var<float>::constant(input.data);
    if (pad_b > 0 || pad_r > 0) x = pad2d(x, 0, pad_b, 0, pad_r, PadMode::Reflect);
    Var<float> i_a = st.me.forward(x).first;
    Var<float> out = st.g_h.forward(mul_map(st.nrn.forward(x), i_a));
    Tensor<float> result = imaging::crop(out.value(), 0, 0, h, w);
    // tanh output sits in [-1,1]; map to [0,1]
    for (std::int64_t i = 0; i < result.numel(); ++i)
        result[i] = std::min(1.0f, std::max(0.0f, 0.5f * (result[i] + 1.0f)));
    return imaging::ImageTensor(result, imaging::Range::Unit, imaging::ColorSpace::Rgb);
}

// ---------------------------------------------------------------------------
// checkpointing
//
// Self-describing binary file: magic, format version, the canonical config
// text and its hash, counters, rng state, then every parameter tensor and
// both optimizers' moment tensors by name. All float payloads are raw IEEE
// bit patterns, so a round trip is bit-identical.

inline constexpr char kCheckpointMagic[8] = {'R', 'L', 'M', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

namespace detail {

inline void write_params(std::ostream& os, const ParamStore<float>& store) {
    write_u64(os, store.names().size());
    for (const std::string& name : store.names()) {
        write_string(os, name);
        write_tensor(os, store.at(name).value());
    }
}

inline void read_params(std::istream& is, ParamStore<float>& store) {
    const std::uint64_t n = read_u64(is);
    if (n != store.names().size())
        throw CompatibilityError("checkpoint: parameter count mismatch");
    for (const std::string& name : store.names()) {
        const std::string got = read_string(is);
        if (got != name)
            throw CompatibilityError("checkpoint: expected parameter " + name + ", found " + got);
        Tensor<float> t = read_tensor<float>(is);
        Var<float>& p = store.at(name);
        if (!(t.shape() == p.shape()))
            throw CompatibilityError("checkpoint: shape mismatch for " + name);
        p.value_mut() = std::move(t);
    }
}

inline void write_adam(std::ostream& os, const Adam<float>& opt) {
    write_i64(os, opt.step_count());
    write_u64(os, opt.slots().size());
    for (const auto& [name, slot] : opt.slots()) {
        write_string(os, name);
        write_tensor(os, slot.m);
        write_tensor(os, slot.v);
    }
}

inline void read_adam(std::istream& is, Adam<float>& opt) {
    opt.set_step_count(read_i64(is));
    const std::uint64_t n = read_u64(is);
    if (n != opt.slots().size())
        throw CompatibilityError("checkpoint: optimizer slot count mismatch");
    for (auto& [name, slot] : opt.slots()) {
        const std::string got = read_string(is);
        if (got != name)
            throw CompatibilityError("checkpoint: expected optimizer slot " + name + ", found " +
                                     got);
        slot.m = read_tensor<float>(is);
        slot.v = read_tensor<float>(is);
    }
}

} // namespace detail

inline void save_checkpoint(const TrainerState& st, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u64(os, kCheckpointVersion);
    const std::string cfg = canonical_text(st.config);
    write_string(os, cfg);
    write_u64(os, detail::fnv1a64(cfg));
    write_i64(os, st.epoch);
    write_i64(os, st.global_step);
    const auto rng_state = st.rng.state();
    for (std::uint64_t word : rng_state) write_u64(os, word);
    detail::write_params(os, st.gen_store);
    detail::write_params(os, st.disc_store);
    detail::write_adam(os, st.opt_g);
    detail::write_adam(os, st.opt_d);
    if (!os) throw IoError("short write on checkpoint: " + path);
}

// Rebuilds a complete trainer from the file; the vision-language backend is
// runtime plumbing and is supplied by the caller.
inline std::unique_ptr<TrainerState> load_checkpoint(const std::string& path,
                                                     std::shared_ptr<tad::VlBackend<float>> backend) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("cannot open checkpoint: " + path);
    char magic[8] = {};
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw FormatError("not a checkpoint file: " + path);
    const std::uint64_t version = read_u64(is);
    if (version != kCheckpointVersion)
        throw CompatibilityError("checkpoint format version " + std::to_string(version) +
                                 " is not supported");
    const std::string cfg_text = read_string(is);
    const std::uint64_t stored_hash = read_u64(is);
    if (stored_hash != detail::fnv1a64(cfg_text))
        throw FormatError("checkpoint config hash mismatch (corrupt file?)");
    TrainingConfig cfg = parse_config(cfg_text);
    auto st = make_trainer(cfg, std::move(backend));
    st->epoch = read_i64(is);
    st->global_step = read_i64(is);
    std::array<std::uint64_t, 4> rng_state{};
    for (auto& word : rng_state) word = read_u64(is);
    st->rng.set_state(rng_state);
    detail::read_params(is, st->gen_store);
    detail::read_params(is, st->disc_store);
    detail::read_adam(is, st->opt_g);
    detail::read_adam(is, st->opt_d);
    if (!is) throw FormatError("checkpoint truncated: " + path);
    return st;
}

// guard for running a checkpoint against a caller-supplied config (e.g. the
// CLI's --pe-levels must match the trained model)
inline std::unique_ptr<TrainerState> load_checkpoint(const std::string& path,
                                                     std::shared_ptr<tad::VlBackend<float>> backend,
                                                     const TrainingConfig& expected) {
    auto st = load_checkpoint(path, std::move(backend));
    if (config_hash(st->config) != config_hash(expected))
        throw CompatibilityError("checkpoint config does not match the requested config");
    return st;
}

} // namespace relume::trainer
