#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "relume/core/autograd.hpp"
#include "relume/tad/tad.hpp"

namespace relume::losses {

// ---------------------------------------------------------------------------
// l1 terms
//
// Every term is a mean, not a sum, so loss magnitudes do not scale with
// patch size.

namespace detail {

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
    if (!(a.shape() == b.shape()))
        throw ArgumentError(std::string(what) + ": shape mismatch");
}

} // namespace detail

// cycle consistency: both closed loops must return to their inputs
template <class T>
Var<T> consistency_loss(const Var<T>& i_l, const Var<T>& cyc_l, const Var<T>& i_h,
                        const Var<T>& cyc_h) {
    detail::require_same_shape(i_l, cyc_l, "consistency_loss");
    detail::require_same_shape(i_h, cyc_h, "consistency_loss");
    return add(mean_abs_diff(cyc_l, i_l), mean_abs_diff(cyc_h, i_h));
}

// left-branch cooperation: the subtracted pseudo-mask must match the
// extracted mask, and the additive pseudo-high must match the generated one
template <class T>
Var<T> cooperative_rec1(const Var<T>& pseudo_mask, const Var<T>& mask, const Var<T>& pseudo_high,
                        const Var<T>& pred_high) {
    detail::require_same_shape(pseudo_mask, mask, "cooperative_rec1");
    detail::require_same_shape(pseudo_high, pred_high, "cooperative_rec1");
    return add(mean_abs_diff(pseudo_mask, mask), mean_abs_diff(pseudo_high, pred_high));
}

// right-branch cooperation: the re-assembled high image must match the real
// one, and the real high image must decompose into predicted low plus
// re-extracted mask (second term taken pre-clamp)
template <class T>
Var<T> cooperative_rec2(const Var<T>& recon_high, const Var<T>& i_h, const Var<T>& pred_low,
                        const Var<T>& pred_mask) {
    detail::require_same_shape(recon_high, i_h, "cooperative_rec2");
    detail::require_same_shape(pred_low, pred_mask, "cooperative_rec2");
    detail::require_same_shape(i_h, pred_low, "cooperative_rec2");
    return add(mean_abs_diff(recon_high, i_h),
               mean_all(abs_(sub(sub(i_h, pred_low), pred_mask))));
}

// authenticity inspection: both pseudo images should read as real to their
// domain's discriminator. Non-saturating generator-side form; the critics run
// frozen so the gradient reaches the mask extractor but not the critics.
template <class T>
Var<T> inspection_loss(const Var<T>& pseudo_high, const Var<T>& pseudo_low,
                       const tad::AppearanceDiscriminator<T>& d_h,
                       const tad::AppearanceDiscriminator<T>& d_l) {
    auto [hc, he] = d_h.discriminate(pseudo_high, true);
    auto [lc, le] = d_l.discriminate(pseudo_low, true);
    if (!hc.value().all_finite() || !he.value().all_finite() || !lc.value().all_finite() ||
        !le.value().all_finite())
        throw NumericError("inspection_loss: non-finite discriminator logits");
    auto paths = [](Var<T> a, Var<T> b) {
        return scale(add(bce_with_logits_mean(a, T(1)), bce_with_logits_mean(b, T(1))), T(0.5));
    };
    return add(paths(hc, he), paths(lc, le));
}

// ---------------------------------------------------------------------------
// totals and reporting

// generator-side objective: unit weights on every term
template <class T>
Var<T> generator_total(const Var<T>& nr, const Var<T>& adv_g, const Var<T>& con,
                       const Var<T>& rec1, const Var<T>& rec2, const Var<T>& insp) {
    Var<T> cl = add(add(rec1, rec2), insp);
    return add(add(nr, adv_g), add(con, cl));
}

// per-step scalar record; adv_d is tracked for monitoring and is not part of
// the generator-side total
struct LossReport {
    double nr = 0, adv_g = 0, adv_d = 0, con = 0;
    double rec1 = 0, rec2 = 0, insp = 0;
    double cl = 0, total = 0;
    long long step = 0;

    bool operator==(const LossReport&) const = default;
};

// assembles the report and enforces its invariants: cl = rec1 + rec2 + insp,
// total = nr + adv_g + con + cl
inline LossReport total_loss(double nr, double adv_g, double adv_d, double con, double rec1,
                             double rec2, double insp, long long step) {
    const struct {
        const char* name;
        double v;
    } parts[] = {{"nr", nr},     {"adv_g", adv_g}, {"adv_d", adv_d}, {"con", con},
                 {"rec1", rec1}, {"rec2", rec2},   {"insp", insp}};
    for (const auto& p : parts)
        if (!std::isfinite(p.v))
            throw NumericError(std::string("total_loss: non-finite term ") + p.name);
    LossReport r;
    r.nr = nr;
    r.adv_g = adv_g;
    r.adv_d = adv_d;
    r.con = con;
    r.rec1 = rec1;
    r.rec2 = rec2;
    r.insp = insp;
    r.cl = rec1 + rec2 + insp;
    r.total = nr + adv_g + con + r.cl;
    r.step = step;
    return r;
}

// one JSON object per line; keys fixed, values at full double precision so
// identical runs serialize to identical streams
inline void write_jsonl_line(std::ostream& os, const LossReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%lld,\"nr\":%.17g,\"adv_g\":%.17g,\"adv_d\":%.17g,\"con\":%.17g,"
                  "\"rec1\":%.17g,\"rec2\":%.17g,\"insp\":%.17g,\"cl\":%.17g,\"total\":%.17g}\n",
                  r.step, r.nr, r.adv_g, r.adv_d, r.con, r.rec1, r.rec2, r.insp, r.cl, r.total);
    os << buf;
}

} // namespace relume::losses
