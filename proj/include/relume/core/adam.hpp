#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "relume/core/nn.hpp"

namespace relume {

// Adam with bias correction over a ParamStore. step() applies accumulated
// gradients and clears nothing; call zero_grads() on the store between steps.
template <class T>
class Adam {
public:
    struct Slot {
        Tensor<T> m, v;
    };

    Adam(ParamStore<T>& store, T lr, T beta1 = T(0.5), T beta2 = T(0.999), T eps = T(1e-8))
        : store_(&store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const std::string& name : store.names()) {
            const Shape& s = store.at(name).shape();
            slots_.emplace(name, Slot{Tensor<T>(s), Tensor<T>(s)});
        }
    }

    void set_lr(T lr) { lr_ = lr; }
    T lr() const { return lr_; }
    std::int64_t step_count() const { return t_; }

    // global-norm gradient clipping; returns the pre-clip norm
    T clip_grad_norm(T max_norm) {
        double total = 0;
        for (const std::string& name : store_->names()) {
            const Tensor<T>& g = store_->at(name).grad();
            for (std::int64_t i = 0; i < g.numel(); ++i)
                total += static_cast<double>(g[i]) * static_cast<double>(g[i]);
        }
        const T norm = static_cast<T>(std::sqrt(total));
        if (norm > max_norm && norm > T(0)) {
            const T s = max_norm / norm;
            for (const std::string& name : store_->names()) {
                Var<T>& p = store_->at(name);
                Tensor<T>& g = const_cast<Tensor<T>&>(p.grad());
                for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= s;
            }
        }
        return norm;
    }

    void step() {
        ++t_;
        const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1_), static_cast<double>(t_)));
        const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2_), static_cast<double>(t_)));
        for (const std::string& name : store_->names()) {
            Var<T>& p = store_->at(name);
            const Tensor<T>& g = p.grad();
            Slot& s = slots_.at(name);
            Tensor<T>& val = p.value_mut();
            for (std::int64_t i = 0; i < val.numel(); ++i) {
                s.m[i] = beta1_ * s.m[i] + (T(1) - beta1_) * g[i];
                s.v[i] = beta2_ * s.v[i] + (T(1) - beta2_) * g[i] * g[i];
                const T mhat = s.m[i] / bc1;
                const T vhat = s.v[i] / bc2;
                val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    // checkpoint access
    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    ParamStore<T>* store_;
    T lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

} // namespace relume
