#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "relume/core/autograd.hpp"
#include "relume/core/rng.hpp"

namespace relume {

// Flat registry of named learnable tensors. Modules register parameters under
// hierarchical dotted names; optimizers and checkpoints consume the map.
template <class T>
class ParamStore {
public:
    Var<T>& create(const std::string& name, Shape shape) {
        if (params_.count(name)) throw InternalError("duplicate parameter: " + name);
        auto [it, ok] = params_.emplace(name, Var<T>::leaf(Tensor<T>(shape), true));
        (void)ok;
        order_.push_back(name);
        return it->second;
    }
    Var<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw NotFoundError("no parameter named " + name);
        return it->second;
    }
    const Var<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw NotFoundError("no parameter named " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    // registration order, stable across runs
    const std::vector<std::string>& names() const { return order_; }
    size_t size() const { return params_.size(); }

    void zero_grads() {
        for (auto& [name, v] : params_) v.zero_grad();
    }

private:
    std::map<std::string, Var<T>> params_;
    std::vector<std::string> order_;
};

namespace init {

// DCGAN-style initialization for conv stacks
template <class T>
void normal(Tensor<T>& t, Rng& rng, T stddev) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.gaussian()) * stddev;
}

// Kaiming uniform for fully-connected layers, fan_in mode
template <class T>
void kaiming_uniform(Tensor<T>& t, Rng& rng, int fan_in) {
    const T bound = std::sqrt(T(6) / static_cast<T>(fan_in));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
}

} // namespace init

// ---------------------------------------------------------------------------
// layers
//
// Layers hold references into a ParamStore; forward() chains autograd ops.
// All take and return (C,H,W) vars except Linear, which is (N,F).

template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamStore<T>& store, const std::string& name, int in_ch, int out_ch, int kernel,
           int stride, int pad, PadMode pad_mode, Rng& rng, bool bias = true)
        : stride_(stride), pad_(pad), pad_mode_(pad_mode), has_bias_(bias) {
        Var<T>& w = store.create(name + ".w", Shape{out_ch, in_ch, kernel, kernel});
        init::normal(w.value_mut(), rng, T(0.02));
        w_ = w;
        if (bias) {
            b_ = store.create(name + ".b", Shape{out_ch});
        }
    }

    // frozen: parameters enter the graph detached, so the call contributes
    // no gradient to them (used for generator-side passes through a
    // discriminator)
    Var<T> forward(const Var<T>& x, bool frozen = false) const {
        Var<T> h = pad_ > 0 ? pad2d(x, pad_, pad_, pad_, pad_, pad_mode_) : x;
        Var<T> y = conv2d_valid(h, frozen ? detach(w_) : w_, stride_);
        if (has_bias_) y = add_channels(y, frozen ? detach(b_) : b_);
        return y;
    }

private:
    Var<T> w_, b_;
    int stride_ = 1, pad_ = 0;
    PadMode pad_mode_ = PadMode::Zero;
    bool has_bias_ = true;
};

template <class T>
class Linear {
public:
    Linear() = default;
    Linear(ParamStore<T>& store, const std::string& name, int in_dim, int out_dim, Rng& rng)
        : w_(store.create(name + ".w", Shape{out_dim, in_dim})),
          b_(store.create(name + ".b", Shape{out_dim})) {
        init::kaiming_uniform(w_.value_mut(), rng, in_dim);
        const T bound = T(1) / std::sqrt(static_cast<T>(in_dim));
        for (std::int64_t i = 0; i < b_.value_mut().numel(); ++i)
            b_.value_mut()[i] =
                static_cast<T>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
    }

    Var<T> forward(const Var<T>& x, bool frozen = false) const {
        return frozen ? linear(x, detach(w_), detach(b_)) : linear(x, w_, b_);
    }

private:
    Var<T> w_, b_;
};

template <class T>
class InstanceNorm2d {
public:
    InstanceNorm2d() = default;
    InstanceNorm2d(ParamStore<T>& store, const std::string& name, int channels)
        : gamma_(store.create(name + ".gamma", Shape{channels})),
          beta_(store.create(name + ".beta", Shape{channels})) {
        gamma_.value_mut().fill(T(1));
    }

    Var<T> forward(const Var<T>& x, bool frozen = false) const {
        return frozen ? instance_norm(x, detach(gamma_), detach(beta_))
                      : instance_norm(x, gamma_, beta_);
    }

private:
    Var<T> gamma_, beta_;
};

} // namespace relume
