#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "relume/core/blas.hpp"
#include "relume/core/errors.hpp"
#include "relume/core/tensor.hpp"

namespace relume {

template <class T>
class Var;

namespace detail {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    void ensure_grad() {
        if (!grad_alloc) {
            grad = Tensor<T>(value.shape());
            grad_alloc = true;
        }
    }
    void accumulate(const Tensor<T>& g) {
        ensure_grad();
        const std::int64_t n = grad.numel();
        for (std::int64_t i = 0; i < n; ++i) grad[i] += g[i];
    }
};

} // namespace detail

// Handle to a node of the dynamically-built computation graph. Copy is
// shallow; the graph is freed when the last handle to its sink dies.
template <class T>
class Var {
public:
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Tensor<T> v, bool requires_grad) {
        auto n = std::make_shared<detail::Node<T>>();
        n->value = std::move(v);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }
    static Var constant(Tensor<T> v) { return leaf(std::move(v), false); }
    static Var scalar(T v) { return constant(Tensor<T>::scalar(v)); }

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& value_mut() { return n_->value; }
    const Shape& shape() const { return n_->value.shape(); }
    bool requires_grad() const { return n_->requires_grad; }

    // Zero-valued tensor when no gradient has been accumulated yet.
    const Tensor<T>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (n_->grad_alloc) n_->grad.fill(T(0));
    }

    NodePtr node() const { return n_; }

private:
    NodePtr n_;
};

namespace detail {

template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents) {
        if (!p.defined()) throw InternalError("op on undefined Var");
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward_fn);
    }
    return Var<T>(std::move(n));
}

} // namespace detail

// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1.
template <class T>
void backward(const Var<T>& root) {
    if (root.value().numel() != 1)
        throw ArgumentError("backward: root must be scalar, got " + root.shape().str());
    if (!root.requires_grad()) return;

    using Node = detail::Node<T>;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // iterative post-order DFS over grad-requiring nodes
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad();
    root.node()->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise ops

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ArgumentError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
    return detail::make_op<T>(std::move(out), {a, b}, [](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad);
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ArgumentError("sub: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
    return detail::make_op<T>(std::move(out), {a, b}, [](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] -= n.grad[i];
        }
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ArgumentError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
    return detail::make_op<T>(std::move(out), {a, b}, [va = a.value(), vb = b.value()](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            auto& p = *n.parents[0];
            p.ensure_grad();
            for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[i] * vb[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[i] * va[i];
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
    return detail::make_op<T>(std::move(out), {a}, [s](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[i] * s;
    });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T s) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
    return detail::make_op<T>(std::move(out), {a},
                              [](detail::Node<T>& n) { n.parents[0]->accumulate(n.grad); });
}

template <class T>
Var<T> neg(const Var<T>& a) {
    return scale(a, T(-1));
}

template <class T>
Var<T> abs_(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    return detail::make_op<T>(std::move(out), {a}, [va = a.value()](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) {
            const T s = va[i] > T(0) ? T(1) : (va[i] < T(0) ? T(-1) : T(0));
            p.grad[i] += n.grad[i] * s;
        }
    });
}

// Gradient passes only strictly inside (lo, hi).
template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
    return detail::make_op<T>(std::move(out), {a}, [va = a.value(), lo, hi](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            if (va[i] > lo && va[i] < hi) p.grad[i] += n.grad[i];
    });
}

template <class T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(T(0), out[i]);
    return detail::make_op<T>(std::move(out), {a}, [va = a.value()](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            if (va[i] > T(0)) p.grad[i] += n.grad[i];
    });
}

template <class T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        if (out[i] < T(0)) out[i] *= slope;
    return detail::make_op<T>(std::move(out), {a}, [va = a.value(), slope](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            p.grad[i] += n.grad[i] * (va[i] > T(0) ? T(1) : slope);
    });
}

template <class T>
Var<T> tanh_(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    // backward reads the op's own output from n.value
    return detail::make_op<T>(std::move(out), {a}, [](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            p.grad[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
    });
}

template <class T>
Var<T> sigmoid_(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const T x = out[i];
        out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    }
    return detail::make_op<T>(std::move(out), {a}, [](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            p.grad[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
    });
}

template <class T>
Var<T> square(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
    return detail::make_op<T>(std::move(out), {a}, [va = a.value()](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[i] * T(2) * va[i];
    });
}

template <class T>
Var<T> sqrt_(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(out[i]);
    return detail::make_op<T>(std::move(out), {a}, [](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            p.grad[i] += n.grad[i] * T(0.5) / n.value[i];
    });
}

template <class T>
Var<T> detach(const Var<T>& a) {
    return Var<T>::constant(a.value());
}

// ---------------------------------------------------------------------------
// reductions

template <class T>
Var<T> sum_all(const Var<T>& a) {
    T s = 0;
    for (std::int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
    return detail::make_op<T>(Tensor<T>::scalar(s), {a}, [](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        const T g = n.grad[0];
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
    });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
    const T n_elems = static_cast<T>(a.value().numel());
    T s = 0;
    for (std::int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
    return detail::make_op<T>(Tensor<T>::scalar(s / n_elems), {a}, [n_elems](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        const T g = n.grad[0] / n_elems;
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
    });
}

// mean |a - b|, the l1 discrepancy used throughout the objective
template <class T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
    return mean_all(abs_(sub(a, b)));
}

template <class T>
Var<T> dot(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ArgumentError("dot: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    T s = 0;
    for (std::int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i] * b.value()[i];
    return detail::make_op<T>(Tensor<T>::scalar(s), {a, b},
                              [va = a.value(), vb = b.value()](detail::Node<T>& n) {
                                  const T g = n.grad[0];
                                  if (n.parents[0]->requires_grad) {
                                      auto& p = *n.parents[0];
                                      p.ensure_grad();
                                      for (std::int64_t i = 0; i < p.grad.numel(); ++i)
                                          p.grad[i] += g * vb[i];
                                  }
                                  if (n.parents[1]->requires_grad) {
                                      auto& p = *n.parents[1];
                                      p.ensure_grad();
                                      for (std::int64_t i = 0; i < p.grad.numel(); ++i)
                                          p.grad[i] += g * va[i];
                                  }
                              });
}

// y = v / ||v||_2
template <class T>
Var<T> l2_normalize(const Var<T>& v) {
    T nrm2 = 0;
    for (std::int64_t i = 0; i < v.value().numel(); ++i) nrm2 += v.value()[i] * v.value()[i];
    const T nrm = std::sqrt(nrm2);
    if (!(nrm > T(0))) throw NumericError("l2_normalize: zero-norm vector");
    Tensor<T> out = v.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] /= nrm;
    return detail::make_op<T>(std::move(out), {v}, [nrm](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        const Tensor<T>& y = n.value;
        T gy = 0;
        for (std::int64_t i = 0; i < y.numel(); ++i) gy += n.grad[i] * y[i];
        for (std::int64_t i = 0; i < p.grad.numel(); ++i)
            p.grad[i] += (n.grad[i] - y[i] * gy) / nrm;
    });
}

// ---------------------------------------------------------------------------
// shape ops

template <class T>
Var<T> reshape(const Var<T>& a, Shape s) {
    if (s.numel() != a.value().numel())
        throw ArgumentError("reshape: element count mismatch " + a.shape().str() + " -> " + s.str());
    Tensor<T> out(s);
    std::copy(a.value().data(), a.value().data() + a.value().numel(), out.data());
    return detail::make_op<T>(std::move(out), {a}, [](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[i];
    });
}

// (C,H,W) -> (H*W, C) matrix of per-pixel feature rows
template <class T>
Var<T> chw_to_mat(const Var<T>& a) {
    const Shape& s = a.shape();
    if (s.rank() != 3) throw ArgumentError("chw_to_mat: expected rank-3, got " + s.str());
    const int c = s[0], h = s[1], w = s[2];
    Tensor<T> out(Shape{h * w, c});
    const Tensor<T>& x = a.value();
    for (int ci = 0; ci < c; ++ci)
        for (int p = 0; p < h * w; ++p) out[static_cast<std::int64_t>(p) * c + ci] = x[static_cast<std::int64_t>(ci) * h * w + p];
    return detail::make_op<T>(std::move(out), {a}, [c, h, w](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int px = 0; px < h * w; ++px)
                p.grad[static_cast<std::int64_t>(ci) * h * w + px] +=
                    n.grad[static_cast<std::int64_t>(px) * c + ci];
    });
}

// (H*W, C) matrix -> (C,H,W)
template <class T>
Var<T> mat_to_chw(const Var<T>& a, int h, int w) {
    const Shape& s = a.shape();
    if (s.rank() != 2 || s[0] != h * w)
        throw ArgumentError("mat_to_chw: expected (" + std::to_string(h * w) + ",C), got " + s.str());
    const int c = s[1];
    Tensor<T> out(Shape{c, h, w});
    const Tensor<T>& x = a.value();
    for (int ci = 0; ci < c; ++ci)
        for (int p = 0; p < h * w; ++p) out[static_cast<std::int64_t>(ci) * h * w + p] = x[static_cast<std::int64_t>(p) * c + ci];
    return detail::make_op<T>(std::move(out), {a}, [c, h, w](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int px = 0; px < h * w; ++px)
                p.grad[static_cast<std::int64_t>(px) * c + ci] +=
                    n.grad[static_cast<std::int64_t>(ci) * h * w + px];
    });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    const Shape &sa = a.shape(), &sb = b.shape();
    if (sa.rank() != 3 || sb.rank() != 3 || sa[1] != sb[1] || sa[2] != sb[2])
        throw ArgumentError("concat_channels: incompatible " + sa.str() + " and " + sb.str());
    const int ca = sa[0], cb = sb[0], h = sa[1], w = sa[2];
    Tensor<T> out(Shape{ca + cb, h, w});
    std::copy(a.value().data(), a.value().data() + a.value().numel(), out.data());
    std::copy(b.value().data(), b.value().data() + b.value().numel(),
              out.data() + a.value().numel());
    return detail::make_op<T>(std::move(out), {a, b}, [na = static_cast<std::int64_t>(ca) * h * w](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            auto& p = *n.parents[0];
            p.ensure_grad();
            for (std::int64_t i = 0; i < na; ++i) p.grad[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += n.grad[na + i];
        }
    });
}

// row subset of an (N,C) matrix; backward scatter-adds into the source rows
template <class T>
Var<T> gather_rows(const Var<T>& a, std::vector<int> rows) {
    const Shape& s = a.shape();
    if (s.rank() != 2) throw ArgumentError("gather_rows: expected rank-2, got " + s.str());
    const int n_rows = s[0], c = s[1];
    for (int r : rows)
        if (r < 0 || r >= n_rows) throw ArgumentError("gather_rows: row index out of range");
    Tensor<T> out(Shape{static_cast<int>(rows.size()), c});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < c; ++j) out.at(static_cast<int>(i), j) = a.value().at(rows[i], j);
    return detail::make_op<T>(std::move(out), {a}, [rows = std::move(rows), c](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < c; ++j)
                p.grad.at(rows[i], j) += n.grad.at(static_cast<int>(i), j);
    });
}

// column-wise concat of (N,Ca) and (N,Cb)
template <class T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
    const Shape &sa = a.shape(), &sb = b.shape();
    if (sa.rank() != 2 || sb.rank() != 2 || sa[0] != sb[0])
        throw ArgumentError("concat_cols: incompatible " + sa.str() + " and " + sb.str());
    const int n_rows = sa[0], ca = sa[1], cb = sb[1];
    Tensor<T> out(Shape{n_rows, ca + cb});
    for (int r = 0; r < n_rows; ++r) {
        for (int i = 0; i < ca; ++i) out.at(r, i) = a.value().at(r, i);
        for (int i = 0; i < cb; ++i) out.at(r, ca + i) = b.value().at(r, i);
    }
    return detail::make_op<T>(std::move(out), {a, b}, [n_rows, ca, cb](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            auto& p = *n.parents[0];
            p.ensure_grad();
            for (int r = 0; r < n_rows; ++r)
                for (int i = 0; i < ca; ++i) p.grad.at(r, i) += n.grad.at(r, i);
        }
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (int r = 0; r < n_rows; ++r)
                for (int i = 0; i < cb; ++i) p.grad.at(r, i) += n.grad.at(r, ca + i);
        }
    });
}

// ---------------------------------------------------------------------------
// broadcast ops over (C,H,W)

// image (C,H,W) * map (1,H,W), broadcast across channels
template <class T>
Var<T> mul_map(const Var<T>& x, const Var<T>& m) {
    const Shape &sx = x.shape(), &sm = m.shape();
    if (sx.rank() != 3 || sm.rank() != 3 || sm[0] != 1 || sm[1] != sx[1] || sm[2] != sx[2])
        throw ArgumentError("mul_map: incompatible " + sx.str() + " and " + sm.str());
    const int c = sx[0];
    const std::int64_t hw = static_cast<std::int64_t>(sx[1]) * sx[2];
    Tensor<T> out = x.value();
    for (int ci = 0; ci < c; ++ci)
        for (std::int64_t p = 0; p < hw; ++p) out[ci * hw + p] *= m.value()[p];
    return detail::make_op<T>(std::move(out), {x, m},
                              [vx = x.value(), vm = m.value(), c, hw](detail::Node<T>& n) {
                                  if (n.parents[0]->requires_grad) {
                                      auto& p = *n.parents[0];
                                      p.ensure_grad();
                                      for (int ci = 0; ci < c; ++ci)
                                          for (std::int64_t px = 0; px < hw; ++px)
                                              p.grad[ci * hw + px] += n.grad[ci * hw + px] * vm[px];
                                  }
                                  if (n.parents[1]->requires_grad) {
                                      auto& p = *n.parents[1];
                                      p.ensure_grad();
                                      for (int ci = 0; ci < c; ++ci)
                                          for (std::int64_t px = 0; px < hw; ++px)
                                              p.grad[px] += n.grad[ci * hw + px] * vx[ci * hw + px];
                                  }
                              });
}

// per-channel gains: image (C,H,W) * s (C)
template <class T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s) {
    const Shape& sx = x.shape();
    if (sx.rank() != 3 || s.shape().rank() != 1 || s.shape()[0] != sx[0])
        throw ArgumentError("scale_channels: incompatible " + sx.str() + " and " + s.shape().str());
    const int c = sx[0];
    const std::int64_t hw = static_cast<std::int64_t>(sx[1]) * sx[2];
    Tensor<T> out = x.value();
    for (int ci = 0; ci < c; ++ci)
        for (std::int64_t p = 0; p < hw; ++p) out[ci * hw + p] *= s.value()[ci];
    return detail::make_op<T>(std::move(out), {x, s},
                              [vx = x.value(), vs = s.value(), c, hw](detail::Node<T>& n) {
                                  if (n.parents[0]->requires_grad) {
                                      auto& p = *n.parents[0];
                                      p.ensure_grad();
                                      for (int ci = 0; ci < c; ++ci)
                                          for (std::int64_t px = 0; px < hw; ++px)
                                              p.grad[ci * hw + px] += n.grad[ci * hw + px] * vs[ci];
                                  }
                                  if (n.parents[1]->requires_grad) {
                                      auto& p = *n.parents[1];
                                      p.ensure_grad();
                                      for (int ci = 0; ci < c; ++ci) {
                                          T g = 0;
                                          for (std::int64_t px = 0; px < hw; ++px)
                                              g += n.grad[ci * hw + px] * vx[ci * hw + px];
                                          p.grad[ci] += g;
                                      }
                                  }
                              });
}

// per-channel bias: image (C,H,W) + b (C)
template <class T>
Var<T> add_channels(const Var<T>& x, const Var<T>& b) {
    const Shape& sx = x.shape();
    if (sx.rank() != 3 || b.shape().rank() != 1 || b.shape()[0] != sx[0])
        throw ArgumentError("add_channels: incompatible " + sx.str() + " and " + b.shape().str());
    const int c = sx[0];
    const std::int64_t hw = static_cast<std::int64_t>(sx[1]) * sx[2];
    Tensor<T> out = x.value();
    for (int ci = 0; ci < c; ++ci)
        for (std::int64_t p = 0; p < hw; ++p) out[ci * hw + p] += b.value()[ci];
    return detail::make_op<T>(std::move(out), {x, b}, [c, hw](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (int ci = 0; ci < c; ++ci) {
                T g = 0;
                for (std::int64_t px = 0; px < hw; ++px) g += n.grad[ci * hw + px];
                p.grad[ci] += g;
            }
        }
    });
}

template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
    const Shape& s = x.shape();
    if (s.rank() != 3) throw ArgumentError("global_avg_pool: expected rank-3, got " + s.str());
    const int c = s[0];
    const std::int64_t hw = static_cast<std::int64_t>(s[1]) * s[2];
    Tensor<T> out(Shape{c});
    for (int ci = 0; ci < c; ++ci) {
        T acc = 0;
        for (std::int64_t p = 0; p < hw; ++p) acc += x.value()[ci * hw + p];
        out[ci] = acc / static_cast<T>(hw);
    }
    return detail::make_op<T>(std::move(out), {x}, [c, hw](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int ci = 0; ci < c; ++ci) {
            const T g = n.grad[ci] / static_cast<T>(hw);
            for (std::int64_t px = 0; px < hw; ++px) p.grad[ci * hw + px] += g;
        }
    });
}

// mean over rectangular cells covering the image: (C,H,W) -> (C,OH,OW)
template <class T>
Var<T> adaptive_avg_pool(const Var<T>& x, int oh, int ow) {
    const Shape& s = x.shape();
    if (s.rank() != 3 || oh < 1 || ow < 1)
        throw ArgumentError("adaptive_avg_pool: bad input " + s.str());
    const int c = s[0], h = s[1], w = s[2];
    auto cell = [](int i, int n, int out) {
        // [floor(i*n/out), ceil((i+1)*n/out)) — nonempty for any n, out
        const int lo = (i * n) / out;
        const int hi = ((i + 1) * n + out - 1) / out;
        return std::pair<int, int>{lo, std::max(hi, lo + 1)};
    };
    Tensor<T> out(Shape{c, oh, ow});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < oh; ++i) {
            const auto [y0, y1] = cell(i, h, oh);
            for (int j = 0; j < ow; ++j) {
                const auto [x0, x1] = cell(j, w, ow);
                T acc = 0;
                for (int y = y0; y < y1; ++y)
                    for (int xx = x0; xx < x1; ++xx) acc += x.value().at(ci, y, xx);
                out.at(ci, i, j) = acc / static_cast<T>((y1 - y0) * (x1 - x0));
            }
        }
    return detail::make_op<T>(std::move(out), {x}, [c, h, w, oh, ow, cell](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < oh; ++i) {
                const auto [y0, y1] = cell(i, h, oh);
                for (int j = 0; j < ow; ++j) {
                    const auto [x0, x1] = cell(j, w, ow);
                    const T g = n.grad.at(ci, i, j) / static_cast<T>((y1 - y0) * (x1 - x0));
                    for (int y = y0; y < y1; ++y)
                        for (int xx = x0; xx < x1; ++xx) p.grad.at(ci, y, xx) += g;
                }
            }
    });
}

// N scalar vars -> rank-1 (N) vector
template <class T>
Var<T> stack_scalars(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ArgumentError("stack_scalars: empty input");
    Tensor<T> out(Shape{static_cast<int>(xs.size())});
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].value().numel() != 1)
            throw ArgumentError("stack_scalars: element " + std::to_string(i) + " not scalar");
        out[static_cast<std::int64_t>(i)] = xs[i].value()[0];
    }
    return detail::make_op<T>(std::move(out), xs, [](detail::Node<T>& n) {
        for (size_t i = 0; i < n.parents.size(); ++i)
            if (n.parents[i]->requires_grad) {
                n.parents[i]->ensure_grad();
                n.parents[i]->grad[0] += n.grad[static_cast<std::int64_t>(i)];
            }
    });
}

// rank-1 concat
template <class T>
Var<T> concat_vec(const Var<T>& a, const Var<T>& b) {
    if (a.shape().rank() != 1 || b.shape().rank() != 1)
        throw ArgumentError("concat_vec: expected rank-1 inputs");
    const int na = a.shape()[0], nb = b.shape()[0];
    Tensor<T> out(Shape{na + nb});
    for (int i = 0; i < na; ++i) out[i] = a.value()[i];
    for (int i = 0; i < nb; ++i) out[na + i] = b.value()[i];
    return detail::make_op<T>(std::move(out), {a, b}, [na, nb](detail::Node<T>& n) {
        if (n.parents[0]->requires_grad) {
            auto& p = *n.parents[0];
            p.ensure_grad();
            for (int i = 0; i < na; ++i) p.grad[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (int i = 0; i < nb; ++i) p.grad[i] += n.grad[na + i];
        }
    });
}

template <class T>
Var<T> upsample_nearest(const Var<T>& x, int factor) {
    const Shape& s = x.shape();
    if (s.rank() != 3 || factor < 1)
        throw ArgumentError("upsample_nearest: bad input " + s.str());
    const int c = s[0], h = s[1], w = s[2];
    Tensor<T> out(Shape{c, h * factor, w * factor});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < h * factor; ++i)
            for (int j = 0; j < w * factor; ++j)
                out.at(ci, i, j) = x.value().at(ci, i / factor, j / factor);
    return detail::make_op<T>(std::move(out), {x}, [c, h, w, factor](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < h * factor; ++i)
                for (int j = 0; j < w * factor; ++j)
                    p.grad.at(ci, i / factor, j / factor) += n.grad.at(ci, i, j);
    });
}

// ---------------------------------------------------------------------------
// padding

enum class PadMode { Zero, Reflect, Replicate };

namespace detail {

inline int pad_src_index(int i, int n, PadMode mode) {
    switch (mode) {
        case PadMode::Replicate: return std::min(std::max(i, 0), n - 1);
        case PadMode::Reflect: {
            // reflect without repeating the border sample (n must be > pad)
            int j = i;
            while (j < 0 || j >= n) {
                if (j < 0) j = -j;
                if (j >= n) j = 2 * n - 2 - j;
            }
            return j;
        }
        default: return i; // Zero handled by caller
    }
}

} // namespace detail

template <class T>
Var<T> pad2d(const Var<T>& x, int top, int bottom, int left, int right, PadMode mode) {
    const Shape& s = x.shape();
    if (s.rank() != 3) throw ArgumentError("pad2d: expected rank-3, got " + s.str());
    if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ArgumentError("pad2d: negative pad");
    const int c = s[0], h = s[1], w = s[2];
    if (mode == PadMode::Reflect && (top >= h || bottom >= h || left >= w || right >= w))
        throw ArgumentError("pad2d: reflect pad wider than image");
    const int oh = h + top + bottom, ow = w + left + right;
    Tensor<T> out(Shape{c, oh, ow});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                const int si = i - top, sj = j - left;
                if (si >= 0 && si < h && sj >= 0 && sj < w) {
                    out.at(ci, i, j) = x.value().at(ci, si, sj);
                } else if (mode == PadMode::Zero) {
                    out.at(ci, i, j) = T(0);
                } else {
                    out.at(ci, i, j) = x.value().at(ci, detail::pad_src_index(si, h, mode),
                                                    detail::pad_src_index(sj, w, mode));
                }
            }
    return detail::make_op<T>(std::move(out), {x},
                              [c, h, w, top, left, oh, ow, mode](detail::Node<T>& n) {
                                  auto& p = *n.parents[0];
                                  p.ensure_grad();
                                  for (int ci = 0; ci < c; ++ci)
                                      for (int i = 0; i < oh; ++i)
                                          for (int j = 0; j < ow; ++j) {
                                              const int si = i - top, sj = j - left;
                                              if (si >= 0 && si < h && sj >= 0 && sj < w) {
                                                  p.grad.at(ci, si, sj) += n.grad.at(ci, i, j);
                                              } else if (mode != PadMode::Zero) {
                                                  p.grad.at(ci, detail::pad_src_index(si, h, mode),
                                                            detail::pad_src_index(sj, w, mode)) +=
                                                      n.grad.at(ci, i, j);
                                              }
                                          }
                              });
}

// ---------------------------------------------------------------------------
// matmul / linear

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const Shape &sa = a.shape(), &sb = b.shape();
    if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0])
        throw ArgumentError("matmul: incompatible " + sa.str() + " and " + sb.str());
    const int m = sa[0], k = sa[1], n_cols = sb[1];
    Tensor<T> out(Shape{m, n_cols});
    gemm(false, false, m, n_cols, k, T(1), a.value().data(), k, b.value().data(), n_cols, T(0),
         out.data(), n_cols);
    return detail::make_op<T>(
        std::move(out), {a, b},
        [va = a.value(), vb = b.value(), m, k, n_cols](detail::Node<T>& n) {
            if (n.parents[0]->requires_grad) {
                auto& p = *n.parents[0];
                p.ensure_grad();
                gemm(false, true, m, k, n_cols, T(1), n.grad.data(), n_cols, vb.data(), n_cols,
                     T(1), p.grad.data(), k);
            }
            if (n.parents[1]->requires_grad) {
                auto& p = *n.parents[1];
                p.ensure_grad();
                gemm(true, false, k, n_cols, m, T(1), va.data(), k, n.grad.data(), n_cols, T(1),
                     p.grad.data(), n_cols);
            }
        });
}

// y(N,out) = x(N,in)·W(out,in)^T + b(out)
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const Shape &sx = x.shape(), &sw = w.shape();
    if (sx.rank() != 2 || sw.rank() != 2 || sx[1] != sw[1])
        throw ArgumentError("linear: incompatible " + sx.str() + " and " + sw.str());
    const int n_rows = sx[0], in = sx[1], out_dim = sw[0];
    if (b.shape().rank() != 1 || b.shape()[0] != out_dim)
        throw ArgumentError("linear: bad bias " + b.shape().str());
    Tensor<T> out(Shape{n_rows, out_dim});
    gemm(false, true, n_rows, out_dim, in, T(1), x.value().data(), in, w.value().data(), in, T(0),
         out.data(), out_dim);
    for (int r = 0; r < n_rows; ++r)
        for (int o = 0; o < out_dim; ++o) out.at(r, o) += b.value()[o];
    return detail::make_op<T>(
        std::move(out), {x, w, b},
        [vx = x.value(), vw = w.value(), n_rows, in, out_dim](detail::Node<T>& n) {
            if (n.parents[0]->requires_grad) {
                auto& p = *n.parents[0];
                p.ensure_grad();
                gemm(false, false, n_rows, in, out_dim, T(1), n.grad.data(), out_dim, vw.data(), in,
                     T(1), p.grad.data(), in);
            }
            if (n.parents[1]->requires_grad) {
                auto& p = *n.parents[1];
                p.ensure_grad();
                gemm(true, false, out_dim, in, n_rows, T(1), n.grad.data(), out_dim, vx.data(), in,
                     T(1), p.grad.data(), in);
            }
            if (n.parents[2]->requires_grad) {
                auto& p = *n.parents[2];
                p.ensure_grad();
                for (int r = 0; r < n_rows; ++r)
                    for (int o = 0; o < out_dim; ++o) p.grad[o] += n.grad.at(r, o);
            }
        });
}

// ---------------------------------------------------------------------------
// convolution (valid, on pre-padded input)

namespace detail {

template <class T>
void im2col(const Tensor<T>& x, int kh, int kw, int stride, Tensor<T>& cols, int oh, int ow) {
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    (void)h;
    const std::int64_t n_out = static_cast<std::int64_t>(oh) * ow;
    T* col = cols.data();
    for (int ci = 0; ci < c; ++ci)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const T* src = x.data() + (static_cast<std::int64_t>(ci) * x.shape()[1] + ki) * w + kj;
                for (int oi = 0; oi < oh; ++oi) {
                    const T* row = src + static_cast<std::int64_t>(oi) * stride * w;
                    for (int oj = 0; oj < ow; ++oj) *col++ = row[oj * stride];
                }
            }
    (void)n_out;
}

template <class T>
void col2im_accum(const Tensor<T>& cols, int c, int h, int w, int kh, int kw, int stride,
                  Tensor<T>& gx, int oh, int ow) {
    const T* col = cols.data();
    for (int ci = 0; ci < c; ++ci)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                T* dst = gx.data() + (static_cast<std::int64_t>(ci) * h + ki) * w + kj;
                for (int oi = 0; oi < oh; ++oi) {
                    T* row = dst + static_cast<std::int64_t>(oi) * stride * w;
                    for (int oj = 0; oj < ow; ++oj) row[oj * stride] += *col++;
                }
            }
}

} // namespace detail

// x (IC,H,W) pre-padded, w (OC,IC,KH,KW), stride >= 1; output (OC,OH,OW)
template <class T>
Var<T> conv2d_valid(const Var<T>& x, const Var<T>& w, int stride) {
    const Shape &sx = x.shape(), &sw = w.shape();
    if (sx.rank() != 3 || sw.rank() != 4 || sx[0] != sw[1])
        throw ArgumentError("conv2d_valid: incompatible " + sx.str() + " and " + sw.str());
    const int ic = sx[0], h = sx[1], wd = sx[2];
    const int oc = sw[0], kh = sw[2], kw = sw[3];
    if (h < kh || wd < kw)
        throw ArgumentError("conv2d_valid: input " + sx.str() + " smaller than kernel " + sw.str());
    const int oh = (h - kh) / stride + 1, ow = (wd - kw) / stride + 1;
    const int k = ic * kh * kw;
    const std::int64_t n_out = static_cast<std::int64_t>(oh) * ow;

    Tensor<T> cols(Shape{k, static_cast<int>(n_out)});
    detail::im2col(x.value(), kh, kw, stride, cols, oh, ow);
    Tensor<T> out(Shape{oc, oh, ow});
    gemm(false, false, oc, static_cast<int>(n_out), k, T(1), w.value().data(), k, cols.data(),
         static_cast<int>(n_out), T(0), out.data(), static_cast<int>(n_out));

    return detail::make_op<T>(
        std::move(out), {x, w},
        [vx = x.value(), vw = w.value(), ic, h, wd, oc, kh, kw, stride, oh, ow,
         k, n_out](detail::Node<T>& n) {
            // recompute the column buffer; cheaper than caching it per node
            Tensor<T> cols2(Shape{k, static_cast<int>(n_out)});
            detail::im2col(vx, kh, kw, stride, cols2, oh, ow);
            if (n.parents[1]->requires_grad) {
                auto& p = *n.parents[1];
                p.ensure_grad();
                gemm(false, true, oc, k, static_cast<int>(n_out), T(1), n.grad.data(),
                     static_cast<int>(n_out), cols2.data(), static_cast<int>(n_out), T(1),
                     p.grad.data(), k);
            }
            if (n.parents[0]->requires_grad) {
                auto& p = *n.parents[0];
                p.ensure_grad();
                Tensor<T> gcols(Shape{k, static_cast<int>(n_out)});
                gemm(true, false, k, static_cast<int>(n_out), oc, T(1), vw.data(), k,
                     n.grad.data(), static_cast<int>(n_out), T(0), gcols.data(),
                     static_cast<int>(n_out));
                detail::col2im_accum(gcols, ic, h, wd, kh, kw, stride, p.grad, oh, ow);
            }
        });
}

// depthwise correlation of every channel with one fixed (non-learned) kernel;
// input must be pre-padded, kernel must be point-symmetric for the cheap
// input-gradient path used here
template <class T>
Var<T> depthwise_conv_fixed(const Var<T>& x, const Tensor<T>& kernel) {
    const Shape& s = x.shape();
    if (s.rank() != 3 || kernel.shape().rank() != 2)
        throw ArgumentError("depthwise_conv_fixed: bad shapes");
    const int c = s[0], h = s[1], w = s[2];
    const int kh = kernel.shape()[0], kw = kernel.shape()[1];
    if (h < kh || w < kw) throw ArgumentError("depthwise_conv_fixed: input smaller than kernel");
    const int oh = h - kh + 1, ow = w - kw + 1;
    Tensor<T> out(Shape{c, oh, ow});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                T acc = 0;
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj)
                        acc += x.value().at(ci, i + ki, j + kj) * kernel.at(ki, kj);
                out.at(ci, i, j) = acc;
            }
    return detail::make_op<T>(std::move(out), {x}, [kernel, c, oh, ow, kh, kw](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        // d(out[i,j])/d(x[i+ki, j+kj]) = kernel[ki,kj]
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const T g = n.grad.at(ci, i, j);
                    for (int ki = 0; ki < kh; ++ki)
                        for (int kj = 0; kj < kw; ++kj)
                            p.grad.at(ci, i + ki, j + kj) += g * kernel.at(ki, kj);
                }
    });
}

// ---------------------------------------------------------------------------
// instance normalization, fused forward/backward

template <class T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const Shape& s = x.shape();
    if (s.rank() != 3) throw ArgumentError("instance_norm: expected rank-3, got " + s.str());
    const int c = s[0];
    const std::int64_t hw = static_cast<std::int64_t>(s[1]) * s[2];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw ArgumentError("instance_norm: bad affine shapes for " + s.str());

    Tensor<T> xhat(s);
    Tensor<T> inv_std(Shape{c});
    Tensor<T> out(s);
    for (int ci = 0; ci < c; ++ci) {
        const T* xp = x.value().data() + ci * hw;
        T mu = 0;
        for (std::int64_t p = 0; p < hw; ++p) mu += xp[p];
        mu /= static_cast<T>(hw);
        T var = 0;
        for (std::int64_t p = 0; p < hw; ++p) {
            const T d = xp[p] - mu;
            var += d * d;
        }
        var /= static_cast<T>(hw);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[ci] = is;
        const T g = gamma.value()[ci], b = beta.value()[ci];
        for (std::int64_t p = 0; p < hw; ++p) {
            const T xh = (xp[p] - mu) * is;
            xhat[ci * hw + p] = xh;
            out[ci * hw + p] = g * xh + b;
        }
    }
    return detail::make_op<T>(
        std::move(out), {x, gamma, beta},
        [xhat = std::move(xhat), inv_std = std::move(inv_std), vg = gamma.value(), c,
         hw](detail::Node<T>& n) {
            for (int ci = 0; ci < c; ++ci) {
                const T* gp = n.grad.data() + ci * hw;
                const T* xh = xhat.data() + ci * hw;
                T sum_g = 0, sum_gx = 0;
                for (std::int64_t p = 0; p < hw; ++p) {
                    sum_g += gp[p];
                    sum_gx += gp[p] * xh[p];
                }
                if (n.parents[1]->requires_grad) {
                    auto& pg = *n.parents[1];
                    pg.ensure_grad();
                    pg.grad[ci] += sum_gx;
                }
                if (n.parents[2]->requires_grad) {
                    auto& pb = *n.parents[2];
                    pb.ensure_grad();
                    pb.grad[ci] += sum_g;
                }
                if (n.parents[0]->requires_grad) {
                    auto& px = *n.parents[0];
                    px.ensure_grad();
                    const T scale = vg[ci] * inv_std[ci];
                    const T mg = sum_g / static_cast<T>(hw);
                    const T mgx = sum_gx / static_cast<T>(hw);
                    T* dst = px.grad.data() + ci * hw;
                    for (std::int64_t p = 0; p < hw; ++p)
                        dst[p] += scale * (gp[p] - mg - xh[p] * mgx);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// losses

// mean over elements of BCE-with-logits against a constant target in [0,1]
template <class T>
Var<T> bce_with_logits_mean(const Var<T>& logits, T target) {
    const Tensor<T>& x = logits.value();
    const T n_elems = static_cast<T>(x.numel());
    T acc = 0;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const T v = x[i];
        acc += std::max(v, T(0)) - v * target + std::log1p(std::exp(-std::abs(v)));
    }
    if (!std::isfinite(static_cast<double>(acc)))
        throw NumericError("bce_with_logits_mean: non-finite loss");
    return detail::make_op<T>(Tensor<T>::scalar(acc / n_elems), {logits},
                              [vx = x, target, n_elems](detail::Node<T>& n) {
                                  auto& p = *n.parents[0];
                                  p.ensure_grad();
                                  const T g = n.grad[0] / n_elems;
                                  for (std::int64_t i = 0; i < p.grad.numel(); ++i) {
                                      const T v = vx[i];
                                      const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                                              : std::exp(v) / (T(1) + std::exp(v));
                                      p.grad[i] += g * (sig - target);
                                  }
                              });
}

// convenience operators
template <class T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <class T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <class T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }

} // namespace relume
