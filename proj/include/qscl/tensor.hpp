#pragma once

// Dense double-precision tensors with a recorded computation graph and
// reverse-mode differentiation. Every op builds a node eagerly; backward()
// walks the graph once in reverse topological order and accumulates
// gradients additively into the parents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "qscl/rng.hpp"

namespace qscl {

using Shape = std::vector<int64_t>;

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
    if (a != b)
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on demand during backward
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward_fn;  // accumulates into parents' grad
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& s) {
        auto n = std::make_shared<TensorNode>();
        n->shape = s;
        n->value.assign(numel_of(s), 0.0);
        return Tensor(n);
    }
    static Tensor full(const Shape& s, double v) {
        Tensor t = zeros(s);
        std::fill(t.node_->value.begin(), t.node_->value.end(), v);
        return t;
    }
    static Tensor from(const Shape& s, std::vector<double> data) {
        if (static_cast<int64_t>(data.size()) != numel_of(s))
            throw ShapeError("Tensor::from: data length does not match shape " + shape_str(s));
        auto n = std::make_shared<TensorNode>();
        n->shape = s;
        n->value = std::move(data);
        return Tensor(n);
    }
    static Tensor scalar(double v) { return from({}, {v}); }
    static Tensor uniform(const Shape& s, double lo, double hi, Rng& rng) {
        Tensor t = zeros(s);
        for (auto& v : t.node_->value) v = lo + (hi - lo) * rng.uniform01();
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values_mut() { return node_->value; }
    const std::vector<double>& grad() const { return node_->grad; }
    double item() const {
        if (numel() != 1) throw ShapeError("Tensor::item: tensor is not scalar");
        return node_->value[0];
    }
    TensorNode* node() const { return node_.get(); }
    std::shared_ptr<TensorNode> node_ptr() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline std::shared_ptr<TensorNode> make_node(Shape shape,
                                             std::vector<std::shared_ptr<TensorNode>> parents) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.assign(numel_of(n->shape), 0.0);
    n->parents = std::move(parents);
    return n;
}

inline void ensure_grad(TensorNode* n) {
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
}

// outer / axis / inner decomposition for axis-wise ops
struct AxisSplit {
    int64_t outer, len, inner;
};
inline AxisSplit split_axis(const Shape& s, int axis) {
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw ShapeError("axis out of range for shape " + shape_str(s));
    AxisSplit sp{1, s[axis], 1};
    for (int i = 0; i < axis; ++i) sp.outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
    return sp;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a.shape(), b.shape());
    auto n = detail::make_node(a.shape(), {a.node_ptr(), b.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] + b.values()[i];
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    n->backward_fn = [self, pa, pb] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (size_t i = 0; i < self->grad.size(); ++i) {
            pa->grad[i] += self->grad[i];
            pb->grad[i] += self->grad[i];
        }
    };
    return Tensor(n);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a.shape(), b.shape());
    auto n = detail::make_node(a.shape(), {a.node_ptr(), b.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] - b.values()[i];
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    n->backward_fn = [self, pa, pb] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (size_t i = 0; i < self->grad.size(); ++i) {
            pa->grad[i] += self->grad[i];
            pb->grad[i] -= self->grad[i];
        }
    };
    return Tensor(n);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a.shape(), b.shape());
    auto n = detail::make_node(a.shape(), {a.node_ptr(), b.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] * b.values()[i];
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    n->backward_fn = [self, pa, pb] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (size_t i = 0; i < self->grad.size(); ++i) {
            pa->grad[i] += self->grad[i] * pb->value[i];
            pb->grad[i] += self->grad[i] * pa->value[i];
        }
    };
    return Tensor(n);
}

inline Tensor scale(const Tensor& a, double s) {
    auto n = detail::make_node(a.shape(), {a.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.values()[i] * s;
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa, s] {
        detail::ensure_grad(pa);
        for (size_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += s * self->grad[i];
    };
    return Tensor(n);
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor relu(const Tensor& a) {
    auto n = detail::make_node(a.shape(), {a.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::max(0.0, a.values()[i]);
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa] {
        detail::ensure_grad(pa);
        for (size_t i = 0; i < self->grad.size(); ++i)
            if (pa->value[i] > 0.0) pa->grad[i] += self->grad[i];
    };
    return Tensor(n);
}

inline Tensor sigmoid(const Tensor& a) {
    auto n = detail::make_node(a.shape(), {a.node_ptr()});
    for (size_t i = 0; i < n->value.size(); ++i) {
        const double x = a.values()[i];
        n->value[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa] {
        detail::ensure_grad(pa);
        for (size_t i = 0; i < self->grad.size(); ++i) {
            const double s = self->value[i];
            pa->grad[i] += self->grad[i] * s * (1.0 - s);
        }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// reshaping / movement
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, const Shape& s) {
    if (numel_of(s) != a.numel())
        throw ShapeError("reshape: cannot reshape " + shape_str(a.shape()) + " to " + shape_str(s));
    auto n = detail::make_node(s, {a.node_ptr()});
    n->value = a.values();
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa] {
        detail::ensure_grad(pa);
        for (size_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += self->grad[i];
    };
    return Tensor(n);
}

inline Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    const Shape& in = a.shape();
    if (perm.size() != in.size()) throw ShapeError("permute: rank mismatch for " + shape_str(in));
    Shape out(in.size());
    for (size_t i = 0; i < perm.size(); ++i) out[i] = in[perm[i]];
    auto n = detail::make_node(out, {a.node_ptr()});

    const int rank = static_cast<int>(in.size());
    std::vector<int64_t> in_stride(rank, 1), out_stride(rank, 1);
    for (int i = rank - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in[i + 1];
    for (int i = rank - 2; i >= 0; --i) out_stride[i] = out_stride[i + 1] * out[i + 1];
    // map flat output index -> flat input index
    std::vector<int64_t> src(numel_of(out));
    for (int64_t o = 0; o < numel_of(out); ++o) {
        int64_t rem = o, idx = 0;
        for (int d = 0; d < rank; ++d) {
            const int64_t coord = rem / out_stride[d];
            rem %= out_stride[d];
            idx += coord * in_stride[perm[d]];
        }
        src[o] = idx;
        n->value[o] = a.values()[idx];
    }
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa, src = std::move(src)] {
        detail::ensure_grad(pa);
        for (size_t o = 0; o < self->grad.size(); ++o) pa->grad[src[o]] += self->grad[o];
    };
    return Tensor(n);
}

inline Tensor transpose2d(const Tensor& a) {
    if (a.shape().size() != 2) throw ShapeError("transpose2d: need rank 2, got " + shape_str(a.shape()));
    return permute(a, {1, 0});
}

inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    const Shape &sa = a.shape(), &sb = b.shape();
    if (sa.size() != sb.size())
        throw ShapeError("concat: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    for (size_t i = 0; i < sa.size(); ++i)
        if (static_cast<int>(i) != axis && sa[i] != sb[i])
            throw ShapeError("concat: shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    Shape out = sa;
    out[axis] += sb[axis];
    auto n = detail::make_node(out, {a.node_ptr(), b.node_ptr()});
    const auto spa = detail::split_axis(sa, axis);
    const auto spb = detail::split_axis(sb, axis);
    const int64_t la = spa.len, lb = spb.len, inner = spa.inner;
    for (int64_t o = 0; o < spa.outer; ++o) {
        std::copy_n(a.values().begin() + o * la * inner, la * inner,
                    n->value.begin() + o * (la + lb) * inner);
        std::copy_n(b.values().begin() + o * lb * inner, lb * inner,
                    n->value.begin() + o * (la + lb) * inner + la * inner);
    }
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    const int64_t outer = spa.outer;
    n->backward_fn = [self, pa, pb, outer, la, lb, inner] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t i = 0; i < la * inner; ++i)
                pa->grad[o * la * inner + i] += self->grad[o * (la + lb) * inner + i];
            for (int64_t i = 0; i < lb * inner; ++i)
                pb->grad[o * lb * inner + i] += self->grad[o * (la + lb) * inner + la * inner + i];
        }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
    auto n = detail::make_node(Shape{}, {a.node_ptr()});
    double s = 0.0;
    for (double v : a.values()) s += v;
    n->value[0] = s;
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa] {
        detail::ensure_grad(pa);
        for (auto& g : pa->grad) g += self->grad[0];
    };
    return Tensor(n);
}

inline Tensor mean_all(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    return scale(sum_all(a), inv);
}

// mean over one axis; the axis is dropped from the shape
inline Tensor mean(const Tensor& a, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    Shape out;
    for (size_t i = 0; i < a.shape().size(); ++i)
        if (static_cast<int>(i) != axis) out.push_back(a.shape()[i]);
    auto n = detail::make_node(out, {a.node_ptr()});
    const double inv = 1.0 / static_cast<double>(sp.len);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < sp.len; ++j) s += a.values()[(o * sp.len + j) * sp.inner + i];
            n->value[o * sp.inner + i] = s * inv;
        }
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa, sp, inv] {
        detail::ensure_grad(pa);
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t i = 0; i < sp.inner; ++i) {
                const double g = self->grad[o * sp.inner + i] * inv;
                for (int64_t j = 0; j < sp.len; ++j) pa->grad[(o * sp.len + j) * sp.inner + i] += g;
            }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

inline Tensor softmax(const Tensor& a, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    auto n = detail::make_node(a.shape(), {a.node_ptr()});
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
            double mx = -INFINITY;
            for (int64_t j = 0; j < sp.len; ++j)
                mx = std::max(mx, a.values()[(o * sp.len + j) * sp.inner + i]);
            double z = 0.0;
            for (int64_t j = 0; j < sp.len; ++j) {
                const int64_t ix = (o * sp.len + j) * sp.inner + i;
                n->value[ix] = std::exp(a.values()[ix] - mx);
                z += n->value[ix];
            }
            for (int64_t j = 0; j < sp.len; ++j) n->value[(o * sp.len + j) * sp.inner + i] /= z;
        }
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa, sp] {
        detail::ensure_grad(pa);
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t i = 0; i < sp.inner; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j < sp.len; ++j) {
                    const int64_t ix = (o * sp.len + j) * sp.inner + i;
                    dot += self->grad[ix] * self->value[ix];
                }
                for (int64_t j = 0; j < sp.len; ++j) {
                    const int64_t ix = (o * sp.len + j) * sp.inner + i;
                    pa->grad[ix] += self->value[ix] * (self->grad[ix] - dot);
                }
            }
    };
    return Tensor(n);
}

inline Tensor log_softmax(const Tensor& a, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    auto n = detail::make_node(a.shape(), {a.node_ptr()});
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
            double mx = -INFINITY;
            for (int64_t j = 0; j < sp.len; ++j)
                mx = std::max(mx, a.values()[(o * sp.len + j) * sp.inner + i]);
            double z = 0.0;
            for (int64_t j = 0; j < sp.len; ++j)
                z += std::exp(a.values()[(o * sp.len + j) * sp.inner + i] - mx);
            const double lz = mx + std::log(z);
            for (int64_t j = 0; j < sp.len; ++j) {
                const int64_t ix = (o * sp.len + j) * sp.inner + i;
                n->value[ix] = a.values()[ix] - lz;
            }
        }
    TensorNode* self = n.get();
    TensorNode* pa = a.node();
    n->backward_fn = [self, pa, sp] {
        detail::ensure_grad(pa);
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t i = 0; i < sp.inner; ++i) {
                double gsum = 0.0;
                for (int64_t j = 0; j < sp.len; ++j)
                    gsum += self->grad[(o * sp.len + j) * sp.inner + i];
                for (int64_t j = 0; j < sp.len; ++j) {
                    const int64_t ix = (o * sp.len + j) * sp.inner + i;
                    pa->grad[ix] += self->grad[ix] - std::exp(self->value[ix]) * gsum;
                }
            }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const int64_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
    auto n = detail::make_node({m, p}, {a.node_ptr(), b.node_ptr()});
    for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < k; ++j) {
            const double av = a.values()[r * k + j];
            for (int64_t c = 0; c < p; ++c) n->value[r * p + c] += av * b.values()[j * p + c];
        }
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    n->backward_fn = [self, pa, pb, m, k, p] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < p; ++c) {
                const double g = self->grad[r * p + c];
                if (g == 0.0) continue;
                for (int64_t j = 0; j < k; ++j) {
                    pa->grad[r * k + j] += g * pb->value[j * p + c];
                    pb->grad[j * p + c] += g * pa->value[r * k + j];
                }
            }
    };
    return Tensor(n);
}

// Batched matmul over matching leading dims; optionally treats each B slice
// as transposed. A: ...xMxK, B: ...xKxN (or ...xNxK with transpose_b).
inline Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b = false) {
    const Shape &sa = a.shape(), &sb = b.shape();
    if (sa.size() < 2 || sa.size() != sb.size())
        throw ShapeError("batched_matmul: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    int64_t batch = 1;
    for (size_t i = 0; i + 2 < sa.size(); ++i) {
        if (sa[i] != sb[i])
            throw ShapeError("batched_matmul: batch dims differ " + shape_str(sa) + " vs " +
                             shape_str(sb));
        batch *= sa[i];
    }
    const int64_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const int64_t bk = transpose_b ? sb[sb.size() - 1] : sb[sb.size() - 2];
    const int64_t bn = transpose_b ? sb[sb.size() - 2] : sb[sb.size() - 1];
    if (bk != k)
        throw ShapeError("batched_matmul: inner dims differ " + shape_str(sa) + " vs " +
                         shape_str(sb));
    Shape out(sa.begin(), sa.end() - 2);
    out.push_back(m);
    out.push_back(bn);
    auto n = detail::make_node(out, {a.node_ptr(), b.node_ptr()});
    const int64_t as = m * k, bs = bk * bn, os = m * bn;
    for (int64_t t = 0; t < batch; ++t) {
        const double* A = a.values().data() + t * as;
        const double* B = b.values().data() + t * bs;
        double* O = n->value.data() + t * os;
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < bn; ++c) {
                double acc = 0.0;
                for (int64_t j = 0; j < k; ++j)
                    acc += A[r * k + j] * (transpose_b ? B[c * k + j] : B[j * bn + c]);
                O[r * bn + c] = acc;
            }
    }
    TensorNode* self = n.get();
    TensorNode *pa = a.node(), *pb = b.node();
    n->backward_fn = [self, pa, pb, batch, m, k, bn, as, bs, os, transpose_b] {
        detail::ensure_grad(pa);
        detail::ensure_grad(pb);
        for (int64_t t = 0; t < batch; ++t) {
            const double* A = pa->value.data() + t * as;
            const double* B = pb->value.data() + t * bs;
            const double* G = self->grad.data() + t * os;
            double* dA = pa->grad.data() + t * as;
            double* dB = pb->grad.data() + t * bs;
            for (int64_t r = 0; r < m; ++r)
                for (int64_t c = 0; c < bn; ++c) {
                    const double g = G[r * bn + c];
                    if (g == 0.0) continue;
                    for (int64_t j = 0; j < k; ++j) {
                        dA[r * k + j] += g * (transpose_b ? B[c * k + j] : B[j * bn + c]);
                        if (transpose_b)
                            dB[c * k + j] += g * A[r * k + j];
                        else
                            dB[j * bn + c] += g * A[r * k + j];
                    }
                }
        }
    };
    return Tensor(n);
}

// y = x W^T + b with x: ...xIn flattened to rows, W: OutxIn, b: Out
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    const Shape& sx = x.shape();
    if (sx.empty() || w.shape().size() != 2 || sx.back() != w.shape()[1])
        throw ShapeError("linear: incompatible shapes " + shape_str(sx) + " vs " +
                         shape_str(w.shape()));
    const int64_t in = w.shape()[1], out = w.shape()[0];
    if (b.shape() != Shape{out})
        throw ShapeError("linear: bias shape " + shape_str(b.shape()) + " vs weight " +
                         shape_str(w.shape()));
    const int64_t rows = x.numel() / in;
    Shape so(sx.begin(), sx.end() - 1);
    so.push_back(out);
    auto n = detail::make_node(so, {x.node_ptr(), w.node_ptr(), b.node_ptr()});
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t o = 0; o < out; ++o) {
            double acc = b.values()[o];
            for (int64_t i = 0; i < in; ++i) acc += x.values()[r * in + i] * w.values()[o * in + i];
            n->value[r * out + o] = acc;
        }
    TensorNode* self = n.get();
    TensorNode *px = x.node(), *pw = w.node(), *pb = b.node();
    n->backward_fn = [self, px, pw, pb, rows, in, out] {
        detail::ensure_grad(px);
        detail::ensure_grad(pw);
        detail::ensure_grad(pb);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t o = 0; o < out; ++o) {
                const double g = self->grad[r * out + o];
                if (g == 0.0) continue;
                pb->grad[o] += g;
                for (int64_t i = 0; i < in; ++i) {
                    px->grad[r * in + i] += g * pw->value[o * in + i];
                    pw->grad[o * in + i] += g * px->value[r * in + i];
                }
            }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

// 1-D convolution with zero "same" padding. input: BxCxL, kernel: FxCxK.
inline Tensor conv1d(const Tensor& input, const Tensor& kernel, int dilation = 1) {
    const Shape &si = input.shape(), &sk = kernel.shape();
    if (si.size() != 3 || sk.size() != 3 || si[1] != sk[1])
        throw ShapeError("conv1d: incompatible shapes " + shape_str(si) + " vs " + shape_str(sk));
    if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
    const int64_t B = si[0], C = si[1], L = si[2], F = sk[0], K = sk[2];
    const int64_t span = (K - 1) * dilation;
    const int64_t pad_left = span / 2;
    auto n = detail::make_node({B, F, L}, {input.node_ptr(), kernel.node_ptr()});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t f = 0; f < F; ++f)
            for (int64_t l = 0; l < L; ++l) {
                double acc = 0.0;
                for (int64_t k = 0; k < K; ++k) {
                    const int64_t src = l + k * dilation - pad_left;
                    if (src < 0 || src >= L) continue;
                    for (int64_t c = 0; c < C; ++c)
                        acc += input.values()[(b * C + c) * L + src] *
                               kernel.values()[(f * C + c) * K + k];
                }
                n->value[(b * F + f) * L + l] = acc;
            }
    TensorNode* self = n.get();
    TensorNode *pi = input.node(), *pk = kernel.node();
    n->backward_fn = [self, pi, pk, B, C, L, F, K, dilation, pad_left] {
        detail::ensure_grad(pi);
        detail::ensure_grad(pk);
        for (int64_t b = 0; b < B; ++b)
            for (int64_t f = 0; f < F; ++f)
                for (int64_t l = 0; l < L; ++l) {
                    const double g = self->grad[(b * F + f) * L + l];
                    if (g == 0.0) continue;
                    for (int64_t k = 0; k < K; ++k) {
                        const int64_t src = l + k * dilation - pad_left;
                        if (src < 0 || src >= L) continue;
                        for (int64_t c = 0; c < C; ++c) {
                            pi->grad[(b * C + c) * L + src] += g * pk->value[(f * C + c) * K + k];
                            pk->grad[(f * C + c) * K + k] += g * pi->value[(b * C + c) * L + src];
                        }
                    }
                }
    };
    return Tensor(n);
}

// x: BxCxL, bias: C, broadcast over batch and length
inline Tensor bias_add_channels(const Tensor& x, const Tensor& b) {
    const Shape& s = x.shape();
    if (s.size() != 3 || b.shape() != Shape{s[1]})
        throw ShapeError("bias_add_channels: shapes " + shape_str(s) + " vs " +
                         shape_str(b.shape()));
    const int64_t B = s[0], C = s[1], L = s[2];
    auto n = detail::make_node(s, {x.node_ptr(), b.node_ptr()});
    for (int64_t i = 0; i < B; ++i)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t l = 0; l < L; ++l)
                n->value[(i * C + c) * L + l] = x.values()[(i * C + c) * L + l] + b.values()[c];
    TensorNode* self = n.get();
    TensorNode *px = x.node(), *pb = b.node();
    n->backward_fn = [self, px, pb, B, C, L] {
        detail::ensure_grad(px);
        detail::ensure_grad(pb);
        for (int64_t i = 0; i < B; ++i)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t l = 0; l < L; ++l) {
                    const double g = self->grad[(i * C + c) * L + l];
                    px->grad[(i * C + c) * L + l] += g;
                    pb->grad[c] += g;
                }
    };
    return Tensor(n);
}

// per-bin max over contiguous near-equal bins; gradient routes to the argmax
// (first index on ties). x: BxCxL -> BxCxL_out.
inline Tensor adaptive_max_pool1d(const Tensor& x, int64_t l_out) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw ShapeError("adaptive_max_pool1d: need BxCxL, got " + shape_str(s));
    if (l_out < 1) throw std::invalid_argument("adaptive_max_pool1d: target length must be >= 1");
    const int64_t B = s[0], C = s[1], L = s[2];
    auto n = detail::make_node({B, C, l_out}, {x.node_ptr()});
    std::vector<int64_t> argmax(B * C * l_out);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t j = 0; j < l_out; ++j) {
                int64_t lo = j * L / l_out;
                int64_t hi = (j + 1) * L / l_out;
                if (hi <= lo) hi = lo + 1;  // short inputs: repeat elements
                if (lo >= L) lo = L - 1;
                if (hi > L) hi = L;
                int64_t best = lo;
                double bv = x.values()[(b * C + c) * L + lo];
                for (int64_t l = lo + 1; l < hi; ++l) {
                    const double v = x.values()[(b * C + c) * L + l];
                    if (v > bv) {
                        bv = v;
                        best = l;
                    }
                }
                n->value[(b * C + c) * l_out + j] = bv;
                argmax[(b * C + c) * l_out + j] = (b * C + c) * L + best;
            }
    TensorNode* self = n.get();
    TensorNode* px = x.node();
    n->backward_fn = [self, px, argmax = std::move(argmax)] {
        detail::ensure_grad(px);
        for (size_t i = 0; i < self->grad.size(); ++i) px->grad[argmax[i]] += self->grad[i];
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

// normalize over the last axis: (x - mean) / sqrt(var + eps); affine gain and
// bias are applied separately by the caller.
inline Tensor layer_norm(const Tensor& x, double eps = 1e-5) {
    if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be > 0");
    const Shape& s = x.shape();
    if (s.empty()) throw ShapeError("layer_norm: scalar input");
    const int64_t F = s.back();
    const int64_t rows = x.numel() / F;
    auto n = detail::make_node(s, {x.node_ptr()});
    std::vector<double> inv_std(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * F;
        double mu = 0.0;
        for (int64_t i = 0; i < F; ++i) mu += xr[i];
        mu /= F;
        double var = 0.0;
        for (int64_t i = 0; i < F; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= F;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int64_t i = 0; i < F; ++i) n->value[r * F + i] = (xr[i] - mu) * is;
    }
    TensorNode* self = n.get();
    TensorNode* px = x.node();
    n->backward_fn = [self, px, rows, F, inv_std = std::move(inv_std)] {
        detail::ensure_grad(px);
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = self->value.data() + r * F;
            const double* g = self->grad.data() + r * F;
            double gm = 0.0, gym = 0.0;
            for (int64_t i = 0; i < F; ++i) {
                gm += g[i];
                gym += g[i] * y[i];
            }
            gm /= F;
            gym /= F;
            for (int64_t i = 0; i < F; ++i)
                px->grad[r * F + i] += inv_std[r] * (g[i] - gm - y[i] * gym);
        }
    };
    return Tensor(n);
}

// x: ...xF, g: F — scale the last axis (layer-norm gain etc.)
inline Tensor mul_last(const Tensor& x, const Tensor& g) {
    const Shape& s = x.shape();
    if (s.empty() || g.shape() != Shape{s.back()})
        throw ShapeError("mul_last: shapes " + shape_str(s) + " vs " + shape_str(g.shape()));
    const int64_t F = s.back(), rows = x.numel() / F;
    auto n = detail::make_node(s, {x.node_ptr(), g.node_ptr()});
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < F; ++i)
            n->value[r * F + i] = x.values()[r * F + i] * g.values()[i];
    TensorNode* self = n.get();
    TensorNode *px = x.node(), *pg = g.node();
    n->backward_fn = [self, px, pg, rows, F] {
        detail::ensure_grad(px);
        detail::ensure_grad(pg);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t i = 0; i < F; ++i) {
                const double gr = self->grad[r * F + i];
                px->grad[r * F + i] += gr * pg->value[i];
                pg->grad[i] += gr * px->value[r * F + i];
            }
    };
    return Tensor(n);
}

// x: ...xF, b: F — shift the last axis
inline Tensor add_bias_last(const Tensor& x, const Tensor& b) {
    const Shape& s = x.shape();
    if (s.empty() || b.shape() != Shape{s.back()})
        throw ShapeError("add_bias_last: shapes " + shape_str(s) + " vs " + shape_str(b.shape()));
    const int64_t F = s.back(), rows = x.numel() / F;
    auto n = detail::make_node(s, {x.node_ptr(), b.node_ptr()});
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < F; ++i) n->value[r * F + i] = x.values()[r * F + i] + b.values()[i];
    TensorNode* self = n.get();
    TensorNode *px = x.node(), *pb = b.node();
    n->backward_fn = [self, px, pb, rows, F] {
        detail::ensure_grad(px);
        detail::ensure_grad(pb);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t i = 0; i < F; ++i) {
                px->grad[r * F + i] += self->grad[r * F + i];
                pb->grad[i] += self->grad[r * F + i];
            }
    };
    return Tensor(n);
}

// x: Bx..., s: B — multiply every batch slice by its scalar
inline Tensor mul_batch_scalar(const Tensor& x, const Tensor& s) {
    const Shape& sx = x.shape();
    if (sx.empty() || s.numel() != sx[0])
        throw ShapeError("mul_batch_scalar: shapes " + shape_str(sx) + " vs " +
                         shape_str(s.shape()));
    const int64_t B = sx[0], slice = x.numel() / B;
    auto n = detail::make_node(sx, {x.node_ptr(), s.node_ptr()});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < slice; ++i)
            n->value[b * slice + i] = x.values()[b * slice + i] * s.values()[b];
    TensorNode* self = n.get();
    TensorNode *px = x.node(), *ps = s.node();
    n->backward_fn = [self, px, ps, B, slice] {
        detail::ensure_grad(px);
        detail::ensure_grad(ps);
        for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < slice; ++i) {
                const double g = self->grad[b * slice + i];
                px->grad[b * slice + i] += g * ps->value[b];
                ps->grad[b] += g * px->value[b * slice + i];
            }
    };
    return Tensor(n);
}

// unit-normalize the last axis; rows with norm <= eps are divided by eps
inline Tensor l2_normalize(const Tensor& x, double eps = 1e-12) {
    if (eps <= 0.0) throw std::invalid_argument("l2_normalize: eps must be > 0");
    const Shape& s = x.shape();
    if (s.empty()) throw ShapeError("l2_normalize: scalar input");
    const int64_t F = s.back(), rows = x.numel() / F;
    auto n = detail::make_node(s, {x.node_ptr()});
    std::vector<double> denom(rows);
    for (int64_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (int64_t i = 0; i < F; ++i) sq += x.values()[r * F + i] * x.values()[r * F + i];
        const double d = std::max(std::sqrt(sq), eps);
        denom[r] = d;
        for (int64_t i = 0; i < F; ++i) n->value[r * F + i] = x.values()[r * F + i] / d;
    }
    TensorNode* self = n.get();
    TensorNode* px = x.node();
    n->backward_fn = [self, px, rows, F, eps, denom = std::move(denom)] {
        detail::ensure_grad(px);
        for (int64_t r = 0; r < rows; ++r) {
            const double d = denom[r];
            if (d <= eps) {  // clipped branch: plain scaling
                for (int64_t i = 0; i < F; ++i) px->grad[r * F + i] += self->grad[r * F + i] / d;
                continue;
            }
            const double* y = self->value.data() + r * F;
            const double* g = self->grad.data() + r * F;
            double dot = 0.0;
            for (int64_t i = 0; i < F; ++i) dot += y[i] * g[i];
            for (int64_t i = 0; i < F; ++i) px->grad[r * F + i] += (g[i] - y[i] * dot) / d;
        }
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

// out[i] = x[i, idx[i]] for x: BxC
inline Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx) {
    const Shape& s = x.shape();
    if (s.size() != 2 || static_cast<int64_t>(idx.size()) != s[0])
        throw ShapeError("gather_rows: need BxC with B indices, got " + shape_str(s));
    const int64_t B = s[0], C = s[1];
    for (int64_t i : idx)
        if (i < 0 || i >= C) throw std::out_of_range("gather_rows: index out of range");
    auto n = detail::make_node({B}, {x.node_ptr()});
    for (int64_t b = 0; b < B; ++b) n->value[b] = x.values()[b * C + idx[b]];
    TensorNode* self = n.get();
    TensorNode* px = x.node();
    n->backward_fn = [self, px, C, idx] {
        detail::ensure_grad(px);
        for (size_t b = 0; b < idx.size(); ++b) px->grad[b * C + idx[b]] += self->grad[b];
    };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

// pairwise cosine similarity: a, b are BxD; result BxB
inline Tensor cosine_sim_matrix(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw ShapeError("cosine_sim_matrix: shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    return matmul(l2_normalize(a), transpose2d(l2_normalize(b)));
}

// multi-head scaled dot-product attention over already-projected q, k, v of
// shape BxLxF. Splits into `heads` heads, scales by 1/sqrt(F/heads).
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                                   Tensor* attn_out = nullptr) {
    const Shape& s = q.shape();
    require_same_shape("scaled_dot_attention(q,k)", s, k.shape());
    require_same_shape("scaled_dot_attention(q,v)", s, v.shape());
    if (s.size() != 3) throw ShapeError("scaled_dot_attention: need BxLxF, got " + shape_str(s));
    if (heads < 1 || s[2] % heads != 0)
        throw std::invalid_argument("scaled_dot_attention: heads must divide feature dim");
    const int64_t B = s[0], L = s[1], F = s[2], dh = F / heads;

    auto split = [&](const Tensor& t) {
        return permute(reshape(t, {B, L, heads, dh}), {0, 2, 1, 3});  // BxHxLxdh
    };
    Tensor qh = split(q), kh = split(k), vh = split(v);
    Tensor scores = scale(batched_matmul(qh, kh, /*transpose_b=*/true),
                          1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax(scores, 3);  // BxHxLxL, rows sum to one
    if (attn_out) *attn_out = attn;
    Tensor ctx = batched_matmul(attn, vh);                  // BxHxLxdh
    return reshape(permute(ctx, {0, 2, 1, 3}), {B, L, F});  // BxLxF
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

inline void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar tensor");
    // iterative post-order DFS for a reverse topological order
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            TensorNode* p = node->parents[child++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TensorNode* n : order) n->grad.assign(n->value.size(), 0.0);
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace qscl
