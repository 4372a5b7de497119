// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode autodiff over dense row-major tensors. Templated on the
// element type so the same graph code runs in float for training and in
// double for finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "ecctlin/errors.hpp"

namespace ecctlin {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

inline void require_valid_shape(const Shape& s, const char* who) {
    if (s.empty()) throw ShapeError(std::string(who) + ": empty shape");
    for (int d : s)
        if (d <= 0) throw ShapeError(std::string(who) + ": nonpositive dimension in " + shape_str(s));
}

// ---- global modes ----------------------------------------------------------

namespace detail {
inline thread_local bool grad_enabled = true;
inline thread_local std::uint64_t matmul_flops = 0;
}  // namespace detail

struct GradMode {
    static bool enabled() { return detail::grad_enabled; }
    static void set(bool on) { detail::grad_enabled = on; }
};

// RAII scope that disables graph construction (inference / evaluation).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Multiply-add work executed by matmul forward passes on this thread.
inline std::uint64_t flop_count() { return detail::matmul_flops; }
inline void reset_flop_count() { detail::matmul_flops = 0; }

// ---- node / handle ---------------------------------------------------------

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first needed
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void()> backward_fn;  // unset on leaves

    std::size_t numel() const { return shape_numel(shape); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }
    static Tensor filled(Shape shape, T value, bool requires_grad = false) {
        require_valid_shape(shape, "tensor");
        auto n = std::make_shared<TensorNode<T>>();
        n->data.assign(shape_numel(shape), value);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }
    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        require_valid_shape(shape, "tensor");
        if (data.size() != shape_numel(shape))
            throw ShapeError("tensor: data size " + std::to_string(data.size()) + " does not fill " +
                             shape_str(shape));
        auto n = std::make_shared<TensorNode<T>>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->numel(); }
    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }
    T item() const {
        if (numel() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
        return node_->data[0];
    }
    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

    // Reverse pass from a scalar root. Gradients of interior nodes are reset
    // on every call; leaf gradients accumulate across calls.
    void backward() const;

  private:
    std::shared_ptr<TensorNode<T>> node_;
};

// ---- broadcasting helpers --------------------------------------------------

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* who) {
    const int rank = static_cast<int>(std::max(a.size(), b.size()));
    Shape out(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) {
        const int da = i < static_cast<int>(a.size()) ? a[a.size() - 1 - static_cast<std::size_t>(i)] : 1;
        const int db = i < static_cast<int>(b.size()) ? b[b.size() - 1 - static_cast<std::size_t>(i)] : 1;
        if (da != db && da != 1 && db != 1)
            throw ShapeError(std::string(who) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[static_cast<std::size_t>(rank - 1 - i)] = std::max(da, db);
    }
    return out;
}

namespace detail {

// Per-output-dimension element strides of `in` right-aligned against `out`;
// zero where `in` is broadcast.
inline std::vector<std::size_t> bcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> st(out.size(), 0);
    std::size_t run = 1;
    for (int i = 0; i < static_cast<int>(in.size()); ++i) {
        const std::size_t od = out.size() - 1 - static_cast<std::size_t>(i);
        const int d = in[in.size() - 1 - static_cast<std::size_t>(i)];
        st[od] = (d == 1 && out[od] != 1) ? 0 : run;
        run *= static_cast<std::size_t>(d);
    }
    return st;
}

// Visits every output element of a broadcast binary op, handing the linear
// indices (out, a, b) to `f`. Index bookkeeping is incremental (no div/mod).
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
    const std::size_t total = shape_numel(out);
    if (sa == sb) {
        for (std::size_t i = 0; i < total; ++i) f(i, i, i);
        return;
    }
    const auto stra = bcast_strides(sa, out);
    const auto strb = bcast_strides(sb, out);
    const int rank = static_cast<int>(out.size());
    std::vector<int> idx(static_cast<std::size_t>(rank), 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t io = 0; io < total; ++io) {
        f(io, ia, ib);
        for (int d = rank - 1; d >= 0; --d) {
            ++idx[static_cast<std::size_t>(d)];
            ia += stra[static_cast<std::size_t>(d)];
            ib += strb[static_cast<std::size_t>(d)];
            if (idx[static_cast<std::size_t>(d)] < out[static_cast<std::size_t>(d)]) break;
            ia -= stra[static_cast<std::size_t>(d)] * static_cast<std::size_t>(out[static_cast<std::size_t>(d)]);
            ib -= strb[static_cast<std::size_t>(d)] * static_cast<std::size_t>(out[static_cast<std::size_t>(d)]);
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
}

template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> data, std::vector<Tensor<T>> inputs) {
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    bool need = false;
    for (const auto& in : inputs) need = need || in.requires_grad();
    if (grad_enabled && need) {
        n->requires_grad = true;
        for (auto& in : inputs) n->parents.push_back(in.node());
    }
    return Tensor<T>(std::move(n));
}

}  // namespace detail

// ---- elementwise binary ops ------------------------------------------------

namespace detail {

enum class BinKind { add, sub, mul };

template <typename T>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, BinKind kind, const char* who) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), who);
    std::vector<T> out(shape_numel(out_shape));
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    switch (kind) {
        case BinKind::add:
            for_each_broadcast(out_shape, a.shape(), b.shape(),
                               [&](std::size_t io, std::size_t ia, std::size_t ib) { out[io] = pa[ia] + pb[ib]; });
            break;
        case BinKind::sub:
            for_each_broadcast(out_shape, a.shape(), b.shape(),
                               [&](std::size_t io, std::size_t ia, std::size_t ib) { out[io] = pa[ia] - pb[ib]; });
            break;
        case BinKind::mul:
            for_each_broadcast(out_shape, a.shape(), b.shape(),
                               [&](std::size_t io, std::size_t ia, std::size_t ib) { out[io] = pa[ia] * pb[ib]; });
            break;
    }
    Tensor<T> res = make_op_result(std::move(out_shape), std::move(out), {a, b});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        auto nb = b.node();
        res.node()->backward_fn = [self, na, nb, kind]() {
            const T* g = self->grad.data();
            if (na->requires_grad) na->ensure_grad();
            if (nb->requires_grad) nb->ensure_grad();
            T* ga = na->requires_grad ? na->grad.data() : nullptr;
            T* gb = nb->requires_grad ? nb->grad.data() : nullptr;
            const T* da = na->data.data();
            const T* db = nb->data.data();
            for_each_broadcast(self->shape, na->shape, nb->shape,
                               [&](std::size_t io, std::size_t ia, std::size_t ib) {
                                   switch (kind) {
                                       case BinKind::add:
                                           if (ga) ga[ia] += g[io];
                                           if (gb) gb[ib] += g[io];
                                           break;
                                       case BinKind::sub:
                                           if (ga) ga[ia] += g[io];
                                           if (gb) gb[ib] -= g[io];
                                           break;
                                       case BinKind::mul:
                                           if (ga) ga[ia] += g[io] * db[ib];
                                           if (gb) gb[ib] += g[io] * da[ia];
                                           break;
                                   }
                               });
        };
    }
    return res;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::add, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::sub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::mul, "mul");
}
template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
    return mul(a, b);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double s) {
    std::vector<T> out(a.numel());
    const T f = static_cast<T>(s);
    const T* pa = a.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * f;
    Tensor<T> res = detail::make_op_result(a.shape(), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na, f]() {
            na->ensure_grad();
            const T* g = self->grad.data();
            T* ga = na->grad.data();
            for (std::size_t i = 0; i < self->data.size(); ++i) ga[i] += g[i] * f;
        };
    }
    return res;
}

// ---- matmul ----------------------------------------------------------------

namespace detail {

// C(M,N) += A(M,K) * B(K,N), loop order chosen so the inner loop streams rows.
template <typename T>
void gemm_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        T* crow = C + static_cast<std::size_t>(i) * N;
        const T* arow = A + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const T aik = arow[k];
            const T* brow = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
void transpose_2d(const T* in, T* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace detail

// Batched matrix product (..., M, K) x (..., K, N) -> (..., M, N) with
// leading dimensions broadcast. The global FLOP counter is incremented by
// 2*M*K*N per batch element on the forward pass.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int M = a.dim(a.rank() - 2);
    const int K = a.dim(a.rank() - 1);
    const int K2 = b.dim(b.rank() - 2);
    const int N = b.dim(b.rank() - 1);
    if (K != K2)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    Shape batch = batch_a.empty() && batch_b.empty()
                      ? Shape{}
                      : broadcast_shape(batch_a.empty() ? Shape{1} : batch_a,
                                        batch_b.empty() ? Shape{1} : batch_b, "matmul");
    while (batch.size() == 1 && batch[0] == 1 && batch_a.size() <= 1 && batch_b.size() <= 1 &&
           batch_a.empty() && batch_b.empty())
        batch.clear();

    Shape out_shape = batch;
    out_shape.push_back(M);
    out_shape.push_back(N);

    const std::size_t batches = batch.empty() ? 1 : shape_numel(batch);
    const std::size_t a_mat = static_cast<std::size_t>(M) * K;
    const std::size_t b_mat = static_cast<std::size_t>(K) * N;
    const std::size_t c_mat = static_cast<std::size_t>(M) * N;

    // linear batch offsets honoring broadcast
    std::vector<std::size_t> aoff(batches, 0), boff(batches, 0);
    if (!batch.empty()) {
        Shape ba = batch_a.empty() ? Shape{1} : batch_a;
        Shape bb = batch_b.empty() ? Shape{1} : batch_b;
        detail::for_each_broadcast(batch, ba, bb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
            aoff[io] = ia * a_mat;
            boff[io] = ib * b_mat;
        });
    }

    std::vector<T> out(batches * c_mat, T(0));
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    for (std::size_t bi = 0; bi < batches; ++bi)
        detail::gemm_acc(pa + aoff[bi], pb + boff[bi], out.data() + bi * c_mat, M, K, N);
    detail::matmul_flops += 2ULL * static_cast<std::uint64_t>(M) * static_cast<std::uint64_t>(K) *
                            static_cast<std::uint64_t>(N) * batches;

    Tensor<T> res = detail::make_op_result(std::move(out_shape), std::move(out), {a, b});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        auto nb = b.node();
        res.node()->backward_fn = [self, na, nb, M, K, N, batches, aoff, boff, a_mat, b_mat, c_mat]() {
            const T* g = self->grad.data();
            const T* pa2 = na->data.data();
            const T* pb2 = nb->data.data();
            std::vector<T> scratch(std::max(a_mat, b_mat));
            if (na->requires_grad) {
                na->ensure_grad();
                // dA = dC * B^T
                for (std::size_t bi = 0; bi < batches; ++bi) {
                    detail::transpose_2d(pb2 + boff[bi], scratch.data(), K, N);
                    detail::gemm_acc(g + bi * c_mat, scratch.data(), na->grad.data() + aoff[bi], M, N, K);
                }
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                // dB = A^T * dC
                for (std::size_t bi = 0; bi < batches; ++bi) {
                    detail::transpose_2d(pa2 + aoff[bi], scratch.data(), M, K);
                    detail::gemm_acc(scratch.data(), g + bi * c_mat, nb->grad.data() + boff[bi], K, M, N);
                }
            }
        };
    }
    return res;
}

// ---- shape ops ---------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    long long known = 1;
    int infer = -1;
    for (std::size_t i = 0; i < new_shape.size(); ++i) {
        if (new_shape[i] == -1) {
            if (infer >= 0) throw ShapeError("reshape: more than one inferred dimension");
            infer = static_cast<int>(i);
        } else if (new_shape[i] <= 0) {
            throw ShapeError("reshape: bad dimension in " + shape_str(new_shape));
        } else {
            known *= new_shape[i];
        }
    }
    if (infer >= 0) {
        if (known == 0 || static_cast<long long>(a.numel()) % known != 0)
            throw ShapeError("reshape: cannot infer dimension for " + shape_str(a.shape()) + " -> " +
                             shape_str(new_shape));
        new_shape[static_cast<std::size_t>(infer)] = static_cast<int>(static_cast<long long>(a.numel()) / known);
    }
    if (shape_numel(new_shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
    Tensor<T> res = detail::make_op_result(std::move(new_shape), a.data(), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na]() {
            na->ensure_grad();
            for (std::size_t i = 0; i < self->data.size(); ++i) na->grad[i] += self->grad[i];
        };
    }
    return res;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& axes) {
    const int rank = a.rank();
    if (static_cast<int>(axes.size()) != rank)
        throw ShapeError("permute: axes list has size " + std::to_string(axes.size()) + " for rank " +
                         std::to_string(rank));
    std::vector<bool> seen(static_cast<std::size_t>(rank), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= rank || seen[static_cast<std::size_t>(ax)])
            throw ShapeError("permute: invalid axes for " + shape_str(a.shape()));
        seen[static_cast<std::size_t>(ax)] = true;
    }
    Shape out_shape(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) out_shape[static_cast<std::size_t>(i)] = a.dim(axes[static_cast<std::size_t>(i)]);

    // in-strides, then walk the output in linear order
    std::vector<std::size_t> in_strides(static_cast<std::size_t>(rank), 1);
    for (int i = rank - 2; i >= 0; --i)
        in_strides[static_cast<std::size_t>(i)] =
            in_strides[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(a.dim(i + 1));
    std::vector<std::size_t> walk(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) walk[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];

    const std::size_t total = a.numel();
    std::vector<T> out(total);
    const T* pa = a.data().data();
    std::vector<int> idx(static_cast<std::size_t>(rank), 0);
    std::size_t iin = 0;
    for (std::size_t io = 0; io < total; ++io) {
        out[io] = pa[iin];
        for (int d = rank - 1; d >= 0; --d) {
            ++idx[static_cast<std::size_t>(d)];
            iin += walk[static_cast<std::size_t>(d)];
            if (idx[static_cast<std::size_t>(d)] < out_shape[static_cast<std::size_t>(d)]) break;
            iin -= walk[static_cast<std::size_t>(d)] * static_cast<std::size_t>(out_shape[static_cast<std::size_t>(d)]);
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    Tensor<T> res = detail::make_op_result(std::move(out_shape), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na, walk]() {
            na->ensure_grad();
            const int rk = static_cast<int>(self->shape.size());
            std::vector<int> ix(static_cast<std::size_t>(rk), 0);
            std::size_t iin2 = 0;
            for (std::size_t io = 0; io < self->data.size(); ++io) {
                na->grad[iin2] += self->grad[io];
                for (int d = rk - 1; d >= 0; --d) {
                    ++ix[static_cast<std::size_t>(d)];
                    iin2 += walk[static_cast<std::size_t>(d)];
                    if (ix[static_cast<std::size_t>(d)] < self->shape[static_cast<std::size_t>(d)]) break;
                    iin2 -= walk[static_cast<std::size_t>(d)] * static_cast<std::size_t>(self->shape[static_cast<std::size_t>(d)]);
                    ix[static_cast<std::size_t>(d)] = 0;
                }
            }
        };
    }
    return res;
}

// Swap the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() < 2) throw ShapeError("transpose: rank must be >= 2, got " + shape_str(a.shape()));
    std::vector<int> axes(static_cast<std::size_t>(a.rank()));
    for (int i = 0; i < a.rank(); ++i) axes[static_cast<std::size_t>(i)] = i;
    std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
    return permute(a, axes);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const int rank = parts[0].rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("concat: axis out of range");
    Shape out_shape = parts[0].shape();
    int total_axis = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && p.dim(d) != out_shape[static_cast<std::size_t>(d)])
                throw ShapeError("concat: shape " + shape_str(p.shape()) + " incompatible with " +
                                 shape_str(parts[0].shape()));
        total_axis += p.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = total_axis;

    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(out_shape[static_cast<std::size_t>(d)]);
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(out_shape[static_cast<std::size_t>(d)]);

    std::vector<T> out(shape_numel(out_shape));
    std::size_t col = 0;
    for (const auto& p : parts) {
        const std::size_t pa = static_cast<std::size_t>(p.dim(axis));
        const T* src = p.data().data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(src + o * pa * inner, src + (o + 1) * pa * inner,
                      out.data() + (o * static_cast<std::size_t>(total_axis) + col) * inner);
        col += pa;
    }
    Tensor<T> res = detail::make_op_result(std::move(out_shape), std::move(out), parts);
    if (res.requires_grad()) {
        auto self = res.node().get();
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        std::vector<std::size_t> widths;
        for (const auto& p : parts) {
            nodes.push_back(p.node());
            widths.push_back(static_cast<std::size_t>(p.dim(axis)));
        }
        res.node()->backward_fn = [self, nodes, widths, outer, inner, total_axis]() {
            std::size_t col2 = 0;
            for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                auto& nd = nodes[pi];
                const std::size_t pa = widths[pi];
                if (nd->requires_grad) {
                    nd->ensure_grad();
                    for (std::size_t o = 0; o < outer; ++o) {
                        const T* g = self->grad.data() + (o * static_cast<std::size_t>(total_axis) + col2) * inner;
                        T* dst = nd->grad.data() + o * pa * inner;
                        for (std::size_t i = 0; i < pa * inner; ++i) dst[i] += g[i];
                    }
                }
                col2 += pa;
            }
        };
    }
    return res;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int start, int length) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("slice: axis out of range");
    if (start < 0 || length <= 0 || start + length > a.dim(axis))
        throw ShapeError("slice: window [" + std::to_string(start) + "," + std::to_string(start + length) +
                         ") exceeds axis of size " + std::to_string(a.dim(axis)));
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(axis)] = length;
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(a.dim(d));
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(a.dim(d));
    const std::size_t full = static_cast<std::size_t>(a.dim(axis));

    std::vector<T> out(shape_numel(out_shape));
    const T* src = a.data().data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(src + (o * full + static_cast<std::size_t>(start)) * inner,
                  src + (o * full + static_cast<std::size_t>(start + length)) * inner,
                  out.data() + o * static_cast<std::size_t>(length) * inner);
    Tensor<T> res = detail::make_op_result(std::move(out_shape), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        const std::size_t st = static_cast<std::size_t>(start);
        const std::size_t len = static_cast<std::size_t>(length);
        res.node()->backward_fn = [self, na, outer, inner, full, st, len]() {
            na->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
                const T* g = self->grad.data() + o * len * inner;
                T* dst = na->grad.data() + (o * full + st) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += g[i];
            }
        };
    }
    return res;
}

// ---- reductions --------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& a, int axis, bool keepdims, bool mean, const char* who) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError(std::string(who) + ": axis out of range for " + shape_str(a.shape()));
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(a.dim(d));
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(a.dim(d));
    const std::size_t n_axis = static_cast<std::size_t>(a.dim(axis));

    Shape out_shape;
    for (int d = 0; d < rank; ++d) {
        if (d == axis) {
            if (keepdims) out_shape.push_back(1);
        } else {
            out_shape.push_back(a.dim(d));
        }
    }
    if (out_shape.empty()) out_shape.push_back(1);

    const T inv = mean ? static_cast<T>(1.0 / static_cast<double>(n_axis)) : T(1);
    std::vector<T> out(outer * inner, T(0));
    const T* src = a.data().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n_axis; ++k) {
            const T* row = src + (o * n_axis + k) * inner;
            T* dst = out.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += row[i];
        }
    if (mean)
        for (T& v : out) v *= inv;

    Tensor<T> res = make_op_result(std::move(out_shape), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na, outer, inner, n_axis, inv]() {
            na->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < n_axis; ++k) {
                    const T* g = self->grad.data() + o * inner;
                    T* dst = na->grad.data() + (o * n_axis + k) * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i] * inv;
                }
        };
    }
    return res;
}

}  // namespace detail

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, int axis, bool keepdims = false) {
    return detail::reduce_axis(a, axis, keepdims, false, "reduce_sum");
}
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, int axis, bool keepdims = false) {
    return detail::reduce_axis(a, axis, keepdims, true, "reduce_mean");
}

// Full reduction to a scalar of shape (1).
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a) {
    T total = T(0);
    for (T v : a.data()) total += v;
    Tensor<T> res = detail::make_op_result(Shape{1}, std::vector<T>{total}, {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na]() {
            na->ensure_grad();
            const T g = self->grad[0];
            for (std::size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += g;
        };
    }
    return res;
}
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a) {
    Tensor<T> s = reduce_sum(a);
    return scale(s, 1.0 / static_cast<double>(a.numel()));
}

// ---- unary activations -------------------------------------------------------

namespace detail {

template <typename T, typename FwdFn, typename GradFn>
Tensor<T> unary_op(const Tensor<T>& a, FwdFn fwd, GradFn dgrad) {
    std::vector<T> out(a.numel());
    const T* pa = a.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i]);
    Tensor<T> res = make_op_result(a.shape(), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na, dgrad]() {
            na->ensure_grad();
            const T* g = self->grad.data();
            const T* x = na->data.data();
            const T* y = self->data.data();
            T* ga = na->grad.data();
            for (std::size_t i = 0; i < self->data.size(); ++i) ga[i] += g[i] * dgrad(x[i], y[i]);
        };
    }
    return res;
}

}  // namespace detail

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return detail::unary_op(
        a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

// Exact (erf-based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return detail::unary_op(
        a,
        [=](T x) {
            const double xd = static_cast<double>(x);
            return static_cast<T>(0.5 * xd * (1.0 + std::erf(xd * inv_sqrt2)));
        },
        [=](T x, T) {
            const double xd = static_cast<double>(x);
            const double phi = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
            return static_cast<T>(phi + xd * pdf);
        });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_op(
        a,
        [](T x) {
            const double xd = static_cast<double>(x);
            return static_cast<T>(xd >= 0 ? 1.0 / (1.0 + std::exp(-xd))
                                          : std::exp(xd) / (1.0 + std::exp(xd)));
        },
        [](T, T y) { return y * (T(1) - y); });
}

// ---- softmax -----------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis = -1) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("softmax: axis out of range for " + shape_str(a.shape()));
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(a.dim(d));
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(a.dim(d));
    const std::size_t n_axis = static_cast<std::size_t>(a.dim(axis));

    std::vector<T> out(a.numel());
    const T* src = a.data().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * n_axis * inner + i;
            T mx = src[base];
            for (std::size_t k = 1; k < n_axis; ++k) mx = std::max(mx, src[base + k * inner]);
            T denom = T(0);
            for (std::size_t k = 0; k < n_axis; ++k) {
                const T e = static_cast<T>(std::exp(static_cast<double>(src[base + k * inner] - mx)));
                out[base + k * inner] = e;
                denom += e;
            }
            const T inv = T(1) / denom;
            for (std::size_t k = 0; k < n_axis; ++k) out[base + k * inner] *= inv;
        }
    Tensor<T> res = detail::make_op_result(a.shape(), std::move(out), {a});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto na = a.node();
        res.node()->backward_fn = [self, na, outer, inner, n_axis]() {
            na->ensure_grad();
            const T* g = self->grad.data();
            const T* y = self->data.data();
            T* ga = na->grad.data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = o * n_axis * inner + i;
                    T dot = T(0);
                    for (std::size_t k = 0; k < n_axis; ++k) dot += g[base + k * inner] * y[base + k * inner];
                    for (std::size_t k = 0; k < n_axis; ++k)
                        ga[base + k * inner] += y[base + k * inner] * (g[base + k * inner] - dot);
                }
        };
    }
    return res;
}

// ---- layer norm ----------------------------------------------------------------

// Normalizes along `axis` (default last); gain and bias are vectors of that
// axis length. The backward pass is the closed-form reduction of the chain
// rule through mean and variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, int axis = -1,
                     double eps = 1e-5) {
    const int rank = x.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("layer_norm: axis out of range for " + shape_str(x.shape()));
    const std::size_t n_axis = static_cast<std::size_t>(x.dim(axis));
    if (gain.numel() != n_axis || bias.numel() != n_axis)
        throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                         " do not match axis length " + std::to_string(n_axis));
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(x.dim(d));
    for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(x.dim(d));

    std::vector<T> out(x.numel());
    std::vector<T> xhat(x.numel());
    std::vector<T> invstd(outer * inner);
    const T* px = x.data().data();
    const T* pg = gain.data().data();
    const T* pb = bias.data().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * n_axis * inner + i;
            double mean = 0.0;
            for (std::size_t k = 0; k < n_axis; ++k) mean += static_cast<double>(px[base + k * inner]);
            mean /= static_cast<double>(n_axis);
            double var = 0.0;
            for (std::size_t k = 0; k < n_axis; ++k) {
                const double d = static_cast<double>(px[base + k * inner]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(n_axis);
            const double inv = 1.0 / std::sqrt(var + eps);
            invstd[o * inner + i] = static_cast<T>(inv);
            for (std::size_t k = 0; k < n_axis; ++k) {
                const T xh = static_cast<T>((static_cast<double>(px[base + k * inner]) - mean) * inv);
                xhat[base + k * inner] = xh;
                out[base + k * inner] = pg[k] * xh + pb[k];
            }
        }
    Tensor<T> res = detail::make_op_result(x.shape(), std::move(out), {x, gain, bias});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto nx = x.node();
        auto ng = gain.node();
        auto nb = bias.node();
        res.node()->backward_fn = [self, nx, ng, nb, outer, inner, n_axis, xh = std::move(xhat),
                                   inv = std::move(invstd)]() {
            const T* g = self->grad.data();
            const T* pg2 = ng->data.data();
            if (nx->requires_grad) nx->ensure_grad();
            if (ng->requires_grad) ng->ensure_grad();
            if (nb->requires_grad) nb->ensure_grad();
            const T invn = static_cast<T>(1.0 / static_cast<double>(n_axis));
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = o * n_axis * inner + i;
                    if (nx->requires_grad) {
                        T s1 = T(0), s2 = T(0);
                        for (std::size_t k = 0; k < n_axis; ++k) {
                            const T dxh = g[base + k * inner] * pg2[k];
                            s1 += dxh;
                            s2 += dxh * xh[base + k * inner];
                        }
                        const T istd = inv[o * inner + i];
                        for (std::size_t k = 0; k < n_axis; ++k) {
                            const T dxh = g[base + k * inner] * pg2[k];
                            nx->grad[base + k * inner] +=
                                istd * (dxh - invn * s1 - xh[base + k * inner] * invn * s2);
                        }
                    }
                    if (ng->requires_grad)
                        for (std::size_t k = 0; k < n_axis; ++k)
                            ng->grad[k] += g[base + k * inner] * xh[base + k * inner];
                    if (nb->requires_grad)
                        for (std::size_t k = 0; k < n_axis; ++k) nb->grad[k] += g[base + k * inner];
                }
        };
    }
    return res;
}

// ---- attention mask fill -------------------------------------------------------

// Adds `value` wherever the (broadcast) mask is zero; the mask itself is a
// constant and receives no gradient.
template <typename T>
Tensor<T> masked_fill(const Tensor<T>& scores, const Tensor<T>& mask, double value = -1e9) {
    Shape out_shape = broadcast_shape(scores.shape(), mask.shape(), "masked_fill");
    if (out_shape != scores.shape())
        throw ShapeError("masked_fill: mask " + shape_str(mask.shape()) + " does not broadcast onto scores " +
                         shape_str(scores.shape()));
    std::vector<T> out(scores.numel());
    const T* ps = scores.data().data();
    const T* pm = mask.data().data();
    const T fill = static_cast<T>(value);
    detail::for_each_broadcast(out_shape, scores.shape(), mask.shape(),
                               [&](std::size_t io, std::size_t is, std::size_t im) {
                                   out[io] = pm[im] == T(0) ? ps[is] + fill : ps[is];
                               });
    Tensor<T> res = detail::make_op_result(std::move(out_shape), std::move(out), {scores});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto ns = scores.node();
        res.node()->backward_fn = [self, ns]() {
            ns->ensure_grad();
            for (std::size_t i = 0; i < self->data.size(); ++i) ns->grad[i] += self->grad[i];
        };
    }
    return res;
}

// ---- loss ------------------------------------------------------------------------

// Mean binary cross-entropy evaluated from logits with the numerically stable
// softplus split. Targets are constants in [0,1].
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape())
        throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs targets " +
                         shape_str(targets.shape()));
    const T* pl = logits.data().data();
    const T* pt = targets.data().data();
    const std::size_t count = logits.numel();
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double l = static_cast<double>(pl[i]);
        const double t = static_cast<double>(pt[i]);
        total += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
    }
    total /= static_cast<double>(count);
    Tensor<T> res = detail::make_op_result(Shape{1}, std::vector<T>{static_cast<T>(total)}, {logits});
    if (res.requires_grad()) {
        auto self = res.node().get();
        auto nl = logits.node();
        auto nt = targets.node();
        res.node()->backward_fn = [self, nl, nt, count]() {
            nl->ensure_grad();
            const T g = self->grad[0];
            const T invn = static_cast<T>(1.0 / static_cast<double>(count));
            for (std::size_t i = 0; i < count; ++i) {
                const double l = static_cast<double>(nl->data[i]);
                const double s = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
                nl->grad[i] += g * invn * static_cast<T>(s - static_cast<double>(nt->data[i]));
            }
        };
    }
    return res;
}

// ---- backward --------------------------------------------------------------------

template <typename T>
void Tensor<T>::backward() const {
    if (!node_) throw ShapeError("backward: empty tensor");
    if (numel() != 1) throw ShapeError("backward: root must be scalar, got " + shape_str(shape()));

    // topological order (parents before children) via iterative DFS
    std::vector<TensorNode<T>*> topo;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [nd, next] = stack.back();
        if (next < nd->parents.size()) {
            TensorNode<T>* p = nd->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            topo.push_back(nd);
            stack.pop_back();
        }
    }

    // interior gradients are scratch space: reset them every pass so repeated
    // backward calls accumulate only in the leaves
    for (TensorNode<T>* nd : topo) {
        if (nd->backward_fn) nd->grad.assign(nd->data.size(), T(0));
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);

    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ecctlin
