// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/gradcheck.hpp"

#include <cmath>

#include "ecctlin/codes.hpp"
#include "ecctlin/rng.hpp"
#include "ecctlin/transformer.hpp"

namespace ecctlin {

double max_grad_rel_error(std::vector<Tensor<double>> leaves, const std::function<Tensor<double>()>& fn,
                          double eps) {
    for (auto& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    Tensor<double> loss = fn();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) analytic.push_back(leaf.grad());

    double worst = 0.0;
    NoGradGuard eval_only;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& data = leaves[li].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + eps;
            const double fp = fn().item();
            data[i] = orig - eps;
            const double fm = fn().item();
            data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[li][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(lo, hi);
    return Tensor<double>::from_data(std::move(shape), std::move(data), true);
}

Tensor<double> random_const(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t = random_tensor(std::move(shape), rng, lo, hi);
    t.set_requires_grad(false);
    return t;
}

// Weighted scalar readout; plain sums can hide gradient errors (e.g. softmax
// outputs always sum to one).
Tensor<double> wsum(const Tensor<double>& t, const Tensor<double>& w) { return reduce_sum(mul(t, w)); }

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance) {
    Rng rng(seed);
    std::vector<GradCheckResult> results;
    auto record = [&](const std::string& name, double err) {
        results.push_back({name, err, err < tolerance});
    };

    {
        Tensor<double> a = random_tensor({3, 4}, rng);
        Tensor<double> b = random_tensor({4}, rng);
        Tensor<double> w = random_const({3, 4}, rng);
        record("add", max_grad_rel_error({a, b}, [&] { return wsum(add(a, b), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 3, 2}, rng);
        Tensor<double> b = random_tensor({3, 1}, rng);
        Tensor<double> w = random_const({2, 3, 2}, rng);
        record("sub", max_grad_rel_error({a, b}, [&] { return wsum(sub(a, b), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 5}, rng);
        Tensor<double> b = random_tensor({3, 2, 5}, rng);
        Tensor<double> w = random_const({3, 2, 5}, rng);
        record("mul", max_grad_rel_error({a, b}, [&] { return wsum(mul(a, b), w); }));
    }
    {
        Tensor<double> a = random_tensor({3, 5}, rng);
        Tensor<double> b = random_tensor({5, 2}, rng);
        Tensor<double> w = random_const({3, 2}, rng);
        record("matmul", max_grad_rel_error({a, b}, [&] { return wsum(matmul(a, b), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 2, 3, 4}, rng);
        Tensor<double> b = random_tensor({4, 5}, rng);
        Tensor<double> w = random_const({2, 2, 3, 5}, rng);
        record("matmul_batched", max_grad_rel_error({a, b}, [&] { return wsum(matmul(a, b), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 3, 4}, rng);
        Tensor<double> w = random_const({4, 3, 2}, rng);
        record("permute", max_grad_rel_error({a}, [&] { return wsum(permute(a, {2, 1, 0}), w); }));
    }
    {
        Tensor<double> a = random_tensor({3, 4}, rng);
        Tensor<double> w = random_const({4, 3}, rng);
        record("transpose", max_grad_rel_error({a}, [&] { return wsum(transpose(a), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 6}, rng);
        Tensor<double> w = random_const({3, 4}, rng);
        record("reshape", max_grad_rel_error({a}, [&] { return wsum(reshape(a, {3, 4}), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 3}, rng);
        Tensor<double> b = random_tensor({2, 2}, rng);
        Tensor<double> w = random_const({2, 5}, rng);
        record("concat", max_grad_rel_error({a, b}, [&] { return wsum(concat<double>({a, b}, 1), w); }));
    }
    {
        Tensor<double> a = random_tensor({4, 5}, rng);
        Tensor<double> w = random_const({4, 2}, rng);
        record("slice", max_grad_rel_error({a}, [&] { return wsum(slice(a, 1, 2, 2), w); }));
    }
    {
        Tensor<double> a = random_tensor({3, 4, 2}, rng);
        Tensor<double> w = random_const({3, 2}, rng);
        record("reduce_sum", max_grad_rel_error({a}, [&] { return wsum(reduce_sum(a, 1), w); }));
    }
    {
        Tensor<double> a = random_tensor({3, 4}, rng);
        Tensor<double> w = random_const({3, 1}, rng);
        record("reduce_mean", max_grad_rel_error({a}, [&] { return wsum(reduce_mean(a, 1, true), w); }));
    }
    {
        Tensor<double> a = random_tensor({2, 7}, rng);
        record("scale", max_grad_rel_error({a}, [&] { return scale(reduce_sum(mul(a, a)), -0.37); }));
    }
    {
        Tensor<double> a = random_tensor({2, 3, 5}, rng, -2.0, 2.0);
        Tensor<double> w = random_const({2, 3, 5}, rng);
        record("softmax", max_grad_rel_error({a}, [&] { return wsum(softmax(a, -1), w); }));
        record("softmax_axis0", max_grad_rel_error({a}, [&] { return wsum(softmax(a, 0), w); }));
    }
    {
        // keep inputs away from the kink at 0 where the derivative jumps
        Tensor<double> a = random_tensor({4, 5}, rng, 0.1, 1.5);
        for (std::size_t i = 0; i < a.data().size(); i += 2) a.data()[i] = -a.data()[i];
        Tensor<double> w = random_const({4, 5}, rng);
        record("relu", max_grad_rel_error({a}, [&] { return wsum(relu(a), w); }));
    }
    {
        Tensor<double> a = random_tensor({4, 5}, rng, -3.0, 3.0);
        Tensor<double> w = random_const({4, 5}, rng);
        record("gelu", max_grad_rel_error({a}, [&] { return wsum(gelu(a), w); }));
    }
    {
        Tensor<double> a = random_tensor({4, 5}, rng, -4.0, 4.0);
        Tensor<double> w = random_const({4, 5}, rng);
        record("sigmoid", max_grad_rel_error({a}, [&] { return wsum(sigmoid(a), w); }));
    }
    {
        Tensor<double> x = random_tensor({2, 4, 6}, rng);
        Tensor<double> g = random_tensor({6}, rng, 0.5, 1.5);
        Tensor<double> b = random_tensor({6}, rng);
        Tensor<double> w = random_const({2, 4, 6}, rng);
        record("layer_norm", max_grad_rel_error({x, g, b}, [&] { return wsum(layer_norm(x, g, b), w); }));
    }
    {
        Tensor<double> s = random_tensor({2, 4, 4}, rng);
        std::vector<double> mbits(16);
        for (double& v : mbits) v = rng.uniform() < 0.6 ? 1.0 : 0.0;
        for (int i = 0; i < 4; ++i) mbits[static_cast<std::size_t>(i) * 4 + i] = 1.0;
        Tensor<double> mask = Tensor<double>::from_data({4, 4}, std::move(mbits));
        Tensor<double> w = random_const({2, 4, 4}, rng);
        record("masked_fill", max_grad_rel_error({s}, [&] {
                   return wsum(softmax(masked_fill(s, mask), -1), w);
               }));
    }
    {
        Tensor<double> logits = random_tensor({4, 7}, rng, -3.0, 3.0);
        std::vector<double> t(28);
        for (double& v : t) v = rng.bit();
        Tensor<double> targets = Tensor<double>::from_data({4, 7}, std::move(t));
        record("bce_with_logits",
               max_grad_rel_error({logits}, [&] { return bce_with_logits(logits, targets); }));
    }
    {
        const int b = 2, h = 2, n = 6, dh = 3;
        Tensor<double> q = random_tensor({b, h, n, dh}, rng);
        Tensor<double> k = random_tensor({b, h, n, dh}, rng);
        Tensor<double> v = random_tensor({b, h, n, dh}, rng);
        std::vector<double> mbits(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i == j || rng.uniform() < 0.5) mbits[static_cast<std::size_t>(i) * n + j] = 1.0;
        Tensor<double> mask = Tensor<double>::from_data({n, n}, std::move(mbits));
        Tensor<double> w = random_const({b, h, n, dh}, rng);
        record("attention", max_grad_rel_error({q, k, v}, [&] { return wsum(attention(q, k, v, mask), w); }));
    }
    {
        const int b = 2, h = 2, n = 6, dh = 3, kc = 3;
        Tensor<double> q = random_tensor({b, h, n, dh}, rng);
        Tensor<double> k = random_tensor({b, h, n, dh}, rng);
        Tensor<double> v = random_tensor({b, h, n, dh}, rng);
        Tensor<double> pk = random_tensor({n, kc}, rng);
        Tensor<double> pv = random_tensor({n, kc}, rng);
        Tensor<double> mask = Tensor<double>::filled({n, kc}, 1.0);
        Tensor<double> w = random_const({b, h, n, dh}, rng);
        record("linear_attention", max_grad_rel_error({q, k, v, pk, pv}, [&] {
                   return wsum(linear_attention(q, k, v, pk, pv, mask), w);
               }));
    }

    // full 1-block models on the (7,4) Hamming code, loss gradient w.r.t.
    // every parameter
    for (AttentionKind kind : {AttentionKind::standard, AttentionKind::linear}) {
        ParityCheckMatrix H = hamming74();
        ModelConfig cfg;
        cfg.n = 7;
        cfg.m = 3;
        cfg.hidden_dim = 8;
        cfg.heads = 2;
        cfg.blocks = 1;
        cfg.kind = kind;
        cfg.mask_division = kind == AttentionKind::linear ? 2 : 1;
        cfg.seed = rng.next_u64();
        Model<double> model(cfg, H);

        const int batch = 2;
        Tensor<double> x = random_const({batch, cfg.seq_len()}, rng, -4.0, 4.0);
        std::vector<double> t(static_cast<std::size_t>(batch) * cfg.n);
        for (double& v : t) v = rng.bit();
        Tensor<double> targets = Tensor<double>::from_data({batch, cfg.n}, std::move(t));

        std::vector<Tensor<double>> leaves;
        for (auto& [name, p] : model.parameters()) leaves.push_back(p);
        const double err = max_grad_rel_error(
            leaves, [&] { return bce_with_logits(model.forward(x), targets); });
        record(kind == AttentionKind::standard ? "model_standard" : "model_linear", err);
    }
    return results;
}

}  // namespace ecctlin
