// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ecctlin/codes.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/gradcheck.hpp"
#include "ecctlin/rng.hpp"
#include "ecctlin/tensor.hpp"
#include "ecctlin/transformer.hpp"

using namespace ecctlin;
using TensorD = Tensor<double>;

namespace {

TensorD rand_tensor(const Shape& shape, Rng& rng, bool grad = false) {
    std::size_t total = 1;
    for (int d : shape) total *= static_cast<std::size_t>(d);
    std::vector<double> data(total);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    TensorD t = TensorD::from_data(shape, std::move(data));
    if (grad) t.set_requires_grad(true);
    return t;
}

// Connectivity predicate spelled out the slow way: self, bit-check edge,
// bits sharing a check, checks sharing a variable.
bool oracle_connected(const ParityCheckMatrix& H, int i, int j) {
    const int n = H.cols();
    const int m = H.rows();
    if (i == j) return true;
    auto h = [&](int r, int c) { return H.at(r, c) != 0; };
    if (i < n && j < n) {
        for (int r = 0; r < m; ++r)
            if (h(r, i) && h(r, j)) return true;
        return false;
    }
    if (i >= n && j >= n) {
        for (int v = 0; v < n; ++v)
            if (h(i - n, v) && h(j - n, v)) return true;
        return false;
    }
    const int bit = i < n ? i : j;
    const int check = (i < n ? j : i) - n;
    return h(check, bit);
}

}  // namespace

TEST_CASE("mask of a single parity check connects exactly its participants") {
    ParityCheckMatrix H(1, 3, {1, 1, 0});
    AttentionMask mask = build_mask(H);
    CHECK(mask.seq_len == 4);
    CHECK(mask.low_rank_cols == 4);
    // bits 0,1 and the check form a clique; bit 2 only sees itself
    const std::vector<std::uint8_t> want = {
        1, 1, 0, 1,  //
        1, 1, 0, 1,  //
        0, 0, 1, 0,  //
        1, 1, 0, 1,
    };
    CHECK(mask.full == want);
    CHECK(mask.density() == doctest::Approx(10.0 / 16.0));
}

TEST_CASE("mask matches brute-force connectivity oracle on Hamming(7,4)") {
    ParityCheckMatrix H = hamming74();
    AttentionMask mask = build_mask(H);
    const int N = H.cols() + H.rows();
    REQUIRE(mask.seq_len == N);
    int ones = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const bool want = oracle_connected(H, i, j);
            CHECK(mask.at(i, j) == (want ? 1 : 0));
            ones += want ? 1 : 0;
        }
    CHECK(mask.density() == doctest::Approx(static_cast<double>(ones) / (N * N)));
    // symmetry
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < i; ++j) CHECK(mask.at(i, j) == mask.at(j, i));
}

TEST_CASE("resize_mask pools columns by OR") {
    ParityCheckMatrix H = build_regular_ldpc(10, 2, 5, 3);
    AttentionMask base = build_mask(H);
    const int N = base.seq_len;

    SUBCASE("division 1 reproduces the full mask") {
        AttentionMask same = resize_mask(base, 1);
        CHECK(same.low_rank_cols == N);
        CHECK(same.low_rank == base.full);
    }
    SUBCASE("division equal to the length collapses to one all-ones column") {
        AttentionMask one = resize_mask(base, N);
        CHECK(one.low_rank_cols == 1);
        for (int i = 0; i < N; ++i) CHECK(one.low_at(i, 0) == 1);  // diagonal guarantees a hit
    }
    SUBCASE("division 2 ORs column pairs") {
        AttentionMask half = resize_mask(base, 2);
        REQUIRE(half.low_rank_cols == (N + 1) / 2);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < half.low_rank_cols; ++j) {
                std::uint8_t want = base.at(i, 2 * j);
                if (2 * j + 1 < N) want |= base.at(i, 2 * j + 1);
                CHECK(half.low_at(i, j) == want);
            }
    }
    SUBCASE("division below one is rejected") {
        CHECK_THROWS_AS(resize_mask(base, 0), ParameterError);
        CHECK_THROWS_AS(resize_mask(base, -2), ParameterError);
    }
}

TEST_CASE("attention with an identity mask returns V rows unchanged") {
    Rng rng(11);
    const int B = 2, Hh = 2, N = 5, Dh = 3;
    TensorD Q = rand_tensor({B, Hh, N, Dh}, rng);
    TensorD K = rand_tensor({B, Hh, N, Dh}, rng);
    TensorD V = rand_tensor({B, Hh, N, Dh}, rng);
    std::vector<double> eye(N * N, 0.0);
    for (int i = 0; i < N; ++i) eye[i * N + i] = 1.0;
    TensorD mask = TensorD::from_data({N, N}, std::move(eye));
    TensorD out = attention(Q, K, V, mask);
    REQUIRE(out.shape() == Shape{B, Hh, N, Dh});
    for (std::size_t i = 0; i < out.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(V.data()[i]).epsilon(1e-12));
}

TEST_CASE("attention with zero queries and a full mask averages V rows") {
    Rng rng(12);
    const int B = 1, Hh = 1, N = 6, Dh = 4;
    TensorD Q = TensorD::zeros({B, Hh, N, Dh});
    TensorD K = rand_tensor({B, Hh, N, Dh}, rng);
    TensorD V = rand_tensor({B, Hh, N, Dh}, rng);
    TensorD mask = TensorD::filled({N, N}, 1.0);
    TensorD out = attention(Q, K, V, mask);
    for (int i = 0; i < N; ++i)
        for (int d = 0; d < Dh; ++d) {
            double mean = 0.0;
            for (int j = 0; j < N; ++j) mean += V.data()[static_cast<std::size_t>(j) * Dh + d];
            mean /= N;
            CHECK(out.data()[static_cast<std::size_t>(i) * Dh + d] == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("masked positions receive vanishing softmax weight") {
    Rng rng(13);
    const int N = 7, Dh = 4;
    TensorD Q = rand_tensor({1, 1, N, Dh}, rng);
    TensorD K = rand_tensor({1, 1, N, Dh}, rng);
    ParityCheckMatrix H(3, 4, {1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1});
    AttentionMask am = build_mask(H);
    REQUIRE(am.seq_len == N);
    std::vector<double> mvals(am.full.begin(), am.full.end());
    TensorD mask = TensorD::from_data({N, N}, std::move(mvals));
    // replicate the attention interior to inspect the weights themselves
    TensorD scores = scale(matmul(Q, transpose(K)), 1.0 / std::sqrt(static_cast<double>(Dh)));
    TensorD weights = softmax(masked_fill(scores, mask), -1);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double w = weights.data()[static_cast<std::size_t>(i) * N + j];
            if (am.at(i, j))
                CHECK(w > 1e-12);
            else
                CHECK(w < 1e-30);
        }
}

TEST_CASE("compressed attention with identity projections matches standard attention") {
    Rng rng(14);
    const int B = 2, Hh = 2, N = 10, Dh = 4;
    ParityCheckMatrix H = hamming74();
    AttentionMask am = build_mask(H);
    REQUIRE(am.seq_len == N);
    std::vector<double> mvals(am.full.begin(), am.full.end());
    TensorD mask = TensorD::from_data({N, N}, std::move(mvals));
    std::vector<double> eye(N * N, 0.0);
    for (int i = 0; i < N; ++i) eye[i * N + i] = 1.0;
    TensorD identity = TensorD::from_data({N, N}, std::move(eye));

    for (int trial = 0; trial < 100; ++trial) {
        TensorD Q = rand_tensor({B, Hh, N, Dh}, rng);
        TensorD K = rand_tensor({B, Hh, N, Dh}, rng);
        TensorD V = rand_tensor({B, Hh, N, Dh}, rng);
        TensorD std_out = attention(Q, K, V, mask);
        TensorD lin_out = linear_attention(Q, K, V, identity, identity, mask);
        REQUIRE(lin_out.shape() == std_out.shape());
        for (std::size_t i = 0; i < std_out.data().size(); ++i)
            CHECK(lin_out.data()[i] == doctest::Approx(std_out.data()[i]).epsilon(1e-6));
    }
}

TEST_CASE("attention cost grows quadratically, compressed attention linearly") {
    Rng rng(15);
    const int Dh = 8, Kc = 32;
    auto standard_flops = [&](int N) {
        TensorD Q = rand_tensor({1, 1, N, Dh}, rng);
        TensorD K = rand_tensor({1, 1, N, Dh}, rng);
        TensorD V = rand_tensor({1, 1, N, Dh}, rng);
        TensorD mask = TensorD::filled({N, N}, 1.0);
        reset_flop_count();
        attention(Q, K, V, mask);
        return flop_count();
    };
    auto linear_flops = [&](int N) {
        TensorD Q = rand_tensor({1, 1, N, Dh}, rng);
        TensorD K = rand_tensor({1, 1, N, Dh}, rng);
        TensorD V = rand_tensor({1, 1, N, Dh}, rng);
        TensorD pk = rand_tensor({N, Kc}, rng);
        TensorD pv = rand_tensor({N, Kc}, rng);
        TensorD mask = TensorD::filled({N, Kc}, 1.0);
        reset_flop_count();
        linear_attention(Q, K, V, pk, pv, mask);
        return flop_count();
    };
    // doubling the sequence length exactly quadruples / doubles the matmul work
    CHECK(standard_flops(128) == 4 * standard_flops(64));
    CHECK(linear_flops(128) == 2 * linear_flops(64));
    CHECK(standard_flops(64) == 4ULL * 64 * 64 * Dh);
    CHECK(linear_flops(64) == 8ULL * 64 * Kc * Dh);
}

TEST_CASE("embedding scales each position's learned direction by its input") {
    TensorD w = TensorD::from_data({3, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    TensorD x = TensorD::from_data({1, 3}, {2.0, -1.0, 0.0});
    TensorD out = embed(x, w);
    REQUIRE(out.shape() == Shape{1, 3, 2});
    const std::vector<double> want = {2.0, 4.0, -3.0, -4.0, 0.0, 0.0};
    for (int i = 0; i < 6; ++i) CHECK(out.data()[i] == want[i]);

    // linear in the input scalars
    TensorD doubled = embed(scale(x, 2.0), w);
    for (int i = 0; i < 6; ++i) CHECK(doubled.data()[i] == doctest::Approx(2.0 * want[i]));

    CHECK_THROWS_AS(embed(TensorD::zeros({1, 4}), w), ShapeError);
    CHECK_THROWS_AS(embed(TensorD::zeros({3}), w), ShapeError);
}

TEST_CASE("threshold marks strictly positive logits as one-bits") {
    TensorD logits = TensorD::from_data({1, 3}, {-1.0, 0.0, 2.0});
    CHECK(threshold(logits) == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("residual block with zeroed output projections is the identity") {
    Rng rng(16);
    const int B = 2, N = 6, D = 8, heads = 2;
    BlockParams<double> p;
    p.ln1_gain = TensorD::filled({D}, 1.0);
    p.ln1_bias = TensorD::zeros({D});
    p.wq = rand_tensor({D, D}, rng);
    p.bq = rand_tensor({D}, rng);
    p.wk = rand_tensor({D, D}, rng);
    p.bk = rand_tensor({D}, rng);
    p.wv = rand_tensor({D, D}, rng);
    p.bv = rand_tensor({D}, rng);
    p.wo = TensorD::zeros({D, D});
    p.bo = TensorD::zeros({D});
    p.ln2_gain = TensorD::filled({D}, 1.0);
    p.ln2_bias = TensorD::zeros({D});
    p.ffn_w1 = rand_tensor({D, 4 * D}, rng);
    p.ffn_b1 = rand_tensor({4 * D}, rng);
    p.ffn_w2 = TensorD::zeros({4 * D, D});
    p.ffn_b2 = TensorD::zeros({D});

    TensorD x = rand_tensor({B, N, D}, rng);
    TensorD mask = TensorD::filled({N, N}, 1.0);
    TensorD y = transformer_block(x, p, mask, AttentionKind::standard, heads);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("model configuration validation") {
    ModelConfig cfg;
    cfg.n = 7;
    cfg.m = 3;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.seq_len() == 10);
    CHECK(cfg.head_dim() == 8);

    ModelConfig bad = cfg;
    bad.hidden_dim = 30;  // not divisible by 4 heads
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.n = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.blocks = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.mask_division = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);

    ModelConfig lifted = cfg;
    lifted.mask_division = 2;
    CHECK(lifted.proj_cols() == 5);
    lifted.mask_division = 3;
    CHECK(lifted.proj_cols() == 4);
}

TEST_CASE("model forward maps (B, n+m) inputs to (B, n) logits deterministically") {
    ParityCheckMatrix H = hamming74();
    ModelConfig cfg;
    cfg.n = 7;
    cfg.m = 3;
    cfg.hidden_dim = 16;
    cfg.heads = 4;
    cfg.blocks = 2;
    cfg.seed = 5;
    Model<double> model(cfg, H);

    Rng rng(17);
    TensorD x = rand_tensor({3, 10}, rng);
    TensorD y1 = model.forward(x);
    TensorD y2 = model.forward(x);
    REQUIRE(y1.shape() == Shape{3, 7});
    CHECK(y1.data() == y2.data());

    // rows are processed independently: permuting the batch permutes outputs
    std::vector<double> swapped(x.data());
    for (int j = 0; j < 10; ++j) std::swap(swapped[0 * 10 + j], swapped[2 * 10 + j]);
    TensorD xs = TensorD::from_data({3, 10}, std::move(swapped));
    TensorD ys = model.forward(xs);
    for (int j = 0; j < 7; ++j) {
        CHECK(ys.data()[0 * 7 + j] == doctest::Approx(y1.data()[2 * 7 + j]).epsilon(1e-12));
        CHECK(ys.data()[2 * 7 + j] == doctest::Approx(y1.data()[0 * 7 + j]).epsilon(1e-12));
        CHECK(ys.data()[1 * 7 + j] == doctest::Approx(y1.data()[1 * 7 + j]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(model.forward(TensorD::zeros({2, 9})), ShapeError);
    ParityCheckMatrix wrong(2, 7, std::vector<std::uint8_t>(14, 1));
    CHECK_THROWS_AS(Model<double>(cfg, wrong), ShapeError);
}

TEST_CASE("same seed gives identical parameters, different seeds differ") {
    ParityCheckMatrix H = hamming74();
    ModelConfig cfg;
    cfg.n = 7;
    cfg.m = 3;
    cfg.hidden_dim = 16;
    cfg.seed = 42;
    Model<double> a(cfg, H);
    Model<double> b(cfg, H);
    REQUIRE(a.parameters().size() == b.parameters().size());
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].first == b.parameters()[i].first);
        CHECK(a.parameters()[i].second.data() == b.parameters()[i].second.data());
    }
    cfg.seed = 43;
    Model<double> c(cfg, H);
    CHECK(c.param("embed.weight").data() != a.param("embed.weight").data());
}

TEST_CASE("compressed-attention variant carries projection parameters, standard does not") {
    ParityCheckMatrix H = hamming74();
    ModelConfig cfg;
    cfg.n = 7;
    cfg.m = 3;
    cfg.hidden_dim = 16;
    cfg.blocks = 2;
    Model<double> std_model(cfg, H);
    cfg.kind = AttentionKind::linear;
    cfg.mask_division = 2;
    Model<double> lin_model(cfg, H);

    CHECK_THROWS_AS(std_model.param("block0.attn.pk"), ParameterError);
    CHECK_NOTHROW(lin_model.param("block0.attn.pk"));
    CHECK(lin_model.param("block0.attn.pk").shape() == Shape{10, 5});
    // the only extra parameters are the two projections per block
    CHECK(lin_model.parameter_count() == std_model.parameter_count() + 2ULL * cfg.blocks * 10 * 5);

    TensorD x = Tensor<double>::zeros({1, 10});
    CHECK(lin_model.forward(x).shape() == Shape{1, 7});
}

TEST_CASE("reported forward matmul work matches the instrumented counter") {
    ParityCheckMatrix H = hamming74();
    for (AttentionKind kind : {AttentionKind::standard, AttentionKind::linear}) {
        ModelConfig cfg;
        cfg.n = 7;
        cfg.m = 3;
        cfg.hidden_dim = 16;
        cfg.heads = 2;
        cfg.blocks = 2;
        cfg.kind = kind;
        cfg.mask_division = kind == AttentionKind::linear ? 2 : 1;
        Model<double> model(cfg, H);
        TensorD x = TensorD::zeros({4, 10});
        reset_flop_count();
        model.forward(x);
        CHECK(model.forward_matmul_flops(4) == flop_count());
    }
}

TEST_CASE("gradient check suite passes for every op and both model variants") {
    auto results = run_gradcheck_suite(20240901, 1e-4);
    CHECK(results.size() >= 10);
    bool any_model = false;
    for (const auto& r : results) {
        INFO(r.name, " max_rel_err=", r.max_rel_err);
        CHECK(r.ok);
        if (r.name.find("model") != std::string::npos) any_model = true;
    }
    CHECK(any_model);
}
