// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decoder networks: connectivity-derived attention masks, standard and
// low-rank (sequence-compressing) attention, pre-layer-norm blocks, and the
// (n+m) -> n output head.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecctlin/codes.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/rng.hpp"
#include "ecctlin/tensor.hpp"

namespace ecctlin {

enum class AttentionKind { standard, linear };

inline std::string attention_kind_name(AttentionKind k) {
    return k == AttentionKind::standard ? "standard" : "linear";
}
inline AttentionKind attention_kind_from_name(const std::string& s) {
    if (s == "standard") return AttentionKind::standard;
    if (s == "linear") return AttentionKind::linear;
    throw ParameterError("unknown attention kind '" + s + "'");
}

// Binary attention mask over the n+m node positions (bits first, then
// checks). `full` is N x N; `low_rank` is the N x K column-pooled form.
struct AttentionMask {
    int seq_len = 0;
    int division = 1;
    int low_rank_cols = 0;
    std::vector<std::uint8_t> full;
    std::vector<std::uint8_t> low_rank;

    std::uint8_t at(int i, int j) const { return full[static_cast<std::size_t>(i) * seq_len + j]; }
    std::uint8_t low_at(int i, int j) const { return low_rank[static_cast<std::size_t>(i) * low_rank_cols + j]; }
    double density() const;
};

// Positions may attend to themselves, across bit-check Tanner edges, between
// bits sharing a check, and between checks sharing a variable.
AttentionMask build_mask(const ParityCheckMatrix& H);

// Pools full-mask columns in blocks of `division` (OR), giving K = ceil(N/d)
// columns; division 1 reproduces the full mask.
AttentionMask resize_mask(const AttentionMask& mask, int division);

struct ModelConfig {
    int n = 0;
    int m = 0;
    int hidden_dim = 32;
    int heads = 4;
    int blocks = 2;
    AttentionKind kind = AttentionKind::standard;
    int mask_division = 1;  // low-rank column pooling factor (linear attention)
    int ffn_expansion = 4;
    std::uint64_t seed = 0;

    int seq_len() const { return n + m; }
    int head_dim() const { return hidden_dim / heads; }
    int proj_cols() const { return (seq_len() + mask_division - 1) / mask_division; }
    void validate() const;
};

// ---- attention primitives ----------------------------------------------------

// scores = Q K^T / sqrt(head dim), additively masked, softmax over keys.
// Q, K, V: (B, H, N, Dh); mask: (N, N) zero/one tensor.
template <typename T>
Tensor<T> attention(const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V, const Tensor<T>& mask) {
    if (Q.rank() != 4 || K.shape() != Q.shape() || V.shape() != Q.shape())
        throw ShapeError("attention: Q " + shape_str(Q.shape()) + ", K " + shape_str(K.shape()) + ", V " +
                         shape_str(V.shape()) + " must agree with rank 4");
    const int dh = Q.dim(3);
    Tensor<T> scores = scale(matmul(Q, transpose(K)), 1.0 / std::sqrt(static_cast<double>(dh)));
    scores = masked_fill(scores, mask);
    return matmul(softmax(scores, -1), V);
}

// Sequence axis of K and V is compressed N -> Kc through learned projections
// before the usual scaled-dot-product; scores shape (B, H, N, Kc).
template <typename T>
Tensor<T> linear_attention(const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V, const Tensor<T>& p_k,
                           const Tensor<T>& p_v, const Tensor<T>& low_rank_mask) {
    if (Q.rank() != 4 || K.shape() != Q.shape() || V.shape() != Q.shape())
        throw ShapeError("linear_attention: Q " + shape_str(Q.shape()) + ", K " + shape_str(K.shape()) +
                         ", V " + shape_str(V.shape()) + " must agree with rank 4");
    const int n_seq = Q.dim(2);
    if (p_k.rank() != 2 || p_k.dim(0) != n_seq || p_v.shape() != p_k.shape())
        throw ShapeError("linear_attention: projections " + shape_str(p_k.shape()) + " / " +
                         shape_str(p_v.shape()) + " must be (" + std::to_string(n_seq) + ",K)");
    const int dh = Q.dim(3);
    Tensor<T> k_c = matmul(transpose(p_k), K);  // (B, H, Kc, Dh)
    Tensor<T> v_c = matmul(transpose(p_v), V);
    Tensor<T> scores = scale(matmul(Q, transpose(k_c)), 1.0 / std::sqrt(static_cast<double>(dh)));
    scores = masked_fill(scores, low_rank_mask);
    return matmul(softmax(scores, -1), v_c);
}

// Each position's scalar is multiplied into its own learned direction, so the
// embedding also encodes position identity. x: (B, N); weight: (N, D).
template <typename T>
Tensor<T> embed(const Tensor<T>& x, const Tensor<T>& weight) {
    if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0))
        throw ShapeError("embed: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    return mul(reshape(x, {x.dim(0), x.dim(1), 1}), weight);
}

// Bit decisions from logits: 1 iff strictly positive.
template <typename T>
std::vector<std::uint8_t> threshold(const Tensor<T>& logits) {
    std::vector<std::uint8_t> bits(logits.numel());
    const auto& d = logits.data();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = d[i] > T(0) ? 1 : 0;
    return bits;
}

// ---- model ----------------------------------------------------------------------

template <typename T>
struct BlockParams {
    Tensor<T> ln1_gain, ln1_bias;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> p_k, p_v;  // linear attention only
    Tensor<T> ln2_gain, ln2_bias;
    Tensor<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Pre-layer-norm residual block: x + MHA(LN(x)), then + FFN(LN(.)).
template <typename T>
Tensor<T> transformer_block(const Tensor<T>& x, const BlockParams<T>& p, const Tensor<T>& mask,
                            AttentionKind kind, int heads) {
    const int b = x.dim(0);
    const int n_seq = x.dim(1);
    const int d = x.dim(2);
    if (d % heads != 0) throw ShapeError("transformer_block: hidden dim not divisible by head count");
    const int dh = d / heads;

    auto split_heads = [&](const Tensor<T>& t) {
        return permute(reshape(t, {b, n_seq, heads, dh}), {0, 2, 1, 3});
    };
    Tensor<T> h = layer_norm(x, p.ln1_gain, p.ln1_bias);
    Tensor<T> q = split_heads(add(matmul(h, p.wq), p.bq));
    Tensor<T> k = split_heads(add(matmul(h, p.wk), p.bk));
    Tensor<T> v = split_heads(add(matmul(h, p.wv), p.bv));
    Tensor<T> att = kind == AttentionKind::standard ? attention(q, k, v, mask)
                                                    : linear_attention(q, k, v, p.p_k, p.p_v, mask);
    Tensor<T> merged = reshape(permute(att, {0, 2, 1, 3}), {b, n_seq, d});
    Tensor<T> y = add(x, add(matmul(merged, p.wo), p.bo));

    Tensor<T> f = layer_norm(y, p.ln2_gain, p.ln2_bias);
    f = add(matmul(gelu(add(matmul(f, p.ffn_w1), p.ffn_b1)), p.ffn_w2), p.ffn_b2);
    return add(y, f);
}

template <typename T>
class Model {
  public:
    Model(const ModelConfig& cfg, const ParityCheckMatrix& H) : cfg_(cfg) {
        cfg_.validate();
        if (H.rows() != cfg_.m || H.cols() != cfg_.n)
            throw ShapeError("model: parity-check matrix " + std::to_string(H.rows()) + "x" +
                             std::to_string(H.cols()) + " does not match config (" + std::to_string(cfg_.m) +
                             "," + std::to_string(cfg_.n) + ")");
        mask_ = resize_mask(build_mask(H), cfg_.mask_division);
        const int n_seq = cfg_.seq_len();
        {
            std::vector<T> full(mask_.full.begin(), mask_.full.end());
            mask_full_ = Tensor<T>::from_data({n_seq, n_seq}, std::move(full));
            std::vector<T> low(mask_.low_rank.begin(), mask_.low_rank.end());
            mask_low_ = Tensor<T>::from_data({n_seq, mask_.low_rank_cols}, std::move(low));
        }
        init_params();
    }

    const ModelConfig& config() const { return cfg_; }
    const AttentionMask& mask() const { return mask_; }
    std::vector<std::pair<std::string, Tensor<T>>>& parameters() { return params_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& parameters() const { return params_; }

    Tensor<T> param(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ParameterError("model: no parameter named '" + name + "'");
        return params_[it->second].second;
    }

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (const auto& [name, t] : params_) total += t.numel();
        return total;
    }

    void zero_grads() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    // (B, n+m) decoder inputs -> (B, n) bit-1 confidence logits.
    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.rank() != 2 || x.dim(1) != cfg_.seq_len())
            throw ShapeError("model forward: input " + shape_str(x.shape()) + " must be (B," +
                             std::to_string(cfg_.seq_len()) + ")");
        Tensor<T> h = embed(x, param("embed.weight"));
        const Tensor<T>& attn_mask = cfg_.kind == AttentionKind::standard ? mask_full_ : mask_low_;
        for (int i = 0; i < cfg_.blocks; ++i)
            h = transformer_block(h, blocks_[static_cast<std::size_t>(i)], attn_mask, cfg_.kind, cfg_.heads);
        h = layer_norm(h, param("final_norm.gain"), param("final_norm.bias"));
        // per-position D -> 1 projection, then dense (n+m) -> n
        Tensor<T> z = add(reduce_sum(mul(h, param("head.pos.weight")), -1), param("head.pos.bias"));
        return add(matmul(z, param("head.fc.weight")), param("head.fc.bias"));
    }

    // Matmul multiply-add work of one forward pass at batch size B.
    std::uint64_t forward_matmul_flops(int batch) const {
        const std::uint64_t b = static_cast<std::uint64_t>(batch);
        const std::uint64_t n_seq = static_cast<std::uint64_t>(cfg_.seq_len());
        const std::uint64_t d = static_cast<std::uint64_t>(cfg_.hidden_dim);
        const std::uint64_t e = static_cast<std::uint64_t>(cfg_.ffn_expansion);
        const std::uint64_t kc = static_cast<std::uint64_t>(cfg_.proj_cols());
        const std::uint64_t proj = 8 * b * n_seq * d * d;          // Q,K,V,O projections
        const std::uint64_t ffn = 4 * e * b * n_seq * d * d;       // two dense maps
        const std::uint64_t core = cfg_.kind == AttentionKind::standard
                                       ? 4 * b * n_seq * n_seq * d  // scores + weighted sum
                                       : 8 * b * n_seq * kc * d;    // compress K,V + scores + weighted sum
        const std::uint64_t head = 2 * b * n_seq * static_cast<std::uint64_t>(cfg_.n);
        return static_cast<std::uint64_t>(cfg_.blocks) * (proj + ffn + core) + head;
    }

  private:
    void add_param(const std::string& name, Shape shape, Rng& rng, double fan_in, double constant = 0.0,
                   bool random = true) {
        Tensor<T> t = Tensor<T>::zeros(shape, true);
        if (random) {
            const double bound = 1.0 / std::sqrt(fan_in);
            for (T& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
        } else if (constant != 0.0) {
            for (T& v : t.data()) v = static_cast<T>(constant);
        }
        index_[name] = params_.size();
        params_.emplace_back(name, std::move(t));
    }

    void init_params() {
        Rng rng(cfg_.seed);
        const int n_seq = cfg_.seq_len();
        const int d = cfg_.hidden_dim;
        const int f = cfg_.ffn_expansion * d;
        add_param("embed.weight", {n_seq, d}, rng, 1.0);
        for (int i = 0; i < cfg_.blocks; ++i) {
            const std::string pre = "block" + std::to_string(i) + ".";
            add_param(pre + "ln1.gain", {d}, rng, 0, 1.0, false);
            add_param(pre + "ln1.bias", {d}, rng, 0, 0.0, false);
            add_param(pre + "attn.wq", {d, d}, rng, d);
            add_param(pre + "attn.bq", {d}, rng, 0, 0.0, false);
            add_param(pre + "attn.wk", {d, d}, rng, d);
            add_param(pre + "attn.bk", {d}, rng, 0, 0.0, false);
            add_param(pre + "attn.wv", {d, d}, rng, d);
            add_param(pre + "attn.bv", {d}, rng, 0, 0.0, false);
            add_param(pre + "attn.wo", {d, d}, rng, d);
            add_param(pre + "attn.bo", {d}, rng, 0, 0.0, false);
            if (cfg_.kind == AttentionKind::linear) {
                add_param(pre + "attn.pk", {n_seq, mask_.low_rank_cols}, rng, n_seq);
                add_param(pre + "attn.pv", {n_seq, mask_.low_rank_cols}, rng, n_seq);
            }
            add_param(pre + "ln2.gain", {d}, rng, 0, 1.0, false);
            add_param(pre + "ln2.bias", {d}, rng, 0, 0.0, false);
            add_param(pre + "ffn.w1", {d, f}, rng, d);
            add_param(pre + "ffn.b1", {f}, rng, 0, 0.0, false);
            add_param(pre + "ffn.w2", {f, d}, rng, f);
            add_param(pre + "ffn.b2", {d}, rng, 0, 0.0, false);
        }
        add_param("final_norm.gain", {d}, rng, 0, 1.0, false);
        add_param("final_norm.bias", {d}, rng, 0, 0.0, false);
        add_param("head.pos.weight", {n_seq, d}, rng, d);
        add_param("head.pos.bias", {n_seq}, rng, 0, 0.0, false);
        add_param("head.fc.weight", {n_seq, cfg_.n}, rng, n_seq);
        add_param("head.fc.bias", {cfg_.n}, rng, 0, 0.0, false);
        bind_blocks();
    }

    void bind_blocks() {
        blocks_.clear();
        for (int i = 0; i < cfg_.blocks; ++i) {
            const std::string pre = "block" + std::to_string(i) + ".";
            BlockParams<T> bp;
            bp.ln1_gain = param(pre + "ln1.gain");
            bp.ln1_bias = param(pre + "ln1.bias");
            bp.wq = param(pre + "attn.wq");
            bp.bq = param(pre + "attn.bq");
            bp.wk = param(pre + "attn.wk");
            bp.bk = param(pre + "attn.bk");
            bp.wv = param(pre + "attn.wv");
            bp.bv = param(pre + "attn.bv");
            bp.wo = param(pre + "attn.wo");
            bp.bo = param(pre + "attn.bo");
            if (cfg_.kind == AttentionKind::linear) {
                bp.p_k = param(pre + "attn.pk");
                bp.p_v = param(pre + "attn.pv");
            }
            bp.ln2_gain = param(pre + "ln2.gain");
            bp.ln2_bias = param(pre + "ln2.bias");
            bp.ffn_w1 = param(pre + "ffn.w1");
            bp.ffn_b1 = param(pre + "ffn.b1");
            bp.ffn_w2 = param(pre + "ffn.w2");
            bp.ffn_b2 = param(pre + "ffn.b2");
            blocks_.push_back(std::move(bp));
        }
    }

    ModelConfig cfg_;
    AttentionMask mask_;
    Tensor<T> mask_full_, mask_low_;
    std::vector<std::pair<std::string, Tensor<T>>> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<BlockParams<T>> blocks_;
};

template <typename T>
Tensor<T> decode_forward(const Model<T>& model, const Tensor<T>& x) {
    return model.forward(x);
}

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace ecctlin
