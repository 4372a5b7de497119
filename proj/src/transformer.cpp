// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/transformer.hpp"

#include <algorithm>

namespace ecctlin {

double AttentionMask::density() const {
    if (full.empty()) return 0.0;
    std::size_t ones = 0;
    for (std::uint8_t v : full) ones += v;
    return static_cast<double>(ones) / static_cast<double>(full.size());
}

AttentionMask build_mask(const ParityCheckMatrix& H) {
    const int n = H.cols();
    const int m = H.rows();
    const int N = n + m;
    AttentionMask mask;
    mask.seq_len = N;
    mask.division = 1;
    mask.low_rank_cols = N;
    mask.full.assign(static_cast<std::size_t>(N) * N, 0);
    auto set = [&](int i, int j) {
        mask.full[static_cast<std::size_t>(i) * N + j] = 1;
        mask.full[static_cast<std::size_t>(j) * N + i] = 1;
    };
    for (int i = 0; i < N; ++i) mask.full[static_cast<std::size_t>(i) * N + i] = 1;
    for (int r = 0; r < m; ++r) {
        const auto& vars = H.check_neighbors(r);
        // bit-check Tanner edges, and bit pairs sharing this check
        for (std::size_t a = 0; a < vars.size(); ++a) {
            set(vars[a], n + r);
            for (std::size_t b = a + 1; b < vars.size(); ++b) set(vars[a], vars[b]);
        }
    }
    // check pairs sharing a variable
    for (int v = 0; v < n; ++v) {
        const auto& checks = H.var_neighbors(v);
        for (std::size_t a = 0; a < checks.size(); ++a)
            for (std::size_t b = a + 1; b < checks.size(); ++b) set(n + checks[a], n + checks[b]);
    }
    mask.low_rank = mask.full;
    return mask;
}

AttentionMask resize_mask(const AttentionMask& mask, int division) {
    if (division < 1) throw ParameterError("resize_mask: division must be >= 1");
    const int N = mask.seq_len;
    AttentionMask out = mask;
    out.division = division;
    out.low_rank_cols = (N + division - 1) / division;
    out.low_rank.assign(static_cast<std::size_t>(N) * out.low_rank_cols, 0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < out.low_rank_cols; ++j) {
            const int lo = j * division;
            const int hi = std::min(lo + division, N);
            std::uint8_t any = 0;
            for (int c = lo; c < hi; ++c) any |= mask.full[static_cast<std::size_t>(i) * N + c];
            out.low_rank[static_cast<std::size_t>(i) * out.low_rank_cols + j] = any;
        }
    return out;
}

void ModelConfig::validate() const {
    if (n <= 0 || m <= 0) throw ParameterError("model config: n and m must be positive");
    if (hidden_dim <= 0 || heads <= 0 || blocks <= 0 || ffn_expansion <= 0)
        throw ParameterError("model config: dimensions must be positive");
    if (hidden_dim % heads != 0) throw ParameterError("model config: hidden dim not divisible by head count");
    if (mask_division < 1) throw ParameterError("model config: mask division must be >= 1");
    if (proj_cols() > seq_len()) throw ParameterError("model config: projection wider than sequence");
}

}  // namespace ecctlin
