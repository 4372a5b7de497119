// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/bp.hpp"

#include <algorithm>
#include <cmath>

#include "ecctlin/errors.hpp"

namespace ecctlin {

namespace {

double clip(double x, double lim) { return std::clamp(x, -lim, lim); }

bool syndrome_is_zero(const ParityCheckMatrix& H, const std::vector<std::uint8_t>& word) {
    for (int r = 0; r < H.rows(); ++r) {
        int acc = 0;
        for (int v : H.check_neighbors(r)) acc ^= word[static_cast<std::size_t>(v)];
        if (acc) return false;
    }
    return true;
}

}  // namespace

BpWorkspace::BpWorkspace(const ParityCheckMatrix& H) : H_(&H) {
    const int m = H.rows();
    check_offset_.assign(static_cast<std::size_t>(m) + 1, 0);
    var_edges_.resize(static_cast<std::size_t>(H.cols()));
    for (int r = 0; r < m; ++r) {
        check_offset_[static_cast<std::size_t>(r) + 1] =
            check_offset_[static_cast<std::size_t>(r)] + static_cast<int>(H.check_neighbors(r).size());
        for (int v : H.check_neighbors(r)) {
            var_edges_[static_cast<std::size_t>(v)].push_back(static_cast<int>(edge_var_.size()));
            edge_var_.push_back(v);
        }
    }
    var_to_check_.assign(edge_var_.size(), 0.0);
    check_to_var_.assign(edge_var_.size(), 0.0);
    fwd_.assign(edge_var_.size(), 0.0);
    bwd_.assign(edge_var_.size(), 0.0);
}

BpResult bp_decode(BpWorkspace& ws, const LlrVector& llr, int iterations, const BpOptions& opts) {
    const ParityCheckMatrix& H = *ws.H_;
    const int n = H.cols();
    const int m = H.rows();
    if (static_cast<int>(llr.size()) != n)
        throw ShapeError("bp_decode: llr length " + std::to_string(llr.size()) + " != code length " +
                         std::to_string(n));
    if (iterations < 0) throw ParameterError("bp_decode: iterations must be >= 0");

    BpResult res;
    res.posterior.values.resize(static_cast<std::size_t>(n));
    res.hard.resize(static_cast<std::size_t>(n));

    auto finish = [&](const std::vector<double>& post, int iters_used) {
        for (int i = 0; i < n; ++i) {
            res.posterior.values[static_cast<std::size_t>(i)] = clip(post[static_cast<std::size_t>(i)], opts.message_clip);
            res.hard[static_cast<std::size_t>(i)] = post[static_cast<std::size_t>(i)] < 0.0 ? 1 : 0;
        }
        res.iterations_used = iters_used;
        res.converged = syndrome_is_zero(H, res.hard);
    };

    // channel hard decision; zero-iteration decoding (and an already satisfied
    // syndrome under early termination) returns the channel LLRs unchanged.
    finish(llr.values, 0);
    if (iterations == 0 || (opts.early_termination && res.converged)) return res;

    for (double& v : ws.var_to_check_) v = 0.0;  // edge messages start neutral
    std::vector<double> post(static_cast<std::size_t>(n));

    for (int it = 1; it <= iterations; ++it) {
        // check update: tanh rule with forward/backward partial products so
        // each edge sees the product over the other edges of its check
        for (int r = 0; r < m; ++r) {
            const int lo = ws.check_offset_[static_cast<std::size_t>(r)];
            const int hi = ws.check_offset_[static_cast<std::size_t>(r) + 1];
            double acc = 1.0;
            for (int e = lo; e < hi; ++e) {
                ws.fwd_[static_cast<std::size_t>(e)] = acc;
                double t = std::tanh(0.5 * (ws.var_to_check_[static_cast<std::size_t>(e)] +
                                            llr.values[static_cast<std::size_t>(ws.edge_var_[static_cast<std::size_t>(e)])]));
                acc *= clip(t, opts.tanh_clip);
            }
            acc = 1.0;
            for (int e = hi - 1; e >= lo; --e) {
                ws.bwd_[static_cast<std::size_t>(e)] = acc;
                double t = std::tanh(0.5 * (ws.var_to_check_[static_cast<std::size_t>(e)] +
                                            llr.values[static_cast<std::size_t>(ws.edge_var_[static_cast<std::size_t>(e)])]));
                acc *= clip(t, opts.tanh_clip);
            }
            for (int e = lo; e < hi; ++e) {
                double prod = clip(ws.fwd_[static_cast<std::size_t>(e)] * ws.bwd_[static_cast<std::size_t>(e)],
                                   opts.tanh_clip);
                ws.check_to_var_[static_cast<std::size_t>(e)] = clip(2.0 * std::atanh(prod), opts.message_clip);
            }
        }
        // variable update: posterior and extrinsic messages for the next round
        for (int v = 0; v < n; ++v) {
            double sum = llr.values[static_cast<std::size_t>(v)];
            for (int e : ws.var_edges_[static_cast<std::size_t>(v)])
                sum += ws.check_to_var_[static_cast<std::size_t>(e)];
            post[static_cast<std::size_t>(v)] = sum;
            for (int e : ws.var_edges_[static_cast<std::size_t>(v)])
                ws.var_to_check_[static_cast<std::size_t>(e)] =
                    clip(sum - ws.check_to_var_[static_cast<std::size_t>(e)] -
                             llr.values[static_cast<std::size_t>(v)],
                         opts.message_clip);
        }
        finish(post, it);
        if (opts.early_termination && res.converged) return res;
    }
    return res;
}

BpResult bp_decode(const ParityCheckMatrix& H, const LlrVector& llr, int iterations, const BpOptions& opts) {
    BpWorkspace ws(H);
    return bp_decode(ws, llr, iterations, opts);
}

std::vector<BpResult> bp_decode_batch(const ParityCheckMatrix& H, const std::vector<LlrVector>& llrs,
                                      int iterations, const BpOptions& opts) {
    BpWorkspace ws(H);
    std::vector<BpResult> out;
    out.reserve(llrs.size());
    for (const LlrVector& l : llrs) out.push_back(bp_decode(ws, l, iterations, opts));
    return out;
}

}  // namespace ecctlin
