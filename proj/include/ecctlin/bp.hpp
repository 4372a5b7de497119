// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ecctlin/channel.hpp"
#include "ecctlin/codes.hpp"

namespace ecctlin {

struct BpOptions {
    bool early_termination = true;
    double message_clip = 20.0;
    double tanh_clip = 0.9999999;
};

struct BpResult {
    LlrVector posterior;
    std::vector<std::uint8_t> hard;
    bool converged = false;
    int iterations_used = 0;
};

// Reusable per-edge message storage for one parity-check matrix.
class BpWorkspace {
  public:
    explicit BpWorkspace(const ParityCheckMatrix& H);

    const ParityCheckMatrix& pcm() const { return *H_; }

    friend BpResult bp_decode(BpWorkspace&, const LlrVector&, int, const BpOptions&);

  private:
    const ParityCheckMatrix* H_;
    // edges grouped by check, contiguous ranges per check
    std::vector<int> edge_var_;          // variable index of each edge
    std::vector<int> check_offset_;      // m+1 offsets into edge arrays
    std::vector<std::vector<int>> var_edges_;  // edges touching each variable
    std::vector<double> var_to_check_;
    std::vector<double> check_to_var_;
    std::vector<double> fwd_, bwd_;      // per-check partial tanh products
};

// Flooding sum-product decoding: tanh-rule check updates with clipping,
// variable updates summing channel LLR and check messages. Hard decision is
// bit 1 where the posterior is negative. With early termination enabled the
// decoder stops as soon as the hard decision has zero syndrome.
BpResult bp_decode(BpWorkspace& ws, const LlrVector& llr, int iterations, const BpOptions& opts = {});
BpResult bp_decode(const ParityCheckMatrix& H, const LlrVector& llr, int iterations, const BpOptions& opts = {});

std::vector<BpResult> bp_decode_batch(const ParityCheckMatrix& H, const std::vector<LlrVector>& llrs,
                                      int iterations, const BpOptions& opts = {});

}  // namespace ecctlin
