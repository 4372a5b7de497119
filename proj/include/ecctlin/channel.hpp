// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecctlin/codes.hpp"
#include "ecctlin/rng.hpp"

namespace ecctlin {

enum class Modulation { bpsk, qpsk, qam16 };

inline int bits_per_symbol(Modulation m) {
    switch (m) {
        case Modulation::bpsk: return 1;
        case Modulation::qpsk: return 2;
        case Modulation::qam16: return 4;
    }
    return 1;
}

struct ChannelConfig {
    Modulation modulation = Modulation::bpsk;
    double symbol_energy = 1.0;  // all constellations are unit-energy
    double coderate = 1.0;       // 1 for uncoded transmission
    double llr_clip = 20.0;
};

// Per-bit log-likelihood ratios, channel convention: positive means bit 0 is
// more likely. Entries are clipped to +/- llr_clip by all producers.
struct LlrVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

// Modulated symbols. BPSK is a real constellation (no imaginary part); QPSK
// and 16QAM are complex. pad_bits records trailing zero bits the mapper
// appended to fill the last symbol.
struct SymbolVector {
    std::vector<double> re;
    std::vector<double> im;
    bool is_complex = false;
    int pad_bits = 0;
    int bit_count = 0;

    std::size_t size() const { return re.size(); }
};

// Length n+m decoder input: channel LLRs followed by the syndrome of their
// hard decision, as reals.
struct DecoderInput {
    std::vector<double> values;
    int n = 0;
    int m = 0;
};

// N0 = (10^(ebno_db/10) * r * M / Es)^-1
double ebno_to_n0(double ebno_db, double coderate, int bits_per_sym, double symbol_energy);

// Gray-mapped unit-energy constellations; zero-pads when the bit count is not
// a multiple of bits-per-symbol.
SymbolVector map_bits(std::span<const std::uint8_t> bits, const ChannelConfig& cfg);

// y = x + w with variance N0/2 per real dimension.
SymbolVector apply_awgn(const SymbolVector& x, double n0, Rng& rng);

// LLR(c_i) = ln p(y|c_i=0) - ln p(y|c_i=1), clipped; BPSK uses the 4y/N0
// closed form, QPSK/16QAM the full-log ratio over constellation points.
// Padding bits are stripped.
LlrVector demap_llr(const SymbolVector& y, double n0, const ChannelConfig& cfg);

// 1 where llr < 0, else 0.
std::vector<std::uint8_t> hard_decision(const LlrVector& llr);

// [llr ; syndrome(hard(llr))] of length n+m.
DecoderInput build_decoder_input(const LlrVector& llr, const ParityCheckMatrix& H);

// Gaussian tail probability Q(x); reference for BER calibration.
double q_function(double x);

}  // namespace ecctlin
