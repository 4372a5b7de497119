// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/channel.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ecctlin/errors.hpp"

namespace ecctlin {

double ebno_to_n0(double ebno_db, double coderate, int bits_per_sym, double symbol_energy) {
    if (coderate <= 0.0 || coderate > 1.0) throw ParameterError("ebno_to_n0: coderate must be in (0, 1]");
    if (bits_per_sym < 1) throw ParameterError("ebno_to_n0: bits per symbol must be >= 1");
    if (symbol_energy <= 0.0) throw ParameterError("ebno_to_n0: symbol energy must be positive");
    const double ebno_lin = std::pow(10.0, ebno_db / 10.0);
    return 1.0 / (ebno_lin * coderate * bits_per_sym / symbol_energy);
}

namespace {

// Gray PAM4 levels for one axis, scaled later: (b_hi, b_lo) -> amplitude.
// 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3 (adjacent levels differ in one bit).
inline double gray_pam4(std::uint8_t hi, std::uint8_t lo) {
    const double mag = lo ? 1.0 : 3.0;
    return hi ? -mag : mag;
}

constexpr double kQam16Norm = 0.31622776601683794;  // 1/sqrt(10)
constexpr double kQpskNorm = 0.7071067811865476;    // 1/sqrt(2)

struct ConstellationPoint {
    double re, im;
    std::uint8_t bits[4];
};

// All points of the configured complex constellation with their bit labels.
std::vector<ConstellationPoint> constellation(Modulation mod) {
    std::vector<ConstellationPoint> pts;
    if (mod == Modulation::qpsk) {
        for (int b0 = 0; b0 < 2; ++b0)
            for (int b1 = 0; b1 < 2; ++b1) {
                ConstellationPoint p{};
                p.re = (b0 ? -1.0 : 1.0) * kQpskNorm;
                p.im = (b1 ? -1.0 : 1.0) * kQpskNorm;
                p.bits[0] = static_cast<std::uint8_t>(b0);
                p.bits[1] = static_cast<std::uint8_t>(b1);
                pts.push_back(p);
            }
    } else if (mod == Modulation::qam16) {
        for (int b0 = 0; b0 < 2; ++b0)
            for (int b1 = 0; b1 < 2; ++b1)
                for (int b2 = 0; b2 < 2; ++b2)
                    for (int b3 = 0; b3 < 2; ++b3) {
                        ConstellationPoint p{};
                        p.re = gray_pam4(static_cast<std::uint8_t>(b0), static_cast<std::uint8_t>(b1)) * kQam16Norm;
                        p.im = gray_pam4(static_cast<std::uint8_t>(b2), static_cast<std::uint8_t>(b3)) * kQam16Norm;
                        p.bits[0] = static_cast<std::uint8_t>(b0);
                        p.bits[1] = static_cast<std::uint8_t>(b1);
                        p.bits[2] = static_cast<std::uint8_t>(b2);
                        p.bits[3] = static_cast<std::uint8_t>(b3);
                        pts.push_back(p);
                    }
    }
    return pts;
}

}  // namespace

SymbolVector map_bits(std::span<const std::uint8_t> bits, const ChannelConfig& cfg) {
    const int M = bits_per_symbol(cfg.modulation);
    SymbolVector out;
    out.bit_count = static_cast<int>(bits.size());
    out.pad_bits = static_cast<int>((M - bits.size() % M) % M);

    std::vector<std::uint8_t> padded(bits.begin(), bits.end());
    padded.insert(padded.end(), out.pad_bits, 0);
    const std::size_t n_sym = padded.size() / M;

    if (cfg.modulation == Modulation::bpsk) {
        out.is_complex = false;
        out.re.resize(n_sym);
        for (std::size_t i = 0; i < n_sym; ++i) out.re[i] = padded[i] ? -1.0 : 1.0;
        return out;
    }
    out.is_complex = true;
    out.re.resize(n_sym);
    out.im.resize(n_sym);
    if (cfg.modulation == Modulation::qpsk) {
        for (std::size_t i = 0; i < n_sym; ++i) {
            out.re[i] = (padded[2 * i] ? -1.0 : 1.0) * kQpskNorm;
            out.im[i] = (padded[2 * i + 1] ? -1.0 : 1.0) * kQpskNorm;
        }
    } else {
        for (std::size_t i = 0; i < n_sym; ++i) {
            const std::uint8_t* b = padded.data() + 4 * i;
            out.re[i] = gray_pam4(b[0], b[1]) * kQam16Norm;
            out.im[i] = gray_pam4(b[2], b[3]) * kQam16Norm;
        }
    }
    return out;
}

SymbolVector apply_awgn(const SymbolVector& x, double n0, Rng& rng) {
    if (n0 <= 0.0) throw ParameterError("apply_awgn: N0 must be positive");
    const double sigma = std::sqrt(n0 / 2.0);
    SymbolVector y = x;
    if (!x.is_complex) {
        for (double& v : y.re) v += sigma * rng.normal();
    } else {
        for (std::size_t i = 0; i < y.re.size(); ++i) {
            y.re[i] += sigma * rng.normal();
            y.im[i] += sigma * rng.normal();
        }
    }
    return y;
}

LlrVector demap_llr(const SymbolVector& y, double n0, const ChannelConfig& cfg) {
    if (n0 <= 0.0) throw ParameterError("demap_llr: N0 must be positive");
    const int M = bits_per_symbol(cfg.modulation);
    const double clip = cfg.llr_clip;
    LlrVector out;
    out.values.resize(y.size() * M);

    if (cfg.modulation == Modulation::bpsk) {
        for (std::size_t i = 0; i < y.size(); ++i)
            out.values[i] = std::clamp(4.0 * y.re[i] / n0, -clip, clip);
    } else {
        const auto pts = constellation(cfg.modulation);
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::array<double, 4> lse0{}, lse1{};
            std::array<bool, 4> seen0{}, seen1{};
            for (const auto& p : pts) {
                const double dr = y.re[i] - p.re;
                const double di = y.im[i] - p.im;
                const double metric = -(dr * dr + di * di) / n0;
                for (int b = 0; b < M; ++b) {
                    auto& acc = p.bits[b] ? lse1[b] : lse0[b];
                    auto& seen = p.bits[b] ? seen1[b] : seen0[b];
                    if (!seen) {
                        acc = metric;
                        seen = true;
                    } else {
                        // stable log-sum-exp accumulation
                        const double hi = std::max(acc, metric);
                        acc = hi + std::log(std::exp(acc - hi) + std::exp(metric - hi));
                    }
                }
            }
            for (int b = 0; b < M; ++b)
                out.values[i * M + b] = std::clamp(lse0[b] - lse1[b], -clip, clip);
        }
    }
    out.values.resize(y.bit_count);  // strip padding
    return out;
}

std::vector<std::uint8_t> hard_decision(const LlrVector& llr) {
    std::vector<std::uint8_t> bits(llr.size());
    for (std::size_t i = 0; i < llr.size(); ++i) bits[i] = llr.values[i] < 0.0 ? 1 : 0;
    return bits;
}

DecoderInput build_decoder_input(const LlrVector& llr, const ParityCheckMatrix& H) {
    if (static_cast<int>(llr.size()) != H.cols()) throw ShapeError("build_decoder_input: llr length != n");
    DecoderInput x;
    x.n = H.cols();
    x.m = H.rows();
    x.values = llr.values;
    const auto s = syndrome(H, hard_decision(llr));
    x.values.reserve(x.n + x.m);
    for (std::uint8_t b : s) x.values.push_back(static_cast<double>(b));
    return x;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace ecctlin
