// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ecctlin {

// Exact rational, kept reduced with positive denominator. Code rates are
// reported as rationals so rate arithmetic stays exact.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

// Binary parity-check matrix over GF(2) with Tanner-graph adjacency.
// Immutable after construction.
class ParityCheckMatrix {
  public:
    ParityCheckMatrix() = default;
    // bits: row-major m*n entries, each 0 or 1
    ParityCheckMatrix(int m, int n, std::vector<std::uint8_t> bits);

    int rows() const { return m_; }
    int cols() const { return n_; }
    std::uint8_t at(int r, int c) const { return bits_[static_cast<std::size_t>(r) * n_ + c]; }

    // columns with a 1 in check r
    const std::vector<int>& check_neighbors(int r) const { return check_adj_[r]; }
    // checks with a 1 in column v
    const std::vector<int>& var_neighbors(int v) const { return var_adj_[v]; }

    long long edge_count() const { return edges_; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

  private:
    int m_ = 0, n_ = 0;
    long long edges_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<std::vector<int>> check_adj_;
    std::vector<std::vector<int>> var_adj_;
};

// Generator matrix paired with a parity-check matrix: k x n over GF(2),
// systematic on the recorded column set.
struct GeneratorMatrix {
    int k = 0;
    int n = 0;
    std::vector<std::uint8_t> bits;      // row-major k*n
    std::vector<int> systematic_cols;    // info-bit positions, one per row

    std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * n + c]; }
};

// Small protograph with circulant shift values; -1 marks an all-zero block.
struct Protograph {
    int rows = 0;
    int cols = 0;
    std::vector<int> shifts;  // row-major

    int shift(int r, int c) const { return shifts[static_cast<std::size_t>(r) * cols + c]; }
};

enum class CodeKind { regular, lifted, imported };

// Construction record for a code; rate is exact.
struct CodeSpec {
    CodeKind kind = CodeKind::imported;
    int n = 0;
    int k = 0;
    int m = 0;
    // regular construction
    int var_degree = 0;
    int check_degree = 0;
    std::uint64_t seed = 0;
    // lifted construction
    Protograph base;
    int lifting = 0;

    Rational rate() const { return Rational(k, n); }
};

// Regular (v, c) LDPC by seeded random socket permutation. Every column has
// weight v and every row weight c; parallel edges are resolved by bounded
// re-draws, re-permuting from scratch if a permutation cannot be repaired.
// Cycle structure is not optimized.
ParityCheckMatrix build_regular_ldpc(int n, int var_degree, int check_degree, std::uint64_t seed);

// Expand each protograph entry into a Z x Z block: zero block for shift -1,
// otherwise the identity cyclically shifted right by the shift value.
ParityCheckMatrix lift_base_graph(const Protograph& base, int lifting);

// Gauss-eliminate H over GF(2) and return a generator with k = n - rank(H)
// rows, systematic on the non-pivot columns. G * H^T = 0.
GeneratorMatrix derive_generator(const ParityCheckMatrix& H);

// c = b G over GF(2)
std::vector<std::uint8_t> encode(const GeneratorMatrix& G, std::span<const std::uint8_t> info_bits);

// sigma = H c^T over GF(2)
std::vector<std::uint8_t> syndrome(const ParityCheckMatrix& H, std::span<const std::uint8_t> word);

struct RateRecord {
    int info_bits = 0;        // k (minus shortened bits where applicable)
    int mother_n = 0;         // n of the mother code
    int transmitted = 0;      // bits actually sent
    Rational rate;
};

// Remove the bits at `pattern` from a length-n vector. Rate becomes
// k / (n - p); the receiver re-inserts erasure LLRs at those positions.
template <typename T>
std::vector<T> puncture(std::span<const T> word, std::span<const int> pattern);
RateRecord puncture_rate(int k, int n, int punctured);

// Re-insert punctured positions as LLR 0 (erasures).
std::vector<double> reinsert_punctured(std::span<const double> llr, std::span<const int> pattern, int n);

// Insert known bits at `pattern` into a (k - s)-length info vector, giving an
// encode-ready k-length vector. Rate becomes (k - s) / (n - s).
std::vector<std::uint8_t> shorten(std::span<const std::uint8_t> info_bits, std::span<const int> pattern,
                                  std::span<const std::uint8_t> fill, int k);
RateRecord shorten_rate(int k, int n, int shortened);

// Receiver-side LLRs for shortened positions: saturated at +clip for a known
// 0 and -clip for a known 1.
void apply_shortened_llrs(std::vector<double>& llr, std::span<const int> positions,
                          std::span<const std::uint8_t> fill, double clip = 20.0);

// alist text format (columns first, 1-based indices, zero padding allowed).
ParityCheckMatrix load_alist(std::istream& in);
ParityCheckMatrix load_alist_text(const std::string& text);
std::string save_alist(const ParityCheckMatrix& H);

// Protograph file: "base_m base_n Z" then base_m rows of shift integers.
struct ProtographFile {
    Protograph base;
    int lifting = 0;
};
ProtographFile load_protograph(std::istream& in);
ProtographFile load_protograph_text(const std::string& text);

// The (7,4) Hamming code with columns enumerating 1..7 in binary.
ParityCheckMatrix hamming74();

}  // namespace ecctlin
