// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/codes.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "ecctlin/errors.hpp"
#include "ecctlin/rng.hpp"

namespace ecctlin {

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw ParameterError("rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

ParityCheckMatrix::ParityCheckMatrix(int m, int n, std::vector<std::uint8_t> bits)
    : m_(m), n_(n), bits_(std::move(bits)) {
    if (m <= 0 || n <= 0) throw ParameterError("pcm: dimensions must be positive");
    if (bits_.size() != static_cast<std::size_t>(m) * n) throw ShapeError("pcm: bit count does not match dimensions");
    check_adj_.resize(m);
    var_adj_.resize(n);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) {
            const std::uint8_t b = bits_[static_cast<std::size_t>(r) * n + c];
            if (b > 1) throw ParameterError("pcm: entries must be 0 or 1");
            if (b) {
                check_adj_[r].push_back(c);
                var_adj_[c].push_back(r);
                ++edges_;
            }
        }
    }
}

ParityCheckMatrix build_regular_ldpc(int n, int var_degree, int check_degree, std::uint64_t seed) {
    if (n <= 0 || var_degree <= 0 || check_degree <= 0) throw ParameterError("regular ldpc: parameters must be positive");
    if (var_degree >= check_degree) throw ParameterError("regular ldpc: v >= c gives nonpositive rate");
    const long long total_sockets = static_cast<long long>(n) * var_degree;
    if (total_sockets % check_degree != 0)
        throw ConstructionError("regular ldpc: v*n not divisible by c");
    const long long m = total_sockets / check_degree;
    if (m < 1) throw ConstructionError("regular ldpc: fewer sockets than one check row");

    Rng rng(seed);
    const int e = static_cast<int>(total_sockets);
    std::vector<int> perm(e);
    std::iota(perm.begin(), perm.end(), 0);

    auto var_of = [&](int socket) { return socket / var_degree; };
    auto check_of = [&](int socket) { return socket / check_degree; };

    const int max_permutations = 1000;
    for (int attempt = 0; attempt < max_permutations; ++attempt) {
        for (int i = e - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

        // Repair parallel edges by swapping check sockets; give up on this
        // permutation after 100 re-draws.
        bool ok = false;
        for (int redraw = 0; redraw < 100; ++redraw) {
            std::set<std::pair<int, int>> seen;
            int dup = -1;
            for (int s = 0; s < e; ++s) {
                if (!seen.emplace(var_of(s), check_of(perm[s])).second) {
                    dup = s;
                    break;
                }
            }
            if (dup < 0) {
                ok = true;
                break;
            }
            const int other = static_cast<int>(rng.uniform_int(e));
            std::swap(perm[dup], perm[other]);
        }
        if (!ok) continue;

        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * n, 0);
        for (int s = 0; s < e; ++s) bits[static_cast<std::size_t>(check_of(perm[s])) * n + var_of(s)] = 1;
        return ParityCheckMatrix(static_cast<int>(m), n, std::move(bits));
    }
    throw ConstructionError("regular ldpc: could not resolve parallel edges");
}

ParityCheckMatrix lift_base_graph(const Protograph& base, int lifting) {
    if (base.rows <= 0 || base.cols <= 0) throw ParameterError("lift: empty protograph");
    if (lifting < 1) throw ParameterError("lift: lifting factor must be >= 1");
    if (base.shifts.size() != static_cast<std::size_t>(base.rows) * base.cols)
        throw ShapeError("lift: shift table does not match protograph dimensions");

    const int m = base.rows * lifting;
    const int n = base.cols * lifting;
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * n, 0);
    for (int br = 0; br < base.rows; ++br) {
        for (int bc = 0; bc < base.cols; ++bc) {
            const int s = base.shift(br, bc);
            if (s == -1) continue;
            if (s < -1 || s >= lifting) throw ParameterError("lift: shift out of range [-1, Z-1]");
            for (int i = 0; i < lifting; ++i) {
                const int r = br * lifting + i;
                const int c = bc * lifting + (i + s) % lifting;
                bits[static_cast<std::size_t>(r) * n + c] = 1;
            }
        }
    }
    return ParityCheckMatrix(m, n, std::move(bits));
}

GeneratorMatrix derive_generator(const ParityCheckMatrix& H) {
    const int m = H.rows(), n = H.cols();
    if (m == 0 || n == 0) throw ParameterError("derive_generator: empty matrix");

    // Row-reduce a working copy of H to reduced row echelon form.
    std::vector<std::vector<std::uint8_t>> rows(m, std::vector<std::uint8_t>(n));
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) rows[r][c] = H.at(r, c);

    std::vector<int> pivot_cols;
    int rank = 0;
    for (int c = 0; c < n && rank < m; ++c) {
        int pivot = -1;
        for (int r = rank; r < m; ++r) {
            if (rows[r][c]) {
                pivot = r;
                break;
            }
        }
        if (pivot < 0) continue;
        std::swap(rows[rank], rows[pivot]);
        for (int r = 0; r < m; ++r) {
            if (r != rank && rows[r][c]) {
                for (int j = 0; j < n; ++j) rows[r][j] ^= rows[rank][j];
            }
        }
        pivot_cols.push_back(c);
        ++rank;
    }

    const int k = n - rank;
    if (k == 0) throw ConstructionError("derive_generator: rank(H) = n, no information bits");

    std::vector<std::uint8_t> is_pivot(n, 0);
    for (int c : pivot_cols) is_pivot[c] = 1;
    std::vector<int> free_cols;
    free_cols.reserve(k);
    for (int c = 0; c < n; ++c)
        if (!is_pivot[c]) free_cols.push_back(c);

    // For reduced H, each pivot column value is a parity of free columns:
    // c[pivot_r] = sum_f rows[r][f] * c[f]. Build G rows from unit vectors on
    // the free columns.
    GeneratorMatrix G;
    G.k = k;
    G.n = n;
    G.systematic_cols = free_cols;
    G.bits.assign(static_cast<std::size_t>(k) * n, 0);
    for (int i = 0; i < k; ++i) {
        G.bits[static_cast<std::size_t>(i) * n + free_cols[i]] = 1;
        for (int r = 0; r < rank; ++r) {
            if (rows[r][free_cols[i]]) G.bits[static_cast<std::size_t>(i) * n + pivot_cols[r]] = 1;
        }
    }
    return G;
}

std::vector<std::uint8_t> encode(const GeneratorMatrix& G, std::span<const std::uint8_t> info_bits) {
    if (static_cast<int>(info_bits.size()) != G.k) throw ShapeError("encode: info length != k");
    std::vector<std::uint8_t> c(G.n, 0);
    for (int i = 0; i < G.k; ++i) {
        if (!info_bits[i]) continue;
        const std::uint8_t* row = G.bits.data() + static_cast<std::size_t>(i) * G.n;
        for (int j = 0; j < G.n; ++j) c[j] ^= row[j];
    }
    return c;
}

std::vector<std::uint8_t> syndrome(const ParityCheckMatrix& H, std::span<const std::uint8_t> word) {
    if (static_cast<int>(word.size()) != H.cols()) throw ShapeError("syndrome: word length != n");
    std::vector<std::uint8_t> s(H.rows(), 0);
    for (int r = 0; r < H.rows(); ++r) {
        std::uint8_t acc = 0;
        for (int c : H.check_neighbors(r)) acc ^= word[c];
        s[r] = acc;
    }
    return s;
}

namespace {

void validate_pattern(std::span<const int> pattern, int limit, const char* what) {
    std::set<int> seen;
    for (int idx : pattern) {
        if (idx < 0 || idx >= limit) throw ParameterError(std::string(what) + ": index out of range");
        if (!seen.insert(idx).second) throw ParameterError(std::string(what) + ": duplicate index");
    }
}

}  // namespace

template <typename T>
std::vector<T> puncture(std::span<const T> word, std::span<const int> pattern) {
    const int n = static_cast<int>(word.size());
    if (static_cast<int>(pattern.size()) >= n) throw ParameterError("puncture: pattern must leave at least one bit");
    validate_pattern(pattern, n, "puncture");
    std::vector<std::uint8_t> drop(n, 0);
    for (int idx : pattern) drop[idx] = 1;
    std::vector<T> out;
    out.reserve(n - pattern.size());
    for (int i = 0; i < n; ++i)
        if (!drop[i]) out.push_back(word[i]);
    return out;
}

template std::vector<std::uint8_t> puncture<std::uint8_t>(std::span<const std::uint8_t>, std::span<const int>);
template std::vector<double> puncture<double>(std::span<const double>, std::span<const int>);

RateRecord puncture_rate(int k, int n, int punctured) {
    if (punctured < 0 || punctured >= n) throw ParameterError("puncture_rate: p out of range");
    return RateRecord{k, n, n - punctured, Rational(k, n - punctured)};
}

std::vector<double> reinsert_punctured(std::span<const double> llr, std::span<const int> pattern, int n) {
    validate_pattern(pattern, n, "reinsert_punctured");
    if (static_cast<int>(llr.size() + pattern.size()) != n)
        throw ShapeError("reinsert_punctured: lengths do not add up to n");
    std::vector<std::uint8_t> drop(n, 0);
    for (int idx : pattern) drop[idx] = 1;
    std::vector<double> out(n, 0.0);
    std::size_t src = 0;
    for (int i = 0; i < n; ++i)
        if (!drop[i]) out[i] = llr[src++];
    return out;
}

std::vector<std::uint8_t> shorten(std::span<const std::uint8_t> info_bits, std::span<const int> pattern,
                                  std::span<const std::uint8_t> fill, int k) {
    const int s = static_cast<int>(pattern.size());
    if (s >= k) throw ParameterError("shorten: s must be < k");
    if (fill.size() != pattern.size()) throw ShapeError("shorten: fill length != pattern length");
    if (static_cast<int>(info_bits.size()) != k - s) throw ShapeError("shorten: info length != k - s");
    validate_pattern(pattern, k, "shorten");
    std::vector<std::uint8_t> fixed(k, 0);
    std::vector<std::uint8_t> is_fixed(k, 0);
    for (int i = 0; i < s; ++i) {
        is_fixed[pattern[i]] = 1;
        fixed[pattern[i]] = fill[i];
    }
    std::vector<std::uint8_t> out(k, 0);
    std::size_t src = 0;
    for (int i = 0; i < k; ++i) out[i] = is_fixed[i] ? fixed[i] : info_bits[src++];
    return out;
}

RateRecord shorten_rate(int k, int n, int shortened) {
    if (shortened < 0 || shortened >= k) throw ParameterError("shorten_rate: s out of range");
    return RateRecord{k - shortened, n, n - shortened, Rational(k - shortened, n - shortened)};
}

void apply_shortened_llrs(std::vector<double>& llr, std::span<const int> positions,
                          std::span<const std::uint8_t> fill, double clip) {
    if (positions.size() != fill.size()) throw ShapeError("apply_shortened_llrs: lengths differ");
    validate_pattern(positions, static_cast<int>(llr.size()), "apply_shortened_llrs");
    for (std::size_t i = 0; i < positions.size(); ++i) llr[positions[i]] = fill[i] ? -clip : clip;
}

namespace {

// Line-oriented integer reader that tracks line numbers for errors.
class LineTokens {
  public:
    explicit LineTokens(std::istream& in) : in_(in) {}

    std::vector<long long> next_line() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            std::istringstream ls(line);
            std::vector<long long> vals;
            long long v;
            while (ls >> v) vals.push_back(v);
            std::string trailing;
            if (ls.fail() && !ls.eof() && ls >> trailing)
                throw ParseError("alist: non-numeric token '" + trailing + "'", line_no_);
            if (!vals.empty()) return vals;
        }
        throw ParseError("alist: unexpected end of file", line_no_);
    }

    int line_no() const { return line_no_; }

  private:
    std::istream& in_;
    int line_no_ = 0;
};

}  // namespace

ParityCheckMatrix load_alist(std::istream& in) {
    LineTokens tok(in);
    auto dims = tok.next_line();
    if (dims.size() != 2) throw ParseError("alist: expected 'n m' on the first line", tok.line_no());
    const long long n = dims[0], m = dims[1];
    if (n <= 0 || m <= 0) throw ParseError("alist: dimensions must be positive", tok.line_no());

    auto maxdeg = tok.next_line();
    if (maxdeg.size() != 2) throw ParseError("alist: expected max column/row degrees", tok.line_no());
    const long long max_col = maxdeg[0], max_row = maxdeg[1];

    auto col_degs = tok.next_line();
    if (static_cast<long long>(col_degs.size()) != n)
        throw ParseError("alist: expected one degree per column", tok.line_no());
    auto row_degs = tok.next_line();
    if (static_cast<long long>(row_degs.size()) != m)
        throw ParseError("alist: expected one degree per row", tok.line_no());
    for (long long d : col_degs)
        if (d < 0 || d > max_col) throw ParseError("alist: column degree out of range", tok.line_no());
    for (long long d : row_degs)
        if (d < 0 || d > max_row) throw ParseError("alist: row degree out of range", tok.line_no());

    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * n, 0);
    for (long long c = 0; c < n; ++c) {
        auto vals = tok.next_line();
        long long count = 0;
        for (long long v : vals) {
            if (v == 0) continue;  // padding
            if (v < 1 || v > m) throw ParseError("alist: check index out of range", tok.line_no());
            bits[static_cast<std::size_t>(v - 1) * n + c] = 1;
            ++count;
        }
        if (count != col_degs[c]) throw ParseError("alist: column neighbor count != declared degree", tok.line_no());
    }
    // Row lists must describe the same edge set.
    for (long long r = 0; r < m; ++r) {
        auto vals = tok.next_line();
        long long count = 0;
        for (long long v : vals) {
            if (v == 0) continue;
            if (v < 1 || v > n) throw ParseError("alist: variable index out of range", tok.line_no());
            if (!bits[static_cast<std::size_t>(r) * n + (v - 1)])
                throw ParseError("alist: row list disagrees with column lists", tok.line_no());
            ++count;
        }
        if (count != row_degs[r]) throw ParseError("alist: row neighbor count != declared degree", tok.line_no());
    }
    return ParityCheckMatrix(static_cast<int>(m), static_cast<int>(n), std::move(bits));
}

ParityCheckMatrix load_alist_text(const std::string& text) {
    std::istringstream in(text);
    return load_alist(in);
}

std::string save_alist(const ParityCheckMatrix& H) {
    const int m = H.rows(), n = H.cols();
    std::size_t max_col = 0, max_row = 0;
    for (int c = 0; c < n; ++c) max_col = std::max(max_col, H.var_neighbors(c).size());
    for (int r = 0; r < m; ++r) max_row = std::max(max_row, H.check_neighbors(r).size());

    std::ostringstream out;
    out << n << ' ' << m << '\n';
    out << max_col << ' ' << max_row << '\n';
    for (int c = 0; c < n; ++c) out << H.var_neighbors(c).size() << (c + 1 < n ? ' ' : '\n');
    for (int r = 0; r < m; ++r) out << H.check_neighbors(r).size() << (r + 1 < m ? ' ' : '\n');
    for (int c = 0; c < n; ++c) {
        const auto& nb = H.var_neighbors(c);
        for (std::size_t i = 0; i < max_col; ++i)
            out << (i < nb.size() ? nb[i] + 1 : 0) << (i + 1 < max_col ? ' ' : '\n');
    }
    for (int r = 0; r < m; ++r) {
        const auto& nb = H.check_neighbors(r);
        for (std::size_t i = 0; i < max_row; ++i)
            out << (i < nb.size() ? nb[i] + 1 : 0) << (i + 1 < max_row ? ' ' : '\n');
    }
    return out.str();
}

ProtographFile load_protograph(std::istream& in) {
    LineTokens tok(in);
    auto head = tok.next_line();
    if (head.size() != 3) throw ParseError("protograph: expected 'base_m base_n Z'", tok.line_no());
    ProtographFile pf;
    pf.base.rows = static_cast<int>(head[0]);
    pf.base.cols = static_cast<int>(head[1]);
    pf.lifting = static_cast<int>(head[2]);
    if (pf.base.rows <= 0 || pf.base.cols <= 0 || pf.lifting < 1)
        throw ParseError("protograph: invalid header values", tok.line_no());
    pf.base.shifts.reserve(static_cast<std::size_t>(pf.base.rows) * pf.base.cols);
    for (int r = 0; r < pf.base.rows; ++r) {
        auto vals = tok.next_line();
        if (static_cast<int>(vals.size()) != pf.base.cols)
            throw ParseError("protograph: wrong number of shifts in row", tok.line_no());
        for (long long v : vals) {
            if (v < -1 || v >= pf.lifting) throw ParseError("protograph: shift out of range [-1, Z-1]", tok.line_no());
            pf.base.shifts.push_back(static_cast<int>(v));
        }
    }
    return pf;
}

ProtographFile load_protograph_text(const std::string& text) {
    std::istringstream in(text);
    return load_protograph(in);
}

ParityCheckMatrix hamming74() {
    // H columns are 1..7 in binary, LSB in the first row.
    std::vector<std::uint8_t> bits(3 * 7, 0);
    for (int c = 0; c < 7; ++c) {
        const int v = c + 1;
        for (int r = 0; r < 3; ++r)
            if (v & (1 << r)) bits[static_cast<std::size_t>(r) * 7 + c] = 1;
    }
    return ParityCheckMatrix(3, 7, std::move(bits));
}

}  // namespace ecctlin
