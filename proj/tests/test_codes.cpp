// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "ecctlin/codes.hpp"
#include "ecctlin/errors.hpp"
#include "ecctlin/rng.hpp"

using namespace ecctlin;

namespace {

int row_weight(const ParityCheckMatrix& H, int r) {
    int w = 0;
    for (int c = 0; c < H.cols(); ++c) w += H.at(r, c);
    return w;
}

int col_weight(const ParityCheckMatrix& H, int c) {
    int w = 0;
    for (int r = 0; r < H.rows(); ++r) w += H.at(r, c);
    return w;
}

bool gh_zero(const GeneratorMatrix& G, const ParityCheckMatrix& H) {
    for (int i = 0; i < G.k; ++i) {
        for (int r = 0; r < H.rows(); ++r) {
            int acc = 0;
            for (int c = 0; c < H.cols(); ++c) acc ^= G.at(i, c) & H.at(r, c);
            if (acc) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("regular ldpc degrees and check count") {
    ParityCheckMatrix H = build_regular_ldpc(26, 3, 6, 7);
    CHECK(H.rows() == 13);
    CHECK(H.cols() == 26);
    for (int r = 0; r < 13; ++r) CHECK(row_weight(H, r) == 6);
    for (int c = 0; c < 26; ++c) CHECK(col_weight(H, c) == 3);

    ParityCheckMatrix H2 = build_regular_ldpc(6, 2, 4, 0);
    CHECK(H2.rows() == 3);
    for (int r = 0; r < 3; ++r) CHECK(row_weight(H2, r) == 4);
    for (int c = 0; c < 6; ++c) CHECK(col_weight(H2, c) == 2);
}

TEST_CASE("regular ldpc parameter validation") {
    CHECK_THROWS_AS(build_regular_ldpc(10, 3, 4, 0), ConstructionError);  // 30 % 4 != 0
    CHECK_THROWS_AS(build_regular_ldpc(12, 4, 4, 0), ParameterError);     // rate 0
    CHECK_THROWS_AS(build_regular_ldpc(12, 6, 4, 0), ParameterError);     // v > c
}

TEST_CASE("regular ldpc is seed-deterministic") {
    ParityCheckMatrix a = build_regular_ldpc(48, 3, 6, 11);
    ParityCheckMatrix b = build_regular_ldpc(48, 3, 6, 11);
    ParityCheckMatrix c = build_regular_ldpc(48, 3, 6, 12);
    CHECK(a.bits() == b.bits());
    CHECK(a.bits() != c.bits());
}

TEST_CASE("lifting circulants") {
    Protograph single{1, 1, {0}};
    ParityCheckMatrix id3 = lift_base_graph(single, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(id3.at(i, j) == (i == j ? 1 : 0));

    Protograph shifted{1, 1, {1}};
    ParityCheckMatrix s3 = lift_base_graph(shifted, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(s3.at(i, j) == (j == (i + 1) % 3 ? 1 : 0));
}

TEST_CASE("lifting a mixed protograph matches dense expansion") {
    Protograph base{2, 4, {0, 2, -1, 1, 3, -1, 0, 2}};
    const int Z = 4;
    ParityCheckMatrix H = lift_base_graph(base, Z);
    REQUIRE(H.rows() == 8);
    REQUIRE(H.cols() == 16);

    // independent dense expansion: entry (bi*Z+i, bj*Z+j) = 1 iff shift s >= 0
    // and j == (i + s) mod Z
    for (int bi = 0; bi < base.rows; ++bi) {
        for (int bj = 0; bj < base.cols; ++bj) {
            const int s = base.shift(bi, bj);
            for (int i = 0; i < Z; ++i)
                for (int j = 0; j < Z; ++j) {
                    const int expect = (s >= 0 && j == (i + s) % Z) ? 1 : 0;
                    CHECK(H.at(bi * Z + i, bj * Z + j) == expect);
                }
        }
    }

    // total ones scale by Z
    int ones = 0;
    for (int r = 0; r < H.rows(); ++r) ones += row_weight(H, r);
    int base_ones = 0;
    for (int s : base.shifts) base_ones += s >= 0 ? 1 : 0;
    CHECK(ones == base_ones * Z);
}

TEST_CASE("lifting shift validation") {
    CHECK_THROWS_AS(lift_base_graph(Protograph{1, 1, {3}}, 3), ParameterError);
    CHECK_THROWS_AS(lift_base_graph(Protograph{1, 1, {-2}}, 3), ParameterError);
    CHECK_THROWS_AS(lift_base_graph(Protograph{1, 1, {0}}, 0), ParameterError);
}

TEST_CASE("generator derivation on hamming code") {
    ParityCheckMatrix H = hamming74();
    GeneratorMatrix G = derive_generator(H);
    CHECK(G.k == 4);
    CHECK(G.n == 7);
    CHECK(gh_zero(G, H));

    // all 16 information words give distinct, zero-syndrome codewords
    std::set<std::vector<std::uint8_t>> words;
    for (int b = 0; b < 16; ++b) {
        std::vector<std::uint8_t> info{static_cast<std::uint8_t>(b & 1),
                                       static_cast<std::uint8_t>((b >> 1) & 1),
                                       static_cast<std::uint8_t>((b >> 2) & 1),
                                       static_cast<std::uint8_t>((b >> 3) & 1)};
        std::vector<std::uint8_t> c = encode(G, info);
        const std::vector<std::uint8_t> s = syndrome(H, c);
        CHECK(std::all_of(s.begin(), s.end(), [](std::uint8_t x) { return x == 0; }));
        words.insert(c);
    }
    CHECK(words.size() == 16);
}

TEST_CASE("generator from [I|A] form and rank properties") {
    Rng rng(5);
    const int m = 4, n = 10;
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * n, 0);
    for (int r = 0; r < m; ++r) {
        bits[static_cast<std::size_t>(r) * n + r] = 1;
        for (int c = m; c < n; ++c)
            bits[static_cast<std::size_t>(r) * n + c] = static_cast<std::uint8_t>(rng.bit());
    }
    ParityCheckMatrix H(m, n, bits);
    GeneratorMatrix G = derive_generator(H);
    CHECK(G.k == n - m);
    CHECK(gh_zero(G, H));

    // duplicating a row must not change k
    std::vector<std::uint8_t> dup = bits;
    dup.insert(dup.end(), bits.begin(), bits.begin() + n);
    ParityCheckMatrix Hd(m + 1, n, dup);
    CHECK(derive_generator(Hd).k == G.k);
}

TEST_CASE("degenerate full-rank-square code is rejected") {
    std::vector<std::uint8_t> eye(16, 0);
    for (int i = 0; i < 4; ++i) eye[static_cast<std::size_t>(i) * 4 + i] = 1;
    CHECK_THROWS_AS(derive_generator(ParityCheckMatrix(4, 4, eye)), ConstructionError);
}

TEST_CASE("encode basics") {
    ParityCheckMatrix H = hamming74();
    GeneratorMatrix G = derive_generator(H);
    std::vector<std::uint8_t> zeros(4, 0);
    std::vector<std::uint8_t> c0 = encode(G, zeros);
    CHECK(std::all_of(c0.begin(), c0.end(), [](std::uint8_t x) { return x == 0; }));

    std::vector<std::uint8_t> e1{1, 0, 0, 0};
    std::vector<std::uint8_t> c1 = encode(G, e1);
    for (int j = 0; j < 7; ++j) CHECK(c1[static_cast<std::size_t>(j)] == G.at(0, j));

    CHECK_THROWS_AS(encode(G, std::vector<std::uint8_t>(5, 0)), ShapeError);
}

TEST_CASE("syndrome linearity") {
    ParityCheckMatrix H = hamming74();
    GeneratorMatrix G = derive_generator(H);
    std::vector<std::uint8_t> info{1, 0, 1, 1};
    std::vector<std::uint8_t> c = encode(G, info);

    auto flipped = c;
    flipped[3] ^= 1;
    std::vector<std::uint8_t> s1 = syndrome(H, flipped);
    for (int r = 0; r < 3; ++r) CHECK(s1[static_cast<std::size_t>(r)] == H.at(r, 3));

    flipped[6] ^= 1;
    std::vector<std::uint8_t> s2 = syndrome(H, flipped);
    for (int r = 0; r < 3; ++r) CHECK(s2[static_cast<std::size_t>(r)] == (H.at(r, 3) ^ H.at(r, 6)));

    CHECK_THROWS_AS(syndrome(H, std::vector<std::uint8_t>(6, 0)), ShapeError);
}

TEST_CASE("puncturing rate arithmetic and erasure reinsertion") {
    CHECK(puncture_rate(13, 26, 6).rate == Rational(13, 20));
    CHECK(puncture_rate(13, 26, 0).rate == Rational(1, 2));
    CHECK(puncture_rate(13, 26, 6).transmitted == 20);

    std::vector<double> llr(26, 3.5);
    std::vector<int> pattern{1, 5, 24};
    std::vector<double> tx = puncture<double>(llr, pattern);
    CHECK(tx.size() == 23);
    std::vector<double> rx = reinsert_punctured(tx, pattern, 26);
    REQUIRE(rx.size() == 26);
    for (int i : pattern) CHECK(rx[static_cast<std::size_t>(i)] == 0.0);
    CHECK(rx[0] == 3.5);

    CHECK_THROWS_AS(puncture<double>(llr, std::vector<int>{26}), ParameterError);
    CHECK_THROWS_AS(puncture_rate(13, 26, 26), ParameterError);
}

TEST_CASE("shortening rate arithmetic and saturated positions") {
    CHECK(shorten_rate(13, 26, 3).rate == Rational(10, 23));
    CHECK(shorten_rate(13, 26, 0).rate == Rational(1, 2));
    CHECK_THROWS_AS(shorten_rate(13, 26, 13), ParameterError);

    // re-assembling the info word inserts the known bits
    std::vector<std::uint8_t> reduced{1, 0};
    std::vector<int> pattern{0, 3};
    std::vector<std::uint8_t> fill{1, 1};
    std::vector<std::uint8_t> full = shorten(reduced, pattern, fill, 4);
    CHECK(full == std::vector<std::uint8_t>{1, 1, 0, 1});

    std::vector<double> llr(10, -1.0);
    apply_shortened_llrs(llr, std::vector<int>{0, 9}, std::vector<std::uint8_t>{0, 1}, 20.0);
    CHECK(llr[0] == 20.0);
    CHECK(llr[9] == -20.0);
    CHECK(llr[1] == -1.0);
}

TEST_CASE("alist round trip") {
    ParityCheckMatrix H = hamming74();
    const std::string text = save_alist(H);
    ParityCheckMatrix back = load_alist_text(text);
    CHECK(back.rows() == H.rows());
    CHECK(back.cols() == H.cols());
    CHECK(back.bits() == H.bits());

    // save(load(save)) is canonical
    CHECK(save_alist(load_alist_text(text)) == text);

    ParityCheckMatrix R = build_regular_ldpc(24, 3, 6, 2);
    CHECK(load_alist_text(save_alist(R)).bits() == R.bits());
}

TEST_CASE("alist tolerates zero padding and rejects bad indices") {
    // 2x3 matrix with rows (1,1,0), (0,1,1); neighbor lists zero-padded
    const std::string padded = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n";
    ParityCheckMatrix H = load_alist_text(padded);
    CHECK(H.at(0, 0) == 1);
    CHECK(H.at(0, 1) == 1);
    CHECK(H.at(0, 2) == 0);
    CHECK(H.at(1, 0) == 0);
    CHECK(H.at(1, 1) == 1);
    CHECK(H.at(1, 2) == 1);

    // variable index 8 in a 7-column code
    const std::string bad =
        "7 1\n1 7\n1 1 1 1 1 1 1\n7\n1\n1\n1\n1\n1\n1\n1\n1 2 3 4 5 6 8\n";
    CHECK_THROWS_AS(load_alist_text(bad), ParseError);
    try {
        load_alist_text(bad);
    } catch (const ParseError& e) {
        CHECK(e.line > 0);  // parse errors carry a line number
    }
}

TEST_CASE("protograph file parsing") {
    ProtographFile pf = load_protograph_text("2 3 4\n0 -1 2\n1 3 -1\n");
    CHECK(pf.base.rows == 2);
    CHECK(pf.base.cols == 3);
    CHECK(pf.lifting == 4);
    CHECK(pf.base.shift(0, 1) == -1);
    CHECK(pf.base.shift(1, 1) == 3);
    CHECK_THROWS_AS(load_protograph_text("2 3\n0 1 2\n"), ParseError);
}

TEST_CASE("exact rate identities for regular codes") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        ParityCheckMatrix H = build_regular_ldpc(30, 2, 6, seed);
        GeneratorMatrix G = derive_generator(H);
        CodeSpec spec;
        spec.n = 30;
        spec.k = G.k;
        if (G.k == 20) CHECK(spec.rate() == Rational(2, 3));  // full rank: r = 1 - v/c
        CHECK(spec.rate() == Rational(G.k, 30));
    }
}

TEST_CASE("randomized generator orthogonality") {
    Rng rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 12 + 6 * (trial % 4);
        ParityCheckMatrix H = build_regular_ldpc(n, 3, 6, 100 + static_cast<std::uint64_t>(trial));
        GeneratorMatrix G = derive_generator(H);
        CHECK(gh_zero(G, H));
        std::vector<std::uint8_t> info(static_cast<std::size_t>(G.k));
        for (int w = 0; w < 25; ++w) {
            for (auto& b : info) b = static_cast<std::uint8_t>(rng.bit());
            const std::vector<std::uint8_t> s = syndrome(H, encode(G, info));
            CHECK(std::all_of(s.begin(), s.end(), [](std::uint8_t x) { return x == 0; }));
        }
    }
}
