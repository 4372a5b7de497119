// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include "ecctlin/errors.hpp"

namespace ecctlin {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
    if (bound == 0) throw ParameterError("uniform_int: bound must be nonzero");
    // rejection sampling on the top multiple of bound
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

int Rng::bit() { return static_cast<int>(next_u64() >> 63); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

Rng Rng::fork(std::uint64_t stream_index) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_index + 1)));
}

void Rng::save_state(std::ostream& os) const {
    os << seed_ << ' ' << engine_ << '\n';
    os << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(spare_));
        std::memcpy(&bits, &spare_, sizeof(bits));
        os << ' ' << bits;
    }
    os << '\n';
}

void Rng::load_state(std::istream& is) {
    int flag = 0;
    if (!(is >> seed_ >> engine_ >> flag)) throw IoError("rng: malformed state");
    has_spare_ = flag != 0;
    spare_ = 0.0;
    if (has_spare_) {
        std::uint64_t bits = 0;
        if (!(is >> bits)) throw IoError("rng: malformed spare value");
        std::memcpy(&spare_, &bits, sizeof(spare_));
    }
}

}  // namespace ecctlin
