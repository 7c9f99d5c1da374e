#include "blab/rng.hpp"

#include <cmath>
#include <numbers>

namespace blab {

namespace {

constexpr std::uint32_t mul0 = 0xD2511F53u;
constexpr std::uint32_t mul1 = 0xCD9E8D57u;
constexpr std::uint32_t weyl0 = 0x9E3779B9u;
constexpr std::uint32_t weyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

} // namespace

philox_ctr philox4x32_10(philox_ctr ctr, philox_key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += weyl0;
            key[1] += weyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(mul0, ctr[0], hi0, lo0);
        mulhilo(mul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 6) << 26) | (lo >> 6);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

philox_ctr CounterRng::block(const StreamKey& k) const {
    return philox4x32_10({k.replication, k.user, k.step, static_cast<std::uint32_t>(k.purpose)}, key_);
}

double CounterRng::uniform(const StreamKey& k) const {
    const auto b = block(k);
    return to_unit_open(b[0], b[1]);
}

std::array<double, 2> CounterRng::normal_pair(const StreamKey& k) const {
    const auto b = block(k);
    const double u1 = to_unit_open(b[0], b[1]);
    const double u2 = to_unit_open(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

double CounterRng::normal(const StreamKey& k) const {
    return normal_pair(k)[0];
}

} // namespace blab
