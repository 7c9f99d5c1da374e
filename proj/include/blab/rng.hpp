#pragma once

#include <array>
#include <cstdint>

namespace blab {

// Philox4x32-10 counter-based generator. Every draw is a pure function of
// (key, counter); there is no hidden state to share between threads.
using philox_ctr = std::array<std::uint32_t, 4>;
using philox_key = std::array<std::uint32_t, 2>;

philox_ctr philox4x32_10(philox_ctr ctr, philox_key key);

enum class Purpose : std::uint32_t {
    truth = 0,
    arm = 1,
    reward_noise = 2,
    background = 3,
    extra_observation = 4,
    auxiliary = 5,
};

// Identifies one random block inside an experiment.
struct StreamKey {
    std::uint32_t replication = 0;
    std::uint32_t user = 0;
    std::uint32_t step = 0;
    Purpose purpose = Purpose::truth;
};

// User index reserved for draws that belong to no user (background data).
inline constexpr std::uint32_t no_user = 0xffffffffu;

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    std::uint64_t seed() const {
        return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
    }

    philox_ctr block(const StreamKey& k) const;

    // Uniform on the open interval (0,1) with 52-bit resolution.
    double uniform(const StreamKey& k) const;

    // Standard normal (Box-Muller on the block's two uniforms).
    double normal(const StreamKey& k) const;

    // Both Box-Muller outputs of one block.
    std::array<double, 2> normal_pair(const StreamKey& k) const;

private:
    philox_key key_;
};

// Open-interval 52-bit uniform from two 32-bit words.
double to_unit_open(std::uint32_t hi, std::uint32_t lo);

} // namespace blab
