#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace nbmc {

/// One SplitMix64 output step (Steele, Lea, Flood 2014). Used to expand seeds
/// and to mix seed components.
std::uint64_t splitmix64(std::uint64_t& state);

/// FNV-1a 64-bit hash, used to turn string tags into seed components.
std::uint64_t fnv1a64(std::string_view text);

/// Order-sensitive mix of seed components into one 64-bit seed. The same
/// components always give the same seed on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts);

/// xoshiro256** 1.0 (Blackman and Vigna), state expanded from a 64-bit seed
/// with SplitMix64. Satisfies UniformRandomBitGenerator, but the samplers below
/// are written out explicitly so streams do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, bound), unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal, Marsaglia polar method.
    double normal();
    /// Gamma(shape, scale), Marsaglia-Tsang squeeze; shape < 1 via the
    /// U^(1/shape) boost.
    double gamma(double shape, double scale);
    /// Poisson(mean): sequential inversion below mean 10, Hormann's PTRS above.
    std::int64_t poisson(double mean);

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace nbmc
