#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "relukan/matrix.hpp"

namespace relukan {

// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
//
// A generator is identified by (seed, stream). Distinct stream ids give
// independent sequences from the same seed; networks use stream = layer index
// so that appending a layer leaves earlier layers' draws untouched.
//
// Uniform doubles use the top 53 bits of each output; normals use the
// Box-Muller transform and cache the second value of each pair. Only integer
// arithmetic and std::log/std::sqrt/std::cos/std::sin are involved.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1).
    double uniform01() noexcept;
    // Uniform in [lo, hi); a product that rounds up to hi is pulled back below it.
    double uniform(double lo, double hi) noexcept;
    double normal(double mean, double std);

    // New generator on a sub-stream derived from this generator's identity.
    Rng substream(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x100000001B3ULL + stream + 1); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

private:
    std::array<std::uint64_t, 4> s_{};
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::optional<double> spare_normal_;
};

// Throws ParameterError unless lo < hi.
Matrix rng_uniform(Rng& rng, double lo, double hi, std::size_t rows, std::size_t cols);
// Throws ParameterError unless std > 0.
Matrix rng_normal(Rng& rng, double mean, double std, std::size_t rows, std::size_t cols);

}  // namespace relukan
