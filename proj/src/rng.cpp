#include "relukan/rng.hpp"

#include <cmath>
#include <numbers>

#include "relukan/errors.hpp"

namespace relukan {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::uint64_t mix = seed;
    std::uint64_t key = splitmix64(mix);
    std::uint64_t stream_mix = stream ^ 0xD1B54A32D192ED03ULL;
    key ^= splitmix64(stream_mix);
    for (auto& word : s_) word = splitmix64(key);
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) noexcept {
    const double v = lo + (hi - lo) * uniform01();
    return v < hi ? v : std::nextafter(hi, lo);
}

double Rng::normal(double mean, double std) {
    if (spare_normal_) {
        double z = *spare_normal_;
        spare_normal_.reset();
        return mean + std * z;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    return mean + std * radius * std::cos(angle);
}

Matrix rng_uniform(Rng& rng, double lo, double hi, std::size_t rows, std::size_t cols) {
    if (!(lo < hi)) throw ParameterError("rng_uniform: require lo < hi");
    Matrix out(rows, cols);
    for (double& v : out.data()) v = rng.uniform(lo, hi);
    return out;
}

Matrix rng_normal(Rng& rng, double mean, double std, std::size_t rows, std::size_t cols) {
    if (!(std > 0.0)) throw ParameterError("rng_normal: require std > 0");
    Matrix out(rows, cols);
    for (double& v : out.data()) v = rng.normal(mean, std);
    return out;
}

}  // namespace relukan
