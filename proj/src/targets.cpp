#include "relukan/targets.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "relukan/errors.hpp"
#include "relukan/rng.hpp"

namespace relukan {

namespace {

constexpr double kPi = std::numbers::pi;

// Data draws use their own stream so they never alias model initialisation.
constexpr std::uint64_t kDataStream = 0x44415441;  // "DATA"

constexpr std::array<TargetFunction, 12> kTargets{{
    {TargetId::kFitF1, "fit-f1", "sin(pi x)", 1},
    {TargetId::kFitF2, "fit-f2", "sin(5 pi x) + x", 1},
    {TargetId::kFitF3, "fit-f3", "exp(x)", 1},
    {TargetId::kFitF4, "fit-f4", "sin(pi x1 + pi x2)", 2},
    {TargetId::kFitF5, "fit-f5", "exp(sin(pi x1) + x2^2)", 2},
    {TargetId::kFitF6, "fit-f6", "exp(sin(pi x1^2 + pi x2^2) + sin(pi x3^2 + pi x4^2))", 4},
    {TargetId::kSpeedF1, "speed-f1", "sin(pi x)", 1},
    {TargetId::kSpeedF2, "speed-f2", "sin(pi x1 + pi x2)", 2},
    {TargetId::kSpeedF3, "speed-f3", "arctan(x1 + x1 x2 + x2^2)", 2},
    {TargetId::kSpeedF4, "speed-f4", "exp(sin(pi x1) + x2^2)", 2},
    {TargetId::kSpeedF5, "speed-f5", "exp(sin(x1^2 + x2^2) + sin(x3^2 + x4^2))", 4},
    {TargetId::kForget5, "forget5", "sum_i exp(-(x - (2i-1)/10)^2 / (2 * 0.04^2)), i = 1..5", 1},
}};

int short_index(const std::string& name, int count) {
    if (name.size() == 2 && name[0] == 'f' && name[1] >= '1' && name[1] < '1' + count) {
        return name[1] - '1';
    }
    throw ParameterError("unknown function id '" + name + "' (expected f1..f" +
                         std::to_string(count) + ")");
}

}  // namespace

double PeaksTarget::operator()(double x) const noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < peaks; ++i) {
        const double d = x - center(i);
        sum += std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return sum;
}

const TargetFunction& target_info(TargetId id) { return kTargets[static_cast<std::size_t>(id)]; }

double evaluate_target(TargetId id, std::span<const double> x) {
    if (x.size() != target_info(id).arity) {
        throw DimensionError(std::string(target_info(id).name) + ": expected " +
                             std::to_string(target_info(id).arity) + " inputs, got " +
                             std::to_string(x.size()));
    }
    switch (id) {
        case TargetId::kFitF1:
        case TargetId::kSpeedF1:
            return std::sin(kPi * x[0]);
        case TargetId::kFitF2:
            return std::sin(5.0 * kPi * x[0]) + x[0];
        case TargetId::kFitF3:
            return std::exp(x[0]);
        case TargetId::kFitF4:
        case TargetId::kSpeedF2:
            return std::sin(kPi * x[0] + kPi * x[1]);
        case TargetId::kFitF5:
        case TargetId::kSpeedF4:
            return std::exp(std::sin(kPi * x[0]) + x[1] * x[1]);
        case TargetId::kFitF6:
            return std::exp(std::sin(kPi * x[0] * x[0] + kPi * x[1] * x[1]) +
                            std::sin(kPi * x[2] * x[2] + kPi * x[3] * x[3]));
        case TargetId::kSpeedF3:
            return std::atan(x[0] + x[0] * x[1] + x[1] * x[1]);
        case TargetId::kSpeedF5:
            return std::exp(std::sin(x[0] * x[0] + x[1] * x[1]) + std::sin(x[2] * x[2] + x[3] * x[3]));
        case TargetId::kForget5:
            return PeaksTarget{}(x[0]);
    }
    throw ParameterError("evaluate_target: unknown target");
}

TargetId fit_target(const std::string& short_name) {
    return static_cast<TargetId>(static_cast<int>(TargetId::kFitF1) + short_index(short_name, 6));
}

TargetId speed_target(const std::string& short_name) {
    return static_cast<TargetId>(static_cast<int>(TargetId::kSpeedF1) + short_index(short_name, 5));
}

std::vector<TargetId> fit_targets() {
    return {TargetId::kFitF1, TargetId::kFitF2, TargetId::kFitF3,
            TargetId::kFitF4, TargetId::kFitF5, TargetId::kFitF6};
}

std::vector<TargetId> speed_targets() {
    return {TargetId::kSpeedF1, TargetId::kSpeedF2, TargetId::kSpeedF3, TargetId::kSpeedF4,
            TargetId::kSpeedF5};
}

namespace {

Dataset sample(TargetId target, std::size_t n, std::uint64_t seed, double lo, double hi) {
    if (n == 0) throw ParameterError("make_dataset: need at least one sample");
    const std::size_t arity = target_info(target).arity;
    Rng rng(seed, kDataStream);
    Dataset ds{target, seed, rng_uniform(rng, lo, hi, n, arity), Matrix(n, 1)};
    for (std::size_t t = 0; t < n; ++t) ds.targets(t, 0) = evaluate_target(target, ds.inputs.row(t));
    return ds;
}

}  // namespace

Dataset make_dataset(TargetId target, std::size_t n, std::uint64_t seed) {
    return sample(target, n, seed, 0.0, 1.0);
}

Dataset make_dataset_in_range(TargetId target, std::size_t n, std::uint64_t seed, double lo,
                              double hi) {
    if (target_info(target).arity != 1) {
        throw ParameterError("make_dataset_in_range: target must be univariate");
    }
    return sample(target, n, seed, lo, hi);
}

}  // namespace relukan
