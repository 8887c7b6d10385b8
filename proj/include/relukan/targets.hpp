#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relukan/matrix.hpp"

namespace relukan {

// Fitting-accuracy set (f1..f6), training-speed set (f1..f5) and the
// five-peak target of the forgetting experiment.
enum class TargetId {
    kFitF1, kFitF2, kFitF3, kFitF4, kFitF5, kFitF6,
    kSpeedF1, kSpeedF2, kSpeedF3, kSpeedF4, kSpeedF5,
    kForget5,
};

struct TargetFunction {
    TargetId id;
    const char* name;     // "fit-f1", "speed-f5", "forget5"
    const char* formula;  // human readable closed form
    std::size_t arity;
};

const TargetFunction& target_info(TargetId id);
double evaluate_target(TargetId id, std::span<const double> x);

// "f1".."f6" in the fitting set.
TargetId fit_target(const std::string& short_name);
// "f1".."f5" in the speed set.
TargetId speed_target(const std::string& short_name);
std::vector<TargetId> fit_targets();
std::vector<TargetId> speed_targets();

// Sum of `peaks` Gaussian bumps centred at (2i-1)/(2·peaks), i = 1..peaks.
struct PeaksTarget {
    std::size_t peaks = 5;
    double sigma = 0.04;

    double center(std::size_t i) const noexcept {  // 0-based
        return (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(peaks));
    }
    double operator()(double x) const noexcept;
};

struct Dataset {
    TargetId target;
    std::uint64_t seed = 0;
    Matrix inputs;   // N × arity
    Matrix targets;  // N × 1

    std::size_t size() const noexcept { return inputs.rows(); }
};

// Inputs i.i.d. uniform on [0, 1]^arity; bit-exact given (target, n, seed).
Dataset make_dataset(TargetId target, std::size_t n, std::uint64_t seed);
// Arity-1 targets only; inputs uniform on [lo, hi).
Dataset make_dataset_in_range(TargetId target, std::size_t n, std::uint64_t seed, double lo,
                              double hi);

}  // namespace relukan
