#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace relukan {

// Central finite-difference checks of every analytic partial derivative.
struct GradcheckOptions {
    std::uint64_t seed = 1;
    std::size_t probes = 100;   // per suite
    double step = 1e-6;         // central difference h
    double tolerance = 1e-4;    // max accepted relative error
    double kink_margin = 1e-3;  // min distance of any basis input from s/e or a knot
    // Test hook: negate the analytic grad_S before comparison.
    bool flip_grad_s_sign = false;
};

// |a - n| / max(|a|, |n|, floor). Each probe uses
// floor = max(kGradcheckScaleFloor, kGradcheckProbeScale * max |analytic partial of the probe|).
inline constexpr double kGradcheckScaleFloor = 1e-6;
inline constexpr double kGradcheckProbeScale = 1e-3;
double gradcheck_relative_error(double analytic, double numeric,
                                double floor = kGradcheckScaleFloor) noexcept;

struct GradcheckGroup {
    std::string suite;  // relukan-constant, relukan-dynamic, bspline, network-relukan2, network-bspline
    std::string group;  // W, S, E, x, coef, w_b, w_s, or a network slot family
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

struct GradcheckReport {
    std::vector<GradcheckGroup> groups;
    double tolerance = 0.0;
    double seconds = 0.0;

    bool passed() const noexcept;
};

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace relukan
