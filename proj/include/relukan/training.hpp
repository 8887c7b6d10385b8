#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "relukan/matrix.hpp"
#include "relukan/network.hpp"
#include "relukan/targets.hpp"

namespace relukan {

// Mean of squared differences. Throws ParameterError on empty or mismatched input.
double mse(std::span<const double> pred, std::span<const double> target);
// d mse / d pred = 2 (pred - target) / N
std::vector<double> mse_gradient(std::span<const double> pred, std::span<const double> target);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a ParamView. Slots marked non-trainable are left alone.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(std::span<const ParamSlot> params, std::span<const Matrix> grads);
    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// One optimizer update followed by the endpoint width repair.
void adam_step(Network& net, std::span<const Matrix> grads, Adam& adam);

// Test sets are drawn with seed + kTestSeedOffset.
inline constexpr std::uint64_t kTestSeedOffset = 1'000'003;

struct TrainConfig {
    AdamConfig adam;
    std::size_t iterations = 1000;
    std::uint64_t seed = 1;
    std::size_t train_samples = 1000;
    std::size_t test_samples = 1000;
};

struct RunReport {
    TrainConfig config;
    std::vector<double> loss_history;       // training MSE before each update
    std::vector<double> iteration_seconds;  // forward + backward + optimizer step
    double initial_train_mse = 0.0;
    double final_train_mse = 0.0;
    double final_test_mse = 0.0;
    double total_seconds = 0.0;
};

// Network output for every row of X as a flat vector (single-output networks).
std::vector<double> predict(const Network& net, const Matrix& X);

// Full-batch Adam on `train_set`; final metrics on `test_set`. Throws
// NumericalError naming the iteration if the loss becomes non-finite.
RunReport train(Network& net, const Dataset& train_set, const Dataset& test_set,
                const TrainConfig& config);
// Test set: make_dataset(train_set.target, config.test_samples, train_set.seed + kTestSeedOffset).
RunReport train(Network& net, const Dataset& train_set, const TrainConfig& config);

struct ForgettingConfig {
    PeaksTarget target;
    std::size_t samples_per_phase = 300;
    std::size_t iterations_per_phase = 500;
    std::size_t grid_points = 1000;
    AdamConfig adam;
    std::uint64_t seed = 1;
};

struct ForgettingReport {
    std::vector<RunReport> phases;
    std::vector<double> grid_x;                     // (j + 0.5) / grid_points
    std::vector<double> grid_target;
    std::vector<std::vector<double>> predictions;   // one grid per phase
    Matrix rmse;                                    // phase × region
};

// Phase p trains only on x in [p/P, (p+1)/P); after each phase the RMSE on
// every region is measured over the fixed grid.
ForgettingReport forgetting_protocol(Network& net, const ForgettingConfig& config);

}  // namespace relukan
