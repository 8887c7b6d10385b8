#include "relukan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "relukan/errors.hpp"
#include "relukan/rng.hpp"

namespace relukan {

double mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty() || pred.size() != target.size()) {
        throw ParameterError("mse: need equal, nonzero lengths (got " + std::to_string(pred.size()) +
                             " and " + std::to_string(target.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_gradient(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty() || pred.size() != target.size()) {
        throw ParameterError("mse_gradient: need equal, nonzero lengths");
    }
    std::vector<double> g(pred.size());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

void Adam::step(std::span<const ParamSlot> params, std::span<const Matrix> grads) {
    if (params.size() != grads.size()) {
        throw ContractError("Adam::step: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(grads.size()) + " gradients");
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            m_[p].assign(params[p].value.size(), 0.0);
            v_[p].assign(params[p].value.size(), 0.0);
        }
    } else if (m_.size() != params.size()) {
        throw ContractError("Adam::step: parameter list changed between steps");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].trainable) continue;
        auto value = params[p].value;
        auto g = grads[p].data();
        if (g.size() != value.size() || m_[p].size() != value.size()) {
            throw ContractError("Adam::step: gradient size mismatch for " + params[p].name);
        }
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

void adam_step(Network& net, std::span<const Matrix> grads, Adam& adam) {
    const auto params = net.param_view();
    adam.step(params, grads);
    net.clamp_widths();
}

std::vector<double> predict(const Network& net, const Matrix& X) {
    if (net.output_width() != 1) throw ParameterError("predict: network must have a single output");
    Matrix Y = net.forward_batch(X, nullptr);
    auto d = Y.data();
    return {d.begin(), d.end()};
}

namespace {

void check_arity(const Network& net, const Dataset& ds) {
    if (net.input_width() != ds.inputs.cols()) {
        throw ParameterError("train: network input width " + std::to_string(net.input_width()) +
                             " does not match dataset arity " + std::to_string(ds.inputs.cols()));
    }
    if (net.output_width() != 1) throw ParameterError("train: network must have a single output");
}

}  // namespace

RunReport train(Network& net, const Dataset& train_set, const Dataset& test_set,
                const TrainConfig& config) {
    check_arity(net, train_set);
    check_arity(net, test_set);
    using clock = std::chrono::steady_clock;

    RunReport report;
    report.config = config;
    report.loss_history.reserve(config.iterations);
    report.iteration_seconds.reserve(config.iterations);

    const auto target = train_set.targets.data();
    Adam adam(config.adam);
    NetworkCache cache;
    Matrix grad_Y(train_set.size(), 1);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto t0 = clock::now();
        Matrix Y = net.forward_batch(train_set.inputs, &cache);
        const double loss = mse(Y.data(), target);
        if (!std::isfinite(loss)) {
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(it + 1),
                                 static_cast<long>(it + 1));
        }
        const auto g = mse_gradient(Y.data(), target);
        std::copy(g.begin(), g.end(), grad_Y.data().begin());
        NetworkGrads grads = net.backward_batch(cache, grad_Y);
        adam_step(net, grads.params, adam);
        const auto t1 = clock::now();
        report.loss_history.push_back(loss);
        report.iteration_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    for (double s : report.iteration_seconds) report.total_seconds += s;

    report.final_train_mse = mse(predict(net, train_set.inputs), target);
    report.initial_train_mse =
        report.loss_history.empty() ? report.final_train_mse : report.loss_history.front();
    report.final_test_mse = mse(predict(net, test_set.inputs), test_set.targets.data());
    if (!std::isfinite(report.final_train_mse) || !std::isfinite(report.final_test_mse)) {
        throw NumericalError("train: non-finite final metrics",
                             static_cast<long>(config.iterations));
    }
    return report;
}

RunReport train(Network& net, const Dataset& train_set, const TrainConfig& config) {
    const Dataset test_set =
        make_dataset(train_set.target, config.test_samples, train_set.seed + kTestSeedOffset);
    return train(net, train_set, test_set, config);
}

namespace {

constexpr std::uint64_t kPhaseStreamBase = 0x50484153;  // "PHAS"

Dataset peaks_dataset(const PeaksTarget& target, std::size_t n, std::uint64_t seed,
                      std::uint64_t stream, double lo, double hi) {
    Rng rng(seed, stream);
    Dataset ds{TargetId::kForget5, seed, rng_uniform(rng, lo, hi, n, 1), Matrix(n, 1)};
    for (std::size_t t = 0; t < n; ++t) ds.targets(t, 0) = target(ds.inputs(t, 0));
    return ds;
}

}  // namespace

ForgettingReport forgetting_protocol(Network& net, const ForgettingConfig& config) {
    if (net.input_width() != 1 || net.output_width() != 1) {
        throw ParameterError("forgetting_protocol: network must map 1 input to 1 output");
    }
    const std::size_t regions = config.target.peaks;
    if (regions == 0) throw ParameterError("forgetting_protocol: need at least one peak");
    if (config.grid_points < regions) {
        throw ParameterError("forgetting_protocol: grid must have a point in every region");
    }

    ForgettingReport report;
    const std::size_t n_grid = config.grid_points;
    Matrix grid(n_grid, 1);
    std::vector<std::size_t> region_of(n_grid);
    for (std::size_t j = 0; j < n_grid; ++j) {
        const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(n_grid);
        grid(j, 0) = x;
        report.grid_x.push_back(x);
        report.grid_target.push_back(config.target(x));
        region_of[j] = std::min(regions - 1, static_cast<std::size_t>(x * static_cast<double>(regions)));
    }
    // Whole-domain test set so every phase report carries a global metric.
    const Dataset test_set = peaks_dataset(config.target, n_grid, config.seed + kTestSeedOffset,
                                           kPhaseStreamBase, 0.0, 1.0);

    TrainConfig tc;
    tc.adam = config.adam;
    tc.iterations = config.iterations_per_phase;
    tc.seed = config.seed;
    tc.train_samples = config.samples_per_phase;
    tc.test_samples = n_grid;

    report.rmse = Matrix(regions, regions);
    for (std::size_t p = 0; p < regions; ++p) {
        const double lo = static_cast<double>(p) / static_cast<double>(regions);
        const double hi = static_cast<double>(p + 1) / static_cast<double>(regions);
        const Dataset phase_set = peaks_dataset(config.target, config.samples_per_phase, config.seed,
                                                kPhaseStreamBase + 1 + p, lo, hi);
        report.phases.push_back(train(net, phase_set, test_set, tc));

        auto pred = predict(net, grid);
        std::vector<double> sq(regions, 0.0);
        std::vector<std::size_t> count(regions, 0);
        for (std::size_t j = 0; j < n_grid; ++j) {
            const double d = pred[j] - report.grid_target[j];
            sq[region_of[j]] += d * d;
            ++count[region_of[j]];
        }
        for (std::size_t r = 0; r < regions; ++r) {
            report.rmse(p, r) = std::sqrt(sq[r] / static_cast<double>(count[r]));
        }
        report.predictions.push_back(std::move(pred));
    }
    return report;
}

}  // namespace relukan
