#include "relukan/bspline_layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relukan/errors.hpp"

namespace relukan {

BsplineGrid::BsplineGrid(int grid, int order) : grid_(grid), order_(order) {
    if (grid < 1) throw ParameterError("BsplineGrid: grid G must be >= 1");
    if (order < 0) throw ParameterError("BsplineGrid: order k must be >= 0");
    const int count = grid + 2 * order + 1;
    knots_.resize(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        knots_[static_cast<std::size_t>(m)] = static_cast<double>(m - order) / grid;
    }
}

double BsplineGrid::center(std::size_t i) const noexcept {
    return (2.0 * static_cast<double>(i) + 1.0 - order_) / (2.0 * grid_);
}

void BsplineGrid::evaluate(double x, std::span<double> values, std::span<double> derivatives) const {
    thread_local std::vector<double> level;
    const std::size_t intervals = knots_.size() - 1;
    level.assign(intervals, 0.0);
    const auto& t = knots_;
    for (std::size_t m = 0; m < intervals; ++m) {
        level[m] = (t[m] <= x && x < t[m + 1]) ? 1.0 : 0.0;
    }
    std::fill(derivatives.begin(), derivatives.end(), 0.0);
    for (int p = 1; p <= order_; ++p) {
        const std::size_t count = intervals - static_cast<std::size_t>(p);
        if (p == order_) {
            // dB_{i,k}/dx = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}
            for (std::size_t i = 0; i < count; ++i) {
                derivatives[i] = p / (t[i + p] - t[i]) * level[i] -
                                 p / (t[i + p + 1] - t[i + 1]) * level[i + 1];
            }
        }
        for (std::size_t i = 0; i < count; ++i) {
            const double left = (x - t[i]) / (t[i + p] - t[i]) * level[i];
            const double right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * level[i + 1];
            level[i] = left + right;
        }
    }
    std::copy_n(level.begin(), n_basis(), values.begin());
}

std::vector<double> BsplineGrid::basis(double x) const {
    std::vector<double> values(n_basis());
    std::vector<double> derivatives(n_basis());
    evaluate(x, values, derivatives);
    return values;
}

std::vector<double> BsplineGrid::basis_derivative(double x) const {
    std::vector<double> values(n_basis());
    std::vector<double> derivatives(n_basis());
    evaluate(x, values, derivatives);
    return derivatives;
}

void BsplineKanConfig::validate() const {
    if (n_in == 0 || n_out == 0) throw ParameterError("BsplineKanConfig: n_in and n_out must be >= 1");
    if (grid < 1) throw ParameterError("BsplineKanConfig: grid G must be >= 1");
    if (order < 0) throw ParameterError("BsplineKanConfig: order k must be >= 0");
}

double silu(double x) noexcept { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) noexcept {
    const double sig = 1.0 / (1.0 + std::exp(-x));
    return sig * (1.0 + x * (1.0 - sig));
}

BsplineKanLayer BsplineKanLayer::init(const BsplineKanConfig& config, Rng& rng) {
    config.validate();
    const std::size_t nb = static_cast<std::size_t>(config.grid + config.order);
    std::vector<Matrix> coef;
    coef.reserve(config.n_out);
    for (std::size_t c = 0; c < config.n_out; ++c) {
        coef.push_back(rng_normal(rng, 0.0, 0.1, config.n_in, nb));
    }
    return BsplineKanLayer(config, std::move(coef), Matrix::ones(config.n_out, config.n_in),
                           Matrix::ones(config.n_out, config.n_in));
}

BsplineKanLayer::BsplineKanLayer(BsplineKanConfig config, std::vector<Matrix> coef,
                                 Matrix base_weight, Matrix spline_weight)
    : config_(config),
      grid_(config.grid, config.order),
      coef_(std::move(coef)),
      base_weight_(std::move(base_weight)),
      spline_weight_(std::move(spline_weight)) {
    config_.validate();
    if (coef_.size() != config_.n_out) {
        throw DimensionError("BsplineKanLayer: expected " + std::to_string(config_.n_out) +
                             " coefficient matrices, got " + std::to_string(coef_.size()));
    }
    const Matrix per_edge(config_.n_in, grid_.n_basis());
    for (const auto& c : coef_) require_same_shape(c, per_edge, "BsplineKanLayer coef");
    const Matrix edges(config_.n_out, config_.n_in);
    require_same_shape(base_weight_, edges, "BsplineKanLayer base_weight");
    require_same_shape(spline_weight_, edges, "BsplineKanLayer spline_weight");
}

double BsplineKanLayer::edge_forward(std::size_t out, std::size_t in, double x) const {
    if (out >= config_.n_out || in >= config_.n_in) {
        throw DimensionError("BsplineKanLayer::edge_forward: edge index out of range");
    }
    const auto b = grid_.basis(x);
    const auto c = coef_[out].row(in);
    double spline = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) spline += c[j] * b[j];
    return base_weight_(out, in) * silu(x) + spline_weight_(out, in) * spline;
}

Matrix BsplineKanLayer::forward_batch(const Matrix& X, BsplineCache* cache) const {
    const std::size_t n_in = config_.n_in;
    const std::size_t nb = grid_.n_basis();
    if (X.cols() != n_in) {
        throw DimensionError("BsplineKanLayer::forward: input has " + std::to_string(X.cols()) +
                             " columns, layer expects " + std::to_string(n_in));
    }
    const std::size_t batch = X.rows();
    BsplineCache local;
    BsplineCache& c = cache ? *cache : local;
    c.x = X;
    c.basis.reshape_for_overwrite(batch * n_in, nb);
    c.dbasis.reshape_for_overwrite(batch * n_in, nb);

    Matrix Y(batch, config_.n_out);
    for (std::size_t t = 0; t < batch; ++t) {
        for (std::size_t i = 0; i < n_in; ++i) {
            const std::size_t r = t * n_in + i;
            const double xi = X(t, i);
            grid_.evaluate(xi, c.basis.row(r), c.dbasis.row(r));
            const double base = silu(xi);
            auto b = c.basis.row(r);
            for (std::size_t out = 0; out < config_.n_out; ++out) {
                auto coef = coef_[out].row(i);
                double spline = 0.0;
                for (std::size_t j = 0; j < nb; ++j) spline += coef[j] * b[j];
                Y(t, out) += base_weight_(out, i) * base + spline_weight_(out, i) * spline;
            }
        }
    }
    return Y;
}

std::pair<std::vector<double>, BsplineCache> BsplineKanLayer::forward(std::span<const double> x) const {
    if (x.size() != config_.n_in) {
        throw DimensionError("BsplineKanLayer::forward: input length " + std::to_string(x.size()) +
                             ", layer expects " + std::to_string(config_.n_in));
    }
    BsplineCache cache;
    Matrix Y = forward_batch(Matrix::row_vector(x), &cache);
    auto y = Y.row(0);
    return {std::vector<double>(y.begin(), y.end()), std::move(cache)};
}

BsplineGrads BsplineKanLayer::backward_batch(const BsplineCache& cache, const Matrix& grad_Y) const {
    const std::size_t n_in = config_.n_in;
    const std::size_t nb = grid_.n_basis();
    const std::size_t batch = cache.batch();
    if (cache.x.cols() != n_in || cache.basis.rows() != batch * n_in || cache.basis.cols() != nb ||
        !cache.dbasis.same_shape(cache.basis)) {
        throw ContractError("BsplineKanLayer::backward: cache does not match layer shape");
    }
    if (grad_Y.rows() != batch || grad_Y.cols() != config_.n_out) {
        throw ContractError("BsplineKanLayer::backward: upstream gradient " + grad_Y.shape_string() +
                            " does not match batch");
    }
    BsplineGrads g;
    g.x = Matrix(batch, n_in);
    g.coef.assign(config_.n_out, Matrix(n_in, nb));
    g.base_weight = Matrix(config_.n_out, n_in);
    g.spline_weight = Matrix(config_.n_out, n_in);

    for (std::size_t t = 0; t < batch; ++t) {
        for (std::size_t i = 0; i < n_in; ++i) {
            const std::size_t r = t * n_in + i;
            const double xi = cache.x(t, i);
            const double base = silu(xi);
            const double dbase = silu_derivative(xi);
            auto b = cache.basis.row(r);
            auto db = cache.dbasis.row(r);
            double gx = 0.0;
            for (std::size_t out = 0; out < config_.n_out; ++out) {
                const double gy = grad_Y(t, out);
                if (gy == 0.0) continue;
                auto coef = coef_[out].row(i);
                auto gcoef = g.coef[out].row(i);
                const double ws = spline_weight_(out, i);
                double spline = 0.0;
                double dspline = 0.0;
                for (std::size_t j = 0; j < nb; ++j) {
                    spline += coef[j] * b[j];
                    dspline += coef[j] * db[j];
                    gcoef[j] += gy * ws * b[j];
                }
                g.base_weight(out, i) += gy * base;
                g.spline_weight(out, i) += gy * spline;
                gx += gy * (base_weight_(out, i) * dbase + ws * dspline);
            }
            g.x(t, i) = gx;
        }
    }
    return g;
}

BsplineGrads BsplineKanLayer::backward(const BsplineCache& cache, std::span<const double> grad_y) const {
    if (cache.batch() != 1) {
        throw ContractError("BsplineKanLayer::backward: single-vector backward given a batch cache");
    }
    return backward_batch(cache, Matrix::row_vector(grad_y));
}

std::size_t BsplineKanLayer::parameter_count() const noexcept {
    return config_.n_out * config_.n_in * (grid_.n_basis() + 2);
}

}  // namespace relukan
