#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "relukan/matrix.hpp"
#include "relukan/rng.hpp"

namespace relukan {

// Uniform knot vector over [0, 1] with `order` extra cells on each side:
// knots t_m = (m - k)/G for m = 0..G+2k, giving G+k bases of degree k.
// Basis i (0-based) is supported on [(i-k)/G, (i+1)/G] and centred at
// (2i+1-k)/(2G). The bases sum to one on [0, 1).
class BsplineGrid {
public:
    BsplineGrid(int grid, int order);

    int grid() const noexcept { return grid_; }
    int order() const noexcept { return order_; }
    std::size_t n_basis() const noexcept { return static_cast<std::size_t>(grid_ + order_); }
    double step() const noexcept { return 1.0 / grid_; }
    double center(std::size_t i) const noexcept;
    std::span<const double> knots() const noexcept { return knots_; }

    // Cox-de Boor recursion over the whole knot vector. Intervals are
    // half-open [t_m, t_{m+1}), so values at a knot are right limits.
    std::vector<double> basis(double x) const;
    std::vector<double> basis_derivative(double x) const;
    // Writes B_i(x) and dB_i/dx into the two spans (each n_basis long).
    void evaluate(double x, std::span<double> values, std::span<double> derivatives) const;

private:
    int grid_;
    int order_;
    std::vector<double> knots_;
};

struct BsplineKanConfig {
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    int grid = 5;
    int order = 3;

    void validate() const;
    bool operator==(const BsplineKanConfig&) const = default;
};

struct BsplineCache {
    Matrix x;       // N × n_in
    Matrix basis;   // (N·n_in) × (G+k)
    Matrix dbasis;  // (N·n_in) × (G+k)

    std::size_t batch() const noexcept { return x.rows(); }
};

struct BsplineGrads {
    Matrix x;                   // N × n_in
    std::vector<Matrix> coef;   // n_out matrices, n_in × (G+k)
    Matrix base_weight;         // n_out × n_in
    Matrix spline_weight;       // n_out × n_in
};

double silu(double x) noexcept;
double silu_derivative(double x) noexcept;

// Layer of edge functions phi_{c,i}(x) = w_b x·sigmoid(x) + w_s Σ_j c_j B_j(x),
// with y_c = Σ_i phi_{c,i}(x_i).
class BsplineKanLayer {
public:
    // coef ~ normal(0, 0.1); w_b = w_s = 1.
    static BsplineKanLayer init(const BsplineKanConfig& config, Rng& rng);

    BsplineKanLayer(BsplineKanConfig config, std::vector<Matrix> coef, Matrix base_weight,
                    Matrix spline_weight);

    const BsplineKanConfig& config() const noexcept { return config_; }
    const BsplineGrid& grid() const noexcept { return grid_; }
    const std::vector<Matrix>& coef() const noexcept { return coef_; }
    const Matrix& base_weight() const noexcept { return base_weight_; }
    const Matrix& spline_weight() const noexcept { return spline_weight_; }
    std::vector<Matrix>& coef() noexcept { return coef_; }
    Matrix& base_weight() noexcept { return base_weight_; }
    Matrix& spline_weight() noexcept { return spline_weight_; }

    // Edge (out, in) evaluated at a scalar.
    double edge_forward(std::size_t out, std::size_t in, double x) const;

    std::pair<std::vector<double>, BsplineCache> forward(std::span<const double> x) const;
    BsplineGrads backward(const BsplineCache& cache, std::span<const double> grad_y) const;

    Matrix forward_batch(const Matrix& X, BsplineCache* cache) const;
    BsplineGrads backward_batch(const BsplineCache& cache, const Matrix& grad_Y) const;

    std::size_t parameter_count() const noexcept;

private:
    BsplineKanConfig config_;
    BsplineGrid grid_;
    std::vector<Matrix> coef_;
    Matrix base_weight_;
    Matrix spline_weight_;
};

}  // namespace relukan
