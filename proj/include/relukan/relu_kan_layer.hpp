#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relukan/matrix.hpp"
#include "relukan/rng.hpp"

namespace relukan {

enum class NormMode {
    kConstant,  // every basis scaled by r = 16 G^4 / (k+1)^4
    kDynamic,   // each basis scaled by 16 / (e - s)^4 of its own interval
};

const char* to_string(NormMode mode) noexcept;
NormMode norm_mode_from_string(const std::string& name);

// Minimum basis width kept by clamp_widths().
inline constexpr double kMinBasisWidth = 1e-4;

struct ReluKanConfig {
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    int grid = 5;  // G
    int span = 3;  // k
    bool trainable_endpoints = true;
    NormMode norm_mode = NormMode::kConstant;

    std::size_t n_basis() const noexcept { return static_cast<std::size_t>(grid + span); }
    // r = 16 G^4 / (k+1)^4
    double norm_constant() const noexcept;
    void validate() const;
    bool operator==(const ReluKanConfig&) const = default;
};

// [max(0, e-x) * max(0, x-s)]^2 * norm
double basis_eval(double x, double s, double e, double norm) noexcept;
// Same with norm = 16 / (e-s)^4; throws DegenerateBasisError if e <= s.
double basis_eval_dynamic(double x, double s, double e);

// Intermediates of the matrix pipeline for a batch of N samples. Row
// block [t*n_in, (t+1)*n_in) of A, B, D, F belongs to sample t, so for N = 1
// each is exactly the n_in × (G+k) matrix of the single-vector formulation.
struct ForwardCache {
    Matrix x;  // N × n_in
    Matrix A;  // ReLU(E - x)
    Matrix B;  // ReLU(x - S)
    Matrix D;  // sqrt(norm) · A ⊙ B
    Matrix F;  // D ⊙ D, F(i, j) = R_j(x_i)

    std::size_t batch() const noexcept { return x.rows(); }
};

struct ReluKanGrads {
    Matrix x;               // N × n_in
    std::vector<Matrix> W;  // n_out matrices, n_in × (G+k), summed over the batch
    Matrix S;               // zeros when endpoints are frozen
    Matrix E;
};

class ReluKanLayer {
public:
    // S(i, j) = (j-k)/G and E(i, j) = (j+1)/G for 0-based j;
    // W entries ~ normal(0, sqrt(2 / (n_in (G+k)))).
    static ReluKanLayer init(const ReluKanConfig& config, Rng& rng);

    ReluKanLayer(ReluKanConfig config, Matrix S, Matrix E, std::vector<Matrix> W);

    const ReluKanConfig& config() const noexcept { return config_; }
    const Matrix& S() const noexcept { return S_; }
    const Matrix& E() const noexcept { return E_; }
    const std::vector<Matrix>& W() const noexcept { return W_; }
    Matrix& S() noexcept { return S_; }
    Matrix& E() noexcept { return E_; }
    std::vector<Matrix>& W() noexcept { return W_; }

    // Single input vector.
    std::pair<std::vector<double>, ForwardCache> forward(std::span<const double> x) const;
    ReluKanGrads backward(const ForwardCache& cache, std::span<const double> grad_y) const;

    // Batched along rows: X is N × n_in, result N × n_out. Each row gives
    // exactly the single-vector result.
    Matrix forward_batch(const Matrix& X, ForwardCache* cache) const;
    ReluKanGrads backward_batch(const ForwardCache& cache, const Matrix& grad_Y) const;

    // Repairs every interval narrower than kMinBasisWidth (including crossed
    // ones) to exactly that width around its midpoint.
    void clamp_widths() noexcept;

    std::size_t parameter_count() const noexcept;

private:
    void check_cache(const ForwardCache& cache) const;

    ReluKanConfig config_;
    Matrix S_;
    Matrix E_;
    std::vector<Matrix> W_;
};

}  // namespace relukan
