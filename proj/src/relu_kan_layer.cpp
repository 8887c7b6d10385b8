#include "relukan/relu_kan_layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relukan/errors.hpp"

namespace relukan {

const char* to_string(NormMode mode) noexcept {
    return mode == NormMode::kConstant ? "constant" : "dynamic";
}

NormMode norm_mode_from_string(const std::string& name) {
    if (name == "constant") return NormMode::kConstant;
    if (name == "dynamic") return NormMode::kDynamic;
    throw ParameterError("unknown norm mode '" + name + "' (expected constant or dynamic)");
}

double ReluKanConfig::norm_constant() const noexcept {
    double g = grid;
    double k1 = span + 1.0;
    return 16.0 * (g * g * g * g) / (k1 * k1 * k1 * k1);
}

void ReluKanConfig::validate() const {
    if (n_in == 0 || n_out == 0) throw ParameterError("ReluKanConfig: n_in and n_out must be >= 1");
    if (grid < 1) throw ParameterError("ReluKanConfig: grid G must be >= 1");
    if (span < 0) throw ParameterError("ReluKanConfig: span k must be >= 0");
}

double basis_eval(double x, double s, double e, double norm) noexcept {
    double a = e - x > 0.0 ? e - x : 0.0;
    double b = x - s > 0.0 ? x - s : 0.0;
    double p = a * b;
    return p * p * norm;
}

double basis_eval_dynamic(double x, double s, double e) {
    double w = e - s;
    if (!(w > 0.0)) throw DegenerateBasisError("basis_eval: interval end must exceed start");
    return basis_eval(x, s, e, 16.0 / (w * w * w * w));
}

ReluKanLayer ReluKanLayer::init(const ReluKanConfig& config, Rng& rng) {
    config.validate();
    const std::size_t nb = config.n_basis();
    const double g = config.grid;
    Matrix S(config.n_in, nb);
    Matrix E(config.n_in, nb);
    for (std::size_t i = 0; i < config.n_in; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            // 1-based index j+1: s = (j+1-k-1)/G, e = (j+1)/G
            S(i, j) = (static_cast<double>(j) - config.span) / g;
            E(i, j) = (static_cast<double>(j) + 1.0) / g;
        }
    }
    const double sigma = std::sqrt(2.0 / static_cast<double>(config.n_in * nb));
    std::vector<Matrix> W;
    W.reserve(config.n_out);
    for (std::size_t c = 0; c < config.n_out; ++c) {
        W.push_back(rng_normal(rng, 0.0, sigma, config.n_in, nb));
    }
    return ReluKanLayer(config, std::move(S), std::move(E), std::move(W));
}

ReluKanLayer::ReluKanLayer(ReluKanConfig config, Matrix S, Matrix E, std::vector<Matrix> W)
    : config_(config), S_(std::move(S)), E_(std::move(E)), W_(std::move(W)) {
    config_.validate();
    const Matrix expected(config_.n_in, config_.n_basis());
    require_same_shape(S_, expected, "ReluKanLayer S");
    require_same_shape(E_, expected, "ReluKanLayer E");
    if (W_.size() != config_.n_out) {
        throw DimensionError("ReluKanLayer: expected " + std::to_string(config_.n_out) +
                             " weight matrices, got " + std::to_string(W_.size()));
    }
    for (const auto& w : W_) require_same_shape(w, expected, "ReluKanLayer W");
}

namespace {

// Per-entry pre-square scale: sqrt(r) for constant mode, 4/(e-s)^2 for dynamic.
Matrix pre_square_scale(const ReluKanConfig& config, const Matrix& S, const Matrix& E) {
    Matrix out(S.rows(), S.cols());
    if (config.norm_mode == NormMode::kConstant) {
        out.fill(std::sqrt(config.norm_constant()));
        return out;
    }
    auto s = S.data();
    auto e = E.data();
    auto dst = out.data();
    for (std::size_t n = 0; n < dst.size(); ++n) {
        double w = e[n] - s[n];
        if (!(w > 0.0)) {
            throw DegenerateBasisError("ReluKanLayer: basis " + std::to_string(n) +
                                       " has non-positive width under dynamic normalization");
        }
        dst[n] = 4.0 / (w * w);
    }
    return out;
}

}  // namespace

Matrix ReluKanLayer::forward_batch(const Matrix& X, ForwardCache* cache) const {
    const std::size_t n_in = config_.n_in;
    const std::size_t nb = config_.n_basis();
    if (X.cols() != n_in) {
        throw DimensionError("ReluKanLayer::forward: input has " + std::to_string(X.cols()) +
                             " columns, layer expects " + std::to_string(n_in));
    }
    const std::size_t batch = X.rows();
    const Matrix scale = pre_square_scale(config_, S_, E_);

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.x = X;
    c.A.reshape_for_overwrite(batch * n_in, nb);
    c.B.reshape_for_overwrite(batch * n_in, nb);
    c.D.reshape_for_overwrite(batch * n_in, nb);
    c.F.reshape_for_overwrite(batch * n_in, nb);

    Matrix Y(batch, config_.n_out);
    for (std::size_t t = 0; t < batch; ++t) {
        for (std::size_t i = 0; i < n_in; ++i) {
            const double xi = X(t, i);
            const std::size_t r = t * n_in + i;
            const double* __restrict s = S_.row(i).data();
            const double* __restrict e = E_.row(i).data();
            const double* __restrict sc = scale.row(i).data();
            double* __restrict A = c.A.row(r).data();
            double* __restrict B = c.B.row(r).data();
            double* __restrict D = c.D.row(r).data();
            double* __restrict F = c.F.row(r).data();
            for (std::size_t j = 0; j < nb; ++j) {
                const double a = std::max(e[j] - xi, 0.0);
                const double b = std::max(xi - s[j], 0.0);
                const double d = sc[j] * a * b;
                A[j] = a;
                B[j] = b;
                D[j] = d;
                F[j] = d * d;
            }
        }
        // y_c = <W^c, F_t>, accumulated row-major over the n_in × nb block.
        const double* __restrict block = c.F.data().data() + t * n_in * nb;
        for (std::size_t out = 0; out < config_.n_out; ++out) {
            const double* __restrict w = W_[out].data().data();
            double acc = 0.0;
            for (std::size_t n = 0; n < n_in * nb; ++n) acc += w[n] * block[n];
            Y(t, out) = acc;
        }
    }
    return Y;
}

std::pair<std::vector<double>, ForwardCache> ReluKanLayer::forward(std::span<const double> x) const {
    if (x.size() != config_.n_in) {
        throw DimensionError("ReluKanLayer::forward: input length " + std::to_string(x.size()) +
                             ", layer expects " + std::to_string(config_.n_in));
    }
    ForwardCache cache;
    Matrix Y = forward_batch(Matrix::row_vector(x), &cache);
    auto y = Y.row(0);
    return {std::vector<double>(y.begin(), y.end()), std::move(cache)};
}

void ReluKanLayer::check_cache(const ForwardCache& cache) const {
    const std::size_t rows = cache.x.rows() * config_.n_in;
    const std::size_t nb = config_.n_basis();
    auto ok = [&](const Matrix& m) { return m.rows() == rows && m.cols() == nb; };
    if (cache.x.cols() != config_.n_in || !ok(cache.A) || !ok(cache.B) || !ok(cache.D) ||
        !ok(cache.F)) {
        throw ContractError("ReluKanLayer::backward: cache does not match layer shape (x " +
                            cache.x.shape_string() + ", F " + cache.F.shape_string() + ")");
    }
}

ReluKanGrads ReluKanLayer::backward_batch(const ForwardCache& cache, const Matrix& grad_Y) const {
    check_cache(cache);
    const std::size_t batch = cache.batch();
    if (grad_Y.rows() != batch || grad_Y.cols() != config_.n_out) {
        throw ContractError("ReluKanLayer::backward: upstream gradient " + grad_Y.shape_string() +
                            " does not match batch " + std::to_string(batch) + " x " +
                            std::to_string(config_.n_out));
    }
    const std::size_t n_in = config_.n_in;
    const std::size_t nb = config_.n_basis();
    const bool dynamic = config_.norm_mode == NormMode::kDynamic;
    const bool endpoints = config_.trainable_endpoints;
    const Matrix scale = pre_square_scale(config_, S_, E_);

    ReluKanGrads g;
    g.x = Matrix(batch, n_in);
    g.W.assign(config_.n_out, Matrix(n_in, nb));
    g.S = Matrix(n_in, nb);
    g.E = Matrix(n_in, nb);

    std::vector<double> grad_F(n_in * nb);
    std::vector<double> common(nb);
    for (std::size_t t = 0; t < batch; ++t) {
        const double* __restrict F_block = cache.F.data().data() + t * n_in * nb;
        double* __restrict gF = grad_F.data();
        std::fill(grad_F.begin(), grad_F.end(), 0.0);
        for (std::size_t out = 0; out < config_.n_out; ++out) {
            const double gy = grad_Y(t, out);
            if (gy == 0.0) continue;
            const double* __restrict w = W_[out].data().data();
            double* __restrict gw = g.W[out].data().data();
            for (std::size_t n = 0; n < n_in * nb; ++n) {
                gF[n] += gy * w[n];
                gw[n] += gy * F_block[n];
            }
        }
        for (std::size_t i = 0; i < n_in; ++i) {
            const std::size_t r = t * n_in + i;
            const double* __restrict A = cache.A.row(r).data();
            const double* __restrict B = cache.B.row(r).data();
            const double* __restrict D = cache.D.row(r).data();
            const double* __restrict sc = scale.row(i).data();
            const double* __restrict gf = gF + i * nb;
            // D > 0 only where both ReLUs are active, so the strict
            // indicators 1[u>0] and 1[v>0] are implied by the D factor.
            double* __restrict c = common.data();
            for (std::size_t j = 0; j < nb; ++j) c[j] = gf[j] * 2.0 * D[j] * sc[j];
            if (endpoints) {
                double* __restrict gE = g.E.row(i).data();
                double* __restrict gS = g.S.row(i).data();
                for (std::size_t j = 0; j < nb; ++j) {
                    gE[j] += c[j] * B[j];
                    gS[j] -= c[j] * A[j];
                }
            }
            double gx = 0.0;
            for (std::size_t j = 0; j < nb; ++j) gx += c[j] * (A[j] - B[j]);
            g.x(t, i) = gx;
            if (!endpoints) continue;
            if (dynamic) {
                double* __restrict gE = g.E.row(i).data();
                double* __restrict gS = g.S.row(i).data();
                // d/de of 16/(e-s)^4 contributes -4F/(e-s); d/ds the opposite.
                const double* __restrict F = cache.F.row(r).data();
                const double* __restrict s = S_.row(i).data();
                const double* __restrict e = E_.row(i).data();
                for (std::size_t j = 0; j < nb; ++j) {
                    const double width_term = gf[j] * 4.0 * F[j] / (e[j] - s[j]);
                    gE[j] -= width_term;
                    gS[j] += width_term;
                }
            }
        }
    }
    return g;
}

ReluKanGrads ReluKanLayer::backward(const ForwardCache& cache, std::span<const double> grad_y) const {
    if (cache.batch() != 1) {
        throw ContractError("ReluKanLayer::backward: single-vector backward given a batch cache");
    }
    return backward_batch(cache, Matrix::row_vector(grad_y));
}

void ReluKanLayer::clamp_widths() noexcept {
    auto s = S_.data();
    auto e = E_.data();
    for (std::size_t n = 0; n < s.size(); ++n) {
        if (e[n] - s[n] < kMinBasisWidth) {
            const double mid = 0.5 * (s[n] + e[n]);
            s[n] = mid - 0.5 * kMinBasisWidth;
            e[n] = mid + 0.5 * kMinBasisWidth;
        }
    }
}

std::size_t ReluKanLayer::parameter_count() const noexcept {
    std::size_t per = config_.n_in * config_.n_basis();
    return per * config_.n_out + (config_.trainable_endpoints ? 2 * per : 0);
}

}  // namespace relukan
