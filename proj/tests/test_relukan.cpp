#include <doctest.h>

#include <cmath>

#include "relukan/errors.hpp"
#include "relukan/relu_kan_layer.hpp"

using namespace relukan;

namespace {

ReluKanLayer make_layer(std::size_t n_in, std::size_t n_out, int G, int k, bool trainable,
                        NormMode mode = NormMode::kConstant, std::uint64_t seed = 1) {
    Rng rng(seed);
    return ReluKanLayer::init({n_in, n_out, G, k, trainable, mode}, rng);
}

}  // namespace

TEST_CASE("basis_eval values") {
    CHECK(basis_eval(0.5, 0, 1, 16) == 1.0);
    CHECK(basis_eval(0.0, 0, 1, 16) == 0.0);
    CHECK(basis_eval(1.0, 0, 1, 16) == 0.0);
    CHECK(basis_eval(0.25, 0, 1, 16) == 0.5625);
    CHECK(basis_eval(-0.5, 0, 1, 16) == 0.0);
    CHECK(basis_eval(1.5, 0, 1, 16) == 0.0);
    CHECK(basis_eval_dynamic(0.5, 0, 1) == 1.0);
    CHECK(basis_eval_dynamic(0.3, 0.2, 0.4) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dynamic basis rejects degenerate intervals") {
    CHECK_THROWS_AS(basis_eval_dynamic(0.5, 1, 1), DegenerateBasisError);
    CHECK_THROWS_AS(basis_eval_dynamic(0.5, 1, 0), DegenerateBasisError);
}

TEST_CASE("init grid for G=5, k=3") {
    const ReluKanConfig cfg{2, 3, 5, 3, true, NormMode::kConstant};
    CHECK(cfg.n_basis() == 8);
    CHECK(cfg.norm_constant() == 39.0625);
    const auto layer = make_layer(2, 3, 5, 3, true);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(layer.S()(i, 0) == doctest::Approx(-0.6).epsilon(1e-15));
        CHECK(layer.E()(i, 0) == doctest::Approx(0.2).epsilon(1e-15));
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(layer.E()(i, j) - layer.S()(i, j) == doctest::Approx(0.8).epsilon(1e-15));
            CHECK(layer.S()(i, j) == doctest::Approx((static_cast<double>(j) - 3.0) / 5.0));
            CHECK(layer.E()(i, j) == doctest::Approx((static_cast<double>(j) + 1.0) / 5.0));
        }
    }
    CHECK(layer.W().size() == 3);
    CHECK(layer.W()[0].rows() == 2);
    CHECK(layer.W()[0].cols() == 8);
}

TEST_CASE("init weight scale") {
    const auto layer = make_layer(4, 50, 10, 3, false, NormMode::kConstant, 11);
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& w : layer.W()) {
        for (double v : w.data()) {
            sq += v * v;
            ++n;
        }
    }
    const double expected = std::sqrt(2.0 / (4.0 * 13.0));
    CHECK(std::sqrt(sq / static_cast<double>(n)) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS((ReluKanConfig{0, 1, 5, 3, true, NormMode::kConstant}.validate()), ParameterError);
    CHECK_THROWS_AS((ReluKanConfig{1, 0, 5, 3, true, NormMode::kConstant}.validate()), ParameterError);
    CHECK_THROWS_AS((ReluKanConfig{1, 1, 0, 3, true, NormMode::kConstant}.validate()), ParameterError);
    CHECK_THROWS_AS((ReluKanConfig{1, 1, 5, -1, true, NormMode::kConstant}.validate()), ParameterError);
    CHECK_NOTHROW((ReluKanConfig{1, 1, 1, 0, true, NormMode::kConstant}.validate()));
    CHECK(norm_mode_from_string("dynamic") == NormMode::kDynamic);
    CHECK_THROWS_AS(norm_mode_from_string("other"), ParameterError);
}

TEST_CASE("forward of a single channel with unit weights") {
    auto layer = make_layer(1, 1, 5, 3, true);
    layer.W()[0].fill(1.0);
    const double x = 0.5;
    const auto [y, cache] = layer.forward({&x, 1});
    // Exact rational sum 137/64 from an independent oracle.
    CHECK(y[0] == doctest::Approx(2.140625).epsilon(1e-14));
    double brute = 0.0;
    for (std::size_t j = 0; j < 8; ++j) brute += basis_eval(x, layer.S()(0, j), layer.E()(0, j), 39.0625);
    CHECK(y[0] == doctest::Approx(brute).epsilon(1e-14));
}

TEST_CASE("forward outside every support is zero") {
    const auto layer = make_layer(3, 2, 5, 3, true);
    const std::vector<double> x{2.0, 2.0, -1.0};
    const auto [y, cache] = layer.forward(x);
    CHECK(y == std::vector<double>{0.0, 0.0});
    CHECK(cache.F == Matrix::zeros(3, 8));
    const std::vector<double> gy{1.0, -2.0};
    const auto g = layer.backward(cache, gy);
    CHECK(g.x == Matrix::zeros(1, 3));
}

TEST_CASE("zero weights give zero output") {
    auto layer = make_layer(2, 2, 5, 3, true);
    for (auto& w : layer.W()) w.fill(0.0);
    const std::vector<double> x{0.3, 0.9};
    CHECK(layer.forward(x).first == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward cache holds the basis values") {
    const auto layer = make_layer(2, 1, 5, 3, true);
    const std::vector<double> x{0.13, 0.77};
    const auto [y, cache] = layer.forward(x);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(cache.A(i, j) >= 0.0);
            CHECK(cache.B(i, j) >= 0.0);
            CHECK(cache.F(i, j) == doctest::Approx(basis_eval(x[i], layer.S()(i, j), layer.E()(i, j), 39.0625)));
        }
    }
}

TEST_CASE("forward rejects wrong input length") {
    const auto layer = make_layer(2, 1, 5, 3, true);
    const std::vector<double> x{0.1, 0.2, 0.3};
    CHECK_THROWS_AS(layer.forward(x), DimensionError);
    CHECK_THROWS_AS(layer.forward_batch(Matrix(4, 3), nullptr), DimensionError);
}

TEST_CASE("backward with zero upstream gradient is zero") {
    const auto layer = make_layer(2, 3, 5, 3, true);
    const std::vector<double> x{0.4, 0.6};
    const auto [y, cache] = layer.forward(x);
    const auto g = layer.backward(cache, std::vector<double>(3, 0.0));
    CHECK(g.x == Matrix::zeros(1, 2));
    CHECK(g.S == Matrix::zeros(2, 8));
    CHECK(g.E == Matrix::zeros(2, 8));
    for (const auto& w : g.W) CHECK(w == Matrix::zeros(2, 8));
}

TEST_CASE("frozen endpoints return zero S and E gradients") {
    const auto frozen = make_layer(2, 2, 5, 3, false);
    const std::vector<double> x{0.4, 0.6};
    const auto [y, cache] = frozen.forward(x);
    const auto g = frozen.backward(cache, std::vector<double>{1.0, 0.5});
    CHECK(g.S == Matrix::zeros(2, 8));
    CHECK(g.E == Matrix::zeros(2, 8));
    CHECK_FALSE(g.W[0] == Matrix::zeros(2, 8));
}

TEST_CASE("backward rejects a stale cache") {
    const auto a = make_layer(2, 1, 5, 3, true);
    const auto b = make_layer(3, 1, 5, 3, true);
    const std::vector<double> x{0.4, 0.6};
    const auto [y, cache] = a.forward(x);
    CHECK_THROWS_AS(b.backward(cache, std::vector<double>{1.0}), ContractError);
    CHECK_THROWS_AS(a.backward(cache, std::vector<double>{1.0, 2.0}), ContractError);
}

TEST_CASE("batched forward matches per-sample forward bit for bit") {
    const auto layer = make_layer(3, 2, 7, 2, true, NormMode::kDynamic, 4);
    Rng rng(8);
    const Matrix X = rng_uniform(rng, -0.2, 1.2, 6, 3);
    ForwardCache cache;
    const Matrix Y = layer.forward_batch(X, &cache);
    for (std::size_t t = 0; t < 6; ++t) {
        const auto [y, c] = layer.forward(X.row(t));
        CHECK(Y(t, 0) == y[0]);
        CHECK(Y(t, 1) == y[1]);
    }
}

TEST_CASE("clamp_widths") {
    auto layer = make_layer(1, 1, 5, 3, true);
    const Matrix S0 = layer.S(), E0 = layer.E();
    layer.clamp_widths();
    CHECK(layer.S() == S0);
    CHECK(layer.E() == E0);

    layer.S()(0, 0) = 0.5;
    layer.E()(0, 0) = 0.5;
    layer.clamp_widths();
    CHECK(layer.E()(0, 0) - layer.S()(0, 0) == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(0.5 * (layer.S()(0, 0) + layer.E()(0, 0)) == doctest::Approx(0.5).epsilon(1e-15));

    layer.S()(0, 1) = 0.6;
    layer.E()(0, 1) = 0.5;
    layer.clamp_widths();
    CHECK(layer.E()(0, 1) - layer.S()(0, 1) == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(0.5 * (layer.S()(0, 1) + layer.E()(0, 1)) == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(layer.S()(0, 2) == S0(0, 2));
}

TEST_CASE("constant and dynamic norms agree at initialization") {
    const auto c = make_layer(2, 1, 6, 2, true, NormMode::kConstant, 3);
    const auto d = make_layer(2, 1, 6, 2, true, NormMode::kDynamic, 3);
    Rng rng(5);
    const Matrix X = rng_uniform(rng, 0, 1, 20, 2);
    ForwardCache cc, dc;
    c.forward_batch(X, &cc);
    d.forward_batch(X, &dc);
    for (std::size_t n = 0; n < cc.F.size(); ++n) {
        CHECK(cc.F.data()[n] == doctest::Approx(dc.F.data()[n]).epsilon(1e-12));
    }
}

TEST_CASE("parameter count") {
    CHECK(make_layer(2, 5, 5, 3, false).parameter_count() == 80);
    CHECK(make_layer(2, 5, 5, 3, true).parameter_count() == 80 + 32);
}
