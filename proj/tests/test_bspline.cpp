#include <doctest.h>

#include <cmath>
#include <numeric>

#include "relukan/bspline_layer.hpp"
#include "relukan/errors.hpp"

using namespace relukan;

TEST_CASE("grid geometry") {
    const BsplineGrid g(5, 3);
    CHECK(g.n_basis() == 8);
    CHECK(g.step() == doctest::Approx(0.2));
    CHECK(g.knots().size() == 12);
    CHECK(g.knots().front() == doctest::Approx(-0.6));
    CHECK(g.knots().back() == doctest::Approx(1.6));
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(g.center(i) == doctest::Approx((2.0 * static_cast<double>(i) + 1.0 - 3.0) / 10.0));
    }
}

TEST_CASE("basis matches an independent spline library") {
    // Reference values from scipy.interpolate.BSpline on knots (m-k)/G.
    const BsplineGrid g(5, 3);
    const auto b = g.basis(0.37);
    const std::vector<double> ref{0.0, 0.0005625000000000014, 0.25122916666666667, 0.6458541666666666,
                                  0.10235416666666663, 0.0, 0.0, 0.0};
    const auto d = g.basis_derivative(0.37);
    const std::vector<double> dref{0.0, -0.05625000000000009, -3.0812500000000003, 1.3312500000000007,
                                   1.8062499999999995, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(b[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(d[i] == doctest::Approx(dref[i]).epsilon(1e-12));
    }
    const BsplineGrid q(10, 2);
    const auto bq = q.basis(0.81);
    for (std::size_t i = 0; i < 12; ++i) {
        const double expected = i == 8 ? 0.40499999999999964 : i == 9 ? 0.5900000000000003 : i == 10 ? 0.005000000000000011 : 0.0;
        CHECK(bq[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("partition of unity and derivative sum") {
    for (int k : {0, 1, 2, 3, 4}) {
        const BsplineGrid g(7, k);
        for (int n = 0; n < 1000; ++n) {
            const double x = (n + 0.5) / 1000.0;
            const auto b = g.basis(x);
            CHECK(std::accumulate(b.begin(), b.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
            std::size_t nonzero = 0;
            for (double v : b) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                nonzero += v != 0.0;
            }
            CHECK(nonzero <= static_cast<std::size_t>(k + 1));
            if (k > 0) {
                const auto d = g.basis_derivative(x);
                CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0)) < 1e-9);
            }
        }
    }
}

TEST_CASE("compact support") {
    const BsplineGrid g(5, 3);
    for (double x : {-5.0, -0.61, 1.61, 10.0}) {
        for (double v : g.basis(x)) CHECK(v == 0.0);
    }
}

TEST_CASE("degree zero is the cell indicator") {
    const BsplineGrid g(5, 0);
    const auto b = g.basis(0.3);
    for (std::size_t i = 0; i < 5; ++i) CHECK(b[i] == (i == 1 ? 1.0 : 0.0));
}

TEST_CASE("hat functions have slope plus or minus G") {
    const BsplineGrid g(5, 1);
    // Basis 2 is the hat on [0.2, 0.6] peaking at 0.4.
    CHECK(g.basis_derivative(0.3)[2] == doctest::Approx(5.0));
    CHECK(g.basis_derivative(0.5)[2] == doctest::Approx(-5.0));
}

TEST_CASE("derivative matches finite differences away from knots") {
    const BsplineGrid g(6, 3);
    const double h = 1e-6;
    for (double x : {0.05, 0.21, 0.44, 0.58, 0.93}) {
        const auto d = g.basis_derivative(x);
        const auto up = g.basis(x + h);
        const auto dn = g.basis(x - h);
        for (std::size_t i = 0; i < g.n_basis(); ++i) {
            const double fd = (up[i] - dn[i]) / (2 * h);
            if (std::abs(d[i]) > 1e-3) CHECK(std::abs(fd - d[i]) / std::abs(d[i]) < 1e-5);
            else CHECK(std::abs(fd - d[i]) < 1e-8);
        }
    }
}

TEST_CASE("translation symmetry") {
    const BsplineGrid g(8, 3);
    const double step = 1.0 / 8.0;
    for (std::size_t i = 1; i < g.n_basis(); ++i) {
        for (int n = 0; n < 50; ++n) {
            const double x = -0.375 + 0.5 * n / 50.0;
            const double shifted = x + static_cast<double>(i) * step;
            CHECK(std::abs(g.basis(shifted)[i] - g.basis(x)[0]) < 1e-12);
        }
    }
}

TEST_CASE("silu") {
    CHECK(silu(0.0) == 0.0);
    CHECK(silu(0.7) == doctest::Approx(0.46773144051771626).epsilon(1e-14));
    CHECK(silu_derivative(0.7) == doctest::Approx(0.8233867834733425).epsilon(1e-14));
}

TEST_CASE("edge function special cases") {
    Rng rng(1);
    auto layer = BsplineKanLayer::init({1, 1, 5, 3}, rng);
    layer.spline_weight().fill(0.0);
    layer.base_weight().fill(1.7);
    CHECK(layer.edge_forward(0, 0, 0.0) == 0.0);
    CHECK(layer.edge_forward(0, 0, 0.4) == doctest::Approx(1.7 * silu(0.4)));

    layer.base_weight().fill(0.0);
    layer.spline_weight().fill(2.0);
    layer.coef()[0].fill(0.25);
    for (double x : {0.0, 0.1, 0.5, 0.99}) CHECK(layer.edge_forward(0, 0, x) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("initialization") {
    Rng rng(3);
    const auto layer = BsplineKanLayer::init({3, 40, 10, 3}, rng);
    CHECK(layer.coef().size() == 40);
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& c : layer.coef()) {
        CHECK(c.rows() == 3);
        CHECK(c.cols() == 13);
        for (double v : c.data()) {
            sq += v * v;
            ++n;
        }
    }
    CHECK(std::sqrt(sq / static_cast<double>(n)) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(layer.base_weight() == Matrix::ones(40, 3));
    CHECK(layer.spline_weight() == Matrix::ones(40, 3));
}

TEST_CASE("layer forward equals the sum over edges") {
    Rng rng(6);
    const auto layer = BsplineKanLayer::init({3, 2, 5, 3}, rng);
    const std::vector<double> x{0.12, 0.5, 0.93};
    const auto [y, cache] = layer.forward(x);
    for (std::size_t c = 0; c < 2; ++c) {
        double brute = 0.0;
        for (std::size_t i = 0; i < 3; ++i) brute += layer.edge_forward(c, i, x[i]);
        CHECK(std::abs(y[c] - brute) < 1e-10);
    }
    CHECK_THROWS_AS(layer.forward(std::vector<double>{0.1}), DimensionError);
}

TEST_CASE("zero upstream gradient") {
    Rng rng(6);
    const auto layer = BsplineKanLayer::init({2, 2, 5, 3}, rng);
    const auto [y, cache] = layer.forward(std::vector<double>{0.3, 0.8});
    const auto g = layer.backward(cache, std::vector<double>{0.0, 0.0});
    CHECK(g.x == Matrix::zeros(1, 2));
    CHECK(g.base_weight == Matrix::zeros(2, 2));
    CHECK(g.spline_weight == Matrix::zeros(2, 2));
}
