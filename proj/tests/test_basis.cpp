#include <doctest.h>

#include <cmath>
#include <vector>

#include "idea/basis.hpp"
#include "idea/rng.hpp"
#include "idea/tape.hpp"

using namespace idea;
using basis::BasisSpec;
using basis::Kind;

TEST_CASE("trend basis columns are the monomial grid") {
    diff::Array t = basis::make_trend_basis(2, 3);
    CHECK(t.shape == diff::Shape{3, 3});
    // direct evaluation of (i/length)^j
    CHECK(t.at(0, 0) == 1.0);
    CHECK(t.at(1, 0) == 1.0);
    CHECK(t.at(2, 0) == 1.0);
    CHECK(t.at(0, 1) == 0.0);
    CHECK(t.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(t.at(2, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(t.at(0, 2) == 0.0);
    CHECK(t.at(1, 2) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
    CHECK(t.at(2, 2) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));

    diff::Array flat = basis::make_trend_basis(0, 5);
    CHECK(flat.shape == diff::Shape{5, 1});
    for (std::size_t i = 0; i < 5; ++i) CHECK(flat.at(i, 0) == 1.0);

    // 0^j = 0 for j >= 1
    diff::Array t2 = basis::make_trend_basis(3, 6);
    for (std::size_t j = 1; j <= 3; ++j) CHECK(t2.at(0, j) == 0.0);

    CHECK_THROWS_AS(basis::make_trend_basis(3, 3), std::invalid_argument);
    CHECK_THROWS_AS(basis::make_trend_basis(5, 2), std::invalid_argument);
}

TEST_CASE("seasonality basis waveforms and column counts") {
    diff::Array s = basis::make_seasonality_basis(4, 4);
    CHECK(s.shape == diff::Shape{4, 3});
    for (std::size_t i = 0; i < 4; ++i) {
        double t = static_cast<double>(i) / 4.0;
        CHECK(s.at(i, 0) == 1.0);
        CHECK(s.at(i, 1) == doctest::Approx(std::cos(2.0 * M_PI * t)).epsilon(1e-15));
        CHECK(s.at(i, 2) == doctest::Approx(std::sin(2.0 * M_PI * t)).epsilon(1e-15));
    }
    // row 0: cosines at t=0 are 1, sines 0
    diff::Array s12 = basis::make_seasonality_basis(12, 6);
    std::size_t h = 12 / 2 - 1;
    CHECK(s12.cols() == 2 * h + 1);
    CHECK(s12.at(0, 0) == 1.0);
    for (std::size_t j = 1; j <= h; ++j) {
        CHECK(s12.at(0, j) == 1.0);
        CHECK(s12.at(0, h + j) == 0.0);
    }

    CHECK(basis::make_seasonality_basis(6, 5).cols() == 5);  // two harmonics
    for (std::size_t H = 4; H <= 50; ++H) {
        CHECK(basis::make_seasonality_basis(H, 3).cols() == 2 * (H / 2 - 1) + 1);
    }
    CHECK_THROWS_AS(basis::make_seasonality_basis(3, 4), std::invalid_argument);
}

TEST_CASE("basis construction is deterministic") {
    diff::Array a = basis::make_seasonality_basis(8, 10);
    diff::Array b = basis::make_seasonality_basis(8, 10);
    CHECK(a.values == b.values);
    diff::Array c = basis::make_trend_basis(3, 9);
    diff::Array d = basis::make_trend_basis(3, 9);
    CHECK(c.values == d.values);
}

TEST_CASE("trend gram matrix is invertible for p < length") {
    diff::Array t = basis::make_trend_basis(3, 8);
    std::size_t n = t.cols();
    // gram = T^T T, then Gaussian elimination with partial pivoting
    std::vector<double> g(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < t.rows(); ++r) acc += t.at(r, i) * t.at(r, j);
            g[i * n + j] = acc;
        }
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(g[r * n + col]) > std::fabs(g[piv * n + col])) piv = r;
        if (piv != col) {
            for (std::size_t c2 = 0; c2 < n; ++c2) std::swap(g[piv * n + c2], g[col * n + c2]);
            det = -det;
        }
        det *= g[col * n + col];
        REQUIRE(std::fabs(g[col * n + col]) > 1e-12);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = g[r * n + col] / g[col * n + col];
            for (std::size_t c2 = col; c2 < n; ++c2) g[r * n + c2] -= f * g[col * n + c2];
        }
    }
    CHECK(std::fabs(det) > 1e-12);
}

TEST_CASE("generic projection is the identity") {
    BasisSpec spec{Kind::Generic, 2, 2, 1};
    auto [b, f] = basis::project_values({1.0, 2.0}, {3.0}, spec);
    CHECK(b == std::vector<double>{1.0, 2.0});
    CHECK(f == std::vector<double>{3.0});
}

TEST_CASE("trend projection: constant and linear coefficients") {
    BasisSpec spec{Kind::Trend, 1, 3, 3};
    auto [b1, f1] = basis::project_values({0.0, 0.0}, {5.0, 0.0}, spec);
    CHECK(f1 == std::vector<double>{5.0, 5.0, 5.0});

    auto [b2, f2] = basis::project_values({0.0, 0.0}, {0.0, 3.0}, spec);
    // 3 * t on the grid [0, 1/3, 2/3]
    CHECK(f2[0] == 0.0);
    CHECK(f2[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f2[2] == doctest::Approx(2.0).epsilon(1e-15));
    (void)b1;
    (void)b2;
}

TEST_CASE("project rejects mismatched coefficient widths") {
    BasisSpec spec{Kind::Trend, 2, 4, 4};
    CHECK_THROWS_AS(basis::project_values({1.0, 2.0}, {1.0, 2.0, 3.0}, spec),
                    std::invalid_argument);
}

TEST_CASE("gradients reach theta but never the basis matrix") {
    BasisSpec spec{Kind::Seasonality, 2, 6, 6};
    basis::BasisPair pair = basis::make_basis_pair(spec);
    std::vector<double> before_b = pair.backcast.values;

    diff::Array theta_b(1, spec.backcast_dim(), true);
    diff::Array theta_f(1, spec.forecast_dim(), true);
    diff::Rng rng(2);
    for (double& v : theta_b.values) v = rng.uniform(-1.0, 1.0);
    for (double& v : theta_f.values) v = rng.uniform(-1.0, 1.0);

    diff::Tape tape;
    auto [bc, fc] = basis::project(tape.leaf(theta_b), tape.leaf(theta_f), spec, pair, tape);
    diff::Value loss = diff::mean_axis(diff::add(diff::abs(bc), diff::abs(fc)), 1);
    theta_b.zero_grad();
    theta_f.zero_grad();
    tape.backward(loss);

    bool any = false;
    for (double gv : theta_b.grad) any = any || gv != 0.0;
    for (double gv : theta_f.grad) any = any || gv != 0.0;
    CHECK(any);
    CHECK(pair.backcast.grad.empty());   // constants never accumulate grads
    CHECK(pair.backcast.values == before_b);
}
