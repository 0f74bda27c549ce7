#include <doctest.h>

#include <cmath>
#include <vector>

#include "utvi/moments.hpp"
#include "utvi/rng.hpp"

using namespace utvi;

TEST_CASE("affine propagation is exact") {
    GaussianTensor x({2}, {1.0, -2.0}, {0.25, 4.0});
    GaussianTensor y = affine_propagate(x, 3.0, 1.0);
    CHECK(y.mean[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(y.mean[1] == doctest::Approx(-5.0).epsilon(1e-15));
    CHECK(y.variance[0] == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(y.variance[1] == doctest::Approx(36.0).epsilon(1e-15));

    GaussianTensor z = affine_propagate(x, std::vector<double>{2.0, -1.0},
                                        std::vector<double>{0.0, 0.5});
    CHECK(z.mean[1] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(z.variance[1] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("product moments formula on fixed values") {
    GaussianTensor x({1}, {1.0}, {0.5});
    GaussianTensor y({1}, {2.0}, {0.25});
    GaussianTensor p = independent_product_moments(x, y);
    CHECK(p.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
    // vx*vy + vx*my^2 + mx^2*vy = 0.125 + 2 + 0.25
    CHECK(p.variance[0] == doctest::Approx(2.375).epsilon(1e-15));
}

TEST_CASE("product moments match a Monte Carlo oracle") {
    Rng r(101);
    for (int c = 0; c < 5; ++c) {
        const double mx = r.uniform(-3.0, 3.0), my = r.uniform(-3.0, 3.0);
        const double vx = std::exp(r.uniform(-2.0, 1.0)), vy = std::exp(r.uniform(-2.0, 1.0));
        GaussianTensor p = independent_product_moments(GaussianTensor({1}, {mx}, {vx}),
                                                       GaussianTensor({1}, {my}, {vy}));
        const int n = 400000;
        double s = 0.0, s2 = 0.0;
        const double sx = std::sqrt(vx), sy = std::sqrt(vy);
        for (int i = 0; i < n; ++i) {
            const double a = mx + sx * r.normal();
            const double b = my + sy * r.normal();
            s += a * b;
            s2 += a * b * a * b;
        }
        const double mc_mean = s / n;
        const double mc_var = s2 / n - mc_mean * mc_mean;
        const double se_mean = std::sqrt(mc_var / n);
        CHECK(std::abs(p.mean[0] - mc_mean) < 6.0 * se_mean + 1e-9);
        CHECK(p.variance[0] == doctest::Approx(mc_var).epsilon(0.05));
    }
}

TEST_CASE("product moments require matching shapes") {
    GaussianTensor x({2}, {0.0, 0.0}, {1.0, 1.0});
    GaussianTensor y({3}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    CHECK_THROWS_AS((void)independent_product_moments(x, y), ShapeError);
}

TEST_CASE("ut_propagate is exact on affine functions") {
    Rng r(55);
    for (int c = 0; c < 50; ++c) {
        const double mu = r.uniform(-5.0, 5.0);
        const double v = std::exp(r.uniform(-4.0, 3.0));
        const double a = r.uniform(-3.0, 3.0), b = r.uniform(-2.0, 2.0);
        double om = 0.0, ov = 0.0;
        ut_propagate_scalar(mu, v, [&](double t) { return a * t + b; }, 2.0, om, ov);
        CHECK(om == doctest::Approx(a * mu + b).epsilon(1e-12));
        CHECK(std::abs(ov - a * a * v) <= 1e-12 * std::max(1e-12, a * a * v));
    }
}

TEST_CASE("ut_propagate matches x^2 moments exactly at kappa=2") {
    // E[x^2] = mu^2 + v; Var[x^2] = 4 mu^2 v + 2 v^2 (Gaussian), and the
    // kappa=2 set matches moments through fourth order, so both are exact.
    const double mu = 0.7, v = 1.3;
    double om = 0.0, ov = 0.0;
    ut_propagate_scalar(mu, v, [](double t) { return t * t; }, 2.0, om, ov);
    CHECK(om == doctest::Approx(mu * mu + v).epsilon(1e-12));
    CHECK(ov == doctest::Approx(4.0 * mu * mu * v + 2.0 * v * v).epsilon(1e-12));
}

TEST_CASE("ut_propagate applies elementwise over a tensor") {
    GaussianTensor x({2, 2}, {0.0, 1.0, -1.0, 2.0}, {1.0, 0.5, 2.0, 0.0});
    GaussianTensor y = ut_propagate(x, [](double t) { return std::tanh(t); }, 2.0);
    CHECK(y.shape == x.shape);
    CHECK(y.mean[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y.mean[3] == doctest::Approx(std::tanh(2.0)).epsilon(1e-12));
    CHECK(y.variance[3] == doctest::Approx(0.0).epsilon(1e-15));
    for (double vv : y.variance) CHECK(vv >= 0.0);
}

TEST_CASE("ut_propagate reports non-finite outputs") {
    GaussianTensor x({1}, {0.0}, {4.0});
    CHECK_THROWS_AS((void)ut_propagate(x, [](double t) { return std::log(t); }, 2.0),
                    NumericError);
}
