#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "utvi/errors.hpp"
#include "utvi/normal.hpp"

using namespace utvi;

namespace {

// Bisection inverse of normal_cdf, used as the oracle for the rational
// approximation + polish path.
double inv_cdf_bisect(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal_cdf matches erfc identities") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
    CHECK(normal_cdf(-1.0) + normal_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(normal_cdf(8.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("normal_pdf spot values") {
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
    CHECK(normal_pdf(2.0) == doctest::Approx(0.05399096651318806).epsilon(1e-13));
}

TEST_CASE("normal_inv_cdf against bisection oracle") {
    const double ps[] = {1e-7,  1e-5, 1e-3, 0.02425, 0.1, 0.25, 0.5,
                         0.75,  0.9,  0.97575, 0.999, 0.99999, 1.0 - 1e-7};
    for (double p : ps) {
        const double z = normal_inv_cdf(p);
        const double ref = inv_cdf_bisect(p);
        CHECK(std::abs(z - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("normal_inv_cdf spot values") {
    CHECK(normal_inv_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_inv_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_inv_cdf(0.84134474606854293) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normal_inv_cdf(0.9986501019683699) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("normal_inv_cdf round trips through normal_cdf") {
    // p saturates toward 1 in the upper tail, so a few ulps of p cost
    // roughly eps / pdf(z) in the recovered z
    for (double z = -6.0; z <= 6.0; z += 0.37) {
        const double bound = 1e-11 * std::max(1.0, std::abs(z)) + 2e-15 / normal_pdf(z);
        CHECK(std::abs(normal_inv_cdf(normal_cdf(z)) - z) <= bound);
    }
}

TEST_CASE("normal_inv_cdf rejects out-of-range p") {
    CHECK_THROWS_AS((void)normal_inv_cdf(0.0), DomainError);
    CHECK_THROWS_AS((void)normal_inv_cdf(1.0), DomainError);
    CHECK_THROWS_AS((void)normal_inv_cdf(-0.5), DomainError);
    CHECK_THROWS_AS((void)normal_inv_cdf(1.5), DomainError);
}

TEST_CASE("sigmoid and softplus") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigmoid(-745.0) >= 0.0);
    CHECK(sigmoid(745.0) <= 1.0);
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(softplus(40.0) == doctest::Approx(40.0).epsilon(1e-15));
    CHECK(softplus(-40.0) == doctest::Approx(std::exp(-40.0)).epsilon(1e-10));
    for (double y : {1e-8, 0.01, 0.5, 3.0, 50.0}) {
        CHECK(softplus(softplus_inv(y)) == doctest::Approx(y).epsilon(1e-12));
    }
}

TEST_CASE("leaky_relu") {
    CHECK(leaky_relu(2.5, 0.01) == 2.5);
    CHECK(leaky_relu(-2.0, 0.01) == -0.02);
    CHECK(leaky_relu(-3.0, 0.0) == 0.0);
}
