#include <doctest.h>

#include <cmath>
#include <vector>

#include "utvi/errors.hpp"
#include "utvi/optim.hpp"

using namespace utvi;

TEST_CASE("pure decay step") {
    // zero gradient leaves only the decoupled decay: p -= lr * wd * p
    std::vector<double> p = {1.0};
    std::vector<double> g = {0.0};
    OptimizerState st;
    AdamWSettings s;  // lr 1e-3, wd 1e-2
    adamw_step(st, p, g, s);
    CHECK(p[0] == doctest::Approx(0.99999).epsilon(1e-15));
}

TEST_CASE("first step moves by about lr in the gradient direction") {
    AdamWSettings s;
    s.weight_decay = 0.0;
    for (double g0 : {3.0, -0.25, 1e-4}) {
        std::vector<double> p = {0.0};
        std::vector<double> g = {g0};
        OptimizerState st;
        adamw_step(st, p, g, s);
        // mhat/ (sqrt(vhat)+eps) = g/(|g|+eps) ~ sign(g)
        CHECK(p[0] == doctest::Approx(-s.learning_rate * (g0 > 0 ? 1.0 : -1.0)).epsilon(1e-4));
    }
}

TEST_CASE("trajectory matches a reference implementation") {
    AdamWSettings s;
    s.learning_rate = 0.05;
    s.weight_decay = 0.01;
    std::vector<double> p = {2.0, -1.5};
    std::vector<double> pr = p;
    OptimizerState st;
    // reference state
    std::vector<double> m(2, 0.0), v(2, 0.0);
    for (int t = 1; t <= 100; ++t) {
        // quadratic bowl grad = p
        std::vector<double> g = p;
        adamw_step(st, p, g, s);

        std::vector<double> gr = pr;
        for (int i = 0; i < 2; ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gr[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gr[i] * gr[i];
            const double mh = m[i] / (1.0 - std::pow(s.beta1, t));
            const double vh = v[i] / (1.0 - std::pow(s.beta2, t));
            pr[i] -= s.learning_rate * (mh / (std::sqrt(vh) + s.epsilon) +
                                        s.weight_decay * pr[i]);
        }
        CHECK(p[0] == doctest::Approx(pr[0]).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(pr[1]).epsilon(1e-12));
    }
    CHECK(std::abs(p[0]) < 0.2);  // descended toward the minimum
    CHECK(st.step == 100);
}

TEST_CASE("state initializes lazily and validates shapes") {
    std::vector<double> p = {1.0, 2.0, 3.0};
    std::vector<double> g = {0.1, 0.1, 0.1};
    OptimizerState st;
    AdamWSettings s;
    adamw_step(st, p, g, s);
    CHECK(st.m.size() == 3);
    CHECK(st.v.size() == 3);
    CHECK(st.step == 1);

    std::vector<double> bad = {0.1, 0.1};
    CHECK_THROWS_AS(adamw_step(st, p, bad, s), ShapeError);
    std::vector<double> p2 = {1.0, 2.0};
    std::vector<double> g2 = {0.1, 0.1};
    CHECK_THROWS_AS(adamw_step(st, p2, g2, s), ShapeError);
}

TEST_CASE("settings validation") {
    AdamWSettings s;
    CHECK_NOTHROW(s.validate());
    s.learning_rate = 0.0;
    CHECK_THROWS_AS(s.validate(), ParamError);
    s = {};
    s.beta1 = 1.0;
    CHECK_THROWS_AS(s.validate(), ParamError);
    s = {};
    s.beta2 = -0.1;
    CHECK_THROWS_AS(s.validate(), ParamError);
    s = {};
    s.epsilon = 0.0;
    CHECK_THROWS_AS(s.validate(), ParamError);
    s = {};
    s.weight_decay = -1e-3;
    CHECK_THROWS_AS(s.validate(), ParamError);
}

TEST_CASE("reset clears accumulated state") {
    std::vector<double> p = {1.0};
    std::vector<double> g = {0.5};
    OptimizerState st;
    AdamWSettings s;
    adamw_step(st, p, g, s);
    adamw_step(st, p, g, s);
    st.reset();
    CHECK(st.step == 0);
    CHECK(st.m.empty());
    CHECK(st.v.empty());
}
