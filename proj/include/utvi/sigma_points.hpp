#pragma once

#include <array>
#include <cmath>

#include "utvi/errors.hpp"

namespace utvi {

/// The 3 deterministic points and weights for a 1-d unscented transform.
struct SigmaPointSet {
    std::array<double, 3> points;   // chi_0, chi_1, chi_2
    std::array<double, 3> weights;  // gamma_0, gamma_1, gamma_2
    double kappa;
};

/// Generic 3-point construction shared by the public API and the
/// differentiable kernels. S is double or a tape variable.
/// chi_0 = mu, chi_{1,2} = mu -/+ sqrt((kappa+1) * var);
/// gamma_0 = kappa/(kappa+1), gamma_1 = gamma_2 = 1/(2(kappa+1)).
template <class S>
inline void sigma_points3(const S& mean, const S& variance, double kappa, S (&points)[3],
                          double (&weights)[3]) {
    using std::sqrt;
    const S spread = sqrt(variance * (kappa + 1.0));
    points[0] = mean;
    points[1] = mean - spread;
    points[2] = mean + spread;
    weights[0] = kappa / (kappa + 1.0);
    weights[1] = weights[2] = 0.5 / (kappa + 1.0);
}

SigmaPointSet make_sigma_points(double mu, double sigma2, double kappa = 2.0);

}  // namespace utvi
