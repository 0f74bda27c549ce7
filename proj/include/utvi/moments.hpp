#pragma once

#include <functional>
#include <vector>

#include "utvi/gaussian.hpp"
#include "utvi/sigma_points.hpp"

namespace utvi {

/// Affine map through a Gaussian: mean' = a*mean + b, variance' = a^2*variance.
/// a and b are scalars or per-element arrays (length 1 broadcasts).
GaussianTensor affine_propagate(const GaussianTensor& x, const std::vector<double>& a,
                                const std::vector<double>& b);
GaussianTensor affine_propagate(const GaussianTensor& x, double a, double b);

/// Moments of the product of two independent Gaussians, elementwise:
/// mean' = mx*my; variance' = vx*vy + vx*my^2 + mx^2*vy.
GaussianTensor independent_product_moments(const GaussianTensor& x, const GaussianTensor& y);

/// Unscented propagation of an arbitrary scalar function, applied
/// independently per element. Non-finite f output raises a propagation
/// error naming the element index.
GaussianTensor ut_propagate(const GaussianTensor& x, const std::function<double(double)>& f,
                            double kappa = 2.0);

/// Single-element convenience used by tests and kernels.
void ut_propagate_scalar(double mean, double variance, const std::function<double(double)>& f,
                         double kappa, double& out_mean, double& out_variance);

}  // namespace utvi
