#include "utvi/moments.hpp"

#include <cmath>
#include <string>

namespace utvi {

namespace {

double pick(const std::vector<double>& v, std::size_t i, const char* what) {
    if (v.size() == 1) return v[0];
    if (i < v.size()) return v[i];
    throw ShapeError(std::string("affine_propagate: ") + what +
                     " has neither length 1 nor the tensor's length");
}

}  // namespace

GaussianTensor affine_propagate(const GaussianTensor& x, const std::vector<double>& a,
                                const std::vector<double>& b) {
    x.validate();
    const std::size_t n = x.size();
    if ((a.size() != 1 && a.size() != n) || (b.size() != 1 && b.size() != n)) {
        throw ShapeError("affine_propagate: a/b not broadcastable to x");
    }
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(n);
    out.variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = pick(a, i, "a");
        const double bi = pick(b, i, "b");
        if (!std::isfinite(ai) || !std::isfinite(bi)) {
            throw DomainError("affine_propagate: non-finite coefficient");
        }
        out.mean[i] = ai * x.mean[i] + bi;
        out.variance[i] = ai * ai * x.variance[i];
    }
    return out;
}

GaussianTensor affine_propagate(const GaussianTensor& x, double a, double b) {
    return affine_propagate(x, std::vector<double>{a}, std::vector<double>{b});
}

GaussianTensor independent_product_moments(const GaussianTensor& x, const GaussianTensor& y) {
    x.validate();
    y.validate();
    if (x.shape != y.shape) {
        throw ShapeError("independent_product_moments: x and y shapes differ");
    }
    const std::size_t n = x.size();
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(n);
    out.variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mx = x.mean[i], vx = x.variance[i];
        const double my = y.mean[i], vy = y.variance[i];
        out.mean[i] = mx * my;
        out.variance[i] = vx * vy + vx * my * my + mx * mx * vy;
    }
    return out;
}

void ut_propagate_scalar(double mean, double variance, const std::function<double(double)>& f,
                         double kappa, double& out_mean, double& out_variance) {
    double pts[3];
    double w[3];
    sigma_points3<double>(mean, variance, kappa, pts, w);
    double fx[3];
    for (int k = 0; k < 3; ++k) fx[k] = f(pts[k]);
    const double m = w[0] * fx[0] + w[1] * fx[1] + w[2] * fx[2];
    const double d0 = fx[0] - m, d1 = fx[1] - m, d2 = fx[2] - m;
    out_mean = m;
    out_variance = w[0] * d0 * d0 + w[1] * d1 * d1 + w[2] * d2 * d2;
}

GaussianTensor ut_propagate(const GaussianTensor& x, const std::function<double(double)>& f,
                            double kappa) {
    x.validate();
    if (!(kappa > 0.0)) throw ParamError("ut_propagate: kappa must be > 0");
    const std::size_t n = x.size();
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(n);
    out.variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m, v;
        ut_propagate_scalar(x.mean[i], x.variance[i], f, kappa, m, v);
        if (!std::isfinite(m) || !std::isfinite(v)) {
            throw NumericError("ut_propagate: non-finite transform output",
                               "element " + std::to_string(i));
        }
        out.mean[i] = m;
        out.variance[i] = v;
    }
    return out;
}

}  // namespace utvi
