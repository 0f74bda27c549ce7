#pragma once

// Layer-forward kernels templated on the scalar type: S = double gives plain
// evaluation, S = Var records the computation on a tape. X is the input
// scalar type, double when the layer consumes raw data.

#include <cmath>
#include <cstddef>
#include <vector>

#include "utvi/rng.hpp"
#include "utvi/sigma_points.hpp"
#include "utvi/tape.hpp"

namespace utvi {

inline constexpr double kSigmoidClampLo = 1e-7;
inline constexpr double kSigmoidClampHi = 1.0 - 1e-7;

template <class S, class X>
void linear_forward_kernel(const S* wm, const S* wv, const S* bm, const S* bv, const X* xm,
                           const X* xv, std::size_t in, std::size_t out, S* ym, S* yv) {
    for (std::size_t o = 0; o < out; ++o) {
        ym[o] = linear_mean(wm + o * in, xm, in, bm[o]);
        yv[o] = linear_var(wv + o * in, wm + o * in, xv, xm, in, bv[o]);
    }
}

template <class S, class X>
void conv2d_forward_kernel(const S* wm, const S* wv, const S* bm, const S* bv, const X* xm,
                           const X* xv, std::size_t in_ch, std::size_t H, std::size_t W,
                           std::size_t out_ch, std::size_t k, std::size_t stride, S* ym, S* yv,
                           std::vector<X>& rf_m, std::vector<X>& rf_v) {
    const std::size_t Ho = (H - k) / stride + 1;
    const std::size_t Wo = (W - k) / stride + 1;
    const std::size_t R = in_ch * k * k;
    rf_m.resize(R);
    rf_v.resize(R);
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            std::size_t r = 0;
            for (std::size_t ic = 0; ic < in_ch; ++ic) {
                const X* plane_m = xm + ic * H * W;
                const X* plane_v = xv + ic * H * W;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::size_t iy = oy * stride + ky;
                    for (std::size_t kx = 0; kx < k; ++kx, ++r) {
                        const std::size_t ix = ox * stride + kx;
                        rf_m[r] = plane_m[iy * W + ix];
                        rf_v[r] = plane_v[iy * W + ix];
                    }
                }
            }
            for (std::size_t oc = 0; oc < out_ch; ++oc) {
                const std::size_t o = oc * Ho * Wo + oy * Wo + ox;
                ym[o] = linear_mean(wm + oc * R, rf_m.data(), R, bm[oc]);
                yv[o] = linear_var(wv + oc * R, wm + oc * R, rf_v.data(), rf_m.data(), R, bv[oc]);
            }
        }
    }
}

/// Unscented propagation of f through each element's Gaussian.
template <class S, class F>
void ut_activation_kernel(const S* xm, const S* xv, std::size_t n, double kappa, F&& f, S* ym,
                          S* yv) {
    for (std::size_t i = 0; i < n; ++i) {
        S pts[3];
        double w[3];
        sigma_points3(xm[i], xv[i], kappa, pts, w);
        S fx[3] = {f(pts[0]), f(pts[1]), f(pts[2])};
        S m = weighted_sum(fx, w, 3);
        S d[3] = {fx[0] - m, fx[1] - m, fx[2] - m};
        ym[i] = m;
        yv[i] = weighted_sq_sum(d, w, 3);
    }
}

/// Reparameterized sampling: per element draw `samples` standard normals z,
/// evaluate f(mu + sigma*z), and report sample mean and unbiased variance.
/// wmean/wvar are caller-prepared weight arrays (1/n and 1/(n-1)); ys/ds are
/// scratch of length `samples`.
template <class S, class F>
void mcvi_activation_kernel(const S* xm, const S* xv, std::size_t n, F&& f, int samples, Rng& rng,
                            const double* wmean, const double* wvar, S* ys, S* ds, S* ym, S* yv) {
    using std::sqrt;
    for (std::size_t i = 0; i < n; ++i) {
        S sigma = sqrt(xv[i]);
        for (int s = 0; s < samples; ++s) ys[s] = f(mul_add(sigma, rng.normal(), xm[i]));
        S m = weighted_sum(ys, wmean, static_cast<std::size_t>(samples));
        for (int s = 0; s < samples; ++s) ds[s] = ys[s] - m;
        ym[i] = m;
        yv[i] = weighted_sq_sum(ds, wvar, static_cast<std::size_t>(samples));
    }
}

/// Closed-form moments of leaky-ReLU(X), X ~ N(mu, sigma^2), from
/// truncated-normal moments:
///   E[f]  = a*mu + (1-a)*(mu*Phi(z) + sigma*phi(z)),        z = mu/sigma
///   E[f2] = a^2*(mu^2+s2) + (1-a^2)*((mu^2+s2)*Phi(z) + mu*sigma*phi(z))
/// Zero variance routes to pointwise evaluation.
template <class S>
void smp_leaky_relu_kernel(const S* xm, const S* xv, std::size_t n, double alpha, S* ym, S* yv) {
    using std::sqrt;
    for (std::size_t i = 0; i < n; ++i) {
        if (scalar_value(xv[i]) == 0.0) {
            ym[i] = leaky_relu(xm[i], alpha);
            yv[i] = xv[i] * 0.0;
            continue;
        }
        S sig = sqrt(xv[i]);
        S z = xm[i] / sig;
        S Phi = normal_cdf(z);
        S phi = normal_pdf(z);
        S rect = xm[i] * Phi + sig * phi;
        S E = alpha * xm[i] + (1.0 - alpha) * rect;
        S m2 = square(xm[i]) + xv[i];
        S M2 = (alpha * alpha) * m2 + (1.0 - alpha * alpha) * (m2 * Phi + xm[i] * sig * phi);
        ym[i] = E;
        yv[i] = vmax(M2 - square(E), 0.0);
    }
}

/// The composite output activation g(x) = prior_mean + prior_sigma *
/// InvPhi(clamp(sigmoid(x / a))). P and A are double or Var so the priors
/// (photon head) and the scale a (always learnable in training) can sit on
/// the tape.
template <class P, class A>
struct IcdfChain {
    P prior_mean;
    P prior_sigma;
    A a;

    template <class S>
    S operator()(const S& x) const {
        auto p = sigmoid(x / a);
        auto pc = vmin(vmax(p, kSigmoidClampLo), kSigmoidClampHi);
        return prior_mean + prior_sigma * normal_inv_cdf(pc);
    }
};

/// Expected in-frame photon count N_i(r) = N * prod over axes of
/// [Phi((L/2-c)/sigma_b) - Phi((-L/2-c)/sigma_b)].
template <class S>
S in_frame_count(const S& xhat, const S& yhat, double n_photons, double side, double sigma_b) {
    const double h = 0.5 * side;
    const double inv = 1.0 / sigma_b;
    auto fx = normal_cdf((h - xhat) * inv) - normal_cdf((-h - xhat) * inv);
    auto fy = normal_cdf((h - yhat) * inv) - normal_cdf((-h - yhat) * inv);
    return n_photons * (fx * fy);
}

}  // namespace utvi
