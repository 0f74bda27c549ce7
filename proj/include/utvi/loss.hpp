#pragma once

#include <cmath>

#include "utvi/gaussian.hpp"
#include "utvi/model.hpp"
#include "utvi/tape.hpp"

namespace utvi {

inline constexpr double kVarFloor = 1e-6;

/// Per-datum negative log-likelihood: mean over the k output nodes of
/// 0.5*log(2 pi V) + (y-mu)^2/(2V) with the variance floored.
template <class S>
S datum_nll(const S* ym, const S* yv, const double* target, std::size_t k) {
    using std::log;
    S terms[3];
    for (std::size_t j = 0; j < k; ++j) {
        S vf = vmax(yv[j], kVarFloor);
        S r = ym[j] - target[j];
        terms[j] = (log(vf) + kLog2Pi) * 0.5 + square(r) / vf * 0.5;
    }
    if (k == 1) return terms[0];
    return sum(terms, k) * (1.0 / static_cast<double>(k));
}

/// Mean over every element of pred (batch and output nodes together).
double gaussian_nll(const GaussianTensor& pred, const std::vector<double>& target);

/// KL(q || N(0, prior_sigma^2)) summed over all weight and bias posteriors;
/// head scales carry no distribution and are excluded.
double kl_to_prior(const Model& m, double prior_sigma);

/// phi(l) = 2^(M-l) / (2^M - 1) for epochs l = 1..M.
double kl_scale(std::size_t l, std::size_t M);

/// Evaluation-path ELBO: gaussian_nll over the dataset plus
/// phi(l) * KL / batches_per_epoch. eval_seed feeds MCVI per-datum streams.
double elbo_loss(const Model& m, const Dataset& data, const PropagationMode& mode, std::size_t l,
                 std::size_t M, std::size_t batches_per_epoch, double prior_sigma,
                 std::uint64_t eval_seed = 0);

}  // namespace utvi
