#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "utvi/datagen.hpp"
#include "utvi/gaussian.hpp"
#include "utvi/moments.hpp"
#include "utvi/rng.hpp"

namespace utvi {

/// Variational-posterior parameters of a fully connected layer. Spreads are
/// stored pre-softplus: sigma = softplus(rho) > 0.
struct BayesianLinearLayer {
    std::size_t in_features = 0, out_features = 0;
    std::vector<double> weight_mean, weight_rho;  // [out][in] row-major
    std::vector<double> bias_mean, bias_rho;      // [out]

    void validate() const;
};

/// Valid-padding 2-d convolution over (channels, H, W) tensors; spatial
/// output size is floor((H-k)/stride)+1.
struct BayesianConv2dLayer {
    std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1;
    std::vector<double> weight_mean, weight_rho;  // [out_ch][in_ch][k][k]
    std::vector<double> bias_mean, bias_rho;      // [out_ch]

    void validate() const;
};

struct PropagationMode {
    enum class Kind { SMP, UTVI, MCVI };
    Kind kind = Kind::SMP;
    double kappa = 2.0;         // UTVI spread parameter
    int n_samples = 3;          // MCVI sample count
    std::uint64_t stream = 0;   // MCVI rng-stream id

    static PropagationMode smp() { return {Kind::SMP, 2.0, 3, 0}; }
    static PropagationMode utvi(double kappa = 2.0) { return {Kind::UTVI, kappa, 3, 0}; }
    static PropagationMode mcvi(int n, std::uint64_t stream = 0) {
        return {Kind::MCVI, 2.0, n, stream};
    }

    void validate() const;
    const char* name() const;
};

PropagationMode parse_mode(const std::string& name);

GaussianTensor bayes_linear_forward(const GaussianTensor& x, const BayesianLinearLayer& layer);
GaussianTensor bayes_conv2d_forward(const GaussianTensor& x, const BayesianConv2dLayer& layer);

/// Exact moments of leaky-ReLU(X) per element; validated against quadrature.
GaussianTensor leaky_relu_smp(const GaussianTensor& x, double alpha);

/// Elementwise unscented propagation of an arbitrary f.
GaussianTensor nonlinearity_utvi(const GaussianTensor& x, const std::function<double(double)>& f,
                                 double kappa = 2.0);

/// Elementwise sampling: n draws from N(mu, sigma^2) through f; mean and
/// unbiased (n-1) variance. n >= 2.
GaussianTensor nonlinearity_mcvi(const GaussianTensor& x, const std::function<double(double)>& f,
                                 int n, Rng& rng);

/// g(x) = prior_mean + prior_sigma * InvPhi(clamp(sigmoid(x/a))) propagated
/// through the unscented transform (SMP requests fall back to UT; the chain
/// is never propagated analytically) or by sampling in MCVI mode.
GaussianTensor inverse_cdf_head(const GaussianTensor& x, double prior_mean, double prior_sigma,
                                double a, const PropagationMode& mode, Rng* rng = nullptr);

/// Photon head: N_i from the position head's output means via the CDF-product
/// integral, then inverse_cdf_head with prior N(N_i, N_i).
GaussianTensor photon_count_head(const GaussianTensor& position, const GaussianTensor& photon,
                                 const SimParams& sim, double a, const PropagationMode& mode,
                                 Rng* rng = nullptr);

}  // namespace utvi
