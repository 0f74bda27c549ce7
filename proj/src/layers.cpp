#include "utvi/layers.hpp"

#include <cmath>
#include <string>

#include "utvi/kernels.hpp"

namespace utvi {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite entry");
    }
}

// sigma^2 = softplus(rho)^2 per entry.
std::vector<double> rho_to_variance(const std::vector<double>& rho) {
    std::vector<double> v(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double s = softplus(rho[i]);
        v[i] = s * s;
    }
    return v;
}

void check_output_finite(const GaussianTensor& out, const char* what) {
    for (std::size_t i = 0; i < out.mean.size(); ++i) {
        if (!std::isfinite(out.mean[i]) || !std::isfinite(out.variance[i])) {
            throw NumericError(std::string(what) + ": non-finite output",
                               "element " + std::to_string(i));
        }
    }
}

}  // namespace

void BayesianLinearLayer::validate() const {
    const std::size_t w = in_features * out_features;
    if (in_features == 0 || out_features == 0) throw ShapeError("linear layer: empty dimensions");
    if (weight_mean.size() != w || weight_rho.size() != w || bias_mean.size() != out_features ||
        bias_rho.size() != out_features) {
        throw ShapeError("linear layer: parameter array sizes do not match dimensions");
    }
    check_finite(weight_mean, "weight_mean");
    check_finite(weight_rho, "weight_rho");
    check_finite(bias_mean, "bias_mean");
    check_finite(bias_rho, "bias_rho");
}

void BayesianConv2dLayer::validate() const {
    const std::size_t w = out_channels * in_channels * kernel * kernel;
    if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
        throw ShapeError("conv layer: empty dimensions");
    }
    if (weight_mean.size() != w || weight_rho.size() != w || bias_mean.size() != out_channels ||
        bias_rho.size() != out_channels) {
        throw ShapeError("conv layer: parameter array sizes do not match dimensions");
    }
    check_finite(weight_mean, "weight_mean");
    check_finite(weight_rho, "weight_rho");
    check_finite(bias_mean, "bias_mean");
    check_finite(bias_rho, "bias_rho");
}

void PropagationMode::validate() const {
    if (kind == Kind::UTVI && !(kappa > 0.0)) throw ParamError("propagation mode: kappa must be > 0");
    if (kind == Kind::MCVI && n_samples < 2) {
        throw ParamError("propagation mode: MCVI needs n >= 2 for the unbiased variance");
    }
}

const char* PropagationMode::name() const {
    switch (kind) {
        case Kind::SMP: return "smp";
        case Kind::UTVI: return "utvi";
        case Kind::MCVI: return "mcvi";
    }
    return "?";
}

PropagationMode parse_mode(const std::string& name) {
    if (name == "smp") return PropagationMode::smp();
    if (name == "utvi") return PropagationMode::utvi();
    if (name == "mcvi") return PropagationMode::mcvi(3);
    throw ParamError("unknown propagation mode: " + name);
}

GaussianTensor bayes_linear_forward(const GaussianTensor& x, const BayesianLinearLayer& layer) {
    x.validate();
    layer.validate();
    if (x.size() != layer.in_features) {
        throw ShapeError("bayes_linear_forward: input size does not match in_features");
    }
    const std::vector<double> wv = rho_to_variance(layer.weight_rho);
    const std::vector<double> bv = rho_to_variance(layer.bias_rho);
    GaussianTensor out;
    out.shape = {layer.out_features};
    out.mean.resize(layer.out_features);
    out.variance.resize(layer.out_features);
    linear_forward_kernel<double, double>(layer.weight_mean.data(), wv.data(),
                                          layer.bias_mean.data(), bv.data(), x.mean.data(),
                                          x.variance.data(), layer.in_features,
                                          layer.out_features, out.mean.data(),
                                          out.variance.data());
    return out;
}

GaussianTensor bayes_conv2d_forward(const GaussianTensor& x, const BayesianConv2dLayer& layer) {
    x.validate();
    layer.validate();
    if (x.shape.size() != 3 || x.shape[0] != layer.in_channels) {
        throw ShapeError("bayes_conv2d_forward: input must be (in_channels, H, W)");
    }
    const std::size_t H = x.shape[1], W = x.shape[2];
    if (H < layer.kernel || W < layer.kernel) {
        throw ShapeError("bayes_conv2d_forward: kernel larger than input");
    }
    const std::size_t Ho = (H - layer.kernel) / layer.stride + 1;
    const std::size_t Wo = (W - layer.kernel) / layer.stride + 1;
    const std::vector<double> wv = rho_to_variance(layer.weight_rho);
    const std::vector<double> bv = rho_to_variance(layer.bias_rho);
    GaussianTensor out;
    out.shape = {layer.out_channels, Ho, Wo};
    out.mean.resize(layer.out_channels * Ho * Wo);
    out.variance.resize(out.mean.size());
    std::vector<double> rf_m, rf_v;
    conv2d_forward_kernel<double, double>(layer.weight_mean.data(), wv.data(),
                                          layer.bias_mean.data(), bv.data(), x.mean.data(),
                                          x.variance.data(), layer.in_channels, H, W,
                                          layer.out_channels, layer.kernel, layer.stride,
                                          out.mean.data(), out.variance.data(), rf_m, rf_v);
    return out;
}

GaussianTensor leaky_relu_smp(const GaussianTensor& x, double alpha) {
    x.validate();
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(x.size());
    out.variance.resize(x.size());
    smp_leaky_relu_kernel<double>(x.mean.data(), x.variance.data(), x.size(), alpha,
                                  out.mean.data(), out.variance.data());
    check_output_finite(out, "leaky_relu_smp");
    return out;
}

GaussianTensor nonlinearity_utvi(const GaussianTensor& x, const std::function<double(double)>& f,
                                 double kappa) {
    return ut_propagate(x, f, kappa);
}

GaussianTensor nonlinearity_mcvi(const GaussianTensor& x, const std::function<double(double)>& f,
                                 int n, Rng& rng) {
    x.validate();
    if (n < 2) throw ParamError("nonlinearity_mcvi: n must be >= 2");
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(x.size());
    out.variance.resize(x.size());
    std::vector<double> ys(n), ds(n);
    std::vector<double> wmean(n, 1.0 / n), wvar(n, 1.0 / (n - 1));
    mcvi_activation_kernel<double>(x.mean.data(), x.variance.data(), x.size(), f, n, rng,
                                   wmean.data(), wvar.data(), ys.data(), ds.data(),
                                   out.mean.data(), out.variance.data());
    check_output_finite(out, "nonlinearity_mcvi");
    return out;
}

GaussianTensor inverse_cdf_head(const GaussianTensor& x, double prior_mean, double prior_sigma,
                                double a, const PropagationMode& mode, Rng* rng) {
    x.validate();
    if (x.size() != 1) throw ShapeError("inverse_cdf_head: expects a single node");
    if (!(a > 0.0)) throw ParamError("inverse_cdf_head: a must be > 0");
    if (!(prior_sigma > 0.0)) throw ParamError("inverse_cdf_head: prior_sigma must be > 0");
    mode.validate();
    const IcdfChain<double, double> g{prior_mean, prior_sigma, a};
    GaussianTensor out;
    out.shape = x.shape;
    out.mean.resize(1);
    out.variance.resize(1);
    if (mode.kind == PropagationMode::Kind::MCVI) {
        if (rng == nullptr) throw ParamError("inverse_cdf_head: MCVI mode needs an rng");
        const int n = mode.n_samples;
        std::vector<double> ys(n), ds(n);
        std::vector<double> wmean(n, 1.0 / n), wvar(n, 1.0 / (n - 1));
        mcvi_activation_kernel<double>(x.mean.data(), x.variance.data(), 1, g, n, *rng,
                                       wmean.data(), wvar.data(), ys.data(), ds.data(),
                                       out.mean.data(), out.variance.data());
    } else {
        const double kappa = mode.kind == PropagationMode::Kind::UTVI ? mode.kappa : 2.0;
        ut_activation_kernel<double>(x.mean.data(), x.variance.data(), 1, kappa, g,
                                     out.mean.data(), out.variance.data());
    }
    check_output_finite(out, "inverse_cdf_head");
    return out;
}

GaussianTensor photon_count_head(const GaussianTensor& position, const GaussianTensor& photon,
                                 const SimParams& sim, double a, const PropagationMode& mode,
                                 Rng* rng) {
    position.validate();
    photon.validate();
    sim.validate();
    if (position.size() != 2) throw ShapeError("photon_count_head: position head must have 2 nodes");
    if (photon.size() != 1) throw ShapeError("photon_count_head: photon input must be a single node");
    const double ni = in_frame_count(position.mean[0], position.mean[1], sim.n_photons,
                                     static_cast<double>(sim.side), sim.sigma_b);
    if (!(ni > 0.0)) {
        throw NumericError("photon_count_head: non-positive expected photon count", "N_i guard");
    }
    return inverse_cdf_head(photon, ni, std::sqrt(ni), a, mode, rng);
}

}  // namespace utvi
