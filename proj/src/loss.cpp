#include "utvi/loss.hpp"

#include "utvi/rng.hpp"

namespace utvi {

double gaussian_nll(const GaussianTensor& pred, const std::vector<double>& target) {
    pred.validate();
    const std::size_t n = pred.size();
    if (target.size() != n) throw ShapeError("gaussian_nll: target size does not match pred");
    if (n == 0) throw ShapeError("gaussian_nll: empty prediction");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = vmax(pred.variance[i], kVarFloor);
        const double r = pred.mean[i] - target[i];
        acc += 0.5 * (std::log(v) + kLog2Pi) + 0.5 * r * r / v;
    }
    return acc / static_cast<double>(n);
}

double kl_to_prior(const Model& m, double prior_sigma) {
    if (!(prior_sigma > 0.0)) throw ParamError("kl_to_prior: prior_sigma must be > 0");
    const double c = 0.5 / (prior_sigma * prior_sigma);
    const double lp = std::log(prior_sigma);
    double acc = 0.0;
    for (std::size_t li = 0; li < m.spec.layers.size(); ++li) {
        const LayerShape& l = m.spec.layers[li];
        const LayerOffsets& o = m.offsets[li];
        auto add = [&](double mu, double rho) {
            const double s = softplus(rho);
            acc += lp - std::log(s) + c * (s * s + mu * mu) - 0.5;
        };
        for (std::size_t j = 0; j < l.weight_count(); ++j) {
            add(m.params[o.wm + j], m.params[o.wrho + j]);
        }
        for (std::size_t j = 0; j < l.bias_count(); ++j) {
            add(m.params[o.bm + j], m.params[o.brho + j]);
        }
    }
    return acc;
}

double kl_scale(std::size_t l, std::size_t M) {
    if (M < 1) throw ParamError("kl_scale: M must be >= 1");
    if (l < 1 || l > M) throw ParamError("kl_scale: epoch index out of range");
    // 2^(M-l)/(2^M - 1) computed as 2^(-l) / (1 - 2^(-M)) to stay finite for
    // any M.
    return std::exp2(-static_cast<double>(l)) / (1.0 - std::exp2(-static_cast<double>(M)));
}

double elbo_loss(const Model& m, const Dataset& data, const PropagationMode& mode, std::size_t l,
                 std::size_t M, std::size_t batches_per_epoch, double prior_sigma,
                 std::uint64_t eval_seed) {
    if (data.n == 0) throw ParamError("elbo_loss: empty dataset");
    if (batches_per_epoch == 0) throw ParamError("elbo_loss: batches_per_epoch must be >= 1");
    mode.validate();
    EvalCache ec;
    ec.build(m);
    Workspace<double> ws;
    const std::size_t k = m.spec.output_count();
    double nll = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        double om[3], ov[3];
        if (mode.kind == PropagationMode::Kind::MCVI) {
            Rng r(derive_seed(eval_seed, {streams::eval, i}));
            forward_net<double>(m.spec, ec.pv, data.input_row(i), mode, &r, ws, om, ov);
        } else {
            forward_net<double>(m.spec, ec.pv, data.input_row(i), mode, nullptr, ws, om, ov);
        }
        nll += datum_nll(om, ov, data.target_row(i), k);
    }
    nll /= static_cast<double>(data.n);
    return nll + kl_scale(l, M) * kl_to_prior(m, prior_sigma) /
                     static_cast<double>(batches_per_epoch);
}

}  // namespace utvi
