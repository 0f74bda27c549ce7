#pragma once

#include <cstdint>
#include <vector>

#include "utvi/datagen.hpp"
#include "utvi/kernels.hpp"
#include "utvi/layers.hpp"
#include "utvi/tape.hpp"

namespace utvi {

enum class Task { Regression, Localization };

enum class LayerKind { Linear, Conv2d };

/// Shape of one Bayesian affine layer; conv layers are only supported as the
/// input layer (which is all the architectures here need).
struct LayerShape {
    LayerKind kind = LayerKind::Linear;
    std::size_t in = 0, out = 0;                                         // linear
    std::size_t in_ch = 0, out_ch = 0, k = 0, stride = 1, H = 0, W = 0;  // conv
    bool act_after = false;

    std::size_t weight_count() const {
        return kind == LayerKind::Linear ? in * out : out_ch * in_ch * k * k;
    }
    std::size_t bias_count() const { return kind == LayerKind::Linear ? out : out_ch; }
    std::size_t out_h() const { return (H - k) / stride + 1; }
    std::size_t out_w() const { return (W - k) / stride + 1; }
    std::size_t in_count() const { return kind == LayerKind::Linear ? in : in_ch * H * W; }
    std::size_t out_count() const {
        return kind == LayerKind::Linear ? out : out_ch * out_h() * out_w();
    }
};

struct ModelSpec {
    Task task = Task::Regression;
    double alpha_leak = 0.01;
    bool output_heads = true;  // localization only: the inverse-CDF chains
    SimParams sim;
    std::vector<LayerShape> layers;

    bool has_heads() const { return task == Task::Localization && output_heads; }
    std::size_t input_count() const { return layers.front().in_count(); }
    std::size_t output_count() const { return layers.back().out_count(); }
    std::size_t max_width() const;
    void validate() const;
};

struct LayerOffsets {
    std::size_t wm = 0, wrho = 0, bm = 0, brho = 0;
};

/// A model is a spec plus one flat parameter vector. Per layer the layout is
/// [weight_mean | weight_rho | bias_mean | bias_rho]; the two head scales
/// (stored pre-softplus) sit at the end when present.
struct Model {
    ModelSpec spec;
    std::vector<double> params;
    std::vector<LayerOffsets> offsets;
    std::size_t a_pos_off = 0, a_phot_off = 0;

    std::size_t param_count() const { return params.size(); }

    /// Weight means ~ N(0, 1/fan_in), rhos at softplus_inv(0.01) so initial
    /// sigma is 0.01, biases zero, head scales at softplus_inv(1).
    void init_params(Rng& rng);
};

/// Validates the spec, lays out the flat parameter vector (zeroed), and
/// computes per-layer offsets.
Model make_model(ModelSpec spec);

Model build_regression_model(double alpha_leak = 0.01, std::size_t hidden = 128);
Model build_localizer_model(const SimParams& sim, double alpha_leak = 0.01,
                            bool output_heads = true, std::size_t conv_features = 8,
                            std::size_t fc_width = 128);

/// Pointers to per-layer parameter arrays in scalar type S: posterior means
/// and variances (sigma^2, not rho) for weights and biases, plus head scales.
template <class S>
struct ParamView {
    std::vector<const S*> wm, wv, bm, bv;
    S a_pos{}, a_phot{};
};

template <class S>
struct Workspace {
    std::vector<S> act_m[2], act_v[2];
    std::vector<S> ys, ds;            // sampling scratch
    std::vector<double> wmean, wvar;  // sampling weights 1/n, 1/(n-1)
    std::vector<double> rf_m, rf_v;   // conv receptive-field gather
    std::vector<double> zero;         // zero input variance
};

/// Evaluation-side parameter arrays: variances computed once from the rhos.
/// Valid while the model it was built from stays alive and unmodified.
struct EvalCache {
    std::vector<std::vector<double>> wv, bv;
    double a_pos = 1.0, a_phot = 1.0;
    ParamView<double> pv;

    void build(const Model& m);
};

/// Training-side parameter nodes, rebuilt once per batch: leaf handles for
/// the means, softplus/square nodes for the variances, KL subgraph, head
/// scales. prefix_end marks the boundary before per-datum recording.
struct TapeParams {
    std::vector<std::vector<Var>> wm, wv, bm, bv;
    std::vector<Var> kl_terms;
    Var a_pos{}, a_phot{}, kl{};
    std::size_t prefix_end = 0;
    ParamView<Var> pv;
};

/// Registers every flat parameter as a tape leaf (node index == flat index).
/// The tape must be empty.
std::size_t register_params(const Model& m, Tape& tape);

/// Copies current parameter values into the tape leaves.
void sync_params(const Model& m, Tape& tape);

/// Rebuilds the derived prefix after sync_params. With deterministic=true all
/// variances are pinned to zero constants and the KL node is zero (requires
/// SMP propagation).
void build_tape_prefix(const Model& m, Tape& tape, double prior_sigma, bool deterministic,
                       TapeParams& tp);

namespace detail {

template <class S, class F>
void apply_head_element(const S& xm, const S& xv, const PropagationMode& mode, Rng* rng,
                        Workspace<S>& ws, F&& g, S& om, S& ov) {
    if (mode.kind == PropagationMode::Kind::MCVI) {
        mcvi_activation_kernel<S>(&xm, &xv, 1, g, mode.n_samples, *rng, ws.wmean.data(),
                                  ws.wvar.data(), ws.ys.data(), ws.ds.data(), &om, &ov);
    } else {
        const double kappa = mode.kind == PropagationMode::Kind::UTVI ? mode.kappa : 2.0;
        ut_activation_kernel<S>(&xm, &xv, 1, kappa, g, &om, &ov);
    }
}

}  // namespace detail

/// One full network evaluation. input is the raw datum (input_count values);
/// out_m/out_v receive output_count (<= 3) propagated moments. rng supplies
/// the per-datum stream for MCVI and may be null otherwise.
template <class S>
void forward_net(const ModelSpec& spec, const ParamView<S>& P, const double* input,
                 const PropagationMode& mode, Rng* rng, Workspace<S>& ws, S* out_m, S* out_v) {
    using std::sqrt;
    const bool mc = mode.kind == PropagationMode::Kind::MCVI;
    if (mc) {
        if (rng == nullptr) throw ParamError("forward_net: MCVI needs a per-datum rng");
        const std::size_t n = static_cast<std::size_t>(mode.n_samples);
        if (ws.wmean.size() != n) {
            ws.wmean.assign(n, 1.0 / static_cast<double>(n));
            ws.wvar.assign(n, 1.0 / static_cast<double>(n - 1));
            ws.ys.resize(n);
            ws.ds.resize(n);
        }
    }
    if (ws.zero.size() < spec.input_count()) ws.zero.assign(spec.input_count(), 0.0);

    int cur = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerShape& L = spec.layers[li];
        std::vector<S>& om = ws.act_m[1 - cur];
        std::vector<S>& ov = ws.act_v[1 - cur];
        om.resize(L.out_count());
        ov.resize(L.out_count());
        if (li == 0) {
            if (L.kind == LayerKind::Conv2d) {
                conv2d_forward_kernel<S, double>(P.wm[li], P.wv[li], P.bm[li], P.bv[li], input,
                                                 ws.zero.data(), L.in_ch, L.H, L.W, L.out_ch, L.k,
                                                 L.stride, om.data(), ov.data(), ws.rf_m, ws.rf_v);
            } else {
                linear_forward_kernel<S, double>(P.wm[li], P.wv[li], P.bm[li], P.bv[li], input,
                                                 ws.zero.data(), L.in, L.out, om.data(), ov.data());
            }
        } else {
            linear_forward_kernel<S, S>(P.wm[li], P.wv[li], P.bm[li], P.bv[li],
                                        ws.act_m[cur].data(), ws.act_v[cur].data(), L.in, L.out,
                                        om.data(), ov.data());
        }
        if (L.act_after) {
            const double alpha = spec.alpha_leak;
            switch (mode.kind) {
                case PropagationMode::Kind::SMP:
                    smp_leaky_relu_kernel<S>(om.data(), ov.data(), om.size(), alpha, om.data(),
                                             ov.data());
                    break;
                case PropagationMode::Kind::UTVI:
                    ut_activation_kernel<S>(
                        om.data(), ov.data(), om.size(), mode.kappa,
                        [alpha](const auto& x) { return leaky_relu(x, alpha); }, om.data(),
                        ov.data());
                    break;
                case PropagationMode::Kind::MCVI:
                    mcvi_activation_kernel<S>(
                        om.data(), ov.data(), om.size(),
                        [alpha](const auto& x) { return leaky_relu(x, alpha); }, mode.n_samples,
                        *rng, ws.wmean.data(), ws.wvar.data(), ws.ys.data(), ws.ds.data(),
                        om.data(), ov.data());
                    break;
            }
        }
        cur = 1 - cur;
    }

    const std::vector<S>& fm = ws.act_m[cur];
    const std::vector<S>& fv = ws.act_v[cur];
    const std::size_t k = spec.output_count();
    if (!spec.has_heads()) {
        for (std::size_t i = 0; i < k; ++i) {
            out_m[i] = fm[i];
            out_v[i] = fv[i];
        }
        return;
    }

    const IcdfChain<double, S> gpos{0.0, spec.sim.sigma_r, P.a_pos};
    detail::apply_head_element(fm[0], fv[0], mode, rng, ws, gpos, out_m[0], out_v[0]);
    detail::apply_head_element(fm[1], fv[1], mode, rng, ws, gpos, out_m[1], out_v[1]);

    S ni = in_frame_count(out_m[0], out_m[1], spec.sim.n_photons,
                          static_cast<double>(spec.sim.side), spec.sim.sigma_b);
    if (!(scalar_value(ni) > 0.0)) {
        throw NumericError("forward_net: non-positive expected photon count", "N_i guard");
    }
    const IcdfChain<S, S> gphot{ni, sqrt(ni), P.a_phot};
    detail::apply_head_element(fm[2], fv[2], mode, rng, ws, gphot, out_m[2], out_v[2]);
}

}  // namespace utvi
