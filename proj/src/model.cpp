#include "utvi/model.hpp"

#include <cmath>

#include "utvi/normal.hpp"

namespace utvi {

std::size_t ModelSpec::max_width() const {
    std::size_t w = 0;
    for (const LayerShape& l : layers) {
        if (l.in_count() > w) w = l.in_count();
        if (l.out_count() > w) w = l.out_count();
    }
    return w;
}

void ModelSpec::validate() const {
    if (layers.empty()) throw ShapeError("ModelSpec: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerShape& l = layers[i];
        if (l.kind == LayerKind::Conv2d) {
            if (i != 0) throw ShapeError("ModelSpec: conv layers are only supported first");
            if (l.H < l.k || l.W < l.k) throw ShapeError("ModelSpec: kernel larger than input");
            if (l.stride == 0) throw ShapeError("ModelSpec: zero stride");
        } else if (l.in == 0 || l.out == 0) {
            throw ShapeError("ModelSpec: empty linear layer");
        }
        if (i + 1 < layers.size() && l.out_count() != layers[i + 1].in_count()) {
            throw ShapeError("ModelSpec: layer size mismatch");
        }
    }
    if (task == Task::Localization) {
        sim.validate();
        if (output_count() != 3) throw ShapeError("ModelSpec: localizer must end in 3 nodes");
    } else if (output_count() != 1) {
        throw ShapeError("ModelSpec: regression model must end in 1 node");
    }
}

Model make_model(ModelSpec spec) {
    spec.validate();
    Model m;
    m.spec = std::move(spec);
    std::size_t off = 0;
    for (const LayerShape& l : m.spec.layers) {
        LayerOffsets o;
        const std::size_t W = l.weight_count(), B = l.bias_count();
        o.wm = off;
        o.wrho = off + W;
        o.bm = off + 2 * W;
        o.brho = off + 2 * W + B;
        off += 2 * (W + B);
        m.offsets.push_back(o);
    }
    if (m.spec.has_heads()) {
        m.a_pos_off = off++;
        m.a_phot_off = off++;
    }
    m.params.assign(off, 0.0);
    return m;
}

void Model::init_params(Rng& rng) {
    const double rho0 = softplus_inv(0.01);
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerShape& l = spec.layers[li];
        const LayerOffsets& o = offsets[li];
        const std::size_t fan_in = l.kind == LayerKind::Linear ? l.in : l.in_ch * l.k * l.k;
        const double std_w = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t j = 0; j < l.weight_count(); ++j) {
            params[o.wm + j] = rng.normal(0.0, std_w);
            params[o.wrho + j] = rho0;
        }
        for (std::size_t j = 0; j < l.bias_count(); ++j) {
            params[o.bm + j] = 0.0;
            params[o.brho + j] = rho0;
        }
    }
    if (spec.has_heads()) {
        params[a_pos_off] = softplus_inv(1.0);
        params[a_phot_off] = softplus_inv(1.0);
    }
}

Model build_regression_model(double alpha_leak, std::size_t hidden) {
    ModelSpec spec;
    spec.task = Task::Regression;
    spec.alpha_leak = alpha_leak;
    spec.layers = {
        {LayerKind::Linear, 1, hidden, 0, 0, 0, 1, 0, 0, true},
        {LayerKind::Linear, hidden, hidden, 0, 0, 0, 1, 0, 0, true},
        {LayerKind::Linear, hidden, 1, 0, 0, 0, 1, 0, 0, false},
    };
    return make_model(std::move(spec));
}

Model build_localizer_model(const SimParams& sim, double alpha_leak, bool output_heads,
                            std::size_t conv_features, std::size_t fc_width) {
    ModelSpec spec;
    spec.task = Task::Localization;
    spec.alpha_leak = alpha_leak;
    spec.output_heads = output_heads;
    spec.sim = sim;
    const std::size_t L = sim.side;
    LayerShape conv;
    conv.kind = LayerKind::Conv2d;
    conv.in_ch = 1;
    conv.out_ch = conv_features;
    conv.k = 3;
    conv.stride = 1;
    conv.H = L;
    conv.W = L;
    conv.act_after = true;
    const std::size_t flat = conv.out_count();
    spec.layers = {
        conv,
        {LayerKind::Linear, flat, fc_width, 0, 0, 0, 1, 0, 0, true},
        {LayerKind::Linear, fc_width, 3, 0, 0, 0, 1, 0, 0, false},
    };
    return make_model(std::move(spec));
}

void EvalCache::build(const Model& m) {
    const std::size_t nl = m.spec.layers.size();
    wv.assign(nl, {});
    bv.assign(nl, {});
    pv.wm.assign(nl, nullptr);
    pv.wv.assign(nl, nullptr);
    pv.bm.assign(nl, nullptr);
    pv.bv.assign(nl, nullptr);
    for (std::size_t li = 0; li < nl; ++li) {
        const LayerShape& l = m.spec.layers[li];
        const LayerOffsets& o = m.offsets[li];
        wv[li].resize(l.weight_count());
        bv[li].resize(l.bias_count());
        for (std::size_t j = 0; j < l.weight_count(); ++j) {
            wv[li][j] = square(softplus(m.params[o.wrho + j]));
        }
        for (std::size_t j = 0; j < l.bias_count(); ++j) {
            bv[li][j] = square(softplus(m.params[o.brho + j]));
        }
        pv.wm[li] = m.params.data() + o.wm;
        pv.wv[li] = wv[li].data();
        pv.bm[li] = m.params.data() + o.bm;
        pv.bv[li] = bv[li].data();
    }
    if (m.spec.has_heads()) {
        a_pos = softplus(m.params[m.a_pos_off]);
        a_phot = softplus(m.params[m.a_phot_off]);
    }
    pv.a_pos = a_pos;
    pv.a_phot = a_phot;
}

std::size_t register_params(const Model& m, Tape& tape) {
    if (tape.size() != 0) throw ParamError("register_params: tape must be empty");
    for (double v : m.params) tape.param(v);
    return m.params.size();
}

void sync_params(const Model& m, Tape& tape) {
    if (tape.num_params() != m.params.size()) {
        throw ShapeError("sync_params: tape was registered for a different model");
    }
    for (std::size_t i = 0; i < m.params.size(); ++i) tape.set_param_value(i, m.params[i]);
}

void build_tape_prefix(const Model& m, Tape& tape, double prior_sigma, bool deterministic,
                       TapeParams& tp) {
    if (!(prior_sigma > 0.0)) throw ParamError("build_tape_prefix: prior_sigma must be > 0");
    const std::size_t nl = m.spec.layers.size();
    tp.wm.resize(nl);
    tp.wv.resize(nl);
    tp.bm.resize(nl);
    tp.bv.resize(nl);
    tp.kl_terms.clear();
    tp.pv.wm.assign(nl, nullptr);
    tp.pv.wv.assign(nl, nullptr);
    tp.pv.bm.assign(nl, nullptr);
    tp.pv.bv.assign(nl, nullptr);
    for (std::size_t li = 0; li < nl; ++li) {
        const LayerShape& l = m.spec.layers[li];
        const LayerOffsets& o = m.offsets[li];
        const std::size_t W = l.weight_count(), B = l.bias_count();
        tp.wm[li].resize(W);
        tp.wv[li].resize(W);
        tp.bm[li].resize(B);
        tp.bv[li].resize(B);
        for (std::size_t j = 0; j < W; ++j) {
            const Var mu = tape.param_node(o.wm + j);
            tp.wm[li][j] = mu;
            if (deterministic) {
                tp.wv[li][j] = tape.constant(0.0);
            } else {
                const Var s2 = square(softplus(tape.param_node(o.wrho + j)));
                tp.wv[li][j] = s2;
                tp.kl_terms.push_back(kl_term(mu, s2, prior_sigma));
            }
        }
        for (std::size_t j = 0; j < B; ++j) {
            const Var mu = tape.param_node(o.bm + j);
            tp.bm[li][j] = mu;
            if (deterministic) {
                tp.bv[li][j] = tape.constant(0.0);
            } else {
                const Var s2 = square(softplus(tape.param_node(o.brho + j)));
                tp.bv[li][j] = s2;
                tp.kl_terms.push_back(kl_term(mu, s2, prior_sigma));
            }
        }
        tp.pv.wm[li] = tp.wm[li].data();
        tp.pv.wv[li] = tp.wv[li].data();
        tp.pv.bm[li] = tp.bm[li].data();
        tp.pv.bv[li] = tp.bv[li].data();
    }
    if (m.spec.has_heads()) {
        tp.a_pos = softplus(tape.param_node(m.a_pos_off));
        tp.a_phot = softplus(tape.param_node(m.a_phot_off));
    } else {
        tp.a_pos = tape.constant(1.0);
        tp.a_phot = tape.constant(1.0);
    }
    tp.pv.a_pos = tp.a_pos;
    tp.pv.a_phot = tp.a_phot;
    tp.kl = tp.kl_terms.empty() ? tape.constant(0.0)
                                : sum(tp.kl_terms.data(), tp.kl_terms.size());
    tp.prefix_end = tape.mark();
}

}  // namespace utvi
