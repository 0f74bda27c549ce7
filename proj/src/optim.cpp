#include "utvi/optim.hpp"

#include <cmath>

#include "utvi/errors.hpp"

namespace utvi {

void OptimizerState::reset() {
    m.clear();
    v.clear();
    step = 0;
}

void AdamWSettings::validate() const {
    if (!(learning_rate > 0.0)) throw ParamError("adamw: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ParamError("adamw: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ParamError("adamw: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ParamError("adamw: epsilon must be > 0");
    if (!(weight_decay >= 0.0)) throw ParamError("adamw: weight_decay must be >= 0");
}

void adamw_step(OptimizerState& state, std::vector<double>& params,
                const std::vector<double>& grads, const AdamWSettings& s) {
    s.validate();
    const std::size_t n = params.size();
    if (grads.size() != n) throw ShapeError("adamw: grads size does not match params");
    if (state.m.empty() && state.step == 0) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    if (state.m.size() != n || state.v.size() != n) {
        throw ShapeError("adamw: state size does not match params");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * g;
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= s.learning_rate * (mhat / (std::sqrt(vhat) + s.epsilon) +
                                        s.weight_decay * params[i]);
    }
}

}  // namespace utvi
