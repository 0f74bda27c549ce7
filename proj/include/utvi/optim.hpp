#pragma once

#include <cstddef>
#include <vector>

namespace utvi {

/// First/second moment accumulators for AdamW. Sized lazily on the first
/// step so a default-constructed state works for any parameter count.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    void reset();
};

struct AdamWSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;

    void validate() const;
};

/// One decoupled-weight-decay Adam update, in place on params.
void adamw_step(OptimizerState& state, std::vector<double>& params,
                const std::vector<double>& grads, const AdamWSettings& s);

}  // namespace utvi
