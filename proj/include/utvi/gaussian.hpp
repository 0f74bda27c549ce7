#pragma once

#include <cstddef>
#include <vector>

#include "utvi/errors.hpp"

namespace utvi {

/// Elementwise-independent Gaussian tensor: mean and variance per element,
/// flattened row-major over `shape`.
struct GaussianTensor {
    std::vector<std::size_t> shape;
    std::vector<double> mean;
    std::vector<double> variance;

    GaussianTensor() = default;
    GaussianTensor(std::vector<std::size_t> shape_, std::vector<double> mean_,
                   std::vector<double> variance_)
        : shape(std::move(shape_)), mean(std::move(mean_)), variance(std::move(variance_)) {
        validate();
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    void validate() const {
        const std::size_t n = size();
        if (mean.size() != n || variance.size() != n) {
            throw ShapeError("GaussianTensor: mean/variance length does not match shape");
        }
        for (double v : variance) {
            if (!(v >= 0.0)) throw DomainError("GaussianTensor: negative or NaN variance");
        }
    }

    static GaussianTensor point(std::vector<std::size_t> shape_, std::vector<double> mean_) {
        std::vector<double> var(mean_.size(), 0.0);
        return GaussianTensor(std::move(shape_), std::move(mean_), std::move(var));
    }
};

}  // namespace utvi
