#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "utvi/errors.hpp"
#include "utvi/rng.hpp"

namespace utvi {

/// Emitter-simulation constants. The image spans [-L/2, L/2]^2 with pixel
/// centers at half-integers; emitter positions live in the same frame.
struct SimParams {
    double n_photons = 100.0;    // N, expected photons per emitter
    std::size_t side = 8;        // L, image side in pixels
    double sigma_b = 1.05;       // PSF standard deviation in pixels
    double sigma_r = 2.0;        // position prior standard deviation in pixels
    double wavelength_px = 6.0;  // provenance: sigma_b = 0.21 * wavelength / na
    double na = 1.2;

    void validate() const;
};

struct RegressionBatch {
    std::vector<double> x, y;
};

struct EmitterSample {
    std::vector<double> image;  // side*side row-major photon counts (integral)
    double x = 0.0, y = 0.0;    // position relative to image center, pixels
    double n_detected = 0.0;    // expected in-frame photons at this position
};

/// sigma(x) = 0.1 + 0.2 * sin(2 pi x - pi/2)^2
double noise_sigma(double x);

/// x ~ Uniform(x_low, x_high) i.i.d., y = x + noise_sigma(x) * z, z ~ N(0,1).
RegressionBatch gen_regression_batch(std::size_t n, Rng& rng, double x_low, double x_high);

/// Pixel-integrated Gaussian PSF image: entry = N * product of normal-CDF
/// differences over the pixel's x and y extents. Sums to the in-frame
/// expected count N_detected <= N.
std::vector<double> expected_image(double x, double y, const SimParams& sim);

/// Closed-form in-frame expected count: N times the product of CDF
/// differences over [-L/2, L/2] per axis. Equals the sum of expected_image.
double expected_in_frame_count(double x, double y, const SimParams& sim);

/// r ~ N(0, sigma_r^2 I); image entries ~ Poisson(expected_image entry).
EmitterSample simulate_emitter(Rng& rng, const SimParams& sim);

/// Task-agnostic flattened dataset: n rows of input_dim inputs and
/// target_dim targets.
struct Dataset {
    std::size_t n = 0;
    std::size_t input_dim = 0;
    std::size_t target_dim = 0;
    std::vector<double> inputs;   // n * input_dim row-major
    std::vector<double> targets;  // n * target_dim row-major

    const double* input_row(std::size_t i) const { return inputs.data() + i * input_dim; }
    const double* target_row(std::size_t i) const { return targets.data() + i * target_dim; }
};

Dataset make_regression_dataset(std::size_t n, Rng& rng, double x_low, double x_high);
Dataset make_localization_dataset(std::size_t n, Rng& rng, const SimParams& sim);

// CSV round-trip. Regression: header "x,y". Localization: header
// "px_0,...,px_63,x,y,n_detected", pixels row-major. Reals are written with
// 17 significant digits.
void write_regression_csv(const std::string& path, const Dataset& d);
void write_localization_csv(const std::string& path, const Dataset& d);
Dataset read_regression_csv(const std::string& path);
Dataset read_localization_csv(const std::string& path);

}  // namespace utvi
