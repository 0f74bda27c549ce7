#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "utvi/datagen.hpp"
#include "utvi/model.hpp"
#include "utvi/train.hpp"

namespace utvi {

struct EvalReport {
    std::string mode;
    int samples = 0;  // 3 for UTVI (sigma points), n for MCVI, 0 for SMP
    double mean_nll = 0.0;
    /// Ensemble-mixture predictive moments, n x output_count row-major. The
    /// NLL above is averaged over members, not computed from the mixture.
    std::vector<double> pred_mean, pred_var;
    double median_ms = 0.0;
    double iqr_ms = 0.0;
};

struct VarianceMap {
    std::size_t side = 0;
    std::vector<double> value;        // side*side, row-major
    std::vector<std::uint32_t> count;  // emitters per cell
};

int mode_sample_count(const PropagationMode& mode);

/// Forward pass per datum and ensemble member in the given mode; NLL
/// averaged over members and data. MCVI draws per-member, per-datum streams
/// derive_seed(eval_seed, {streams::eval, member, i}). Parallelizes over
/// data points (UTVI_THREADS), deterministically.
EvalReport evaluate_nll(const std::vector<Model>& ensemble, const Dataset& data,
                        const PropagationMode& mode, std::uint64_t eval_seed = 0);

/// Cramer-Rao reference map: per cell sigma_b^2 / mean(N_i) with N_i the
/// expected in-frame count, averaged over a deterministic stratified
/// midpoint grid of ceil(sqrt(count))^2 positions inside the pixel.
/// Returns side*side values row-major; rows index y, columns x.
std::vector<double> crb_map(const SimParams& sim, std::size_t per_pixel_count);

/// Per cell: simulate per_pixel_count emitters uniformly inside the pixel,
/// Poisson-corrupt the expected image, run the ensemble, and average the
/// mean position variance (Vx + Vy)/2 over emitters and members. Cell
/// streams are derive_seed(seed, {streams::cell, row, col}).
VarianceMap variance_map(const std::vector<Model>& ensemble, const SimParams& sim,
                         const PropagationMode& mode, std::size_t per_pixel_count,
                         std::uint64_t seed);

/// Wall-clock medians over `repeats` identical batches (one untimed warm-up
/// batch per row), single-threaded. Rows: MCVI at each entry of
/// sample_counts, then one UTVI row. All rows evaluate the same inputs,
/// generated from seed.
std::vector<EvalReport> timing_sweep(const Model& m, std::size_t batch_size,
                                     const std::vector<int>& sample_counts, std::size_t repeats,
                                     std::uint64_t seed, double kappa = 2.0);

struct SweepRow {
    std::string mode;
    int samples = 0;
    std::uint64_t seed = 0;
    double best_val_nll = 0.0;
};

/// Fig. 2(a)-style regression protocol: trains fresh models per (mode, seed)
/// with base as the shared configuration; SMP and UTVI rows plus one MCVI
/// row per entry of sample_grid.
std::vector<SweepRow> nll_vs_samples_sweep(const TrainConfig& base,
                                           const std::vector<int>& sample_grid,
                                           const std::vector<std::uint64_t>& seeds);

std::string nll_sweep_csv(const std::vector<SweepRow>& rows);
std::string timing_csv(const std::vector<EvalReport>& rows, std::size_t batch_size);
/// Shared by varmap and crbmap: header row,col,value,count.
std::string map_csv(const std::vector<double>& value, const std::vector<std::uint32_t>& count,
                    std::size_t side);
/// Standalone heatmap with every cell value embedded as text.
std::string svg_heatmap(const std::vector<double>& value, std::size_t side,
                        const std::string& title);

}  // namespace utvi
