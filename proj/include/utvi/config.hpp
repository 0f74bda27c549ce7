#pragma once

#include <string>
#include <vector>

#include "utvi/datagen.hpp"
#include "utvi/model.hpp"
#include "utvi/train.hpp"

namespace utvi {

/// One experiment description: task and propagation mode, replicate seeds,
/// the training hyperparameters, and the simulator constants. The
/// propagation mode lives in train.mode_kind but is spelled as a top-level
/// "mode" key in the file; per-replicate seeds come from the seeds list, so
/// train.seed is not part of the file format.
struct RunConfig {
    Task task = Task::Regression;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";
    double alpha_leak = 0.01;
    bool output_heads = true;
    TrainConfig train;
    SimParams sim;

    void validate() const;
    Model build_model() const;
};

/// Strict parse: every key must be known (unknown keys are rejected at every
/// nesting level), missing keys keep their defaults. Failures raise
/// ParamError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Canonical echo with fixed key order; itself a valid input config that
/// parses back to an identical RunConfig.
std::string run_config_json(const RunConfig& rc);

}  // namespace utvi
