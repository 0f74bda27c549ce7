#pragma once

#include <string>

#include "utvi/model.hpp"
#include "utvi/train.hpp"

namespace utvi {

struct Checkpoint {
    TrainConfig config;  // echo of the run that produced the parameters
    Model model;
    std::size_t epoch = 0;  // 1-based epoch the parameters were taken from
    bool best = false;
};

/// Canonical JSON serialization: fixed key order, 17-significant-digit
/// reals, so save -> load -> save is byte-identical.
std::string checkpoint_json(const Checkpoint& ck);

void save_checkpoint(const std::string& path, const Checkpoint& ck);

/// Strict reader: format tag, key set, types, and array shapes are all
/// validated; any mismatch raises ArtifactError.
Checkpoint parse_checkpoint(const std::string& json_text);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace utvi
