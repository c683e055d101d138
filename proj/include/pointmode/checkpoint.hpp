/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pointmode/model.hpp"
#include "pointmode/optim.hpp"

namespace pointmode::io {

struct TensorRecord {
    std::vector<int> shape;
    std::vector<double> values;
};

// Single-file, little-endian, versioned container: magic "PMCK", u32 version,
// u8 storage dtype (0 = f64, 1 = f32), training counters, the resolved config
// echo, then length-prefixed named tensors for parameters and optimizer
// slots. Save -> load -> save is byte-identical.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint8_t dtype = 0;
    std::uint64_t global_step = 0;
    std::uint64_t run_seed = 0;  // together with global_step this is the full RNG state
    std::string config_json;
    std::vector<std::pair<std::string, TensorRecord>> params;
    std::vector<std::pair<std::string, TensorRecord>> opt_slots;
    std::uint64_t opt_steps = 0;

    std::map<std::string, std::vector<double>> param_values() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot(const model::ModeModel& model, const optim::AdamW* opt, const std::string& config_json,
                    std::uint64_t global_step, std::uint64_t run_seed, std::uint8_t dtype);

void restore_model(model::ModeModel& model, const Checkpoint& ckpt);
// Requires the optimizer to be built over model.parameters() in order.
void restore_optimizer(optim::AdamW& opt, const model::ModeModel& model, const Checkpoint& ckpt);

}  // namespace pointmode::io
