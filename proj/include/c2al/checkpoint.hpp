#pragma once

#include <filesystem>

#include "c2al/model.hpp"

namespace c2al {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// Binary checkpoint, little-endian throughout:
//   "C2AL" | u32 version | u32 json_len | model-config JSON | u8 aux_flag |
//   f64 arrays: embedding tables by slot (row-major), attention (row-major),
//   primary head layer by layer (weights row-major, then bias), then the two
//   aux heads in the same layout when aux_flag is 1.
void save_checkpoint(const ModelParams& params, const ModelConfig& config,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace c2al
