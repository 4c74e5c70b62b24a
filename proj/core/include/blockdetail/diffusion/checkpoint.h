#pragma once

#include "blockdetail/diffusion/network.h"
#include "blockdetail/diffusion/training.h"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace blockdetail {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   "BDCKPT\0\0"  u32 version  u64 header_bytes  header (JSON)
///   u64 parameter_count  parameter_count x f64
/// The header holds the network config, schedule constants, the shape
/// table, channel statistics, the training config echo and final loss.
struct Checkpoint {
  std::shared_ptr<TinyDenoiserNet> net;
  nlohmann::json training;  // echo of the TrainingConfig used, may be null
  double final_loss = 0.0;
  int clip_count = 0;
};

Checkpoint checkpoint_from(const TrainingResult& result);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Validates magic, version, the shape table against the layout implied by
/// the config, and the parameter count, before building the network.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace blockdetail
