#pragma once

#include <filesystem>

#include "dsqa/diffusion.hpp"
#include "dsqa/features.hpp"
#include "dsqa/network.hpp"

namespace dsqa {

// Everything needed to score audio: weights, schedule and feature pipeline.
struct ModelBundle {
  DenoiserParams params;
  NoiseSchedule schedule;
  FeatureConfig feature;
};

// "DSQA0001" container: 8-byte magic, u32 little-endian header length, JSON
// header (format_version, arch, sigma_data, schedule, feature, norm,
// tensors), then float32 little-endian tensor payloads in header order.
// Tensors are stored row-major; values are widened to double in memory.
void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace dsqa
