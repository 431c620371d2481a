#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "trace.hpp"

namespace actsum {

// Feature file layout (little-endian):
//   u32 channels, u32 height, u32 width, u32 frame_count,
//   frame_count * channels * height * width f32 values, channel-major.
struct FeatureFileHeader {
  FeatureShape shape;
  std::uint32_t frame_count = 0;
};

FeatureFileHeader read_feature_header(const std::filesystem::path& path);
std::vector<FeatureGrid> read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, std::span<const FeatureGrid> frames);

}  // namespace actsum
