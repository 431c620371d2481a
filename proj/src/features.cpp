#include "features.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "error.hpp"

namespace actsum {
namespace {

static_assert(std::endian::native == std::endian::little,
              "feature files are read with native little-endian layout");

std::uint32_t read_u32(std::istream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw LoadError("feature file " + path.string() + ": truncated header");
  return v;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

FeatureFileHeader read_header(std::istream& in, const std::filesystem::path& path) {
  FeatureFileHeader h;
  h.shape.channels = read_u32(in, path);
  h.shape.height = read_u32(in, path);
  h.shape.width = read_u32(in, path);
  h.frame_count = read_u32(in, path);
  if (h.shape.size() == 0)
    throw LoadError("feature file " + path.string() + ": zero dimension in header");
  return h;
}

}  // namespace

FeatureFileHeader read_feature_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open feature file " + path.string());
  auto h = read_header(in, path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uintmax_t>(in.tellg());
  const std::uintmax_t expected =
      16 + static_cast<std::uintmax_t>(h.frame_count) * h.shape.size() * sizeof(float);
  if (bytes != expected)
    throw LoadError("feature file " + path.string() + ": size " + std::to_string(bytes) +
                    " does not match header (expected " + std::to_string(expected) + ")");
  return h;
}

std::vector<FeatureGrid> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open feature file " + path.string());
  const auto h = read_header(in, path);
  std::vector<FeatureGrid> frames;
  frames.reserve(h.frame_count);
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    std::vector<float> values(h.shape.size());
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float))))
      throw LoadError("feature file " + path.string() + ": truncated at frame " +
                      std::to_string(i));
    frames.emplace_back(h.shape, std::move(values));
  }
  return frames;
}

void write_feature_file(const std::filesystem::path& path, std::span<const FeatureGrid> frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write feature file " + path.string());
  const FeatureShape shape = frames.empty() ? FeatureShape{1, 1, 1} : frames.front().shape();
  write_u32(out, shape.channels);
  write_u32(out, shape.height);
  write_u32(out, shape.width);
  write_u32(out, static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) {
    if (!(f.shape() == shape)) throw DomainError("frames of one episode must share a shape");
    out.write(reinterpret_cast<const char*>(f.values().data()),
              static_cast<std::streamsize>(f.values().size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace actsum
