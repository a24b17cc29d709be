#pragma once

#include <cstdint>
#include <string>

#include "mtseq/tensor.hpp"

namespace mtseq::corpus {

// Binary frame matrix, little-endian:
//   bytes 0-3   magic "MTSF"
//   bytes 4-7   uint32 version (1)
//   bytes 8-11  uint32 frame count N
//   bytes 12-15 uint32 dimension D
//   bytes 16-19 uint32 dtype (1 = float32)
//   then N*D float32 values, row-major.
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::uint32_t kFeatureFloat32 = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& frames);

}  // namespace mtseq::corpus
