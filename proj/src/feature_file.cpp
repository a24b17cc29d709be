#include "mtseq/feature_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "mtseq/errors.hpp"

namespace mtseq::corpus {
namespace {

constexpr std::array<char, 4> kMagic{'M', 'T', 'S', 'F'};

std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

Tensor read_feature_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature file " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < kFeatureHeaderBytes)
    throw FormatError(path + ": truncated header at byte offset " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  if (read_u32(bytes, 4) != kFeatureVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(read_u32(bytes, 4)) +
                      " at byte offset 4");
  const std::uint32_t frames = read_u32(bytes, 8);
  const std::uint32_t dim = read_u32(bytes, 12);
  if (frames == 0) throw FormatError(path + ": zero frame count at byte offset 8");
  if (dim == 0) throw FormatError(path + ": zero dimension at byte offset 12");
  if (read_u32(bytes, 16) != kFeatureFloat32)
    throw FormatError(path + ": unsupported dtype at byte offset 16");
  const std::size_t expected = static_cast<std::size_t>(frames) * dim * 4;
  const std::size_t payload = bytes.size() - kFeatureHeaderBytes;
  if (payload != expected)
    throw FormatError(path + ": payload of " + std::to_string(payload) + " bytes at byte offset " +
                      std::to_string(kFeatureHeaderBytes) + " but header implies " +
                      std::to_string(expected));
  Tensor t({frames, dim});
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint32_t raw = read_u32(bytes, kFeatureHeaderBytes + 4 * i);
    t[i] = static_cast<double>(std::bit_cast<float>(raw));
  }
  return t;
}

void write_feature_file(const std::string& path, const Tensor& frames) {
  if (frames.rank() != 2) throw ShapeError("feature matrix must be 2-D, got " + shape_str(frames.shape()));
  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<std::uint32_t>(frames.rows()));
  put_u32(out, static_cast<std::uint32_t>(frames.cols()));
  put_u32(out, kFeatureFloat32);
  for (double v : frames.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write feature file " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace mtseq::corpus
