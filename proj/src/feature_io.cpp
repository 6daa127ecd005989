// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/feature_io.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "vidmerge/rng.hpp"

namespace vidmerge {

namespace {

constexpr std::array<char, 4> kFeatureMagic{'L', 'V', 'F', 'T'};
constexpr std::array<char, 4> kProjectionMagic{'L', 'V', 'P', 'W'};
constexpr std::array<char, 4> kCompressedMagic{'L', 'V', 'C', 'R'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t narrow_extent(std::size_t value, std::string_view name) {
  if (value > UINT32_MAX) {
    throw Error(ErrorCode::InvalidShape,
                fmt::format("{}={} does not fit the u32 header field", name,
                            value));
  }
  return static_cast<std::uint32_t>(value);
}

void write_floats(std::ostream& out, std::span<const float> values) {
  constexpr std::size_t kChunk = 1 << 14;
  std::string buffer;
  buffer.reserve(kChunk * 4);
  for (std::size_t begin = 0; begin < values.size(); begin += kChunk) {
    buffer.clear();
    const std::size_t end = std::min(values.size(), begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) {
      put_u32(buffer, std::bit_cast<std::uint32_t>(values[i]));
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  }
}

void check_stream(const std::ostream& out) {
  if (!out) throw Error(ErrorCode::IoError, "write to output stream failed");
}

/// Reads exactly `count` bytes or reports how many were available.
std::vector<unsigned char> read_exact(std::istream& in, std::uint64_t count,
                                      std::string_view what) {
  constexpr std::uint64_t kChunk = 1 << 20;
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(std::min(count, kChunk)));
  while (bytes.size() < count) {
    const std::uint64_t want = std::min<std::uint64_t>(kChunk, count - bytes.size());
    const std::size_t old = bytes.size();
    bytes.resize(old + want);
    in.read(reinterpret_cast<char*>(bytes.data() + old),
            static_cast<std::streamsize>(want));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got < want) {
      throw Error(ErrorCode::TruncatedPayload,
                  fmt::format("{}: expected {} bytes, stream ended after {}",
                              what, count, old + got));
    }
  }
  return bytes;
}

void expect_end(std::istream& in, std::string_view what) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::TruncatedPayload,
                fmt::format("{}: trailing bytes after declared payload", what));
  }
}

float decode_float(const unsigned char* p) {
  return std::bit_cast<float>(get_u32(p));
}

struct MatrixHeader {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

void check_common(const unsigned char* header, const std::array<char, 4>& magic,
                  std::string_view what) {
  if (std::memcmp(header, magic.data(), 4) != 0) {
    throw Error(ErrorCode::BadMagic,
                fmt::format("{}: expected magic {}", what,
                            std::string_view(magic.data(), 4)));
  }
  const std::uint16_t version = get_u16(header + 4);
  if (version != kContainerVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                fmt::format("{}: version {} (expected {})", what, version,
                            kContainerVersion));
  }
  if (header[6] != 0) {
    throw Error(ErrorCode::UnsupportedDtype,
                fmt::format("{}: dtype code {} (only 0 = float32)", what,
                            header[6]));
  }
}

MatrixHeader read_matrix_header(std::istream& in,
                                const std::array<char, 4>& magic,
                                std::string_view what) {
  const auto header = read_exact(in, kMatrixHeaderSize, what);
  check_common(header.data(), magic, what);
  MatrixHeader result{get_u32(header.data() + 7), get_u32(header.data() + 11)};
  if (get_u32(header.data() + 15) != 0) {
    throw Error(ErrorCode::ReservedFlags,
                fmt::format("{}: reserved flags must be 0", what));
  }
  if (result.rows == 0 || result.cols == 0) {
    throw Error(ErrorCode::InvalidShape,
                fmt::format("{}: zero extent {}x{}", what, result.rows,
                            result.cols));
  }
  return result;
}

void write_matrix_header(std::ostream& out, const std::array<char, 4>& magic,
                         std::size_t rows, std::size_t cols) {
  std::string header(magic.data(), 4);
  put_u16(header, kContainerVersion);
  header.push_back(0);
  put_u32(header, narrow_extent(rows, "rows"));
  put_u32(header, narrow_extent(cols, "cols"));
  put_u32(header, 0);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
}

std::vector<float> decode_checked(const std::vector<unsigned char>& bytes,
                                  std::size_t offset_floats, std::size_t count,
                                  std::string_view what) {
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = decode_float(bytes.data() + 4 * (offset_floats + i));
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  fmt::format("{}: non-finite value at element {}", what, i));
    }
  }
  return values;
}

template <typename Writer>
void write_file_atomically(const std::filesystem::path& path, Writer&& writer) {
  auto tmp = path;
  tmp += fmt::format(".tmp.{}", ::getpid());
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) {
        throw Error(ErrorCode::IoError,
                    fmt::format("cannot open {} for writing", tmp.string()));
      }
      writer(out);
      out.flush();
      check_stream(out);
    }
    std::filesystem::rename(tmp, path);
  } catch (const std::filesystem::filesystem_error& e) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw Error(ErrorCode::IoError, e.what());
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw;
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError,
                fmt::format("cannot open {} for reading", path.string()));
  }
  return in;
}

}  // namespace

std::optional<std::uint64_t> feature_payload_bytes(const VideoShape& shape) {
  using u128 = unsigned __int128;
  const u128 floats =
      static_cast<u128>(shape.num_frames) * shape.num_patches * shape.dim +
      static_cast<u128>(shape.num_frames) * shape.num_encoder_layers * shape.dim;
  const u128 bytes = floats * 4;
  if (bytes > UINT64_MAX) return std::nullopt;
  return static_cast<std::uint64_t>(bytes);
}

VideoFeatures read_features(std::istream& in) {
  constexpr std::string_view kWhat = "LVFT";
  const auto header = read_exact(in, kFeatureHeaderSize, kWhat);
  check_common(header.data(), kFeatureMagic, kWhat);
  VideoShape shape;
  shape.num_frames = get_u32(header.data() + 7);
  shape.num_patches = get_u32(header.data() + 11);
  shape.dim = get_u32(header.data() + 15);
  shape.num_encoder_layers = get_u32(header.data() + 19);
  if (get_u32(header.data() + 23) != 0) {
    throw Error(ErrorCode::ReservedFlags,
                "LVFT: flags must be 0 in version 1");
  }
  if (shape.num_frames == 0 || shape.num_patches == 0 || shape.dim == 0 ||
      shape.num_encoder_layers == 0) {
    throw Error(ErrorCode::InvalidShape, "LVFT: all extents must be positive");
  }
  const auto payload = feature_payload_bytes(shape);
  if (!payload) {
    throw Error(ErrorCode::TruncatedPayload,
                "LVFT: declared payload exceeds any representable stream");
  }
  const auto bytes = read_exact(in, *payload, kWhat);
  expect_end(in, kWhat);

  const std::size_t patch_count = shape.num_frames * shape.num_patches * shape.dim;
  const std::size_t cls_count =
      shape.num_frames * shape.num_encoder_layers * shape.dim;
  std::vector<float> patches(patch_count);
  std::vector<float> cls(cls_count);
  for (std::size_t i = 0; i < patch_count; ++i) {
    patches[i] = decode_float(bytes.data() + 4 * i);
    if (!std::isfinite(patches[i])) {
      const std::size_t c = i % shape.dim;
      const std::size_t n = (i / shape.dim) % shape.num_patches;
      const std::size_t t = i / (shape.dim * shape.num_patches);
      throw Error(ErrorCode::NonFiniteValue,
                  fmt::format("patch_tokens[t={}, n={}, c={}]", t, n, c));
    }
  }
  for (std::size_t i = 0; i < cls_count; ++i) {
    cls[i] = decode_float(bytes.data() + 4 * (patch_count + i));
    if (!std::isfinite(cls[i])) {
      const std::size_t c = i % shape.dim;
      const std::size_t layer = (i / shape.dim) % shape.num_encoder_layers;
      const std::size_t t = i / (shape.dim * shape.num_encoder_layers);
      throw Error(ErrorCode::NonFiniteValue,
                  fmt::format("cls_tokens[t={}, layer={}, c={}]", t, layer, c));
    }
  }
  return VideoFeatures(shape, std::move(patches), std::move(cls));
}

std::uint64_t write_features(const VideoFeatures& features, std::ostream& out) {
  const VideoShape& shape = features.shape();
  std::string header(kFeatureMagic.data(), 4);
  put_u16(header, kContainerVersion);
  header.push_back(0);
  put_u32(header, narrow_extent(shape.num_frames, "T"));
  put_u32(header, narrow_extent(shape.num_patches, "N"));
  put_u32(header, narrow_extent(shape.dim, "d"));
  put_u32(header, narrow_extent(shape.num_encoder_layers, "L_enc"));
  put_u32(header, 0);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_floats(out, features.patch_tokens());
  write_floats(out, features.cls_tokens());
  check_stream(out);
  return kFeatureHeaderSize +
         4 * (features.patch_tokens().size() + features.cls_tokens().size());
}

VideoFeatures read_features_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_features(in);
}

void write_features_file(const VideoFeatures& features,
                         const std::filesystem::path& path) {
  write_file_atomically(path,
                        [&](std::ostream& out) { write_features(features, out); });
}

ProjectionWeights read_projection(std::istream& in) {
  constexpr std::string_view kWhat = "LVPW";
  const MatrixHeader header = read_matrix_header(in, kProjectionMagic, kWhat);
  const std::uint64_t floats =
      static_cast<std::uint64_t>(header.rows) * header.cols + header.rows;
  const auto bytes = read_exact(in, floats * 4, kWhat);
  expect_end(in, kWhat);
  ProjectionWeights weights;
  weights.matrix.rows = header.rows;
  weights.matrix.cols = header.cols;
  const std::size_t matrix_count = std::size_t{header.rows} * header.cols;
  weights.matrix.values = decode_checked(bytes, 0, matrix_count, "LVPW matrix");
  weights.bias = decode_checked(bytes, matrix_count, header.rows, "LVPW bias");
  return weights;
}

std::uint64_t write_projection(const ProjectionWeights& weights,
                               std::ostream& out) {
  if (weights.matrix.values.size() != weights.d_out() * weights.d_in() ||
      weights.bias.size() != weights.d_out()) {
    throw Error(ErrorCode::DimensionMismatch,
                "projection matrix/bias sizes disagree with d_out x d");
  }
  write_matrix_header(out, kProjectionMagic, weights.d_out(), weights.d_in());
  write_floats(out, weights.matrix.values);
  write_floats(out, weights.bias);
  check_stream(out);
  return kMatrixHeaderSize +
         4 * (weights.matrix.values.size() + weights.bias.size());
}

ProjectionWeights read_projection_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_projection(in);
}

FloatMatrix read_compressed(std::istream& in) {
  constexpr std::string_view kWhat = "LVCR";
  const MatrixHeader header = read_matrix_header(in, kCompressedMagic, kWhat);
  const std::uint64_t floats = static_cast<std::uint64_t>(header.rows) * header.cols;
  const auto bytes = read_exact(in, floats * 4, kWhat);
  expect_end(in, kWhat);
  FloatMatrix matrix;
  matrix.rows = header.rows;
  matrix.cols = header.cols;
  matrix.values = decode_checked(bytes, 0, static_cast<std::size_t>(floats), kWhat);
  return matrix;
}

std::uint64_t write_compressed(const FloatMatrix& rows, std::ostream& out) {
  if (rows.values.size() != rows.rows * rows.cols) {
    throw Error(ErrorCode::DimensionMismatch,
                "matrix value count disagrees with rows x cols");
  }
  write_matrix_header(out, kCompressedMagic, rows.rows, rows.cols);
  write_floats(out, rows.values);
  check_stream(out);
  return kMatrixHeaderSize + 4 * rows.values.size();
}

FloatMatrix read_compressed_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_compressed(in);
}

void write_compressed_file(const FloatMatrix& rows,
                           const std::filesystem::path& path) {
  write_file_atomically(path,
                        [&](std::ostream& out) { write_compressed(rows, out); });
}

VideoFeatures generate_synthetic(const SyntheticSpec& spec) {
  const VideoShape& shape = spec.shape;
  if (shape.num_frames == 0 || shape.num_patches == 0 || shape.dim == 0 ||
      shape.num_encoder_layers == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "synthetic spec extents must be positive");
  }
  const std::size_t t_count = shape.num_frames;
  const std::size_t n_count = shape.num_patches;
  const std::size_t l_count = shape.num_encoder_layers;
  const std::size_t d = shape.dim;
  std::vector<float> patches(t_count * n_count * d);
  std::vector<float> cls(t_count * l_count * d);
  Rng rng(spec.seed);

  if (std::holds_alternative<GaussianIID>(spec.kind)) {
    for (float& v : patches) v = static_cast<float>(rng.normal());
    for (float& v : cls) v = static_cast<float>(rng.normal());
    return VideoFeatures(shape, std::move(patches), std::move(cls));
  }

  const std::size_t events = std::get<PiecewiseEvents>(spec.kind).num_events;
  if (events == 0 || events > t_count) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("num_events={} must lie in [1, T={}]", events,
                            t_count));
  }
  constexpr double kNoise = 0.1;
  // Largest b with floor(b*T/events) <= frame.
  auto event_of = [&](std::size_t frame) {
    return ((frame + 1) * events - 1) / t_count;
  };

  std::vector<double> patch_means(events * n_count * d);
  for (double& v : patch_means) v = rng.normal();
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t b = event_of(t);
    for (std::size_t n = 0; n < n_count; ++n) {
      const double* mean = patch_means.data() + (b * n_count + n) * d;
      float* dst = patches.data() + (t * n_count + n) * d;
      for (std::size_t c = 0; c < d; ++c) {
        dst[c] = static_cast<float>(mean[c] + kNoise * rng.normal());
      }
    }
  }
  std::vector<double> cls_means(events * l_count * d);
  for (double& v : cls_means) v = rng.normal();
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t b = event_of(t);
    for (std::size_t l = 0; l < l_count; ++l) {
      const double* mean = cls_means.data() + (b * l_count + l) * d;
      float* dst = cls.data() + (t * l_count + l) * d;
      for (std::size_t c = 0; c < d; ++c) {
        dst[c] = static_cast<float>(mean[c] + kNoise * rng.normal());
      }
    }
  }
  return VideoFeatures(shape, std::move(patches), std::move(cls));
}

}  // namespace vidmerge
