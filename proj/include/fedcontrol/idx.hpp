#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"

namespace fedcontrol {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

// Big-endian 32-bit read at byte offset; caller guarantees bounds.
inline std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

}  // namespace detail

// Parsed image file: `count` images of rows x cols bytes, row-major.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<unsigned char> pixels;
};

inline IdxImages parse_idx_images(std::span<const unsigned char> bytes, const std::string& name) {
  // The magic fits in the first four bytes, so a wrong file kind is
  // reported as such even when the file is too short for a full header.
  if (bytes.size() < 4) {
    throw IdxError(name + ": header truncated", IdxError::Code::TruncatedPayload);
  }
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw IdxError(name + ": bad magic " + std::to_string(magic), IdxError::Code::BadMagic);
  }
  if (bytes.size() < 16) {
    throw IdxError(name + ": header truncated", IdxError::Code::TruncatedPayload);
  }
  IdxImages images;
  images.count = detail::read_be32(bytes, 4);
  images.rows = detail::read_be32(bytes, 8);
  images.cols = detail::read_be32(bytes, 12);
  const std::size_t expected =
      16 + static_cast<std::size_t>(images.count) * images.rows * images.cols;
  if (bytes.size() < expected) {
    throw IdxError(name + ": payload truncated (" + std::to_string(bytes.size()) + " of " +
                       std::to_string(expected) + " bytes)",
                   IdxError::Code::TruncatedPayload);
  }
  images.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(expected));
  return images;
}

inline std::vector<unsigned char> parse_idx_labels(std::span<const unsigned char> bytes,
                                                   const std::string& name) {
  if (bytes.size() < 4) {
    throw IdxError(name + ": header truncated", IdxError::Code::TruncatedPayload);
  }
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw IdxError(name + ": bad magic " + std::to_string(magic), IdxError::Code::BadMagic);
  }
  if (bytes.size() < 8) {
    throw IdxError(name + ": header truncated", IdxError::Code::TruncatedPayload);
  }
  const std::uint32_t count = detail::read_be32(bytes, 4);
  const std::size_t expected = 8 + static_cast<std::size_t>(count);
  if (bytes.size() < expected) {
    throw IdxError(name + ": payload truncated (" + std::to_string(bytes.size()) + " of " +
                       std::to_string(expected) + " bytes)",
                   IdxError::Code::TruncatedPayload);
  }
  return {bytes.begin() + 8, bytes.begin() + static_cast<std::ptrdiff_t>(expected)};
}

// Reads a paired image/label IDX file set into a Dataset. Pixels are scaled
// to [0, 1] by division by 255; each image flattens to rows*cols features.
inline Dataset read_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto image_bytes = detail::read_file_bytes(images_path);
  const auto label_bytes = detail::read_file_bytes(labels_path);

  const IdxImages images = parse_idx_images(image_bytes, images_path.filename().string());
  const auto labels = parse_idx_labels(label_bytes, labels_path.filename().string());
  if (images.count != labels.size()) {
    throw IdxError("image count " + std::to_string(images.count) + " != label count " +
                       std::to_string(labels.size()),
                   IdxError::Code::CountMismatch);
  }

  Dataset data;
  data.num_features = static_cast<std::size_t>(images.rows) * images.cols;
  data.features.reserve(images.pixels.size());
  for (unsigned char p : images.pixels) {
    data.features.push_back(static_cast<double>(p) / 255.0);
  }
  data.labels.reserve(labels.size());
  for (unsigned char l : labels) data.labels.push_back(static_cast<int>(l));
  return data;
}

// Writes the paired IDX files for a dataset whose features are [0, 1]
// pixel intensities. The feature count must factor as rows*cols.
inline void write_idx(const Dataset& data, std::uint32_t rows, std::uint32_t cols,
                      const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  if (static_cast<std::size_t>(rows) * cols != data.num_features) {
    throw std::invalid_argument("write_idx: rows*cols must equal the feature count");
  }
  const auto put_be32 = [](std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
  };

  std::vector<unsigned char> image_bytes;
  image_bytes.reserve(16 + data.features.size());
  put_be32(image_bytes, kIdxImagesMagic);
  put_be32(image_bytes, static_cast<std::uint32_t>(data.size()));
  put_be32(image_bytes, rows);
  put_be32(image_bytes, cols);
  for (double f : data.features) {
    image_bytes.push_back(static_cast<unsigned char>(std::lround(f * 255.0)));
  }

  std::vector<unsigned char> label_bytes;
  label_bytes.reserve(8 + data.labels.size());
  put_be32(label_bytes, kIdxLabelsMagic);
  put_be32(label_bytes, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) label_bytes.push_back(static_cast<unsigned char>(l));

  const auto write_bytes = [](const std::filesystem::path& path,
                              const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
  };
  write_bytes(images_path, image_bytes);
  write_bytes(labels_path, label_bytes);
}

}  // namespace fedcontrol
