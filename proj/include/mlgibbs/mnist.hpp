#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mlgibbs/common.hpp"
#include "mlgibbs/dataset.hpp"

namespace mlgibbs {

// IDX binary format as published with the MNIST set: big-endian headers,
// magic 0x00000803 for images and 0x00000801 for labels. Parsers check the
// exact file length so any corrupted header field is rejected.

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(bytes[at]) << 24) |
         (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[at + 3]);
}

inline std::vector<std::uint8_t> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw FormatError("images header: file truncated");
  if (detail::read_be32(bytes, 0) != 0x00000803u)
    throw FormatError("images magic: expected 0x00000803");
  IdxImages out;
  out.count = detail::read_be32(bytes, 4);
  out.rows = detail::read_be32(bytes, 8);
  out.cols = detail::read_be32(bytes, 12);
  const std::size_t expected = 16 + out.count * out.rows * out.cols;
  if (bytes.size() < expected) throw FormatError("images data: file truncated");
  if (bytes.size() > expected) throw FormatError("images data: trailing bytes");
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("labels header: file truncated");
  if (detail::read_be32(bytes, 0) != 0x00000801u)
    throw FormatError("labels magic: expected 0x00000801");
  const std::size_t count = detail::read_be32(bytes, 4);
  if (bytes.size() < 8 + count) throw FormatError("labels data: file truncated");
  if (bytes.size() > 8 + count) throw FormatError("labels data: trailing bytes");
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (std::uint8_t v : labels)
    if (v > 9) throw FormatError("labels value: class outside 0..9");
  return labels;
}

inline IdxImages load_idx_images(const std::string& path) {
  return parse_idx_images(detail::read_all_bytes(path));
}

inline std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  return parse_idx_labels(detail::read_all_bytes(path));
}

// pixels scaled into [0,1], labels one-hot over 10 classes; with 784 unit
// pixels the input norm is capped by sqrt(784) = 28, the radius used for R
inline Dataset idx_to_dataset(const IdxImages& images, const std::vector<std::uint8_t>& labels) {
  if (images.count != labels.size())
    throw FormatError("count mismatch: images " + std::to_string(images.count) + ", labels " +
                      std::to_string(labels.size()));
  const std::size_t dim = images.rows * images.cols;
  Dataset data;
  data.input_radius = std::sqrt(static_cast<double>(dim));
  data.examples.reserve(images.count);
  for (std::size_t i = 0; i < images.count; ++i) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    for (std::size_t p = 0; p < dim; ++p)
      x[static_cast<Eigen::Index>(p)] = images.pixels[i * dim + p] / 255.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    y[labels[i]] = 1.0;
    data.examples.push_back(Example{std::move(x), std::move(y)});
  }
  return data;
}

struct MnistData {
  Dataset train;
  Dataset test;
};

inline MnistData load_mnist(const std::string& dir) {
  MnistData out;
  out.train = idx_to_dataset(load_idx_images(dir + "/train-images-idx3-ubyte"),
                             load_idx_labels(dir + "/train-labels-idx1-ubyte"));
  out.test = idx_to_dataset(load_idx_images(dir + "/t10k-images-idx3-ubyte"),
                            load_idx_labels(dir + "/t10k-labels-idx1-ubyte"));
  return out;
}

}  // namespace mlgibbs
