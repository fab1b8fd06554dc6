// Copyright 2026 The p2pfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/errors.hpp"

namespace p2pfl {

// Row-major N x D feature matrix with labels. Features are stored as float to
// keep CIFAR-10 in memory; the learner widens batches to double.
struct Dataset {
  std::string name;
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<float> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * dims, dims);
  }
};

// A client's training data: indices into a shared, immutable Dataset.
class Shard {
 public:
  Shard() = default;
  Shard(std::shared_ptr<const Dataset> data, std::vector<std::size_t> indices)
      : data_(std::move(data)), indices_(std::move(indices)) {}

  // Whole dataset as one shard.
  explicit Shard(std::shared_ptr<const Dataset> data) : data_(std::move(data)) {
    indices_.resize(data_->size());
    std::iota(indices_.begin(), indices_.end(), std::size_t{0});
  }

  const Dataset& data() const { return *data_; }
  std::span<const std::size_t> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }

  bool operator==(const Shard& o) const {
    return data_ == o.data_ && indices_ == o.indices_;
  }

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> indices_;
};

struct Partition {
  std::vector<std::vector<std::size_t>> client_shards;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes,
                               std::size_t offset,
                               const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw DataError(path.string() + ": truncated header at offset " +
                    std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

// First existing candidate inside `dir`, or the first name for the error.
inline std::filesystem::path find_file(const std::filesystem::path& dir,
                                       std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (std::filesystem::exists(dir / n)) return dir / n;
  }
  return dir / *names.begin();
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  std::uint32_t magic = 0;
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  IdxImages out;
  out.magic = detail::read_be32(bytes, 0, path);
  if (out.magic != kIdxImageMagic) {
    throw DataError(path.string() + ": bad magic number " +
                    std::to_string(out.magic) + " at offset 0 (expected 2051)");
  }
  out.count = detail::read_be32(bytes, 4, path);
  out.rows = detail::read_be32(bytes, 8, path);
  out.cols = detail::read_be32(bytes, 12, path);
  const std::size_t need =
      std::size_t{out.count} * out.rows * out.cols;
  if (bytes.size() - 16 < need) {
    throw DataError(path.string() + ": truncated pixel data at offset " +
                    std::to_string(bytes.size()) + " (expected " +
                    std::to_string(16 + need) + " bytes)");
  }
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + need);
  return out;
}

inline std::vector<std::uint8_t> read_idx_labels(
    const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  const std::uint32_t magic = detail::read_be32(bytes, 0, path);
  if (magic != kIdxLabelMagic) {
    throw DataError(path.string() + ": bad magic number " +
                    std::to_string(magic) + " at offset 0 (expected 2049)");
  }
  const std::uint32_t count = detail::read_be32(bytes, 4, path);
  if (bytes.size() - 8 < count) {
    throw DataError(path.string() + ": truncated label data at offset " +
                    std::to_string(bytes.size()) + " (expected " +
                    std::to_string(8 + std::size_t{count}) + " bytes)");
  }
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.begin() + 8 + count);
}

inline Dataset load_idx_pair(const std::filesystem::path& images_path,
                             const std::filesystem::path& labels_path,
                             std::string name) {
  IdxImages images = read_idx_images(images_path);
  std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (labels.size() != images.count) {
    throw DataError(labels_path.string() + ": " +
                    std::to_string(labels.size()) + " labels but " +
                    images_path.string() + " holds " +
                    std::to_string(images.count) + " images");
  }
  Dataset d;
  d.name = std::move(name);
  d.dims = std::size_t{images.rows} * images.cols;
  d.classes = 10;
  d.features.resize(images.pixels.size());
  std::transform(images.pixels.begin(), images.pixels.end(), d.features.begin(),
                 [](std::uint8_t p) { return static_cast<float>(p) / 255.0f; });
  d.labels.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= d.classes) {
      throw DataError(labels_path.string() + ": label " +
                      std::to_string(labels[i]) + " at offset " +
                      std::to_string(8 + i) + " is not a digit");
    }
    d.labels.push_back(labels[i]);
  }
  return d;
}

// Reads the four standard MNIST IDX files from `dir`.
inline TrainTest load_mnist(const std::filesystem::path& dir) {
  using detail::find_file;
  TrainTest out{
      load_idx_pair(
          find_file(dir, {"train-images-idx3-ubyte", "train-images.idx3-ubyte"}),
          find_file(dir, {"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"}),
          "mnist-train"),
      load_idx_pair(
          find_file(dir, {"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"}),
          find_file(dir, {"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"}),
          "mnist-test")};
  for (const Dataset* d : {&out.train, &out.test}) {
    if (d->dims != 784) {
      throw DataError(d->name + ": expected 28x28 images, got " +
                      std::to_string(d->dims) + " pixels per image");
    }
  }
  return out;
}

inline constexpr std::size_t kCifarPixels = 32 * 32 * 3;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;

// Appends one CIFAR-10 binary batch (label byte + R, G, B planes per record).
inline void append_cifar_batch(const std::filesystem::path& path, Dataset& d) {
  const auto bytes = detail::read_bytes(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(path.string() + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of the " +
                    std::to_string(kCifarRecordBytes) + "-byte record");
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  d.features.reserve(d.features.size() + records * kCifarPixels);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t off = r * kCifarRecordBytes;
    if (bytes[off] >= 10) {
      throw DataError(path.string() + ": label byte " +
                      std::to_string(bytes[off]) + " at offset " +
                      std::to_string(off) + " is >= 10");
    }
    d.labels.push_back(bytes[off]);
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      d.features.push_back(static_cast<float>(bytes[off + 1 + p]) / 255.0f);
    }
  }
}

// Reads data_batch_1..5 and test_batch from `dir` (or its
// cifar-10-batches-bin subdirectory).
inline TrainTest load_cifar10(const std::filesystem::path& dir) {
  std::filesystem::path root = dir;
  if (!std::filesystem::exists(root / "test_batch.bin") &&
      std::filesystem::exists(dir / "cifar-10-batches-bin")) {
    root = dir / "cifar-10-batches-bin";
  }
  TrainTest out;
  for (Dataset* d : {&out.train, &out.test}) {
    d->dims = kCifarPixels;
    d->classes = 10;
  }
  out.train.name = "cifar10-train";
  out.test.name = "cifar10-test";
  for (int b = 1; b <= 5; ++b) {
    append_cifar_batch(root / ("data_batch_" + std::to_string(b) + ".bin"),
                       out.train);
  }
  append_cifar_batch(root / "test_batch.bin", out.test);
  return out;
}

// Gaussian class blobs (unit variance) whose means sit `separation` apart,
// rescaled as a whole into [0, 1]. Labels are assigned round-robin.
inline Dataset synth_blobs(std::size_t n, std::size_t dims, std::size_t classes,
                           std::uint64_t seed, double separation = 6.0) {
  if (classes < 2 || dims == 0 || n < classes) {
    throw InvalidArgument("synth_blobs: need classes >= 2, dims >= 1, n >= classes");
  }
  // Means on coordinate axes when there are enough dimensions, otherwise
  // evenly spaced along the first axis.
  std::vector<std::vector<double>> means(classes, std::vector<double>(dims, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    if (classes <= dims) {
      means[c][c] = separation;
    } else {
      means[c][0] = separation * static_cast<double>(c);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> raw(n * dims);
  Dataset d;
  d.name = "synth";
  d.dims = dims;
  d.classes = classes;
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dims; ++j) {
      raw[i * dims + j] = means[c][j] + noise(rng);
    }
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo;
  const double span = std::max(*hi - *lo, 1e-12);
  d.features.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    d.features[i] = static_cast<float>((raw[i] - min) / span);
  }
  return d;
}

// Seeded shuffle of 0..n-1 dealt round-robin into k shards.
inline Partition partition_iid(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) {
    throw InvalidArgument("partition_iid: cannot split " + std::to_string(n) +
                          " samples into " + std::to_string(k) + " shards");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Partition p;
  p.client_shards.resize(k);
  for (auto& s : p.client_shards) s.reserve(n / k + 1);
  for (std::size_t i = 0; i < n; ++i) p.client_shards[i % k].push_back(order[i]);
  return p;
}

inline Partition partition_iid(const Dataset& data, std::size_t k,
                               std::uint64_t seed) {
  return partition_iid(data.size(), k, seed);
}

// Keeps max(1, round(fraction * |indices|)) uniformly chosen indices, in
// ascending order.
inline std::vector<std::size_t> subsample(std::span<const std::size_t> indices,
                                          double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("subsample: fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> out(indices.begin(), indices.end());
  if (fraction == 1.0 || out.empty()) return out;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * out.size())));
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  out.resize(keep);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::size_t> class_counts(const Dataset& d,
                                             std::span<const std::size_t> indices) {
  std::vector<std::size_t> counts(d.classes, 0);
  for (std::size_t i : indices) ++counts[static_cast<std::size_t>(d.labels[i])];
  return counts;
}

inline std::vector<std::size_t> class_counts(const Dataset& d) {
  std::vector<std::size_t> counts(d.classes, 0);
  for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

// Debug CSV: header `label,f0,...,f{D-1}`, one sample per line, floats in
// shortest round-trip form.
inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
  out << "label";
  for (std::size_t j = 0; j < d.dims; ++j) out << ",f" << j;
  out << '\n';
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.labels[i];
    for (float v : d.row(i)) {
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out << ',' << std::string_view(buf.data(), end - buf.data());
    }
    out << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in, std::size_t classes,
                                std::string name = "csv") {
  Dataset d;
  d.name = std::move(name);
  d.classes = classes;
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw DataError(d.name + ": missing `label,f0,...` header");
  }
  d.dims = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (col == 0) {
        int label = 0;
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || p != last || label < 0 ||
            static_cast<std::size_t>(label) >= classes) {
          throw DataError(d.name + ": bad label on line " + std::to_string(line_no));
        }
        d.labels.push_back(label);
      } else {
        float v = 0.0f;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || p != last) {
          throw DataError(d.name + ": bad value on line " + std::to_string(line_no));
        }
        d.features.push_back(v);
      }
      ++col;
    }
    if (col != d.dims + 1) {
      throw DataError(d.name + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(col) + " fields, expected " +
                      std::to_string(d.dims + 1));
    }
  }
  return d;
}

}  // namespace p2pfl
