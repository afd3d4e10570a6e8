#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace datashap {

// Labeled feature vectors, one per data provider by default. Features are
// stored row-major as doubles.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  int m = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::int64_t> providerIds;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * d, d};
  }

  // Throws ConsistencyError/LabelError when the invariants do not hold.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  std::vector<std::size_t> class_counts() const;
};

enum class SyntheticKind { kGaussianBlobs, kXor, kTwoMoons };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kGaussianBlobs;
  std::size_t n = 20;
  std::size_t d = 2;
  int m = 2;
  double noiseStd = 0.5;
  std::uint64_t seed = 0;
  // Distance of blob centers from the origin.
  double separation = 3.0;
};

std::string to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& name);

struct CsvOptions {
  std::size_t labelColumn = 0;
  bool header = false;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
Dataset parse_csv(const std::string& text, const CsvOptions& options);

// MNIST-style IDX files: ubyte images (magic 0x803) and labels (magic 0x801).
Dataset load_idx(const std::filesystem::path& imagesPath,
                 const std::filesystem::path& labelsPath);
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels);

// Inverse of parse_idx for features in [0,1]; rows are emitted as
// rows x cols images (rows * cols must equal d).
struct IdxBytes {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};
IdxBytes encode_idx(const Dataset& data, std::size_t rows, std::size_t cols);
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& imagesPath,
               const std::filesystem::path& labelsPath);

// Labels cycle through 0..m-1, so class counts differ by at most one.
Dataset generate(const SyntheticSpec& spec);

}  // namespace datashap
