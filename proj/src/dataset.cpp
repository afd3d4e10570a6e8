#include "datashap/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "datashap/errors.hpp"
#include "datashap/rng.hpp"

namespace datashap {

void Dataset::validate() const {
  if (n < 1) throw ConsistencyError("dataset must contain at least one point");
  if (features.size() != n * d) {
    throw ConsistencyError("feature matrix has " + std::to_string(features.size()) +
                           " entries, expected n*d = " + std::to_string(n * d));
  }
  if (labels.size() != n) throw ConsistencyError("labels length differs from n");
  if (providerIds.size() != n) throw ConsistencyError("providerIds length differs from n");
  if (m < 1) throw LabelError("class count must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= m) {
      throw LabelError("label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(m) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.n = indices.size();
  out.d = d;
  out.m = m;
  out.features.reserve(indices.size() * d);
  for (std::size_t i : indices) {
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    out.providerIds.push_back(providerIds[i]);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < end && i < n; ++i) idx.push_back(i);
  return subset(idx);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kGaussianBlobs:
      return "gaussian-blobs";
    case SyntheticKind::kXor:
      return "xor";
    case SyntheticKind::kTwoMoons:
      return "two-moons";
  }
  return "unknown";
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "gaussian-blobs") return SyntheticKind::kGaussianBlobs;
  if (name == "xor") return SyntheticKind::kXor;
  if (name == "two-moons") return SyntheticKind::kTwoMoons;
  throw DomainError("unknown synthetic kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineNo = 0;
  std::size_t columns = 0;
  Dataset data;
  int maxLabel = -1;
  bool skippedHeader = !options.header;

  while (std::getline(in, line)) {
    ++lineNo;
    if (trim(line).empty()) continue;
    if (!skippedHeader) {
      skippedHeader = true;
      continue;
    }
    const auto fields = split_fields(line);
    const std::size_t rowIndex = data.n;
    if (columns == 0) {
      columns = fields.size();
      if (columns < 2) {
        throw ParseError("row " + std::to_string(rowIndex) + " (line " +
                         std::to_string(lineNo) + "): need at least two columns");
      }
      if (options.labelColumn >= columns) {
        throw LabelError("label column " + std::to_string(options.labelColumn) +
                         " out of range for " + std::to_string(columns) + " columns");
      }
      data.d = columns - 1;
    }
    if (fields.size() != columns) {
      throw ParseError("row " + std::to_string(rowIndex) + " (line " +
                       std::to_string(lineNo) + "): expected " + std::to_string(columns) +
                       " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < columns; ++c) {
      const std::string_view field = fields[c];
      if (field.empty()) {
        throw ParseError("row " + std::to_string(rowIndex) + " (line " +
                         std::to_string(lineNo) + "): empty field in column " +
                         std::to_string(c));
      }
      if (c == options.labelColumn) {
        int label = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), label);
        if (ec != std::errc() || ptr != field.data() + field.size() || label < 0) {
          throw LabelError("row " + std::to_string(rowIndex) + ": label '" +
                           std::string(field) + "' is not a non-negative integer");
        }
        data.labels.push_back(label);
        maxLabel = std::max(maxLabel, label);
      } else {
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
          throw ParseError("row " + std::to_string(rowIndex) + " (line " +
                           std::to_string(lineNo) + "): '" + std::string(field) +
                           "' is not a number");
        }
        data.features.push_back(value);
      }
    }
    data.providerIds.push_back(static_cast<std::int64_t>(rowIndex));
    ++data.n;
  }
  if (data.n == 0) throw ParseError("no data rows");
  data.m = maxLabel + 1;
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_csv(text, options);
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t count) {
    need(count);
    auto out = bytes_.subspan(pos_, count);
    pos_ += count;
    return out;
  }

 private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw FormatError("unexpected end of file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  ByteReader img(images);
  if (img.u32() != kIdxImagesMagic) throw FormatError("images file: bad IDX magic");
  const std::size_t count = img.u32();
  const std::size_t rows = img.u32();
  const std::size_t cols = img.u32();

  ByteReader lab(labels);
  if (lab.u32() != kIdxLabelsMagic) throw FormatError("labels file: bad IDX magic");
  const std::size_t labelCount = lab.u32();
  if (labelCount != count) {
    throw ConsistencyError("images file holds " + std::to_string(count) +
                           " items but labels file holds " + std::to_string(labelCount));
  }

  Dataset data;
  data.n = count;
  data.d = rows * cols;
  const auto pixels = img.take(count * data.d);
  const auto raw = lab.take(count);
  data.features.reserve(pixels.size());
  for (std::uint8_t p : pixels) data.features.push_back(static_cast<double>(p) / 255.0);
  int maxLabel = 0;
  for (std::size_t i = 0; i < count; ++i) {
    data.labels.push_back(raw[i]);
    data.providerIds.push_back(static_cast<std::int64_t>(i));
    maxLabel = std::max<int>(maxLabel, raw[i]);
  }
  data.m = maxLabel + 1;
  data.validate();
  return data;
}

Dataset load_idx(const std::filesystem::path& imagesPath,
                 const std::filesystem::path& labelsPath) {
  const auto images = read_file(imagesPath);
  const auto labels = read_file(labelsPath);
  return parse_idx(images, labels);
}

IdxBytes encode_idx(const Dataset& data, std::size_t rows, std::size_t cols) {
  if (rows * cols != data.d) throw ConsistencyError("rows*cols must equal feature dimension");
  IdxBytes out;
  put_u32(out.images, kIdxImagesMagic);
  put_u32(out.images, static_cast<std::uint32_t>(data.n));
  put_u32(out.images, static_cast<std::uint32_t>(rows));
  put_u32(out.images, static_cast<std::uint32_t>(cols));
  for (double v : data.features) {
    const double scaled = std::clamp(std::round(v * 255.0), 0.0, 255.0);
    out.images.push_back(static_cast<std::uint8_t>(scaled));
  }
  put_u32(out.labels, kIdxLabelsMagic);
  put_u32(out.labels, static_cast<std::uint32_t>(data.n));
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw LabelError("IDX labels must fit in one byte");
    out.labels.push_back(static_cast<std::uint8_t>(y));
  }
  return out;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& imagesPath,
               const std::filesystem::path& labelsPath) {
  const auto bytes = encode_idx(data, rows, cols);
  write_file(imagesPath, bytes.images);
  write_file(labelsPath, bytes.labels);
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (hasSpare_) {
      hasSpare_ = false;
      return spare_;
    }
    double u1 = uniform01(rng_);
    while (u1 <= 0.0) u1 = uniform01(rng_);
    const double u2 = uniform01(rng_);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    hasSpare_ = true;
    return radius * std::cos(angle);
  }

  double uniform() { return uniform01(rng_); }

 private:
  Rng rng_;
  double spare_ = 0.0;
  bool hasSpare_ = false;
};

void check_spec(const SyntheticSpec& spec) {
  if (spec.n < 1) throw DomainError("synthetic spec: n must be at least 1");
  if (spec.d < 1) throw DomainError("synthetic spec: d must be at least 1");
  if (spec.m < 1) throw DomainError("synthetic spec: m must be at least 1");
  if (!(spec.noiseStd >= 0.0)) throw DomainError("synthetic spec: noiseStd must be >= 0");
  if (spec.kind == SyntheticKind::kXor || spec.kind == SyntheticKind::kTwoMoons) {
    if (spec.m != 2) throw DomainError("synthetic spec: " + to_string(spec.kind) + " requires m = 2");
    if (spec.d < 2) throw DomainError("synthetic spec: " + to_string(spec.kind) + " requires d >= 2");
  }
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  check_spec(spec);
  GaussianSource gauss(spec.seed);
  Dataset data;
  data.n = spec.n;
  data.d = spec.d;
  data.m = spec.m;
  data.features.assign(spec.n * spec.d, 0.0);

  for (std::size_t i = 0; i < spec.n; ++i) {
    double* x = data.features.data() + i * spec.d;
    int label = 0;
    switch (spec.kind) {
      case SyntheticKind::kGaussianBlobs: {
        label = static_cast<int>(i % static_cast<std::size_t>(spec.m));
        if (spec.d == 1) {
          x[0] = spec.separation * label;
        } else {
          const double angle = 2.0 * std::numbers::pi * label / spec.m;
          x[0] = spec.separation * std::cos(angle);
          x[1] = spec.separation * std::sin(angle);
        }
        break;
      }
      case SyntheticKind::kXor: {
        // Quadrants in counter-clockwise order starting at (+,+); the label is
        // the parity of the quadrant index.
        static constexpr double kCorner[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
        const std::size_t q = i % 4;
        x[0] = kCorner[q][0];
        x[1] = kCorner[q][1];
        label = static_cast<int>(q % 2);
        break;
      }
      case SyntheticKind::kTwoMoons: {
        label = static_cast<int>(i % 2);
        const double t = std::numbers::pi * gauss.uniform();
        if (label == 0) {
          x[0] = std::cos(t);
          x[1] = std::sin(t);
        } else {
          x[0] = 1.0 - std::cos(t);
          x[1] = 0.5 - std::sin(t);
        }
        break;
      }
    }
    if (spec.noiseStd > 0.0) {
      for (std::size_t k = 0; k < spec.d; ++k) x[k] += spec.noiseStd * gauss.next();
    }
    data.labels.push_back(label);
    data.providerIds.push_back(static_cast<std::int64_t>(i));
  }
  return data;
}

}  // namespace datashap
