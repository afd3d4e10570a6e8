#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "datashap/dataset.hpp"

namespace datashap {

enum class ModelKind { kLogistic, kMlp1 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Architecture {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t hiddenUnits = 0;
  std::size_t inputDim = 0;
  std::size_t outputDim = 0;

  void validate() const;
  std::size_t parameter_count() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Parameters stored flat. Logistic: W (m x d) then b (m).
// MLP: W1 (h x d), b1 (h), W2 (m x h), b2 (m). Hidden activation is tanh.
struct ModelParams {
  Architecture arch;
  std::uint64_t initSeed = 0;
  std::vector<double> values;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TrainConfig {
  double learningRate = 0.1;
  // Multiplies learningRate; sub-service models use beta > 1.
  double lrScale = 1.0;
  std::size_t epochs = 100;
  std::size_t batchSize = 1u << 20;
  std::uint64_t seed = 0;

  void validate() const;
  double step_size() const { return learningRate * lrScale; }
};

struct TrainResult {
  ModelParams params;
  std::vector<double> lossTrace;
  std::vector<ModelParams> snapshots;
};

struct TrainOptions {
  bool keepSnapshots = false;
  // Only the utility layer may train on zero points; the result is the
  // untouched initialization.
  bool allowEmpty = false;
};

// Uniform in [-1/sqrt(fanIn), 1/sqrt(fanIn)] for weights, zero biases.
ModelParams init_model(const Architecture& arch, std::uint64_t seed);
// All-zero parameters.
ModelParams zero_model(const Architecture& arch);

std::vector<double> logits(const ModelParams& params, std::span<const double> x);
std::vector<double> softmax(std::span<const double> z);
std::vector<double> predict_proba(const ModelParams& params, std::span<const double> x);
int predict_label(const ModelParams& params, std::span<const double> x);

// Mean cross-entropy over the selected rows; `grad` (if non-empty) receives
// the gradient w.r.t. params.values and must have parameter_count() entries.
double cross_entropy(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> rows, std::span<double> grad = {});

double accuracy(const ModelParams& params, const Dataset& data);

// Mini-batch gradient descent over `rows`. Full-batch when
// batchSize >= rows.size(). Empty `rows` throw unless allowEmpty is set.
// The overload without `rows` trains on every row.
TrainResult train(const ModelParams& init, const Dataset& data,
                  std::span<const std::size_t> rows, const TrainConfig& cfg,
                  const TrainOptions& options = {});
TrainResult train(const ModelParams& init, const Dataset& data, const TrainConfig& cfg,
                  const TrainOptions& options = {});

// True when the relative loss improvement over the last `window` epochs is
// below `tol`.
bool has_converged(std::span<const double> lossTrace, double tol, std::size_t window = 5);

// Binary parameter blob: "DSHP" magic, u32 version, u32 kind, u32 dim count,
// u64 dims..., u64 initSeed, u64 value count, f64 values (little-endian).
struct ParamBlob {
  std::uint32_t kind = 0;
  std::vector<std::uint64_t> dims;
  std::uint64_t initSeed = 0;
  std::vector<double> values;
};

std::vector<std::uint8_t> encode_blob(const ParamBlob& blob);
ParamBlob decode_blob(std::span<const std::uint8_t> bytes);
void write_blob(const ParamBlob& blob, const std::filesystem::path& path);
ParamBlob read_blob(const std::filesystem::path& path);

ParamBlob to_blob(const ModelParams& params);
ModelParams model_from_blob(const ParamBlob& blob);
std::string model_to_json(const ModelParams& params);

}  // namespace datashap
