#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "datashap/dataset.hpp"
#include "datashap/grouping.hpp"
#include "datashap/mask.hpp"
#include "datashap/model.hpp"
#include "datashap/shapley.hpp"
#include "datashap/utility.hpp"

namespace datashap {

enum class Variant { kFds, kAfds, kGfds, kGfdsPlus };
enum class PlusHead { kPenalty, kSplit };
enum class Optimizer { kSgd, kAdam };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
std::string to_string(PlusHead h);
PlusHead plus_head_from_string(const std::string& name);
std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& name);

// One-hidden-layer tanh network from [x, onehot(y)] to an (outputs x m) grid.
// outputs == players for every head except the GFDS+ split head, where it is
// the group count and `partition` maps group values back to data points.
struct ExplainerParams {
  std::size_t inputDim = 0;
  std::size_t labels = 0;
  std::size_t players = 0;
  std::size_t outputs = 0;
  std::size_t hiddenUnits = 0;
  std::uint64_t initSeed = 0;
  // W1 (h x (d+m)), b1 (h), W2 ((outputs*m) x h), b2 (outputs*m).
  // Grid entry (row i, label y) lives at output index i*m + y.
  std::vector<double> values;
  std::optional<GroupPartition> partition;

  std::size_t parameter_count() const;
  bool split_head() const { return partition.has_value(); }
};

struct ExplainerShape {
  std::size_t inputDim = 0;
  std::size_t labels = 0;
  std::size_t players = 0;
  std::size_t hiddenUnits = 32;
};

ExplainerParams init_explainer(const ExplainerShape& shape, std::uint64_t seed);
ExplainerParams zero_explainer(const ExplainerShape& shape);
// Split head: the grid has one row per group.
ExplainerParams init_split_explainer(const ExplainerShape& shape, const GroupPartition& partition,
                                     std::uint64_t seed);

// Grid column y (length `outputs`).
std::vector<double> explainer_raw(const ExplainerParams& params, std::span<const double> x, int y);
// Per-datum attributions before normalization (length `players`).
std::vector<double> explainer_forward(const ExplainerParams& params, std::span<const double> x, int y);
// Efficiency-normalized attributions. The split head normalizes group values
// and then divides each evenly among its members.
ShapleyVector predict_normalized(const ExplainerParams& params, std::span<const double> x, int y,
                                 double vOne, double vZero);

// One residual term of the training objective. `mask` indexes grid rows
// (length `outputs`).
struct LossSample {
  std::vector<double> x;
  int y = 0;
  SubsetMask mask;
  double value = 0.0;
  Endpoints ends;
};

// Optional in-group spread penalty gamma * sum_i ||phi_Gi - mean(phi_Gi)||.
struct PenaltySpec {
  const GroupPartition* partition = nullptr;
  double gamma = 0.0;
};

// Mean over samples of (v(s) - v(0) - s^T normalize(phi))^2 plus the penalty.
// `grad` (if non-empty) receives the gradient w.r.t. params.values.
double explainer_loss(const ExplainerParams& params, std::span<const LossSample> batch,
                      const PenaltySpec& penalty, std::span<double> grad = {});

struct ExplainerTrainConfig {
  Variant variant = Variant::kFds;
  double alpha = 2e-4;
  // Parameter updates. GFDS performs N updates per sampled (x, y) batch, so
  // it draws ceil(steps / N) batches.
  std::size_t steps = 1000;
  std::size_t batchSize = 32;
  std::size_t K = 10;
  double beta = 10.0;
  std::size_t N = 0;
  double gamma = 0.0;
  PlusHead gfdsPlusHead = PlusHead::kSplit;
  Optimizer optimizer = Optimizer::kAdam;
  std::size_t hiddenUnits = 32;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct ExplainerTrainResult {
  ExplainerParams params;
  // Mean batch loss per parameter update.
  std::vector<double> lossTrace;
  std::size_t utilityQueries = 0;
};

// FDS loop for any provider (AFDS passes the K-epoch provider).
ExplainerTrainResult train_fds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                               const ExplainerTrainConfig& cfg);
// Builds the K-epoch, beta-scaled provider from `train` and runs the FDS loop.
ExplainerTrainResult train_afds(const Dataset& pool, std::shared_ptr<const Dataset> train,
                                const UtilityConfig& serviceCfg, const ExplainerTrainConfig& cfg);
ExplainerTrainResult train_afds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                                const ExplainerTrainConfig& cfg);
ExplainerTrainResult train_gfds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                                const GroupPartition& partition, const ExplainerTrainConfig& cfg);
ExplainerTrainResult train_gfds_plus(const Dataset& pool,
                                     std::shared_ptr<const UtilityProvider> provider,
                                     const GroupPartition& partition,
                                     const ExplainerTrainConfig& cfg);

// Checkpoint: "<stem>.bin" parameter blob plus "<stem>.json" sidecar.
struct ExplainerCheckpointInfo {
  ExplainerTrainConfig cfg;
  std::uint64_t serviceSeed = 0;
};
void save_explainer(const ExplainerParams& params, const ExplainerCheckpointInfo& info,
                    const std::filesystem::path& stem);
ExplainerParams load_explainer(const std::filesystem::path& stem);

}  // namespace datashap
