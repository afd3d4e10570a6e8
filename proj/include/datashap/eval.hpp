#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datashap/dataset.hpp"
#include "datashap/model.hpp"
#include "datashap/shapley.hpp"

namespace datashap {

// Mean cross-entropy of `model` on `testSet`; probabilities are clamped at
// 1e-12 before the log.
double value_loss(const Dataset& testSet, const ModelParams& model);

struct RemovalCurve {
  std::vector<double> etas;
  std::vector<double> hValues;
  std::string rankingSource;
  std::uint64_t seed = 0;
};

struct RemovalConfig {
  Architecture arch;  // input/output dims are taken from the data
  TrainConfig train;  // seed is replaced per eta
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Indices of the ceil(eta * n) largest rankings; ties go to the lower index.
std::vector<std::size_t> removal_set(std::span<const double> rankings, double eta);

// For each eta, retrain from scratch without the top-ranked points and record
// the value loss on `testSet`. Etas must be strictly increasing in [0, 1).
RemovalCurve removal_curve(const Dataset& data, std::span<const double> rankings,
                           std::span<const double> etas, const Dataset& testSet,
                           const RemovalConfig& cfg, std::string rankingSource = "");

// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

// Header "eta,h_value,method,seed", one row per curve point.
std::string format_curves_csv(std::span<const RemovalCurve> curves);

struct RewardSplit {
  std::vector<double> perProvider;
  double total = 0.0;
  // Set when negative attributions were clamped to zero.
  bool clamped = false;
};

// c_i = c * max(phi_i, 0) / sum_j max(phi_j, 0).
RewardSplit allocate_rewards(const ShapleyVector& phi, double c);

// Spearman rank correlation; tied entries share their average rank.
double spearman(std::span<const double> a, std::span<const double> b);

// P(X >= wins) for X ~ Binomial(trials, 1/2).
double sign_test_p(std::size_t wins, std::size_t trials);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than 2 values
};
MeanStd mean_std(std::span<const double> values);

}  // namespace datashap
