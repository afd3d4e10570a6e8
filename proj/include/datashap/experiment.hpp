#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "datashap/dataset.hpp"
#include "datashap/explainer.hpp"
#include "datashap/grouping.hpp"
#include "datashap/utility.hpp"

namespace datashap {

enum class ValuationMethod { kExact, kLoo, kTmc, kCwls, kFds, kAfds, kGfds, kGfdsPlus, kRandom };

std::string to_string(ValuationMethod method);
ValuationMethod valuation_method_from_string(const std::string& name);
bool is_explainer_method(ValuationMethod method);

enum class DatasetSourceKind { kSynthetic, kCsv, kIdx };

struct DatasetSource {
  DatasetSourceKind kind = DatasetSourceKind::kSynthetic;
  SyntheticSpec synthetic;  // n is overwritten with train + pool + test
  std::optional<std::uint64_t> seed;  // defaults to the "dataset" substream
  std::filesystem::path path;         // csv
  CsvOptions csv;
  std::filesystem::path images;  // idx
  std::filesystem::path labels;  // idx
};

struct ExperimentConfig {
  std::optional<std::uint64_t> seed;  // required; every other seed derives from it
  std::filesystem::path out = "run";
  std::size_t threads = 1;

  DatasetSource dataset;
  // Rows [0, train) are the players, then the explainer pool, then the test set.
  std::size_t trainN = 0;
  std::size_t poolN = 0;
  std::size_t testN = 0;

  Architecture arch;
  TrainConfig train;

  ValuationMethod method = ValuationMethod::kExact;
  std::size_t permutations = 1000;
  std::optional<double> truncation;  // defaults to 0.001 |v(1) - v(0)|
  std::size_t cwlsSamples = 0;       // 0 enumerates every coalition
  ExplainerTrainConfig explainer;    // N == 0 means m
  // Unset: by-label when N == m, otherwise k-means over service logits.
  std::optional<GroupingMethod> grouping;

  std::vector<double> etas{0.0, 0.1, 0.2, 0.3};
  std::size_t valued = 5;  // test points written to shapley.json

  void validate() const;
};

// Flat "section.key = value" text; '#' starts a comment.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// "blob <size>\0<bytes>" hashed with SHA-1, as hex.
std::string git_blob_sha1(const std::string& bytes);
std::string dataset_digest(const Dataset& data);

struct Splits {
  Dataset train;
  Dataset pool;
  Dataset test;
};
Splits load_splits(const ExperimentConfig& cfg);

struct RunSummary {
  std::vector<std::pair<std::string, double>> timing;  // phase, seconds
  std::vector<double> rankings;                         // mean value per player
  double maxEfficiencyGap = 0.0;
};

// Writes manifest.json, shapley.json, removal_curve.csv and timing.csv to cfg.out.
RunSummary run_experiment(const ExperimentConfig& cfg);

// Mean and std of H per (method, eta) over every run found under `dir`.
// Throws ConsistencyError for fewer than two runs or mismatched datasets.
std::string compare_runs(const std::filesystem::path& dir);

// CSV "player,exact,loo,tmc" for a game file.
std::string oracle_report(const TabularGame& game, std::uint64_t seed, std::size_t permutations = 1000);

}  // namespace datashap
