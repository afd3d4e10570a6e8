#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "datashap/dataset.hpp"
#include "datashap/mask.hpp"
#include "datashap/model.hpp"

namespace datashap {

// A cooperative game: a value for every coalition of `players()` players.
// Implementations must be safe to call concurrently.
class Game {
 public:
  virtual ~Game() = default;
  virtual std::size_t players() const = 0;
  virtual double value(const SubsetMask& mask) const = 0;
};

// Explicit table of 2^n values indexed by the mask read as an integer
// (bit i = player i).
class TabularGame final : public Game {
 public:
  static constexpr std::size_t kMaxPlayers = 20;

  TabularGame(std::size_t n, std::vector<double> table);
  static TabularGame from_function(std::size_t n,
                                   const std::function<double(const SubsetMask&)>& fn);

  std::size_t players() const override { return n_; }
  double value(const SubsetMask& mask) const override;
  double at(std::uint64_t index) const { return table_[index]; }
  const std::vector<double>& table() const { return table_; }

 private:
  std::size_t n_;
  std::vector<double> table_;
};

double tabular_eval(const TabularGame& game, const SubsetMask& mask);

// Text format: first line n, then 2^n lines "maskInteger value".
TabularGame parse_tabular_game(const std::string& text);
TabularGame load_tabular_game(const std::filesystem::path& path);
std::string format_tabular_game(const TabularGame& game);

// v(1) and v(0) for one (x, y) pair.
struct Endpoints {
  double grand = 0.0;
  double empty = 0.0;
  double delta() const { return grand - empty; }
};

// Value function v_{x,y}(s) over training-data coalitions.
class UtilityProvider {
 public:
  virtual ~UtilityProvider() = default;
  virtual std::size_t players() const = 0;
  virtual double eval(const SubsetMask& mask, std::span<const double> x, int y) const = 0;

  // v(1) and v(0) computed once per (x, y) and reused.
  Endpoints endpoints(std::span<const double> x, int y) const;

 private:
  mutable std::mutex endpointMutex_;
  mutable std::map<std::pair<std::uint64_t, int>, Endpoints> endpointCache_;
};

std::uint64_t hash_point(std::span<const double> x);

// Binds a provider to one (x, y), giving an ordinary game.
class ProviderGame final : public Game {
 public:
  ProviderGame(std::shared_ptr<const UtilityProvider> provider, std::span<const double> x, int y);
  std::size_t players() const override { return provider_->players(); }
  double value(const SubsetMask& mask) const override;

 private:
  std::shared_ptr<const UtilityProvider> provider_;
  std::vector<double> x_;
  int y_;
};

// Utility of a game that ignores (x, y).
class TabularUtility final : public UtilityProvider {
 public:
  explicit TabularUtility(std::shared_ptr<const Game> game) : game_(std::move(game)) {}
  std::size_t players() const override { return game_->players(); }
  double eval(const SubsetMask& mask, std::span<const double>, int) const override {
    return game_->value(mask);
  }

 private:
  std::shared_ptr<const Game> game_;
};

struct UtilityConfig {
  Architecture arch;
  TrainConfig train;
  // Relative loss improvement over the last 5 epochs that counts as converged.
  double convergenceTol = 1e-5;
};

// v_{x,y}(s) = softmax(f_{D_s}(x))_y where f_{D_s} is trained from a per-mask
// seed on the rows selected by s. The empty coalition is the uniform
// predictor, so v(0) = 1/m.
class TrainedUtility final : public UtilityProvider {
 public:
  TrainedUtility(std::shared_ptr<const Dataset> data, UtilityConfig cfg);

  std::size_t players() const override { return data_->n; }
  double eval(const SubsetMask& mask, std::span<const double> x, int y) const override;

  // Trains the sub-model for a coalition (uniform predictor excluded).
  TrainResult sub_model(const SubsetMask& mask) const;
  const UtilityConfig& config() const { return cfg_; }
  // Evaluations whose loss trace had not met the convergence criterion.
  std::size_t unconverged_count() const { return unconverged_; }
  std::size_t training_count() const { return trainings_; }

 private:
  std::shared_ptr<const Dataset> data_;
  UtilityConfig cfg_;
  mutable std::atomic<std::size_t> unconverged_{0};
  mutable std::atomic<std::size_t> trainings_{0};
};

std::shared_ptr<TrainedUtility> make_full_utility(std::shared_ptr<const Dataset> data,
                                                  const UtilityConfig& cfg);
// Exactly K epochs at learning rate beta * cfg.train.learningRate.
std::shared_ptr<TrainedUtility> make_afds_utility(std::shared_ptr<const Dataset> data,
                                                  const UtilityConfig& cfg, std::size_t K,
                                                  double beta);

double utility_full(const Dataset& data, const SubsetMask& mask, std::span<const double> x,
                    int y, const UtilityConfig& cfg);
double utility_afds(const Dataset& data, const SubsetMask& mask, std::span<const double> x,
                    int y, const UtilityConfig& cfg, std::size_t K, double beta);

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t entries = 0;
};

// Memoizes eval on (mask bits, hash of x, y).
class CachedUtility final : public UtilityProvider {
 public:
  explicit CachedUtility(std::shared_ptr<const UtilityProvider> inner);

  std::size_t players() const override { return inner_->players(); }
  double eval(const SubsetMask& mask, std::span<const double> x, int y) const override;

  CacheStats stats() const;
  void clear();

 private:
  std::shared_ptr<const UtilityProvider> inner_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, double> table_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

std::shared_ptr<CachedUtility> cache_wrap(std::shared_ptr<const UtilityProvider> provider);

}  // namespace datashap
