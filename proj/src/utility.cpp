#include "datashap/utility.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "datashap/errors.hpp"
#include "datashap/rng.hpp"

namespace datashap {

// ---------------------------------------------------------------------------
// Tabular games

TabularGame::TabularGame(std::size_t n, std::vector<double> table)
    : n_(n), table_(std::move(table)) {
  if (n_ > kMaxPlayers) {
    throw CapacityError("tabular games support at most " + std::to_string(kMaxPlayers) +
                        " players, got " + std::to_string(n_));
  }
  if (table_.size() != (std::size_t{1} << n_)) {
    throw ConsistencyError("tabular game with n = " + std::to_string(n_) + " needs " +
                           std::to_string(std::size_t{1} << n_) + " values, got " +
                           std::to_string(table_.size()));
  }
}

TabularGame TabularGame::from_function(std::size_t n,
                                       const std::function<double(const SubsetMask&)>& fn) {
  if (n > kMaxPlayers) {
    throw CapacityError("tabular games support at most " + std::to_string(kMaxPlayers) + " players");
  }
  std::vector<double> table(std::size_t{1} << n);
  for (std::size_t index = 0; index < table.size(); ++index) {
    table[index] = fn(SubsetMask::from_index(index, n));
  }
  return TabularGame(n, std::move(table));
}

double TabularGame::value(const SubsetMask& mask) const {
  if (mask.size() != n_) {
    throw DomainError("mask length " + std::to_string(mask.size()) + " differs from game size " +
                      std::to_string(n_));
  }
  return table_[mask.to_index()];
}

double tabular_eval(const TabularGame& game, const SubsetMask& mask) { return game.value(mask); }

TabularGame parse_tabular_game(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const auto first = out.find_first_not_of(" \t\r");
      if (first != std::string::npos && out[first] != '#') return true;
    }
    return false;
  };
  if (!next_line(line)) throw ParseError("game file: missing player count");
  std::size_t n = 0;
  {
    std::istringstream head(line);
    if (!(head >> n)) throw ParseError("game file: first line must hold the player count");
  }
  if (n > TabularGame::kMaxPlayers) {
    throw CapacityError("game file declares " + std::to_string(n) + " players; at most " +
                        std::to_string(TabularGame::kMaxPlayers) + " supported");
  }
  const std::size_t size = std::size_t{1} << n;
  std::vector<double> table(size, 0.0);
  std::vector<bool> seen(size, false);
  std::size_t lines = 0;
  while (next_line(line)) {
    std::istringstream row(line);
    std::uint64_t index = 0;
    double value = 0.0;
    if (!(row >> index >> value)) {
      throw ParseError("game file: line " + std::to_string(lines + 2) +
                       " must be 'maskInteger value'");
    }
    if (index >= size) throw ParseError("game file: mask " + std::to_string(index) + " out of range");
    if (seen[index]) throw ParseError("game file: mask " + std::to_string(index) + " listed twice");
    seen[index] = true;
    table[index] = value;
    ++lines;
  }
  if (lines != size) {
    throw ParseError("game file: expected " + std::to_string(size) + " value lines, found " +
                     std::to_string(lines));
  }
  return TabularGame(n, std::move(table));
}

TabularGame load_tabular_game(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open game file " + path.string());
  return parse_tabular_game({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

std::string format_tabular_game(const TabularGame& game) {
  std::ostringstream out;
  out.precision(17);
  out << game.players() << '\n';
  for (std::size_t index = 0; index < game.table().size(); ++index) {
    out << index << ' ' << game.table()[index] << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Providers

std::uint64_t hash_point(std::span<const double> x) {
  std::uint64_t h = fnv1a(std::string_view("point")) ^ x.size();
  for (double v : x) h = combine_seed(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

Endpoints UtilityProvider::endpoints(std::span<const double> x, int y) const {
  const auto key = std::make_pair(hash_point(x), y);
  {
    std::lock_guard lock(endpointMutex_);
    if (auto it = endpointCache_.find(key); it != endpointCache_.end()) return it->second;
  }
  Endpoints e;
  e.grand = eval(SubsetMask::ones(players()), x, y);
  e.empty = eval(SubsetMask::zeros(players()), x, y);
  std::lock_guard lock(endpointMutex_);
  endpointCache_.emplace(key, e);
  return e;
}

ProviderGame::ProviderGame(std::shared_ptr<const UtilityProvider> provider,
                           std::span<const double> x, int y)
    : provider_(std::move(provider)), x_(x.begin(), x.end()), y_(y) {}

double ProviderGame::value(const SubsetMask& mask) const { return provider_->eval(mask, x_, y_); }

TrainedUtility::TrainedUtility(std::shared_ptr<const Dataset> data, UtilityConfig cfg)
    : data_(std::move(data)), cfg_(std::move(cfg)) {
  data_->validate();
  cfg_.arch.inputDim = data_->d;
  cfg_.arch.outputDim = static_cast<std::size_t>(data_->m);
  cfg_.arch.validate();
  cfg_.train.validate();
}

TrainResult TrainedUtility::sub_model(const SubsetMask& mask) const {
  if (mask.size() != data_->n) {
    throw DomainError("mask length " + std::to_string(mask.size()) + " differs from n = " +
                      std::to_string(data_->n));
  }
  const std::uint64_t seed = combine_seed(cfg_.train.seed, mask.hash());
  TrainConfig train = cfg_.train;
  train.seed = seed;
  const auto rows = mask.members();
  auto result = datashap::train(init_model(cfg_.arch, seed), *data_, rows, train);
  ++trainings_;
  if (!has_converged(result.lossTrace, cfg_.convergenceTol)) ++unconverged_;
  return result;
}

double TrainedUtility::eval(const SubsetMask& mask, std::span<const double> x, int y) const {
  if (y < 0 || y >= data_->m) throw DomainError("label " + std::to_string(y) + " out of range");
  if (mask.size() != data_->n) {
    throw DomainError("mask length " + std::to_string(mask.size()) + " differs from n = " +
                      std::to_string(data_->n));
  }
  if (mask.empty_coalition()) return 1.0 / static_cast<double>(data_->m);
  const auto result = sub_model(mask);
  return predict_proba(result.params, x)[static_cast<std::size_t>(y)];
}

std::shared_ptr<TrainedUtility> make_full_utility(std::shared_ptr<const Dataset> data,
                                                  const UtilityConfig& cfg) {
  return std::make_shared<TrainedUtility>(std::move(data), cfg);
}

std::shared_ptr<TrainedUtility> make_afds_utility(std::shared_ptr<const Dataset> data,
                                                  const UtilityConfig& cfg, std::size_t K,
                                                  double beta) {
  if (K < 1) throw DomainError("AFDS utility requires K >= 1");
  if (!(beta > 0.0)) throw DomainError("AFDS utility requires beta > 0");
  UtilityConfig truncated = cfg;
  truncated.train.epochs = K;
  truncated.train.lrScale = beta;
  return std::make_shared<TrainedUtility>(std::move(data), truncated);
}

double utility_full(const Dataset& data, const SubsetMask& mask, std::span<const double> x,
                    int y, const UtilityConfig& cfg) {
  return make_full_utility(std::make_shared<const Dataset>(data), cfg)->eval(mask, x, y);
}

double utility_afds(const Dataset& data, const SubsetMask& mask, std::span<const double> x,
                    int y, const UtilityConfig& cfg, std::size_t K, double beta) {
  return make_afds_utility(std::make_shared<const Dataset>(data), cfg, K, beta)->eval(mask, x, y);
}

// ---------------------------------------------------------------------------
// Cache

CachedUtility::CachedUtility(std::shared_ptr<const UtilityProvider> inner)
    : inner_(std::move(inner)) {}

namespace {

std::string cache_key(const SubsetMask& mask, std::span<const double> x, int y) {
  std::string key(mask.bytes().begin(), mask.bytes().end());
  const std::uint64_t h = hash_point(x);
  key.append(reinterpret_cast<const char*>(&h), sizeof h);
  key.append(reinterpret_cast<const char*>(&y), sizeof y);
  return key;
}

}  // namespace

double CachedUtility::eval(const SubsetMask& mask, std::span<const double> x, int y) const {
  auto key = cache_key(mask, x, y);
  {
    std::shared_lock lock(mutex_);
    if (auto it = table_.find(key); it != table_.end()) {
      ++hits_;
      return it->second;
    }
  }
  ++misses_;
  const double value = inner_->eval(mask, x, y);
  std::unique_lock lock(mutex_);
  table_.insert_or_assign(std::move(key), value);
  return value;
}

CacheStats CachedUtility::stats() const {
  std::shared_lock lock(mutex_);
  return {hits_.load(), misses_.load(), table_.size()};
}

void CachedUtility::clear() {
  std::unique_lock lock(mutex_);
  table_.clear();
  hits_ = 0;
  misses_ = 0;
}

std::shared_ptr<CachedUtility> cache_wrap(std::shared_ptr<const UtilityProvider> provider) {
  return std::make_shared<CachedUtility>(std::move(provider));
}

}  // namespace datashap
