#include "datashap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "datashap/errors.hpp"
#include "datashap/parallel.hpp"

namespace datashap {

double ShapleyVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

ShapleyVector make_shapley_vector(std::vector<double> values, double vOne, double vZero) {
  ShapleyVector out;
  out.values = std::move(values);
  out.vOne = vOne;
  out.vZero = vZero;
  out.efficiencyGap = std::abs(out.sum() - (vOne - vZero));
  return out;
}

void to_json(nlohmann::json& j, const ShapleyVector& v) {
  j = nlohmann::json{{"values", v.values},
                     {"efficiencyGap", v.efficiencyGap},
                     {"vOne", v.vOne},
                     {"vZero", v.vZero}};
}

void from_json(const nlohmann::json& j, ShapleyVector& v) {
  j.at("values").get_to(v.values);
  j.at("efficiencyGap").get_to(v.efficiencyGap);
  j.at("vOne").get_to(v.vOne);
  j.at("vZero").get_to(v.vZero);
}

double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  return std::round(std::exp(log_binomial(n, k)));
}

namespace {

void require_enumerable(std::size_t n) {
  if (n > kMaxExactPlayers) {
    throw CapacityError("exhaustive enumeration supports at most " +
                        std::to_string(kMaxExactPlayers) + " players, got " + std::to_string(n));
  }
}

}  // namespace

std::vector<double> value_table(const Game& game, std::size_t threads) {
  const std::size_t n = game.players();
  require_enumerable(n);
  std::vector<double> table(std::size_t{1} << n);
  parallel_for(table.size(), threads, [&](std::size_t index) {
    table[index] = game.value(SubsetMask::from_index(index, n));
  });
  return table;
}

std::vector<double> shapley_from_table(std::size_t n, std::span<const double> table) {
  require_enumerable(n);
  if (table.size() != (std::size_t{1} << n)) throw DomainError("value table size is not 2^n");
  std::vector<double> phi(n, 0.0);
  if (n == 0) return phi;
  // weight[k] = 1 / (n C(n-1, k))
  std::vector<double> weight(n);
  for (std::size_t k = 0; k < n; ++k) {
    weight[k] = std::exp(-std::log(static_cast<double>(n)) - log_binomial(n - 1, k));
  }
  for (std::size_t index = 0; index < table.size(); ++index) {
    const auto size = static_cast<std::size_t>(std::popcount(index));
    if (size == n) continue;
    const double base = table[index];
    const double w = weight[size];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      if (index & bit) continue;
      phi[i] += w * (table[index | bit] - base);
    }
  }
  return phi;
}

std::vector<double> permutation_average_from_table(std::size_t n, std::span<const double> table) {
  if (n > 10) throw CapacityError("permutation enumeration supports at most 10 players");
  if (table.size() != (std::size_t{1} << n)) throw DomainError("value table size is not 2^n");
  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t count = 0;
  do {
    std::size_t prefix = 0;
    for (std::size_t p : order) {
      const std::size_t next = prefix | (std::size_t{1} << p);
      phi[p] += table[next] - table[prefix];
      prefix = next;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= static_cast<double>(count);
  return phi;
}

ShapleyVector exact_shapley(const Game& game, const ExactOptions& options) {
  const std::size_t n = game.players();
  const auto table = value_table(game, options.threads);
  auto phi = shapley_from_table(n, table);
  if (options.crossCheck && n <= 8) {
    const auto check = permutation_average_from_table(n, table);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(check[i] - phi[i]) > 1e-9) {
        throw std::logic_error("exact Shapley cross-check failed for player " + std::to_string(i));
      }
    }
  }
  return make_shapley_vector(std::move(phi), table.back(), table.front());
}

double default_truncation_tol(const Game& game) {
  const std::size_t n = game.players();
  return 0.001 * std::abs(game.value(SubsetMask::ones(n)) - game.value(SubsetMask::zeros(n)));
}

ShapleyVector permutation_shapley(const Game& game, const PermutationConfig& cfg) {
  const std::size_t n = game.players();
  const double vOne = game.value(SubsetMask::ones(n));
  const double vZero = game.value(SubsetMask::zeros(n));
  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto walk = [&](const std::vector<std::size_t>& perm) {
    SubsetMask prefix(n);
    double previous = vZero;
    for (std::size_t p : perm) {
      if (std::abs(previous - vOne) < cfg.truncationTol) break;
      prefix.set(p);
      const double current = prefix.grand_coalition() ? vOne : game.value(prefix);
      phi[p] += current - previous;
      previous = current;
    }
  };

  std::size_t count = 0;
  if (cfg.permutations == 0) {
    if (n > 10) throw CapacityError("permutation enumeration supports at most 10 players");
    do {
      walk(order);
      ++count;
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    Rng rng(cfg.seed);
    for (; count < cfg.permutations; ++count) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      walk(order);
    }
  }
  for (double& v : phi) v /= static_cast<double>(std::max<std::size_t>(count, 1));
  return make_shapley_vector(std::move(phi), vOne, vZero);
}

std::vector<double> loo_values(const Game& game) {
  const std::size_t n = game.players();
  SubsetMask all = SubsetMask::ones(n);
  const double vOne = game.value(all);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    all.set(i, false);
    out[i] = vOne - game.value(all);
    all.set(i, true);
  }
  return out;
}

double kernel_weight(std::size_t n, std::size_t k) {
  if (k == 0 || k >= n) {
    throw DomainError("kernel weight needs 0 < k < n (n = " + std::to_string(n) +
                      ", k = " + std::to_string(k) + ")");
  }
  return static_cast<double>(n - 1) /
         (binomial(n, k) * static_cast<double>(k) * static_cast<double>(n - k));
}

KernelSampler::KernelSampler(std::size_t n) : n_(n) {
  if (n < 2) throw DomainError("kernel sampling needs at least 2 players");
  // C(n,k) * kernel_weight(n,k) = (n-1) / (k (n-k))
  double total = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    total += static_cast<double>(n - 1) / (static_cast<double>(k) * static_cast<double>(n - k));
    cdf_.push_back(total);
  }
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double KernelSampler::size_probability(std::size_t k) const {
  if (k == 0 || k >= n_) return 0.0;
  return cdf_[k - 1] - (k >= 2 ? cdf_[k - 2] : 0.0);
}

SubsetMask KernelSampler::sample(Rng& rng) const {
  const double u = uniform01(rng);
  const std::size_t k =
      static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()) + 1;
  // Partial Fisher-Yates: the first k entries form a uniform k-subset.
  std::vector<std::size_t> pool(n_);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  SubsetMask mask(n_);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n_ - i);
    std::swap(pool[i], pool[j]);
    mask.set(pool[i]);
  }
  return mask;
}

SubsetMask kernel_sample(std::size_t n, Rng& rng) { return KernelSampler(n).sample(rng); }

ShapleyVector cwls_solve(const Game& game, const CwlsOptions& options) {
  const std::size_t n = game.players();
  const double vOne = game.value(SubsetMask::ones(n));
  const double vZero = game.value(SubsetMask::zeros(n));
  if (n == 0) return make_shapley_vector({}, vOne, vZero);
  if (n == 1) return make_shapley_vector({vOne - vZero}, vOne, vZero);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  auto accumulate = [&](const std::vector<std::size_t>& members, double weight, double value) {
    const double target = weight * (value - vZero);
    for (std::size_t i : members) {
      b(static_cast<Eigen::Index>(i)) += target;
      for (std::size_t j : members) {
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += weight;
      }
    }
  };

  if (options.mode == CwlsMode::kEnumerate) {
    require_enumerable(n);
    const auto table = value_table(game, options.threads);
    std::vector<double> weight(n);
    for (std::size_t k = 1; k < n; ++k) weight[k] = kernel_weight(n, k);
    for (std::size_t index = 1; index + 1 < table.size(); ++index) {
      const auto mask = SubsetMask::from_index(index, n);
      accumulate(mask.members(), weight[mask.count()], table[index]);
    }
  } else {
    if (options.numSamples < 1) throw DomainError("sampled CWLS needs at least one sample");
    const KernelSampler sampler(n);
    Rng rng(options.seed);
    std::vector<SubsetMask> masks;
    masks.reserve(options.numSamples);
    for (std::size_t s = 0; s < options.numSamples; ++s) masks.push_back(sampler.sample(rng));
    std::vector<double> values(masks.size());
    parallel_for(masks.size(), options.threads,
                 [&](std::size_t s) { values[s] = game.value(masks[s]); });
    const double w = 1.0 / static_cast<double>(masks.size());
    for (std::size_t s = 0; s < masks.size(); ++s) accumulate(masks[s].members(), w, values[s]);
  }

  A.diagonal().array() += options.ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  const Eigen::VectorXd ainvB = ldlt.solve(b);
  const Eigen::VectorXd ainv1 = ldlt.solve(ones);
  const double multiplier = (ones.dot(ainvB) - (vOne - vZero)) / ones.dot(ainv1);
  const Eigen::VectorXd phi = ainvB - multiplier * ainv1;
  return make_shapley_vector(std::vector<double>(phi.data(), phi.data() + phi.size()), vOne, vZero);
}

ShapleyVector efficient_normalize(std::span<const double> phi, double vOne, double vZero) {
  std::vector<double> out(phi.begin(), phi.end());
  if (out.empty()) return make_shapley_vector({}, vOne, vZero);
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  const double shift = (vOne - vZero - total) / static_cast<double>(out.size());
  for (double& v : out) v += shift;
  return make_shapley_vector(std::move(out), vOne, vZero);
}

}  // namespace datashap
