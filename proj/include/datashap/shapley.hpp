#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "datashap/mask.hpp"
#include "datashap/rng.hpp"
#include "datashap/utility.hpp"

namespace datashap {

// Attribution vector plus its efficiency certificate.
struct ShapleyVector {
  std::vector<double> values;
  // |sum(values) - (vOne - vZero)|
  double efficiencyGap = 0.0;
  double vOne = 0.0;
  double vZero = 0.0;

  double sum() const;
};

ShapleyVector make_shapley_vector(std::vector<double> values, double vOne, double vZero);

void to_json(nlohmann::json& j, const ShapleyVector& v);
void from_json(const nlohmann::json& j, ShapleyVector& v);

// Largest game the exhaustive routines will enumerate.
inline constexpr std::size_t kMaxExactPlayers = 20;

double log_binomial(std::size_t n, std::size_t k);
double binomial(std::size_t n, std::size_t k);

// All 2^n coalition values indexed by mask integer.
std::vector<double> value_table(const Game& game, std::size_t threads = 1);

// phi_i = (1/n) sum_{s : i not in s} C(n-1, |s|)^-1 (v(s + e_i) - v(s)).
std::vector<double> shapley_from_table(std::size_t n, std::span<const double> table);
// Average marginal contribution over all n! orderings (n <= 10).
std::vector<double> permutation_average_from_table(std::size_t n, std::span<const double> table);

struct ExactOptions {
  std::size_t threads = 1;
  // For n <= 8 the subset-sum result is verified against the permutation
  // average; a mismatch above 1e-9 throws std::logic_error.
  bool crossCheck = true;
};

ShapleyVector exact_shapley(const Game& game, const ExactOptions& options = {});

struct PermutationConfig {
  // Number of sampled orderings; 0 enumerates all n! orderings.
  std::size_t permutations = 1000;
  // Marginals after the prefix value is within this distance of v(1) are 0.
  double truncationTol = 0.0;
  std::uint64_t seed = 0;
};

// Truncated Monte Carlo Shapley.
ShapleyVector permutation_shapley(const Game& game, const PermutationConfig& cfg);
// 0.001 * |v(1) - v(0)|.
double default_truncation_tol(const Game& game);

// v(1) - v(1 - e_i).
std::vector<double> loo_values(const Game& game);

// Unnormalized Shapley kernel weight (n-1) / (C(n,k) k (n-k)) for 0 < k < n.
double kernel_weight(std::size_t n, std::size_t k);

// Draws coalitions with P(s) proportional to kernel_weight(n, |s|): first a
// size k with probability proportional to C(n,k) kernel_weight(n,k), then a
// uniform subset of that size.
class KernelSampler {
 public:
  explicit KernelSampler(std::size_t n);
  SubsetMask sample(Rng& rng) const;
  std::size_t players() const { return n_; }
  // Probability of drawing a coalition of size k.
  double size_probability(std::size_t k) const;

 private:
  std::size_t n_;
  std::vector<double> cdf_;  // cdf_[k-1] = P(size <= k)
};

SubsetMask kernel_sample(std::size_t n, Rng& rng);

enum class CwlsMode { kEnumerate, kSampled };

struct CwlsOptions {
  CwlsMode mode = CwlsMode::kEnumerate;
  std::size_t numSamples = 2048;
  std::uint64_t seed = 0;
  double ridge = 1e-10;
  std::size_t threads = 1;
};

// Constrained weighted least squares under the Shapley kernel:
// min_phi sum_s P(s) (v(s) - v(0) - s^T phi)^2 s.t. 1^T phi = v(1) - v(0),
// solved through the KKT system with a Lagrange multiplier.
ShapleyVector cwls_solve(const Game& game, const CwlsOptions& options = {});

// phi + (vOne - vZero - 1^T phi) / n, applied uniformly.
ShapleyVector efficient_normalize(std::span<const double> phi, double vOne, double vZero);

}  // namespace datashap
