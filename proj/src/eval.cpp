#include "datashap/eval.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "datashap/errors.hpp"
#include "datashap/parallel.hpp"
#include "datashap/rng.hpp"

namespace datashap {

double value_loss(const Dataset& testSet, const ModelParams& model) {
  if (testSet.n == 0) throw DomainError("value loss needs a nonempty test set");
  double total = 0.0;
  for (std::size_t i = 0; i < testSet.n; ++i) {
    const auto p = predict_proba(model, testSet.row(i));
    const auto y = static_cast<std::size_t>(testSet.labels[i]);
    if (y >= p.size()) throw LabelError("test label outside the model's classes");
    total -= std::log(std::max(p[y], 1e-12));
  }
  return total / static_cast<double>(testSet.n);
}

namespace {

std::size_t removal_count(std::size_t n, double eta) {
  // Guard against eta * n landing a rounding error above an integer.
  return static_cast<std::size_t>(std::ceil(eta * static_cast<double>(n) - 1e-9));
}

}  // namespace

std::vector<std::size_t> removal_set(std::span<const double> rankings, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) throw DomainError("removal fraction must lie in [0, 1)");
  std::vector<std::size_t> order(rankings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rankings[a] > rankings[b]; });
  order.resize(std::min(order.size(), removal_count(rankings.size(), eta)));
  std::sort(order.begin(), order.end());
  return order;
}

RemovalCurve removal_curve(const Dataset& data, std::span<const double> rankings,
                           std::span<const double> etas, const Dataset& testSet,
                           const RemovalConfig& cfg, std::string rankingSource) {
  data.validate();
  if (rankings.size() != data.n) {
    throw DomainError("rankings have length " + std::to_string(rankings.size()) + ", expected " +
                      std::to_string(data.n));
  }
  for (std::size_t e = 0; e < etas.size(); ++e) {
    if (!(etas[e] >= 0.0 && etas[e] < 1.0)) throw DomainError("removal fraction must lie in [0, 1)");
    if (e > 0 && !(etas[e] > etas[e - 1])) throw DomainError("removal fractions must be strictly increasing");
    const std::size_t removed = removal_count(data.n, etas[e]);
    if (data.n - removed < static_cast<std::size_t>(data.m)) {
      throw CapacityError("removing " + std::to_string(removed) + " of " + std::to_string(data.n) +
                          " points leaves fewer than m = " + std::to_string(data.m));
    }
  }
  Architecture arch = cfg.arch;
  arch.inputDim = data.d;
  arch.outputDim = static_cast<std::size_t>(data.m);

  RemovalCurve curve;
  curve.etas.assign(etas.begin(), etas.end());
  curve.hValues.assign(etas.size(), 0.0);
  curve.rankingSource = std::move(rankingSource);
  curve.seed = cfg.seed;
  parallel_for(etas.size(), cfg.threads, [&](std::size_t e) {
    const auto removed = removal_set(rankings, etas[e]);
    std::vector<std::size_t> kept;
    kept.reserve(data.n - removed.size());
    for (std::size_t i = 0, r = 0; i < data.n; ++i) {
      if (r < removed.size() && removed[r] == i) {
        ++r;
      } else {
        kept.push_back(i);
      }
    }
    TrainConfig train = cfg.train;
    train.seed = combine_seed(cfg.seed, std::bit_cast<std::uint64_t>(etas[e]));
    const auto model = datashap::train(init_model(arch, train.seed), data, kept, train);
    curve.hValues[e] = value_loss(testSet, model.params);
  });
  return curve;
}

std::string format_real(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return {buf.data(), res.ptr};
}

std::string format_curves_csv(std::span<const RemovalCurve> curves) {
  std::ostringstream out;
  out << "eta,h_value,method,seed\n";
  for (const auto& curve : curves) {
    for (std::size_t e = 0; e < curve.etas.size(); ++e) {
      out << format_real(curve.etas[e]) << ',' << format_real(curve.hValues[e]) << ','
          << curve.rankingSource << ',' << curve.seed << '\n';
    }
  }
  return out.str();
}

RewardSplit allocate_rewards(const ShapleyVector& phi, double c) {
  if (!(c >= 0.0)) throw DomainError("reward total must be >= 0");
  if (std::abs(phi.sum()) <= 1e-12) throw DomainError("attributions sum to zero; split is undefined");
  RewardSplit split;
  split.total = c;
  std::vector<double> weights(phi.values.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::max(phi.values[i], 0.0);
    if (phi.values[i] < 0.0) split.clamped = true;
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 1e-12) throw DomainError("no positive attribution to split rewards over");
  split.perProvider.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) split.perProvider[i] = c * weights[i] / total;
  return split;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = shared;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("spearman needs two equal-length samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double sign_test_p(std::size_t wins, std::size_t trials) {
  if (wins > trials) throw DomainError("sign test: wins exceed trials");
  double p = 0.0;
  for (std::size_t k = wins; k <= trials; ++k) {
    p += std::exp(log_binomial(trials, k) - static_cast<double>(trials) * std::log(2.0));
  }
  return std::min(p, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

}  // namespace datashap
