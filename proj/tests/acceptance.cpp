// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "datashap/dataset.hpp"
#include "datashap/eval.hpp"
#include "datashap/explainer.hpp"
#include "datashap/grouping.hpp"
#include "datashap/model.hpp"
#include "datashap/shapley.hpp"
#include "datashap/utility.hpp"
#include "oracles.hpp"

using namespace datashap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

oracle::Value table_value(const std::vector<double>& table) {
  return [&table](std::uint64_t s) { return table[s]; };
}

std::shared_ptr<const UtilityProvider> tabular_provider(std::vector<double> table, std::size_t n) {
  return std::make_shared<const TabularUtility>(std::make_shared<const TabularGame>(n, std::move(table)));
}

Dataset gaussian_pool(std::size_t n, std::size_t d, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Dataset pool;
  pool.n = n;
  pool.d = d;
  pool.m = m;
  for (std::size_t i = 0; i < n * d; ++i) pool.features.push_back(g(rng));
  for (std::size_t i = 0; i < n; ++i) {
    pool.labels.push_back(static_cast<int>(i % static_cast<std::size_t>(m)));
    pool.providerIds.push_back(static_cast<std::int64_t>(i));
  }
  return pool;
}

std::vector<double> mean_prediction(const ExplainerParams& p, const Dataset& pool,
                                    const UtilityProvider& provider) {
  std::vector<double> mean(p.players, 0.0);
  const double count = static_cast<double>(pool.n) * pool.m;
  for (std::size_t i = 0; i < pool.n; ++i) {
    for (int y = 0; y < pool.m; ++y) {
      const auto ends = provider.endpoints(pool.row(i), y);
      const auto v = predict_normalized(p, pool.row(i), y, ends.grand, ends.empty);
      for (std::size_t k = 0; k < p.players; ++k) mean[k] += v.values[k] / count;
    }
  }
  return mean;
}

Outcome oracle_self_consistency() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int g = 0; g < 100; ++g) {
    const std::size_t n = 2 + g % 7;
    const auto table = oracle::random_table(n, rng);
    const auto subsetSum = shapley_from_table(n, table);
    worst = std::max(worst, max_abs_diff(subsetSum, oracle::permutation_shapley(n, table_value(table))));
    worst = std::max(worst, max_abs_diff(subsetSum, permutation_average_from_table(n, table)));
  }
  return {worst <= 1e-9, fmt("100 games, max |subset-sum - permutation| = %.3g", worst)};
}

Outcome cwls_equivalence() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = 2 + g % 7;
    const TabularGame game(n, oracle::random_table(n, rng));
    worst = std::max(worst, max_abs_diff(cwls_solve(game).values, exact_shapley(game).values));
  }
  return {worst <= 1e-6, fmt("50 games, max |cwls - exact| = %.3g", worst)};
}

Outcome efficiency() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double gap = 0.0;
  double pairwise = 0.0;
  for (int g = 0; g < 30; ++g) {
    const std::size_t n = 2 + g % 7;
    const TabularGame game(n, oracle::random_table(n, rng));
    const double delta = game.value(SubsetMask::ones(n)) - game.value(SubsetMask::zeros(n));
    const auto exact = exact_shapley(game);
    const auto cwls = cwls_solve(game);
    for (const auto* v : {&exact, &cwls}) gap = std::max(gap, std::abs(v->sum() - delta));

    // Explainer inference on a random input.
    const auto params = init_explainer({3, 2, n, 8}, rng());
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    const auto raw = explainer_forward(params, x, g % 2);
    const auto out = predict_normalized(params, x, g % 2, game.value(SubsetMask::ones(n)),
                                        game.value(SubsetMask::zeros(n)));
    gap = std::max(gap, std::abs(out.sum() - delta));

    // Uniform shift leaves every pairwise difference unchanged.
    std::vector<double> phi(n);
    for (double& p : phi) p = 10.0 * u(rng);
    const auto shifted = efficient_normalize(phi, 0.7, 0.1);
    gap = std::max(gap, std::abs(shifted.sum() - 0.6));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        pairwise = std::max(pairwise, std::abs((shifted.values[i] - shifted.values[j]) - (phi[i] - phi[j])));
        pairwise = std::max(pairwise, std::abs((out.values[i] - out.values[j]) - (raw[i] - raw[j])));
      }
    }
  }
  return {gap <= 1e-12 && pairwise <= 1e-12,
          fmt("max efficiency gap %.3g, max pairwise-difference change %.3g", gap, pairwise)};
}

Outcome approximate_value_bound() {
  std::mt19937_64 rng(404);
  std::size_t violations = 0;
  double worstRatio = 0.0;
  for (double eps : {0.01, 0.1}) {
    std::uniform_real_distribution<double> noise(-eps, eps);
    for (int g = 0; g < 100; ++g) {
      const auto table = oracle::random_table(6, rng);
      auto perturbed = table;
      for (double& v : perturbed) v += noise(rng);
      const double drift = max_abs_diff(exact_shapley(TabularGame(6, table)).values,
                                        exact_shapley(TabularGame(6, perturbed)).values);
      worstRatio = std::max(worstRatio, drift / eps);
      if (drift > 2.0 * eps) ++violations;
    }
  }
  return {violations == 0, fmt("200 games, %zu violations, max drift / eps = %.3f", violations, worstRatio)};
}

Outcome grouped_decomposition() {
  std::mt19937_64 rng(505);
  double sumGap = 0.0;
  std::size_t violations = 0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t N = 2 + g % 2;
    const std::size_t n = N + 1 + rng() % (10 - N);  // N < n <= 9
    // Random assignment with every group nonempty.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> groups(N);
    for (std::size_t k = 0; k < n; ++k) groups[k < N ? k : rng() % N].push_back(order[k]);
    for (auto& members : groups) std::sort(members.begin(), members.end());
    const auto partition = GroupPartition::from_groups(groups, n, "random");
    const auto additive = oracle::random_inter_group_additive(partition.groups, rng);
    const auto game = TabularGame::from_function(n, [&](const SubsetMask& s) { return additive(s.to_index()); });

    const auto phi = oracle::permutation_shapley(n, [&](std::uint64_t s) { return additive(s); });
    const auto groupValues = group_shapley_values(game, partition);
    const auto plus = gfds_plus_values(game, partition);
    for (std::size_t gi = 0; gi < N; ++gi) {
      double memberSum = 0.0;
      double lo = 1e300;
      double hi = -1e300;
      for (std::size_t j : partition.groups[gi]) {
        memberSum += phi[j];
        lo = std::min(lo, phi[j]);
        hi = std::max(hi, phi[j]);
      }
      sumGap = std::max(sumGap, std::abs(groupValues[gi] - memberSum));
      const double size = static_cast<double>(partition.groups[gi].size());
      const double bound = (1.0 - 1.0 / size) * (hi - lo);
      for (std::size_t j : partition.groups[gi]) {
        if (std::abs(plus[j] - phi[j]) > bound + 1e-9) ++violations;
      }
    }
  }
  return {sumGap <= 1e-9 && violations == 0,
          fmt("50 games, max |group - sum of members| = %.3g, %zu bound violations", sumGap, violations)};
}

Outcome gfds_degenerate() {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int g = 0; g < 20; ++g) {
    const std::size_t n = 2 + g % 7;
    const TabularGame game(n, oracle::random_table(n, rng));
    const auto exact = exact_shapley(game).values;
    worst = std::max(worst, max_abs_diff(gfds_exact_values(game, equal_partition(n, 1)), exact));
    worst = std::max(worst, max_abs_diff(gfds_exact_values(game, equal_partition(n, n)), exact));
  }
  return {worst <= 1e-9, fmt("20 games, max |gfds - exact| over N in {1, n} = %.3g", worst)};
}

Outcome kernel_sampling() {
  constexpr std::size_t kDraws = 1'000'000;
  const KernelSampler sampler(4);
  Rng rng(707);
  std::vector<std::size_t> counts(16, 0);
  for (std::size_t t = 0; t < kDraws; ++t) ++counts[sampler.sample(rng).to_index()];
  if (counts[0] != 0 || counts[15] != 0) return {false, "drew the empty or grand coalition"};

  double totalWeight = 0.0;
  for (std::size_t k = 1; k < 4; ++k) totalWeight += binomial(4, k) * kernel_weight(4, k);
  double worstPair = 0.0;
  double chi2 = 0.0;
  for (std::uint64_t s = 1; s < 15; ++s) {
    const std::size_t k = static_cast<std::size_t>(std::popcount(s));
    const double expected = kDraws * kernel_weight(4, k) / totalWeight;
    chi2 += std::pow(counts[s] - expected, 2) / expected;
    if (k == 2) {
      const double freq = static_cast<double>(counts[s]) / kDraws;
      worstPair = std::max(worstPair, std::abs(freq - 1.0 / 22.0) * 22.0);
    }
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(13.0), chi2));
  return {worstPair <= 0.01 && p > 0.01,
          fmt("max size-2 relative error %.4f, chi2 = %.2f (13 df), p = %.3f", worstPair, chi2, p)};
}

Outcome amortization_fidelity() {
  std::mt19937_64 rng(808);
  const auto table = oracle::random_table(6, rng);
  const auto provider = tabular_provider(table, 6);
  const auto exact = exact_shapley(TabularGame(6, table)).values;
  const auto pool = gaussian_pool(16, 2, 2, 809);
  double total = 0.0;
  std::string perSeed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExplainerTrainConfig cfg;
    cfg.variant = Variant::kFds;
    cfg.steps = 5000;
    cfg.batchSize = 32;
    cfg.alpha = 1e-3;
    cfg.hiddenUnits = 32;
    cfg.seed = seed;
    const auto result = train_fds(pool, provider, cfg);
    const double rho = spearman(mean_prediction(result.params, pool, *provider), exact);
    total += rho;
    perSeed += fmt(" %.3f", rho);
  }
  const double mean = total / 5.0;
  return {mean >= 0.9, fmt("mean Spearman %.3f over 5 seeds (%s )", mean, perSeed.c_str())};
}

UtilityConfig blob_utility(const Dataset& data) {
  UtilityConfig cfg;
  cfg.arch = {ModelKind::kLogistic, 0, data.d, static_cast<std::size_t>(data.m)};
  cfg.train.learningRate = 0.1;
  cfg.train.epochs = 100;
  cfg.train.seed = 909;
  return cfg;
}

Outcome afds_utility_gap() {
  SyntheticSpec spec;
  spec.n = 16 + 20;
  spec.noiseStd = 0.5;
  spec.separation = 3.0;
  spec.seed = 910;
  const auto all = generate(spec);
  const auto train = std::make_shared<const Dataset>(all.slice(0, 16));
  const auto probe = all.slice(16, 36);
  const auto ucfg = blob_utility(*train);
  const auto full = make_full_utility(train, ucfg);
  const auto afds = make_afds_utility(train, ucfg, 10, 10.0);

  // Probe: one random coalition per probe point over all 16 players.
  Rng rng(911);
  double probeEps = 0.0;
  for (std::size_t i = 0; i < probe.n; ++i) {
    SubsetMask s(16);
    for (std::size_t j = 0; j < 16; ++j) s.set(j, uniform01(rng) < 0.5);
    probeEps = std::max(probeEps, std::abs(afds->eval(s, probe.row(i), probe.labels[i]) -
                                           full->eval(s, probe.row(i), probe.labels[i])));
  }

  // Eight-player subsample: the gap over every coalition bounds the drift.
  const std::vector<std::size_t> keep{0, 1, 2, 3, 4, 5, 6, 7};
  const auto small = std::make_shared<const Dataset>(train->subset(keep));
  const auto fullSmall = make_full_utility(small, ucfg);
  const auto afdsSmall = make_afds_utility(small, ucfg, 10, 10.0);
  std::size_t violations = 0;
  double worstEps = 0.0;
  double worstDrift = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const ProviderGame gFull(fullSmall, probe.row(i), probe.labels[i]);
    const ProviderGame gAfds(afdsSmall, probe.row(i), probe.labels[i]);
    const auto tFull = value_table(gFull);
    const auto tAfds = value_table(gAfds);
    const double eps = max_abs_diff(tFull, tAfds);
    const double drift = max_abs_diff(shapley_from_table(8, tFull), shapley_from_table(8, tAfds));
    worstEps = std::max(worstEps, eps);
    worstDrift = std::max(worstDrift, drift);
    if (drift > 2.0 * eps) ++violations;
  }
  return {violations == 0,
          fmt("probe eps %.4f (n=16); n=8: sup eps %.4f, max drift %.4f, %zu violations", probeEps, worstEps,
              worstDrift, violations)};
}

// Mean true-label confidence on a validation set of a model trained on the
// coalition from a fixed initialization.
class ValidationGame final : public Game {
 public:
  ValidationGame(const Dataset& train, const Dataset& validation, Architecture arch, TrainConfig cfg)
      : train_(train), validation_(validation), arch_(arch), cfg_(cfg), init_(init_model(arch, cfg.seed)) {}

  std::size_t players() const override { return train_.n; }

  double value(const SubsetMask& mask) const override {
    if (mask.empty_coalition()) return 1.0 / validation_.m;
    const auto rows = mask.members();
    const auto model = train(init_, train_, rows, cfg_).params;
    double total = 0.0;
    for (std::size_t i = 0; i < validation_.n; ++i) {
      total += predict_proba(model, validation_.row(i))[static_cast<std::size_t>(validation_.labels[i])];
    }
    return total / static_cast<double>(validation_.n);
  }

 private:
  const Dataset& train_;
  const Dataset& validation_;
  Architecture arch_;
  TrainConfig cfg_;
  ModelParams init_;
};

Outcome removal_directionality() {
  constexpr std::size_t kSeeds = 20;
  std::size_t wins = 0;
  std::vector<double> hShapley;
  std::vector<double> hRandom;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    SyntheticSpec spec;
    spec.n = 20 + 20 + 200;
    spec.noiseStd = 1.0;
    spec.separation = 1.5;
    spec.seed = combine_seed(1010, seed);
    const auto all = generate(spec);
    const auto train = all.slice(0, 20);
    const auto validation = all.slice(20, 40);
    const auto test = all.slice(40, all.n);

    const Architecture arch{ModelKind::kLogistic, 0, train.d, static_cast<std::size_t>(train.m)};
    TrainConfig tcfg;
    tcfg.learningRate = 0.5;
    tcfg.epochs = 10;
    tcfg.seed = combine_seed(1011, seed);
    const ValidationGame game(train, validation, arch, tcfg);
    const auto phi = exact_shapley(game, {.threads = 1, .crossCheck = false}).values;

    Rng rng(combine_seed(1012, seed));
    std::vector<double> noise(20);
    for (double& v : noise) v = uniform01(rng);

    RemovalConfig rcfg{arch, tcfg, combine_seed(1013, seed), 1};
    const std::vector<double> etas{0.1};
    const double hs = removal_curve(train, phi, etas, test, rcfg, "exact").hValues[0];
    const double hr = removal_curve(train, noise, etas, test, rcfg, "random").hValues[0];
    hShapley.push_back(hs);
    hRandom.push_back(hr);
    if (hs > hr) ++wins;
  }
  const double meanS = mean_std(hShapley).mean;
  const double meanR = mean_std(hRandom).mean;
  const double p = sign_test_p(wins, kSeeds);
  return {meanS >= meanR && p < 0.05,
          fmt("mean H10%% exact %.4f vs random %.4f, wins %zu/20, sign test p = %.4f", meanS, meanR, wins, p)};
}

Outcome overhead_ordering() {
  SyntheticSpec spec;
  spec.n = 16 + 16;
  spec.seed = 1111;
  const auto all = generate(spec);
  const auto train = std::make_shared<const Dataset>(all.slice(0, 16));
  const auto pool = all.slice(16, 32);
  const auto ucfg = blob_utility(*train);
  const auto partition = equal_partition(16, 4);

  ExplainerTrainConfig base;
  base.steps = 400;
  base.batchSize = 16;
  base.alpha = 1e-3;
  base.hiddenUnits = 32;
  base.K = 10;
  base.beta = 10.0;
  base.N = 4;
  base.seed = 1112;

  using Clock = std::chrono::steady_clock;
  const auto seconds = [](Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); };
  double t[4];
  {
    auto cfg = base;
    cfg.variant = Variant::kFds;
    const auto t0 = Clock::now();
    train_fds(pool, cache_wrap(make_full_utility(train, ucfg)), cfg);
    t[0] = seconds(t0);
  }
  {
    auto cfg = base;
    cfg.variant = Variant::kAfds;
    const auto t0 = Clock::now();
    train_afds(pool, train, ucfg, cfg);
    t[1] = seconds(t0);
  }
  {
    auto cfg = base;
    cfg.variant = Variant::kGfds;
    const auto t0 = Clock::now();
    train_gfds(pool, cache_wrap(make_afds_utility(train, ucfg, cfg.K, cfg.beta)), partition, cfg);
    t[2] = seconds(t0);
  }
  {
    auto cfg = base;
    cfg.variant = Variant::kGfdsPlus;
    const auto t0 = Clock::now();
    train_gfds_plus(pool, cache_wrap(make_afds_utility(train, ucfg, cfg.K, cfg.beta)), partition, cfg);
    t[3] = seconds(t0);
  }
  bool ordered = true;
  for (int k = 0; k + 1 < 4; ++k) ordered = ordered && t[k] * 1.2 >= t[k + 1];
  return {ordered, fmt("seconds fds %.3f, afds %.3f, gfds %.3f, gfds+ %.3f", t[0], t[1], t[2], t[3])};
}

Outcome gradient_checks() {
  std::mt19937_64 rng(1212);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double classifier = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t d = 2 + k % 3;
    const int m = 2 + k % 2;
    const auto data = gaussian_pool(12, d, m, rng());
    const Architecture arch = k % 2 == 0 ? Architecture{ModelKind::kLogistic, 0, d, static_cast<std::size_t>(m)}
                                         : Architecture{ModelKind::kMlp1, 5, d, static_cast<std::size_t>(m)};
    auto params = init_model(arch, rng());
    for (double& w : params.values) w += 0.3 * u(rng);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.n; ++i) {
      if (rng() % 3 != 0) rows.push_back(i);
    }
    std::vector<double> grad(params.values.size());
    cross_entropy(params, data, rows, grad);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& w) {
          auto p = params;
          p.values = w;
          return cross_entropy(p, data, rows);
        },
        params.values);
    classifier = std::max(classifier, oracle::max_relative_error(grad, numeric));
  }

  double explainer = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 4 + k % 3;
    const ExplainerShape shape{2, 2, n, 6};
    const auto partition = equal_partition(n, 2);
    ExplainerParams params;
    PenaltySpec penalty;
    switch (k % 3) {
      case 0:
        params = init_explainer(shape, rng());
        break;
      case 1:
        params = init_split_explainer(shape, partition, rng());
        break;
      default:
        params = init_explainer(shape, rng());
        penalty = {&partition, 0.5};
        break;
    }
    std::vector<LossSample> batch;
    for (int b = 0; b < 8; ++b) {
      LossSample s;
      s.x = {u(rng), u(rng)};
      s.y = static_cast<int>(rng() % 2);
      s.mask = SubsetMask(params.outputs);
      for (std::size_t i = 0; i < params.outputs; ++i) s.mask.set(i, rng() % 2 == 1);
      s.value = u(rng);
      s.ends = {u(rng), u(rng)};
      batch.push_back(std::move(s));
    }
    std::vector<double> grad(params.values.size());
    explainer_loss(params, batch, penalty, grad);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& w) {
          auto p = params;
          p.values = w;
          return explainer_loss(p, batch, penalty);
        },
        params.values);
    explainer = std::max(explainer, oracle::max_relative_error(grad, numeric));
  }
  return {classifier <= 1e-4 && explainer <= 1e-4,
          fmt("max relative error classifier %.3g, explainer %.3g", classifier, explainer)};
}

}  // namespace

// Optional arguments select criteria by number; none runs all of them.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"subset-sum and permutation Shapley agree", oracle_self_consistency},
      {"constrained least squares matches exact Shapley", cwls_equivalence},
      {"normalized outputs are efficient", efficiency},
      {"value perturbation moves Shapley values by at most 2 eps", approximate_value_bound},
      {"group values decompose on inter-group additive games", grouped_decomposition},
      {"grouped values with N = 1 and N = n are exact", gfds_degenerate},
      {"kernel sampler frequencies", kernel_sampling},
      {"FDS explainer ranks players like exact Shapley", amortization_fidelity},
      {"K-epoch utility gap bounds the value drift", afds_utility_gap},
      {"removing top-valued data hurts more than random removal", removal_directionality},
      {"training time decreases fds >= afds >= gfds >= gfds+", overhead_ordering},
      {"analytic gradients match finite differences", gradient_checks},
  };
  int failures = 0;
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const auto c = static_cast<std::size_t>(std::atoi(argv[a]));
    if (c >= 1 && c <= criteria.size()) selected[c - 1] = true;
  }
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected[c]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[c].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!outcome.pass) ++failures;
    std::printf("%s %2zu %s: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
