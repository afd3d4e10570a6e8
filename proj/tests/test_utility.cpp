#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>

#include "datashap/errors.hpp"
#include "datashap/parallel.hpp"
#include "datashap/utility.hpp"

using namespace datashap;

namespace {

std::shared_ptr<const Dataset> blobs(std::size_t n, std::uint64_t seed) {
  return std::make_shared<const Dataset>(generate({SyntheticKind::kGaussianBlobs, n, 2, 2, 0.5, seed}));
}

UtilityConfig logistic_cfg(std::size_t epochs, std::uint64_t seed) {
  UtilityConfig cfg;
  cfg.arch.kind = ModelKind::kLogistic;
  cfg.train.learningRate = 0.1;
  cfg.train.epochs = epochs;
  cfg.train.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("tabular lookup") {
  const auto game = TabularGame::from_function(3, [](const SubsetMask& s) { return double(s.count()); });
  CHECK(tabular_eval(game, SubsetMask::from_string("101")) == 2.0);
  CHECK(tabular_eval(game, SubsetMask::zeros(3)) == game.at(0));

  std::mt19937_64 rng(1);
  std::vector<double> table(8);
  for (double& v : table) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const TabularGame random(3, table);
  for (std::uint64_t i = 0; i < 8; ++i) CHECK(random.value(SubsetMask::from_index(i, 3)) == table[i]);
  CHECK_THROWS_AS(random.value(SubsetMask::zeros(4)), DomainError);
  CHECK_THROWS_AS(TabularGame(3, std::vector<double>(7)), ConsistencyError);
}

TEST_CASE("game file round trip and errors") {
  const TabularGame game(2, {0.0, 0.25, 0.5, 1.0});
  const auto back = parse_tabular_game(format_tabular_game(game));
  CHECK(back.table() == game.table());
  CHECK(parse_tabular_game("# comment\n1\n0 0\n1 2.5\n").at(1) == 2.5);
  CHECK_THROWS_AS(parse_tabular_game("2\n0 0\n1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_tabular_game("1\n0 0\n0 1\n"), ParseError);
  CHECK_THROWS_AS(parse_tabular_game("21\n"), CapacityError);
}

TEST_CASE("empty coalition is the uniform predictor") {
  const auto data = blobs(10, 1);
  const auto cfg = logistic_cfg(50, 3);
  const auto x = data->row(0);
  CHECK(utility_full(*data, SubsetMask::zeros(10), x, 0, cfg) == 0.5);
  CHECK(utility_afds(*data, SubsetMask::zeros(10), x, 1, cfg, 1, 10.0) == 0.5);
}

TEST_CASE("grand coalition is confident on a centroid") {
  const auto data = blobs(20, 4);
  const auto utility = make_full_utility(data, logistic_cfg(500, 5));
  // Blob centers sit at (3, 0) for label 0 and (-3, 0) for label 1.
  const std::vector<double> c0{3.0, 0.0};
  const std::vector<double> c1{-3.0, 0.0};
  CHECK(utility->eval(SubsetMask::ones(20), c0, 0) >= 0.9);
  CHECK(utility->eval(SubsetMask::ones(20), c1, 1) >= 0.9);
}

TEST_CASE("values are deterministic and order independent") {
  const auto data = blobs(8, 2);
  const auto utility = make_full_utility(data, logistic_cfg(40, 6));
  const auto x = data->row(3);
  std::vector<SubsetMask> masks;
  for (std::uint64_t i = 1; i < 256; i += 17) masks.push_back(SubsetMask::from_index(i, 8));
  std::vector<double> forward, backward(masks.size());
  for (const auto& m : masks) forward.push_back(utility->eval(m, x, 1));
  for (std::size_t k = masks.size(); k-- > 0;) backward[k] = utility->eval(masks[k], x, 1);
  CHECK(forward == backward);
  std::vector<double> parallel(masks.size());
  parallel_for(masks.size(), 4, [&](std::size_t k) { parallel[k] = utility->eval(masks[k], x, 1); });
  CHECK(parallel == forward);
}

TEST_CASE("AFDS provider") {
  const auto data = blobs(8, 3);
  const auto cfg = logistic_cfg(30, 7);
  CHECK_THROWS_AS(make_afds_utility(data, cfg, 0, 10.0), DomainError);
  const auto x = data->row(0);
  const auto mask = SubsetMask::from_string("11010011");
  const double a = utility_afds(*data, mask, x, 0, cfg, 1, 10.0);
  CHECK(a == utility_afds(*data, mask, x, 0, cfg, 1, 10.0));
  CHECK(a > 0.0);
  CHECK(a < 1.0);
  // K equal to the full horizon with beta = 1 is the full provider.
  CHECK(utility_afds(*data, mask, x, 0, cfg, 30, 1.0) == utility_full(*data, mask, x, 0, cfg));
}

TEST_CASE("endpoints are cached per point and label") {
  const auto data = blobs(6, 5);
  const auto utility = make_full_utility(data, logistic_cfg(20, 1));
  const auto x = data->row(1);
  const auto e = utility->endpoints(x, 0);
  CHECK(e.empty == 0.5);
  const auto trainings = utility->training_count();
  CHECK(utility->endpoints(x, 0).grand == e.grand);
  CHECK(utility->training_count() == trainings);
  CHECK(e.delta() == doctest::Approx(e.grand - 0.5));
}

TEST_CASE("cache statistics") {
  const auto data = blobs(6, 6);
  const auto cached = cache_wrap(make_full_utility(data, logistic_cfg(20, 2)));
  const auto x = data->row(2);
  const auto mask = SubsetMask::from_string("101010");
  const double first = cached->eval(mask, x, 1);
  CHECK(cached->eval(mask, x, 1) == first);
  auto st = cached->stats();
  CHECK(st.misses == 1);
  CHECK(st.hits == 1);
  cached->eval(SubsetMask::from_string("010101"), x, 1);
  CHECK(cached->stats().entries == 2);
  cached->clear();
  cached->eval(mask, x, 1);
  st = cached->stats();
  CHECK(st.misses == 1);
  CHECK(st.hits == 0);
}

TEST_CASE("provider game binds a point") {
  const auto game = std::make_shared<const TabularGame>(2, std::vector<double>{0.0, 0.3, 0.4, 1.0});
  const auto provider = std::make_shared<const TabularUtility>(game);
  const std::vector<double> x{1.0};
  const ProviderGame bound(provider, x, 0);
  CHECK(bound.players() == 2);
  CHECK(bound.value(SubsetMask::from_string("01")) == 0.4);
}
