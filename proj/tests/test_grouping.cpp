#include <doctest.h>

#include <random>

#include "datashap/errors.hpp"
#include "datashap/grouping.hpp"
#include "datashap/shapley.hpp"
#include "oracles.hpp"

using namespace datashap;

namespace {

TabularGame table_game(std::size_t n, const oracle::Value& v) {
  std::vector<double> t(std::size_t{1} << n);
  for (std::uint64_t s = 0; s < t.size(); ++s) t[s] = v(s);
  return TabularGame(n, std::move(t));
}

GroupPartition partition_of(std::vector<std::vector<std::size_t>> groups, std::size_t n) {
  return GroupPartition::from_groups(std::move(groups), n, "manual");
}

ModelParams service_for(const Dataset& data, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.seed = seed;
  return train(init_model({ModelKind::kLogistic, 0, data.d, static_cast<std::size_t>(data.m)}, seed), data, cfg)
      .params;
}

}  // namespace

TEST_CASE("partitions") {
  const auto data = generate({SyntheticKind::kGaussianBlobs, 20, 2, 2, 0.5, 1});
  const auto service = service_for(data, 2);
  SUBCASE("by label") {
    const auto p = psi_partition(data, service, 2, GroupingMethod::kByLabel);
    CHECK(p.N() == 2);
    CHECK(p.groups[0].size() == 10);
    CHECK(p.groups[1].size() == 10);
    CHECK_THROWS_AS(psi_partition(data, service, 3, GroupingMethod::kByLabel), DomainError);
  }
  SUBCASE("singletons") {
    const auto p = psi_partition(data, service, 20, GroupingMethod::kKmeansLogits, {3});
    for (const auto& g : p.groups) CHECK(g.size() == 1);
  }
  SUBCASE("k-means is deterministic") {
    const auto a = psi_partition(data, service, 4, GroupingMethod::kKmeansLogits, {9});
    const auto b = psi_partition(data, service, 4, GroupingMethod::kKmeansLogits, {9});
    CHECK(a.groups == b.groups);
    CHECK_NOTHROW(a.validate());
  }
  SUBCASE("too many groups") {
    CHECK_THROWS_AS(psi_partition(data, service, 21, GroupingMethod::kKmeansLogits), DomainError);
  }
}

TEST_CASE("partition validation and json") {
  CHECK_THROWS(partition_of({{0, 1}, {1, 2}}, 3));
  CHECK_THROWS(partition_of({{0}, {}}, 1));
  const auto p = partition_of({{2, 0}, {1, 3}}, 4);
  CHECK(p.groups[0] == std::vector<std::size_t>{0, 2});
  CHECK(p.groupOf[3] == 1);
  const nlohmann::json j = p;
  CHECK(j.at("N") == 2);
  const auto back = j.get<GroupPartition>();
  CHECK(back.groups == p.groups);
  CHECK(back.groupOf == p.groupOf);
  CHECK(back.method == "manual");
}

TEST_CASE("reduced coalition expansion") {
  const auto p = partition_of({{0, 1}, {2, 3}}, 4);
  CHECK(reduced_players(p, 0) == 3);
  CHECK(gfds_expand(0, p, SubsetMask::from_string("101")) == SubsetMask::from_string("1011"));
  CHECK(gfds_expand(2, p, SubsetMask::from_string("011")) == SubsetMask::from_string("1101"));
  CHECK(gfds_expand(1, p, SubsetMask::zeros(3)) == SubsetMask::zeros(4));
  CHECK(gfds_expand(1, p, SubsetMask::ones(3)) == SubsetMask::ones(4));
  CHECK_THROWS_AS(gfds_expand(0, p, SubsetMask::zeros(4)), DomainError);
  CHECK(group_expand(p, SubsetMask::from_string("01")) == SubsetMask::from_string("0011"));
}

TEST_CASE("grouped values in degenerate partitions equal Shapley values") {
  const auto glove = table_game(3, oracle::glove);
  const auto singletons = gfds_exact_values(glove, equal_partition(3, 3));
  CHECK(singletons[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(singletons[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  std::mt19937_64 rng(4);
  for (std::size_t n = 2; n <= 6; ++n) {
    const TabularGame game(n, oracle::random_table(n, rng));
    const auto exact = exact_shapley(game).values;
    const auto one = gfds_exact_values(game, equal_partition(n, 1));
    for (std::size_t i = 0; i < n; ++i) CHECK(one[i] == doctest::Approx(exact[i]).epsilon(1e-12));
  }
}

TEST_CASE("grouped values match the block oracle") {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<std::size_t>> groups{{0, 3}, {1}, {2, 4, 5}};
  const auto t = oracle::random_table(6, rng);
  const TabularGame game(6, t);
  const auto values = gfds_exact_values(game, partition_of(groups, 6));
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(values[j] == doctest::Approx(oracle::grouped_value(j, groups, [&](std::uint64_t s) { return t[s]; }))
                           .epsilon(1e-12));
  }
}

TEST_CASE("group game split") {
  const auto additive = table_game(3, [](std::uint64_t s) {
    return (s & 1 ? 0.2 : 0.0) + (s & 2 ? 0.5 : 0.0) + (s & 4 ? 0.3 : 0.0);
  });
  const auto p = partition_of({{0}, {1, 2}}, 3);
  const auto plus = gfds_plus_values(additive, p);
  CHECK(plus[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(plus[1] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(plus[2] == doctest::Approx(0.4).epsilon(1e-12));
  const auto groupValues = group_shapley_values(additive, p);
  CHECK(groupValues[1] == doctest::Approx(0.8).epsilon(1e-12));

  for (double v : gfds_plus_values(table_game(3, [](std::uint64_t) { return 0.4; }), p)) CHECK(v == 0.0);

  const auto glove = table_game(3, oracle::glove);
  const auto exact = exact_shapley(glove).values;
  const auto same = gfds_plus_values(glove, equal_partition(3, 3));
  for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(exact[i]).epsilon(1e-12));
}

TEST_CASE("coalition sizes") {
  CHECK(equal_split_coalition_size(100, 10) == 19);
  CHECK(equal_split_coalition_size(100, 5) == 24);
  CHECK(equal_split_coalition_size(100, 1) == 100);
  CHECK(best_group_count(100) == 10);
  const auto report = coalition_size(5, partition_of({{0, 1, 2}, {3}, {4}}, 5));
  CHECK(report.perGroup == std::vector<std::size_t>{5, 3, 3});
  CHECK(report.argminGroup == 1);
  CHECK(report.largest == 5);
}
