#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "datashap/dataset.hpp"
#include "datashap/mask.hpp"
#include "datashap/model.hpp"
#include "datashap/utility.hpp"

namespace datashap {

enum class GroupingMethod { kByLabel, kKmeansLogits, kContiguous };

std::string to_string(GroupingMethod method);
GroupingMethod grouping_method_from_string(const std::string& name);

// N disjoint, nonempty groups covering 0..n-1. Members of each group are kept
// in ascending index order.
struct GroupPartition {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> groupOf;
  std::string method;

  std::size_t N() const { return groups.size(); }
  std::size_t n() const { return groupOf.size(); }

  static GroupPartition from_groups(std::vector<std::vector<std::size_t>> groups, std::size_t n,
                                    std::string method);
  void validate() const;
};

void to_json(nlohmann::json& j, const GroupPartition& p);
void from_json(const nlohmann::json& j, GroupPartition& p);

struct KmeansOptions {
  std::uint64_t seed = 0;
  std::size_t maxIterations = 100;
};

// Groups by true label (requires N == m) or clusters the service model's
// logits with k-means++.
GroupPartition psi_partition(const Dataset& data, const ModelParams& serviceModel, std::size_t N,
                             GroupingMethod method, const KmeansOptions& kmeans = {});

// Contiguous blocks of near-equal size.
GroupPartition equal_partition(std::size_t n, std::size_t N);

// Player count |G_g| + N - 1 of the reduced game seen by members of group g.
std::size_t reduced_players(const GroupPartition& partition, std::size_t group);

// Maps a reduced-game coalition for datum j's group to a length-n mask. The
// reduced players are j's group members (ascending) followed by the other
// groups (in group order); a set group bit sets all of that group's indices.
SubsetMask gfds_expand(std::size_t datum, const GroupPartition& partition, const SubsetMask& reduced);
SubsetMask gfds_expand_group(std::size_t group, const GroupPartition& partition,
                             const SubsetMask& reduced);
// Group-as-player coalition (length N) to a length-n mask.
SubsetMask group_expand(const GroupPartition& partition, const SubsetMask& groupMask);

// Reduced game over the members of `group` plus the other groups as atoms.
class GfdsReducedGame final : public Game {
 public:
  GfdsReducedGame(const Game& base, const GroupPartition& partition, std::size_t group);
  std::size_t players() const override;
  double value(const SubsetMask& mask) const override;

 private:
  const Game& base_;
  const GroupPartition& partition_;
  std::size_t group_;
};

// N-player game where group i is present iff all of its members are.
class GroupGame final : public Game {
 public:
  GroupGame(const Game& base, const GroupPartition& partition);
  std::size_t players() const override { return partition_.N(); }
  double value(const SubsetMask& mask) const override;

 private:
  const Game& base_;
  const GroupPartition& partition_;
};

// Each datum's exact Shapley value inside its group's reduced game.
std::vector<double> gfds_exact_values(const Game& game, const GroupPartition& partition,
                                      std::size_t threads = 1);
// Exact Shapley values of the N-player group game.
std::vector<double> group_shapley_values(const Game& game, const GroupPartition& partition,
                                         std::size_t threads = 1);
// Group value split evenly among its members.
std::vector<double> gfds_plus_values(const Game& game, const GroupPartition& partition,
                                     std::size_t threads = 1);

struct CoalitionSizeReport {
  std::vector<std::size_t> perGroup;
  std::size_t argminGroup = 0;
  std::size_t largest = 0;
};

CoalitionSizeReport coalition_size(std::size_t n, const GroupPartition& partition);
// ceil(n / N) + N - 1 for an equal split.
std::size_t equal_split_coalition_size(std::size_t n, std::size_t N);
// Group count in [1, n] minimizing equal_split_coalition_size (smallest wins ties).
std::size_t best_group_count(std::size_t n);

}  // namespace datashap
