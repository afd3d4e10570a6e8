#include "datashap/grouping.hpp"

#include <algorithm>
#include <limits>

#include "datashap/errors.hpp"
#include "datashap/rng.hpp"
#include "datashap/shapley.hpp"

namespace datashap {

std::string to_string(GroupingMethod method) {
  switch (method) {
    case GroupingMethod::kByLabel:
      return "by-label";
    case GroupingMethod::kKmeansLogits:
      return "kmeans-logits";
    case GroupingMethod::kContiguous:
      return "contiguous";
  }
  return "unknown";
}

GroupingMethod grouping_method_from_string(const std::string& name) {
  if (name == "by-label") return GroupingMethod::kByLabel;
  if (name == "kmeans-logits") return GroupingMethod::kKmeansLogits;
  if (name == "contiguous") return GroupingMethod::kContiguous;
  throw DomainError("unknown grouping method '" + name + "'");
}

GroupPartition GroupPartition::from_groups(std::vector<std::vector<std::size_t>> groups,
                                           std::size_t n, std::string method) {
  GroupPartition p;
  p.method = std::move(method);
  p.groupOf.assign(n, std::numeric_limits<std::size_t>::max());
  for (auto& g : groups) std::sort(g.begin(), g.end());
  p.groups = std::move(groups);
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    for (std::size_t i : p.groups[g]) {
      if (i >= n) throw DomainError("partition: index " + std::to_string(i) + " out of range");
      if (p.groupOf[i] != std::numeric_limits<std::size_t>::max()) {
        throw DomainError("partition: index " + std::to_string(i) + " appears in two groups");
      }
      p.groupOf[i] = g;
    }
  }
  p.validate();
  return p;
}

void GroupPartition::validate() const {
  if (groups.empty()) throw DomainError("partition: needs at least one group");
  std::vector<bool> seen(groupOf.size(), false);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw DomainError("partition: group " + std::to_string(g) + " is empty");
    for (std::size_t i : groups[g]) {
      if (i >= groupOf.size() || seen[i] || groupOf[i] != g) {
        throw DomainError("partition: groups and groupOf disagree at index " + std::to_string(i));
      }
      seen[i] = true;
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DomainError("partition: groups do not cover every index");
  }
}

void to_json(nlohmann::json& j, const GroupPartition& p) {
  j = nlohmann::json{{"N", p.N()}, {"groups", p.groups}, {"method", p.method}};
}

void from_json(const nlohmann::json& j, GroupPartition& p) {
  auto groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  p = GroupPartition::from_groups(std::move(groups), n, j.at("method").get<std::string>());
  if (j.at("N").get<std::size_t>() != p.N()) throw DomainError("partition JSON: N disagrees with groups");
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

std::vector<std::size_t> kmeans(const std::vector<double>& points, std::size_t count,
                                std::size_t dim, std::size_t k, const KmeansOptions& options) {
  Rng rng(options.seed);
  std::vector<double> centers;
  centers.reserve(k * dim);
  auto add_center = [&](std::size_t i) {
    centers.insert(centers.end(), points.begin() + static_cast<std::ptrdiff_t>(i * dim),
                   points.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  };

  // k-means++ seeding
  add_center(uniform_index(rng, count));
  std::vector<double> best(count, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const double* last = centers.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      best[i] = std::min(best[i], squared_distance(points.data() + i * dim, last, dim));
      total += best[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double run = 0.0;
      pick = count - 1;
      for (std::size_t i = 0; i < count; ++i) {
        run += best[i];
        if (run > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, count);
    }
    add_center(pick);
  }

  std::vector<std::size_t> assign(count, k);
  auto recompute = [&] {
    std::vector<std::size_t> sizes(k, 0);
    std::vector<double> sums(k * dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      ++sizes[assign[i]];
      for (std::size_t t = 0; t < dim; ++t) sums[assign[i] * dim + t] += points[i * dim + t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t t = 0; t < dim; ++t) centers[c * dim + t] = sums[c * dim + t] / sizes[c];
    }
    return sizes;
  };
  // Empty clusters take the member of the largest cluster that lies farthest
  // from that cluster's center.
  auto repair = [&](std::vector<std::size_t>& sizes) {
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      const std::size_t largest =
          static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      std::size_t far = count;
      double farDist = -1.0;
      for (std::size_t i = 0; i < count; ++i) {
        if (assign[i] != largest) continue;
        const double dist = squared_distance(points.data() + i * dim, centers.data() + largest * dim, dim);
        if (dist > farDist) {
          farDist = dist;
          far = i;
        }
      }
      assign[far] = c;
      --sizes[largest];
      sizes[c] = 1;
      sizes = recompute();
    }
  };

  for (std::size_t iter = 0; iter < options.maxIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t arg = 0;
      double bestDist = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(points.data() + i * dim, centers.data() + c * dim, dim);
        if (dist < bestDist) {  // strict: lowest cluster index wins ties
          bestDist = dist;
          arg = c;
        }
      }
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    auto sizes = recompute();
    repair(sizes);
    if (!changed) break;
  }
  return assign;
}

}  // namespace

GroupPartition psi_partition(const Dataset& data, const ModelParams& serviceModel, std::size_t N,
                             GroupingMethod method, const KmeansOptions& kmeansOptions) {
  if (N < 1) throw DomainError("partition: N must be at least 1");
  if (N > data.n) {
    throw DomainError("partition: N = " + std::to_string(N) + " exceeds n = " + std::to_string(data.n));
  }
  std::vector<std::vector<std::size_t>> groups(N);
  switch (method) {
    case GroupingMethod::kByLabel: {
      if (N != static_cast<std::size_t>(data.m)) {
        throw DomainError("partition: by-label grouping requires N = m = " + std::to_string(data.m));
      }
      for (std::size_t i = 0; i < data.n; ++i) groups[static_cast<std::size_t>(data.labels[i])].push_back(i);
      break;
    }
    case GroupingMethod::kKmeansLogits: {
      const std::size_t dim = serviceModel.arch.outputDim;
      std::vector<double> points;
      points.reserve(data.n * dim);
      for (std::size_t i = 0; i < data.n; ++i) {
        const auto z = logits(serviceModel, data.row(i));
        points.insert(points.end(), z.begin(), z.end());
      }
      const auto assign = kmeans(points, data.n, dim, N, kmeansOptions);
      for (std::size_t i = 0; i < data.n; ++i) groups[assign[i]].push_back(i);
      break;
    }
    case GroupingMethod::kContiguous:
      return equal_partition(data.n, N);
  }
  return GroupPartition::from_groups(std::move(groups), data.n, to_string(method));
}

GroupPartition equal_partition(std::size_t n, std::size_t N) {
  if (N < 1 || N > n) throw DomainError("partition: need 1 <= N <= n");
  std::vector<std::vector<std::size_t>> groups(N);
  for (std::size_t g = 0, start = 0; g < N; ++g) {
    const std::size_t size = n / N + (g < n % N ? 1 : 0);
    for (std::size_t i = start; i < start + size; ++i) groups[g].push_back(i);
    start += size;
  }
  return GroupPartition::from_groups(std::move(groups), n, to_string(GroupingMethod::kContiguous));
}

std::size_t reduced_players(const GroupPartition& partition, std::size_t group) {
  return partition.groups.at(group).size() + partition.N() - 1;
}

SubsetMask gfds_expand_group(std::size_t group, const GroupPartition& partition,
                             const SubsetMask& reduced) {
  const auto& own = partition.groups.at(group);
  if (reduced.size() != reduced_players(partition, group)) {
    throw DomainError("reduced coalition has length " + std::to_string(reduced.size()) +
                      ", expected " + std::to_string(reduced_players(partition, group)));
  }
  SubsetMask full(partition.n());
  for (std::size_t t = 0; t < own.size(); ++t) {
    if (reduced.test(t)) full.set(own[t]);
  }
  std::size_t t = own.size();
  for (std::size_t g = 0; g < partition.N(); ++g) {
    if (g == group) continue;
    if (reduced.test(t)) {
      for (std::size_t i : partition.groups[g]) full.set(i);
    }
    ++t;
  }
  return full;
}

SubsetMask gfds_expand(std::size_t datum, const GroupPartition& partition, const SubsetMask& reduced) {
  return gfds_expand_group(partition.groupOf.at(datum), partition, reduced);
}

SubsetMask group_expand(const GroupPartition& partition, const SubsetMask& groupMask) {
  if (groupMask.size() != partition.N()) throw DomainError("group coalition length must equal N");
  SubsetMask full(partition.n());
  for (std::size_t g = 0; g < partition.N(); ++g) {
    if (!groupMask.test(g)) continue;
    for (std::size_t i : partition.groups[g]) full.set(i);
  }
  return full;
}

GfdsReducedGame::GfdsReducedGame(const Game& base, const GroupPartition& partition, std::size_t group)
    : base_(base), partition_(partition), group_(group) {
  if (base.players() != partition.n()) throw DomainError("game size differs from partition size");
}

std::size_t GfdsReducedGame::players() const { return reduced_players(partition_, group_); }

double GfdsReducedGame::value(const SubsetMask& mask) const {
  return base_.value(gfds_expand_group(group_, partition_, mask));
}

GroupGame::GroupGame(const Game& base, const GroupPartition& partition)
    : base_(base), partition_(partition) {
  if (base.players() != partition.n()) throw DomainError("game size differs from partition size");
}

double GroupGame::value(const SubsetMask& mask) const {
  return base_.value(group_expand(partition_, mask));
}

std::vector<double> gfds_exact_values(const Game& game, const GroupPartition& partition,
                                      std::size_t threads) {
  for (std::size_t g = 0; g < partition.N(); ++g) {
    if (reduced_players(partition, g) > kMaxExactPlayers) {
      throw CapacityError("group " + std::to_string(g) + " has a reduced game of " +
                          std::to_string(reduced_players(partition, g)) + " players; at most " +
                          std::to_string(kMaxExactPlayers) + " supported");
    }
  }
  std::vector<double> out(partition.n(), 0.0);
  for (std::size_t g = 0; g < partition.N(); ++g) {
    const GfdsReducedGame reduced(game, partition, g);
    const auto phi = exact_shapley(reduced, {.threads = threads, .crossCheck = false});
    const auto& members = partition.groups[g];
    for (std::size_t t = 0; t < members.size(); ++t) out[members[t]] = phi.values[t];
  }
  return out;
}

std::vector<double> group_shapley_values(const Game& game, const GroupPartition& partition,
                                         std::size_t threads) {
  if (partition.N() > kMaxExactPlayers) {
    throw CapacityError("group game with N = " + std::to_string(partition.N()) + " exceeds " +
                        std::to_string(kMaxExactPlayers) + " players");
  }
  const GroupGame grouped(game, partition);
  return exact_shapley(grouped, {.threads = threads, .crossCheck = false}).values;
}

std::vector<double> gfds_plus_values(const Game& game, const GroupPartition& partition,
                                     std::size_t threads) {
  const auto groupValues = group_shapley_values(game, partition, threads);
  std::vector<double> out(partition.n(), 0.0);
  for (std::size_t g = 0; g < partition.N(); ++g) {
    const double share = groupValues[g] / static_cast<double>(partition.groups[g].size());
    for (std::size_t i : partition.groups[g]) out[i] = share;
  }
  return out;
}

CoalitionSizeReport coalition_size(std::size_t n, const GroupPartition& partition) {
  if (partition.n() != n) throw DomainError("partition covers a different number of points");
  CoalitionSizeReport report;
  for (std::size_t g = 0; g < partition.N(); ++g) report.perGroup.push_back(reduced_players(partition, g));
  report.argminGroup = static_cast<std::size_t>(
      std::min_element(report.perGroup.begin(), report.perGroup.end()) - report.perGroup.begin());
  report.largest = *std::max_element(report.perGroup.begin(), report.perGroup.end());
  return report;
}

std::size_t equal_split_coalition_size(std::size_t n, std::size_t N) {
  if (N < 1 || N > n) throw DomainError("need 1 <= N <= n");
  return (n + N - 1) / N + N - 1;
}

std::size_t best_group_count(std::size_t n) {
  std::size_t best = 1;
  for (std::size_t N = 2; N <= n; ++N) {
    if (equal_split_coalition_size(n, N) < equal_split_coalition_size(n, best)) best = N;
  }
  return best;
}

}  // namespace datashap
