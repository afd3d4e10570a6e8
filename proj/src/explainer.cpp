#include "datashap/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "datashap/errors.hpp"
#include "datashap/parallel.hpp"
#include "datashap/rng.hpp"

namespace datashap {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFds:
      return "fds";
    case Variant::kAfds:
      return "afds";
    case Variant::kGfds:
      return "gfds";
    case Variant::kGfdsPlus:
      return "gfds+";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "fds") return Variant::kFds;
  if (name == "afds") return Variant::kAfds;
  if (name == "gfds") return Variant::kGfds;
  if (name == "gfds+") return Variant::kGfdsPlus;
  throw DomainError("unknown explainer variant '" + name + "'");
}

std::string to_string(PlusHead h) { return h == PlusHead::kSplit ? "N-dim-split" : "n-dim-penalty"; }

PlusHead plus_head_from_string(const std::string& name) {
  if (name == "N-dim-split") return PlusHead::kSplit;
  if (name == "n-dim-penalty") return PlusHead::kPenalty;
  throw DomainError("unknown GFDS+ head '" + name + "'");
}

std::string to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "adam") return Optimizer::kAdam;
  if (name == "sgd") return Optimizer::kSgd;
  throw DomainError("unknown optimizer '" + name + "'");
}

std::size_t ExplainerParams::parameter_count() const {
  const std::size_t in = inputDim + labels;
  const std::size_t out = outputs * labels;
  return hiddenUnits * in + hiddenUnits + out * hiddenUnits + out;
}

namespace {

ExplainerParams make_params(const ExplainerShape& shape, std::size_t outputs, std::uint64_t seed,
                            bool random) {
  if (shape.labels < 1) throw DomainError("explainer: need at least one label");
  if (shape.players < 1) throw DomainError("explainer: need at least one player");
  if (shape.hiddenUnits < 1) throw DomainError("explainer: hiddenUnits must be >= 1");
  ExplainerParams p;
  p.inputDim = shape.inputDim;
  p.labels = shape.labels;
  p.players = shape.players;
  p.outputs = outputs;
  p.hiddenUnits = shape.hiddenUnits;
  p.initSeed = seed;
  p.values.assign(p.parameter_count(), 0.0);
  if (!random) return p;
  Rng rng(seed);
  const std::size_t in = p.inputDim + p.labels;
  const std::size_t h = p.hiddenUnits;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t k = 0; k < h * in; ++k) p.values[k] = bound1 * (2.0 * uniform01(rng) - 1.0);
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(h));
  const std::size_t w2 = h * in + h;
  for (std::size_t k = 0; k < outputs * p.labels * h; ++k) {
    p.values[w2 + k] = bound2 * (2.0 * uniform01(rng) - 1.0);
  }
  return p;
}

struct Layout {
  std::size_t in, h, m, rows;
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;

  explicit Layout(const ExplainerParams& p)
      : in(p.inputDim + p.labels), h(p.hiddenUnits), m(p.labels), rows(p.outputs) {
    w1 = p.values.data();
    b1 = w1 + h * in;
    w2 = b1 + h;
    b2 = w2 + rows * m * h;
  }
};

void check_query(const ExplainerParams& p, std::span<const double> x, int y) {
  if (x.size() != p.inputDim) {
    throw DomainError("explainer input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(p.inputDim));
  }
  if (y < 0 || static_cast<std::size_t>(y) >= p.labels) {
    throw DomainError("label " + std::to_string(y) + " out of range [0, " + std::to_string(p.labels) + ")");
  }
}

// Column y of the grid; `hidden` receives the tanh activations.
void forward_column(const ExplainerParams& p, std::span<const double> x, int y,
                    std::vector<double>& hidden, std::vector<double>& out) {
  const Layout L(p);
  const std::size_t d = p.inputDim;
  const auto col = static_cast<std::size_t>(y);
  hidden.resize(L.h);
  out.resize(L.rows);
  for (std::size_t j = 0; j < L.h; ++j) {
    const double* wj = L.w1 + j * L.in;
    double a = L.b1[j] + wj[d + col];
    for (std::size_t k = 0; k < d; ++k) a += wj[k] * x[k];
    hidden[j] = std::tanh(a);
  }
  for (std::size_t i = 0; i < L.rows; ++i) {
    const std::size_t r = i * L.m + col;
    const double* wr = L.w2 + r * L.h;
    double z = L.b2[r];
    for (std::size_t j = 0; j < L.h; ++j) z += wr[j] * hidden[j];
    out[i] = z;
  }
}

// Accumulates d(loss)/d(params) given d(loss)/d(column y).
void backward_column(const ExplainerParams& p, std::span<const double> x, int y,
                     const std::vector<double>& hidden, std::span<const double> dOut,
                     std::span<double> grad) {
  const Layout L(p);
  const std::size_t d = p.inputDim;
  const auto col = static_cast<std::size_t>(y);
  double* g1 = grad.data();
  double* gb1 = g1 + L.h * L.in;
  double* g2 = gb1 + L.h;
  double* gb2 = g2 + L.rows * L.m * L.h;
  std::vector<double> dHidden(L.h, 0.0);
  for (std::size_t i = 0; i < L.rows; ++i) {
    const double g = dOut[i];
    if (g == 0.0) continue;
    const std::size_t r = i * L.m + col;
    const double* wr = L.w2 + r * L.h;
    double* gr = g2 + r * L.h;
    for (std::size_t j = 0; j < L.h; ++j) {
      gr[j] += g * hidden[j];
      dHidden[j] += g * wr[j];
    }
    gb2[r] += g;
  }
  for (std::size_t j = 0; j < L.h; ++j) {
    const double da = dHidden[j] * (1.0 - hidden[j] * hidden[j]);
    double* gj = g1 + j * L.in;
    for (std::size_t k = 0; k < d; ++k) gj[k] += da * x[k];
    gj[d + col] += da;
    gb1[j] += da;
  }
}

}  // namespace

ExplainerParams init_explainer(const ExplainerShape& shape, std::uint64_t seed) {
  return make_params(shape, shape.players, seed, true);
}

ExplainerParams zero_explainer(const ExplainerShape& shape) {
  return make_params(shape, shape.players, 0, false);
}

ExplainerParams init_split_explainer(const ExplainerShape& shape, const GroupPartition& partition,
                                     std::uint64_t seed) {
  if (partition.n() != shape.players) throw DomainError("partition size differs from player count");
  auto p = make_params(shape, partition.N(), seed, true);
  p.partition = partition;
  return p;
}

std::vector<double> explainer_raw(const ExplainerParams& params, std::span<const double> x, int y) {
  check_query(params, x, y);
  std::vector<double> hidden, out;
  forward_column(params, x, y, hidden, out);
  return out;
}

namespace {

std::vector<double> split_to_players(const ExplainerParams& params, std::span<const double> groupValues) {
  std::vector<double> out(params.players, 0.0);
  const auto& part = *params.partition;
  for (std::size_t g = 0; g < part.N(); ++g) {
    const double share = groupValues[g] / static_cast<double>(part.groups[g].size());
    for (std::size_t i : part.groups[g]) out[i] = share;
  }
  return out;
}

}  // namespace

std::vector<double> explainer_forward(const ExplainerParams& params, std::span<const double> x, int y) {
  auto raw = explainer_raw(params, x, y);
  if (!params.split_head()) return raw;
  return split_to_players(params, raw);
}

ShapleyVector predict_normalized(const ExplainerParams& params, std::span<const double> x, int y,
                                 double vOne, double vZero) {
  const auto raw = explainer_raw(params, x, y);
  if (!params.split_head()) return efficient_normalize(raw, vOne, vZero);
  const auto groups = efficient_normalize(raw, vOne, vZero);
  return make_shapley_vector(split_to_players(params, groups.values), vOne, vZero);
}

double explainer_loss(const ExplainerParams& params, std::span<const LossSample> batch,
                      const PenaltySpec& penalty, std::span<double> grad) {
  const bool wantGrad = !grad.empty();
  if (wantGrad) {
    if (grad.size() != params.values.size()) throw DomainError("gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  if (batch.empty()) return 0.0;
  const bool usePenalty = penalty.partition != nullptr && penalty.gamma > 0.0;
  if (usePenalty && penalty.partition->n() != params.outputs) {
    throw DomainError("penalty partition must cover the explainer's output rows");
  }
  const std::size_t R = params.outputs;
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> hidden, raw, dOut(R), centered;
  double total = 0.0;

  for (const auto& sample : batch) {
    check_query(params, sample.x, sample.y);
    if (sample.mask.size() != R) throw DomainError("loss mask length must equal the output rows");
    forward_column(params, sample.x, sample.y, hidden, raw);
    const double rawSum = std::accumulate(raw.begin(), raw.end(), 0.0);
    const double shift = (sample.ends.delta() - rawSum) / static_cast<double>(R);
    double fit = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      if (sample.mask.test(i)) fit += raw[i] + shift;
    }
    const double residual = sample.value - sample.ends.empty - fit;
    total += residual * residual;
    // d(fit)/d(raw_i) = s_i - |s| / R
    const double sizeRatio = static_cast<double>(sample.mask.count()) / static_cast<double>(R);
    for (std::size_t i = 0; i < R; ++i) {
      dOut[i] = -2.0 * residual * ((sample.mask.test(i) ? 1.0 : 0.0) - sizeRatio) * scale;
    }
    if (usePenalty) {
      for (const auto& members : penalty.partition->groups) {
        double mean = 0.0;
        for (std::size_t i : members) mean += raw[i];
        mean /= static_cast<double>(members.size());
        centered.assign(members.size(), 0.0);
        double norm = 0.0;
        for (std::size_t t = 0; t < members.size(); ++t) {
          centered[t] = raw[members[t]] - mean;
          norm += centered[t] * centered[t];
        }
        norm = std::sqrt(norm);
        total += penalty.gamma * norm;
        if (norm > 1e-12) {
          for (std::size_t t = 0; t < members.size(); ++t) {
            dOut[members[t]] += penalty.gamma * centered[t] / norm * scale;
          }
        }
      }
    }
    if (wantGrad) backward_column(params, sample.x, sample.y, hidden, dOut, grad);
  }
  return total * scale;
}

void ExplainerTrainConfig::validate() const {
  if (!(alpha > 0.0)) throw DomainError("explainer config: alpha must be > 0");
  if (batchSize < 1) throw DomainError("explainer config: batchSize must be >= 1");
  if (!(gamma >= 0.0)) throw DomainError("explainer config: gamma must be >= 0");
  if (hiddenUnits < 1) throw DomainError("explainer config: hiddenUnits must be >= 1");
  if (variant != Variant::kFds) {
    if (K < 1) throw DomainError("explainer config: K must be >= 1");
    if (!(beta > 0.0)) throw DomainError("explainer config: beta must be > 0");
  }
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

class ParamUpdater {
 public:
  ParamUpdater(ExplainerParams& params, const ExplainerTrainConfig& cfg)
      : params_(params), cfg_(cfg), grad_(params.values.size()) {
    if (cfg.optimizer == Optimizer::kAdam) {
      m_.assign(params.values.size(), 0.0);
      v_.assign(params.values.size(), 0.0);
    }
  }

  double step(std::span<const LossSample> batch, const PenaltySpec& penalty) {
    const double loss = explainer_loss(params_, batch, penalty, grad_);
    auto& w = params_.values;
    if (cfg_.optimizer == Optimizer::kSgd) {
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg_.alpha * grad_[k];
      return loss;
    }
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < w.size(); ++k) {
      m_[k] = kBeta1 * m_[k] + (1.0 - kBeta1) * grad_[k];
      v_[k] = kBeta2 * v_[k] + (1.0 - kBeta2) * grad_[k] * grad_[k];
      w[k] -= cfg_.alpha * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + kEps);
    }
    return loss;
  }

 private:
  ExplainerParams& params_;
  const ExplainerTrainConfig& cfg_;
  std::vector<double> grad_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct Query {
  std::size_t row;
  int y;
};

std::vector<Query> draw_queries(Rng& rng, const Dataset& pool, std::size_t count) {
  std::vector<Query> out(count);
  for (auto& q : out) {
    q.row = uniform_index(rng, pool.n);
    q.y = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(pool.m)));
  }
  return out;
}

// Evaluates v(expand(mask)) and the endpoints for each query.
std::vector<LossSample> evaluate(const UtilityProvider& provider, const Dataset& pool,
                                 const std::vector<Query>& queries,
                                 const std::vector<SubsetMask>& gridMasks,
                                 const std::vector<SubsetMask>& fullMasks, std::size_t threads) {
  std::vector<LossSample> batch(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t b) {
    const auto x = pool.row(queries[b].row);
    auto& s = batch[b];
    s.x.assign(x.begin(), x.end());
    s.y = queries[b].y;
    s.mask = gridMasks[b];
    s.ends = provider.endpoints(x, s.y);
    const auto& full = fullMasks[b];
    if (full.grand_coalition()) {
      s.value = s.ends.grand;
    } else if (full.empty_coalition()) {
      s.value = s.ends.empty;
    } else {
      s.value = provider.eval(full, x, s.y);
    }
  });
  return batch;
}

ExplainerShape shape_for(const Dataset& pool, const UtilityProvider& provider,
                         const ExplainerTrainConfig& cfg) {
  pool.validate();
  return {pool.d, static_cast<std::size_t>(pool.m), provider.players(), cfg.hiddenUnits};
}

std::uint64_t init_seed(const ExplainerTrainConfig& cfg) { return substream(cfg.seed, "explainer-init"); }
std::uint64_t sampling_seed(const ExplainerTrainConfig& cfg) {
  return substream(cfg.seed, "explainer-sampling");
}

ExplainerTrainResult run_flat(const Dataset& pool, const UtilityProvider& provider,
                              const ExplainerTrainConfig& cfg) {
  cfg.validate();
  ExplainerTrainResult result;
  result.params = init_explainer(shape_for(pool, provider, cfg), init_seed(cfg));
  const std::size_t n = provider.players();
  if (n < 2) return result;  // efficiency alone fixes the single value
  const KernelSampler sampler(n);
  Rng rng(sampling_seed(cfg));
  ParamUpdater updater(result.params, cfg);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto queries = draw_queries(rng, pool, cfg.batchSize);
    std::vector<SubsetMask> masks;
    masks.reserve(queries.size());
    for (std::size_t b = 0; b < queries.size(); ++b) masks.push_back(sampler.sample(rng));
    const auto batch = evaluate(provider, pool, queries, masks, masks, cfg.threads);
    result.utilityQueries += batch.size();
    result.lossTrace.push_back(updater.step(batch, {}));
  }
  return result;
}

}  // namespace

ExplainerTrainResult train_fds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                               const ExplainerTrainConfig& cfg) {
  return run_flat(pool, *provider, cfg);
}

ExplainerTrainResult train_afds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                                const ExplainerTrainConfig& cfg) {
  return run_flat(pool, *provider, cfg);
}

ExplainerTrainResult train_afds(const Dataset& pool, std::shared_ptr<const Dataset> train,
                                const UtilityConfig& serviceCfg, const ExplainerTrainConfig& cfg) {
  cfg.validate();
  auto provider = cache_wrap(make_afds_utility(std::move(train), serviceCfg, cfg.K, cfg.beta));
  return run_flat(pool, *provider, cfg);
}

ExplainerTrainResult train_gfds(const Dataset& pool, std::shared_ptr<const UtilityProvider> provider,
                                const GroupPartition& partition, const ExplainerTrainConfig& cfg) {
  cfg.validate();
  partition.validate();
  if (partition.n() != provider->players()) throw DomainError("partition size differs from player count");
  ExplainerTrainResult result;
  result.params = init_explainer(shape_for(pool, *provider, cfg), init_seed(cfg));
  std::vector<std::optional<KernelSampler>> samplers;
  for (std::size_t g = 0; g < partition.N(); ++g) {
    const std::size_t players = reduced_players(partition, g);
    if (players >= 2) {
      samplers.emplace_back(std::in_place, players);
    } else {
      samplers.emplace_back();
    }
  }
  if (std::none_of(samplers.begin(), samplers.end(), [](const auto& s) { return s.has_value(); })) {
    return result;
  }
  Rng rng(sampling_seed(cfg));
  ParamUpdater updater(result.params, cfg);
  std::size_t updates = 0;
  while (updates < cfg.steps) {
    const auto queries = draw_queries(rng, pool, cfg.batchSize);
    for (std::size_t g = 0; g < partition.N() && updates < cfg.steps; ++g) {
      if (!samplers[g]) continue;
      std::vector<SubsetMask> masks;
      masks.reserve(queries.size());
      for (std::size_t b = 0; b < queries.size(); ++b) {
        masks.push_back(gfds_expand_group(g, partition, samplers[g]->sample(rng)));
      }
      const auto batch = evaluate(*provider, pool, queries, masks, masks, cfg.threads);
      result.utilityQueries += batch.size();
      result.lossTrace.push_back(updater.step(batch, {}));
      ++updates;
    }
  }
  return result;
}

ExplainerTrainResult train_gfds_plus(const Dataset& pool,
                                     std::shared_ptr<const UtilityProvider> provider,
                                     const GroupPartition& partition,
                                     const ExplainerTrainConfig& cfg) {
  cfg.validate();
  partition.validate();
  if (partition.n() != provider->players()) throw DomainError("partition size differs from player count");
  const bool split = cfg.gfdsPlusHead == PlusHead::kSplit;
  const auto shape = shape_for(pool, *provider, cfg);
  ExplainerTrainResult result;
  result.params = split ? init_split_explainer(shape, partition, init_seed(cfg))
                        : init_explainer(shape, init_seed(cfg));
  if (partition.N() < 2) return result;
  const KernelSampler sampler(partition.N());
  Rng rng(sampling_seed(cfg));
  ParamUpdater updater(result.params, cfg);
  const PenaltySpec penalty = split ? PenaltySpec{} : PenaltySpec{&partition, cfg.gamma};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto queries = draw_queries(rng, pool, cfg.batchSize);
    std::vector<SubsetMask> groupMasks, fullMasks;
    for (std::size_t b = 0; b < queries.size(); ++b) {
      groupMasks.push_back(sampler.sample(rng));
      fullMasks.push_back(group_expand(partition, groupMasks.back()));
    }
    const auto batch = evaluate(*provider, pool, queries, split ? groupMasks : fullMasks, fullMasks,
                                cfg.threads);
    result.utilityQueries += batch.size();
    result.lossTrace.push_back(updater.step(batch, penalty));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::uint32_t kExplainerBlobKind = 2;
}

void save_explainer(const ExplainerParams& params, const ExplainerCheckpointInfo& info,
                    const std::filesystem::path& stem) {
  ParamBlob blob;
  blob.kind = kExplainerBlobKind;
  blob.dims = {params.inputDim, params.labels, params.players, params.outputs, params.hiddenUnits};
  blob.initSeed = params.initSeed;
  blob.values = params.values;
  auto binPath = stem;
  binPath += ".bin";
  write_blob(blob, binPath);

  const auto& cfg = info.cfg;
  nlohmann::json side{{"variant", to_string(cfg.variant)},
                      {"n", params.players},
                      {"m", params.labels},
                      {"d", params.inputDim},
                      {"N", cfg.N},
                      {"K", cfg.K},
                      {"beta", cfg.beta},
                      {"gamma", cfg.gamma},
                      {"alpha", cfg.alpha},
                      {"steps", cfg.steps},
                      {"batchSize", cfg.batchSize},
                      {"optimizer", to_string(cfg.optimizer)},
                      {"gfdsPlusHead", to_string(cfg.gfdsPlusHead)},
                      {"seeds", {{"explainer", cfg.seed}, {"init", params.initSeed}, {"service", info.serviceSeed}}}};
  if (params.partition) side["partition"] = *params.partition;
  auto jsonPath = stem;
  jsonPath += ".json";
  std::ofstream out(jsonPath);
  if (!out) throw FormatError("cannot write " + jsonPath.string());
  out << side.dump(2) << '\n';
}

ExplainerParams load_explainer(const std::filesystem::path& stem) {
  auto binPath = stem;
  binPath += ".bin";
  const auto blob = read_blob(binPath);
  if (blob.kind != kExplainerBlobKind || blob.dims.size() != 5) {
    throw FormatError("blob does not hold an explainer");
  }
  ExplainerParams p;
  p.inputDim = blob.dims[0];
  p.labels = blob.dims[1];
  p.players = blob.dims[2];
  p.outputs = blob.dims[3];
  p.hiddenUnits = blob.dims[4];
  p.initSeed = blob.initSeed;
  p.values = blob.values;
  if (p.values.size() != p.parameter_count()) throw FormatError("explainer blob size mismatch");
  auto jsonPath = stem;
  jsonPath += ".json";
  std::ifstream in(jsonPath);
  if (in) {
    const auto side = nlohmann::json::parse(in);
    if (side.contains("partition")) p.partition = side["partition"].get<GroupPartition>();
  }
  if (p.outputs != p.players && !p.partition) {
    throw FormatError("split-head explainer checkpoint is missing its partition sidecar");
  }
  return p;
}

}  // namespace datashap
