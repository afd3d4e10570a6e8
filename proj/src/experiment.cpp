#include "datashap/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "datashap/errors.hpp"
#include "datashap/eval.hpp"
#include "datashap/rng.hpp"
#include "datashap/shapley.hpp"

namespace datashap {

std::string to_string(ValuationMethod method) {
  switch (method) {
    case ValuationMethod::kExact:
      return "exact";
    case ValuationMethod::kLoo:
      return "loo";
    case ValuationMethod::kTmc:
      return "tmc";
    case ValuationMethod::kCwls:
      return "cwls";
    case ValuationMethod::kFds:
      return "fds";
    case ValuationMethod::kAfds:
      return "afds";
    case ValuationMethod::kGfds:
      return "gfds";
    case ValuationMethod::kGfdsPlus:
      return "gfds+";
    case ValuationMethod::kRandom:
      return "random";
  }
  return "unknown";
}

ValuationMethod valuation_method_from_string(const std::string& name) {
  for (auto m : {ValuationMethod::kExact, ValuationMethod::kLoo, ValuationMethod::kTmc,
                 ValuationMethod::kCwls, ValuationMethod::kFds, ValuationMethod::kAfds,
                 ValuationMethod::kGfds, ValuationMethod::kGfdsPlus, ValuationMethod::kRandom}) {
    if (to_string(m) == name) return m;
  }
  throw DomainError("unknown valuation method '" + name + "'");
}

bool is_explainer_method(ValuationMethod method) {
  return method == ValuationMethod::kFds || method == ValuationMethod::kAfds ||
         method == ValuationMethod::kGfds || method == ValuationMethod::kGfdsPlus;
}

// ---------------------------------------------------------------------------
// Config text

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct FieldContext {
  const std::string& key;
  const std::string& value;
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(key + ": " + what + " (line " + std::to_string(line) + ")");
  }

  std::uint64_t as_uint() const {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
      fail("expected a nonnegative integer, got '" + value + "'");
    }
    try {
      return std::stoull(value);
    } catch (const std::out_of_range&) {
      fail("integer out of range: '" + value + "'");
    }
  }

  double as_double() const {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(value, &used);
    } catch (const std::exception&) {
      fail("expected a number, got '" + value + "'");
    }
    if (used != value.size()) fail("expected a number, got '" + value + "'");
    return out;
  }

  bool as_bool() const {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail("expected true or false, got '" + value + "'");
  }

  std::vector<double> as_list() const {
    std::vector<double> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      FieldContext sub{key, t, line};
      out.push_back(sub.as_double());
    }
    return out;
  }

  template <class F>
  auto as_enum(F&& convert) const {
    try {
      return convert(value);
    } catch (const DomainError& e) {
      fail(e.what());
    }
  }
};

using Setter = std::function<void(ExperimentConfig&, const FieldContext&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](auto& c, const auto& f) { c.seed = f.as_uint(); }},
      {"out", [](auto& c, const auto& f) { c.out = f.value; }},
      {"threads", [](auto& c, const auto& f) { c.threads = f.as_uint(); }},
      {"dataset.source",
       [](auto& c, const auto& f) {
         if (f.value == "synthetic") {
           c.dataset.kind = DatasetSourceKind::kSynthetic;
         } else if (f.value == "csv") {
           c.dataset.kind = DatasetSourceKind::kCsv;
         } else if (f.value == "idx") {
           c.dataset.kind = DatasetSourceKind::kIdx;
         } else {
           f.fail("expected synthetic, csv or idx, got '" + f.value + "'");
         }
       }},
      {"dataset.kind",
       [](auto& c, const auto& f) { c.dataset.synthetic.kind = f.as_enum(synthetic_kind_from_string); }},
      {"dataset.d", [](auto& c, const auto& f) { c.dataset.synthetic.d = f.as_uint(); }},
      {"dataset.m", [](auto& c, const auto& f) { c.dataset.synthetic.m = static_cast<int>(f.as_uint()); }},
      {"dataset.noise", [](auto& c, const auto& f) { c.dataset.synthetic.noiseStd = f.as_double(); }},
      {"dataset.separation", [](auto& c, const auto& f) { c.dataset.synthetic.separation = f.as_double(); }},
      {"dataset.seed", [](auto& c, const auto& f) { c.dataset.seed = f.as_uint(); }},
      {"dataset.path", [](auto& c, const auto& f) { c.dataset.path = f.value; }},
      {"dataset.label_column", [](auto& c, const auto& f) { c.dataset.csv.labelColumn = f.as_uint(); }},
      {"dataset.header", [](auto& c, const auto& f) { c.dataset.csv.header = f.as_bool(); }},
      {"dataset.images", [](auto& c, const auto& f) { c.dataset.images = f.value; }},
      {"dataset.labels", [](auto& c, const auto& f) { c.dataset.labels = f.value; }},
      {"dataset.train", [](auto& c, const auto& f) { c.trainN = f.as_uint(); }},
      {"dataset.pool", [](auto& c, const auto& f) { c.poolN = f.as_uint(); }},
      {"dataset.test", [](auto& c, const auto& f) { c.testN = f.as_uint(); }},
      {"model.kind", [](auto& c, const auto& f) { c.arch.kind = f.as_enum(model_kind_from_string); }},
      {"model.hidden", [](auto& c, const auto& f) { c.arch.hiddenUnits = f.as_uint(); }},
      {"model.lr", [](auto& c, const auto& f) { c.train.learningRate = f.as_double(); }},
      {"model.epochs", [](auto& c, const auto& f) { c.train.epochs = f.as_uint(); }},
      {"model.batch", [](auto& c, const auto& f) { c.train.batchSize = f.as_uint(); }},
      {"method.name", [](auto& c, const auto& f) { c.method = f.as_enum(valuation_method_from_string); }},
      {"method.permutations", [](auto& c, const auto& f) { c.permutations = f.as_uint(); }},
      {"method.truncation", [](auto& c, const auto& f) { c.truncation = f.as_double(); }},
      {"method.samples", [](auto& c, const auto& f) { c.cwlsSamples = f.as_uint(); }},
      {"method.K", [](auto& c, const auto& f) { c.explainer.K = f.as_uint(); }},
      {"method.beta", [](auto& c, const auto& f) { c.explainer.beta = f.as_double(); }},
      {"method.N", [](auto& c, const auto& f) { c.explainer.N = f.as_uint(); }},
      {"method.gamma", [](auto& c, const auto& f) { c.explainer.gamma = f.as_double(); }},
      {"method.alpha", [](auto& c, const auto& f) { c.explainer.alpha = f.as_double(); }},
      {"method.steps", [](auto& c, const auto& f) { c.explainer.steps = f.as_uint(); }},
      {"method.batch", [](auto& c, const auto& f) { c.explainer.batchSize = f.as_uint(); }},
      {"method.hidden", [](auto& c, const auto& f) { c.explainer.hiddenUnits = f.as_uint(); }},
      {"method.head",
       [](auto& c, const auto& f) { c.explainer.gfdsPlusHead = f.as_enum(plus_head_from_string); }},
      {"method.optimizer",
       [](auto& c, const auto& f) { c.explainer.optimizer = f.as_enum(optimizer_from_string); }},
      {"method.grouping", [](auto& c, const auto& f) { c.grouping = f.as_enum(grouping_method_from_string); }},
      {"eval.etas", [](auto& c, const auto& f) { c.etas = f.as_list(); }},
      {"eval.valued", [](auto& c, const auto& f) { c.valued = f.as_uint(); }},
  };
  return table;
}

[[noreturn]] void config_fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineNo) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError(key + ": unknown field (line " + std::to_string(lineNo) + ")");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(key + ": set more than once (line " + std::to_string(lineNo) + ")");
    }
    it->second(cfg, FieldContext{key, value, lineNo});
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void ExperimentConfig::validate() const {
  if (!seed) config_fail("seed", "required (no implicit wall-clock seed)");
  if (threads < 1) config_fail("threads", "must be >= 1");
  if (trainN < 1) config_fail("dataset.train", "must be >= 1");
  if (testN < 1) config_fail("dataset.test", "must be >= 1");
  if (valued < 1 || valued > testN) {
    config_fail("eval.valued", "must lie in [1, dataset.test = " + std::to_string(testN) + "]");
  }
  if (dataset.kind == DatasetSourceKind::kSynthetic) {
    if (dataset.synthetic.m < 2) config_fail("dataset.m", "must be >= 2");
    if (dataset.synthetic.d < 1) config_fail("dataset.d", "must be >= 1");
    if (!(dataset.synthetic.noiseStd >= 0.0)) config_fail("dataset.noise", "must be >= 0");
  } else if (dataset.kind == DatasetSourceKind::kCsv) {
    if (dataset.path.empty()) config_fail("dataset.path", "required for csv sources");
  } else if (dataset.images.empty() || dataset.labels.empty()) {
    config_fail(dataset.images.empty() ? "dataset.images" : "dataset.labels", "required for idx sources");
  }
  if (arch.kind == ModelKind::kMlp1 && arch.hiddenUnits < 1) config_fail("model.hidden", "mlp1 needs >= 1 unit");
  try {
    train.validate();
  } catch (const Error& e) {
    config_fail("model", e.what());
  }
  for (std::size_t e = 0; e < etas.size(); ++e) {
    if (!(etas[e] >= 0.0 && etas[e] < 1.0)) config_fail("eval.etas", "entries must lie in [0, 1)");
    if (e > 0 && !(etas[e] > etas[e - 1])) config_fail("eval.etas", "entries must be strictly increasing");
  }
  if (method == ValuationMethod::kTmc && permutations < 1) {
    config_fail("method.permutations", "must be >= 1");
  }
  if (is_explainer_method(method)) {
    if (poolN < 1) config_fail("dataset.pool", "explainer methods need a nonempty pool");
    if (explainer.steps < 1) config_fail("method.steps", "must be >= 1");
    if (!(explainer.alpha > 0.0)) config_fail("method.alpha", "must be > 0");
    if (explainer.batchSize < 1) config_fail("method.batch", "must be >= 1");
    if (explainer.hiddenUnits < 1) config_fail("method.hidden", "must be >= 1");
    if (method != ValuationMethod::kFds) {
      if (explainer.K < 1) config_fail("method.K", "must be >= 1");
      if (!(explainer.beta > 0.0)) config_fail("method.beta", "must be > 0");
    }
    if (!(explainer.gamma >= 0.0)) config_fail("method.gamma", "must be >= 0");
    if ((method == ValuationMethod::kGfds || method == ValuationMethod::kGfdsPlus) &&
        explainer.N > trainN) {
      config_fail("method.N", "N = " + std::to_string(explainer.N) + " exceeds the " +
                                  std::to_string(trainN) + " training points");
    }
  }
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json ds;
  switch (cfg.dataset.kind) {
    case DatasetSourceKind::kSynthetic:
      ds = {{"source", "synthetic"},
            {"kind", to_string(cfg.dataset.synthetic.kind)},
            {"d", cfg.dataset.synthetic.d},
            {"m", cfg.dataset.synthetic.m},
            {"noise", cfg.dataset.synthetic.noiseStd},
            {"separation", cfg.dataset.synthetic.separation}};
      break;
    case DatasetSourceKind::kCsv:
      ds = {{"source", "csv"},
            {"path", cfg.dataset.path.string()},
            {"label_column", cfg.dataset.csv.labelColumn},
            {"header", cfg.dataset.csv.header}};
      break;
    case DatasetSourceKind::kIdx:
      ds = {{"source", "idx"}, {"images", cfg.dataset.images.string()}, {"labels", cfg.dataset.labels.string()}};
      break;
  }
  ds["train"] = cfg.trainN;
  ds["pool"] = cfg.poolN;
  ds["test"] = cfg.testN;
  if (cfg.dataset.seed) ds["seed"] = *cfg.dataset.seed;

  nlohmann::json method{{"name", to_string(cfg.method)}};
  switch (cfg.method) {
    case ValuationMethod::kTmc:
      method["permutations"] = cfg.permutations;
      if (cfg.truncation) method["truncation"] = *cfg.truncation;
      break;
    case ValuationMethod::kCwls:
      method["samples"] = cfg.cwlsSamples;
      break;
    default:
      break;
  }
  if (is_explainer_method(cfg.method)) {
    const auto& e = cfg.explainer;
    method["alpha"] = e.alpha;
    method["steps"] = e.steps;
    method["batch"] = e.batchSize;
    method["hidden"] = e.hiddenUnits;
    method["optimizer"] = to_string(e.optimizer);
    if (cfg.method != ValuationMethod::kFds) {
      method["K"] = e.K;
      method["beta"] = e.beta;
    }
    if (cfg.method == ValuationMethod::kGfds || cfg.method == ValuationMethod::kGfdsPlus) {
      method["N"] = e.N;
      if (cfg.grouping) method["grouping"] = to_string(*cfg.grouping);
    }
    if (cfg.method == ValuationMethod::kGfdsPlus) {
      method["gamma"] = e.gamma;
      method["head"] = to_string(e.gfdsPlusHead);
    }
  }
  return {{"seed", cfg.seed.value_or(0)},
          {"threads", cfg.threads},
          {"dataset", ds},
          {"model",
           {{"kind", to_string(cfg.arch.kind)},
            {"hidden", cfg.arch.hiddenUnits},
            {"lr", cfg.train.learningRate},
            {"epochs", cfg.train.epochs},
            {"batch", cfg.train.batchSize}}},
          {"method", method},
          {"eval", {{"etas", cfg.etas}, {"valued", cfg.valued}}}};
}

// ---------------------------------------------------------------------------
// Hashing

std::string git_blob_sha1(const std::string& bytes) {
  const std::string payload = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string dataset_digest(const Dataset& data) {
  std::ostringstream bytes;
  bytes.precision(17);
  bytes << data.n << ' ' << data.d << ' ' << data.m << '\n';
  for (double v : data.features) bytes << v << ' ';
  bytes << '\n';
  for (int y : data.labels) bytes << y << ' ';
  return git_blob_sha1(bytes.str());
}

// ---------------------------------------------------------------------------
// Runs

Splits load_splits(const ExperimentConfig& cfg) {
  const std::size_t total = cfg.trainN + cfg.poolN + cfg.testN;
  Dataset all;
  switch (cfg.dataset.kind) {
    case DatasetSourceKind::kSynthetic: {
      SyntheticSpec spec = cfg.dataset.synthetic;
      spec.n = total;
      spec.seed = cfg.dataset.seed.value_or(substream(cfg.seed.value_or(0), "dataset"));
      all = generate(spec);
      break;
    }
    case DatasetSourceKind::kCsv:
      all = load_csv(cfg.dataset.path, cfg.dataset.csv);
      break;
    case DatasetSourceKind::kIdx:
      all = load_idx(cfg.dataset.images, cfg.dataset.labels);
      break;
  }
  if (all.n < total) {
    config_fail("dataset.train", "train + pool + test = " + std::to_string(total) + " exceeds the " +
                                     std::to_string(all.n) + " available rows");
  }
  std::size_t at = 0;
  Splits s;
  s.train = all.slice(at, at + cfg.trainN);
  at += cfg.trainN;
  s.pool = all.slice(at, at + cfg.poolN);
  at += cfg.poolN;
  s.test = all.slice(at, at + cfg.testN);
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t root = *cfg.seed;
  RunSummary summary;
  auto phase = Clock::now();

  const Splits splits = load_splits(cfg);
  auto train = std::make_shared<const Dataset>(splits.train);
  summary.timing.emplace_back("load", seconds_since(phase));

  phase = Clock::now();
  UtilityConfig ucfg;
  ucfg.arch = cfg.arch;
  ucfg.train = cfg.train;
  ucfg.train.seed = substream(root, "service");
  auto fullRaw = make_full_utility(train, ucfg);
  const ModelParams service = fullRaw->sub_model(SubsetMask::ones(train->n)).params;
  std::shared_ptr<const UtilityProvider> full = cache_wrap(fullRaw);
  summary.timing.emplace_back("service", seconds_since(phase));

  struct Valued {
    std::size_t index;
    int label;
    std::vector<double> x;
  };
  std::vector<Valued> points;
  for (std::size_t i = 0; i < cfg.valued; ++i) {
    const auto x = splits.test.row(i);
    points.push_back({i, predict_label(service, x), {x.begin(), x.end()}});
  }

  const std::size_t n = train->n;
  const std::uint64_t valuationSeed = substream(root, "utility");
  std::vector<ShapleyVector> values;
  std::optional<ExplainerParams> explainer;
  ExplainerTrainConfig ecfg = cfg.explainer;

  phase = Clock::now();
  if (is_explainer_method(cfg.method)) {
    ecfg.seed = substream(root, "explainer");
    ecfg.threads = cfg.threads;
    if (ecfg.N == 0) ecfg.N = static_cast<std::size_t>(train->m);
    std::shared_ptr<const UtilityProvider> provider = full;
    if (cfg.method != ValuationMethod::kFds) {
      provider = cache_wrap(make_afds_utility(train, ucfg, ecfg.K, ecfg.beta));
    }
    ExplainerTrainResult trained;
    switch (cfg.method) {
      case ValuationMethod::kFds:
        ecfg.variant = Variant::kFds;
        trained = train_fds(splits.pool, provider, ecfg);
        break;
      case ValuationMethod::kAfds:
        ecfg.variant = Variant::kAfds;
        trained = train_afds(splits.pool, provider, ecfg);
        break;
      default: {
        if (ecfg.N > n) {
          config_fail("method.N", "N = " + std::to_string(ecfg.N) + " exceeds the " + std::to_string(n) +
                                      " training points");
        }
        const auto grouping = cfg.grouping.value_or(ecfg.N == static_cast<std::size_t>(train->m)
                                                        ? GroupingMethod::kByLabel
                                                        : GroupingMethod::kKmeansLogits);
        const auto partition = psi_partition(*train, service, ecfg.N, grouping,
                                             {substream(ecfg.seed, "kmeans"), 100});
        if (cfg.method == ValuationMethod::kGfds) {
          ecfg.variant = Variant::kGfds;
          trained = train_gfds(splits.pool, provider, partition, ecfg);
        } else {
          ecfg.variant = Variant::kGfdsPlus;
          trained = train_gfds_plus(splits.pool, provider, partition, ecfg);
        }
      }
    }
    summary.timing.emplace_back("explainer-training", seconds_since(phase));
    phase = Clock::now();
    for (const auto& p : points) {
      // Normalize against the endpoints of the provider the explainer was fit to.
      const auto ends = provider->endpoints(p.x, p.label);
      values.push_back(predict_normalized(trained.params, p.x, p.label, ends.grand, ends.empty));
    }
    explainer = std::move(trained.params);
  } else {
    for (const auto& p : points) {
      const ProviderGame game(full, p.x, p.label);
      switch (cfg.method) {
        case ValuationMethod::kExact:
          values.push_back(exact_shapley(game, {cfg.threads, true}));
          break;
        case ValuationMethod::kLoo: {
          const auto ends = full->endpoints(p.x, p.label);
          values.push_back(make_shapley_vector(loo_values(game), ends.grand, ends.empty));
          break;
        }
        case ValuationMethod::kTmc: {
          PermutationConfig pc;
          pc.permutations = cfg.permutations;
          pc.truncationTol = cfg.truncation.value_or(default_truncation_tol(game));
          pc.seed = combine_seed(valuationSeed, p.index);
          values.push_back(permutation_shapley(game, pc));
          break;
        }
        case ValuationMethod::kCwls: {
          CwlsOptions co;
          co.mode = cfg.cwlsSamples == 0 ? CwlsMode::kEnumerate : CwlsMode::kSampled;
          co.numSamples = cfg.cwlsSamples;
          co.seed = combine_seed(valuationSeed, p.index);
          co.threads = cfg.threads;
          values.push_back(cwls_solve(game, co));
          break;
        }
        case ValuationMethod::kRandom: {
          Rng rng(combine_seed(valuationSeed, p.index));
          std::vector<double> noise(n);
          for (double& v : noise) v = uniform01(rng);
          const auto ends = full->endpoints(p.x, p.label);
          values.push_back(efficient_normalize(noise, ends.grand, ends.empty));
          break;
        }
        default:
          break;
      }
    }
  }
  summary.timing.emplace_back("valuation", seconds_since(phase));

  summary.rankings.assign(n, 0.0);
  for (const auto& v : values) {
    for (std::size_t i = 0; i < n; ++i) summary.rankings[i] += v.values[i] / static_cast<double>(values.size());
    if (cfg.method != ValuationMethod::kLoo) summary.maxEfficiencyGap = std::max(summary.maxEfficiencyGap, v.efficiencyGap);
  }

  phase = Clock::now();
  RemovalConfig rc;
  rc.arch = cfg.arch;
  rc.train = cfg.train;
  rc.seed = substream(root, "eval");
  rc.threads = cfg.threads;
  const RemovalCurve curve =
      removal_curve(*train, summary.rankings, cfg.etas, splits.test, rc, to_string(cfg.method));
  summary.timing.emplace_back("removal", seconds_since(phase));

  // Artifacts.
  std::filesystem::create_directories(cfg.out);
  nlohmann::json shapley{{"method", to_string(cfg.method)}, {"n", n}, {"m", train->m}};
  auto& samples = shapley["samples"] = nlohmann::json::array();
  for (std::size_t k = 0; k < points.size(); ++k) {
    nlohmann::json entry = values[k];
    entry["index"] = points[k].index;
    entry["label"] = points[k].label;
    samples.push_back(std::move(entry));
  }
  const std::string shapleyText = shapley.dump(2) + "\n";
  const std::string curveText = format_curves_csv(std::span<const RemovalCurve>(&curve, 1));
  write_text(cfg.out / "shapley.json", shapleyText);
  write_text(cfg.out / "removal_curve.csv", curveText);

  nlohmann::json artifacts{{"shapley.json", git_blob_sha1(shapleyText)},
                           {"removal_curve.csv", git_blob_sha1(curveText)}};
  if (explainer) {
    save_explainer(*explainer, {ecfg, ucfg.train.seed}, cfg.out / "explainer");
    artifacts["explainer.bin"] = git_blob_sha1(read_text(cfg.out / "explainer.bin"));
    artifacts["explainer.json"] = git_blob_sha1(read_text(cfg.out / "explainer.json"));
  }

  std::ostringstream timing;
  timing.precision(6);
  timing << "phase,seconds\n";
  for (const auto& [name, secs] : summary.timing) timing << name << ',' << std::fixed << secs << '\n';
  write_text(cfg.out / "timing.csv", timing.str());

  nlohmann::json manifest{
      {"config", config_to_json(cfg)},
      {"seeds",
       {{"root", root},
        {"dataset", cfg.dataset.seed.value_or(substream(root, "dataset"))},
        {"service", ucfg.train.seed},
        {"utility", valuationSeed},
        {"explainer", substream(root, "explainer")},
        {"eval", rc.seed}}},
      {"dataset",
       {{"digest", dataset_digest(*train)},
        {"pool_digest", dataset_digest(splits.pool)},
        {"test_digest", dataset_digest(splits.test)},
        {"n", n},
        {"d", train->d},
        {"m", train->m}}},
      {"artifacts", artifacts},
  };
  write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Comparison

std::string compare_runs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConsistencyError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> runs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json" &&
        std::filesystem::exists(entry.path().parent_path() / "removal_curve.csv")) {
      runs.push_back(entry.path().parent_path());
    }
  }
  std::sort(runs.begin(), runs.end());
  if (runs.size() < 2) {
    throw ConsistencyError("compare needs at least two completed runs, found " + std::to_string(runs.size()));
  }

  std::string digest;
  std::filesystem::path first;
  // (method, eta) -> H values across runs
  std::map<std::pair<std::string, double>, std::vector<double>> table;
  for (const auto& run : runs) {
    const auto manifest = nlohmann::json::parse(read_text(run / "manifest.json"));
    const auto runDigest = manifest.at("dataset").at("digest").get<std::string>();
    if (digest.empty()) {
      digest = runDigest;
      first = run;
    } else if (runDigest != digest) {
      throw ConsistencyError("runs are not comparable: " + first.string() + " and " + run.string() +
                             " used different training data");
    }
    std::istringstream csv(read_text(run / "removal_curve.csv"));
    std::string line;
    std::getline(csv, line);
    if (trim(line) != "eta,h_value,method,seed") {
      throw FormatError(run.string() + "/removal_curve.csv: unexpected header");
    }
    while (std::getline(csv, line)) {
      if (trim(line).empty()) continue;
      std::stringstream fields(line);
      std::string eta, h, method;
      std::getline(fields, eta, ',');
      std::getline(fields, h, ',');
      std::getline(fields, method, ',');
      table[{method, std::stod(eta)}].push_back(std::stod(h));
    }
  }

  std::ostringstream out;
  out << "method,eta,h_mean,h_std,runs\n";
  for (const auto& [key, hs] : table) {
    const auto ms = mean_std(hs);
    out << key.first << ',' << format_real(key.second) << ',' << format_real(ms.mean) << ','
        << format_real(ms.std) << ',' << hs.size() << '\n';
  }
  return out.str();
}

std::string oracle_report(const TabularGame& game, std::uint64_t seed, std::size_t permutations) {
  const auto exact = exact_shapley(game);
  const auto loo = loo_values(game);
  PermutationConfig pc;
  pc.permutations = permutations;
  pc.seed = seed;
  const auto tmc = permutation_shapley(game, pc);
  std::ostringstream out;
  out << "player,exact,loo,tmc\n";
  for (std::size_t i = 0; i < game.players(); ++i) {
    out << i << ',' << format_real(exact.values[i]) << ',' << format_real(loo[i]) << ','
        << format_real(tmc.values[i]) << '\n';
  }
  return out.str();
}

}  // namespace datashap
