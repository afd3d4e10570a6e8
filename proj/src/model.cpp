#include "datashap/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <nlohmann/json.hpp>

#include "datashap/errors.hpp"
#include "datashap/rng.hpp"

namespace datashap {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kLogistic ? "logistic" : "mlp1";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp1") return ModelKind::kMlp1;
  throw DomainError("unknown model kind '" + name + "'");
}

void Architecture::validate() const {
  if (inputDim < 1) throw DomainError("architecture: inputDim must be positive");
  if (outputDim < 1) throw DomainError("architecture: outputDim must be positive");
  if (kind == ModelKind::kMlp1 && hiddenUnits < 1) {
    throw DomainError("architecture: mlp1 requires hiddenUnits >= 1");
  }
}

std::size_t Architecture::parameter_count() const {
  if (kind == ModelKind::kLogistic) return outputDim * inputDim + outputDim;
  return hiddenUnits * inputDim + hiddenUnits + outputDim * hiddenUnits + outputDim;
}

void TrainConfig::validate() const {
  if (!(learningRate > 0.0)) throw DomainError("train config: learningRate must be > 0");
  if (!(lrScale > 0.0)) throw DomainError("train config: lrScale must be > 0");
  if (batchSize < 1) throw DomainError("train config: batchSize must be >= 1");
}

ModelParams zero_model(const Architecture& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.values.assign(arch.parameter_count(), 0.0);
  return p;
}

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  ModelParams p = zero_model(arch);
  p.initSeed = seed;
  Rng rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fanIn) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fanIn));
    for (std::size_t k = 0; k < count; ++k) {
      p.values[offset + k] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  };
  const std::size_t d = arch.inputDim;
  const std::size_t m = arch.outputDim;
  if (arch.kind == ModelKind::kLogistic) {
    fill(0, m * d, d);
  } else {
    const std::size_t h = arch.hiddenUnits;
    fill(0, h * d, d);
    fill(h * d + h, m * h, h);
  }
  return p;
}

namespace {

void softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : z) v /= total;
}

// Shared forward pass. `hidden` receives tanh activations for mlp1.
void forward(const ModelParams& p, const double* x, double* hidden, double* out) {
  const auto& a = p.arch;
  const double* w = p.values.data();
  const std::size_t d = a.inputDim;
  const std::size_t m = a.outputDim;
  if (a.kind == ModelKind::kLogistic) {
    const double* b = w + m * d;
    for (std::size_t c = 0; c < m; ++c) {
      double z = b[c];
      const double* wc = w + c * d;
      for (std::size_t k = 0; k < d; ++k) z += wc[k] * x[k];
      out[c] = z;
    }
    return;
  }
  const std::size_t h = a.hiddenUnits;
  const double* b1 = w + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + m * h;
  for (std::size_t j = 0; j < h; ++j) {
    double z = b1[j];
    const double* wj = w + j * d;
    for (std::size_t k = 0; k < d; ++k) z += wj[k] * x[k];
    hidden[j] = std::tanh(z);
  }
  for (std::size_t c = 0; c < m; ++c) {
    double z = b2[c];
    const double* wc = w2 + c * h;
    for (std::size_t j = 0; j < h; ++j) z += wc[j] * hidden[j];
    out[c] = z;
  }
}

void check_input(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.inputDim) {
    throw DomainError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                      std::to_string(params.arch.inputDim));
  }
}

}  // namespace

std::vector<double> logits(const ModelParams& params, std::span<const double> x) {
  check_input(params, x);
  std::vector<double> hidden(params.arch.hiddenUnits);
  std::vector<double> out(params.arch.outputDim);
  forward(params, x.data(), hidden.data(), out.data());
  return out;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  softmax_inplace(out);
  return out;
}

std::vector<double> predict_proba(const ModelParams& params, std::span<const double> x) {
  auto z = logits(params, x);
  softmax_inplace(z);
  return z;
}

int predict_label(const ModelParams& params, std::span<const double> x) {
  const auto z = logits(params, x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double cross_entropy(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> rows, std::span<double> grad) {
  const auto& a = params.arch;
  if (data.d != a.inputDim) throw DomainError("dataset dimension does not match model");
  const std::size_t d = a.inputDim;
  const std::size_t m = a.outputDim;
  const std::size_t h = a.hiddenUnits;
  const bool wantGrad = !grad.empty();
  if (wantGrad) {
    if (grad.size() != params.values.size()) throw DomainError("gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  if (rows.empty()) return 0.0;

  std::vector<double> hidden(h), out(m), dhidden(h);
  double loss = 0.0;
  const double* w = params.values.data();
  for (std::size_t r : rows) {
    const double* x = data.features.data() + r * d;
    const auto y = static_cast<std::size_t>(data.labels[r]);
    forward(params, x, hidden.data(), out.data());
    softmax_inplace(out);
    loss -= std::log(std::max(out[y], 1e-300));
    if (!wantGrad) continue;
    out[y] -= 1.0;  // out now holds dL/dz
    double* g = grad.data();
    if (a.kind == ModelKind::kLogistic) {
      double* gb = g + m * d;
      for (std::size_t c = 0; c < m; ++c) {
        double* gc = g + c * d;
        for (std::size_t k = 0; k < d; ++k) gc[k] += out[c] * x[k];
        gb[c] += out[c];
      }
      continue;
    }
    const double* w2 = w + h * d + h;
    double* gb1 = g + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + m * h;
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t c = 0; c < m; ++c) {
      double* gc = gw2 + c * h;
      const double* wc = w2 + c * h;
      for (std::size_t j = 0; j < h; ++j) {
        gc[j] += out[c] * hidden[j];
        dhidden[j] += wc[j] * out[c];
      }
      gb2[c] += out[c];
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double da = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
      double* gj = g + j * d;
      for (std::size_t k = 0; k < d; ++k) gj[k] += da * x[k];
      gb1[j] += da;
    }
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  if (wantGrad) {
    for (double& v : grad) v *= scale;
  }
  return loss * scale;
}

double accuracy(const ModelParams& params, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    if (predict_label(params, data.row(i)) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.n);
}

TrainResult train(const ModelParams& init, const Dataset& data,
                  std::span<const std::size_t> rows, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (rows.empty() && !options.allowEmpty) {
    throw DomainError("empty coalition must go through utility layer");
  }
  TrainResult result;
  result.params = init;
  if (rows.empty()) return result;

  std::vector<std::size_t> order(rows.begin(), rows.end());
  const std::size_t batch = std::min(cfg.batchSize, order.size());
  const bool shuffle = batch < order.size();
  Rng rng(combine_seed(cfg.seed, init.initSeed));
  std::vector<double> grad(init.values.size());
  const double step = cfg.step_size();
  result.lossTrace.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (shuffle) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[uniform_index(rng, i + 1)]);
      }
    }
    double epochLoss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      const std::span<const std::size_t> slice(order.data() + start, count);
      epochLoss += cross_entropy(result.params, data, slice, grad) * static_cast<double>(count);
      for (std::size_t k = 0; k < grad.size(); ++k) result.params.values[k] -= step * grad[k];
    }
    result.lossTrace.push_back(epochLoss / static_cast<double>(order.size()));
    if (options.keepSnapshots) result.snapshots.push_back(result.params);
  }
  return result;
}

TrainResult train(const ModelParams& init, const Dataset& data, const TrainConfig& cfg,
                  const TrainOptions& options) {
  std::vector<std::size_t> rows(data.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train(init, data, rows, cfg, options);
}

bool has_converged(std::span<const double> lossTrace, double tol, std::size_t window) {
  if (lossTrace.size() <= window) return false;
  const double before = lossTrace[lossTrace.size() - 1 - window];
  const double after = lossTrace.back();
  const double denom = std::max(std::abs(before), 1e-300);
  return (before - after) / denom < tol;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kBlobMagic[4] = {'D', 'S', 'H', 'P'};
constexpr std::uint32_t kBlobVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t k = 0; k < sizeof(U); ++k) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xFF));
  }
}

class LeReader {
 public:
  explicit LeReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (bytes_.size() - pos_ < sizeof(U)) throw FormatError("unexpected end of file");
    U bits = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) bits |= U{bytes_[pos_ + k]} << (8 * k);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_blob(const ParamBlob& blob) {
  std::vector<std::uint8_t> out(std::begin(kBlobMagic), std::end(kBlobMagic));
  put_le(out, kBlobVersion);
  put_le(out, blob.kind);
  put_le(out, static_cast<std::uint32_t>(blob.dims.size()));
  for (auto v : blob.dims) put_le(out, v);
  put_le(out, blob.initSeed);
  put_le(out, static_cast<std::uint64_t>(blob.values.size()));
  for (double v : blob.values) put_le(out, v);
  return out;
}

ParamBlob decode_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, std::begin(kBlobMagic))) {
    throw FormatError("parameter blob: bad magic");
  }
  LeReader in(bytes.subspan(4));
  if (in.get<std::uint32_t>() != kBlobVersion) throw FormatError("parameter blob: unsupported version");
  ParamBlob blob;
  blob.kind = in.get<std::uint32_t>();
  const auto dimCount = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < dimCount; ++k) blob.dims.push_back(in.get<std::uint64_t>());
  blob.initSeed = in.get<std::uint64_t>();
  const auto count = in.get<std::uint64_t>();
  if (in.remaining() != count * 8) throw FormatError("parameter blob: value count does not match payload");
  blob.values.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) blob.values.push_back(in.get<double>());
  return blob;
}

void write_blob(const ParamBlob& blob, const std::filesystem::path& path) {
  const auto bytes = encode_blob(blob);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParamBlob read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_blob(bytes);
}

ParamBlob to_blob(const ModelParams& params) {
  ParamBlob blob;
  blob.kind = params.arch.kind == ModelKind::kLogistic ? 0 : 1;
  blob.dims = {params.arch.inputDim, params.arch.outputDim, params.arch.hiddenUnits};
  blob.initSeed = params.initSeed;
  blob.values = params.values;
  return blob;
}

ModelParams model_from_blob(const ParamBlob& blob) {
  if (blob.kind > 1 || blob.dims.size() != 3) throw FormatError("blob does not hold a classifier");
  ModelParams p;
  p.arch.kind = blob.kind == 0 ? ModelKind::kLogistic : ModelKind::kMlp1;
  p.arch.inputDim = blob.dims[0];
  p.arch.outputDim = blob.dims[1];
  p.arch.hiddenUnits = blob.dims[2];
  p.arch.validate();
  if (blob.values.size() != p.arch.parameter_count()) {
    throw FormatError("blob value count does not match architecture");
  }
  p.initSeed = blob.initSeed;
  p.values = blob.values;
  return p;
}

std::string model_to_json(const ModelParams& params) {
  const auto& a = params.arch;
  const double* w = params.values.data();
  auto matrix = [](const double* base, std::size_t rows, std::size_t cols) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t r = 0; r < rows; ++r) {
      out.push_back(std::vector<double>(base + r * cols, base + (r + 1) * cols));
    }
    return out;
  };
  nlohmann::json j;
  j["kind"] = to_string(a.kind);
  j["inputDim"] = a.inputDim;
  j["outputDim"] = a.outputDim;
  j["initSeed"] = params.initSeed;
  if (a.kind == ModelKind::kLogistic) {
    j["weights"] = matrix(w, a.outputDim, a.inputDim);
    j["bias"] = std::vector<double>(w + a.outputDim * a.inputDim, w + params.values.size());
  } else {
    const std::size_t h = a.hiddenUnits;
    j["hiddenUnits"] = h;
    j["hiddenWeights"] = matrix(w, h, a.inputDim);
    j["hiddenBias"] = std::vector<double>(w + h * a.inputDim, w + h * a.inputDim + h);
    const double* w2 = w + h * a.inputDim + h;
    j["outputWeights"] = matrix(w2, a.outputDim, h);
    j["outputBias"] = std::vector<double>(w2 + a.outputDim * h, w + params.values.size());
  }
  return j.dump(2);
}

}  // namespace datashap
