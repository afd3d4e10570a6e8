// Command-line runner: experiments, run comparison, game oracles and blob
// inspection.
//
// Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 capacity error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "datashap/errors.hpp"
#include "datashap/experiment.hpp"
#include "datashap/explainer.hpp"
#include "datashap/model.hpp"
#include "datashap/utility.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;

void write_or_print(const std::string& text, const std::string& outPath) {
  if (outPath.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(outPath, std::ios::binary);
  if (!out) throw datashap::Error("cannot write " + outPath);
  out << text;
}

std::string inspect_blob(const std::string& path) {
  const auto blob = datashap::read_blob(path);
  if (blob.kind == 2) {
    auto stem = std::filesystem::path(path);
    stem.replace_extension();
    const auto params = datashap::load_explainer(stem);
    nlohmann::json j{{"kind", "explainer"},
                     {"inputDim", params.inputDim},
                     {"labels", params.labels},
                     {"players", params.players},
                     {"outputs", params.outputs},
                     {"hiddenUnits", params.hiddenUnits},
                     {"initSeed", params.initSeed},
                     {"values", params.values}};
    if (params.partition) j["partition"] = *params.partition;
    return j.dump(2) + "\n";
  }
  return datashap::model_to_json(datashap::model_from_blob(blob)) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-data valuation with exact, sampled and amortized Shapley estimators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 0;
  bool header = false;
  app.add_option("--seed", seed, "Root seed (overrides the config)");
  app.add_option("--out", out, "Output directory (run) or file (compare, oracle, inspect)");
  app.add_option("--threads", threads, "Worker threads (overrides the config)");
  app.add_flag("--header", header, "CSV input has a header row");

  std::string configPath;
  auto* run = app.add_subcommand("run", "Run one valuation experiment from a config file");
  run->add_option("config", configPath, "Config file")->required();

  std::string compareDir;
  auto* compare = app.add_subcommand("compare", "Aggregate removal curves of finished runs");
  compare->add_option("dir", compareDir, "Directory holding run directories")->required();

  std::string gamePath;
  std::size_t permutations = 1000;
  auto* oracle = app.add_subcommand("oracle", "Exact, leave-one-out and permutation values of a game file");
  oracle->add_option("game", gamePath, "Game file")->required();
  oracle->add_option("--permutations", permutations, "Sampled permutations for the Monte Carlo column");

  std::string blobPath;
  bool dumpJson = false;
  auto* inspect = app.add_subcommand("inspect", "Describe a model or explainer parameter blob");
  inspect->add_option("blob", blobPath, "Blob file")->required();
  inspect->add_flag("--dump-json", dumpJson, "Print every parameter as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      auto cfg = datashap::load_config(configPath);
      if (seed) cfg.seed = *seed;
      if (!out.empty()) cfg.out = out;
      if (threads > 0) cfg.threads = threads;
      if (header) cfg.dataset.csv.header = true;
      const auto summary = datashap::run_experiment(cfg);
      std::cout << "wrote " << cfg.out.string() << " (max efficiency gap " << summary.maxEfficiencyGap << ")\n";
    } else if (*compare) {
      write_or_print(datashap::compare_runs(compareDir), out);
    } else if (*oracle) {
      const auto game = datashap::load_tabular_game(gamePath);
      write_or_print(datashap::oracle_report(game, seed.value_or(0), permutations), out);
    } else if (*inspect) {
      if (dumpJson) {
        write_or_print(inspect_blob(blobPath), out);
      } else {
        const auto blob = datashap::read_blob(blobPath);
        std::cout << blobPath << ": kind " << blob.kind << ", dims";
        for (auto d : blob.dims) std::cout << ' ' << d;
        std::cout << ", " << blob.values.size() << " parameters\n";
      }
    }
  } catch (const datashap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const datashap::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
