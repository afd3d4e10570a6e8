#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "datashap/errors.hpp"
#include "datashap/experiment.hpp"

using namespace datashap;
namespace fs = std::filesystem;

namespace {

const char* kBaseConfig = R"(# small synthetic run
seed = 5
dataset.source = synthetic
dataset.kind = gaussian-blobs
dataset.d = 2
dataset.m = 2
dataset.seed = 100
dataset.train = 8
dataset.pool = 6
dataset.test = 10
model.kind = logistic
model.lr = 0.1
model.epochs = 40
eval.etas = 0, 0.25
eval.valued = 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("datashap_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig config_with(const std::string& extra, const fs::path& out) {
  auto cfg = parse_config(std::string(kBaseConfig) + extra);
  cfg.out = out;
  return cfg;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DATASHAP_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config diagnostics name the field") {
  CHECK(error_of("seed = 1\nfoo.bar = 2\n").rfind("foo.bar: unknown field", 0) == 0);
  CHECK(error_of("seed = x\n").rfind("seed: expected a nonnegative integer", 0) == 0);
  CHECK(error_of("seed = 1\nmodel.lr = fast\n").rfind("model.lr:", 0) == 0);
  CHECK(error_of("seed = 1\nmethod.name = magic\n").rfind("method.name:", 0) == 0);
  CHECK(error_of("seed = 1\nseed = 2\n").find("more than once") != std::string::npos);
  CHECK(error_of("dataset.train = 3\ndataset.test = 2\neval.valued = 1\n").rfind("seed:", 0) == 0);
  CHECK(error_of("no equals sign\n").find("line 1") != std::string::npos);
  CHECK(error_of(std::string(kBaseConfig) + "method.name = gfds\nmethod.N = 30\n").rfind("method.N:", 0) == 0);
  CHECK(error_of(std::string(kBaseConfig) + "method.name = fds\n") == "");
  auto noPool = parse_config(std::string(kBaseConfig) + "method.name = fds\n");
  noPool.poolN = 0;
  CHECK_THROWS_WITH_AS(noPool.validate(), doctest::Contains("dataset.pool"), ConfigError);
  auto tooMany = parse_config(kBaseConfig);
  tooMany.valued = 11;
  CHECK_THROWS_WITH_AS(tooMany.validate(), doctest::Contains("eval.valued"), ConfigError);
  std::string mlp = kBaseConfig;
  mlp.replace(mlp.find("logistic"), 8, "mlp1");
  CHECK(error_of(mlp).rfind("model.hidden:", 0) == 0);
}

TEST_CASE("exact run writes efficient, reproducible artifacts") {
  const auto dir = scratch("exact");
  auto cfg = config_with("method.name = exact\n", dir / "a");
  const auto summary = run_experiment(cfg);
  CHECK(summary.maxEfficiencyGap <= 1e-12);
  for (const char* f : {"manifest.json", "shapley.json", "removal_curve.csv", "timing.csv"}) {
    CHECK(fs::exists(dir / "a" / f));
  }
  const auto shapley = nlohmann::json::parse(slurp(dir / "a" / "shapley.json"));
  CHECK(shapley.at("samples").size() == 2);
  for (const auto& s : shapley.at("samples")) {
    CHECK(s.at("values").size() == 8);
    CHECK(s.at("efficiencyGap").get<double>() <= 1e-12);
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.at("artifacts").at("shapley.json") == git_blob_sha1(slurp(dir / "a" / "shapley.json")));
  CHECK(manifest.at("config").at("method").at("name") == "exact");

  cfg.out = dir / "b";
  run_experiment(cfg);
  CHECK(slurp(dir / "a" / "shapley.json") == slurp(dir / "b" / "shapley.json"));
  CHECK(slurp(dir / "a" / "removal_curve.csv") == slurp(dir / "b" / "removal_curve.csv"));
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("every method runs") {
  const auto dir = scratch("methods");
  const char* methods[] = {"loo", "tmc", "cwls", "fds", "afds", "gfds", "gfds+", "random"};
  for (const char* m : methods) {
    auto cfg = config_with(std::string("method.name = ") + m + "\nmethod.steps = 20\nmethod.permutations = 20\n",
                           dir / m);
    CAPTURE(m);
    const auto summary = run_experiment(cfg);
    CHECK(summary.rankings.size() == 8);
    // Leave-one-out and truncated permutations are not efficient by construction.
    if (std::string(m) != "loo" && std::string(m) != "tmc") CHECK(summary.maxEfficiencyGap <= 1e-12);
  }
  CHECK(fs::exists(dir / "gfds" / "explainer.bin"));
  CHECK(fs::exists(dir / "gfds" / "explainer.json"));
  fs::remove_all(dir);
}

TEST_CASE("comparing runs") {
  const auto dir = scratch("compare");
  run_experiment(config_with("method.name = exact\n", dir / "exact"));
  CHECK_THROWS_AS(compare_runs(dir), ConsistencyError);
  run_experiment(config_with("method.name = exact\n", dir / "exact2"));
  run_experiment(config_with("method.name = random\n", dir / "random"));
  const auto table = compare_runs(dir);
  std::istringstream lines(table);
  std::string header, row;
  std::getline(lines, header);
  CHECK(header == "method,eta,h_mean,h_std,runs");
  std::getline(lines, row);
  CHECK(row.rfind("exact,0,", 0) == 0);
  CHECK(row.find(",0,2") != std::string::npos);  // identical runs: zero spread

  auto other = config_with("method.name = exact\n", dir / "other");
  other.dataset.seed = 101;
  run_experiment(other);
  CHECK_THROWS_AS(compare_runs(dir), ConsistencyError);
  fs::remove_all(dir);
}

TEST_CASE("game oracle report") {
  const auto report = oracle_report(TabularGame(3, {0, 0, 0, 1, 0, 1, 0, 1}), 1, 100);
  CHECK(report.rfind("player,exact,loo,tmc\n0,0.6666666666666667,1,", 0) == 0);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  {
    std::ofstream(dir / "ok.cfg") << kBaseConfig << "method.name = exact\n";
    std::ofstream(dir / "bad.cfg") << kBaseConfig << "method.name = gfds\nmethod.N = 30\n";
    std::ofstream(dir / "big.cfg") << "seed = 1\ndataset.train = 21\ndataset.test = 2\neval.valued = 1\n"
                                   << "model.epochs = 1\nmethod.name = exact\n";
    std::ofstream(dir / "glove.game") << "3\n0 0\n1 0\n2 0\n3 1\n4 0\n5 1\n6 0\n7 1\n";
  }
  CHECK(run_cli("run " + (dir / "ok.cfg").string() + " --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "shapley.json"));
  CHECK(run_cli("run " + (dir / "bad.cfg").string() + " --out " + (dir / "x").string()) == 2);
  CHECK(run_cli("run " + (dir / "big.cfg").string() + " --out " + (dir / "y").string()) == 3);
  CHECK(run_cli("run " + (dir / "missing.cfg").string()) == 2);
  CHECK(run_cli("oracle " + (dir / "glove.game").string() + " --out " + (dir / "glove.csv").string()) == 0);
  CHECK(slurp(dir / "glove.csv").find("0,0.6666666666666667") != std::string::npos);
  CHECK(run_cli("compare " + dir.string()) == 1);
  CHECK(run_cli("frobnicate") == 2);
  fs::remove_all(dir);
}
