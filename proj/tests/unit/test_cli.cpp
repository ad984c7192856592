// Runs the isac executable end to end and checks exit codes and artifacts.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/errors.hpp"
#include "isac/experiment.hpp"
#include "isac/fileio.hpp"

namespace fs = std::filesystem;
using namespace isac;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("isac_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(ISAC_CLI_PATH) + " " + args + " >" +
                          (work_dir() / "stdout.txt").string() + " 2>" + (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_file(p); }

std::string path(const std::string& name) { return (work_dir() / name).string(); }

/// Two single-antenna-row tAPs, one rAP, one user and a small network.
nlohmann::json tiny_config() {
  return {{"system",
           {{"n_tx", 2},
            {"n_rx", 1},
            {"m_v", 1},
            {"m_h", 2},
            {"users", 1},
            {"tx_positions", {{0, 100, 20}, {200, 100, 20}}},
            {"rx_positions", {{100, 0, 20}}},
            {"p_max_dbm", 30.0},
            {"gamma_min", 2.0}}},
          {"train", {{"max_epochs", 5}, {"batch_size", 8}, {"learning_rate", 1e-3}}},
          {"gnn", {{"hidden", 8}, {"heads", 2}}}};
}

std::string write_config(const std::string& name, const nlohmann::json& j) {
  const std::string p = path(name);
  std::ofstream(p) << j.dump(2);
  return p;
}

/// Dataset and model shared by several tests; generated once.
struct Fixture {
  std::string config, data, model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.config = write_config("tiny.json", tiny_config());
    x.data = path("tiny_data");
    x.model = path("tiny_model.json");
    EXPECT_EQ(run("gen --config " + x.config + " --out " + x.data + " --n 50 --seed 7"), 0);
    EXPECT_EQ(run("train --quiet --config " + x.config + " --data " + x.data + " --out " + x.model), 0);
    return x;
  }();
  return f;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Drops the trailing wall-time column of a training log.
std::string without_last_column(const std::string& csv) {
  std::string out;
  for (const std::string& line : lines_of(csv)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST(CliGen, ZeroSamplesIsAConfigError) { EXPECT_EQ(run("gen --out " + path("zero") + " --n 0"), 2); }

TEST(CliGen, MalformedOrUnknownConfigIsAConfigError) {
  const std::string bad = path("bad.json");
  std::ofstream(bad) << "{ not json";
  EXPECT_EQ(run("gen --config " + bad + " --out " + path("bad_out") + " --n 5"), 2);
  const std::string unknown = write_config("unknown.json", {{"optimizer", {}}});
  EXPECT_EQ(run("gen --config " + unknown + " --out " + path("bad_out") + " --n 5"), 2);
  const std::string invalid = write_config("invalid.json", {{"system", {{"m_h", 0}}}});
  EXPECT_EQ(run("gen --config " + invalid + " --out " + path("bad_out") + " --n 5"), 2);
  EXPECT_EQ(run("gen --bogus-flag"), 2);
}

TEST(CliGen, UnwritableOutputIsAnIoError) {
  const std::string blocker = path("blocker");
  std::ofstream(blocker) << "x";
  EXPECT_EQ(run("gen --out " + blocker + "/sub --n 3"), 3);
}

TEST(CliGen, RerunIsByteIdenticalAndSeedEnvOverrides) {
  const std::string cfg = fixture().config;
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("g1") + " --n 20 --seed 11"), 0);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("g2") + " --n 20 --seed 11 --threads 3"), 0);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("g3") + " --n 20 --seed 99", "ISAC_SEED=11"), 0);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("g4") + " --n 20 --seed 12"), 0);
  const auto a = dir_contents(path("g1"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, dir_contents(path("g2")));
  EXPECT_EQ(a, dir_contents(path("g3")));
  EXPECT_NE(a, dir_contents(path("g4")));
  EXPECT_EQ(run("gen --out " + path("g5") + " --n 3", "ISAC_SEED=abc"), 2);
}

TEST(CliGen, PaperProfileReportsGraphSize) {
  ASSERT_EQ(run("--profile paper gen --out " + path("paper") + " --n 2"), 0);
  const std::string out = slurp(path("stdout.txt"));
  EXPECT_NE(out.find("128 tAP + 128 rAP + 4 UE nodes, 16896 edges"), std::string::npos) << out;
}

TEST(CliTrain, SmokeRunIsFastAndDeterministic) {
  const Fixture& f = fixture();
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run("train --quiet --config " + f.config + " --data " + f.data + " --out " + path("m2.json")), 0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(seconds, 60.0);
  EXPECT_EQ(slurp(f.model), slurp(path("m2.json")));
  EXPECT_EQ(without_last_column(slurp(f.model + ".log.csv")), without_last_column(slurp(path("m2.json.log.csv"))));
  const auto meta = nlohmann::json::parse(slurp(f.model))["metadata"];
  EXPECT_EQ(meta["epochs_run"].get<int>(), 5);
  EXPECT_EQ(meta["system"]["gamma_min"].get<double>(), 2.0);
}

TEST(CliTrain, RhoOverrideIsRecorded) {
  const Fixture& f = fixture();
  ASSERT_EQ(run("train --quiet --config " + f.config + " --data " + f.data + " --out " + path("rho0.json") +
                " --rho 0 --epochs 1"),
            0);
  const auto meta = nlohmann::json::parse(slurp(path("rho0.json")))["metadata"];
  EXPECT_EQ(meta["train"]["rho"].get<double>(), 0.0);
  EXPECT_EQ(meta["epochs_run"].get<int>(), 1);
}

TEST(CliTrain, MissingDatasetIsAnIoError) {
  EXPECT_EQ(run("train --data " + path("nowhere") + " --out " + path("x.json")), 3);
  EXPECT_FALSE(fs::exists(path("x.json")));
}

TEST(CliTrain, DivergentTrainingExitsWithNonFiniteLoss) {
  const Fixture& f = fixture();
  EXPECT_EQ(run("train --quiet --config " + f.config + " --data " + f.data + " --out " + path("div.json") +
                " --lr 1e300 --epochs 3"),
            4);
  EXPECT_FALSE(fs::exists(path("div.json")));
}

TEST(CliEval, ReportSchemaAndFooterConsistency) {
  const Fixture& f = fixture();
  ASSERT_EQ(run("eval --model " + f.model + " --data " + f.data + " --report " + path("r.csv") +
                " --baseline ns-rzf"),
            0);
  const auto lines = lines_of(slurp(path("r.csv")));
  ASSERT_GT(lines.size(), 3u);
  EXPECT_EQ(lines[0].rfind("# config_hash=", 0), 0u);
  EXPECT_EQ(lines[1], "method,idx,rate,sensing_snr,snr_feasible,p_ap_max,kappa,feasible,nullspace_dim");
  std::map<std::string, std::pair<double, int>> sums;
  std::map<std::string, double> footer;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].rfind("# aggregate", 0) == 0) {
      const auto parts = split(lines[i], ' ');
      std::string method;
      double mean = NAN;
      for (const auto& p : parts) {
        if (p.rfind("method=", 0) == 0) method = p.substr(7);
        if (p.rfind("mean_rate=", 0) == 0) mean = std::stod(p.substr(10));
      }
      footer[method] = mean;
      continue;
    }
    const auto cols = split(lines[i], ',');
    ASSERT_EQ(cols.size(), 9u) << lines[i];
    auto& s = sums[cols[0]];
    s.first += std::stod(cols[2]);
    s.second += 1;
    if (cols[0] == "sacgnn") {
      EXPECT_TRUE(cols[6].empty());
    } else {
      EXPECT_FALSE(cols[6].empty());
    }
  }
  ASSERT_EQ(sums.size(), 2u);
  ASSERT_EQ(footer.size(), 2u);
  for (const auto& [method, s] : sums) {
    EXPECT_EQ(s.second, 10);  // 50 samples, 80/20 split
    EXPECT_NEAR(s.first / s.second, footer[method], 1e-9);
  }
}

TEST(CliEval, WithoutBaselineHasNoBaselineColumnsAndIsIdempotent) {
  const Fixture& f = fixture();
  ASSERT_EQ(run("eval --model " + f.model + " --data " + f.data + " --report " + path("e1.csv")), 0);
  ASSERT_EQ(run("eval --threads 2 --model " + f.model + " --data " + f.data + " --report " + path("e2.csv")), 0);
  const std::string a = slurp(path("e1.csv"));
  EXPECT_EQ(a, slurp(path("e2.csv")));
  EXPECT_EQ(lines_of(a)[1], "method,idx,rate,sensing_snr,snr_feasible,p_ap_max");
}

TEST(CliEval, ScenarioMismatchExitsWithHashError) {
  const Fixture& f = fixture();
  nlohmann::json other = tiny_config();
  other["system"]["rx_positions"] = {{100, 200, 20}};
  const std::string cfg = write_config("other.json", other);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("other_data") + " --n 10"), 0);
  EXPECT_EQ(run("eval --model " + f.model + " --data " + path("other_data") + " --report " + path("mm.csv")), 5);
  EXPECT_FALSE(fs::exists(path("mm.csv")));
  EXPECT_EQ(run("eval --baseline ns-rzf --config " + f.config + " --data " + path("other_data") + " --report " +
                path("mm.csv")),
            5);
}

TEST(CliEval, NeedsAModelOrABaseline) {
  EXPECT_EQ(run("eval --data " + fixture().data + " --report " + path("none.csv")), 2);
  EXPECT_EQ(run("eval --data " + fixture().data + " --report " + path("none.csv") + " --split middle --baseline ns-rzf"),
            2);
}

TEST(CliSweep, EmptyValuesAndUnknownParameterAreConfigErrors) {
  const Fixture& f = fixture();
  const std::string common = " --config " + f.config + " --data " + f.data + " --models " + path("sw") + " --report " +
                             path("sw.csv");
  EXPECT_EQ(run("sweep --param gamma_min --values ," + common), 2);
  EXPECT_EQ(run("sweep --param gamma_min --values 1,x" + common), 2);
  EXPECT_EQ(run("sweep --param rho --values 1" + common), 2);
}

TEST(CliSweep, MissingModelExits6AndTrainMissingFillsIn) {
  const Fixture& f = fixture();
  const std::string common = " --config " + f.config + " --data " + f.data + " --models " + path("sw") + " --report " +
                             path("sw.csv");
  fs::create_directories(path("sw"));
  EXPECT_EQ(run("sweep --param gamma_min --values 1,3" + common), 6);
  EXPECT_FALSE(fs::exists(path("sw.csv")));
  ASSERT_EQ(run("sweep --quiet --train-missing --param gamma_min --values 1,3" + common), 0);
  EXPECT_TRUE(fs::exists(path("sw/gamma_min_1.json")));
  EXPECT_TRUE(fs::exists(path("sw/gamma_min_3.json")));
  const std::string first = slurp(path("sw.csv"));
  const auto lines = lines_of(first);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[1], "param_value,method,mean_rate,violation_rate");
  EXPECT_EQ(lines[2].rfind("1,sacgnn,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("1,ns-rzf,", 0), 0u);
  ASSERT_EQ(run("sweep --param gamma_min --values 1,3" + common), 0);
  EXPECT_EQ(first, slurp(path("sw.csv")));
}

TEST(CliBeamPattern, GridAndApValidation) {
  const Fixture& f = fixture();
  const std::string scene = path("scene.json");
  std::ofstream(scene) << R"({"users": [[40, 40, 30]], "target": [115, 115, 25]})";
  ASSERT_EQ(run("beampattern --model " + f.model + " --scene " + scene + " --grid 1x1 --out " + path("bp1.csv")), 0);
  const auto lines = lines_of(slurp(path("bp1.csv")));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "phi,theta,gain_total,gain_s0,gain_u1");
  ASSERT_EQ(run("beampattern --model " + f.model + " --scene " + scene + " --grid 19x7 --ap 2 --out " + path("bp2.csv")),
            0);
  EXPECT_EQ(lines_of(slurp(path("bp2.csv"))).size(), 2u + 19u * 7u);
  EXPECT_EQ(run("beampattern --model " + f.model + " --scene " + scene + " --ap 3 --out " + path("bp3.csv")), 2);
  EXPECT_EQ(run("beampattern --model " + f.model + " --scene " + scene + " --ap 0 --out " + path("bp3.csv")), 2);
  EXPECT_EQ(run("beampattern --model " + f.model + " --scene " + scene + " --grid 0x3 --out " + path("bp3.csv")), 2);
  EXPECT_EQ(run("beampattern --model " + f.model + " --scene " + path("missing.json") + " --out " + path("bp3.csv")),
            3);
  EXPECT_FALSE(fs::exists(path("bp3.csv")));
}

TEST(CliArtifacts, ConfigHashIsSharedAcrossArtifacts) {
  const Fixture& f = fixture();
  const auto manifest = nlohmann::json::parse(slurp(fs::path(f.data) / "manifest.json"));
  const std::string hash = manifest["config_hash"].get<std::string>();
  const auto model = nlohmann::json::parse(slurp(f.model));
  EXPECT_EQ(model["config_hash"].get<std::string>(), hash);
  ASSERT_EQ(run("eval --model " + f.model + " --data " + f.data + " --report " + path("h.csv")), 0);
  const std::string prefix = "# config_hash=" + hash + " tool_version=";
  EXPECT_EQ(slurp(path("h.csv")).rfind(prefix, 0), 0u);
  EXPECT_EQ(slurp(f.model + ".log.csv").rfind(prefix, 0), 0u);
}

TEST(ExperimentHelpers, ParseGrid) {
  EXPECT_EQ(parse_grid("181x91"), (std::pair<std::size_t, std::size_t>{181, 91}));
  EXPECT_EQ(parse_grid("1x1"), (std::pair<std::size_t, std::size_t>{1, 1}));
  for (const char* bad : {"", "x", "10", "0x5", "5x0", "3x4x5", "ax2", "-1x2"}) {
    EXPECT_THROW(parse_grid(bad), ConfigError) << bad;
  }
}

TEST(ExperimentHelpers, LocalMaximaWrapInPhi) {
  // 6 phi x 3 theta, phi-major, on a strictly decreasing background.
  std::vector<double> v(18);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -static_cast<double>(i);
  v[0 * 3 + 1] = 5.0;  // phi 0 neighbours phi 5 through the wrap
  v[5 * 3 + 1] = 4.0;
  v[3 * 3 + 2] = 3.0;
  const auto m = local_maxima(v, 6, 3);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (std::pair<std::size_t, std::size_t>{0, 1}));
  EXPECT_EQ(m[1], (std::pair<std::size_t, std::size_t>{3, 2}));
  EXPECT_EQ(local_maxima(std::vector<double>(6, 1.0), 3, 2).size(), 6u);  // ties are maxima
}

TEST(ExperimentHelpers, ConfigRoundTripAndHashSensitivity) {
  const ExperimentConfig e = experiment_from_json(tiny_config(), "desk");
  const ExperimentConfig back = experiment_from_json(nlohmann::json::parse(to_json(e).dump()), "desk");
  EXPECT_EQ(to_json(back).dump(), to_json(e).dump());
  EXPECT_EQ(experiment_hash(back), experiment_hash(e));
  ExperimentConfig other = e;
  other.train.rho = 2.0;
  EXPECT_NE(experiment_hash(other), experiment_hash(e));
  other = e;
  other.gnn.hidden = 16;
  EXPECT_NE(experiment_hash(other), experiment_hash(e));
  other = e;
  other.train.threads = 7;
  EXPECT_EQ(experiment_hash(other), experiment_hash(e));
  EXPECT_EQ(default_experiment("paper").system.m_v * default_experiment("paper").system.m_h, 64u);
  EXPECT_THROW(default_experiment("huge"), ConfigError);
}
