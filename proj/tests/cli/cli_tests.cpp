// End-to-end checks of the nlander command-line tool: outputs, exit codes and
// agreement between stored logs and recomputed metrics.
#include "nlander/flight_log.hpp"
#include "nlander/pipeline.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("nlander_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(NLANDER_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  json j;
  in >> j;
  return j;
}

std::string dir(const std::string& name) { return (work_dir() / name).string(); }

/// A short collection log shared by the training tests.
const std::string& collect_log() {
  static const std::string path = [] {
    EXPECT_EQ(run("collect --duration 20 -o " + dir("collect")), 0);
    return dir("collect") + "/collect.csv";
  }();
  return path;
}

const std::string& small_model() {
  static const std::string path = [] {
    EXPECT_EQ(run("train --logs " + collect_log() + " --epochs 3 -o " + dir("train")), 0);
    return dir("train") + "/model.json";
  }();
  return path;
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = nlander::file_hash(e.path().string());
  return out;
}

class CleanupEnvironment : public ::testing::Environment {
 public:
  void TearDown() override { fs::remove_all(work_dir()); }
};

const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new CleanupEnvironment);

}  // namespace

TEST(Cli, CollectWritesLogSidecarAndConfig) {
  const std::string log = collect_log();
  ASSERT_TRUE(fs::exists(log));
  const nlander::FlightLog l = nlander::load_flight_log(log);
  EXPECT_EQ(l.size(), 2001u);
  const json side = read_json(dir("collect") + "/collect.json");
  EXPECT_EQ(side["csv_fnv1a"].get<std::string>(), nlander::file_hash(log));
  EXPECT_TRUE(fs::exists(dir("collect") + "/config.json"));
}

TEST(Cli, TrainWritesACertifiedModel) {
  ASSERT_TRUE(fs::exists(small_model()));
  const json report = read_json(dir("train") + "/train.json");
  EXPECT_LT(report["contraction_ratio"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir("train") + "/loss.csv"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("fly --set bogus=1 -o " + dir("bad_key")), 2);
  EXPECT_EQ(run("train --logs " + collect_log() + " --gamma 1e6 -o " + dir("bad_gamma")), 2);
  EXPECT_EQ(run("fly --set 'controller.gains.Kv=[0.1,0.1,0.1]' -o " + dir("bad_gain")), 2);
  EXPECT_EQ(run("fly -c /nonexistent/config.json -o " + dir("no_config")), 4);
  EXPECT_EQ(run("evaluate --log /nonexistent/flight.csv -o " + dir("no_log")), 4);
  EXPECT_EQ(run("fly --duration 12 --set scenario.sim.domain_bound=0.5 -o " + dir("diverge")), 3);
  EXPECT_TRUE(fs::exists(dir("diverge") + "/flight_partial.csv"));
}

TEST(Cli, FlightRefusesAnUncertifiedModel) {
  ASSERT_EQ(run("train --logs " + collect_log() + " --epochs 2 --no-sn -o " + dir("no_sn")), 0);
  EXPECT_EQ(run("fly --model " + dir("no_sn") + "/model.json -o " + dir("no_sn_fly")), 2);
}

TEST(Cli, FlightRefusesATamperedModel) {
  json m = read_json(small_model());
  for (auto& w : m["layers"][0]["W"]) w = w.get<double>() * 1e8;
  const std::string path = dir("tampered_model.json");
  std::ofstream(path) << m.dump();
  EXPECT_EQ(run("fly --model " + path + " -o " + dir("tampered_fly")), 2);
}

TEST(Cli, EvaluateReproducesTheSidecarMetrics) {
  ASSERT_EQ(run("fly --model " + small_model() + " --duration 16 -o " + dir("fly_nl")), 0);
  ASSERT_EQ(run("evaluate --log " + dir("fly_nl") + "/flight.csv --model " + small_model() +
                " --controller neural-lander -o " + dir("eval_nl")),
            0);
  const json side = read_json(dir("fly_nl") + "/flight.json");
  const json metrics = read_json(dir("eval_nl") + "/metrics.json");
  EXPECT_EQ(side["metrics"], metrics);
  EXPECT_EQ(side["csv_fnv1a"].get<std::string>(), nlander::file_hash(dir("fly_nl") + "/flight.csv"));
}

TEST(Cli, GainsSweepTableMatchesStoredLogs) {
  ASSERT_EQ(run("sweep --axis gains --values 4 8 --scenario hover --set scenario.duration=8 -o " + dir("sweep")), 0);
  std::ifstream in(dir("sweep") + "/sweep.csv");
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  }
  int rows = 0;
  while (std::getline(in, line)) {
    std::map<std::string, std::string> row;
    std::stringstream ss(line);
    std::size_t i = 0;
    for (std::string c; std::getline(ss, c, ','); ++i) row[cols.at(i)] = c;
    ASSERT_EQ(row["status"], "ok");
    const std::string kv = row["kv"];
    const std::string out = dir("sweep_eval_" + std::to_string(rows));
    ASSERT_EQ(run("evaluate --log " + dir("sweep") + "/" + row["log"] + " --set scenario.kind=hover" +
                  " --set 'controller.gains.Kv=[" + kv + "," + kv + "," + kv + "]' -o " + out),
              0)
        << line;
    const json m = read_json(out + "/metrics.json");
    for (const char* key : {"terminal_z_error", "rms_z_error", "max_s", "steady_p_tilde"}) {
      EXPECT_EQ(std::stod(row[key]), m[key].get<double>()) << key << " row " << rows;
    }
    EXPECT_EQ(std::stoi(row["envelope_violations"]), m["envelope_violations"].get<int>());
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Cli, RerunsAreByteIdentical) {
  const std::string out = dir("det");
  const std::string args = "fly --scenario landing --noise --seed 5 --duration 10 -o " + out;
  ASSERT_EQ(run(args), 0);
  fs::rename(out, dir("det_first"));
  ASSERT_EQ(run(args), 0);
  const auto a = hash_tree(dir("det_first"));
  const auto b = hash_tree(out);
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
}
