#include "doctest.h"
#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kAssets = TDOA_ASSETS_DIR;
const std::string kCli = TDOA_FORGE_CLI;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("tdoa_forge_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct Outcome {
  int code = -1;
  std::string err;
};

Outcome run(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = "'" + kCli + "' " + args + " >" + quote(dir / "stdout.txt") + " 2>" + quote(err);
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read(err)};
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}


// The estimate log keeps only the covariance diagonal, so NEES recomputed from
// a file differs slightly from the in-memory value. Every other field matches.
void check_same_summary(const std::string& a, const std::string& b) {
  auto ja = nlohmann::json::parse(a);
  auto jb = nlohmann::json::parse(b);
  CHECK(ja.at("mean_nees").get<double>() == doctest::Approx(jb.at("mean_nees").get<double>()).epsilon(0.05));
  ja.erase("mean_nees");
  jb.erase("mean_nees");
  CHECK(ja == jb);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  const auto dir = scratch("usage");
  CHECK(run("--help", dir).code == 0);
  CHECK(read(dir / "stdout.txt").find("TDOA_FORGE_THREADS") != std::string::npos);
  CHECK(run("", dir).code == 1);
  CHECK(run("frobnicate", dir).code == 1);
  CHECK(run("heatmap --env " + quote(kAssets / "arena" / "environment.json"), dir).code == 1);
  CHECK(run("sim --scenario " + quote(kAssets / "arena" / "scenario.json") + " --trials 0", dir).code == 1);
}

TEST_CASE("placement-optimize exit codes") {
  const auto dir = scratch("optimize");
  const std::string common = "placement-optimize --env " + quote(kAssets / "open_cube" / "environment.json") +
                             " --targets " + quote(kAssets / "open_cube" / "targets.json") + " --resolution 2.5" +
                             " --out-placement " + quote(dir / "p.json") + " --out-report " + quote(dir / "r.json");
  CHECK(run(common + " --rmse-target 1.0", dir).code == 0);
  const auto report = nlohmann::json::parse(read(dir / "r.json"));
  CHECK(report.at("anchor_count").get<int>() == 4);

  CHECK(run(common + " --rmse-target 0.001 --max-anchors 8", dir).code == 2);
  CHECK_FALSE(nlohmann::json::parse(read(dir / "r.json")).at("success").get<bool>());

  write(dir / "bad_targets.json", "{\n  \"points\": [\n    [1, 2, 3],\n    [1, 2]\n  ]\n}\n");
  const auto bad = run("placement-optimize --env " + quote(kAssets / "open_cube" / "environment.json") +
                           " --targets " + quote(dir / "bad_targets.json"),
                       dir);
  CHECK(bad.code == 1);
  CHECK(bad.err.find((dir / "bad_targets.json").string() + ":4: /points/1") != std::string::npos);
}

TEST_CASE("heatmap grid size and sentinel cells") {
  const auto dir = scratch("heatmap");
  const auto out = dir / "h.csv";
  REQUIRE(run("heatmap --env " + quote(kAssets / "arena" / "environment.json") + " --placement " +
                  quote(kAssets / "arena" / "constellation1.json") + " --out " + quote(out),
              dir)
              .code == 0);
  CHECK(count_lines(read(out)) == 1 + 32 * 32);

  // A planar constellation evaluated in its own plane.
  write(dir / "planar.json",
        R"({"anchors": [[0,0,2],[8,0,2],[8,8,2],[0,8,2]], "pairs": [[4,1],[1,2],[2,3],[3,4]], "mode": "centralized"})");
  REQUIRE(run("heatmap --env " + quote(kAssets / "arena" / "environment.json") + " --placement " +
                  quote(dir / "planar.json") + " --height 2 --resolution 1 --out " + quote(out),
              dir)
              .code == 0);
  CHECK(read(out).find(",inf\n") != std::string::npos);
}

TEST_CASE("estimate rejects an unsorted log") {
  const auto dir = scratch("unsorted");
  write(dir / "log.jsonl",
        "{\"t\":0.0,\"type\":\"imu\",\"acc\":[0,0,9.81],\"gyro\":[0,0,0]}\n"
        "{\"t\":0.005,\"type\":\"imu\",\"acc\":[0,0,9.81],\"gyro\":[0,0,0]}\n"
        "{\"t\":0.004,\"type\":\"imu\",\"acc\":[0,0,9.81],\"gyro\":[0,0,0]}\n");
  const auto r = run("estimate --log " + quote(dir / "log.jsonl") + " --placement " +
                         quote(kAssets / "arena" / "constellation1.json") + " --out " + quote(dir / "out"),
                     dir);
  CHECK(r.code == 1);
  CHECK(r.err.find((dir / "log.jsonl").string() + ":3:") != std::string::npos);
}

TEST_CASE("sim, estimate and eval agree") {
  const auto dir = scratch("pipeline");
  REQUIRE(run("sim --scenario " + quote(kAssets / "arena" / "scenario.json") + " --out " + quote(dir / "sim"), dir)
              .code == 0);
  const auto summary = nlohmann::json::parse(read(dir / "sim" / "summary.json"));
  CHECK(summary.contains("rmse"));
  CHECK(summary.contains("bound_rmse"));

  REQUIRE(run("estimate --log " + quote(dir / "sim" / "log.jsonl") + " --placement " +
                  quote(kAssets / "arena" / "constellation1.json") + " --out " + quote(dir / "est"),
              dir)
              .code == 0);
  CHECK(read(dir / "est" / "estimates.jsonl") == read(dir / "sim" / "estimates.jsonl"));

  REQUIRE(run("eval --est " + quote(dir / "est" / "estimates.jsonl") + " --gt " + quote(dir / "sim" / "log.jsonl") +
                  " --scenario " + quote(kAssets / "arena" / "scenario.json") + " --bound --out " +
                  quote(dir / "eval" / "summary.json"),
              dir)
              .code == 0);
  CHECK(read(dir / "eval" / "errors.csv").rfind("t,err,bound\n", 0) == 0);
  check_same_summary(read(dir / "eval" / "summary.json"), read(dir / "sim" / "summary.json"));
}

TEST_CASE("divergence exits with code three and still writes the summary") {
  const auto dir = scratch("diverge");
  // Starts at cruise speed on a tight loop, so the alignment window is not static.
  write(dir / "scenario.json", R"({
  "name": "spin",
  "environment": ")" + (kAssets / "arena" / "environment.json").string() + R"(",
  "placement": ")" + (kAssets / "arena" / "constellation1.json").string() + R"(",
  "profile": "arena",
  "trajectory": {"kind": "lissajous", "center": [4, 4, 1.5], "amplitude": [1, 1, 0], "frequency": [1, 1, 1],
                 "phase": [0, 1.5707963267948966, 0], "laps": 3, "speed": 4, "hold": 0, "ramp": 0}
})");
  const auto r = run("sim --scenario " + quote(dir / "scenario.json") + " --out " + quote(dir / "out"), dir);
  CHECK(r.code == 3);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(nlohmann::json::parse(read(dir / "out" / "summary.json")).at("diverged").get<bool>());
}

}  // TEST_SUITE
