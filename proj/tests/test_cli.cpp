#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpdp/baselines.hpp"
#include "cpdp/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("cpdp_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Run cli(const std::string& args, const std::string& env = "") {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = env + " " + CPDP_CLI + " " + args + " 2>" + err.string();
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.err = slurp(err);
  return r;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const std::string fixture = std::string(CPDP_TEST_DATA) + "/repeating_seed1.csv";

}  // namespace

TEST_CASE("detect is byte-identical for a fixed seed") {
  const Run a = cli("detect --seed 7 " + fixture);
  const Run b = cli("detect --seed 7 " + fixture);
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != cli("detect --seed 8 " + fixture).out);
  CHECK(cli("detect " + fixture, "CPDP_SEED=7").out == a.out);
  CHECK(json::parse(a.out).at("seed") == 7);
}

TEST_CASE("detect recovers the fixture's change points") {
  const json truth = json::parse(slurp(std::string(CPDP_TEST_DATA) + "/repeating_seed1_truth.json"));
  const Run r = cli("detect --seed 7 " + fixture);
  REQUIRE(r.status == 0);
  const json doc = json::parse(r.out);
  const auto got = doc.at("change_points").get<std::vector<int>>();
  const auto want = truth.at("change_points").get<std::vector<int>>();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 2);
  CHECK(doc.at("posterior_prob").size() == doc.at("settings").at("n").get<std::size_t>());
  CHECK(doc.at("labels").size() == doc.at("map_change_points").size() + 1);
}

TEST_CASE("baseline dispatch") {
  const Run r = cli("detect --baseline pelt --penalty 12.3 " + fixture);
  REQUIRE(r.status == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("settings").at("method") == "pelt");
  CHECK(doc.at("settings").at("penalty") == 12.3);
  const cpdp::TimeSeries x = cpdp::parse_series_csv(fixture);
  CHECK(doc.at("change_points").get<std::vector<int>>() == cpdp::pelt_mean(x.values(), 12.3));

  const Run m = cli("detect --baseline mcmc --iterations 2000 --burn-in 500 " + fixture);
  REQUIRE(m.status == 0);
  const json mdoc = json::parse(m.out);
  CHECK(mdoc.at("settings").at("method") == "mcmc");
  CHECK(mdoc.at("settings").at("hyper").at("eppf") == false);
  CHECK(mdoc.at("num_classes") == mdoc.at("labels").size());
}

TEST_CASE("config file and flag precedence") {
  const fs::path cfg = scratch() / "detect.cfg";
  write(cfg, "iterations = 1500\nburn_in = 500\nalpha = 3\n");
  const Run r = cli("detect --config " + cfg.string() + " --alpha 2 " + fixture);
  REQUIRE(r.status == 0);
  const json s = json::parse(r.out).at("settings");
  CHECK(s.at("iterations") == 1500);
  CHECK(s.at("hyper").at("alpha") == 2.0);

  write(cfg, "iterations = 1500\nalpah = 3\n");
  const Run bad = cli("detect --config " + cfg.string() + " " + fixture);
  CHECK(bad.status == 1);
  CHECK(bad.err.find("valid keys") != std::string::npos);
  CHECK(bad.err.find("alpha") != std::string::npos);
}

TEST_CASE("error exits") {
  const fs::path bad = scratch() / "bad.csv";
  write(bad, "1.0\n2.0\nabc\n4.0\n");
  Run r = cli("detect " + bad.string());
  CHECK(r.status == 2);
  CHECK(r.err.find(":3:") != std::string::npos);

  const fs::path tiny = scratch() / "tiny.csv";
  write(tiny, "1\n2\n3\n");
  r = cli("detect " + tiny.string());
  CHECK(r.status == 1);
  CHECK(r.err.find("at least 4") != std::string::npos);

  CHECK(cli("detect --no-such-flag " + fixture).status == 1);
  CHECK(cli("detect --baseline lasso " + fixture).status == 1);
  CHECK(cli("detect /nonexistent.csv").status == 2);
  CHECK(cli("detect " + fixture, "CPDP_SEED=abc").status == 1);
  CHECK(cli("").status == 1);
}

TEST_CASE("detect reads stdin and writes --out") {
  const fs::path out = scratch() / "result.json";
  const Run r = cli("detect --seed 3 --iterations 1000 --burn-in 200 -o " + out.string() + " - < " +
                    fixture);
  REQUIRE(r.status == 0);
  CHECK(r.out.empty());
  CHECK(json::parse(slurp(out)).at("seed") == 3);
}

TEST_CASE("simulate reproduces the fixture") {
  const Run r = cli("simulate --scenario repeating --seed 1");
  REQUIRE(r.status == 0);
  CHECK(r.out == slurp(fixture));
}

TEST_CASE("bench smoke run") {
  for (const std::string sc : {"repeating", "random"}) {
    const fs::path dir = scratch() / ("bench_" + sc);
    const Run r = cli("bench --scenario " + sc +
                      " --realizations 5 --seed 1 --iterations 4000 --calibration-realizations 5"
                      " --jobs 2 --out-dir " + dir.string());
    REQUIRE(r.status == 0);
    const std::string caption = sc == "random" ? "Random mean parameter assignment."
                                               : "Repeating mean parameter assignment.";
    CHECK(r.out.rfind(caption + "\n", 0) == 0);
    for (const char* m : {"Proposed Method", "MCMC", "PELT"}) {
      CHECK(r.out.find(m) != std::string::npos);
    }
    const json t = json::parse(slurp(dir / "table.json"));
    CHECK(t.at("caption") == caption);
    CHECK(t.at("rows").size() == 3);
    const std::string csv = slurp(dir / "table.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const std::string raw = slurp(dir / "raw.csv");
    CHECK(std::count(raw.begin(), raw.end(), '\n') == 1 + 3 * 5);
  }
}

TEST_CASE("cleanup") { fs::remove_all(scratch()); }
