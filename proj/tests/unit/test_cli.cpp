#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fracland/errors.hpp"
#include "fracland/models/equilibria.hpp"
#include "fracland_cli/config.hpp"
#include "fracland_cli/experiments.hpp"

using namespace fracland;
using namespace fracland::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = FRACLAND_CONFIG_DIR;
const fs::path kScratch = FRACLAND_TEST_OUT;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& yaml, const std::optional<std::string>& kind = std::nullopt) {
  try {
    (void)parse_experiment(parse_yaml(yaml, "test.yaml"), {}, kind);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

/// Lines not starting with '#'.
std::string csv_body(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') out += line + "\n";
  }
  return out;
}

std::size_t data_rows(const fs::path& p) {
  std::istringstream in(csv_body(p));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

Experiment experiment(const std::string& yaml, const std::string& out) {
  Overrides ov;
  ov.out = (kScratch / out).string();
  fs::remove_all(*ov.out);
  return parse_experiment(parse_yaml(yaml, "test.yaml"), ov);
}

std::set<std::string> catalog_keys(const ExperimentInfo& info) {
  std::set<std::string> keys;
  const std::regex token("[A-Za-z_][A-Za-z0-9_]*");
  for (const auto& f : info.fields) {
    // first token of every comma or bar separated entry, up to the first '.'
    std::string name = f.name;
    std::replace(name.begin(), name.end(), '|', ',');
    std::istringstream parts(name);
    std::string part;
    while (std::getline(parts, part, ',')) {
      std::smatch m;
      if (std::regex_search(part, m, token)) keys.insert(m.str());
    }
  }
  return keys;
}

}  // namespace

TEST_CASE("catalog lists exactly the eight experiment kinds") {
  const auto cat = list_experiments();
  REQUIRE(cat.size() == 8);
  std::set<std::string> kinds;
  for (const auto& i : cat) {
    kinds.insert(i.kind);
    CHECK_FALSE(i.summary.empty());
    CHECK(i.fields.size() > 4);
  }
  CHECK(kinds == std::set<std::string>(kExperimentKinds.begin(), kExperimentKinds.end()));
  CHECK(kinds.size() == 8);
}

TEST_CASE("every example config validates and uses catalogued keys") {
  std::map<std::string, ExperimentInfo> by_kind;
  for (const auto& i : list_experiments()) by_kind.emplace(i.kind, i);
  std::set<std::string> covered;
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".yaml" && entry.path().extension() != ".json") continue;
    ++files;
    CAPTURE(entry.path().string());
    const auto doc = load_config(entry.path().string());
    Experiment e;
    REQUIRE_NOTHROW(e = parse_experiment(doc));
    covered.insert(e.kind);
    const auto keys = catalog_keys(by_kind.at(e.kind));
    for (const auto& [k, v] : doc.root.items()) {
      CAPTURE(k);
      CHECK(keys.count(k) == 1);
    }
  }
  CHECK(files >= 8);
  CHECK(covered.size() == 8);
}

TEST_CASE("validation errors name the field and the line") {
  SUBCASE("unknown kind") {
    const auto msg = config_error("seed: 3\nkind: teleport\n");
    CHECK(msg.find("test.yaml:2") != std::string::npos);
    CHECK(msg.find("field 'kind'") != std::string::npos);
  }
  SUBCASE("missing kind without a subcommand") {
    CHECK(config_error("seed: 3\n").find("field 'kind'") != std::string::npos);
  }
  SUBCASE("kind disagreeing with the subcommand") {
    CHECK(config_error("kind: fit\n", std::string("abm")).find("field 'kind'") != std::string::npos);
  }
  SUBCASE("unknown nested key") {
    const auto msg = config_error("kind: simulate\nx0: 0.1\ngrid:\n  t_end: 5\nmodel:\n  type: cubic\n  a9: 1\n");
    CHECK(msg.find("test.yaml:7") != std::string::npos);
    CHECK(msg.find("field 'model.a9'") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);
  }
  SUBCASE("unknown top-level key") {
    CHECK(config_error("kind: landscape\nbogus: 1\n").find("field 'bogus'") != std::string::npos);
  }
  SUBCASE("wrong type") {
    const auto msg = config_error("kind: ensemble\nn: many\n");
    CHECK(msg.find("field 'n'") != std::string::npos);
    CHECK(msg.find("integer") != std::string::npos);
  }
  SUBCASE("order out of range") {
    CHECK(config_error("kind: landscape\nalphas: [1.0, 1.2]\n").find("field 'alphas'") != std::string::npos);
  }
  SUBCASE("alphas and memory together") {
    CHECK(config_error("kind: landscape\nalphas: [1.0]\nmemory: [0.2]\n").find("memory") != std::string::npos);
  }
  SUBCASE("required field") {
    CHECK(config_error("kind: simulate\ngrid:\n  t_end: 5\n").find("field 'x0'") != std::string::npos);
  }
  SUBCASE("B outside the bistable window") {
    CHECK(config_error("kind: fit\nB: [0.5, 3.0]\n").find("field 'B'") != std::string::npos);
  }
  SUBCASE("schedule parameter the model lacks") {
    const auto msg = config_error(
        "kind: simulate\nx0: 0.1\ngrid: {t_end: 5}\nschedule: {type: pulse, parameter: rho, offset: 1, t_on: 1, "
        "t_off: 2}\n");
    CHECK(msg.find("schedule.parameter") != std::string::npos);
  }
  SUBCASE("schedule driving the model out of its domain") {
    const auto msg = config_error(
        "kind: simulate\nx0: 0.1\nmodel: {type: quorum}\ngrid: {t_end: 5}\n"
        "schedule: {type: step, parameter: rho, after: 2.5, t_step: 1}\n");
    CHECK(msg.find("schedule.parameter") != std::string::npos);
  }
  SUBCASE("non-bistable model") {
    CHECK(config_error("kind: landscape\nmodel: {a1: -1, a3: -1}\n").find("field 'model'") != std::string::npos);
  }
  SUBCASE("ABM carrying capacity above the free cells") {
    CHECK(config_error("kind: abm\nK: 5000\n").find("field 'K'") != std::string::npos);
  }
  SUBCASE("restart horizon past the end") {
    CHECK(config_error("kind: abm\nrestart: {horizons: [300]}\n").find("restart.horizons") != std::string::npos);
  }
  SUBCASE("duplicate YAML key") {
    CHECK(config_error("kind: fit\nalpha: 0.8\nalpha: 0.9\n").find("test.yaml:3") != std::string::npos);
  }
  SUBCASE("YAML syntax error") {
    CHECK(config_error("kind: fit\nB: [0.5, \n").find("test.yaml:") != std::string::npos);
  }
}

TEST_CASE("JSON configs parse like YAML") {
  const auto y = parse_experiment(parse_yaml("kind: landscape\nmemory: [0, 0.2]\nh: 0.02\n"));
  const auto j = parse_experiment(parse_json(R"({"kind": "landscape", "memory": [0, 0.2], "h": 0.02})"));
  CHECK(y.resolved == j.resolved);
  CHECK_THROWS_AS((void)parse_json("{\"kind\": \n\"fit\",,}", "bad.json"), ConfigError);
  try {
    (void)parse_json("{\"kind\": \n\"fit\",,}", "bad.json");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.json:2") != std::string::npos);
  }
}

TEST_CASE("memory strengths become orders and overrides win") {
  Overrides ov;
  ov.seed = 99;
  ov.threads = 3;
  const auto e = parse_experiment(parse_yaml("kind: ensemble\nseed: 4\nthreads: 1\nmemory: [0, 0.2]\n"), ov);
  const auto& s = std::get<EnsembleSpec>(e.spec);
  REQUIRE(s.options.alphas.size() == 2);
  CHECK(s.options.alphas[0] == 1.0);
  CHECK(s.options.alphas[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(e.seed == 99);
  CHECK(e.threads == 3);
  CHECK(e.resolved["seed"] == 99);
  CHECK(e.resolved["alphas"].size() == 2);
}

TEST_CASE("resolved config records defaults") {
  const auto e = parse_experiment(parse_yaml("kind: abm\n"));
  CHECK(e.resolved["geometry_seed"] == 123);
  CHECK(e.resolved["restart"]["replicates"] == 300);
  CHECK(e.resolved["seed"] == 1);
  CHECK_FALSE(e.resolved.contains("solver"));
}

TEST_CASE("sha256 of a known string") {
  fs::create_directories(kScratch);
  const auto p = kScratch / "abc.txt";
  std::ofstream(p, std::ios::binary) << "abc";
  CHECK(sha256_file(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest lists every artifact and reruns match modulo timing") {
  const std::string yaml =
      "kind: simulate\nseed: 7\nmodel: {type: herbivory}\nalphas: [1.0, 0.8]\nx0: 1.0\ngrid: {t_end: 20, h: 0.01}\n"
      "noise: {sigma: 0.05}\nschedule: {type: pulse, parameter: B, offset: 0.1, t_on: 5, t_off: 10}\n";
  const auto e = experiment(yaml, "manifest");
  auto m1 = run_experiment(e);
  const auto body1 = slurp(fs::path(e.out) / "trajectories.csv");
  auto m2 = run_experiment(e);
  const auto body2 = slurp(fs::path(e.out) / "trajectories.csv");
  CHECK(body1 == body2);
  CHECK(m1.contains("timing"));
  m1.erase("timing");
  m2.erase("timing");
  CHECK(m1 == m2);
  CHECK(m1["config"]["noise"]["seed"] == 7);

  std::set<std::string> listed;
  for (const auto& a : m1["artifacts"]) {
    listed.insert(a["path"].get<std::string>());
    const auto p = fs::path(e.out) / a["path"].get<std::string>();
    CHECK(a["sha256"] == sha256_file(p));
    CHECK(a["bytes"] == fs::file_size(p));
  }
  std::set<std::string> on_disk;
  for (const auto& entry : fs::directory_iterator(e.out)) {
    if (entry.path().filename() != "manifest.json") on_disk.insert(entry.path().filename().string());
  }
  CHECK(listed == on_disk);
  CHECK(data_rows(fs::path(e.out) / "trajectories.csv") == 2 * 2001);

  const auto saved = nlohmann::json::parse(slurp(fs::path(e.out) / "manifest.json"));
  CHECK(saved["versions"]["fracland"].is_string());
  CHECK(saved["timing"]["wall_seconds"].is_number());
}

TEST_CASE("thread count does not change results") {
  const std::string yaml =
      "kind: stochastic\nalphas: [1.0, 0.7]\nnoise: {sigma: 0.2}\nt_end: 120\nburn_in: 20\nreplicates: 3\n"
      "block_sizes: [1, 10]\ntau_blocks: [1, 10]\ntau_window: 2\nacf_max_lag: 1\npsd: {segment: 1024}\n"
      "survival: {t_max: 20, step: 5}\n";
  auto one = experiment(yaml, "threads1");
  auto three = experiment(yaml, "threads3");
  three.threads = 3;
  const auto m1 = run_experiment(one);
  const auto m3 = run_experiment(three);
  REQUIRE(m1["artifacts"].size() == m3["artifacts"].size());
  for (std::size_t i = 0; i < m1["artifacts"].size(); ++i) {
    const auto name = m1["artifacts"][i]["path"].get<std::string>();
    CAPTURE(name);
    if (name.ends_with(".csv")) CHECK(csv_body(fs::path(one.out) / name) == csv_body(fs::path(three.out) / name));
  }
  CHECK(data_rows(fs::path(one.out) / "variance.csv") == 3 * 2 * 2);
}

TEST_CASE("ensemble table has one row per model and order") {
  const auto e = experiment("kind: ensemble\nseed: 3\nn: 3\nmemory: [0, 0.2]\n", "ensemble");
  (void)run_experiment(e);
  CHECK(data_rows(fs::path(e.out) / "ensemble.csv") == 3 * 2);
  const auto summary = nlohmann::json::parse(slurp(fs::path(e.out) / "summary.json"));
  CHECK(summary["n"] == 3);
}

TEST_CASE("hysteresis legs separate more with memory") {
  auto e = parse_experiment(load_config((kConfigs / "hysteresis.yaml").string()));
  e.out = (kScratch / "hysteresis").string();
  (void)run_experiment(e);
  const auto s = nlohmann::json::parse(slurp(fs::path(e.out) / "summary.json"));
  const auto& a = s["alphas"];
  REQUIRE(a.size() == 2);
  CHECK(a[0]["alpha"] == 1.0);
  CHECK(a[1]["alpha"] == 0.75);
  CHECK(a[1]["mean_width"].get<double>() > a[0]["mean_width"].get<double>());
  CHECK(a[1]["mean_recovery_rho"].get<double>() > a[0]["mean_recovery_rho"].get<double>());
  CHECK(data_rows(fs::path(e.out) / "loop.csv") == 10 * 2 * 1001);
}

TEST_CASE("summarize_loop on constructed loops") {
  const models::QuorumParams q{3.0, 1.0, 0.05, 0.38};
  // rho at bin centres, down over the first 9 samples and back up over the next 9
  std::vector<double> t, rho;
  for (int i = 0; i < 9; ++i) {
    t.push_back(i);
    rho.push_back(0.385 - 0.01 * i);
  }
  for (int i = 0; i < 9; ++i) {
    t.push_back(9 + i);
    rho.push_back(0.305 + 0.01 * i);
  }
  auto xu = [&](double r) {
    auto p = q;
    p.rho = r;
    return models::equilibria(models::RationalModel::quorum(p)).unstable();
  };

  SUBCASE("same path both ways has no area") {
    std::vector<double> x;
    for (double r : rho) x.push_back(xu(r) + 0.5);
    const auto l = summarize_loop(t, rho, x, q, 9.0, 2.0, 0.01);
    CHECK(l.area == doctest::Approx(0.0));
    CHECK_FALSE(l.collapse_rho);
    CHECK_FALSE(l.width);
  }
  SUBCASE("high down, low up") {
    std::vector<double> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = t[i] < 9.0 ? 2.0 : 0.0;
    // nine shared bins, each with a gap of 2
    const double expected = 9 * 2.0 * 0.01;
    const auto l = summarize_loop(t, rho, x, q, 9.0, 2.0, 0.01);
    CHECK(l.area == doctest::Approx(expected));
    REQUIRE(l.collapse_rho);
    CHECK(*l.collapse_rho == doctest::Approx(rho[9]));
    CHECK_FALSE(l.recovery_rho);
  }
  SUBCASE("collapse then recovery, hold respected") {
    std::vector<double> x(t.size(), 2.5);
    for (std::size_t i = 3; i < 12; ++i) x[i] = 0.0;
    x[2] = 0.0;  // a one-sample dip does not count
    x[3] = 2.5;
    const auto l = summarize_loop(t, rho, x, q, 9.0, 2.0, 0.01);
    REQUIRE(l.collapse_rho);
    CHECK(*l.collapse_rho == doctest::Approx(rho[4]));
    REQUIRE(l.recovery_rho);
    CHECK(*l.recovery_rho == doctest::Approx(rho[12]));
    CHECK(*l.width == doctest::Approx(rho[12] - rho[4]));
  }
}
