#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "rstripe/io.hpp"

using namespace rstripe;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rstripe_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RSTRIPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json canonical_json() { return json::parse(bundled_scenario("canonical")); }

}  // namespace

TEST(Metrics, PairwiseSumAccuracy) {
  std::vector<double> v(1 << 20, 0.1);
  long double exact = 0;
  for (double x : v) exact += x;
  EXPECT_NEAR(pairwise_sum(v), static_cast<double>(exact), 1e-9);
  EXPECT_EQ(pairwise_sum({}), 0.0);
}

TEST(Metrics, RmseAndIqrCleaning) {
  const std::vector<double> e{1, 2, 3, 4, 100};
  EXPECT_NEAR(rmse(e), std::sqrt((1 + 4 + 9 + 16 + 10000) / 5.0), 1e-12);
  const double q1 = oracle::quantile7(e, 0.25), q3 = oracle::quantile7(e, 0.75);
  EXPECT_DOUBLE_EQ(q1, 2.0);
  EXPECT_DOUBLE_EQ(q3, 4.0);
  const auto clean = iqr_clean(e);
  EXPECT_EQ(clean, (std::vector<double>{1, 2, 3, 4}));

  std::mt19937_64 rng(8);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  std::vector<double> r(97);
  for (double& x : r) x = ln(rng);
  const double a = oracle::quantile7(r, 0.25), b = oracle::quantile7(r, 0.75);
  std::vector<double> expected;
  for (double x : r)
    if (x >= a - 1.5 * (b - a) && x <= b + 1.5 * (b - a)) expected.push_back(x);
  EXPECT_EQ(iqr_clean(r), expected);
}

TEST(Metrics, Ecdf) {
  const auto f = ecdf({3, 1, 2, 2});
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0], std::make_pair(1.0, 0.25));
  EXPECT_EQ(f[1], std::make_pair(2.0, 0.75));
  EXPECT_EQ(f[2], std::make_pair(3.0, 1.0));
}

TEST(Io, ParseList) {
  EXPECT_EQ(parse_list("1,2.5,3"), (std::vector<double>{1, 2.5, 3}));
  EXPECT_EQ(parse_list("0:1:0.25"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ(parse_list("1:3:lin3"), (std::vector<double>{1, 2, 3}));
  const auto lg = parse_list("1e6:1e9:log4");
  ASSERT_EQ(lg.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(lg[i], std::pow(10.0, 6 + i), 1e-6 * lg[i]);
  EXPECT_EQ(parse_list("1e6:1e9:log25").size(), 25u);
  EXPECT_THROW(parse_list("a,b"), ConfigError);
  EXPECT_THROW(parse_list("1:2:0"), ConfigError);
  EXPECT_THROW(parse_list(""), ConfigError);
}

TEST(Io, CanonicalScenarioValues) {
  const Scenario s = load_scenario("canonical");
  EXPECT_DOUBLE_EQ(s.waveform.fc, 3.5e9);
  EXPECT_EQ(s.waveform.K, 20);
  EXPECT_EQ(s.num_stripes(), 4);
  for (const auto& st : s.stripes) {
    EXPECT_EQ(st.num_antennas, 16);
    EXPECT_NEAR(st.spacing, s.waveform.wavelength() / 2.1, 1e-15);
    EXPECT_DOUBLE_EQ(st.phase_center.z(), 2.75);
  }
  EXPECT_EQ(s.ue, Vec3(3.03, 2.87, 1.0));
  ASSERT_EQ(s.num_scatterers(), 2);
  EXPECT_EQ(s.scatterers[0].position, Vec3(2, 2.2, 0.5));
  EXPECT_DOUBLE_EQ(s.scatterers[0].radius, 0.1956);
  EXPECT_EQ(s.scatterers[1].position, Vec3(4, 2, 1.5));
  EXPECT_DOUBLE_EQ(s.scatterers[1].radius, 0.1757);
  EXPECT_DOUBLE_EQ(s.materials[0].eps_r, 6.0);
  EXPECT_DOUBLE_EQ(s.materials[0].mu_r, 1.0);
  EXPECT_DOUBLE_EQ(s.materials[0].sigma, 1e-2);
  EXPECT_DOUBLE_EQ(s.dnr_db, 0.0);
  EXPECT_NEAR(sdnr(s), 0.0, 1e-10);
}

TEST(Io, SchemaErrorsCarryFieldPath) {
  json j = canonical_json();
  j["waveform"].erase("fc_hz");
  try {
    parse_scenario(j.dump());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field, "waveform.fc_hz");
  }
  j = canonical_json();
  j["walls"][1].erase("normal");
  try {
    parse_scenario(j.dump());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field, "walls[1].normal");
  }
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
}

TEST(Io, SemanticErrors) {
  json j = canonical_json();
  j["ue"]["position_m"] = {9.0, 1.0, 1.0};
  EXPECT_THROW(parse_scenario(j.dump()), SemanticError);
  j = canonical_json();
  j["processing"]["position_dims"] = 4;
  EXPECT_THROW(parse_scenario(j.dump()), SemanticError);
  j = canonical_json();
  j["scatterers"][0]["radius_m"] = -1.0;
  EXPECT_THROW(parse_scenario(j.dump()), SemanticError);
}

TEST(Io, BoundsCsvHeader) {
  const Scenario s = load_scenario("canonical");
  std::ostringstream os;
  write_bounds_csv(os, {{s.waveform.bandwidth(), evaluate_bounds(s, fim_options(s))}}, s.num_scatterers());
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "sweep_var,peb_m,ceb_s,cpeb_rad,sp_peb_m_1,sp_peb_m_2");
}

TEST(Harness, SweepShapeAndCases) {
  const Scenario s = load_scenario("canonical");
  const std::vector<MultipathCase> cases{MultipathCase::LosOnly, MultipathCase::LosRp, MultipathCase::LosRpSp,
                                         MultipathCase::LosRpSpKnownPhase};
  const auto rows = run_bounds_sweep(s, SweepVariable::Aperture, {8, 16}, cases, {SyncMode::CP, SyncMode::NCP});
  EXPECT_EQ(rows.size(), 16u);
  EXPECT_EQ(apply_case(s, MultipathCase::LosOnly).num_components(0), 1);
  EXPECT_EQ(apply_case(s, MultipathCase::LosRp).num_components(0), 4);
  EXPECT_EQ(apply_case(s, MultipathCase::LosRpSp).num_components(0), 6);
  for (const auto& r : rows) EXPECT_TRUE(std::isfinite(r.bounds.peb));
}

TEST(Harness, MonteCarloIndependentOfThreadCount) {
  const Scenario s = load_scenario("desk");
  const MetricsTable a = run_monte_carlo(s, {20.0}, 2, 7, {1, 1.0});
  const MetricsTable b = run_monte_carlo(s, {20.0}, 2, 7, {2, 1.0});
  std::ostringstream ja, jb;
  write_reports_jsonl(ja, a);
  write_reports_jsonl(jb, b);
  EXPECT_EQ(ja.str(), jb.str());
  std::ostringstream sa, sb;
  write_summary_csv(sa, a);
  write_summary_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("bounds --bogus"), 1);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("bounds --scenario /nonexistent/file.json"), 1);
  EXPECT_EQ(run_cli("bounds --format xml"), 1);
  EXPECT_EQ(run_cli("bounds --sync maybe"), 1);
  EXPECT_EQ(run_cli("selftest"), 0);

  json j = canonical_json();
  j["scatterers"][0]["position_m"] = j["ue"]["position_m"];
  const auto path = scratch("degenerate.json");
  std::ofstream(path) << j.dump();
  EXPECT_EQ(run_cli("bounds --scenario " + path.string()), 2);
}

TEST(Cli, BoundsSweepToFile) {
  const auto out = scratch("bounds.csv");
  ASSERT_EQ(run_cli("bounds --scenario canonical --bandwidth 1e6:1e9:log4 --out " + out.string()), 0);
  std::ifstream in(out);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  const auto js = scratch("bounds.json");
  ASSERT_EQ(run_cli("bounds --sdnr 0,10 --format json --out " + js.string()), 0);
  std::ifstream jin(js);
  const json parsed = json::parse(jin);
  EXPECT_EQ(parsed.size(), 2u);
}

TEST(Cli, SimulateBinaryDump) {
  const auto out = scratch("obs.bin");
  ASSERT_EQ(run_cli("simulate --scenario desk --seed 3 --out " + out.string()), 0);
  std::ifstream in(out, std::ios::binary);
  const auto obs = read_observations_binary(in);
  const Scenario s = load_scenario("desk");
  const auto ref = synthesize(s, 3, {0, 1.0});
  ASSERT_EQ(obs.size(), ref.size());
  for (std::size_t n = 0; n < obs.size(); ++n) EXPECT_EQ(obs[n].Y, ref[n].Y);
}
