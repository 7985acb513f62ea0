#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rstripe/estimators.hpp"
#include "rstripe/fim.hpp"

namespace rstripe {

// Accepts a file path or the name of a bundled scenario ("canonical", "desk").
Scenario load_scenario(const std::string& path_or_name);
Scenario parse_scenario(const std::string& json_text, const std::string& origin = "<string>");
// Empty when no bundled scenario has that name.
std::string bundled_scenario(const std::string& name);

double pairwise_sum(const std::vector<double>& v);
double rmse(const std::vector<double>& errors);
std::vector<double> iqr_clean(const std::vector<double>& v);
// (value, fraction of samples <= value) for each sorted sample.
std::vector<std::pair<double, double>> ecdf(const std::vector<double>& v);

struct StageErrors {
  Stage stage = Stage::Rml;
  double position_m = 0;
  double clock_m = 0;
  double phase_rad = 0;
  std::vector<double> sp_m;
};

struct TrialRecord {
  int trial = 0;
  double sdnr_db = 0;
  std::uint64_t seed = 0;
  std::vector<EstimateReport> reports;
  std::vector<StageErrors> errors;
  std::string failure;
};

struct StageMetrics {
  Stage stage = Stage::Rml;
  double sdnr_db = 0;
  int samples = 0;
  int failures = 0;
  double position_raw = 0, position_clean = 0;
  double clock_raw = 0, clock_clean = 0;
  double phase_raw = 0, phase_clean = 0;
  double sp_raw = 0, sp_clean = 0;
  std::vector<std::pair<double, double>> position_ecdf;
};

struct MetricsTable {
  std::vector<TrialRecord> trials;
  std::vector<StageMetrics> summary;
  std::vector<std::pair<double, BoundsReport>> bounds;  // CP bounds per SDNR
};

struct MonteCarloOptions {
  int threads = 1;
  double noise_scale = 1.0;
};

StageErrors stage_errors(const Scenario& truth, const EstimateReport& r);

MetricsTable run_monte_carlo(const Scenario& s, const std::vector<double>& sdnr_list, int trials,
                             std::uint64_t master_seed, const MonteCarloOptions& opt = {});

enum class SweepVariable { Bandwidth, Aperture, Sdnr };
enum class MultipathCase { LosOnly, LosRp, LosRpSp, LosRpSpKnownPhase };
std::string case_name(MultipathCase c);
std::string sync_name(SyncMode m);

Scenario apply_case(const Scenario& s, MultipathCase c);

struct SweepRow {
  double value = 0;
  MultipathCase mp = MultipathCase::LosRpSp;
  SyncMode sync = SyncMode::CP;
  BoundsReport bounds;
};

Scenario apply_sweep_value(const Scenario& s, SweepVariable var, double value);

std::vector<SweepRow> run_bounds_sweep(const Scenario& s, SweepVariable var, const std::vector<double>& values,
                                       const std::vector<MultipathCase>& cases, const std::vector<SyncMode>& modes,
                                       int threads = 1);

}  // namespace rstripe
