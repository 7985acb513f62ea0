#pragma once

#include <vector>

#include "rstripe/channel.hpp"

namespace rstripe {

struct FimOptions {
  SyncMode sync = SyncMode::CP;
  int dims = 3;
  bool known_rp_phases = false;
};

FimOptions fim_options(const Scenario& s);

// Storage order of the global parameter vector:
//   position (D), clock offset, phase offset(s) (1 for CP, N for NCP),
//   scatterer positions (3 per SP), nuisance phases (per stripe, component
//   order), amplitudes (per stripe, component order).
struct ParamLayout {
  int D = 3;
  int N = 0;
  int J = 0;
  int n_phase_offsets = 1;
  // Per stripe and component: global index of the nuisance phase, -1 if none.
  std::vector<std::vector<int>> nuisance_phase;
  std::vector<int> amplitude_offset;
  std::vector<int> components;
  int total = 0;

  int clock() const { return D; }
  int phase_offset(int n) const { return D + 1 + (n_phase_offsets == 1 ? 0 : n); }
  int sp(int j) const { return D + 1 + n_phase_offsets + 3 * j; }
  int wanted() const { return D + 1 + n_phase_offsets + 3 * J; }
};

ParamLayout make_layout(const Scenario& s, const FimOptions& opt);

MatX local_fim(const Stripe& st, const LocalChannelParams& lp, const Waveform& w, const DisturbanceCov& cov);

// Rows follow ParamLayout, columns the local order (theta, tau, phi, alpha).
MatX jacobian(const Scenario& s, int stripe_index, const FimOptions& opt, const ParamLayout& layout);

struct GlobalFim {
  MatX J;
  ParamLayout layout;
};

GlobalFim global_fim(const Scenario& s, const FimOptions& opt);

struct EfimResult {
  MatX efim;
  int nuisance_dim = 0;
  int nuisance_rank = 0;
  bool pseudo_inverse = false;
};

// Schur complement onto the first n_wanted parameters.
EfimResult efim(const MatX& J, int n_wanted);

struct BoundsReport {
  double peb = 0;   // m
  double ceb = 0;   // s
  double cpeb = 0;  // rad
  std::vector<double> sp_peb;  // m
  double condition = 0;
  bool singular = false;
  VecX null_direction;

  double ceb_m() const { return ceb * kSpeedOfLight; }
};

// Throws SingularFim when the EFIM cannot be inverted.
BoundsReport bounds(const MatX& efim, const ParamLayout& layout);
// Never throws SingularFim; singular cases come back as infinite bounds.
BoundsReport evaluate_bounds(const Scenario& s, const FimOptions& opt);

struct Thresholds {
  double b_low = 0;
  double b_high = 0;
  double delta_tau = 0;
  double mean_los_delay = 0;
};

Thresholds bw_thresholds(const Scenario& s);

struct HeatmapGrid {
  double x0 = 0, x1 = 0;
  int nx = 1;
  double y0 = 0, y1 = 0;
  int ny = 1;
  double z = 1;
  double x(int i) const { return nx == 1 ? x0 : x0 + (x1 - x0) * i / (nx - 1); }
  double y(int j) const { return ny == 1 ? y0 : y0 + (y1 - y0) * j / (ny - 1); }
};

// Row j, column i holds the PEB with the UE at (x(i), y(j), z). Degenerate
// cells are NaN, singular ones +inf.
MatX peb_heatmap(const Scenario& s, const HeatmapGrid& grid, const FimOptions& opt, int threads = 1);

}  // namespace rstripe
