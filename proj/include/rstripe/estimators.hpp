#pragma once

#include <string>
#include <vector>

#include "rstripe/signal.hpp"

namespace rstripe {

// Everything the estimators may know: room, stripes, waveform, disturbance
// statistics, the UE height when D = 2, the scatterer count, and the data.
// The UE/SP positions and offsets of the generating scenario are discarded.
class EstimatorContext {
 public:
  EstimatorContext(const Scenario& s, const std::vector<Observation>& obs);

  const Scenario& scene() const { return scene_; }
  int N() const { return scene_.num_stripes(); }
  int dims() const { return scene_.dims; }
  double known_height() const { return z_known_; }
  int num_scatterers() const { return num_sp_; }
  const DisturbanceCov& cov(int n) const { return covs_[n]; }
  const CVec& y(int n) const { return y_[n]; }
  const CMat& raw(int n) const { return raw_[n]; }
  const SearchConfig& search() const { return scene_.search; }

  // Whitened responses of all components at a hypothesis, MK x Nc, in
  // enumeration order. los_delay receives the geometric LoS delay.
  CMat columns(int n, const Vec3& p, double delta_tau, const std::vector<Vec3>& sps, double* los_delay = nullptr) const;
  int num_smc(int n) const { return scene_.num_smc(n); }
  // Maps a D-dimensional position parameter to 3-D.
  Vec3 lift(const VecX& x) const;

 private:
  Scenario scene_;
  double z_known_;
  int num_sp_;
  std::vector<DisturbanceCov> covs_;
  std::vector<CVec> y_;
  std::vector<CMat> raw_;
};

struct WantedParams {
  Vec3 p = Vec3::Zero();
  double delta_tau = 0;
  double delta_phi = 0;
  std::vector<Vec3> sp;
};

struct JmlFit {
  std::vector<VecX> x;       // stacked-real amplitude vectors
  std::vector<CVec> gains;   // complex gains in component order
  double cost = 0;
};

JmlFit jml_amplitudes(const EstimatorContext& ctx, const WantedParams& w);
double jml_cost(const EstimatorContext& ctx, const WantedParams& w);

struct NcpFit {
  std::vector<CVec> gains;  // LoS and RP gains per stripe
  double cost = 0;
};

NcpFit rml_ncp_amplitudes_and_cost(const EstimatorContext& ctx, const Vec3& p, double delta_tau);
double estimate_phase_offset(const EstimatorContext& ctx, const Vec3& p, double delta_tau);

struct RmlEval {
  double cost = 0;
  double ncp_cost = 0;
  double delta_phi = 0;
};

// Coherent relaxed cost with the phase offset re-estimated at (p, delta_tau).
RmlEval rml_cost(const EstimatorContext& ctx, const Vec3& p, double delta_tau);

// Per-stripe coarse pseudo-delay of the strongest IFFT bin.
std::vector<double> coarse_pseudo_delays(const EstimatorContext& ctx, int nfft);
double coarse_clock_offset(const EstimatorContext& ctx, const Vec3& p, int nfft);

enum class Stage { RmlNcp, Rml, Nst, Jml };
std::string stage_name(Stage s);

struct EstimateReport {
  Stage stage = Stage::Rml;
  Vec3 p_hat = Vec3::Zero();
  double delta_tau_hat = 0;
  double delta_phi_hat = 0;
  std::vector<Vec3> sp_hats;
  std::vector<CVec> amplitudes;
  std::vector<double> cost_trace;
  double cost = 0;
  int iterations = 0;
  bool converged = true;
  std::string note;
};

// Returns the RML-NCP report (first) and the RML report (second).
std::pair<EstimateReport, EstimateReport> rml_position_search(const EstimatorContext& ctx, int threads = 1);

// Orthonormal basis of the orthogonal complement of the LoS/RP responses.
CMat null_space_basis(const EstimatorContext& ctx, int n, const Vec3& p, double delta_tau);

struct NstGrid {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  double step = 0.1;
};

NstGrid default_nst_grid(const EstimatorContext& ctx);

class NstScan {
 public:
  NstScan(const EstimatorContext& ctx, const Vec3& p, double delta_tau);
  double residual(const Vec3& q) const;

 private:
  const EstimatorContext* ctx_;
  Vec3 p_;
  double dtau_;
  std::vector<CMat> q1_;
  std::vector<CVec> u_;
  double base_ = 0;
};

std::vector<Vec3> nst_map_scatterers(const EstimatorContext& ctx, const Vec3& p_hat, double delta_tau_hat,
                                     double delta_phi_hat, int J, const NstGrid& grid, int threads = 1);

EstimateReport jml_refine(const EstimatorContext& ctx, const EstimateReport& initial);

std::vector<EstimateReport> run_pipeline(const EstimatorContext& ctx, int threads = 1);

}  // namespace rstripe
