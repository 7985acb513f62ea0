#pragma once

#include <vector>

#include "rstripe/geometry.hpp"

namespace rstripe {

struct FresnelPair {
  cd par;
  cd perp;
};

FresnelPair fresnel_coefficients(double angle_incidence, const Material& m, double fc);
cd wall_impedance(const Material& m, double fc);
double free_space_impedance();

// Polarization-projected reflection coefficient of a wall for a stripe.
cd polarized_reflection(const Scenario& s, int stripe_index, const PathGeometry& path);

// Amplitudes scale with sqrt(s.tx_power).
double rp_amplitude(const Scenario& s, int stripe_index, const PathGeometry& path);
double sp_amplitude(const Scenario& s, int stripe_index, const PathGeometry& path);
bool optical_region(const Scatterer& sc, double wavelength);

double path_phase(double tau, double fc, double delta_phi_n, double varphi);

CMat dmc_frequency_covariance(const DmcParams& dmc, int K, double delta_f);

// R = (R_f .* s s^H) kron I_M + (sigma2/K) I_MK, kept in factored form.
class DisturbanceCov {
 public:
  DisturbanceCov(const DmcParams& dmc, double sigma2, const CVec& pilots, int M);

  int M() const { return m_; }
  int K() const { return static_cast<int>(rk_.rows()); }
  const CMat& R_f() const { return rf_; }
  // K x K factor R_K with R = R_K kron I_M.
  const CMat& R_K() const { return rk_; }
  // Hermitian R_K^{-1/2}; the whitener is this lifted through the Kronecker identity.
  const CMat& whitener_K() const { return wk_; }
  const CMat& cholesky_K() const { return lk_; }

  CMat dense() const;
  CMat dense_whitener() const;

  // x is an MK vector with the antenna index fastest.
  CVec whiten(const CVec& x) const;
  // Whitening of a column-stacked M x K observation matrix, returned in the same shape.
  CMat whiten_matrix(const CMat& Y) const;
  // Maps i.i.d. CN(0, 1) entries of an M x K matrix onto the disturbance distribution.
  CMat color_matrix(const CMat& Z) const;

 private:
  int m_;
  CMat rf_, rk_, wk_, lk_;
};

DisturbanceCov disturbance_covariance(const DmcParams& dmc, double sigma2, const CVec& pilots, int K, int M);
DisturbanceCov disturbance_covariance(const Scenario& s, int stripe_index);

struct LocalChannelParams {
  VecX theta, tau, phi, alpha;
  int size() const { return static_cast<int>(theta.size()); }
};

struct StripeChannel {
  std::vector<PathGeometry> paths;
  LocalChannelParams params;
};

StripeChannel stripe_channel(const Scenario& s, int stripe_index);

}  // namespace rstripe
