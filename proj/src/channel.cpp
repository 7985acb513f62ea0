#include "rstripe/channel.hpp"

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

namespace rstripe {

double free_space_impedance() { return std::sqrt(kMu0 / kEps0); }

cd wall_impedance(const Material& m, double fc) {
  const double w = 2.0 * kPi * fc;
  return std::sqrt(kJ * w * kMu0 * m.mu_r / (m.sigma + kJ * w * kEps0 * m.eps_r));
}

FresnelPair fresnel_coefficients(double angle_incidence, const Material& m, double fc) {
  const cd z1 = wall_impedance(m, fc);
  const double z0 = free_space_impedance();
  const double ci = std::cos(angle_incidence);
  const double ct = std::cos(std::asin(std::sin(angle_incidence) / std::sqrt(m.eps_r * m.mu_r)));
  return {(z1 * ct - z0 * ci) / (z1 * ct + z0 * ci), (z1 * ci - z0 * ct) / (z1 * ci + z0 * ct)};
}

cd polarized_reflection(const Scenario& s, int stripe_index, const PathGeometry& path) {
  const Wall& wall = s.walls.at(path.index);
  const Vec3& n = wall.normal;
  const Vec3& p_rs = s.stripes.at(stripe_index).phase_center;
  const Vec3 dir = (path.via - p_rs).normalized();
  const double cos_i = std::min(1.0, std::abs(dir.dot(n)));
  const FresnelPair g = fresnel_coefficients(std::acos(cos_i), s.materials.at(wall.material), s.waveform.fc);
  const Vec3 e_par = s.pol_stripe.dot(n) * n;
  const Vec3 e_perp = s.pol_stripe - e_par;
  return g.par * e_par.dot(s.pol_ue) + g.perp * e_perp.dot(s.pol_ue);
}

double rp_amplitude(const Scenario& s, int stripe_index, const PathGeometry& path) {
  const double lambda = s.waveform.wavelength();
  const double dist = path.delay * kSpeedOfLight;
  if (dist <= 0.0) throw DegenerateGeometry("rp_amplitude: zero path length");
  double gain;
  if (path.kind == PathKind::LoS) {
    gain = std::abs(s.pol_stripe.dot(s.pol_ue));
  } else if (path.kind == PathKind::RP) {
    gain = std::abs(polarized_reflection(s, stripe_index, path));
  } else {
    throw std::invalid_argument("rp_amplitude: scatter path");
  }
  return std::sqrt(s.tx_power) * lambda / (4.0 * kPi * dist) * gain;
}

double sp_amplitude(const Scenario& s, int stripe_index, const PathGeometry& path) {
  if (path.kind != PathKind::SP) throw std::invalid_argument("sp_amplitude: not a scatter path");
  const Scatterer& sc = s.scatterers.at(path.index);
  const double d_us = (s.ue - path.via).norm();
  const double d_s = (path.via - s.stripes.at(stripe_index).phase_center).norm();
  if (d_us <= 0.0 || d_s <= 0.0) throw DegenerateGeometry("sp_amplitude: zero distance");
  const double lambda = s.waveform.wavelength();
  const double rcs = kPi * sc.radius * sc.radius;
  return std::sqrt(s.tx_power) * lambda * std::sqrt(rcs) * std::abs(s.pol_stripe.dot(s.pol_ue)) /
         (std::pow(4.0 * kPi, 1.5) * d_us * d_s);
}

bool optical_region(const Scatterer& sc, double wavelength) {
  return 2.0 * kPi * sc.radius / wavelength > 10.0;
}

double path_phase(double tau, double fc, double delta_phi_n, double varphi) {
  return wrap_angle(-2.0 * kPi * fc * tau + varphi + delta_phi_n);
}

CMat dmc_frequency_covariance(const DmcParams& dmc, int K, double /*delta_f*/) {
  // Sampled on the band-normalized grid f_k = k / K.
  CVec kappa(K);
  for (int k = 0; k < K; ++k) {
    const double f = static_cast<double>(k) / K;
    kappa(k) = dmc.alpha1 * std::exp(-kJ * 2.0 * kPi * f * dmc.tau_d) / (dmc.beta_d + kJ * 2.0 * kPi * f);
  }
  CMat r(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) r(i, j) = i >= j ? kappa(i - j) : std::conj(kappa(j - i));
  return r;
}

DisturbanceCov::DisturbanceCov(const DmcParams& dmc, double sigma2, const CVec& pilots, int M) : m_(M) {
  const int K = static_cast<int>(pilots.size());
  rf_ = dmc_frequency_covariance(dmc, K, 1.0);
  rk_ = rf_.cwiseProduct(pilots * pilots.adjoint());
  rk_.diagonal().array() += sigma2 / K;

  Eigen::SelfAdjointEigenSolver<CMat> eig(rk_);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw NumericalFailure("disturbance covariance is not positive definite");
  wk_ = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
        eig.eigenvectors().adjoint();

  Eigen::LLT<CMat> llt(rk_);
  if (llt.info() != Eigen::Success) throw NumericalFailure("Cholesky factorization of the disturbance covariance failed");
  lk_ = llt.matrixL();
}

CMat DisturbanceCov::dense() const {
  return Eigen::kroneckerProduct(rk_, CMat::Identity(m_, m_));
}

CMat DisturbanceCov::dense_whitener() const {
  return Eigen::kroneckerProduct(wk_, CMat::Identity(m_, m_));
}

CVec DisturbanceCov::whiten(const CVec& x) const {
  const Eigen::Map<const CMat> X(x.data(), m_, K());
  CMat out = X * wk_.transpose();
  return Eigen::Map<CVec>(out.data(), out.size());
}

CMat DisturbanceCov::whiten_matrix(const CMat& Y) const { return Y * wk_.transpose(); }

CMat DisturbanceCov::color_matrix(const CMat& Z) const { return Z * lk_.transpose(); }

DisturbanceCov disturbance_covariance(const DmcParams& dmc, double sigma2, const CVec& pilots, int K, int M) {
  if (pilots.size() != K) throw std::invalid_argument("pilot count differs from K");
  return DisturbanceCov(dmc, sigma2, pilots, M);
}

DisturbanceCov disturbance_covariance(const Scenario& s, int stripe_index) {
  return DisturbanceCov(s.dmc(), s.waveform.noise_power(), s.waveform.pilots,
                        s.stripes.at(stripe_index).num_antennas);
}

StripeChannel stripe_channel(const Scenario& s, int n) {
  StripeChannel ch;
  ch.paths = enumerate_paths(s, n);
  const int nc = static_cast<int>(ch.paths.size());
  auto& lp = ch.params;
  lp.theta.resize(nc);
  lp.tau.resize(nc);
  lp.phi.resize(nc);
  lp.alpha.resize(nc);
  for (int k = 0; k < nc; ++k) {
    const PathGeometry& g = ch.paths[k];
    lp.theta(k) = g.aoa;
    lp.tau(k) = g.pseudo_delay;
    lp.phi(k) = path_phase(g.delay, s.waveform.fc, s.delta_phi_of(n), k == 0 ? 0.0 : s.nlos_phase_of(n, k));
    lp.alpha(k) = g.kind == PathKind::SP ? sp_amplitude(s, n, g) : rp_amplitude(s, n, g);
  }
  return ch;
}

}  // namespace rstripe
