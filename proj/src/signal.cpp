#include "rstripe/signal.hpp"

#include <cmath>
#include <random>

namespace rstripe {

CVec steering_spatial(double theta, int M, double d, double lambda) {
  CVec a(M);
  const double k = 2.0 * kPi * d * std::sin(theta) / lambda;
  for (int m = 0; m < M; ++m) a(m) = std::polar(1.0, k * m);
  return a;
}

CVec steering_frequency(double tau, int K, double delta_f) {
  CVec b(K);
  const double k = -2.0 * kPi * delta_f * tau;
  for (int i = 0; i < K; ++i) b(i) = std::polar(1.0, k * i);
  return b;
}

CVec d_steering_spatial(double theta, int M, double d, double lambda) {
  CVec a = steering_spatial(theta, M, d, lambda);
  const cd g = kJ * 2.0 * kPi * d * std::cos(theta) / lambda;
  for (int m = 0; m < M; ++m) a(m) *= g * static_cast<double>(m);
  return a;
}

CVec d_steering_frequency(double tau, int K, double delta_f) {
  CVec b = steering_frequency(tau, K, delta_f);
  const cd g = -kJ * 2.0 * kPi * delta_f;
  for (int k = 0; k < K; ++k) b(k) *= g * static_cast<double>(k);
  return b;
}

namespace {

CVec kron(const CVec& outer, const CVec& inner) {
  CVec out(outer.size() * inner.size());
  for (Eigen::Index k = 0; k < outer.size(); ++k) out.segment(k * inner.size(), inner.size()) = outer(k) * inner;
  return out;
}

}  // namespace

CVec response(double theta, double tau, const Waveform& w, const Stripe& st) {
  const CVec bs = steering_frequency(tau, w.K, w.delta_f).cwiseProduct(w.pilots);
  return kron(bs, steering_spatial(theta, st.num_antennas, st.spacing, w.wavelength()));
}

CVec whitened_response(double theta, double tau, const Waveform& w, const Stripe& st, const DisturbanceCov& cov) {
  const CVec bs = cov.whitener_K() * steering_frequency(tau, w.K, w.delta_f).cwiseProduct(w.pilots);
  return kron(bs, steering_spatial(theta, st.num_antennas, st.spacing, w.wavelength()));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stripe, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stripe), static_cast<std::uint32_t>(stripe >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

CMat noise_free_observation(const Scenario& s, int n) {
  const StripeChannel ch = stripe_channel(s, n);
  const Stripe& st = s.stripes[n];
  const Waveform& w = s.waveform;
  CMat Y = CMat::Zero(st.num_antennas, w.K);
  for (int k = 0; k < ch.params.size(); ++k) {
    const cd gain = std::polar(ch.params.alpha(k), ch.params.phi(k));
    const CVec a = steering_spatial(ch.params.theta(k), st.num_antennas, st.spacing, w.wavelength());
    const CVec bs = steering_frequency(ch.params.tau(k), w.K, w.delta_f).cwiseProduct(w.pilots);
    Y.noalias() += gain * a * bs.transpose();
  }
  return Y;
}

CMat draw_disturbance(const DisturbanceCov& cov, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  CMat Z(cov.M(), cov.K());
  for (Eigen::Index k = 0; k < Z.cols(); ++k)
    for (Eigen::Index m = 0; m < Z.rows(); ++m) {
      const double re = nd(rng);
      const double im = nd(rng);
      Z(m, k) = cd(re, im);
    }
  return cov.color_matrix(Z);
}

std::vector<Observation> synthesize(const Scenario& s, std::uint64_t rng_seed, const SynthOptions& opt) {
  std::vector<Observation> out;
  for (int n = 0; n < s.num_stripes(); ++n) {
    Observation o;
    o.stripe = n;
    o.Y = noise_free_observation(s, n);
    if (opt.noise_scale != 0.0) {
      const DisturbanceCov cov = disturbance_covariance(s, n);
      o.Y += opt.noise_scale * draw_disturbance(cov, derive_seed(rng_seed, n, opt.trial));
    }
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

// sum_n rho_LoS^2 ||c'||^2 with rho evaluated at unit transmit power.
double los_energy(const Scenario& s) {
  Scenario unit = s;
  unit.tx_power = 1.0;
  double acc = 0.0;
  for (int n = 0; n < s.num_stripes(); ++n) {
    const auto paths = enumerate_paths(unit, n);
    const double rho = rp_amplitude(unit, n, paths.front());
    const DisturbanceCov cov = disturbance_covariance(unit, n);
    const CVec c = whitened_response(paths.front().aoa, paths.front().pseudo_delay, unit.waveform, unit.stripes[n], cov);
    acc += rho * rho * c.squaredNorm();
  }
  return acc;
}

}  // namespace

double sdnr_linear(const Scenario& s) {
  return s.tx_power / (s.num_stripes() * s.waveform.K) * los_energy(s);
}

double sdnr(const Scenario& s) { return 10.0 * std::log10(sdnr_linear(s)); }

double pt_for_sdnr(double target_sdnr_db, const Scenario& s) {
  const double e = los_energy(s);
  if (e <= 0.0) throw DegenerateGeometry("pt_for_sdnr: no LoS energy reaches the stripes");
  return std::pow(10.0, target_sdnr_db / 10.0) * s.num_stripes() * s.waveform.K / e;
}

}  // namespace rstripe
