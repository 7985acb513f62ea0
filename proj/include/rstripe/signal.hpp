#pragma once

#include <cstdint>
#include <vector>

#include "rstripe/channel.hpp"

namespace rstripe {

CVec steering_spatial(double theta, int M, double d, double lambda);
CVec steering_frequency(double tau, int K, double delta_f);
// Derivatives with respect to theta and tau.
CVec d_steering_spatial(double theta, int M, double d, double lambda);
CVec d_steering_frequency(double tau, int K, double delta_f);

// c = (b(tau) .* s) kron a(theta), antenna index fastest.
CVec response(double theta, double tau, const Waveform& w, const Stripe& st);
CVec whitened_response(double theta, double tau, const Waveform& w, const Stripe& st, const DisturbanceCov& cov);

struct Observation {
  int stripe = 0;
  CMat Y;  // M x K
};

struct SynthOptions {
  std::uint64_t trial = 0;
  double noise_scale = 1.0;  // 0 gives the noise-free model
};

// Deterministic per-(seed, stripe, trial) normal stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stripe, std::uint64_t trial);

CMat noise_free_observation(const Scenario& s, int stripe_index);
std::vector<Observation> synthesize(const Scenario& s, std::uint64_t rng_seed, const SynthOptions& opt = {});
// One disturbance draw W_n for a stripe, M x K.
CMat draw_disturbance(const DisturbanceCov& cov, std::uint64_t seed);

double sdnr_linear(const Scenario& s);
double sdnr(const Scenario& s);  // dB
double pt_for_sdnr(double target_sdnr_db, const Scenario& s);

}  // namespace rstripe
