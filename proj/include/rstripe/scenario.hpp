#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rstripe/types.hpp"

namespace rstripe {

struct Material {
  std::string name;
  double eps_r = 1.0;
  double mu_r = 1.0;
  double sigma = 0.0;  // S/m
};

struct Wall {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  int material = 0;
};

struct Stripe {
  Vec3 phase_center = Vec3::Zero();
  double azimuth = 0.0;
  int num_antennas = 1;
  double spacing = 0.0;
  std::optional<int> mounted_wall;
};

struct Scatterer {
  Vec3 position = Vec3::Zero();
  double radius = 0.0;
};

struct DmcParams {
  double alpha1 = 0.0;
  double beta_d = 1.0;
  double tau_d = 0.0;
};

struct Waveform {
  double fc = 3.5e9;
  int K = 1;
  double delta_f = 1.0;
  CVec pilots;
  double temperature = 290.0;

  double bandwidth() const { return K * delta_f; }
  double wavelength() const { return kSpeedOfLight / fc; }
  double noise_power() const { return kBoltzmann * temperature * bandwidth(); }
};

CVec constant_pilots(int K);

enum class SyncMode { CP, NCP };

// Search settings consumed by the estimator pipeline. None of these fields
// carry ground truth.
struct SearchConfig {
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Zero();
  double grid_step = 0.0;        // 0 selects lambda/4
  double sp_grid_step = 0.1;
  int ifft_factor = 16;
  int max_refine_iterations = 4000;
};

struct Scenario {
  std::string name;
  Waveform waveform;
  std::vector<Stripe> stripes;
  std::vector<Wall> walls;
  std::vector<Material> materials;
  std::vector<Scatterer> scatterers;

  Vec3 ue = Vec3::Zero();
  double delta_tau = 0.0;
  // One entry shared by every stripe, or one entry per stripe.
  std::vector<double> delta_phi{0.0};
  // Per stripe, the reflection-induced phase of every non-LoS component
  // (RPs then SPs). Missing entries read as zero.
  std::vector<std::vector<double>> nlos_phase;

  double dnr_db = 0.0;
  double sdnr_db = 0.0;
  double beta_d = 1.0;
  double tau_d = 0.0;
  double tx_power = 1.0;  // W, normally set from sdnr_db

  Vec3 pol_stripe = Vec3::UnitZ();
  Vec3 pol_ue = Vec3::UnitZ();

  SyncMode sync = SyncMode::CP;
  int dims = 3;

  SearchConfig search;

  int num_stripes() const { return static_cast<int>(stripes.size()); }
  int num_scatterers() const { return static_cast<int>(scatterers.size()); }
  // LoS plus one reflection per wall other than the mounted one.
  int num_smc(int n) const;
  int num_components(int n) const { return num_smc(n) + num_scatterers(); }
  double delta_phi_of(int n) const;
  double nlos_phase_of(int n, int component) const;
  DmcParams dmc() const;
};

// Throws SemanticError on violated invariants.
void validate(const Scenario& s);

// Returns a copy with tx_power chosen so that sdnr(copy) equals sdnr_db.
Scenario with_sdnr(Scenario s, double sdnr_db);
// Keeps K and the SDNR, changes the subcarrier spacing.
Scenario with_bandwidth(Scenario s, double bandwidth_hz);
Scenario with_antennas(Scenario s, int M);
Scenario with_ue(Scenario s, const Vec3& p);

}  // namespace rstripe
