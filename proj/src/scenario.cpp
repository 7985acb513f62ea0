#include "rstripe/scenario.hpp"

#include <cmath>

#include "rstripe/signal.hpp"

namespace rstripe {

CVec constant_pilots(int K) { return CVec::Constant(K, cd(1.0 / std::sqrt(static_cast<double>(K)), 0.0)); }

int Scenario::num_smc(int n) const {
  const auto& st = stripes.at(n);
  int walls_used = static_cast<int>(walls.size());
  if (st.mounted_wall && *st.mounted_wall >= 0 && *st.mounted_wall < walls_used) --walls_used;
  return 1 + walls_used;
}

double Scenario::delta_phi_of(int n) const {
  if (delta_phi.empty()) return 0.0;
  if (delta_phi.size() == 1) return delta_phi[0];
  return delta_phi.at(n);
}

double Scenario::nlos_phase_of(int n, int component) const {
  if (n >= static_cast<int>(nlos_phase.size())) return 0.0;
  const auto& v = nlos_phase[n];
  const int idx = component - 1;
  return idx >= 0 && idx < static_cast<int>(v.size()) ? v[idx] : 0.0;
}

DmcParams Scenario::dmc() const {
  return {std::pow(10.0, dnr_db / 10.0) * waveform.noise_power(), beta_d, tau_d};
}

void validate(const Scenario& s) {
  const Waveform& w = s.waveform;
  if (!(w.fc > 0)) throw SemanticError("waveform.fc_hz must be positive");
  if (w.K < 1) throw SemanticError("waveform.num_subcarriers must be at least 1");
  if (!(w.delta_f > 0)) throw SemanticError("waveform bandwidth must be positive");
  if (w.pilots.size() != w.K) throw SemanticError("pilot count differs from num_subcarriers");
  if (std::abs(w.pilots.norm() - 1.0) > 1e-9) throw SemanticError("pilots must have unit norm");
  if (!(w.temperature > 0)) throw SemanticError("waveform.temperature_k must be positive");
  if (s.stripes.empty()) throw SemanticError("at least one stripe is required");
  for (std::size_t i = 0; i < s.stripes.size(); ++i) {
    const auto& st = s.stripes[i];
    const std::string where = "stripes[" + std::to_string(i) + "]";
    if (st.num_antennas < 1) throw SemanticError(where + ": num_antennas must be at least 1");
    if (!(st.spacing > 0)) throw SemanticError(where + ": spacing must be positive");
    if (st.mounted_wall && (*st.mounted_wall < 0 || *st.mounted_wall >= static_cast<int>(s.walls.size())))
      throw SemanticError(where + ": mounted_wall out of range");
  }
  for (std::size_t i = 0; i < s.walls.size(); ++i) {
    const auto& wl = s.walls[i];
    const std::string where = "walls[" + std::to_string(i) + "]";
    if (std::abs(wl.normal.norm() - 1.0) > 1e-12) throw SemanticError(where + ": normal must be a unit vector");
    if (wl.material < 0 || wl.material >= static_cast<int>(s.materials.size()))
      throw SemanticError(where + ": unknown material");
    if ((s.ue - wl.point).dot(wl.normal) <= 0.0) throw SemanticError(where + ": UE is not inside the room");
    for (std::size_t n = 0; n < s.stripes.size(); ++n) {
      const auto& st = s.stripes[n];
      if (st.mounted_wall && *st.mounted_wall == static_cast<int>(i)) {
        if (std::abs((st.phase_center - wl.point).dot(wl.normal)) > 1e-9)
          throw SemanticError("stripes[" + std::to_string(n) + "]: phase center is not on its mounted wall");
      } else if ((st.phase_center - wl.point).dot(wl.normal) <= 0.0) {
        throw SemanticError("stripes[" + std::to_string(n) + "]: not inside the room relative to " + where);
      }
    }
  }
  for (const auto& m : s.materials) {
    if (m.eps_r < 1.0 || !(m.mu_r > 0) || m.sigma < 0.0)
      throw SemanticError("material " + m.name + ": requires eps_r >= 1, mu_r > 0, sigma >= 0");
  }
  for (std::size_t i = 0; i < s.scatterers.size(); ++i)
    if (!(s.scatterers[i].radius > 0)) throw SemanticError("scatterers[" + std::to_string(i) + "]: radius must be positive");
  if (std::abs(s.pol_stripe.norm() - 1.0) > 1e-9 || std::abs(s.pol_ue.norm() - 1.0) > 1e-9)
    throw SemanticError("polarization vectors must have unit norm");
  if (s.dims != 2 && s.dims != 3) throw SemanticError("processing.position_dims must be 2 or 3");
  if (!(s.beta_d > 0)) throw SemanticError("dmc.beta_d must be positive");
  if (s.delta_phi.size() != 1 && s.delta_phi.size() != s.stripes.size())
    throw SemanticError("ue.phase_offset must have one entry or one per stripe");
  if (s.sync == SyncMode::CP && s.delta_phi.size() != 1)
    throw SemanticError("coherent processing requires a single shared phase offset");
}

Scenario with_sdnr(Scenario s, double sdnr_db) {
  s.sdnr_db = sdnr_db;
  s.tx_power = pt_for_sdnr(sdnr_db, s);
  return s;
}

Scenario with_bandwidth(Scenario s, double bandwidth_hz) {
  s.waveform.delta_f = bandwidth_hz / s.waveform.K;
  const double db = s.sdnr_db;
  return with_sdnr(std::move(s), db);
}

Scenario with_antennas(Scenario s, int M) {
  for (auto& st : s.stripes) st.num_antennas = M;
  const double db = s.sdnr_db;
  return with_sdnr(std::move(s), db);
}

Scenario with_ue(Scenario s, const Vec3& p) {
  s.ue = p;
  const double db = s.sdnr_db;
  return with_sdnr(std::move(s), db);
}

}  // namespace rstripe
