#include "rstripe/geometry.hpp"

#include <cmath>

namespace rstripe {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

Mat3 rot_z(double beta) {
  const double c = std::cos(beta), s = std::sin(beta);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 d_rot_z_at_zero() {
  Mat3 m;
  m << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  return m;
}

Vec3 mirror_ue(const Vec3& p, const Wall& wall) {
  return p - 2.0 * wall.normal * (p - wall.point).dot(wall.normal);
}

Vec3 reflection_point(const Vec3& p_rs, const Vec3& p, const Wall& wall) {
  const Vec3& n = wall.normal;
  const double side_ue = (p - wall.point).dot(n);
  const double side_rs = (p_rs - wall.point).dot(n);
  if (side_ue * side_rs <= 0.0)
    throw DegenerateGeometry("reflection_point: UE and stripe are not strictly on the same side of the wall");
  const Vec3 pm = mirror_ue(p, wall);
  const double den = (pm - p_rs).dot(n);
  if (std::abs(den) < 1e-12) throw DegenerateGeometry("reflection_point: ray parallel to wall");
  return p_rs + ((wall.point - p_rs).dot(n) / den) * (pm - p_rs);
}

Vec3 to_stripe_frame(const Vec3& target, const Stripe& stripe) {
  return rot_z(stripe.azimuth).transpose() * (target - stripe.phase_center);
}

double aoa(const Vec3& target, const Stripe& stripe) {
  const Vec3 local = to_stripe_frame(target, stripe);
  if ((target - stripe.phase_center).norm() == 0.0)
    throw DegenerateGeometry("aoa: target coincides with the stripe phase center");
  return wrap_angle(kPi / 2.0 - std::atan2(local.y(), local.x()));
}

Vec3 aoa_gradient(const Vec3& target, const Stripe& stripe) {
  const Vec3 r = target - stripe.phase_center;
  const Vec3 mr = d_rot_z_at_zero() * r;
  const double rho2 = mr.squaredNorm();
  if (rho2 == 0.0) throw DegenerateGeometry("aoa_gradient: target on the stripe z-axis");
  return -mr / rho2;
}

double path_delay(const Vec3& p, const Vec3& via, const Vec3& p_rs) {
  return ((p - via).norm() + (via - p_rs).norm()) / kSpeedOfLight;
}

std::vector<PathGeometry> enumerate_paths(const Scenario& s, int stripe_index, const Vec3& ue,
                                          const std::vector<Vec3>& sps, double delta_tau) {
  const Stripe& st = s.stripes.at(stripe_index);
  std::vector<PathGeometry> out;
  out.reserve(1 + s.walls.size() + sps.size());

  auto push = [&](PathKind kind, int index, const Vec3& via, const Vec3& angle_target) {
    PathGeometry g;
    g.kind = kind;
    g.index = index;
    g.via = via;
    g.aoa = aoa(angle_target, st);
    g.delay = path_delay(ue, via, st.phase_center);
    g.pseudo_delay = g.delay + delta_tau;
    out.push_back(g);
  };

  if ((ue - st.phase_center).norm() == 0.0) throw DegenerateGeometry("UE coincides with a stripe phase center");
  push(PathKind::LoS, -1, ue, ue);
  for (int l = 0; l < static_cast<int>(s.walls.size()); ++l) {
    if (st.mounted_wall && *st.mounted_wall == l) continue;
    const Vec3 rp = reflection_point(st.phase_center, ue, s.walls[l]);
    push(PathKind::RP, l, rp, rp);
  }
  for (int i = 0; i < static_cast<int>(sps.size()); ++i) {
    if ((sps[i] - st.phase_center).norm() == 0.0 || (sps[i] - ue).norm() == 0.0)
      throw DegenerateGeometry("scatterer coincides with the UE or a stripe");
    push(PathKind::SP, i, sps[i], sps[i]);
  }
  return out;
}

std::vector<PathGeometry> enumerate_paths(const Scenario& s, int stripe_index) {
  std::vector<Vec3> sps;
  for (const auto& sc : s.scatterers) sps.push_back(sc.position);
  return enumerate_paths(s, stripe_index, s.ue, sps, s.delta_tau);
}

}  // namespace rstripe
