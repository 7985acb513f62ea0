#pragma once

#include <vector>

#include "rstripe/scenario.hpp"

namespace rstripe {

enum class PathKind { LoS, RP, SP };

struct PathGeometry {
  PathKind kind = PathKind::LoS;
  int index = -1;  // wall index for RP, scatterer index for SP
  Vec3 via = Vec3::Zero();
  double aoa = 0.0;
  double delay = 0.0;
  double pseudo_delay = 0.0;
};

Mat3 rot_z(double beta);
Mat3 d_rot_z_at_zero();

Vec3 mirror_ue(const Vec3& p, const Wall& wall);
Vec3 reflection_point(const Vec3& p_rs, const Vec3& p, const Wall& wall);

// Position of `target` in the stripe frame (element axis +x, boresight +y).
Vec3 to_stripe_frame(const Vec3& target, const Stripe& stripe);
double aoa(const Vec3& target, const Stripe& stripe);
// Gradient of aoa with respect to the target position, global frame.
Vec3 aoa_gradient(const Vec3& target, const Stripe& stripe);

double path_delay(const Vec3& p, const Vec3& via, const Vec3& p_rs);

// LoS, then one RP per wall (wall order, mounted wall skipped), then SPs.
std::vector<PathGeometry> enumerate_paths(const Scenario& s, int stripe_index);

// Same enumeration for an arbitrary UE/SP hypothesis; the estimators use it.
std::vector<PathGeometry> enumerate_paths(const Scenario& s, int stripe_index, const Vec3& ue,
                                          const std::vector<Vec3>& sps, double delta_tau);

}  // namespace rstripe
