#include "rstripe/fim.hpp"

#include <cmath>
#include <limits>

#include "rstripe/parallel.hpp"
#include "rstripe/signal.hpp"

namespace rstripe {

FimOptions fim_options(const Scenario& s) { return {s.sync, s.dims, false}; }

ParamLayout make_layout(const Scenario& s, const FimOptions& opt) {
  ParamLayout L;
  L.D = opt.dims;
  L.N = s.num_stripes();
  L.J = s.num_scatterers();
  L.n_phase_offsets = opt.sync == SyncMode::CP ? 1 : L.N;
  int next = L.wanted();
  L.nuisance_phase.resize(L.N);
  L.components.resize(L.N);
  for (int n = 0; n < L.N; ++n) {
    const int nc = s.num_components(n);
    const int l = s.num_smc(n);
    L.components[n] = nc;
    L.nuisance_phase[n].assign(nc, -1);
    for (int k = 1; k < nc; ++k) {
      if (opt.known_rp_phases && k < l) continue;
      L.nuisance_phase[n][k] = next++;
    }
  }
  L.amplitude_offset.resize(L.N);
  for (int n = 0; n < L.N; ++n) {
    L.amplitude_offset[n] = next;
    next += L.components[n];
  }
  L.total = next;
  return L;
}

namespace {

CVec kron(const CVec& outer, const CVec& inner) {
  CVec out(outer.size() * inner.size());
  for (Eigen::Index k = 0; k < outer.size(); ++k) out.segment(k * inner.size(), inner.size()) = outer(k) * inner;
  return out;
}

}  // namespace

MatX local_fim(const Stripe& st, const LocalChannelParams& lp, const Waveform& w, const DisturbanceCov& cov) {
  const int nc = lp.size();
  const int M = st.num_antennas;
  const double lambda = w.wavelength();
  CMat D(static_cast<Eigen::Index>(M) * w.K, 4 * nc);
  for (int k = 0; k < nc; ++k) {
    const cd rot = std::polar(1.0, lp.phi(k));
    const cd gamma = lp.alpha(k) * rot;
    const CVec a = steering_spatial(lp.theta(k), M, st.spacing, lambda);
    const CVec da = d_steering_spatial(lp.theta(k), M, st.spacing, lambda);
    const CVec bs = cov.whitener_K() * steering_frequency(lp.tau(k), w.K, w.delta_f).cwiseProduct(w.pilots);
    const CVec dbs = cov.whitener_K() * d_steering_frequency(lp.tau(k), w.K, w.delta_f).cwiseProduct(w.pilots);
    const CVec c = kron(bs, a);
    D.col(k) = gamma * kron(bs, da);
    D.col(nc + k) = gamma * kron(dbs, a);
    D.col(2 * nc + k) = kJ * gamma * c;
    D.col(3 * nc + k) = rot * c;
  }
  MatX J = 2.0 * (D.adjoint() * D).real();
  return 0.5 * (J + J.transpose());
}

MatX jacobian(const Scenario& s, int n, const FimOptions& opt, const ParamLayout& layout) {
  const Stripe& st = s.stripes.at(n);
  const auto paths = enumerate_paths(s, n);
  const int nc = static_cast<int>(paths.size());
  const int D = opt.dims;
  const double k_phase = -2.0 * kPi * s.waveform.fc;
  MatX T = MatX::Zero(layout.total, 4 * nc);

  auto unit = [](const Vec3& v) {
    const double r = v.norm();
    if (r == 0.0) throw DegenerateGeometry("jacobian: zero-length range");
    return Vec3(v / r);
  };

  for (int k = 0; k < nc; ++k) {
    const PathGeometry& g = paths[k];
    Vec3 dtheta_dp = Vec3::Zero(), dtau_dp = Vec3::Zero();
    switch (g.kind) {
      case PathKind::LoS:
        dtheta_dp = aoa_gradient(s.ue, st);
        dtau_dp = unit(s.ue - st.phase_center) / kSpeedOfLight;
        break;
      case PathKind::RP: {
        const Wall& w = s.walls[g.index];
        const Mat3 H = Mat3::Identity() - 2.0 * w.normal * w.normal.transpose();
        const Vec3 pm = mirror_ue(s.ue, w);
        dtheta_dp = H * aoa_gradient(pm, st);
        dtau_dp = H * unit(pm - st.phase_center) / kSpeedOfLight;
        break;
      }
      case PathKind::SP: {
        dtau_dp = unit(s.ue - g.via) / kSpeedOfLight;
        const int row = layout.sp(g.index);
        const Vec3 dtau_dsp = (unit(g.via - s.ue) + unit(g.via - st.phase_center)) / kSpeedOfLight;
        const Vec3 dtheta_dsp = aoa_gradient(g.via, st);
        for (int i = 0; i < 3; ++i) {
          T(row + i, k) = dtheta_dsp(i);
          T(row + i, nc + k) = dtau_dsp(i);
          T(row + i, 2 * nc + k) = k_phase * dtau_dsp(i);
        }
        break;
      }
    }
    for (int i = 0; i < D; ++i) {
      T(i, k) = dtheta_dp(i);
      T(i, nc + k) = dtau_dp(i);
      T(i, 2 * nc + k) = k_phase * dtau_dp(i);
    }
    T(layout.clock(), nc + k) = 1.0;
    T(layout.phase_offset(n), 2 * nc + k) = 1.0;
    if (const int row = layout.nuisance_phase[n][k]; row >= 0) T(row, 2 * nc + k) = 1.0;
    T(layout.amplitude_offset[n] + k, 3 * nc + k) = 1.0;
  }
  return T;
}

GlobalFim global_fim(const Scenario& s, const FimOptions& opt) {
  GlobalFim g;
  g.layout = make_layout(s, opt);
  g.J = MatX::Zero(g.layout.total, g.layout.total);
  for (int n = 0; n < s.num_stripes(); ++n) {
    const StripeChannel ch = stripe_channel(s, n);
    const DisturbanceCov cov = disturbance_covariance(s, n);
    const MatX Jn = local_fim(s.stripes[n], ch.params, s.waveform, cov);
    const MatX T = jacobian(s, n, opt, g.layout);
    g.J.noalias() += T * Jn * T.transpose();
  }
  g.J = 0.5 * (g.J + g.J.transpose()).eval();
  return g;
}

namespace {

VecX equilibration(const MatX& J) {
  VecX s(J.rows());
  for (Eigen::Index i = 0; i < J.rows(); ++i) s(i) = J(i, i) > 0.0 ? 1.0 / std::sqrt(J(i, i)) : 1.0;
  return s;
}

constexpr double kRankTol = 1e-12;

}  // namespace

EfimResult efim(const MatX& J, int n_wanted) {
  EfimResult r;
  const int nu = static_cast<int>(J.rows()) - n_wanted;
  r.nuisance_dim = nu;
  const VecX sc = equilibration(J);
  const MatX Js = sc.asDiagonal() * J * sc.asDiagonal();
  const MatX Jww = Js.topLeftCorner(n_wanted, n_wanted);
  if (nu == 0) {
    r.efim = J;
    return r;
  }
  const MatX Jwu = Js.topRightCorner(n_wanted, nu);
  const MatX Juu = Js.bottomRightCorner(nu, nu);

  Eigen::SelfAdjointEigenSolver<MatX> eig(Juu);
  const VecX ev = eig.eigenvalues();
  const double cutoff = kRankTol * std::max(ev.maxCoeff(), 0.0);
  r.nuisance_rank = static_cast<int>((ev.array() > cutoff).count());

  MatX schur;
  if (r.nuisance_rank == nu) {
    Eigen::LDLT<MatX> ldlt(Juu);
    schur = Jww - Jwu * ldlt.solve(Jwu.transpose());
  } else {
    r.pseudo_inverse = true;
    VecX inv = VecX::Zero(nu);
    for (int i = 0; i < nu; ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
    const MatX pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    schur = Jww - Jwu * pinv * Jwu.transpose();
  }
  const VecX sw = sc.head(n_wanted).cwiseInverse();
  r.efim = sw.asDiagonal() * schur * sw.asDiagonal();
  r.efim = 0.5 * (r.efim + r.efim.transpose()).eval();
  return r;
}

BoundsReport bounds(const MatX& E, const ParamLayout& layout) {
  BoundsReport b;
  const VecX sc = equilibration(E);
  const MatX Es = sc.asDiagonal() * E * sc.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatX> eig(Es);
  const VecX ev = eig.eigenvalues();
  const double emax = ev.maxCoeff();
  b.condition = ev.minCoeff() > 0.0 ? emax / ev.minCoeff() : std::numeric_limits<double>::infinity();
  if (!(emax > 0.0) || ev.minCoeff() <= kRankTol * emax) {
    VecX dir = sc.asDiagonal() * eig.eigenvectors().col(0);
    dir.normalize();
    throw SingularFim("EFIM is singular", dir);
  }
  const MatX crb = sc.asDiagonal() * (eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose()) *
                   sc.asDiagonal();
  auto trace_sqrt = [&](int start, int len) { return std::sqrt(std::max(0.0, crb.diagonal().segment(start, len).sum())); };
  b.peb = trace_sqrt(0, layout.D);
  b.ceb = trace_sqrt(layout.clock(), 1);
  b.cpeb = trace_sqrt(layout.phase_offset(0), layout.n_phase_offsets);
  for (int j = 0; j < layout.J; ++j) b.sp_peb.push_back(trace_sqrt(layout.sp(j), 3));
  return b;
}

BoundsReport evaluate_bounds(const Scenario& s, const FimOptions& opt) {
  const GlobalFim g = global_fim(s, opt);
  const EfimResult e = efim(g.J, g.layout.wanted());
  try {
    return bounds(e.efim, g.layout);
  } catch (const SingularFim& err) {
    BoundsReport b;
    const double inf = std::numeric_limits<double>::infinity();
    b.peb = b.ceb = b.cpeb = inf;
    b.sp_peb.assign(g.layout.J, inf);
    b.condition = inf;
    b.singular = true;
    b.null_direction = err.null_direction;
    return b;
  }
}

Thresholds bw_thresholds(const Scenario& s) {
  double los = 0.0, rp = 0.0;
  int n_rp = 0;
  for (int n = 0; n < s.num_stripes(); ++n) {
    for (const auto& g : enumerate_paths(s, n)) {
      if (g.kind == PathKind::LoS) los += g.delay;
      if (g.kind == PathKind::RP) {
        rp += g.delay;
        ++n_rp;
      }
    }
  }
  if (n_rp == 0) throw DegenerateGeometry("bw_thresholds: no reflection paths");
  Thresholds t;
  t.mean_los_delay = los / s.num_stripes();
  t.delta_tau = rp / n_rp - t.mean_los_delay;
  if (t.delta_tau <= 0.0) throw DegenerateGeometry("bw_thresholds: non-positive delay gap");

  const double K = s.waveform.K;
  const double F = 1.0 / std::sqrt(2.0);
  t.b_low = K * std::acos(2.0 * F - 1.0) / (2.0 * kPi * t.delta_tau * (K - 1.0));

  const double M = s.stripes.front().num_antennas;
  const double d = s.stripes.front().spacing;
  const double sm = M * (M * M - 1.0) / 12.0;
  const double sk = (2.0 * K * K * K - 3.0 * K * K + K) / 6.0;
  t.b_high = K * d / (t.mean_los_delay * s.waveform.wavelength()) * std::sqrt(sm / sk);
  return t;
}

MatX peb_heatmap(const Scenario& s, const HeatmapGrid& grid, const FimOptions& opt, int threads) {
  MatX out(grid.ny, grid.nx);
  parallel_for(grid.nx * grid.ny, threads, [&](int idx) {
    const int i = idx % grid.nx, j = idx / grid.nx;
    double v;
    try {
      const Scenario moved = with_ue(s, Vec3(grid.x(i), grid.y(j), grid.z));
      validate(moved);
      v = evaluate_bounds(moved, opt).peb;
    } catch (const DegenerateGeometry&) {
      v = std::numeric_limits<double>::quiet_NaN();
    } catch (const SemanticError&) {
      v = std::numeric_limits<double>::quiet_NaN();
    }
    out(j, i) = v;
  });
  return out;
}

}  // namespace rstripe
