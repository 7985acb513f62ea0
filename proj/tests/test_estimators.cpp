#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rstripe/estimators.hpp"
#include "rstripe/fim.hpp"

using namespace rstripe;

namespace {

std::vector<Vec3> true_sps(const Scenario& s) {
  std::vector<Vec3> v;
  for (const auto& sc : s.scatterers) v.push_back(sc.position);
  return v;
}

CVec true_gains(const Scenario& s, int n) {
  const auto paths = enumerate_paths(s, n);
  const oracle::LocalGeom g = oracle::local_geometry(s, n);
  CVec out(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const double a = paths[k].kind == PathKind::SP ? sp_amplitude(s, n, paths[k]) : rp_amplitude(s, n, paths[k]);
    out(k) = std::polar(a, g.phase(k));
  }
  return out;
}

}  // namespace

TEST(Estimators, ContextDropsGroundTruth) {
  const Scenario s = load_scenario("desk");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 1.0}));
  EXPECT_TRUE(ctx.scene().ue.hasNaN());
  EXPECT_TRUE(ctx.scene().scatterers.empty());
  EXPECT_EQ(ctx.scene().delta_tau, 0.0);
  EXPECT_EQ(ctx.num_scatterers(), 1);
  EXPECT_DOUBLE_EQ(ctx.known_height(), s.ue.z());
}

TEST(Estimators, JmlExactRecoveryNoiseFree) {
  const Scenario s = load_scenario("canonical");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  const JmlFit fit = jml_amplitudes(ctx, {s.ue, s.delta_tau, s.delta_phi_of(0), true_sps(s)});
  EXPECT_LT(fit.cost, 1e-12);
  for (int n = 0; n < s.num_stripes(); ++n) {
    const CVec g = true_gains(s, n);
    EXPECT_LT((fit.gains[n] - g).norm() / g.norm(), 1e-8);
  }
}

TEST(Estimators, NoncoherentExactRecoveryNoiseFree) {
  Scenario s = load_scenario("canonical");
  s.scatterers.clear();
  s = with_sdnr(s, s.sdnr_db);
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  const NcpFit fit = rml_ncp_amplitudes_and_cost(ctx, s.ue, s.delta_tau);
  EXPECT_LT(fit.cost, 1e-12);
  for (int n = 0; n < s.num_stripes(); ++n) {
    const CVec g = true_gains(s, n);
    EXPECT_LT((fit.gains[n] - g).norm() / g.norm(), 1e-8);
  }
  EXPECT_NEAR(wrap_angle(estimate_phase_offset(ctx, s.ue, s.delta_tau) - s.delta_phi_of(0)), 0.0, 1e-9);
  const RmlEval e = rml_cost(ctx, s.ue, s.delta_tau);
  EXPECT_LT(e.cost, 1e-12);
}

TEST(Estimators, JmlCostMatchesRealLeastSquaresOracle) {
  const Scenario s = load_scenario("desk");
  const EstimatorContext ctx(s, synthesize(s, 3, {0, 1.0}));
  const Vec3 p = s.ue + Vec3(0.013, -0.021, 0.0);
  const std::vector<Vec3> sps{s.scatterers[0].position + Vec3(0.05, 0.02, -0.03)};
  const double dtau = s.delta_tau + 0.4e-9, dphi = 0.3;
  const JmlFit fit = jml_amplitudes(ctx, {p, dtau, dphi, sps});
  double cost = 0;
  for (int n = 0; n < ctx.N(); ++n) {
    double t_los = 0;
    const CMat C = ctx.columns(n, p, dtau, sps, &t_los);
    const int nc = static_cast<int>(C.cols());
    CMat B(C.rows(), 2 * nc - 1);
    B.col(0) = std::polar(1.0, -2 * oracle::kPi * s.waveform.fc * t_los + dphi) * C.col(0);
    for (int k = 1; k < nc; ++k) {
      B.col(2 * k - 1) = C.col(k);
      B.col(2 * k) = cd(0, 1) * C.col(k);
    }
    MatX A(2 * B.rows(), B.cols());
    A << B.real(), B.imag();
    VecX b(2 * B.rows());
    b << ctx.y(n).real(), ctx.y(n).imag();
    const VecX x = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    cost += (b - A * x).squaredNorm();
  }
  EXPECT_NEAR(fit.cost, cost, 1e-8 * cost);
}

TEST(Estimators, CoincidentScatterersAreRankDeficient) {
  const Scenario s = load_scenario("desk");
  const EstimatorContext ctx(s, synthesize(s, 3, {0, 1.0}));
  const Vec3 q = s.scatterers[0].position;
  EXPECT_THROW(jml_amplitudes(ctx, {s.ue, s.delta_tau, 0.0, {q, q}}), RankDeficient);
}

TEST(Estimators, NullSpaceAnnihilatesSpecularPaths) {
  const Scenario s = load_scenario("canonical");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  for (int n = 0; n < ctx.N(); ++n) {
    const CMat K = null_space_basis(ctx, n, s.ue, s.delta_tau);
    const CMat C = ctx.columns(n, s.ue, s.delta_tau, {});
    EXPECT_EQ(K.cols(), K.rows() - C.cols());
    EXPECT_LT((K.adjoint() * K - CMat::Identity(K.cols(), K.cols())).norm(), 1e-12);
    for (Eigen::Index l = 0; l < C.cols(); ++l)
      EXPECT_LT((K.adjoint() * C.col(l)).norm() / C.col(l).norm(), 1e-10);
  }
}

TEST(Estimators, NstRecoversSingleScattererNoiseFree) {
  const Scenario s = load_scenario("desk");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  const NstGrid grid = default_nst_grid(ctx);
  const auto sp = nst_map_scatterers(ctx, s.ue, s.delta_tau, s.delta_phi_of(0), 1, grid);
  ASSERT_EQ(sp.size(), 1u);
  EXPECT_LT((sp[0] - s.scatterers[0].position).norm(), grid.step);
}

TEST(Estimators, CoarseClockWithinOneBinNoiseFree) {
  const Scenario s = load_scenario("desk");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  const int nfft = s.search.ifft_factor * s.waveform.K;
  const double bin = 1.0 / (nfft * s.waveform.delta_f);
  const double est = coarse_clock_offset(ctx, s.ue, nfft);
  const double period = 1.0 / s.waveform.delta_f;
  double err = std::fmod(std::abs(est - s.delta_tau), period);
  err = std::min(err, period - err);
  EXPECT_LE(err, bin);
}

TEST(Estimators, PipelineAtHighSdnrApproachesBound) {
  const Scenario s = with_sdnr(load_scenario("desk"), 40.0);
  const EstimatorContext ctx(s, synthesize(s, 11, {0, 1.0}));
  const auto reports = run_pipeline(ctx);
  ASSERT_EQ(reports.size(), 4u);
  EXPECT_EQ(reports.back().stage, Stage::Jml);
  const double peb = evaluate_bounds(s, fim_options(s)).peb;
  EXPECT_LT((reports.back().p_hat - s.ue).norm(), 5.0 * peb);
  EXPECT_LE(reports.back().cost, reports[2].cost);
}
