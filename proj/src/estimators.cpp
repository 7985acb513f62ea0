#include "rstripe/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "rstripe/optim.hpp"
#include "rstripe/parallel.hpp"

namespace rstripe {

namespace {

constexpr double kLsTolerance = 1e-10;
constexpr std::size_t kRmlGridStarts = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

MatX stack_real(const CMat& B) {
  MatX out(2 * B.rows(), B.cols());
  out.topRows(B.rows()) = B.real();
  out.bottomRows(B.rows()) = B.imag();
  return out;
}

VecX stack_real(const CVec& y) {
  VecX out(2 * y.size());
  out.head(y.size()) = y.real();
  out.tail(y.size()) = y.imag();
  return out;
}

template <class Mat>
Eigen::ColPivHouseholderQR<Mat> checked_qr(const Mat& A, const char* what) {
  Eigen::ColPivHouseholderQR<Mat> qr(A.rows(), A.cols());
  qr.setThreshold(kLsTolerance);
  qr.compute(A);
  if (qr.rank() < A.cols()) {
    const auto d = qr.matrixR().diagonal().cwiseAbs();
    const double cond = d.minCoeff() > 0 ? d.maxCoeff() / d.minCoeff() : kInf;
    throw RankDeficient(std::string(what) + ": basis columns are linearly dependent", cond);
  }
  return qr;
}

// Stacked-real least squares; returns the residual energy and the solution.
double real_ls(const CMat& B, const CVec& y, VecX* x_out) {
  const MatX Br = stack_real(B);
  const VecX yr = stack_real(y);
  const auto qr = checked_qr(Br, "least squares");
  const VecX x = qr.solve(yr);
  if (x_out) *x_out = x;
  return (yr - Br * x).squaredNorm();
}

CMat smc_basis(const CMat& C, int L, double phi_los) {
  CMat B(C.rows(), 2 * L - 1);
  B.col(0) = std::polar(1.0, phi_los) * C.col(0);
  for (int k = 1; k < L; ++k) {
    B.col(2 * k - 1) = C.col(k);
    B.col(2 * k) = kJ * C.col(k);
  }
  return B;
}

double wrap_clock(double t, double period) {
  double w = std::fmod(t, period);
  if (w < 0) w += period;
  return w;
}

}  // namespace

EstimatorContext::EstimatorContext(const Scenario& s, const std::vector<Observation>& obs)
    : scene_(s), z_known_(s.dims == 2 ? s.ue.z() : std::numeric_limits<double>::quiet_NaN()),
      num_sp_(s.num_scatterers()) {
  scene_.ue = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  scene_.scatterers.clear();
  scene_.delta_tau = 0.0;
  scene_.delta_phi = {0.0};
  scene_.nlos_phase.clear();
  if (static_cast<int>(obs.size()) != scene_.num_stripes())
    throw std::invalid_argument("observation count differs from stripe count");
  for (int n = 0; n < scene_.num_stripes(); ++n) {
    covs_.push_back(disturbance_covariance(s, n));
    const CMat& Y = obs[n].Y;
    if (Y.rows() != s.stripes[n].num_antennas || Y.cols() != s.waveform.K)
      throw std::invalid_argument("observation has the wrong shape");
    raw_.push_back(Y);
    const CMat Yw = covs_.back().whiten_matrix(Y);
    y_.push_back(Eigen::Map<const CVec>(Yw.data(), Yw.size()));
  }
}

CMat EstimatorContext::columns(int n, const Vec3& p, double delta_tau, const std::vector<Vec3>& sps,
                               double* los_delay) const {
  const auto paths = enumerate_paths(scene_, n, p, sps, delta_tau);
  const Stripe& st = scene_.stripes[n];
  CMat C(static_cast<Eigen::Index>(st.num_antennas) * scene_.waveform.K, static_cast<Eigen::Index>(paths.size()));
  for (std::size_t k = 0; k < paths.size(); ++k)
    C.col(k) = whitened_response(paths[k].aoa, paths[k].pseudo_delay, scene_.waveform, st, covs_[n]);
  if (los_delay) *los_delay = paths.front().delay;
  return C;
}

Vec3 EstimatorContext::lift(const VecX& x) const {
  if (scene_.dims == 2) return {x(0), x(1), z_known_};
  return {x(0), x(1), x(2)};
}

JmlFit jml_amplitudes(const EstimatorContext& ctx, const WantedParams& w) {
  JmlFit fit;
  const double fc = ctx.scene().waveform.fc;
  for (int n = 0; n < ctx.N(); ++n) {
    double t_los = 0;
    const CMat C = ctx.columns(n, w.p, w.delta_tau, w.sp, &t_los);
    const int nc = static_cast<int>(C.cols());
    const double phi_los = -2.0 * kPi * fc * t_los + w.delta_phi;
    const CMat B = smc_basis(C, nc, phi_los);
    VecX x;
    fit.cost += real_ls(B, ctx.y(n), &x);
    CVec g(nc);
    g(0) = x(0) * std::polar(1.0, phi_los);
    for (int k = 1; k < nc; ++k) g(k) = cd(x(2 * k - 1), x(2 * k));
    fit.x.push_back(std::move(x));
    fit.gains.push_back(std::move(g));
  }
  return fit;
}

double jml_cost(const EstimatorContext& ctx, const WantedParams& w) { return jml_amplitudes(ctx, w).cost; }

NcpFit rml_ncp_amplitudes_and_cost(const EstimatorContext& ctx, const Vec3& p, double delta_tau) {
  NcpFit fit;
  for (int n = 0; n < ctx.N(); ++n) {
    const CMat C = ctx.columns(n, p, delta_tau, {});
    const auto qr = checked_qr(C, "noncoherent least squares");
    CVec g = qr.solve(ctx.y(n));
    fit.cost += (ctx.y(n) - C * g).squaredNorm();
    fit.gains.push_back(std::move(g));
  }
  return fit;
}

namespace {

double phase_from_gains(const EstimatorContext& ctx, const Vec3& p, const std::vector<CVec>& gains) {
  cd agg = 0;
  const double fc = ctx.scene().waveform.fc;
  for (int n = 0; n < ctx.N(); ++n) {
    const double t_los = (p - ctx.scene().stripes[n].phase_center).norm() / kSpeedOfLight;
    agg += gains[n](0) * std::polar(1.0, 2.0 * kPi * fc * t_los);
  }
  if (std::abs(agg) < 1e-12) throw ZeroAggregate("phase offset undefined: LoS gains cancel");
  return std::arg(agg);
}

}  // namespace

double estimate_phase_offset(const EstimatorContext& ctx, const Vec3& p, double delta_tau) {
  return phase_from_gains(ctx, p, rml_ncp_amplitudes_and_cost(ctx, p, delta_tau).gains);
}

RmlEval rml_cost(const EstimatorContext& ctx, const Vec3& p, double delta_tau) {
  RmlEval out;
  std::vector<CMat> cols;
  std::vector<double> t_los(ctx.N());
  std::vector<CVec> gains;
  for (int n = 0; n < ctx.N(); ++n) {
    cols.push_back(ctx.columns(n, p, delta_tau, {}, &t_los[n]));
    const auto qr = checked_qr(cols.back(), "noncoherent least squares");
    CVec g = qr.solve(ctx.y(n));
    out.ncp_cost += (ctx.y(n) - cols.back() * g).squaredNorm();
    gains.push_back(std::move(g));
  }
  out.delta_phi = phase_from_gains(ctx, p, gains);
  const double fc = ctx.scene().waveform.fc;
  for (int n = 0; n < ctx.N(); ++n) {
    const double phi_los = -2.0 * kPi * fc * t_los[n] + out.delta_phi;
    out.cost += real_ls(smc_basis(cols[n], static_cast<int>(cols[n].cols()), phi_los), ctx.y(n), nullptr);
  }
  return out;
}

std::vector<double> coarse_pseudo_delays(const EstimatorContext& ctx, int nfft) {
  const Waveform& w = ctx.scene().waveform;
  if (nfft < w.K) throw std::invalid_argument("IFFT size must be at least K");
  Eigen::FFT<double> fft;
  std::vector<double> out;
  std::vector<cd> in(nfft), spec;
  for (int n = 0; n < ctx.N(); ++n) {
    const CMat& Y = ctx.raw(n);
    VecX power = VecX::Zero(nfft);
    for (Eigen::Index m = 0; m < Y.rows(); ++m) {
      std::fill(in.begin(), in.end(), cd(0));
      for (int k = 0; k < w.K; ++k) in[k] = Y(m, k) * std::conj(w.pilots(k));
      fft.inv(spec, in);
      for (int q = 0; q < nfft; ++q) power(q) += std::norm(spec[q]);
    }
    Eigen::Index q;
    power.maxCoeff(&q);
    out.push_back(static_cast<double>(q) / (nfft * w.delta_f));
  }
  return out;
}

namespace {

double clock_from_delays(const EstimatorContext& ctx, const std::vector<double>& taus, const Vec3& p) {
  double acc = 0;
  for (int n = 0; n < ctx.N(); ++n) acc += taus[n] - (p - ctx.scene().stripes[n].phase_center).norm() / kSpeedOfLight;
  return wrap_clock(acc / ctx.N(), 1.0 / ctx.scene().waveform.delta_f);
}

}  // namespace

double coarse_clock_offset(const EstimatorContext& ctx, const Vec3& p, int nfft) {
  return clock_from_delays(ctx, coarse_pseudo_delays(ctx, nfft), p);
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::RmlNcp: return "RML-NCP";
    case Stage::Rml: return "RML";
    case Stage::Nst: return "NST";
    case Stage::Jml: return "JML";
  }
  return "?";
}

namespace {

std::vector<double> axis(double lo, double hi, double step) {
  std::vector<double> v;
  if (hi < lo || step <= 0) return v;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) v.push_back(lo + i * step);
  return v;
}

double safe(const std::function<double()>& f) {
  try {
    return f();
  } catch (const NumericalFailure&) {
    return kInf;
  }
}

Eigen::Index argmin_first(const std::vector<double>& v) {
  Eigen::Index best = -1;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i]) && (best < 0 || v[i] < v[best])) best = static_cast<Eigen::Index>(i);
  return best;
}

}  // namespace

std::pair<EstimateReport, EstimateReport> rml_position_search(const EstimatorContext& ctx, int threads) {
  const SearchConfig& cfg = ctx.search();
  const Waveform& w = ctx.scene().waveform;
  const double lambda = w.wavelength();
  const double step = cfg.grid_step > 0 ? cfg.grid_step : lambda / 4.0;
  const int D = ctx.dims();

  const auto xs = axis(cfg.box_min.x(), cfg.box_max.x(), step);
  const auto ys = axis(cfg.box_min.y(), cfg.box_max.y(), step);
  const auto zs = D == 2 ? std::vector<double>{ctx.known_height()} : axis(cfg.box_min.z(), cfg.box_max.z(), step);
  const std::size_t total = xs.size() * ys.size() * zs.size();
  if (total == 0) throw SearchFailure("position search grid is empty");

  const auto taus = coarse_pseudo_delays(ctx, cfg.ifft_factor * w.K);
  auto point = [&](std::size_t i) {
    return Vec3(xs[i % xs.size()], ys[(i / xs.size()) % ys.size()], zs[i / (xs.size() * ys.size())]);
  };
  std::vector<double> cp(total), ncp(total);
  parallel_for(static_cast<int>(total), threads, [&](int i) {
    const Vec3 p = point(i);
    try {
      const RmlEval e = rml_cost(ctx, p, clock_from_delays(ctx, taus, p));
      cp[i] = e.cost;
      ncp[i] = e.ncp_cost;
    } catch (const NumericalFailure&) {
      cp[i] = ncp[i] = kInf;
    }
  });
  const Eigen::Index i_cp = argmin_first(cp), i_ncp = argmin_first(ncp);
  if (i_cp < 0 || i_ncp < 0) throw SearchFailure("no valid candidate in the position search grid");

  VecX steps(D + 1);
  steps.head(D).setConstant(lambda / 8.0);
  steps(D) = 1.0 / (8.0 * w.bandwidth());
  auto start = [&](const Vec3& p) {
    VecX x(D + 1);
    x.head(D) = p.head(D);
    x(D) = clock_from_delays(ctx, taus, p);
    return x;
  };

  EstimateReport ncp_rep;
  {
    const auto r = nelder_mead(
        [&](const VecX& x) { return safe([&] { return rml_ncp_amplitudes_and_cost(ctx, ctx.lift(x), x(D)).cost; }); },
        start(point(i_ncp)), steps, cfg.max_refine_iterations);
    ncp_rep.stage = Stage::RmlNcp;
    ncp_rep.p_hat = ctx.lift(r.x);
    ncp_rep.delta_tau_hat = r.x(D);
    const NcpFit fit = rml_ncp_amplitudes_and_cost(ctx, ncp_rep.p_hat, ncp_rep.delta_tau_hat);
    ncp_rep.delta_phi_hat = safe([&] { return phase_from_gains(ctx, ncp_rep.p_hat, fit.gains); });
    ncp_rep.amplitudes = fit.gains;
    ncp_rep.cost = fit.cost;
    ncp_rep.cost_trace = r.trace;
    ncp_rep.iterations = r.iterations;
    ncp_rep.converged = r.converged;
  }

  EstimateReport rml_rep;
  {
    auto objective = [&](const VecX& x) { return safe([&] { return rml_cost(ctx, ctx.lift(x), x(D)).cost; }); };
    std::vector<VecX> starts;
    VecX from_ncp(D + 1);
    from_ncp.head(D) = ncp_rep.p_hat.head(D);
    from_ncp(D) = ncp_rep.delta_tau_hat;
    starts.push_back(from_ncp);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n_best = std::min<std::size_t>(kRmlGridStarts, total);
    std::partial_sort(order.begin(), order.begin() + n_best, order.end(),
                      [&](std::size_t a, std::size_t b) { return cp[a] < cp[b]; });
    for (std::size_t i = 0; i < n_best; ++i)
      if (std::isfinite(cp[order[i]])) starts.push_back(start(point(order[i])));
    MinimizeResult r;
    r.f = kInf;
    for (const VecX& x0 : starts) {
      MinimizeResult c = nelder_mead(objective, x0, steps, cfg.max_refine_iterations);
      if (c.f < r.f || r.x.size() == 0) r = std::move(c);
    }
    rml_rep.stage = Stage::Rml;
    rml_rep.p_hat = ctx.lift(r.x);
    rml_rep.delta_tau_hat = r.x(D);
    const RmlEval e = rml_cost(ctx, rml_rep.p_hat, rml_rep.delta_tau_hat);
    rml_rep.delta_phi_hat = e.delta_phi;
    rml_rep.amplitudes = rml_ncp_amplitudes_and_cost(ctx, rml_rep.p_hat, rml_rep.delta_tau_hat).gains;
    rml_rep.cost = e.cost;
    rml_rep.cost_trace = r.trace;
    rml_rep.iterations = r.iterations;
    rml_rep.converged = r.converged;
  }
  return {ncp_rep, rml_rep};
}

CMat null_space_basis(const EstimatorContext& ctx, int n, const Vec3& p, double delta_tau) {
  const CMat C = ctx.columns(n, p, delta_tau, {});
  if (C.rows() <= C.cols()) throw KernelEmpty("null space is empty: MK <= L");
  Eigen::HouseholderQR<CMat> qr(C);
  const CMat Q = qr.householderQ();
  return Q.rightCols(C.rows() - C.cols());
}

NstGrid default_nst_grid(const EstimatorContext& ctx) {
  return {ctx.search().box_min, ctx.search().box_max, ctx.search().sp_grid_step};
}

NstScan::NstScan(const EstimatorContext& ctx, const Vec3& p, double delta_tau) : ctx_(&ctx), p_(p), dtau_(delta_tau) {
  for (int n = 0; n < ctx.N(); ++n) {
    const CMat C = ctx.columns(n, p, delta_tau, {});
    if (C.rows() <= C.cols()) throw KernelEmpty("null space is empty: MK <= L");
    Eigen::HouseholderQR<CMat> qr(C);
    CMat q1 = qr.householderQ() * CMat::Identity(C.rows(), C.cols());
    CVec u = ctx.y(n) - q1 * (q1.adjoint() * ctx.y(n));
    base_ += u.squaredNorm();
    q1_.push_back(std::move(q1));
    u_.push_back(std::move(u));
  }
}

double NstScan::residual(const Vec3& q) const {
  const Scenario& sc = ctx_->scene();
  double r = base_;
  for (int n = 0; n < ctx_->N(); ++n) {
    const Stripe& st = sc.stripes[n];
    const double tau = path_delay(p_, q, st.phase_center) + dtau_;
    const CVec c = whitened_response(aoa(q, st), tau, sc.waveform, st, ctx_->cov(n));
    const double cn = c.squaredNorm();
    const double g2 = cn - (q1_[n].adjoint() * c).squaredNorm();
    if (g2 <= 1e-12 * cn) continue;
    r -= std::norm(c.dot(u_[n])) / g2;
  }
  return r;
}

std::vector<Vec3> nst_map_scatterers(const EstimatorContext& ctx, const Vec3& p_hat, double delta_tau_hat,
                                     double /*delta_phi_hat*/, int J, const NstGrid& grid, int threads) {
  if (J <= 0) return {};
  const NstScan scan(ctx, p_hat, delta_tau_hat);
  const auto xs = axis(grid.lo.x(), grid.hi.x(), grid.step);
  const auto ys = axis(grid.lo.y(), grid.hi.y(), grid.step);
  const auto zs = axis(grid.lo.z(), grid.hi.z(), grid.step);
  const std::size_t total = xs.size() * ys.size() * zs.size();
  if (total == 0) throw SearchFailure("scatterer grid is empty");
  auto point = [&](std::size_t i) {
    return Vec3(xs[i % xs.size()], ys[(i / xs.size()) % ys.size()], zs[i / (xs.size() * ys.size())]);
  };
  std::vector<double> res(total);
  parallel_for(static_cast<int>(total), threads, [&](int i) {
    const Vec3 q = point(i);
    res[i] = (q - p_hat).norm() < 1e-9 ? kInf : safe([&] { return scan.residual(q); });
  });

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return res[a] < res[b]; });

  const double exclusion = 3.0 * grid.step * (1.0 + 1e-9);
  std::vector<Vec3> picks;
  for (std::size_t i : order) {
    if (static_cast<int>(picks.size()) == J || !std::isfinite(res[i])) break;
    const Vec3 q = point(i);
    bool clear = true;
    for (const auto& s : picks) clear = clear && (q - s).norm() > exclusion;
    if (clear) picks.push_back(q);
  }
  if (static_cast<int>(picks.size()) < J) throw SearchFailure("fewer well-separated dips than scatterers");

  for (auto& q : picks) {
    const auto r = nelder_mead([&](const VecX& x) { return safe([&] { return scan.residual(Vec3(x)); }); }, VecX(q),
                               VecX::Constant(3, grid.step / 2.0), 500);
    q = Vec3(r.x);
  }
  return picks;
}

namespace {

VecX pack(const EstimatorContext& ctx, const EstimateReport& r) {
  const int D = ctx.dims();
  VecX x(D + 2 + 3 * static_cast<int>(r.sp_hats.size()));
  x.head(D) = r.p_hat.head(D);
  x(D) = r.delta_tau_hat;
  x(D + 1) = r.delta_phi_hat;
  for (std::size_t j = 0; j < r.sp_hats.size(); ++j) x.segment(D + 2 + 3 * j, 3) = r.sp_hats[j];
  return x;
}

WantedParams unpack(const EstimatorContext& ctx, const VecX& x) {
  const int D = ctx.dims();
  WantedParams w;
  w.p = ctx.lift(x);
  w.delta_tau = x(D);
  w.delta_phi = x(D + 1);
  for (Eigen::Index o = D + 2; o + 2 < x.size(); o += 3) w.sp.emplace_back(x.segment(o, 3));
  return w;
}

}  // namespace

EstimateReport jml_refine(const EstimatorContext& ctx, const EstimateReport& initial) {
  const int D = ctx.dims();
  const Waveform& w = ctx.scene().waveform;
  VecX x = pack(ctx, initial);
  VecX steps(x.size());
  steps.head(D).setConstant(w.wavelength() / 8.0);
  steps(D) = 1.0 / (8.0 * w.bandwidth());
  steps(D + 1) = 0.1;
  steps.tail(x.size() - D - 2).setConstant(ctx.search().sp_grid_step / 2.0);

  auto objective = [&](const VecX& v) { return safe([&] { return jml_cost(ctx, unpack(ctx, v)); }); };
  EstimateReport out = initial;
  out.stage = Stage::Jml;
  out.cost_trace.clear();
  out.iterations = 0;
  // One restart from the best vertex guards against premature simplex collapse.
  MinimizeResult r;
  for (int pass = 0; pass < 2; ++pass) {
    r = nelder_mead(objective, x, steps, ctx.search().max_refine_iterations);
    out.cost_trace.insert(out.cost_trace.end(), r.trace.begin(), r.trace.end());
    out.iterations += r.iterations;
    x = r.x;
  }
  out.converged = r.converged;
  if (!r.converged) out.note = "refinement stopped at the iteration limit";
  const WantedParams best = unpack(ctx, x);
  out.p_hat = best.p;
  out.delta_tau_hat = best.delta_tau;
  out.delta_phi_hat = wrap_angle(best.delta_phi);
  out.sp_hats = best.sp;
  const JmlFit fit = jml_amplitudes(ctx, best);
  out.amplitudes = fit.gains;
  out.cost = fit.cost;
  return out;
}

std::vector<EstimateReport> run_pipeline(const EstimatorContext& ctx, int threads) {
  auto [ncp, rml] = rml_position_search(ctx, threads);
  EstimateReport nst = rml;
  nst.stage = Stage::Nst;
  nst.cost_trace.clear();
  nst.iterations = 0;
  nst.sp_hats = nst_map_scatterers(ctx, rml.p_hat, rml.delta_tau_hat, rml.delta_phi_hat, ctx.num_scatterers(),
                                   default_nst_grid(ctx), threads);
  {
    WantedParams w{nst.p_hat, nst.delta_tau_hat, nst.delta_phi_hat, nst.sp_hats};
    nst.cost = safe([&] { return jml_cost(ctx, w); });
  }
  EstimateReport jml = jml_refine(ctx, nst);
  return {ncp, rml, nst, jml};
}

}  // namespace rstripe
