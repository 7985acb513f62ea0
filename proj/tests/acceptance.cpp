#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "rstripe/io.hpp"

using namespace rstripe;

namespace {

// Pinned tolerances.
constexpr double kThresholdRelTol = 0.005;
constexpr double kBLowHz = 17.78e6;
constexpr double kBHighHz = 207.9e6;
constexpr double kThresholdMaxSeconds = 1.0;

constexpr int kFimScenarios = 50;
constexpr double kLocalFimRelTol = 1e-5;
constexpr double kJacobianScaledTol = 1e-6;
constexpr double kFimMaxSeconds = 120.0;

constexpr double kFlatRatioMax = 1.5;
constexpr double kFlatBandEdgeHz = 100e6;
constexpr double kDropRatioMin = 5.0;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kBoundsMaxSeconds = 300.0;

constexpr int kMcTrials = 20;
constexpr double kMcSdnrDb = 20.0;
constexpr double kMcBoundFactor = 3.0;
constexpr std::uint64_t kMcSeed = 1;

constexpr double kPeriodM = 0.086;
constexpr double kPeriodRelTol = 0.15;
constexpr double kSliceHalfWidthM = 0.5;
constexpr double kSliceStepM = 0.001;

constexpr double kNullSpaceTol = 1e-10;

constexpr double kAmplitudeRelTol = 1e-8;
constexpr double kCostTol = 1e-12;

constexpr double kWhitenTol = 1e-8;
constexpr int kCovDraws = 2000;
constexpr double kCovRelTol = 0.10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

int hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = load_scenario("canonical");
  const double b_low = bw_thresholds(s).b_low;
  const double b_high = bw_thresholds(with_antennas(s, 12)).b_high;
  const double dt = seconds_since(t0);
  const bool ok = std::abs(b_low - kBLowHz) <= kThresholdRelTol * kBLowHz &&
                  std::abs(b_high - kBHighHz) <= kThresholdRelTol * kBHighHz && dt < kThresholdMaxSeconds;
  return {ok, "B_low=" + fmt(b_low / 1e6) + " MHz, B_high(M=12)=" + fmt(b_high / 1e6) + " MHz, " + fmt(dt) + " s"};
}

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pickN(1, 3), pickM(2, 8), pickK(2, 8), pickWalls(0, 2);
  double worst_fim = 0, worst_jac = 0;
  for (int t = 0; t < kFimScenarios; ++t) {
    const int walls = pickWalls(rng);
    const int J = std::uniform_int_distribution<int>(0, std::min(1, 3 - walls))(rng);
    const Scenario s = oracle::random_small_scenario(rng, pickN(rng), pickM(rng), pickK(rng), walls, J);
    for (int n = 0; n < s.num_stripes(); ++n) {
      const StripeChannel ch = stripe_channel(s, n);
      const DisturbanceCov cov = disturbance_covariance(s, n);
      const Stripe& st = s.stripes[n];
      const MatX J_lib = local_fim(st, ch.params, s.waveform, cov);
      const MatX J_ref = oracle::local_fim_fd(ch.params, st.num_antennas, st.spacing, s.waveform.wavelength(),
                                              s.waveform.K, s.waveform.delta_f, s.waveform.pilots, cov.dense());
      for (Eigen::Index i = 0; i < J_ref.rows(); ++i)
        for (Eigen::Index j = 0; j < J_ref.cols(); ++j) {
          const double scale = std::sqrt(std::abs(J_ref(i, i) * J_ref(j, j)));
          worst_fim = std::max(worst_fim, std::abs(J_lib(i, j) - J_ref(i, j)) / scale);
        }
    }
    for (SyncMode sync : {SyncMode::CP, SyncMode::NCP})
      for (bool known : {false, true}) {
        const FimOptions opt{sync, 3, known};
        const ParamLayout L = make_layout(s, opt);
        for (int n = 0; n < s.num_stripes(); ++n) {
          const MatX T = jacobian(s, n, opt, L);
          const MatX ref = oracle::jacobian_fd(s, n, L, sync == SyncMode::CP);
          const int nc = s.num_components(n);
          for (int blk = 0; blk < 4; ++blk) {
            const MatX a = T.middleCols(blk * nc, nc), b = ref.middleCols(blk * nc, nc);
            const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
            worst_jac = std::max(worst_jac, (a - b).cwiseAbs().maxCoeff() / scale);
          }
        }
      }
  }
  const double dt = seconds_since(t0);
  const bool ok = worst_fim < kLocalFimRelTol && worst_jac < kJacobianScaledTol && dt < kFimMaxSeconds;
  return {ok, "worst local FIM scaled error " + fmt(worst_fim) + ", worst Jacobian scaled error " + fmt(worst_jac) +
                  ", " + fmt(dt) + " s"};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = with_sdnr(load_scenario("canonical"), 0.0);
  const std::vector<double> bw = parse_list("1e6:1e9:log25");
  const std::vector<MultipathCase> cases{MultipathCase::LosOnly, MultipathCase::LosRp, MultipathCase::LosRpSp,
                                         MultipathCase::LosRpSpKnownPhase};
  const auto rows = run_bounds_sweep(s, SweepVariable::Bandwidth, bw, cases, {SyncMode::CP, SyncMode::NCP},
                                     hw_threads());
  auto find = [&](double b, MultipathCase c, SyncMode m) -> const BoundsReport& {
    for (const auto& r : rows)
      if (r.value == b && r.mp == c && r.sync == m) return r.bounds;
    throw std::logic_error("missing sweep row");
  };

  bool a = true;
  for (double b : bw)
    for (MultipathCase c : cases)
      if (!(find(b, c, SyncMode::CP).peb < find(b, c, SyncMode::NCP).peb)) a = false;

  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (double b : bw)
    if (b < kFlatBandEdgeHz) {
      const double v = find(b, MultipathCase::LosOnly, SyncMode::NCP).peb;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const Scenario los = apply_case(s, MultipathCase::LosOnly);
  const FimOptions ncp{SyncMode::NCP, s.dims, false};
  const double p200 = evaluate_bounds(with_bandwidth(los, 200e6), ncp).peb;
  const double p1g = evaluate_bounds(with_bandwidth(los, 1e9), ncp).peb;
  const double flat = hi / lo, drop = p200 / p1g;
  const bool b_ok = flat < kFlatRatioMax && drop > kDropRatioMin;

  bool c_ok = true;
  for (double b : bw)
    for (SyncMode m : {SyncMode::CP, SyncMode::NCP}) {
      const BoundsReport& u = find(b, MultipathCase::LosRpSp, m);
      const BoundsReport& k = find(b, MultipathCase::LosRpSpKnownPhase, m);
      auto le = [](double x, double y) { return x <= y * (1.0 + kMonotoneSlack); };
      if (!le(k.peb, u.peb) || !le(k.ceb, u.ceb) || !le(k.cpeb, u.cpeb)) c_ok = false;
      for (std::size_t j = 0; j < u.sp_peb.size(); ++j)
        if (!le(k.sp_peb[j], u.sp_peb[j])) c_ok = false;
    }
  const double dt = seconds_since(t0);
  const bool ok = a && b_ok && c_ok && dt < kBoundsMaxSeconds;
  return {ok, std::string("(a) CP<NCP everywhere: ") + (a ? "yes" : "no") + "; (b) NCP L-- max/min below 100 MHz " +
                  fmt(flat) + " (need <" + fmt(kFlatRatioMax) + "), PEB(200 MHz)/PEB(1 GHz) " + fmt(drop) +
                  " (need >" + fmt(kDropRatioMin) + "); (c) known RP phases never worse: " + (c_ok ? "yes" : "no") +
                  "; " + fmt(dt) + " s"};
}

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = load_scenario("desk");
  const MetricsTable t = run_monte_carlo(s, {kMcSdnrDb}, kMcTrials, kMcSeed, {hw_threads(), 1.0});
  const BoundsReport& b = t.bounds.front().second;
  const StageMetrics* jml = nullptr;
  for (const auto& m : t.summary)
    if (m.stage == Stage::Jml) jml = &m;
  if (!jml) return {false, "no JML metrics"};
  const bool ok = jml->failures == 0 && jml->position_clean <= kMcBoundFactor * b.peb &&
                  jml->clock_raw <= kMcBoundFactor * b.ceb_m();
  return {ok, "JML position RMSE (IQR-cleaned) " + fmt(jml->position_clean) + " m vs PEB " + fmt(b.peb) +
                  " m; JML clock RMSE " + fmt(jml->clock_raw) + " m vs CEB " + fmt(b.ceb_m()) + " m; failures " +
                  std::to_string(jml->failures) + "; " + fmt(seconds_since(t0)) + " s"};
}

Outcome criterion5() {
  const Scenario s = with_sdnr(load_scenario("desk"), kMcSdnrDb);
  const EstimatorContext ctx(s, synthesize(s, kMcSeed, {0, 1.0}));
  const int n = static_cast<int>(std::lround(2 * kSliceHalfWidthM / kSliceStepM)) + 1;
  VecX cost(n);
  for (int i = 0; i < n; ++i) {
    Vec3 p = s.ue;
    p.x() += -kSliceHalfWidthM + i * kSliceStepM;
    cost(i) = rml_cost(ctx, p, s.delta_tau).cost;
  }
  const VecX c = cost.array() - cost.mean();
  VecX ac(n / 2);
  for (int lag = 0; lag < n / 2; ++lag) ac(lag) = c.head(n - lag).dot(c.tail(n - lag)) / (n - lag);
  int first_peak = -1;
  bool went_down = false;
  for (int lag = 1; lag + 1 < ac.size(); ++lag) {
    if (ac(lag) < ac(lag - 1)) went_down = true;
    if (went_down && ac(lag) >= ac(lag - 1) && ac(lag) > ac(lag + 1)) {
      first_peak = lag;
      break;
    }
  }
  if (first_peak < 0) return {false, "no periodic structure found in the cost slice"};
  const double spacing = first_peak * kSliceStepM;
  const bool ok = std::abs(spacing - kPeriodM) <= kPeriodRelTol * kPeriodM;
  return {ok, "autocorrelation period " + fmt(spacing) + " m (target " + fmt(kPeriodM) + " m +/- " +
                  fmt(100 * kPeriodRelTol) + "%)"};
}

Outcome criterion6() {
  const Scenario s = load_scenario("canonical");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  double worst = 0;
  for (int n = 0; n < ctx.N(); ++n) {
    const CMat K = null_space_basis(ctx, n, s.ue, s.delta_tau);
    const CMat C = ctx.columns(n, s.ue, s.delta_tau, {});
    for (Eigen::Index l = 0; l < C.cols(); ++l)
      worst = std::max(worst, (K.adjoint() * C.col(l)).norm() / C.col(l).norm());
  }
  const Scenario d = load_scenario("desk");
  const EstimatorContext dctx(d, synthesize(d, 1, {0, 0.0}));
  const NstGrid grid = default_nst_grid(dctx);
  const auto sp = nst_map_scatterers(dctx, d.ue, d.delta_tau, d.delta_phi_of(0), 1, grid);
  const double sp_err = sp.empty() ? std::numeric_limits<double>::infinity() : (sp[0] - d.scatterers[0].position).norm();
  const bool ok = worst < kNullSpaceTol && sp_err <= grid.step;
  return {ok, "worst |K^H c'|/|c'| " + fmt(worst) + "; NST scatterer error " + fmt(sp_err) + " m (grid step " +
                  fmt(grid.step) + " m)"};
}

Outcome criterion7() {
  const Scenario s = load_scenario("canonical");
  const EstimatorContext ctx(s, synthesize(s, 1, {0, 0.0}));
  std::vector<Vec3> sps;
  for (const auto& sc : s.scatterers) sps.push_back(sc.position);
  const JmlFit fit = jml_amplitudes(ctx, {s.ue, s.delta_tau, s.delta_phi_of(0), sps});
  const double jml_cost_truth = jml_cost(ctx, {s.ue, s.delta_tau, s.delta_phi_of(0), sps});

  auto gains = [](const Scenario& sc, int n) {
    const auto paths = enumerate_paths(sc, n);
    const oracle::LocalGeom g = oracle::local_geometry(sc, n);
    CVec out(paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const double a =
          paths[k].kind == PathKind::SP ? sp_amplitude(sc, n, paths[k]) : rp_amplitude(sc, n, paths[k]);
      out(k) = std::polar(a, g.phase(k));
    }
    return out;
  };
  double amp_err = 0;
  for (int n = 0; n < s.num_stripes(); ++n) {
    const CVec g = gains(s, n);
    amp_err = std::max(amp_err, (fit.gains[n] - g).norm() / g.norm());
  }

  Scenario smc = apply_case(s, MultipathCase::LosRp);
  smc = with_sdnr(smc, smc.sdnr_db);
  const EstimatorContext nctx(smc, synthesize(smc, 1, {0, 0.0}));
  const NcpFit nf = rml_ncp_amplitudes_and_cost(nctx, smc.ue, smc.delta_tau);
  double ncp_err = 0;
  for (int n = 0; n < smc.num_stripes(); ++n) {
    const CVec g = gains(smc, n);
    ncp_err = std::max(ncp_err, (nf.gains[n] - g).norm() / g.norm());
  }
  const bool ok = amp_err < kAmplitudeRelTol && fit.cost < kCostTol && jml_cost_truth < kCostTol &&
                  ncp_err < kAmplitudeRelTol && nf.cost < kCostTol;
  return {ok, "JML amplitude error " + fmt(amp_err) + ", JML cost " + fmt(jml_cost_truth) +
                  "; RML-NCP amplitude error " + fmt(ncp_err) + ", residual " + fmt(nf.cost)};
}

Outcome criterion8() {
  std::mt19937_64 rng(88);
  std::normal_distribution<double> nd;
  const int M = 2, K = 3;
  double worst_whiten = 0, worst_cov = 0;
  for (int inst = 0; inst < 5; ++inst) {
    CVec pilots(K);
    for (int k = 0; k < K; ++k) pilots(k) = cd(nd(rng), nd(rng));
    pilots.normalize();
    const DmcParams dmc{std::exp(nd(rng)), 0.5 + std::abs(nd(rng)), 0.1 * std::abs(nd(rng))};
    const double sigma2 = 0.1 + std::abs(nd(rng));
    const DisturbanceCov cov = disturbance_covariance(dmc, sigma2, pilots, K, M);

    CMat Rk = oracle::dmc_covariance_quadrature(dmc.alpha1, dmc.beta_d, dmc.tau_d, K);
    Rk = Rk.cwiseProduct(pilots * pilots.adjoint()).eval();
    Rk.diagonal().array() += sigma2 / K;
    const CMat R = oracle::kron_identity(Rk, M);
    const CMat W = oracle::inverse_sqrt(R);
    for (int t = 0; t < 10; ++t) {
      CVec x(M * K);
      for (int i = 0; i < M * K; ++i) x(i) = cd(nd(rng), nd(rng));
      worst_whiten = std::max(worst_whiten, (cov.whiten(x) - W * x).norm() / (W * x).norm());
    }
    CMat S = CMat::Zero(M * K, M * K);
    for (int t = 0; t < kCovDraws; ++t) {
      const CMat Wn = draw_disturbance(cov, derive_seed(1000 + inst, 0, t));
      const CVec w = Eigen::Map<const CVec>(Wn.data(), Wn.size());
      S += w * w.adjoint();
    }
    S /= kCovDraws;
    worst_cov = std::max(worst_cov, (S - R).norm() / R.norm());
  }
  const bool ok = worst_whiten < kWhitenTol && worst_cov < kCovRelTol;
  return {ok, "worst whitening error " + fmt(worst_whiten) + "; worst sample covariance error " + fmt(worst_cov)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion9() {
  const auto dir = std::filesystem::temp_directory_path() / "rstripe_acceptance";
  std::filesystem::create_directories(dir);
  std::string outs[2];
  for (int run = 0; run < 2; ++run) {
    const auto rep = dir / ("reports_" + std::to_string(run) + ".csv");
    const auto sum = dir / ("summary_" + std::to_string(run) + ".csv");
    const auto log = dir / ("stderr_" + std::to_string(run) + ".txt");
    const std::string cmd = std::string(RSTRIPE_CLI_PATH) + " estimate --seed 7 --trials 5 --out " + rep.string() +
                            " --summary " + sum.string() + " 2>" + log.string();
    const int status = std::system(cmd.c_str());
    if (status != 0) return {false, "estimate exited with status " + std::to_string(status)};
    outs[run] = slurp(rep) + '\x1f' + slurp(sum) + '\x1f' + slurp(log);
  }
  const bool ok = !outs[0].empty() && outs[0] == outs[1];
  return {ok, "two runs of 'estimate --seed 7 --trials 5' " + std::string(ok ? "are" : "are not") +
                  " byte-identical (" + std::to_string(outs[0].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) which.push_back(std::atoi(argv[++i]));
  }
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  Outcome (*fns[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                        criterion6, criterion7, criterion8, criterion9};
  int failures = 0;
  for (int k : which) {
    if (k < 1 || k > 9) {
      std::cerr << "unknown criterion " << k << '\n';
      return 2;
    }
    Outcome o;
    try {
      o = fns[k - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
