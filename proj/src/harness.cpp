#include "rstripe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rstripe/parallel.hpp"

namespace rstripe {

namespace {

std::vector<double> match_scatterers(const std::vector<Vec3>& truth, const std::vector<Vec3>& est) {
  const std::size_t J = std::min(truth.size(), est.size());
  std::vector<double> best;
  if (J == 0) return best;
  std::vector<int> perm(est.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best_sum = std::numeric_limits<double>::infinity();
  do {
    std::vector<double> e(J);
    double sum = 0;
    for (std::size_t j = 0; j < J; ++j) {
      e[j] = (truth[j] - est[perm[j]]).norm();
      sum += e[j];
    }
    if (sum < best_sum) {
      best_sum = sum;
      best = e;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

StageErrors stage_errors(const Scenario& truth, const EstimateReport& r) {
  StageErrors e;
  e.stage = r.stage;
  e.position_m = (r.p_hat - truth.ue).norm();
  e.clock_m = kSpeedOfLight * std::abs(r.delta_tau_hat - truth.delta_tau);
  e.phase_rad = std::abs(wrap_angle(r.delta_phi_hat - truth.delta_phi_of(0)));
  std::vector<Vec3> sps;
  for (const auto& sc : truth.scatterers) sps.push_back(sc.position);
  if (!r.sp_hats.empty()) e.sp_m = match_scatterers(sps, r.sp_hats);
  return e;
}

MetricsTable run_monte_carlo(const Scenario& s, const std::vector<double>& sdnr_list, int trials,
                             std::uint64_t master_seed, const MonteCarloOptions& opt) {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  MetricsTable table;
  for (double sdnr_db : sdnr_list) {
    const Scenario sc = with_sdnr(s, sdnr_db);
    table.bounds.emplace_back(sdnr_db, evaluate_bounds(sc, fim_options(sc)));

    std::vector<TrialRecord> recs(trials);
    parallel_for(trials, opt.threads, [&](int t) {
      TrialRecord& rec = recs[t];
      rec.trial = t;
      rec.sdnr_db = sdnr_db;
      rec.seed = master_seed;
      try {
        const auto obs = synthesize(sc, master_seed, {static_cast<std::uint64_t>(t), opt.noise_scale});
        const EstimatorContext ctx(sc, obs);
        rec.reports = run_pipeline(ctx, 1);
        for (const auto& r : rec.reports) rec.errors.push_back(stage_errors(sc, r));
      } catch (const NumericalFailure& e) {
        rec.failure = e.what();
      }
    });

    for (Stage st : {Stage::RmlNcp, Stage::Rml, Stage::Nst, Stage::Jml}) {
      StageMetrics m;
      m.stage = st;
      m.sdnr_db = sdnr_db;
      std::vector<double> pos, clk, ph, sp;
      for (const auto& rec : recs) {
        if (!rec.failure.empty()) {
          ++m.failures;
          continue;
        }
        for (const auto& e : rec.errors) {
          if (e.stage != st) continue;
          pos.push_back(e.position_m);
          clk.push_back(e.clock_m);
          ph.push_back(e.phase_rad);
          sp.insert(sp.end(), e.sp_m.begin(), e.sp_m.end());
        }
      }
      m.samples = static_cast<int>(pos.size());
      m.position_raw = rmse(pos);
      m.position_clean = rmse(iqr_clean(pos));
      m.clock_raw = rmse(clk);
      m.clock_clean = rmse(iqr_clean(clk));
      m.phase_raw = rmse(ph);
      m.phase_clean = rmse(iqr_clean(ph));
      m.sp_raw = rmse(sp);
      m.sp_clean = rmse(iqr_clean(sp));
      m.position_ecdf = ecdf(pos);
      table.summary.push_back(std::move(m));
    }
    for (auto& r : recs) table.trials.push_back(std::move(r));
  }
  return table;
}

std::string case_name(MultipathCase c) {
  switch (c) {
    case MultipathCase::LosOnly: return "L--";
    case MultipathCase::LosRp: return "LR-";
    case MultipathCase::LosRpSp: return "LRS";
    case MultipathCase::LosRpSpKnownPhase: return "LRS+known_rp_phase";
  }
  return "?";
}

std::string sync_name(SyncMode m) { return m == SyncMode::CP ? "cp" : "ncp"; }

Scenario apply_case(const Scenario& s, MultipathCase c) {
  Scenario out = s;
  if (c == MultipathCase::LosOnly) {
    out.walls.clear();
    for (auto& st : out.stripes) st.mounted_wall.reset();
  }
  if (c == MultipathCase::LosOnly || c == MultipathCase::LosRp) out.scatterers.clear();
  return out;
}

Scenario apply_sweep_value(const Scenario& s, SweepVariable var, double value) {
  switch (var) {
    case SweepVariable::Bandwidth: return with_bandwidth(s, value);
    case SweepVariable::Aperture: return with_antennas(s, static_cast<int>(std::lround(value)));
    case SweepVariable::Sdnr: return with_sdnr(s, value);
  }
  return s;
}

std::vector<SweepRow> run_bounds_sweep(const Scenario& s, SweepVariable var, const std::vector<double>& values,
                                       const std::vector<MultipathCase>& cases, const std::vector<SyncMode>& modes,
                                       int threads) {
  std::vector<SweepRow> rows;
  for (double v : values)
    for (MultipathCase c : cases)
      for (SyncMode m : modes) rows.push_back({v, c, m, {}});
  parallel_for(static_cast<int>(rows.size()), threads, [&](int i) {
    SweepRow& r = rows[i];
    const Scenario sc = apply_sweep_value(apply_case(s, r.mp), var, r.value);
    FimOptions opt{r.sync, sc.dims, r.mp == MultipathCase::LosRpSpKnownPhase};
    r.bounds = evaluate_bounds(sc, opt);
  });
  return rows;
}

}  // namespace rstripe
