#include "rstripe/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "rstripe/io.hpp"

namespace rstripe {

namespace {

struct Options {
  std::string scenario;
  std::uint64_t seed = 1;
  int trials = 1;
  std::string sdnr;
  std::string bandwidth;
  std::string sync;
  std::string out;
  std::string format = "csv";
  int threads = 1;
  bool known_rp_phases = false;
  // sweep
  std::string var = "bandwidth";
  std::string values;
  std::string summary;
  // heatmap
  int nx = 21, ny = 21;
  double z = -1.0;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

Scenario load(const Options& o, const std::string& fallback) {
  Scenario s = load_scenario(o.scenario.empty() ? fallback : o.scenario);
  if (!o.sync.empty()) {
    if (o.sync == "cp") s.sync = SyncMode::CP;
    else if (o.sync == "ncp") s.sync = SyncMode::NCP;
    else throw ConfigError("--sync must be 'cp' or 'ncp'");
  }
  return s;
}

void check_format(const Options& o) {
  if (o.format != "csv" && o.format != "json") throw ConfigError("--format must be 'csv' or 'json'");
}

int cmd_bounds(const Options& o) {
  check_format(o);
  Scenario s = load(o, "canonical");
  FimOptions opt{s.sync, s.dims, o.known_rp_phases};
  std::vector<std::pair<double, BoundsReport>> rows;
  if (!o.bandwidth.empty()) {
    for (double b : parse_list(o.bandwidth)) rows.emplace_back(b, evaluate_bounds(with_bandwidth(s, b), opt));
  } else if (!o.sdnr.empty()) {
    for (double v : parse_list(o.sdnr)) rows.emplace_back(v, evaluate_bounds(with_sdnr(s, v), opt));
  } else {
    rows.emplace_back(s.waveform.bandwidth(), evaluate_bounds(s, opt));
  }
  Output out(o.out);
  if (o.format == "csv") write_bounds_csv(out.os(), rows, s.num_scatterers());
  else write_bounds_json(out.os(), rows);
  return 0;
}

int cmd_simulate(const Options& o) {
  Scenario s = load(o, "canonical");
  if (!o.sdnr.empty()) {
    const auto v = parse_list(o.sdnr);
    if (v.size() != 1) throw ConfigError("simulate takes a single --sdnr value");
    s = with_sdnr(s, v[0]);
  }
  const auto obs = synthesize(s, o.seed, {0, 1.0});
  Output out(o.out);
  const bool binary = o.out.size() > 4 && o.out.compare(o.out.size() - 4, 4, ".bin") == 0;
  if (binary) {
    write_observations_binary(out.os(), obs);
  } else {
    check_format(o);
    if (o.format == "csv") {
      write_observations_csv(out.os(), obs);
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& ob : obs) {
        nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
        for (Eigen::Index m = 0; m < ob.Y.rows(); ++m) {
          nlohmann::json rr = nlohmann::json::array(), ii = nlohmann::json::array();
          for (Eigen::Index k = 0; k < ob.Y.cols(); ++k) {
            rr.push_back(ob.Y(m, k).real());
            ii.push_back(ob.Y(m, k).imag());
          }
          re.push_back(rr);
          im.push_back(ii);
        }
        arr.push_back({{"stripe", ob.stripe}, {"re", re}, {"im", im}});
      }
      out.os() << arr.dump() << '\n';
    }
  }
  return 0;
}

int cmd_estimate(const Options& o) {
  check_format(o);
  const Scenario s = load(o, "desk");
  const std::vector<double> sdnr = o.sdnr.empty() ? std::vector<double>{s.sdnr_db} : parse_list(o.sdnr);
  const MetricsTable t = run_monte_carlo(s, sdnr, o.trials, o.seed, {o.threads, 1.0});
  Output out(o.out);
  if (o.format == "json") write_reports_jsonl(out.os(), t);
  else write_reports_csv(out.os(), t);
  if (!o.summary.empty()) {
    Output sum(o.summary);
    if (o.format == "json") write_summary_json(sum.os(), t);
    else write_summary_csv(sum.os(), t);
  }
  write_summary_csv(std::cerr, t);
  return 0;
}

int cmd_sweep(const Options& o) {
  check_format(o);
  const Scenario s = load(o, "canonical");
  SweepVariable var;
  std::string spec = o.values;
  if (o.var == "bandwidth") {
    var = SweepVariable::Bandwidth;
    if (spec.empty()) spec = o.bandwidth.empty() ? "1e6:1e9:log25" : o.bandwidth;
  } else if (o.var == "aperture") {
    var = SweepVariable::Aperture;
    if (spec.empty()) spec = "4,8,12,16,24,32";
  } else if (o.var == "sdnr") {
    var = SweepVariable::Sdnr;
    if (spec.empty()) spec = o.sdnr.empty() ? "-10:30:5" : o.sdnr;
  } else {
    throw ConfigError("--var must be bandwidth, aperture or sdnr");
  }
  std::vector<SyncMode> modes{SyncMode::CP, SyncMode::NCP};
  if (!o.sync.empty()) modes = {s.sync};
  const std::vector<MultipathCase> cases{MultipathCase::LosOnly, MultipathCase::LosRp, MultipathCase::LosRpSp,
                                         MultipathCase::LosRpSpKnownPhase};
  const auto rows = run_bounds_sweep(s, var, parse_list(spec), cases, modes, o.threads);
  Output out(o.out);
  if (o.format == "csv") write_sweep_csv(out.os(), rows, s.num_scatterers());
  else write_sweep_json(out.os(), rows);
  return 0;
}

int cmd_heatmap(const Options& o) {
  check_format(o);
  Scenario s = load(o, "canonical");
  if (!o.bandwidth.empty()) {
    const auto v = parse_list(o.bandwidth);
    if (v.size() != 1) throw ConfigError("heatmap takes a single --bandwidth value");
    s = with_bandwidth(s, v[0]);
  }
  if (o.nx < 1 || o.ny < 1) throw ConfigError("--nx and --ny must be positive");
  HeatmapGrid g;
  g.x0 = s.search.box_min.x();
  g.x1 = s.search.box_max.x();
  g.y0 = s.search.box_min.y();
  g.y1 = s.search.box_max.y();
  g.nx = o.nx;
  g.ny = o.ny;
  g.z = o.z >= 0 ? o.z : s.ue.z();
  const MatX peb = peb_heatmap(s, g, {s.sync, s.dims, o.known_rp_phases}, o.threads);
  Output out(o.out);
  if (o.format == "csv") {
    write_heatmap_csv(out.os(), g, peb);
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double v = peb(j, i);
        rows.push_back({{"x_m", g.x(i)}, {"y_m", g.y(j)}, {"z_m", g.z},
                        {"peb_m", std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::isnan(v) ? "nan" : "inf")}});
      }
    out.os() << rows.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int cli(int argc, const char* const* argv) {
  CLI::App app{"Distributed antenna-stripe localization: bounds, synthesis and estimation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario file or bundled name (canonical, desk)");
    sub->add_option("--sync", o.sync, "Phase synchronization: cp or ncp");
    sub->add_option("--out", o.out, "Output file (stdout when omitted)");
    sub->add_option("--format", o.format, "Output format: csv or json");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* bounds = app.add_subcommand("bounds", "Evaluate PEB/CEB/CPEB/SP-PEB");
  common(bounds);
  bounds->add_option("--bandwidth", o.bandwidth, "Bandwidth list in Hz, e.g. 1e6:1e9:log25");
  bounds->add_option("--sdnr", o.sdnr, "SDNR list in dB");
  bounds->add_flag("--known-rp-phases", o.known_rp_phases, "Treat reflection phases as known");

  auto* simulate = app.add_subcommand("simulate", "Synthesize one observation set");
  common(simulate);
  simulate->add_option("--seed", o.seed, "Master seed");
  simulate->add_option("--sdnr", o.sdnr, "SDNR in dB");

  auto* estimate = app.add_subcommand("estimate", "Monte Carlo runs of the estimation pipeline");
  common(estimate);
  estimate->add_option("--seed", o.seed, "Master seed");
  estimate->add_option("--trials", o.trials, "Trials per SDNR point")->check(CLI::PositiveNumber);
  estimate->add_option("--sdnr", o.sdnr, "SDNR list in dB");
  estimate->add_option("--summary", o.summary, "Write the RMSE summary to this file");

  auto* sweep = app.add_subcommand("sweep", "Bound sweeps over multipath cases and sync modes");
  common(sweep);
  sweep->add_option("--var", o.var, "bandwidth, aperture or sdnr");
  sweep->add_option("--values", o.values, "Sweep values");
  sweep->add_option("--bandwidth", o.bandwidth, "Bandwidth list in Hz");
  sweep->add_option("--sdnr", o.sdnr, "SDNR list in dB");

  auto* heatmap = app.add_subcommand("heatmap", "PEB over a horizontal grid of UE positions");
  common(heatmap);
  heatmap->add_option("--bandwidth", o.bandwidth, "Bandwidth in Hz");
  heatmap->add_option("--nx", o.nx, "Grid points along x");
  heatmap->add_option("--ny", o.ny, "Grid points along y");
  heatmap->add_option("--z", o.z, "UE height in m (defaults to the scenario UE height)");
  heatmap->add_flag("--known-rp-phases", o.known_rp_phases, "Treat reflection phases as known");

  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*bounds) return cmd_bounds(o);
    if (*simulate) return cmd_simulate(o);
    if (*estimate) return cmd_estimate(o);
    if (*sweep) return cmd_sweep(o);
    if (*heatmap) return cmd_heatmap(o);
    if (*self) return selftest(std::cout) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int selftest(std::ostream& os) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool()>& fn) {
    bool ok;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      os << "  (" << e.what() << ")\n";
      ok = false;
    }
    os << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  const Scenario s = load_scenario("canonical");

  check("mirror image is an involution", [&] {
    const Vec3 p(1.2, 3.4, 0.7);
    return (mirror_ue(mirror_ue(p, s.walls[1]), s.walls[1]) - p).norm() < 1e-12;
  });
  check("reflection points lie on their walls", [&] {
    for (int n = 0; n < s.num_stripes(); ++n)
      for (const auto& g : enumerate_paths(s, n))
        if (g.kind == PathKind::RP && std::abs((g.via - s.walls[g.index].point).dot(s.walls[g.index].normal)) > 1e-9)
          return false;
    return true;
  });
  check("whitener realizes R^{-1/2}", [&] {
    const DisturbanceCov cov = disturbance_covariance(s, 0);
    const CMat W = cov.whitener_K();
    return (W * cov.R_K() * W.adjoint() - CMat::Identity(cov.K(), cov.K())).norm() < 1e-8;
  });
  check("SDNR round trip", [&] { return std::abs(sdnr(with_sdnr(s, 7.5)) - 7.5) < 1e-10; });
  check("global FIM symmetric positive semidefinite", [&] {
    const GlobalFim g = global_fim(s, fim_options(s));
    Eigen::SelfAdjointEigenSolver<MatX> eig(g.J);
    return (g.J - g.J.transpose()).norm() <= 1e-12 * g.J.norm() &&
           eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().cwiseAbs().maxCoeff();
  });
  check("position Jacobian matches central differences", [&] {
    const FimOptions opt = fim_options(s);
    const ParamLayout L = make_layout(s, opt);
    const MatX T = jacobian(s, 0, opt, L);
    const int nc = s.num_components(0);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Scenario a = s, b = s;
      a.ue(i) += h;
      b.ue(i) -= h;
      const auto pa = enumerate_paths(a, 0), pb = enumerate_paths(b, 0);
      for (int k = 0; k < nc; ++k) {
        const double dth = (pa[k].aoa - pb[k].aoa) / (2 * h);
        const double dtau = (pa[k].pseudo_delay - pb[k].pseudo_delay) / (2 * h);
        if (std::abs(dth - T(i, k)) > 1e-6 || std::abs(dtau - T(i, nc + k)) * kSpeedOfLight > 1e-6) return false;
      }
    }
    return true;
  });
  check("noise-free JML cost vanishes at the truth", [&] {
    const Scenario d = load_scenario("desk");
    const auto obs = synthesize(d, 1, {0, 0.0});
    const EstimatorContext ctx(d, obs);
    std::vector<Vec3> sps;
    for (const auto& sc : d.scatterers) sps.push_back(sc.position);
    double energy = 0;
    for (int n = 0; n < ctx.N(); ++n) energy += ctx.y(n).squaredNorm();
    return jml_cost(ctx, {d.ue, d.delta_tau, d.delta_phi_of(0), sps}) < 1e-12 * energy;
  });
  check("bandwidth thresholds are finite and ordered", [&] {
    const Thresholds t = bw_thresholds(s);
    return std::isfinite(t.b_low) && std::isfinite(t.b_high) && t.b_low < t.b_high;
  });
  os << (failures == 0 ? "selftest: all checks passed" : "selftest: failures present") << '\n';
  return failures;
}

}  // namespace rstripe
