#include "rstripe/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace rstripe {

namespace detail {
std::string bundled_json(const std::string& name);
}

using nlohmann::json;

std::string bundled_scenario(const std::string& name) { return detail::bundled_json(name); }

namespace {

const json& req(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw SchemaError(path.empty() ? key : path + "." + key, "missing required field");
  return j.at(key);
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<int>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path, "expected a 3-element array");
  return {num(j[0], path + "[0]"), num(j[1], path + "[1]"), num(j[2], path + "[2]")};
}

// Plain metres, or a multiple of the carrier wavelength: "lambda", "lambda/2.1", "lambda*0.25".
double length(const json& j, const std::string& path, double lambda) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw SchemaError(path, "expected a number or a lambda expression");
  static const std::regex re(R"(^\s*lambda\s*(?:([/*])\s*([0-9.eE+-]+))?\s*$)");
  std::smatch m;
  const std::string s = j.get<std::string>();
  if (!std::regex_match(s, m, re)) throw SchemaError(path, "cannot parse length expression '" + s + "'");
  if (!m[1].matched) return lambda;
  double f;
  try {
    f = std::stod(m[2].str());
  } catch (const std::exception&) {
    throw SchemaError(path, "bad factor in '" + s + "'");
  }
  return m[1].str() == "/" ? lambda / f : lambda * f;
}

double angle(const json& obj, const std::string& stem, const std::string& path) {
  if (obj.contains(stem + "_rad")) return num(obj.at(stem + "_rad"), path + "." + stem + "_rad");
  if (obj.contains(stem + "_deg")) return num(obj.at(stem + "_deg"), path + "." + stem + "_deg") * kPi / 180.0;
  throw SchemaError(path + "." + stem + "_rad", "missing required field (or " + stem + "_deg)");
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin, std::string("malformed document: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError(origin, "top level must be an object");
  Scenario s;
  s.name = j.value("name", origin);

  const json& wf = req(j, "waveform", "");
  s.waveform.fc = num(req(wf, "fc_hz", "waveform"), "waveform.fc_hz");
  s.waveform.K = integer(req(wf, "num_subcarriers", "waveform"), "waveform.num_subcarriers");
  if (wf.contains("bandwidth_hz"))
    s.waveform.delta_f = num(wf.at("bandwidth_hz"), "waveform.bandwidth_hz") / s.waveform.K;
  else
    s.waveform.delta_f = num(req(wf, "subcarrier_spacing_hz", "waveform"), "waveform.subcarrier_spacing_hz");
  s.waveform.temperature = wf.contains("temperature_k") ? num(wf.at("temperature_k"), "waveform.temperature_k") : 290.0;
  if (s.waveform.K < 1) throw SemanticError("waveform.num_subcarriers must be at least 1");
  s.waveform.pilots = constant_pilots(s.waveform.K);
  const double lambda = s.waveform.wavelength();

  const json& arr = req(j, "array", "");
  const int default_m = integer(req(arr, "num_antennas", "array"), "array.num_antennas");
  const double default_d = length(req(arr, "spacing_m", "array"), "array.spacing_m", lambda);

  std::vector<std::string> material_names;
  const json& mats = req(j, "materials", "");
  if (!mats.is_object()) throw SchemaError("materials", "expected an object keyed by material name");
  for (const auto& [name, m] : mats.items()) {
    const std::string p = "materials." + name;
    Material mat;
    mat.name = name;
    mat.eps_r = num(req(m, "eps_r", p), p + ".eps_r");
    mat.mu_r = num(req(m, "mu_r", p), p + ".mu_r");
    mat.sigma = num(req(m, "sigma_s_per_m", p), p + ".sigma_s_per_m");
    s.materials.push_back(mat);
    material_names.push_back(name);
  }

  const json& walls = req(j, "walls", "");
  if (!walls.is_array()) throw SchemaError("walls", "expected an array");
  for (std::size_t i = 0; i < walls.size(); ++i) {
    const std::string p = "walls[" + std::to_string(i) + "]";
    Wall w;
    w.point = vec3(req(walls[i], "point_m", p), p + ".point_m");
    const Vec3 n = vec3(req(walls[i], "normal", p), p + ".normal");
    if (n.norm() == 0.0) throw SchemaError(p + ".normal", "zero vector");
    w.normal = n.normalized();
    const std::string mat = req(walls[i], "material", p).get<std::string>();
    const auto it = std::find(material_names.begin(), material_names.end(), mat);
    if (it == material_names.end()) throw SchemaError(p + ".material", "unknown material '" + mat + "'");
    w.material = static_cast<int>(it - material_names.begin());
    s.walls.push_back(w);
  }

  const json& stripes = req(j, "stripes", "");
  if (!stripes.is_array()) throw SchemaError("stripes", "expected an array");
  for (std::size_t i = 0; i < stripes.size(); ++i) {
    const std::string p = "stripes[" + std::to_string(i) + "]";
    const json& sj = stripes[i];
    Stripe st;
    st.phase_center = vec3(req(sj, "phase_center_m", p), p + ".phase_center_m");
    st.azimuth = angle(sj, "azimuth", p);
    st.num_antennas = sj.contains("num_antennas") ? integer(sj.at("num_antennas"), p + ".num_antennas") : default_m;
    st.spacing = sj.contains("spacing_m") ? length(sj.at("spacing_m"), p + ".spacing_m", lambda) : default_d;
    if (sj.contains("mounted_wall") && !sj.at("mounted_wall").is_null())
      st.mounted_wall = integer(sj.at("mounted_wall"), p + ".mounted_wall");
    s.stripes.push_back(st);
  }

  const json& ue = req(j, "ue", "");
  s.ue = vec3(req(ue, "position_m", "ue"), "ue.position_m");
  s.delta_tau = num(req(ue, "clock_offset_s", "ue"), "ue.clock_offset_s");
  {
    const bool deg = ue.contains("phase_offset_deg");
    const std::string key = deg ? "phase_offset_deg" : "phase_offset_rad";
    const json& v = req(ue, key, "ue");
    const double f = deg ? kPi / 180.0 : 1.0;
    s.delta_phi.clear();
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) s.delta_phi.push_back(f * num(v[i], "ue." + key));
    } else {
      s.delta_phi.push_back(f * num(v, "ue." + key));
    }
  }

  if (j.contains("scatterers")) {
    const json& sps = j.at("scatterers");
    for (std::size_t i = 0; i < sps.size(); ++i) {
      const std::string p = "scatterers[" + std::to_string(i) + "]";
      s.scatterers.push_back({vec3(req(sps[i], "position_m", p), p + ".position_m"),
                              num(req(sps[i], "radius_m", p), p + ".radius_m")});
    }
  }
  if (j.contains("nlos_phase_rad")) s.nlos_phase = j.at("nlos_phase_rad").get<std::vector<std::vector<double>>>();

  const json& dmc = req(j, "dmc", "");
  s.dnr_db = num(req(dmc, "dnr_db", "dmc"), "dmc.dnr_db");
  s.beta_d = num(req(dmc, "beta_d", "dmc"), "dmc.beta_d");
  s.tau_d = num(req(dmc, "tau_d", "dmc"), "dmc.tau_d");
  s.sdnr_db = num(req(j, "sdnr_db", ""), "sdnr_db");

  if (j.contains("polarization")) {
    const json& pol = j.at("polarization");
    s.pol_stripe = vec3(req(pol, "stripe", "polarization"), "polarization.stripe");
    s.pol_ue = vec3(req(pol, "ue", "polarization"), "polarization.ue");
  }

  if (j.contains("processing")) {
    const json& pr = j.at("processing");
    if (pr.contains("sync")) {
      const std::string m = pr.at("sync").get<std::string>();
      if (m == "cp") s.sync = SyncMode::CP;
      else if (m == "ncp") s.sync = SyncMode::NCP;
      else throw SchemaError("processing.sync", "expected 'cp' or 'ncp'");
    }
    if (pr.contains("position_dims")) s.dims = integer(pr.at("position_dims"), "processing.position_dims");
  }

  if (j.contains("search")) {
    const json& se = j.at("search");
    s.search.box_min = vec3(req(se, "box_min_m", "search"), "search.box_min_m");
    s.search.box_max = vec3(req(se, "box_max_m", "search"), "search.box_max_m");
    if (se.contains("grid_step_m")) s.search.grid_step = length(se.at("grid_step_m"), "search.grid_step_m", lambda);
    if (se.contains("sp_grid_step_m")) s.search.sp_grid_step = num(se.at("sp_grid_step_m"), "search.sp_grid_step_m");
    if (se.contains("ifft_factor")) s.search.ifft_factor = integer(se.at("ifft_factor"), "search.ifft_factor");
    if (se.contains("max_refine_iterations"))
      s.search.max_refine_iterations = integer(se.at("max_refine_iterations"), "search.max_refine_iterations");
  }

  validate(s);
  const double db = s.sdnr_db;
  return with_sdnr(std::move(s), db);
}

Scenario load_scenario(const std::string& path_or_name) {
  const std::string bundled = bundled_scenario(path_or_name);
  if (!bundled.empty()) return parse_scenario(bundled, path_or_name);
  std::ifstream in(path_or_name);
  if (!in) throw ConfigError("cannot open scenario file '" + path_or_name + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path_or_name);
}

std::vector<double> parse_list(const std::string& spec) {
  std::vector<double> out;
  if (spec.empty()) throw ConfigError("empty value list");
  auto to_d = [&](const std::string& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + t + "' in list '" + spec + "'");
    }
  };
  if (spec.find(':') == std::string::npos) {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_d(tok));
    return out;
  }
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  if (parts.size() != 3) throw ConfigError("range '" + spec + "' must be start:stop:step|linN|logN");
  const double a = to_d(parts[0]), b = to_d(parts[1]);
  const std::string& st = parts[2];
  if (st.rfind("log", 0) == 0 || st.rfind("lin", 0) == 0) {
    const int n = static_cast<int>(to_d(st.substr(3)));
    if (n < 1) throw ConfigError("range '" + spec + "' needs at least one point");
    const bool lg = st[1] == 'o';
    if (lg && (a <= 0 || b <= 0)) throw ConfigError("log range '" + spec + "' needs positive bounds");
    for (int i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      out.push_back(lg ? std::pow(10.0, std::log10(a) + t * (std::log10(b) - std::log10(a))) : a + t * (b - a));
    }
    return out;
  }
  const double step = to_d(st);
  if (step == 0 || (b - a) / step < 0) throw ConfigError("range '" + spec + "' has a step pointing away from stop");
  const int n = static_cast<int>(std::floor((b - a) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) out.push_back(a + i * step);
  return out;
}

namespace {

void csv_bounds_tail(std::ostream& os, const BoundsReport& b, int J) {
  os << ',' << b.peb << ',' << b.ceb << ',' << b.cpeb;
  for (int j = 0; j < J; ++j) {
    os << ',';
    if (j < static_cast<int>(b.sp_peb.size())) os << b.sp_peb[j];
  }
  os << '\n';
}

json bounds_json(const BoundsReport& b) {
  auto fin = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  json j{{"peb_m", fin(b.peb)}, {"ceb_s", fin(b.ceb)}, {"ceb_m", fin(b.ceb_m())}, {"cpeb_rad", fin(b.cpeb)},
         {"condition", fin(b.condition)}, {"singular", b.singular}};
  json sp = json::array();
  for (double v : b.sp_peb) sp.push_back(fin(v));
  j["sp_peb_m"] = sp;
  return j;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

void write_bounds_csv(std::ostream& os, const std::vector<std::pair<double, BoundsReport>>& rows, int J) {
  os << std::setprecision(12) << "sweep_var,peb_m,ceb_s,cpeb_rad";
  for (int j = 1; j <= J; ++j) os << ",sp_peb_m_" << j;
  os << '\n';
  for (const auto& [v, b] : rows) {
    os << v;
    csv_bounds_tail(os, b, J);
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, int J) {
  os << std::setprecision(12) << "sweep_var,case,sync,peb_m,ceb_s,cpeb_rad";
  for (int j = 1; j <= J; ++j) os << ",sp_peb_m_" << j;
  os << '\n';
  for (const auto& r : rows) {
    os << r.value << ',' << case_name(r.mp) << ',' << sync_name(r.sync);
    csv_bounds_tail(os, r.bounds, J);
  }
}

void write_sweep_json(std::ostream& os, const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json j = bounds_json(r.bounds);
    j["sweep_var"] = r.value;
    j["case"] = case_name(r.mp);
    j["sync"] = sync_name(r.sync);
    arr.push_back(j);
  }
  os << arr.dump(2) << '\n';
}

void write_bounds_json(std::ostream& os, const std::vector<std::pair<double, BoundsReport>>& rows) {
  json arr = json::array();
  for (const auto& [v, b] : rows) {
    json j = bounds_json(b);
    j["sweep_var"] = v;
    arr.push_back(j);
  }
  os << arr.dump(2) << '\n';
}

namespace {

json report_json(const TrialRecord& rec, std::size_t k) {
  const EstimateReport& r = rec.reports[k];
  const StageErrors& e = rec.errors[k];
  json sps = json::array();
  for (const auto& q : r.sp_hats) sps.push_back(vec_json(q));
  json amps = json::array();
  for (const auto& g : r.amplitudes) {
    json row = json::array();
    for (Eigen::Index i = 0; i < g.size(); ++i) row.push_back(json::array({g(i).real(), g(i).imag()}));
    amps.push_back(row);
  }
  return json{{"trial", rec.trial},
              {"sdnr_db", rec.sdnr_db},
              {"stage", stage_name(r.stage)},
              {"p_hat_m", vec_json(r.p_hat)},
              {"delta_tau_hat_s", r.delta_tau_hat},
              {"delta_phi_hat_rad", r.delta_phi_hat},
              {"sp_hat_m", sps},
              {"amplitudes", amps},
              {"cost", r.cost},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"note", r.note},
              {"error_position_m", e.position_m},
              {"error_clock_m", e.clock_m},
              {"error_phase_rad", e.phase_rad},
              {"error_sp_m", e.sp_m}};
}

}  // namespace

void write_reports_jsonl(std::ostream& os, const MetricsTable& t) {
  for (const auto& rec : t.trials) {
    if (!rec.failure.empty()) {
      os << json{{"trial", rec.trial}, {"sdnr_db", rec.sdnr_db}, {"stage", "FAILED"}, {"failure", rec.failure}}.dump()
         << '\n';
      continue;
    }
    for (std::size_t k = 0; k < rec.reports.size(); ++k) os << report_json(rec, k).dump() << '\n';
  }
}

void write_reports_csv(std::ostream& os, const MetricsTable& t) {
  os << std::setprecision(12)
     << "trial,sdnr_db,stage,x_m,y_m,z_m,delta_tau_s,delta_phi_rad,cost,iterations,converged,error_position_m,"
        "error_clock_m,error_phase_rad,error_sp_m\n";
  for (const auto& rec : t.trials) {
    if (!rec.failure.empty()) {
      os << rec.trial << ',' << rec.sdnr_db << ",FAILED,,,,,,,,,,,,\n";
      continue;
    }
    for (std::size_t k = 0; k < rec.reports.size(); ++k) {
      const auto& r = rec.reports[k];
      const auto& e = rec.errors[k];
      os << rec.trial << ',' << rec.sdnr_db << ',' << stage_name(r.stage) << ',' << r.p_hat.x() << ',' << r.p_hat.y()
         << ',' << r.p_hat.z() << ',' << r.delta_tau_hat << ',' << r.delta_phi_hat << ',' << r.cost << ','
         << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << e.position_m << ',' << e.clock_m << ','
         << e.phase_rad << ',';
      for (std::size_t j = 0; j < e.sp_m.size(); ++j) os << (j ? ";" : "") << e.sp_m[j];
      os << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const MetricsTable& t) {
  os << std::setprecision(12)
     << "sdnr_db,stage,samples,failures,rmse_position_m,rmse_position_clean_m,rmse_clock_m,rmse_clock_clean_m,"
        "rmse_phase_rad,rmse_phase_clean_rad,rmse_sp_m,rmse_sp_clean_m,peb_m,ceb_m\n";
  for (const auto& m : t.summary) {
    double peb = std::nan(""), ceb = std::nan("");
    for (const auto& [v, b] : t.bounds)
      if (v == m.sdnr_db) {
        peb = b.peb;
        ceb = b.ceb_m();
      }
    os << m.sdnr_db << ',' << stage_name(m.stage) << ',' << m.samples << ',' << m.failures << ',' << m.position_raw
       << ',' << m.position_clean << ',' << m.clock_raw << ',' << m.clock_clean << ',' << m.phase_raw << ','
       << m.phase_clean << ',' << m.sp_raw << ',' << m.sp_clean << ',' << peb << ',' << ceb << '\n';
  }
}

void write_summary_json(std::ostream& os, const MetricsTable& t) {
  json arr = json::array();
  auto num_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& m : t.summary) {
    json e = json::array();
    for (const auto& [x, f] : m.position_ecdf) e.push_back(json::array({x, f}));
    arr.push_back(json{{"sdnr_db", m.sdnr_db},
                       {"stage", stage_name(m.stage)},
                       {"samples", m.samples},
                       {"failures", m.failures},
                       {"rmse_position_m", num_or_null(m.position_raw)},
                       {"rmse_position_clean_m", num_or_null(m.position_clean)},
                       {"rmse_clock_m", num_or_null(m.clock_raw)},
                       {"rmse_clock_clean_m", num_or_null(m.clock_clean)},
                       {"rmse_phase_rad", num_or_null(m.phase_raw)},
                       {"rmse_phase_clean_rad", num_or_null(m.phase_clean)},
                       {"rmse_sp_m", num_or_null(m.sp_raw)},
                       {"rmse_sp_clean_m", num_or_null(m.sp_clean)},
                       {"ecdf_position", e}});
  }
  json b = json::array();
  for (const auto& [v, r] : t.bounds) {
    json j = bounds_json(r);
    j["sdnr_db"] = v;
    b.push_back(j);
  }
  os << json{{"summary", arr}, {"bounds", b}}.dump(2) << '\n';
}

void write_heatmap_csv(std::ostream& os, const HeatmapGrid& g, const MatX& peb) {
  os << std::setprecision(12) << "x_m,y_m,z_m,peb_m\n";
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) os << g.x(i) << ',' << g.y(j) << ',' << g.z << ',' << peb(j, i) << '\n';
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("truncated observation dump");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated observation dump");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

constexpr char kMagic[9] = "RSOBS001";

}  // namespace

void write_observations_binary(std::ostream& os, const std::vector<Observation>& obs) {
  os.write(kMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(obs.size()));
  for (const auto& o : obs) {
    put_u32(os, static_cast<std::uint32_t>(o.Y.rows()));
    put_u32(os, static_cast<std::uint32_t>(o.Y.cols()));
    for (Eigen::Index m = 0; m < o.Y.rows(); ++m)
      for (Eigen::Index k = 0; k < o.Y.cols(); ++k) {
        put_f64(os, o.Y(m, k).real());
        put_f64(os, o.Y(m, k).imag());
      }
  }
}

std::vector<Observation> read_observations_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not an observation dump");
  const std::uint32_t n = get_u32(is);
  std::vector<Observation> out(n);
  for (std::uint32_t s = 0; s < n; ++s) {
    const std::uint32_t M = get_u32(is), K = get_u32(is);
    out[s].stripe = static_cast<int>(s);
    out[s].Y.resize(M, K);
    for (std::uint32_t m = 0; m < M; ++m)
      for (std::uint32_t k = 0; k < K; ++k) {
        const double re = get_f64(is);
        out[s].Y(m, k) = cd(re, get_f64(is));
      }
  }
  return out;
}

void write_observations_csv(std::ostream& os, const std::vector<Observation>& obs) {
  os << std::setprecision(17) << "stripe,m,k,re,im\n";
  for (const auto& o : obs)
    for (Eigen::Index m = 0; m < o.Y.rows(); ++m)
      for (Eigen::Index k = 0; k < o.Y.cols(); ++k)
        os << o.stripe << ',' << m << ',' << k << ',' << o.Y(m, k).real() << ',' << o.Y(m, k).imag() << '\n';
}

}  // namespace rstripe
