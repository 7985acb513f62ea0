#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rstripe/harness.hpp"

namespace rstripe {

// "a,b,c", "start:stop:step", "start:stop:linN" or "start:stop:logN".
std::vector<double> parse_list(const std::string& spec);

// Header: sweep_var,peb_m,ceb_s,cpeb_rad,sp_peb_m_1..sp_peb_m_J
void write_bounds_csv(std::ostream& os, const std::vector<std::pair<double, BoundsReport>>& rows, int J);
// Header: sweep_var,case,sync,peb_m,ceb_s,cpeb_rad,sp_peb_m_1..sp_peb_m_J
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, int J);
void write_sweep_json(std::ostream& os, const std::vector<SweepRow>& rows);
void write_bounds_json(std::ostream& os, const std::vector<std::pair<double, BoundsReport>>& rows);

// One JSON object per line and per (trial, stage).
void write_reports_jsonl(std::ostream& os, const MetricsTable& t);
void write_reports_csv(std::ostream& os, const MetricsTable& t);
void write_summary_csv(std::ostream& os, const MetricsTable& t);
void write_summary_json(std::ostream& os, const MetricsTable& t);

void write_heatmap_csv(std::ostream& os, const HeatmapGrid& g, const MatX& peb);

// Binary dump: magic "RSOBS001", then uint32 N, and per stripe uint32 M,
// uint32 K followed by M*K complex values, row-major, interleaved re/im,
// little-endian float64.
void write_observations_binary(std::ostream& os, const std::vector<Observation>& obs);
std::vector<Observation> read_observations_binary(std::istream& is);
// Header: stripe,m,k,re,im
void write_observations_csv(std::ostream& os, const std::vector<Observation>& obs);

}  // namespace rstripe
