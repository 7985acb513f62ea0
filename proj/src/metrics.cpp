#include <algorithm>
#include <cmath>

#include "rstripe/harness.hpp"

namespace rstripe {

namespace {

double pairwise(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise(v, h) + pairwise(v + h, n - h);
}

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * (s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - lo) * (s[hi] - s[lo]);
}

}  // namespace

double pairwise_sum(const std::vector<double>& v) { return pairwise(v.data(), v.size()); }

double rmse(const std::vector<double>& errors) {
  if (errors.empty()) return std::nan("");
  std::vector<double> sq(errors.size());
  std::transform(errors.begin(), errors.end(), sq.begin(), [](double e) { return e * e; });
  return std::sqrt(pairwise_sum(sq) / sq.size());
}

std::vector<double> iqr_clean(const std::vector<double>& v) {
  if (v.empty()) return v;
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double q1 = quantile_sorted(s, 0.25), q3 = quantile_sorted(s, 0.75);
  const double lo = q1 - 1.5 * (q3 - q1), hi = q3 + 1.5 * (q3 - q1);
  std::vector<double> out;
  for (double x : v)
    if (x >= lo && x <= hi) out.push_back(x);
  return out;
}

std::vector<std::pair<double, double>> ecdf(const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
    out.emplace_back(s[i], static_cast<double>(i + 1) / s.size());
  }
  return out;
}

}  // namespace rstripe
