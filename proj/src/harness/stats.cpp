#include "maeguard/harness/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maeguard::harness {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("variance needs two values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double median(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  const double va = variance(a) / static_cast<double>(a.size());
  const double vb = variance(b) / static_cast<double>(b.size());
  WelchResult r;
  const double se = std::sqrt(va + vb);
  const double diff = mean(a) - mean(b);
  if (se == 0.0) {
    r.t = diff > 0 ? INFINITY : (diff < 0 ? -INFINITY : 0.0);
    r.p_greater = diff > 0 ? 0.0 : (diff < 0 ? 1.0 : 0.5);
    return r;
  }
  r.t = diff / se;
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram: need bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  for (double v : values) {
    auto k = static_cast<long>(std::floor((v - lo) / h.bin_width()));
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

}  // namespace maeguard::harness
