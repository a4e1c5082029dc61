#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace maeguard::harness {

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased
double median(std::span<const double> v);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_greater = 1.0;  // one-sided, H1: mean(a) > mean(b)
};
// Needs at least two values per sample.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};
// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

}  // namespace maeguard::harness
