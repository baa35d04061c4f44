#include "rtls/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rtls::stats {

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.avg = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.avg) * (v - s.avg);
  s.sigma = std::sqrt(var / n);
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  const std::size_t mid = values.size() / 2;
  s.md = values.size() % 2 == 1 ? values[mid]
                                : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

}  // namespace rtls::stats
