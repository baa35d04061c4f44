#pragma once

#include <vector>

namespace rtls::stats {

struct Summary {
  double avg = 0.0, md = 0.0, sigma = 0.0, min = 0.0, max = 0.0;
  bool operator==(const Summary&) const = default;
};

/// avg / median / population sigma / min / max of a sample set.
Summary summarize(std::vector<double> values);

}  // namespace rtls::stats
