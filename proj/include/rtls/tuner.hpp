#pragma once

#include <stdexcept>
#include <vector>

#include "rtls/scheduler.hpp"
#include "rtls/sim.hpp"

namespace rtls::scheduler {

struct GridPoint {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double gamma = 0.5;
};

struct TuneRow {
  GridPoint point;
  bool feasible = false;
  double mean_localizations_per_tag = 0.0;
  double min_final_soc = 0.0;
};

struct TuneResult {
  AimdParams best;
  double objective = 0.0;
  std::vector<TuneRow> rows;  // grid order
};

class TuneInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds the filtered beta1 x beta2 x gamma product (beta1 <= beta2 only).
std::vector<GridPoint> make_grid(const std::vector<double>& beta1,
                                 const std::vector<double>& beta2,
                                 const std::vector<double>& gamma);

/// Runs the scenario once per grid point with every battery initialized at
/// 10 % SoC, discards points where any tag ends below 10 %, and returns the
/// feasible point maximizing the mean localizations per tag (first in grid
/// order on ties). Grid points are evaluated on isolated simulations and
/// may run concurrently.
TuneResult tune(const std::vector<GridPoint>& grid,
                const sim::SimConfig& scenario, bool parallel = true);

}  // namespace rtls::scheduler
