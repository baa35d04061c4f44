#include "rtls/tuner.hpp"

#include <algorithm>
#include <future>
#include <limits>

namespace rtls::scheduler {

namespace {

constexpr double kSocConstraint = 0.10;

TuneRow evaluate_point(const GridPoint& point, sim::SimConfig scenario) {
  scenario.scheduler.beta1 = point.beta1;
  scenario.scheduler.beta2 = point.beta2;
  scenario.scheduler.gamma = point.gamma;
  scenario.world.initial_soc = kSocConstraint;
  scenario.world.with_solvers = false;

  sim::Simulation simulation(scenario);
  const sim::SimStats stats = simulation.run();

  // final-day SoC and total localizations per tag
  double min_final_soc = std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::size_t n_tags = 0;
  const int last_day = scenario.world.duration_days - 1;
  for (const auto& rec : stats.daily) {
    if (rec.role != sim::Role::tag) continue;
    if (rec.day == last_day) {
      min_final_soc = std::min(min_final_soc, rec.soc_end);
      ++n_tags;
    }
    total += static_cast<double>(rec.active + rec.passive);
  }

  TuneRow row;
  row.point = point;
  row.min_final_soc = n_tags > 0 ? min_final_soc : 0.0;
  row.mean_localizations_per_tag =
      n_tags > 0 ? total / static_cast<double>(n_tags) : 0.0;
  row.feasible = n_tags > 0 && row.min_final_soc >= kSocConstraint;
  return row;
}

}  // namespace

std::vector<GridPoint> make_grid(const std::vector<double>& beta1,
                                 const std::vector<double>& beta2,
                                 const std::vector<double>& gamma) {
  std::vector<GridPoint> grid;
  for (double b1 : beta1)
    for (double b2 : beta2) {
      if (b1 > b2) continue;
      for (double g : gamma) grid.push_back({b1, b2, g});
    }
  return grid;
}

TuneResult tune(const std::vector<GridPoint>& grid,
                const sim::SimConfig& scenario, bool parallel) {
  if (grid.empty()) throw std::invalid_argument("tuning grid is empty");
  scenario.validate();
  if (scenario.world.tags.empty())
    throw std::invalid_argument("tuning requires at least one tag");

  TuneResult result;
  result.rows.resize(grid.size());
  if (parallel && grid.size() > 1) {
    std::vector<std::future<TuneRow>> futures;
    futures.reserve(grid.size());
    for (const auto& point : grid)
      futures.push_back(std::async(std::launch::async, evaluate_point, point,
                                   scenario));
    for (std::size_t i = 0; i < grid.size(); ++i)
      result.rows[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i)
      result.rows[i] = evaluate_point(grid[i], scenario);
  }

  std::size_t best = grid.size();
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (!result.rows[i].feasible) continue;
    if (best == grid.size() ||
        result.rows[i].mean_localizations_per_tag >
            result.rows[best].mean_localizations_per_tag)
      best = i;
  }
  if (best == grid.size())
    throw TuneInfeasibleError(
        "no grid point satisfies the 10 % end-of-run SoC constraint");

  result.best = scenario.scheduler;
  result.best.beta1 = grid[best].beta1;
  result.best.beta2 = grid[best].beta2;
  result.best.gamma = grid[best].gamma;
  result.objective = result.rows[best].mean_localizations_per_tag;
  return result;
}

}  // namespace rtls::scheduler
