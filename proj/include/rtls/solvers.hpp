#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "rtls/geometry.hpp"

namespace rtls::solvers {

/// Geometry degenerate to the point where the requested quantity does not
/// exist (e.g. collinear anchors in a GDOP query).
class SingularGeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anchor positions plus measured ranges to the unknown point.
struct MultilaterationProblem {
  std::vector<Position> anchors;
  std::vector<double> distances_m;

  void validate() const;
};

/// Range-difference problem seen by an eavesdropping tag: the initiator at
/// q polled, anchors answered after their slot delays, and the listener
/// timed the arrivals. Entry i of range_differences_m is the propagation-
/// corrected quantity c*(tau_i - reply_delay_i), which for a listener at p
/// equals |a_i - q| + |p - a_i| - |p - q|.
struct TdoaProblem {
  Position initiator;
  std::vector<Position> anchors;
  std::vector<double> range_differences_m;

  void validate() const;
};

struct SolverConfig {
  double tolerance = 1e-2;      // relative early-stop tolerance
  int max_lm_iterations = 20;   // cutoff marking non-convergence
  int max_power_iterations = 1000;
  double lm_damping_init = 1e-3;
};

struct SolverResult {
  Position position;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Levenberg-Marquardt minimizer of sum_i (|p - a_i| - d_i)^2 from the
/// given starting point. Damping decades by 10 on accepted steps and grows
/// by 10 on rejected ones; convergence is flagged per config.tolerance and
/// never at the iteration cutoff.
SolverResult lm_multilaterate(const MultilaterationProblem& problem,
                              const Position& initial,
                              const SolverConfig& config = {});

/// Globally optimal minimizer of the same range-residual objective. The
/// problem is reduced to an eigenvalue problem whose extreme eigenvalue is
/// found by power iteration (capped at config.max_power_iterations) and
/// whose eigenvector is refined by inverse iteration at config.tolerance.
SolverResult larsson_multilaterate(const MultilaterationProblem& problem,
                                   const SolverConfig& config = {});

/// Levenberg-Marquardt minimizer of the range-difference residuals
/// r_i(p) = m_i - (|a_i - q| + |p - a_i| - |p - q|).
SolverResult lm_tdoa(const TdoaProblem& problem, const Position& initial,
                     const SolverConfig& config = {});

/// Geometric dilution of precision: sqrt(trace((H^T H)^-1)) with one unit
/// row per anchor, position components only (two-way ranging carries no
/// clock unknown). Throws SingularGeometryError on rank-deficient geometry.
double compute_gdop(const std::vector<Position>& anchors, const Position& tag);

/// Objective value sum_i (|p - a_i| - d_i)^2 of a candidate point.
double multilateration_objective(const MultilaterationProblem& problem,
                                 const Position& p);

/// Objective value sum_i r_i(p)^2 of a candidate point.
double tdoa_objective(const TdoaProblem& problem, const Position& p);

namespace detail {

/// Per-iteration observer for tests: (iteration, objective, accepted).
using LmObserver = std::function<void(int, double, bool)>;

SolverResult lm_multilaterate_observed(const MultilaterationProblem& problem,
                                       const Position& initial,
                                       const SolverConfig& config,
                                       const LmObserver& observer);

SolverResult lm_tdoa_observed(const TdoaProblem& problem,
                              const Position& initial,
                              const SolverConfig& config,
                              const LmObserver& observer);

}  // namespace detail

}  // namespace rtls::solvers
