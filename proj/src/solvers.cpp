#include "rtls/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace rtls::solvers {

namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kMinAnchorDistance = 1e-9;  // Jacobian-row clamp

Vector3d to_eigen(const Position& p) { return {p.x, p.y, p.z}; }
Position to_position(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

double clamped_distance(const Vector3d& a, const Vector3d& b) {
  return std::max((a - b).norm(), kMinAnchorDistance);
}

/// Residual model evaluated by the LM engine: fills r and J at p.
struct ResidualModel {
  int count = 0;
  std::function<void(const Vector3d&, VectorXd&, MatrixXd&)> eval;
};

ResidualModel range_model(const MultilaterationProblem& problem) {
  ResidualModel model;
  model.count = static_cast<int>(problem.anchors.size());
  model.eval = [&problem](const Vector3d& p, VectorXd& r, MatrixXd& J) {
    for (std::size_t i = 0; i < problem.anchors.size(); ++i) {
      const Vector3d a = to_eigen(problem.anchors[i]);
      const double dist = clamped_distance(p, a);
      r(static_cast<int>(i)) = dist - problem.distances_m[i];
      J.row(static_cast<int>(i)) = (p - a).transpose() / dist;
    }
  };
  return model;
}

ResidualModel range_difference_model(const TdoaProblem& problem) {
  ResidualModel model;
  model.count = static_cast<int>(problem.anchors.size());
  model.eval = [&problem](const Vector3d& p, VectorXd& r, MatrixXd& J) {
    const Vector3d q = to_eigen(problem.initiator);
    const double dq = clamped_distance(p, q);
    const Vector3d uq = (p - q) / dq;
    for (std::size_t i = 0; i < problem.anchors.size(); ++i) {
      const Vector3d a = to_eigen(problem.anchors[i]);
      const double da = clamped_distance(p, a);
      const Vector3d ua = (p - a) / da;
      const double predicted = (a - q).norm() + da - dq;
      r(static_cast<int>(i)) = problem.range_differences_m[i] - predicted;
      J.row(static_cast<int>(i)) = -(ua - uq).transpose();
    }
  };
  return model;
}

double geometry_scale(const std::vector<Position>& anchors) {
  const Position c = rtls::centroid(anchors);
  double acc = 0.0;
  for (const auto& a : anchors) acc += dot(a - c, a - c);
  return std::sqrt(acc / static_cast<double>(anchors.size()) + 1.0);
}

struct LmOutcome {
  Vector3d x;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Levenberg-Marquardt loop shared by both range solvers. The relative
/// tolerance stops the iteration once two consecutive accepted steps fail
/// to improve the objective by more than tol * f; a floor on the objective
/// recognizes numerically exact fits, and a vanishing accepted step
/// recognizes stagnation. Reaching the cutoff always reports non-
/// convergence.
LmOutcome lm_minimize(const ResidualModel& model, const Vector3d& start,
                      const SolverConfig& config, double objective_floor,
                      const detail::LmObserver& observer) {
  VectorXd r(model.count);
  MatrixXd J(model.count, 3);
  VectorXd r_new(model.count);
  MatrixXd J_new(model.count, 3);

  Vector3d x = start;
  model.eval(x, r, J);
  double f = r.squaredNorm();
  double lambda = config.lm_damping_init;
  int low_improve_streak = 0;

  LmOutcome out;
  for (int iter = 1; iter <= config.max_lm_iterations; ++iter) {
    const Matrix3d jtj = J.transpose() * J;
    const Vector3d g = J.transpose() * r;
    const Matrix3d damped = jtj + lambda * Matrix3d::Identity();
    const Vector3d delta = damped.ldlt().solve(-g);

    const Vector3d x_new = x + delta;
    model.eval(x_new, r_new, J_new);
    const double f_new = r_new.squaredNorm();
    const bool accepted = std::isfinite(f_new) && f_new < f;
    if (observer) observer(iter, accepted ? f_new : f, accepted);

    if (accepted) {
      x = x_new;
      r.swap(r_new);
      J.swap(J_new);
      lambda = std::max(lambda * 0.1, 1e-15);
      const double improvement = f - f_new;
      const bool low_improve = improvement <= config.tolerance * f;
      const bool at_floor = f_new <= objective_floor;
      const bool stagnant = delta.norm() <= 1e-12 * (1.0 + x.norm());
      f = f_new;
      low_improve_streak = low_improve ? low_improve_streak + 1 : 0;
      if (iter < config.max_lm_iterations &&
          (at_floor || stagnant || low_improve_streak >= 3)) {
        out.converged = true;
        out.iterations = iter;
        break;
      }
    } else {
      lambda *= 10.0;
    }
    out.iterations = iter;
  }
  out.x = x;
  out.objective = f;
  return out;
}

}  // namespace

void MultilaterationProblem::validate() const {
  if (anchors.size() < 4)
    throw std::invalid_argument("multilateration requires >= 4 anchors");
  if (distances_m.size() != anchors.size())
    throw std::invalid_argument("one distance per anchor required");
  for (const auto& a : anchors)
    if (!a.finite()) throw std::invalid_argument("anchor not finite");
  for (double d : distances_m)
    if (!std::isfinite(d) || d < 0.0)
      throw std::invalid_argument("distances must be finite and >= 0");
}

void TdoaProblem::validate() const {
  if (anchors.size() < 4)
    throw std::invalid_argument("tdoa requires >= 4 anchors");
  if (range_differences_m.size() != anchors.size())
    throw std::invalid_argument("one range difference per anchor required");
  if (!initiator.finite())
    throw std::invalid_argument("initiator not finite");
  for (const auto& a : anchors)
    if (!a.finite()) throw std::invalid_argument("anchor not finite");
  for (double m : range_differences_m)
    if (!std::isfinite(m))
      throw std::invalid_argument("range differences must be finite");
}

double multilateration_objective(const MultilaterationProblem& problem,
                                 const Position& p) {
  double f = 0.0;
  for (std::size_t i = 0; i < problem.anchors.size(); ++i) {
    const double r = distance(p, problem.anchors[i]) - problem.distances_m[i];
    f += r * r;
  }
  return f;
}

double tdoa_objective(const TdoaProblem& problem, const Position& p) {
  double f = 0.0;
  for (std::size_t i = 0; i < problem.anchors.size(); ++i) {
    const double predicted = distance(problem.anchors[i], problem.initiator) +
                             distance(p, problem.anchors[i]) -
                             distance(p, problem.initiator);
    const double r = problem.range_differences_m[i] - predicted;
    f += r * r;
  }
  return f;
}

namespace detail {

// Both iterative solvers run in a frame centered on the anchor centroid:
// large absolute coordinates would otherwise leak rounding into the
// iterates and break rigid-motion equivariance.

SolverResult lm_multilaterate_observed(const MultilaterationProblem& problem,
                                       const Position& initial,
                                       const SolverConfig& config,
                                       const LmObserver& observer) {
  problem.validate();
  if (!initial.finite())
    throw std::invalid_argument("initial guess not finite");
  const Position offset = rtls::centroid(problem.anchors);
  MultilaterationProblem centered = problem;
  for (auto& a : centered.anchors) a = a - offset;
  const double scale = geometry_scale(centered.anchors);
  const double floor = static_cast<double>(problem.anchors.size()) *
                       (1e-11 * scale) * (1e-11 * scale);
  const LmOutcome out = lm_minimize(range_model(centered),
                                    to_eigen(initial - offset), config, floor,
                                    observer);
  return {to_position(out.x) + offset, out.converged, out.iterations,
          std::sqrt(out.objective)};
}

SolverResult lm_tdoa_observed(const TdoaProblem& problem,
                              const Position& initial,
                              const SolverConfig& config,
                              const LmObserver& observer) {
  problem.validate();
  if (!initial.finite())
    throw std::invalid_argument("initial guess not finite");
  const Position offset = rtls::centroid(problem.anchors);
  TdoaProblem centered = problem;
  for (auto& a : centered.anchors) a = a - offset;
  centered.initiator = centered.initiator - offset;
  const double scale = geometry_scale(centered.anchors);
  const double floor = static_cast<double>(problem.anchors.size()) *
                       (1e-11 * scale) * (1e-11 * scale);
  const LmOutcome out = lm_minimize(range_difference_model(centered),
                                    to_eigen(initial - offset), config, floor,
                                    observer);
  return {to_position(out.x) + offset, out.converged, out.iterations,
          std::sqrt(out.objective)};
}

}  // namespace detail

SolverResult lm_multilaterate(const MultilaterationProblem& problem,
                              const Position& initial,
                              const SolverConfig& config) {
  return detail::lm_multilaterate_observed(problem, initial, config, nullptr);
}

SolverResult lm_tdoa(const TdoaProblem& problem, const Position& initial,
                     const SolverConfig& config) {
  return detail::lm_tdoa_observed(problem, initial, config, nullptr);
}

namespace {

// Polynomial helpers for the eigenproblem reduction; coefficients are
// stored lowest order first.
template <std::size_t N, std::size_t M>
std::array<double, N + M - 1> poly_mul(const std::array<double, N>& a,
                                       const std::array<double, M>& b) {
  std::array<double, N + M - 1> out{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) out[i + j] += a[i] * b[j];
  return out;
}

/// Bottom-row companion matrix of a monic polynomial; its eigenvector for
/// eigenvalue t is (1, t, t^2, ...).
Eigen::MatrixXd companion(const std::array<double, 8>& monic) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(7, 7);
  for (int i = 0; i + 1 < 7; ++i) c(i, i + 1) = 1.0;
  for (int j = 0; j < 7; ++j) c(6, j) = -monic[static_cast<std::size_t>(j)];
  return c;
}

}  // namespace

SolverResult larsson_multilaterate(const MultilaterationProblem& problem,
                                   const SolverConfig& config) {
  problem.validate();
  const auto n = static_cast<int>(problem.anchors.size());
  const double nd = static_cast<double>(n);

  // Work in a centered, unit-spread frame so the reduction is numerically
  // balanced and rigid motions of the input only reorder rounding.
  const Position center = rtls::centroid(problem.anchors);
  double spread = 0.0;
  for (const auto& a : problem.anchors)
    spread += dot(a - center, a - center);
  spread = std::sqrt(spread / nd);
  const double s = spread > 1e-12 ? spread : 1.0;

  MatrixXd anchors(n, 3);
  VectorXd c(n);
  for (int i = 0; i < n; ++i) {
    const Vector3d b =
        (to_eigen(problem.anchors[static_cast<std::size_t>(i)]) -
         to_eigen(center)) /
        s;
    anchors.row(i) = b.transpose();
    const double t = problem.distances_m[static_cast<std::size_t>(i)] / s;
    c(i) = b.squaredNorm() - t * t;
  }
  const double sum_c = c.sum();

  // Stationarity of |alpha*1 - 2*A*x + c|^2 under alpha = |x|^2 reduces to
  // a secular equation whose roots are eigenvalues of a 7x7 companion
  // matrix; the global minimizer is its extreme (rightmost) eigenvalue.
  const Matrix3d m3 = 4.0 * anchors.transpose() * anchors;
  Eigen::SelfAdjointEigenSolver<Matrix3d> eig(m3);
  const Vector3d mu = eig.eigenvalues();
  const Matrix3d q = eig.eigenvectors();
  const Vector3d w = 2.0 * (q.transpose() * (anchors.transpose() * c));

  const std::array<std::array<double, 3>, 3> sq = {{
      {mu(0) * mu(0), 2.0 * mu(0), 1.0},
      {mu(1) * mu(1), 2.0 * mu(1), 1.0},
      {mu(2) * mu(2), 2.0 * mu(2), 1.0},
  }};
  const auto q01 = poly_mul(sq[0], sq[1]);
  const auto q02 = poly_mul(sq[0], sq[2]);
  const auto q12 = poly_mul(sq[1], sq[2]);
  const auto q_all = poly_mul(q01, sq[2]);  // degree 6

  std::array<double, 8> p{};  // degree 7
  for (std::size_t k = 0; k < 5; ++k) {
    const double sum_w =
        w(0) * w(0) * q12[k] + w(1) * w(1) * q02[k] + w(2) * w(2) * q01[k];
    p[k] += 2.0 * nd * sum_w;
  }
  // subtract (lambda - 2*sum_c) * q_all
  for (std::size_t k = 0; k < 7; ++k) {
    p[k + 1] -= q_all[k];
    p[k] += 2.0 * sum_c * q_all[k];
  }
  std::array<double, 8> monic{};
  for (std::size_t k = 0; k < 8; ++k) monic[k] = -p[k];  // leading was -1

  const MatrixXd comp = companion(monic);
  // Shift so the wanted rightmost eigenvalue dominates in modulus. The
  // narrow shift converges fastest; when far-left roots still dominate the
  // iteration is restarted within the same budget under a Fujiwara-bound
  // shift that caps every root modulus. A settle anywhere else on the
  // spectrum is rejected by the multiplier range check below.
  const double shift_narrow = mu(2) + 1.0 + std::max(0.0, 2.0 * sum_c);
  double root_bound = 0.0;
  for (int k = 1; k <= 7; ++k)
    root_bound = std::max(
        root_bound, std::pow(std::abs(monic[static_cast<std::size_t>(7 - k)]),
                             1.0 / static_cast<double>(k)));
  const double shift_wide = std::max(shift_narrow, root_bound + 1.0);

  VectorXd v = VectorXd::Ones(7).normalized();
  double rayleigh = std::numeric_limits<double>::quiet_NaN();
  bool settled = false;
  int power_iterations = 0;
  const int stage_a = std::min(300, config.max_power_iterations / 2);
  MatrixXd iterated = comp + shift_narrow * MatrixXd::Identity(7, 7);
  for (int it = 1; it <= config.max_power_iterations; ++it) {
    if (it == stage_a + 1 && shift_wide != shift_narrow)
      iterated = comp + shift_wide * MatrixXd::Identity(7, 7);
    VectorXd next = iterated * v;
    const double norm = next.norm();
    power_iterations = it;
    if (!std::isfinite(norm) || norm == 0.0) break;
    v = next / norm;
    const VectorXd cv = comp * v;
    const double rq = v.dot(cv);
    rayleigh = rq;
    // Settle on the eigenpair residual (robust against transient Rayleigh
    // plateaus), and only within the admissible multiplier range: the
    // wanted eigenvalue is the unique one right of -mu_min, so homing in
    // anywhere else keeps the iteration running until the cutoff.
    const double residual = (cv - rq * v).norm();
    if (it < config.max_power_iterations &&
        residual <= 1e-6 * (1.0 + std::abs(rq)) &&
        rq >= -mu(0) - 1e-8 * (1.0 + mu(2))) {
      settled = true;
      break;
    }
  }

  // Inverse iteration refines the eigenvector; the configured tolerance
  // bounds the relative eigenvector change between sweeps.
  if (std::isfinite(rayleigh)) {
    double shift_jitter = 1e-13 * (1.0 + std::abs(rayleigh));
    for (int sweep = 0; sweep < 60; ++sweep) {
      const MatrixXd shifted =
          comp - (rayleigh + shift_jitter) * MatrixXd::Identity(7, 7);
      VectorXd next = shifted.partialPivLu().solve(v);
      const double norm = next.norm();
      if (!std::isfinite(norm) || norm == 0.0) {
        shift_jitter *= 16.0;
        continue;
      }
      next /= norm;
      if (next.dot(v) < 0.0) next = -next;
      const double change = (next - v).norm();
      v = next;
      rayleigh = v.dot(comp * v);
      if (change <= config.tolerance) break;
    }
  }

  const double lambda = rayleigh;
  Vector3d x_tilde = Vector3d::Zero();
  bool finite_solution = std::isfinite(lambda);
  if (finite_solution) {
    int free_axis = -1;
    for (int j = 0; j < 3; ++j) {
      const double denom = mu(j) + lambda;
      if (std::abs(denom) < 1e-10 * (1.0 + mu(2))) {
        free_axis = j;  // hard case: constraint fixes this component
      } else {
        x_tilde(j) = w(j) / denom;
      }
    }
    if (free_axis >= 0) {
      const double alpha = (lambda - 2.0 * sum_c) / (2.0 * nd);
      const double rest = x_tilde.squaredNorm();
      if (alpha > rest) x_tilde(free_axis) = std::sqrt(alpha - rest);
    }
    finite_solution = x_tilde.allFinite();
  }

  Position estimate = center;
  if (finite_solution) {
    const Vector3d x = q * x_tilde;
    estimate = {center.x + s * x(0), center.y + s * x(1),
                center.z + s * x(2)};
  }

  // The eigen solution minimizes the squared-range form; a short damped
  // Gauss-Newton descent (in the centered frame) moves it onto the
  // stationary point of the range residual objective shared with the
  // iterative solver.
  MultilaterationProblem centered = problem;
  for (auto& a : centered.anchors) a = a - center;
  SolverConfig polish;
  polish.tolerance = 1e-15;
  polish.max_lm_iterations = 40;
  polish.lm_damping_init = 1e-9;
  const double scale = geometry_scale(centered.anchors);
  const double floor = nd * (1e-11 * scale) * (1e-11 * scale);
  const LmOutcome polished = lm_minimize(range_model(centered),
                                         to_eigen(estimate - center), polish,
                                         floor, nullptr);

  // A few plain Gauss-Newton contractions pin the stationary point below
  // the objective's machine-level flatness (accept/reject comparisons stop
  // resolving there).
  Vector3d x = polished.x;
  {
    const ResidualModel model = range_model(centered);
    VectorXd r(n);
    MatrixXd j(n, 3);
    for (int sweep = 0; sweep < 3; ++sweep) {
      model.eval(x, r, j);
      const Matrix3d jtj = j.transpose() * j;
      const Vector3d g = j.transpose() * r;
      const Matrix3d ridged =
          jtj + 1e-12 * jtj.trace() * Matrix3d::Identity();
      const Vector3d delta = ridged.ldlt().solve(-g);
      if (!delta.allFinite() || delta.norm() > 1e-6 * (1.0 + x.norm())) break;
      x += delta;
    }
  }

  SolverResult result;
  result.position = to_position(x) + center;
  result.converged = settled;
  result.iterations = power_iterations;
  result.residual_norm =
      std::sqrt(multilateration_objective(problem, result.position));
  return result;
}

double compute_gdop(const std::vector<Position>& anchors,
                    const Position& tag) {
  if (anchors.size() < 4)
    throw std::invalid_argument("gdop requires >= 4 anchors");
  MatrixXd h(static_cast<int>(anchors.size()), 3);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vector3d d = to_eigen(anchors[i]) - to_eigen(tag);
    const double dist = d.norm();
    if (dist < 1e-12)
      throw std::invalid_argument("tag coincides with an anchor");
    h.row(static_cast<int>(i)) = d.transpose() / dist;
  }
  const Matrix3d hth = h.transpose() * h;
  Eigen::SelfAdjointEigenSolver<Matrix3d> eig(hth);
  const Vector3d ev = eig.eigenvalues();
  if (ev(0) <= 1e-12 * ev(2))
    throw SingularGeometryError("anchor geometry is rank-deficient");
  return std::sqrt(1.0 / ev(0) + 1.0 / ev(1) + 1.0 / ev(2));
}

}  // namespace rtls::solvers
