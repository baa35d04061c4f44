#include "rtls/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtls/rng.hpp"

namespace rtls::scheduler {

Variant variant_from_string(const std::string& name) {
  if (name == "aimd") return Variant::aimd;
  if (name == "bounded_aimd") return Variant::bounded_aimd;
  if (name == "constant_rate") return Variant::constant_rate;
  throw std::invalid_argument("unknown scheduler variant: " + name);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::aimd: return "aimd";
    case Variant::bounded_aimd: return "bounded_aimd";
    case Variant::constant_rate: return "constant_rate";
  }
  return "?";
}

double metric(double soc_now, double soc_prev, double capacity_b,
              double gamma) {
  if (soc_now < 0.0 || soc_now > 1.0 || soc_prev < 0.0 || soc_prev > 1.0)
    throw std::invalid_argument("soc outside [0, 1]");
  const double clamped = std::max(soc_now, 1e-6);
  double m = capacity_b * (soc_now - soc_prev) - (1.0 / clamped - 1.0);
  if (soc_now >= gamma) m = std::numeric_limits<double>::infinity();
  return m;
}

double metric_bounded(double m, int k, const AimdParams& params) {
  if (k < params.k_max) return m;
  return std::min(m, 0.5 * (params.beta1 + params.beta2));
}

AimdController fsm_step(const AimdController& controller, double m) {
  AimdController next = controller;
  const auto& p = controller.params;
  if (m < p.beta1) {
    next.fsm_state = FsmState::halve;
    next.k = controller.k / 2;
  } else if (m > p.beta2) {
    next.fsm_state = FsmState::increase;
    next.k = controller.k + 1;
    if (p.variant == Variant::bounded_aimd) next.k = std::min(next.k, p.k_max);
  } else {
    next.fsm_state = FsmState::hold;
  }
  return next;
}

std::vector<int> schedule_hour(int k, std::uint64_t rng_seed) {
  if (k < 0) throw std::invalid_argument("k must be >= 0");
  const int count = std::min(k, 60);
  std::vector<int> minutes(60);
  std::iota(minutes.begin(), minutes.end(), 0);
  SplitMix64 rng(rng_seed);
  for (int i = 0; i < count; ++i) {
    const auto j =
        i + static_cast<int>(rng.below(static_cast<std::uint64_t>(60 - i)));
    std::swap(minutes[static_cast<std::size_t>(i)],
              minutes[static_cast<std::size_t>(j)]);
  }
  minutes.resize(static_cast<std::size_t>(count));
  std::sort(minutes.begin(), minutes.end());
  return minutes;
}

}  // namespace rtls::scheduler
