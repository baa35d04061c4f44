#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtls::scheduler {

enum class Variant { aimd, bounded_aimd, constant_rate };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct AimdParams {
  double beta1 = -1.0;       // below: halve
  double beta2 = 0.0;        // above: increase
  double gamma = 0.5;        // SoC at which the rate always increases
  int k_max = 6;             // bounded variant ceiling, per hour
  Variant variant = Variant::aimd;
  int constant_rate_k = 1;   // attempts per hour for the baseline

  void validate() const {
    if (beta1 > beta2) throw std::invalid_argument("beta1 must be <= beta2");
    if (gamma <= 0.0 || gamma > 1.0)
      throw std::invalid_argument("gamma must be in (0, 1]");
    if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
    if (constant_rate_k < 0)
      throw std::invalid_argument("constant_rate_k must be >= 0");
  }
};

enum class FsmState { halve, hold, increase };

/// Per-tag rate controller: k active localizations per hour, driven once
/// per hour by the battery metric.
struct AimdController {
  int k = 0;
  FsmState fsm_state = FsmState::hold;
  double last_soc = 0.0;
  AimdParams params;
};

/// Battery metric: energy delta over the last hour (scaled by capacity_b)
/// minus a low-battery penalty, with an infinite reward once the state of
/// charge reaches gamma. soc_now is clamped to 1e-6 before the division so
/// the metric is total; IEEE infinity orders above every finite value.
double metric(double soc_now, double soc_prev, double capacity_b,
              double gamma);

/// Rate bound: once k reached k_max the metric is clamped to the middle of
/// the hold band so the controller stops increasing.
double metric_bounded(double m, int k, const AimdParams& params);

/// One hourly transition: the metric selects the next state (ties resolve
/// to hold), then k halves, holds, or increments according to that state.
AimdController fsm_step(const AimdController& controller, double m);

/// k distinct minutes in [0, 60), uniform without replacement and
/// deterministic in the seed. k above 60 is clamped.
std::vector<int> schedule_hour(int k, std::uint64_t rng_seed);

}  // namespace rtls::scheduler
