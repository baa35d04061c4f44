#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rtls::energy {

/// Energy store in joules. 35 mAh at a constant 3.7 V gives the default
/// 466.2 J capacity. Stored energy never leaves [0, capacity].
class BatteryState {
 public:
  explicit BatteryState(double capacity_j = 466.2, double stored_j = 0.0);

  double capacity() const { return capacity_j_; }
  double stored() const { return stored_j_; }
  double soc() const { return stored_j_ / capacity_j_; }

  /// Adds energy, clamping at capacity. Returns the amount discarded.
  double deposit(double energy_j);

  /// Removes energy for a protocol event. Succeeds only if the battery
  /// remains non-empty afterwards; an unsuccessful withdraw still drains
  /// whatever was stored (the node died mid-event).
  bool withdraw(double energy_j);

  /// True when a withdraw of energy_j would succeed.
  bool covers(double energy_j) const { return stored_j_ - energy_j > 0.0; }

  /// Unconditional debit used for sleep power and self-discharge; clamps
  /// at zero. Returns the amount actually drained.
  double drain(double energy_j);

 private:
  double capacity_j_;
  double stored_j_;
};

/// Leakage current as a function of state of charge: 4 uA at full, 1 uA at
/// 30 % SoC, linear in between and held at 1 uA below 30 %.
double self_discharge_current_a(double soc, double full_a = 4.0e-6,
                                double low_a = 1.0e-6, double low_soc = 0.30);

/// Illuminance-to-harvested-power model: three quadratic segments blended
/// with sigmoids at 15 lux and 1500 lux. Output is zero below 0.2 lux and
/// clamps to the 10 klux value above it.
struct LuxPowerModel {
  // quadratic coefficients, lowest order first; input lux, output watts
  std::array<double, 3> p_low{};   // effective on [0.2, 15]
  std::array<double, 3> p_mid{};   // effective on [15, 1500]
  std::array<double, 3> p_high{};  // effective on [1500, 10000]
  double blend_low_lux = 15.0;
  double blend_high_lux = 1500.0;
  double blend_low_width = 2.0;
  double blend_high_width = 120.0;

  /// Coefficients interpolating the characterization points bundled with
  /// the repo (10 cm2 cell feeding a 3.7 V sink through a boost harvester).
  static LuxPowerModel bundled_default();
};

double lux_to_power_w(double lux, const LuxPowerModel& model);

/// Harvested power at one-minute resolution, in watts. Profiles repeat
/// cyclically when a simulation runs past their length.
struct HarvestProfile {
  std::vector<double> samples_w;
  std::string label;

  double sample(std::int64_t minute_index) const {
    if (samples_w.empty()) return 0.0;
    return samples_w[static_cast<std::size_t>(minute_index) % samples_w.size()];
  }
};

/// Synthetic day/night square-wave profiles whose daily energies land in the
/// dim / typical / bright bands (0.31 J, 1.81 J, 18.51 J per day).
HarvestProfile bundled_profile(const std::string& label,
                               const LuxPowerModel& model);

/// True for labels bundled_profile() accepts.
bool is_bundled_profile(const std::string& label);

/// Reads a `timestamp,lux` or `timestamp,watts` CSV trace (header row
/// selects the interpretation), converts lux through the model, and
/// resamples to one-minute means. Minutes without samples are filled with
/// 0 W and reported through `warnings` when provided.
HarvestProfile ingest_trace(const std::string& path,
                            const LuxPowerModel& model,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace rtls::energy
