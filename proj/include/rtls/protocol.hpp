#pragma once

#include <cstdint>
#include <stdexcept>

namespace rtls::protocol {

/// Reply-slot timing of the anchor response schedule. Slot spacing defaults
/// to the measured per-slot duration increment so responses never overlap.
struct ProtocolParams {
  double delta_t_fix_s = 2.0e-3;  // fixed head delay before the first slot
  double delta_t_s = 290.0e-6;    // per-slot spacing
  int n_hat_a = 10;               // slot count before indices wrap

  void validate() const {
    if (delta_t_s <= 0.0) throw std::invalid_argument("delta_t_s must be > 0");
    if (n_hat_a < 1) throw std::invalid_argument("n_hat_a must be >= 1");
  }
};

/// Measured per-event energy and duration of the localization exchange,
/// plus the deep-sleep floor. All values joules / seconds / watts.
struct EnergyCostModel {
  double active_tag_energy_j = 3.22e-3;
  double active_tag_duration_s = 84.52e-3;
  double passive_tag_energy_j = 951.16e-6;
  double passive_tag_duration_s = 34.18e-3;
  double anchor_base_energy_j = 338.30e-6;
  double anchor_slot_energy_j = 15.28e-6;
  double anchor_base_duration_s = 30.55e-3;
  double anchor_slot_duration_s = 290.0e-6;
  double sleep_power_w = 7.84e-6;
};

struct EventCost {
  double energy_j = 0.0;
  double duration_s = 0.0;
};

enum class TagRole { active, passive };

/// Response delay of the anchor in the given reply slot (1-based index).
inline double anchor_reply_delay(int slot_index, const ProtocolParams& params) {
  if (slot_index < 1) throw std::invalid_argument("slot_index must be >= 1");
  const int k = (slot_index - 1) % params.n_hat_a;
  return params.delta_t_fix_s + params.delta_t_s * static_cast<double>(k);
}

/// Messages on air for one exchange with n_anchors responders: one poll
/// plus one response per anchor, with the final broadcast folded in.
inline std::int64_t message_count(std::int64_t n_anchors) {
  if (n_anchors < 1) throw std::invalid_argument("n_anchors must be >= 1");
  return n_anchors + 1;
}

/// Energy and busy time of one anchor response in the given slot.
inline EventCost anchor_event_cost(int slot_index, const EnergyCostModel& model,
                                   const ProtocolParams& params) {
  if (slot_index < 1) throw std::invalid_argument("slot_index must be >= 1");
  const double k = static_cast<double>((slot_index - 1) % params.n_hat_a);
  return {model.anchor_base_energy_j + model.anchor_slot_energy_j * k,
          model.anchor_base_duration_s + model.anchor_slot_duration_s * k};
}

/// Fixed per-localization cost of a tag in the given role.
inline EventCost tag_event_cost(TagRole role, const EnergyCostModel& model) {
  if (role == TagRole::active)
    return {model.active_tag_energy_j, model.active_tag_duration_s};
  return {model.passive_tag_energy_j, model.passive_tag_duration_s};
}

}  // namespace rtls::protocol
