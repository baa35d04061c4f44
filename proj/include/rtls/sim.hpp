#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rtls/energy.hpp"
#include "rtls/geometry.hpp"
#include "rtls/protocol.hpp"
#include "rtls/rng.hpp"
#include "rtls/scheduler.hpp"
#include "rtls/solvers.hpp"
#include "rtls/stats.hpp"

namespace rtls::sim {

struct AnchorSpec {
  std::string id;
  Position position;
  int slot_index = 1;
};

struct Waypoint {
  double minute = 0.0;
  Position position;
};

struct TagSpec {
  std::string id;
  Position position;
  std::vector<Waypoint> path;  // empty: static tag
  std::string profile;         // bundled label or trace file path
};

struct WorldConfig {
  std::vector<AnchorSpec> anchors;
  std::vector<TagSpec> tags;
  std::vector<Segment2D> walls;
  double los_range_m = 20.0;
  double nlos_range_m = 5.0;
  int min_anchor_responses = 5;
  int duration_days = 30;
  std::uint64_t seed = 1;
  double initial_soc = 0.0;
  double noise_sigma_m = 0.10;
  std::string default_tag_profile = "typical";
  std::string anchor_profile = "typical";
  bool with_solvers = false;
  bool record_energy_events = false;
  bool record_hourly = false;
};

/// Full simulation input; the config file maps onto these sections.
struct SimConfig {
  WorldConfig world;
  protocol::ProtocolParams protocol;
  protocol::EnergyCostModel costs;
  double battery_capacity_j = 466.2;
  double battery_voltage_v = 3.7;
  double leak_full_a = 4.0e-6;
  double leak_low_a = 1.0e-6;
  double leak_low_soc = 0.30;
  scheduler::AimdParams scheduler;
  double metric_b = -1.0;  // negative: use battery capacity
  solvers::SolverConfig solver;
  energy::LuxPowerModel lux_model = energy::LuxPowerModel::bundled_default();
  std::string output_dir = "out";

  /// Collects every violation; returned list is empty when valid.
  std::vector<std::string> validation_errors() const;
  void validate() const;  // throws std::invalid_argument listing all
};

enum class Role { anchor, tag };

struct EnergyEvent {
  enum class Kind { deposit, withdraw, drain };
  Kind kind;
  double amount_j;
};

struct Counters {
  std::int64_t active_attempts = 0;
  std::int64_t active_success = 0;
  std::int64_t passive = 0;
  std::int64_t responses = 0;
  std::int64_t skipped_low_energy = 0;
};

struct NodeState {
  std::string id;
  Role role = Role::tag;
  energy::BatteryState battery{466.2, 0.0};
  const energy::HarvestProfile* harvest = nullptr;
  scheduler::AimdController controller;  // tags only
  Position position;
  Counters counters;
};

struct DailyRecord {
  int day = 0;
  std::string node_id;
  Role role = Role::tag;
  std::int64_t active = 0;
  std::int64_t passive = 0;
  std::int64_t responses = 0;
  double soc_end = 0.0;

  bool operator==(const DailyRecord&) const = default;
};

struct SocSample {
  std::int64_t hour = 0;
  std::string node_id;
  double soc = 0.0;

  bool operator==(const SocSample&) const = default;
};

struct FixRecord {
  std::int64_t minute = 0;
  std::string tag_id;
  char kind = 'a';  // 'a' active multilateration, 'p' passive tdoa
  double error_m = 0.0;
  bool converged = false;
};

struct SimStats {
  std::vector<DailyRecord> daily;
  std::vector<SocSample> soc_timeline;

  // summary statistics over node-day samples
  stats::Summary tag_localizations_per_day;
  stats::Summary anchor_responses_per_day;

  std::vector<std::string> node_ids;  // anchors then tags, sorted by id
  std::vector<Role> node_roles;
  std::vector<Counters> totals;       // per node
  std::int64_t passive_recorded_by_exchange = 0;

  // optional captures
  std::vector<std::string> tag_ids;
  std::vector<std::vector<int>> hourly_attempts;  // [tag][hour]
  std::vector<std::vector<int>> hourly_skips;
  std::vector<std::vector<EnergyEvent>> energy_events;  // [node]
  std::vector<double> initial_stored_j;
  std::vector<double> final_stored_j;
  std::vector<FixRecord> fixes;
  std::int64_t schedule_clamp_warnings = 0;

  bool operator==(const SimStats& other) const {
    return daily == other.daily && soc_timeline == other.soc_timeline &&
           tag_localizations_per_day == other.tag_localizations_per_day &&
           anchor_responses_per_day == other.anchor_responses_per_day;
  }
};

/// Indices (into the simulation's sorted anchor list) of anchors reachable
/// from a point: within los_range with no wall crossing the 2D projection,
/// or within nlos_range regardless of walls. Boundaries are inclusive.
std::vector<std::size_t> reachable_anchors(
    const Position& tag_position, const std::vector<AnchorSpec>& anchors,
    const std::vector<Segment2D>& walls, double los_range_m,
    double nlos_range_m);

/// Ranges from the responding anchors to the active tag, with additive
/// Gaussian noise.
solvers::MultilaterationProblem synthesize_multilateration(
    const std::vector<Position>& responder_positions,
    const Position& active_truth, double noise_sigma_m, SplitMix64& rng);

/// Range differences observed by a listener at passive_truth; the
/// initiator field carries whatever position knowledge the listener has
/// (ground truth or the active tag's broadcast estimate).
solvers::TdoaProblem synthesize_tdoa(
    const std::vector<Position>& responder_positions,
    const Position& initiator_known, const Position& active_truth,
    const Position& passive_truth, double noise_sigma_m, SplitMix64& rng);

struct ActiveOutcome {
  bool success = false;
  int responses = 0;
  std::vector<std::size_t> responders;  // anchor indices
};

/// Deterministic minute-stepped world. Node processing order is keyed by
/// node id, and every random stream is derived from (seed, id, time), so
/// results are independent of declaration order.
class Simulation {
 public:
  explicit Simulation(const SimConfig& config);

  /// Executes duration_days * 1440 steps and collects statistics.
  SimStats run();

  /// One simulation minute; exposed for tests.
  void step_minute(std::int64_t minute);

  /// Active localization attempt by the given tag (index into tags()).
  /// Precondition: the tag's battery covers the attempt cost.
  ActiveOutcome resolve_active(std::size_t tag_index, std::int64_t minute);

  const std::vector<NodeState>& anchors() const { return anchors_; }
  const std::vector<NodeState>& tags() const { return tags_; }
  std::vector<NodeState>& mutable_tags() { return tags_; }
  std::vector<NodeState>& mutable_anchors() { return anchors_; }
  const SimConfig& config() const { return config_; }

  std::vector<std::size_t> reachable_from(const Position& p) const;
  Position tag_position(std::size_t tag_index, std::int64_t minute) const;

 private:
  void hourly_update(std::int64_t minute);
  void deposit_and_idle_drain(NodeState& node, std::size_t node_index,
                              std::int64_t minute);
  void record_event(std::size_t node_index, EnergyEvent::Kind kind,
                    double amount);
  void finish_day(int day);
  const energy::HarvestProfile* profile_for(const std::string& label);

  SimConfig config_;
  std::vector<NodeState> anchors_;  // sorted by id
  std::vector<NodeState> tags_;     // sorted by id
  std::map<std::string, energy::HarvestProfile> profiles_;
  std::vector<std::vector<int>> schedules_;       // [tag] minutes of hour
  std::vector<std::vector<std::size_t>> static_reach_;  // [tag] anchor idx
  std::vector<bool> tag_static_;
  std::vector<Counters> day_start_counters_;  // anchors then tags
  SimStats stats_;
  double metric_b_ = 466.2;
};

}  // namespace rtls::sim
