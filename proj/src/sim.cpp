#include "rtls/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace rtls::sim {

using stats::summarize;

std::vector<std::string> SimConfig::validation_errors() const {
  std::vector<std::string> errors;
  auto require = [&errors](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };

  require(world.los_range_m > 0.0, "world.los_range_m must be > 0");
  require(world.nlos_range_m > 0.0, "world.nlos_range_m must be > 0");
  require(world.min_anchor_responses >= 4,
          "world.min_anchor_responses must be >= 4");
  require(world.duration_days >= 1, "world.duration_days must be >= 1");
  require(world.initial_soc >= 0.0 && world.initial_soc <= 1.0,
          "world.initial_soc must be in [0, 1]");
  require(world.noise_sigma_m >= 0.0, "world.noise_sigma_m must be >= 0");

  std::set<std::string> anchor_ids;
  for (const auto& a : world.anchors) {
    if (!anchor_ids.insert(a.id).second)
      errors.push_back("duplicate anchor id: " + a.id);
    if (!a.position.finite())
      errors.push_back("anchor position not finite: " + a.id);
    if (a.slot_index < 1)
      errors.push_back("anchor slot_index must be >= 1: " + a.id);
  }
  std::set<std::string> tag_ids;
  for (const auto& t : world.tags) {
    if (!tag_ids.insert(t.id).second)
      errors.push_back("duplicate tag id: " + t.id);
    if (!t.position.finite())
      errors.push_back("tag position not finite: " + t.id);
    for (std::size_t i = 1; i < t.path.size(); ++i)
      if (t.path[i].minute < t.path[i - 1].minute) {
        errors.push_back("waypoint times not monotone: " + t.id);
        break;
      }
  }

  require(protocol.delta_t_s > 0.0, "protocol.delta_t_s must be > 0");
  require(protocol.delta_t_fix_s >= 0.0, "protocol.delta_t_fix_s must be >= 0");
  require(protocol.n_hat_a >= 1, "protocol.n_hat_a must be >= 1");

  require(battery_capacity_j > 0.0, "energy.battery_capacity_j must be > 0");
  require(battery_voltage_v > 0.0, "energy.battery_voltage_v must be > 0");
  require(costs.active_tag_energy_j >= 0.0 &&
              costs.passive_tag_energy_j >= 0.0 &&
              costs.anchor_base_energy_j >= 0.0 &&
              costs.anchor_slot_energy_j >= 0.0 && costs.sleep_power_w >= 0.0,
          "energy costs must be >= 0");
  require(leak_low_soc > 0.0 && leak_low_soc < 1.0,
          "energy.leak_low_soc must be in (0, 1)");

  require(scheduler.beta1 <= scheduler.beta2,
          "scheduler.beta1 must be <= scheduler.beta2");
  require(scheduler.gamma > 0.0 && scheduler.gamma <= 1.0,
          "scheduler.gamma must be in (0, 1]");
  require(scheduler.k_max >= 1, "scheduler.k_max must be >= 1");
  require(scheduler.constant_rate_k >= 0,
          "scheduler.constant_rate_k must be >= 0");

  require(solver.tolerance > 0.0, "solver.tolerance must be > 0");
  require(solver.max_lm_iterations >= 1,
          "solver.max_lm_iterations must be >= 1");
  require(solver.max_power_iterations >= 1,
          "solver.max_power_iterations must be >= 1");
  return errors;
}

void SimConfig::validate() const {
  const auto errors = validation_errors();
  if (errors.empty()) return;
  std::ostringstream out;
  out << "invalid configuration (" << errors.size() << " problem(s)):";
  for (const auto& e : errors) out << "\n  - " << e;
  throw std::invalid_argument(out.str());
}

std::vector<std::size_t> reachable_anchors(
    const Position& tag_position, const std::vector<AnchorSpec>& anchors,
    const std::vector<Segment2D>& walls, double los_range_m,
    double nlos_range_m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double d = distance(tag_position, anchors[i].position);
    if (d <= nlos_range_m) {
      out.push_back(i);
      continue;
    }
    if (d > los_range_m) continue;
    bool blocked = false;
    for (const auto& wall : walls) {
      if (wall_blocks(wall, tag_position, anchors[i].position)) {
        blocked = true;
        break;
      }
    }
    if (!blocked) out.push_back(i);
  }
  return out;
}

solvers::MultilaterationProblem synthesize_multilateration(
    const std::vector<Position>& responder_positions,
    const Position& active_truth, double noise_sigma_m, SplitMix64& rng) {
  solvers::MultilaterationProblem problem;
  problem.anchors = responder_positions;
  problem.distances_m.reserve(responder_positions.size());
  for (const auto& a : responder_positions) {
    const double noise =
        noise_sigma_m > 0.0 ? noise_sigma_m * rng.gaussian() : 0.0;
    problem.distances_m.push_back(
        std::max(0.0, distance(a, active_truth) + noise));
  }
  return problem;
}

solvers::TdoaProblem synthesize_tdoa(
    const std::vector<Position>& responder_positions,
    const Position& initiator_known, const Position& active_truth,
    const Position& passive_truth, double noise_sigma_m, SplitMix64& rng) {
  solvers::TdoaProblem problem;
  problem.initiator = initiator_known;
  problem.anchors = responder_positions;
  problem.range_differences_m.reserve(responder_positions.size());
  for (const auto& a : responder_positions) {
    const double exact = distance(a, active_truth) +
                         distance(passive_truth, a) -
                         distance(passive_truth, active_truth);
    const double noise =
        noise_sigma_m > 0.0 ? noise_sigma_m * rng.gaussian() : 0.0;
    problem.range_differences_m.push_back(exact + noise);
  }
  return problem;
}

Simulation::Simulation(const SimConfig& config) : config_(config) {
  config_.validate();
  metric_b_ = config_.metric_b < 0.0 ? config_.battery_capacity_j
                                     : config_.metric_b;

  auto anchor_specs = config_.world.anchors;
  std::sort(anchor_specs.begin(), anchor_specs.end(),
            [](const AnchorSpec& a, const AnchorSpec& b) { return a.id < b.id; });
  auto tag_specs = config_.world.tags;
  std::sort(tag_specs.begin(), tag_specs.end(),
            [](const TagSpec& a, const TagSpec& b) { return a.id < b.id; });
  config_.world.anchors = anchor_specs;
  config_.world.tags = tag_specs;

  const double stored0 = config_.world.initial_soc * config_.battery_capacity_j;
  for (const auto& spec : anchor_specs) {
    NodeState node;
    node.id = spec.id;
    node.role = Role::anchor;
    node.battery = energy::BatteryState(config_.battery_capacity_j, stored0);
    node.harvest = profile_for(config_.world.anchor_profile);
    node.position = spec.position;
    anchors_.push_back(std::move(node));
  }
  for (const auto& spec : tag_specs) {
    NodeState node;
    node.id = spec.id;
    node.role = Role::tag;
    node.battery = energy::BatteryState(config_.battery_capacity_j, stored0);
    node.harvest =
        profile_for(spec.profile.empty() ? config_.world.default_tag_profile
                                         : spec.profile);
    node.position = spec.position;
    node.controller.params = config_.scheduler;
    node.controller.k = 0;
    node.controller.last_soc = config_.world.initial_soc;
    tags_.push_back(std::move(node));
  }

  schedules_.assign(tags_.size(), {});
  static_reach_.assign(tags_.size(), {});
  tag_static_.assign(tags_.size(), true);
  for (std::size_t i = 0; i < tag_specs.size(); ++i) {
    tag_static_[i] = tag_specs[i].path.empty();
    if (tag_static_[i]) static_reach_[i] = reachable_from(tags_[i].position);
  }

  for (const auto& n : anchors_) {
    stats_.node_ids.push_back(n.id);
    stats_.node_roles.push_back(Role::anchor);
  }
  for (const auto& n : tags_) {
    stats_.node_ids.push_back(n.id);
    stats_.node_roles.push_back(Role::tag);
    stats_.tag_ids.push_back(n.id);
  }
  const std::size_t n_nodes = anchors_.size() + tags_.size();
  day_start_counters_.assign(n_nodes, Counters{});
  if (config_.world.record_energy_events) {
    stats_.energy_events.assign(n_nodes, {});
    stats_.initial_stored_j.assign(n_nodes, stored0);
  }
  if (config_.world.record_hourly) {
    const auto hours =
        static_cast<std::size_t>(config_.world.duration_days) * 24;
    stats_.hourly_attempts.assign(tags_.size(), std::vector<int>(hours, 0));
    stats_.hourly_skips.assign(tags_.size(), std::vector<int>(hours, 0));
  }
}

const energy::HarvestProfile* Simulation::profile_for(
    const std::string& label) {
  auto it = profiles_.find(label);
  if (it == profiles_.end()) {
    energy::HarvestProfile profile;
    if (energy::is_bundled_profile(label)) {
      profile = energy::bundled_profile(label, config_.lux_model);
    } else {
      profile = energy::ingest_trace(label, config_.lux_model);
    }
    it = profiles_.emplace(label, std::move(profile)).first;
  }
  return &it->second;
}

std::vector<std::size_t> Simulation::reachable_from(const Position& p) const {
  return reachable_anchors(p, config_.world.anchors, config_.world.walls,
                           config_.world.los_range_m,
                           config_.world.nlos_range_m);
}

Position Simulation::tag_position(std::size_t tag_index,
                                  std::int64_t minute) const {
  const auto& spec = config_.world.tags[tag_index];
  if (spec.path.empty()) return spec.position;
  const double m = static_cast<double>(minute);
  if (m <= spec.path.front().minute) return spec.path.front().position;
  if (m >= spec.path.back().minute) return spec.path.back().position;
  for (std::size_t i = 1; i < spec.path.size(); ++i) {
    if (m <= spec.path[i].minute) {
      const auto& a = spec.path[i - 1];
      const auto& b = spec.path[i];
      const double span = b.minute - a.minute;
      const double f = span > 0.0 ? (m - a.minute) / span : 1.0;
      return a.position + f * (b.position - a.position);
    }
  }
  return spec.path.back().position;
}

void Simulation::record_event(std::size_t node_index, EnergyEvent::Kind kind,
                              double amount) {
  if (!config_.world.record_energy_events) return;
  stats_.energy_events[node_index].push_back({kind, amount});
}

void Simulation::deposit_and_idle_drain(NodeState& node,
                                        std::size_t node_index,
                                        std::int64_t minute) {
  const double harvested = node.harvest->sample(minute) * 60.0;
  record_event(node_index, EnergyEvent::Kind::deposit, harvested);
  node.battery.deposit(harvested);

  const double leak_a = energy::self_discharge_current_a(
      node.battery.soc(), config_.leak_full_a, config_.leak_low_a,
      config_.leak_low_soc);
  const double idle =
      (config_.costs.sleep_power_w + leak_a * config_.battery_voltage_v) *
      60.0;
  record_event(node_index, EnergyEvent::Kind::drain, idle);
  node.battery.drain(idle);
}

void Simulation::hourly_update(std::int64_t minute) {
  const std::int64_t hour = minute / 60;
  const auto& params = config_.scheduler;
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    auto& tag = tags_[i];
    int k_effective = params.constant_rate_k;
    if (params.variant != scheduler::Variant::constant_rate) {
      if (minute > 0) {
        const double soc_now = tag.battery.soc();
        double m = scheduler::metric(soc_now, tag.controller.last_soc,
                                     metric_b_, params.gamma);
        if (params.variant == scheduler::Variant::bounded_aimd)
          m = scheduler::metric_bounded(m, tag.controller.k, params);
        tag.controller = scheduler::fsm_step(tag.controller, m);
      }
      tag.controller.last_soc = tag.battery.soc();
      k_effective = tag.controller.k;
    }
    if (k_effective > 60) ++stats_.schedule_clamp_warnings;
    const std::uint64_t seed = mix_seed(
        mix_seed(config_.world.seed, fnv1a(tag.id)),
        static_cast<std::uint64_t>(hour) + 0x5eedULL);
    schedules_[i] = scheduler::schedule_hour(k_effective, seed);
  }
}

ActiveOutcome Simulation::resolve_active(std::size_t tag_index,
                                         std::int64_t minute) {
  auto& tag = tags_[tag_index];
  const std::size_t node_index = anchors_.size() + tag_index;

  record_event(node_index, EnergyEvent::Kind::withdraw,
               config_.costs.active_tag_energy_j);
  tag.battery.withdraw(config_.costs.active_tag_energy_j);
  ++tag.counters.active_attempts;

  const Position tag_pos = tag_position(tag_index, minute);
  const std::vector<std::size_t> reachable =
      tag_static_[tag_index] ? static_reach_[tag_index]
                             : reachable_from(tag_pos);

  ActiveOutcome outcome;
  for (std::size_t ai : reachable) {
    const auto cost = protocol::anchor_event_cost(
        config_.world.anchors[ai].slot_index, config_.costs, config_.protocol);
    record_event(ai, EnergyEvent::Kind::withdraw, cost.energy_j);
    if (anchors_[ai].battery.withdraw(cost.energy_j)) {
      ++anchors_[ai].counters.responses;
      outcome.responders.push_back(ai);
    }
  }
  outcome.responses = static_cast<int>(outcome.responders.size());
  outcome.success =
      outcome.responses >= config_.world.min_anchor_responses;
  if (outcome.success) ++tag.counters.active_success;
  return outcome;
}

void Simulation::step_minute(std::int64_t minute) {
  if (minute % 60 == 0) hourly_update(minute);

  for (std::size_t i = 0; i < anchors_.size(); ++i)
    deposit_and_idle_drain(anchors_[i], i, minute);
  for (std::size_t i = 0; i < tags_.size(); ++i)
    deposit_and_idle_drain(tags_[i], anchors_.size() + i, minute);

  // visit tags in a seeded random order so no declaration position is
  // systematically favored when energy is scarce
  std::vector<std::size_t> order(tags_.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 perm_rng(mix_seed(config_.world.seed,
                               static_cast<std::uint64_t>(minute) + 0xfaceULL));
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto j = i + perm_rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }

  const int minute_of_hour = static_cast<int>(minute % 60);
  const std::int64_t hour = minute / 60;
  for (std::size_t ti : order) {
    auto& tag = tags_[ti];
    const auto& schedule = schedules_[ti];
    if (!std::binary_search(schedule.begin(), schedule.end(), minute_of_hour))
      continue;
    if (!tag.battery.covers(config_.costs.active_tag_energy_j)) {
      ++tag.counters.skipped_low_energy;
      if (config_.world.record_hourly)
        ++stats_.hourly_skips[ti][static_cast<std::size_t>(hour)];
      continue;
    }
    if (config_.world.record_hourly)
      ++stats_.hourly_attempts[ti][static_cast<std::size_t>(hour)];

    const ActiveOutcome outcome = resolve_active(ti, minute);
    if (!outcome.success) continue;

    std::vector<Position> responder_positions;
    responder_positions.reserve(outcome.responders.size());
    for (std::size_t ai : outcome.responders)
      responder_positions.push_back(config_.world.anchors[ai].position);

    const Position active_truth = tag_position(ti, minute);
    Position active_estimate = active_truth;
    bool estimate_valid = false;
    if (config_.world.with_solvers) {
      SplitMix64 noise_rng(mix_seed(
          mix_seed(config_.world.seed, fnv1a(tag.id)),
          static_cast<std::uint64_t>(minute) + 0x0157ULL));
      const auto problem = synthesize_multilateration(
          responder_positions, active_truth, config_.world.noise_sigma_m,
          noise_rng);
      const auto fix = solvers::lm_multilaterate(
          problem, centroid(problem.anchors), config_.solver);
      stats_.fixes.push_back({minute, tag.id, 'a',
                              distance(fix.position, active_truth),
                              fix.converged});
      if (fix.converged) {
        active_estimate = fix.position;
        estimate_valid = true;
      }
    }

    // opportunistic passive localizations on the same exchange
    for (std::size_t tj = 0; tj < tags_.size(); ++tj) {
      if (tj == ti) continue;
      auto& peer = tags_[tj];
      const Position peer_pos = tag_position(tj, minute);
      int observed = 0;
      for (std::size_t ai : outcome.responders) {
        const double d =
            distance(peer_pos, config_.world.anchors[ai].position);
        if (d <= config_.world.nlos_range_m) {
          ++observed;
          continue;
        }
        if (d > config_.world.los_range_m) continue;
        bool blocked = false;
        for (const auto& wall : config_.world.walls) {
          if (wall_blocks(wall, peer_pos, config_.world.anchors[ai].position)) {
            blocked = true;
            break;
          }
        }
        if (!blocked) ++observed;
      }
      if (observed < config_.world.min_anchor_responses) continue;
      if (!peer.battery.covers(config_.costs.passive_tag_energy_j)) continue;
      record_event(anchors_.size() + tj, EnergyEvent::Kind::withdraw,
                   config_.costs.passive_tag_energy_j);
      peer.battery.withdraw(config_.costs.passive_tag_energy_j);
      ++peer.counters.passive;
      ++stats_.passive_recorded_by_exchange;

      if (config_.world.with_solvers) {
        SplitMix64 noise_rng(mix_seed(
            mix_seed(config_.world.seed, fnv1a(peer.id)),
            static_cast<std::uint64_t>(minute) + 0x7d0aULL));
        const auto problem = synthesize_tdoa(
            responder_positions,
            estimate_valid ? active_estimate : active_truth, active_truth,
            peer_pos, config_.world.noise_sigma_m, noise_rng);
        const auto fix = solvers::lm_tdoa(problem, centroid(problem.anchors),
                                          config_.solver);
        stats_.fixes.push_back({minute, peer.id, 'p',
                                distance(fix.position, peer_pos),
                                fix.converged});
      }
    }
  }

  if ((minute + 1) % 60 == 0) {
    const std::int64_t hour_done = minute / 60;
    for (std::size_t i = 0; i < anchors_.size(); ++i)
      stats_.soc_timeline.push_back(
          {hour_done, anchors_[i].id, anchors_[i].battery.soc()});
    for (std::size_t i = 0; i < tags_.size(); ++i)
      stats_.soc_timeline.push_back(
          {hour_done, tags_[i].id, tags_[i].battery.soc()});
  }
}

void Simulation::finish_day(int day) {
  auto snapshot = [&](const NodeState& node, std::size_t node_index) {
    const Counters& start = day_start_counters_[node_index];
    DailyRecord rec;
    rec.day = day;
    rec.node_id = node.id;
    rec.role = node.role;
    rec.active = node.counters.active_success - start.active_success;
    rec.passive = node.counters.passive - start.passive;
    rec.responses = node.counters.responses - start.responses;
    rec.soc_end = node.battery.soc();
    stats_.daily.push_back(rec);
    day_start_counters_[node_index] = node.counters;
  };
  for (std::size_t i = 0; i < anchors_.size(); ++i) snapshot(anchors_[i], i);
  for (std::size_t i = 0; i < tags_.size(); ++i)
    snapshot(tags_[i], anchors_.size() + i);
}

SimStats Simulation::run() {
  const std::int64_t total_minutes =
      static_cast<std::int64_t>(config_.world.duration_days) * 1440;
  for (std::int64_t minute = 0; minute < total_minutes; ++minute) {
    step_minute(minute);
    if ((minute + 1) % 1440 == 0)
      finish_day(static_cast<int>(minute / 1440));
  }

  std::vector<double> tag_daily;
  std::vector<double> anchor_daily;
  for (const auto& rec : stats_.daily) {
    if (rec.role == Role::tag)
      tag_daily.push_back(static_cast<double>(rec.active + rec.passive));
    else
      anchor_daily.push_back(static_cast<double>(rec.responses));
  }
  stats_.tag_localizations_per_day = summarize(std::move(tag_daily));
  stats_.anchor_responses_per_day = summarize(std::move(anchor_daily));

  for (const auto& n : anchors_) stats_.totals.push_back(n.counters);
  for (const auto& n : tags_) stats_.totals.push_back(n.counters);
  if (config_.world.record_energy_events) {
    stats_.final_stored_j.clear();
    for (const auto& n : anchors_)
      stats_.final_stored_j.push_back(n.battery.stored());
    for (const auto& n : tags_)
      stats_.final_stored_j.push_back(n.battery.stored());
  }
  return stats_;
}

}  // namespace rtls::sim
