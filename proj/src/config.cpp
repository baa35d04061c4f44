#include "rtls/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rtls/csv.hpp"
#include "rtls/rng.hpp"

namespace rtls::config {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::istringstream in(value);
  std::string part;
  while (std::getline(in, part, ',')) parts.push_back(trim(part));
  return parts;
}

struct IniLine {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line_no = 0;
};

std::vector<IniLine> read_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::vector<IniLine> lines;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    lines.push_back({section, trim(line.substr(0, eq)),
                     trim(line.substr(eq + 1)), line_no});
  }
  return lines;
}

class Assigner {
 public:
  Assigner(const std::string& path, const IniLine& line)
      : path_(path), line_(line) {}

  double number() const {
    char* end = nullptr;
    const double v = std::strtod(line_.value.c_str(), &end);
    if (end == line_.value.c_str() || *end != '\0') fail("a number");
    return v;
  }

  std::int64_t integer() const {
    char* end = nullptr;
    const long long v = std::strtoll(line_.value.c_str(), &end, 10);
    if (end == line_.value.c_str() || *end != '\0') fail("an integer");
    return v;
  }

  bool boolean() const {
    if (line_.value == "true" || line_.value == "1") return true;
    if (line_.value == "false" || line_.value == "0") return false;
    fail("true or false");
    return false;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    throw std::runtime_error(path_ + ":" + std::to_string(line_.line_no) +
                             ": value of '" + line_.key + "' must be " +
                             expected + " (got '" + line_.value + "')");
  }

 private:
  const std::string& path_;
  const IniLine& line_;
};

}  // namespace

sim::SimConfig load_sim_config(const std::string& path) {
  sim::SimConfig cfg;
  std::vector<std::string> problems;

  for (const auto& line : read_ini(path)) {
    Assigner value(path, line);
    const std::string where = line.section + "." + line.key;
    try {
      if (line.section == "world") {
        if (line.key == "seed")
          cfg.world.seed = static_cast<std::uint64_t>(value.integer());
        else if (line.key == "duration_days")
          cfg.world.duration_days = static_cast<int>(value.integer());
        else if (line.key == "los_range_m")
          cfg.world.los_range_m = value.number();
        else if (line.key == "nlos_range_m")
          cfg.world.nlos_range_m = value.number();
        else if (line.key == "min_anchor_responses")
          cfg.world.min_anchor_responses = static_cast<int>(value.integer());
        else if (line.key == "initial_soc")
          cfg.world.initial_soc = value.number();
        else if (line.key == "noise_sigma_m")
          cfg.world.noise_sigma_m = value.number();
        else if (line.key == "default_tag_profile")
          cfg.world.default_tag_profile = line.value;
        else if (line.key == "anchor_profile")
          cfg.world.anchor_profile = line.value;
        else if (line.key == "with_solvers")
          cfg.world.with_solvers = value.boolean();
        else if (line.key == "record_energy_events")
          cfg.world.record_energy_events = value.boolean();
        else if (line.key == "record_hourly")
          cfg.world.record_hourly = value.boolean();
        else if (line.key == "anchor") {
          const auto parts = split_list(line.value);
          if (parts.size() != 5)
            value.fail("id, x, y, z, slot_index");
          sim::AnchorSpec a;
          a.id = parts[0];
          a.position = {std::stod(parts[1]), std::stod(parts[2]),
                        std::stod(parts[3])};
          a.slot_index = std::stoi(parts[4]);
          cfg.world.anchors.push_back(a);
        } else if (line.key == "tag") {
          const auto parts = split_list(line.value);
          if (parts.size() != 4 && parts.size() != 5)
            value.fail("id, x, y, z [, profile]");
          sim::TagSpec t;
          t.id = parts[0];
          t.position = {std::stod(parts[1]), std::stod(parts[2]),
                        std::stod(parts[3])};
          if (parts.size() == 5) t.profile = parts[4];
          cfg.world.tags.push_back(t);
        } else if (line.key == "wall") {
          const auto parts = split_list(line.value);
          if (parts.size() != 4) value.fail("x1, y1, x2, y2");
          cfg.world.walls.push_back({std::stod(parts[0]), std::stod(parts[1]),
                                     std::stod(parts[2]),
                                     std::stod(parts[3])});
        } else {
          problems.push_back("unknown key " + where);
        }
      } else if (line.section == "protocol") {
        if (line.key == "delta_t_fix_s")
          cfg.protocol.delta_t_fix_s = value.number();
        else if (line.key == "delta_t_s")
          cfg.protocol.delta_t_s = value.number();
        else if (line.key == "n_hat_a")
          cfg.protocol.n_hat_a = static_cast<int>(value.integer());
        else
          problems.push_back("unknown key " + where);
      } else if (line.section == "energy") {
        if (line.key == "battery_capacity_j")
          cfg.battery_capacity_j = value.number();
        else if (line.key == "battery_voltage_v")
          cfg.battery_voltage_v = value.number();
        else if (line.key == "active_tag_energy_j")
          cfg.costs.active_tag_energy_j = value.number();
        else if (line.key == "active_tag_duration_s")
          cfg.costs.active_tag_duration_s = value.number();
        else if (line.key == "passive_tag_energy_j")
          cfg.costs.passive_tag_energy_j = value.number();
        else if (line.key == "passive_tag_duration_s")
          cfg.costs.passive_tag_duration_s = value.number();
        else if (line.key == "anchor_base_energy_j")
          cfg.costs.anchor_base_energy_j = value.number();
        else if (line.key == "anchor_slot_energy_j")
          cfg.costs.anchor_slot_energy_j = value.number();
        else if (line.key == "anchor_base_duration_s")
          cfg.costs.anchor_base_duration_s = value.number();
        else if (line.key == "anchor_slot_duration_s")
          cfg.costs.anchor_slot_duration_s = value.number();
        else if (line.key == "sleep_power_w")
          cfg.costs.sleep_power_w = value.number();
        else if (line.key == "leak_full_a")
          cfg.leak_full_a = value.number();
        else if (line.key == "leak_low_a")
          cfg.leak_low_a = value.number();
        else if (line.key == "leak_low_soc")
          cfg.leak_low_soc = value.number();
        else
          problems.push_back("unknown key " + where);
      } else if (line.section == "scheduler") {
        if (line.key == "variant")
          cfg.scheduler.variant = scheduler::variant_from_string(line.value);
        else if (line.key == "beta1")
          cfg.scheduler.beta1 = value.number();
        else if (line.key == "beta2")
          cfg.scheduler.beta2 = value.number();
        else if (line.key == "gamma")
          cfg.scheduler.gamma = value.number();
        else if (line.key == "k_max")
          cfg.scheduler.k_max = static_cast<int>(value.integer());
        else if (line.key == "constant_rate_k")
          cfg.scheduler.constant_rate_k = static_cast<int>(value.integer());
        else if (line.key == "metric_b")
          cfg.metric_b = value.number();
        else
          problems.push_back("unknown key " + where);
      } else if (line.section == "solver") {
        if (line.key == "tolerance")
          cfg.solver.tolerance = value.number();
        else if (line.key == "max_lm_iterations")
          cfg.solver.max_lm_iterations = static_cast<int>(value.integer());
        else if (line.key == "max_power_iterations")
          cfg.solver.max_power_iterations = static_cast<int>(value.integer());
        else if (line.key == "lm_damping_init")
          cfg.solver.lm_damping_init = value.number();
        else
          problems.push_back("unknown key " + where);
      } else if (line.section == "output") {
        if (line.key == "dir")
          cfg.output_dir = line.value;
        else
          problems.push_back("unknown key " + where);
      } else {
        problems.push_back("unknown section [" + line.section + "] at line " +
                           std::to_string(line.line_no));
      }
    } catch (const std::invalid_argument& e) {
      problems.push_back(where + ": " + e.what());
    }
  }

  auto semantic = cfg.validation_errors();
  problems.insert(problems.end(), semantic.begin(), semantic.end());
  if (!problems.empty()) {
    std::ostringstream out;
    out << path << ": invalid configuration (" << problems.size()
        << " problem(s)):";
    for (const auto& p : problems) out << "\n  - " << p;
    throw std::invalid_argument(out.str());
  }
  return cfg;
}

std::vector<scheduler::GridPoint> load_grid(const std::string& path) {
  std::vector<double> beta1, beta2, gamma;
  for (const auto& line : read_ini(path)) {
    if (line.section != "grid")
      throw std::runtime_error(path + ": grid files use a single [grid] "
                               "section");
    std::vector<double>* target = nullptr;
    if (line.key == "beta1") target = &beta1;
    else if (line.key == "beta2") target = &beta2;
    else if (line.key == "gamma") target = &gamma;
    else
      throw std::runtime_error(path + ": unknown grid key " + line.key);
    for (const auto& part : split_list(line.value))
      target->push_back(std::stod(part));
  }
  if (beta1.empty() || beta2.empty() || gamma.empty())
    throw std::runtime_error(path + ": grid needs beta1, beta2 and gamma "
                             "value lists");
  return scheduler::make_grid(beta1, beta2, gamma);
}

std::string canonical_serialization(const sim::SimConfig& config) {
  using csv::format_double;
  std::ostringstream out;
  auto put = [&out](const std::string& key, const std::string& v) {
    out << key << "=" << v << "\n";
  };

  put("energy.anchor_base_duration_s",
      format_double(config.costs.anchor_base_duration_s));
  put("energy.anchor_base_energy_j",
      format_double(config.costs.anchor_base_energy_j));
  put("energy.anchor_slot_duration_s",
      format_double(config.costs.anchor_slot_duration_s));
  put("energy.anchor_slot_energy_j",
      format_double(config.costs.anchor_slot_energy_j));
  put("energy.active_tag_duration_s",
      format_double(config.costs.active_tag_duration_s));
  put("energy.active_tag_energy_j",
      format_double(config.costs.active_tag_energy_j));
  put("energy.battery_capacity_j", format_double(config.battery_capacity_j));
  put("energy.battery_voltage_v", format_double(config.battery_voltage_v));
  put("energy.leak_full_a", format_double(config.leak_full_a));
  put("energy.leak_low_a", format_double(config.leak_low_a));
  put("energy.leak_low_soc", format_double(config.leak_low_soc));
  put("energy.passive_tag_duration_s",
      format_double(config.costs.passive_tag_duration_s));
  put("energy.passive_tag_energy_j",
      format_double(config.costs.passive_tag_energy_j));
  put("energy.sleep_power_w", format_double(config.costs.sleep_power_w));
  put("protocol.delta_t_fix_s", format_double(config.protocol.delta_t_fix_s));
  put("protocol.delta_t_s", format_double(config.protocol.delta_t_s));
  put("protocol.n_hat_a", std::to_string(config.protocol.n_hat_a));
  put("scheduler.beta1", format_double(config.scheduler.beta1));
  put("scheduler.beta2", format_double(config.scheduler.beta2));
  put("scheduler.constant_rate_k",
      std::to_string(config.scheduler.constant_rate_k));
  put("scheduler.gamma", format_double(config.scheduler.gamma));
  put("scheduler.k_max", std::to_string(config.scheduler.k_max));
  put("scheduler.metric_b", format_double(config.metric_b));
  put("scheduler.variant", scheduler::to_string(config.scheduler.variant));
  put("solver.lm_damping_init", format_double(config.solver.lm_damping_init));
  put("solver.max_lm_iterations",
      std::to_string(config.solver.max_lm_iterations));
  put("solver.max_power_iterations",
      std::to_string(config.solver.max_power_iterations));
  put("solver.tolerance", format_double(config.solver.tolerance));

  auto anchors = config.world.anchors;
  std::sort(anchors.begin(), anchors.end(),
            [](const sim::AnchorSpec& a, const sim::AnchorSpec& b) {
              return a.id < b.id;
            });
  for (const auto& a : anchors)
    put("world.anchor." + a.id,
        format_double(a.position.x) + "," + format_double(a.position.y) +
            "," + format_double(a.position.z) + "," +
            std::to_string(a.slot_index));
  put("world.anchor_profile", config.world.anchor_profile);
  put("world.default_tag_profile", config.world.default_tag_profile);
  put("world.duration_days", std::to_string(config.world.duration_days));
  put("world.initial_soc", format_double(config.world.initial_soc));
  put("world.los_range_m", format_double(config.world.los_range_m));
  put("world.min_anchor_responses",
      std::to_string(config.world.min_anchor_responses));
  put("world.nlos_range_m", format_double(config.world.nlos_range_m));
  put("world.noise_sigma_m", format_double(config.world.noise_sigma_m));
  put("world.record_energy_events",
      config.world.record_energy_events ? "true" : "false");
  put("world.record_hourly", config.world.record_hourly ? "true" : "false");
  put("world.seed", std::to_string(config.world.seed));
  auto tags = config.world.tags;
  std::sort(tags.begin(), tags.end(),
            [](const sim::TagSpec& a, const sim::TagSpec& b) {
              return a.id < b.id;
            });
  for (const auto& t : tags)
    put("world.tag." + t.id,
        format_double(t.position.x) + "," + format_double(t.position.y) +
            "," + format_double(t.position.z) + "," + t.profile);
  for (const auto& w : config.world.walls)
    put("world.wall", format_double(w.x1) + "," + format_double(w.y1) + "," +
                          format_double(w.x2) + "," + format_double(w.y2));
  put("world.with_solvers", config.world.with_solvers ? "true" : "false");
  return out.str();
}

std::string config_hash(const sim::SimConfig& config) {
  const std::uint64_t h = fnv1a(canonical_serialization(config));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rtls::config
