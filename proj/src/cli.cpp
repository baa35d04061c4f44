#include "rtls/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rtls/config.hpp"
#include "rtls/csv.hpp"
#include "rtls/sim.hpp"
#include "rtls/solvers.hpp"
#include "rtls/stats.hpp"
#include "rtls/tuner.hpp"

namespace fs = std::filesystem;

namespace rtls::cli {

namespace {

using csv::format_double;

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& line : lines) out << line << "\n";
}

std::string role_name(sim::Role role) {
  return role == sim::Role::anchor ? "anchor" : "tag";
}

void write_manifest(const std::string& path, const std::string& config_hash,
                    std::uint64_t seed, const std::string& started,
                    const std::string& finished,
                    const std::vector<std::string>& outputs) {
  nlohmann::json manifest;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = seed;
  manifest["tool_version"] = kVersion;
  manifest["started_at"] = started;
  manifest["finished_at"] = finished;
  manifest["outputs"] = outputs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << manifest.dump(2) << "\n";
}

struct MeasurementProblem {
  std::string id;
  std::string kind;  // twr | tdoa
  solvers::MultilaterationProblem twr;
  solvers::TdoaProblem tdoa;
  std::string error;  // non-empty: unusable problem
};

std::vector<MeasurementProblem> read_measurements(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::vector<std::string> expected = {
      "problem_id", "kind",        "anchor_x",    "anchor_y",   "anchor_z",
      "value_m",    "initiator_x", "initiator_y", "initiator_z"};
  if (table.header != expected)
    throw std::runtime_error(path + ": unexpected measurement header");

  std::vector<MeasurementProblem> problems;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    if (row.size() != expected.size()) continue;
    const std::string& id = row[0];
    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, problems.size());
      MeasurementProblem p;
      p.id = id;
      p.kind = row[1];
      problems.push_back(std::move(p));
      it = index.find(id);
    }
    MeasurementProblem& p = problems[it->second];
    if (!p.error.empty()) continue;
    if (row[1] != p.kind) {
      p.error = "mixed measurement kinds";
      continue;
    }
    try {
      const Position anchor{std::stod(row[2]), std::stod(row[3]),
                            std::stod(row[4])};
      const double value = std::stod(row[5]);
      if (p.kind == "twr") {
        p.twr.anchors.push_back(anchor);
        p.twr.distances_m.push_back(value);
      } else if (p.kind == "tdoa") {
        p.tdoa.anchors.push_back(anchor);
        p.tdoa.range_differences_m.push_back(value);
        p.tdoa.initiator = {std::stod(row[6]), std::stod(row[7]),
                            std::stod(row[8])};
      } else {
        p.error = "unknown kind '" + p.kind + "'";
      }
    } catch (const std::exception&) {
      p.error = "malformed numeric field";
    }
  }
  return problems;
}

}  // namespace

std::string resolve_config_path(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv(kConfigDirEnv)) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

int cmd_solve(const std::string& measurements_path, const std::string& solver,
              double tolerance, const std::string& output_path) {
  if (solver != "larsson" && solver != "lm" && solver != "tdoa") {
    std::cerr << "unknown solver: " << solver << "\n";
    return kExitUsage;
  }

  std::vector<MeasurementProblem> problems;
  try {
    problems = read_measurements(measurements_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }

  solvers::SolverConfig config;
  config.tolerance = tolerance;

  bool any_failed = false;
  std::vector<std::string> lines;
  lines.push_back("problem_id,solver,x,y,z,converged,iterations,residual");
  for (auto& p : problems) {
    const std::string expected_kind = solver == "tdoa" ? "tdoa" : "twr";
    if (p.error.empty() && p.kind != expected_kind)
      p.error = "problem kind '" + p.kind + "' does not match solver";
    solvers::SolverResult result;
    if (p.error.empty()) {
      try {
        if (solver == "lm") {
          result = solvers::lm_multilaterate(p.twr, centroid(p.twr.anchors),
                                             config);
        } else if (solver == "larsson") {
          result = solvers::larsson_multilaterate(p.twr, config);
        } else {
          result = solvers::lm_tdoa(p.tdoa, centroid(p.tdoa.anchors), config);
        }
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
    if (!p.error.empty()) {
      any_failed = true;
      std::cerr << "problem " << p.id << ": " << p.error << "\n";
      lines.push_back(csv::join_row({p.id, solver, "", "", "", "false", "0",
                                     ""}));
      continue;
    }
    lines.push_back(csv::join_row(
        {p.id, solver, format_double(result.position.x),
         format_double(result.position.y), format_double(result.position.z),
         result.converged ? "true" : "false",
         std::to_string(result.iterations),
         format_double(result.residual_norm)}));
  }

  try {
    write_lines(output_path, lines);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }
  return any_failed ? kExitPartial : kExitOk;
}

namespace {

void append_table_rows(std::vector<std::string>& lines,
                       const stats::Summary& tags,
                       const stats::Summary& anchors) {
  lines.push_back(csv::join_row(
      {"avg", format_double(tags.avg), format_double(anchors.avg)}));
  lines.push_back(csv::join_row(
      {"md", format_double(tags.md), format_double(anchors.md)}));
  lines.push_back(csv::join_row(
      {"sigma", format_double(tags.sigma), format_double(anchors.sigma)}));
  lines.push_back(csv::join_row(
      {"min", format_double(tags.min), format_double(anchors.min)}));
  lines.push_back(csv::join_row(
      {"max", format_double(tags.max), format_double(anchors.max)}));
}

/// Per-node statistics over its daily localization counts (tags) or daily
/// responses (anchors); anchors first, then tags, each sorted by id.
std::vector<std::string> node_summary_lines(
    const std::vector<sim::DailyRecord>& daily) {
  std::map<std::string, std::vector<double>> per_anchor, per_tag;
  for (const auto& rec : daily) {
    if (rec.role == sim::Role::tag)
      per_tag[rec.node_id].push_back(
          static_cast<double>(rec.active + rec.passive));
    else
      per_anchor[rec.node_id].push_back(static_cast<double>(rec.responses));
  }
  std::vector<std::string> lines;
  lines.push_back("node_id,role,avg,md,sigma,min,max");
  auto emit = [&lines](const std::map<std::string, std::vector<double>>& group,
                       const std::string& role) {
    for (const auto& [id, values] : group) {
      const auto s = stats::summarize(values);
      lines.push_back(csv::join_row(
          {id, role, format_double(s.avg), format_double(s.md),
           format_double(s.sigma), format_double(s.min),
           format_double(s.max)}));
    }
  };
  emit(per_anchor, "anchor");
  emit(per_tag, "tag");
  return lines;
}

void append_by_day_rows(std::vector<std::string>& lines,
                        const std::vector<sim::DailyRecord>& daily) {
  std::map<std::pair<int, std::string>, std::vector<double>> grouped;
  for (const auto& rec : daily) {
    const double value = rec.role == sim::Role::tag
                             ? static_cast<double>(rec.active + rec.passive)
                             : static_cast<double>(rec.responses);
    grouped[{rec.day, role_name(rec.role)}].push_back(value);
  }
  for (const auto& [key, values] : grouped) {
    const auto s = stats::summarize(values);
    lines.push_back(csv::join_row({std::to_string(key.first), key.second,
                                   format_double(s.avg),
                                   format_double(s.sigma)}));
  }
}

std::vector<std::string> daily_csv_lines(
    const std::vector<sim::DailyRecord>& daily) {
  std::vector<std::string> lines;
  lines.push_back("day,node_id,role,active,passive,responses,soc");
  for (const auto& rec : daily)
    lines.push_back(csv::join_row(
        {std::to_string(rec.day), rec.node_id, role_name(rec.role),
         std::to_string(rec.active), std::to_string(rec.passive),
         std::to_string(rec.responses), format_double(rec.soc_end)}));
  return lines;
}

}  // namespace

int cmd_simulate(const std::string& config_path,
                 const SimulateOverrides& overrides) {
  const std::string started = iso_now();
  sim::SimConfig cfg;
  try {
    cfg = config::load_sim_config(resolve_config_path(config_path));
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }

  if (overrides.has_seed) cfg.world.seed = overrides.seed;
  if (overrides.has_days) cfg.world.duration_days = overrides.days;
  if (!overrides.scheduler.empty()) {
    try {
      cfg.scheduler.variant = scheduler::variant_from_string(
          overrides.scheduler);
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return kExitUsage;
    }
  }
  if (!overrides.output_dir.empty()) cfg.output_dir = overrides.output_dir;
  if (overrides.with_solvers) cfg.world.with_solvers = true;
  if (overrides.has_tags) {
    // replace the tag set with N seeded uniform placements over the anchor
    // bounding box
    if (overrides.tags < 0) {
      std::cerr << "--tags must be >= 0\n";
      return kExitUsage;
    }
    double min_x = 0.0, max_x = 10.0, min_y = 0.0, max_y = 10.0;
    if (!cfg.world.anchors.empty()) {
      min_x = max_x = cfg.world.anchors.front().position.x;
      min_y = max_y = cfg.world.anchors.front().position.y;
      for (const auto& a : cfg.world.anchors) {
        min_x = std::min(min_x, a.position.x);
        max_x = std::max(max_x, a.position.x);
        min_y = std::min(min_y, a.position.y);
        max_y = std::max(max_y, a.position.y);
      }
    }
    SplitMix64 rng(mix_seed(cfg.world.seed, 0x7a65ULL));
    cfg.world.tags.clear();
    for (int i = 0; i < overrides.tags; ++i) {
      sim::TagSpec tag;
      char name[16];
      std::snprintf(name, sizeof(name), "T%03d", i + 1);
      tag.id = name;
      tag.position = {min_x + rng.uniform() * (max_x - min_x),
                      min_y + rng.uniform() * (max_y - min_y), 1.0};
      tag.profile = cfg.world.default_tag_profile;
      cfg.world.tags.push_back(tag);
    }
  }

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  sim::SimStats stats;
  try {
    sim::Simulation simulation(cfg);
    stats = simulation.run();
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (stats.schedule_clamp_warnings > 0)
    std::cerr << "warning: hourly rate clamped to 60 in "
              << stats.schedule_clamp_warnings << " tag-hour(s)\n";

  const fs::path out_dir(cfg.output_dir);
  std::vector<std::string> outputs;
  try {
    fs::create_directories(out_dir);

    write_lines((out_dir / "stats_daily.csv").string(),
                daily_csv_lines(stats.daily));
    outputs.push_back("stats_daily.csv");

    write_lines((out_dir / "stats_summary.csv").string(),
                node_summary_lines(stats.daily));
    outputs.push_back("stats_summary.csv");

    std::vector<std::string> soc;
    soc.push_back("hour,node_id,soc");
    for (const auto& s : stats.soc_timeline)
      soc.push_back(csv::join_row(
          {std::to_string(s.hour), s.node_id, format_double(s.soc)}));
    write_lines((out_dir / "soc_timeline.csv").string(), soc);
    outputs.push_back("soc_timeline.csv");

    std::vector<std::string> by_day;
    by_day.push_back("day,role,avg_localizations,std_localizations");
    append_by_day_rows(by_day, stats.daily);
    write_lines((out_dir / "localizations_timeline.csv").string(), by_day);
    outputs.push_back("localizations_timeline.csv");

    if (cfg.world.with_solvers) {
      std::vector<std::string> fixes;
      fixes.push_back("minute,tag_id,kind,error_m,converged");
      for (const auto& f : stats.fixes)
        fixes.push_back(csv::join_row(
            {std::to_string(f.minute), f.tag_id,
             std::string(1, f.kind), format_double(f.error_m),
             f.converged ? "true" : "false"}));
      write_lines((out_dir / "position_errors.csv").string(), fixes);
      outputs.push_back("position_errors.csv");
    }

    write_manifest((out_dir / "run_manifest.json").string(),
                   config::config_hash(cfg), cfg.world.seed, started,
                   iso_now(), outputs);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }
  return kExitOk;
}

int cmd_tune(const std::string& config_path, const std::string& grid_path) {
  const std::string started = iso_now();
  sim::SimConfig cfg;
  std::vector<scheduler::GridPoint> grid;
  try {
    cfg = config::load_sim_config(resolve_config_path(config_path));
    grid = config::load_grid(resolve_config_path(grid_path));
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }

  scheduler::TuneResult result;
  bool infeasible = false;
  try {
    result = scheduler::tune(grid, cfg);
  } catch (const scheduler::TuneInfeasibleError& e) {
    std::cerr << e.what() << "\n";
    infeasible = true;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    std::vector<std::string> lines;
    lines.push_back(
        "beta1,beta2,gamma,feasible,mean_localizations_per_tag,"
        "min_final_soc");
    if (!infeasible) {
      for (const auto& row : result.rows)
        lines.push_back(csv::join_row(
            {format_double(row.point.beta1), format_double(row.point.beta2),
             format_double(row.point.gamma), row.feasible ? "true" : "false",
             format_double(row.mean_localizations_per_tag),
             format_double(row.min_final_soc)}));
    }
    write_lines((out_dir / "tuner_report.csv").string(), lines);
    write_manifest((out_dir / "run_manifest.json").string(),
                   config::config_hash(cfg), cfg.world.seed, started,
                   iso_now(), {"tuner_report.csv"});
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }
  if (infeasible) return kExitInfeasible;

  std::cout << "selected beta1=" << format_double(result.best.beta1)
            << " beta2=" << format_double(result.best.beta2)
            << " gamma=" << format_double(result.best.gamma)
            << " (mean localizations per tag: "
            << format_double(result.objective) << ")\n";
  return kExitOk;
}

int cmd_report(const std::string& stats_dir) {
  std::vector<fs::path> daily_files;
  try {
    for (const auto& entry : fs::directory_iterator(stats_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("stats_daily", 0) == 0 &&
          entry.path().extension() == ".csv")
        daily_files.push_back(entry.path());
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }
  if (daily_files.empty()) {
    std::cerr << stats_dir << ": no stats_daily*.csv found\n";
    return kExitNoInput;
  }
  std::sort(daily_files.begin(), daily_files.end());

  std::vector<sim::DailyRecord> daily;
  std::map<std::pair<int, std::string>, std::vector<double>> soc_by_day;
  for (const auto& file : daily_files) {
    csv::Table table;
    try {
      table = csv::read_file(file.string());
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return kExitNoInput;
    }
    const std::vector<std::string> expected = {
        "day", "node_id", "role", "active", "passive", "responses", "soc"};
    if (table.header != expected) {
      std::cerr << file.string() << ": unexpected header\n";
      return kExitNoInput;
    }
    for (const auto& row : table.rows) {
      if (row.size() != expected.size()) {
        std::cerr << file.string() << ": malformed row\n";
        return kExitNoInput;
      }
      try {
        sim::DailyRecord rec;
        rec.day = std::stoi(row[0]);
        rec.node_id = row[1];
        rec.role = row[2] == "anchor" ? sim::Role::anchor : sim::Role::tag;
        rec.active = std::stoll(row[3]);
        rec.passive = std::stoll(row[4]);
        rec.responses = std::stoll(row[5]);
        rec.soc_end = std::stod(row[6]);
        soc_by_day[{rec.day, row[2]}].push_back(rec.soc_end);
        daily.push_back(std::move(rec));
      } catch (const std::exception&) {
        std::cerr << file.string() << ": malformed row\n";
        return kExitNoInput;
      }
    }
  }

  std::vector<double> tag_values, anchor_values;
  for (const auto& rec : daily) {
    if (rec.role == sim::Role::tag)
      tag_values.push_back(static_cast<double>(rec.active + rec.passive));
    else
      anchor_values.push_back(static_cast<double>(rec.responses));
  }

  try {
    const fs::path dir(stats_dir);
    write_lines((dir / "report_summary.csv").string(),
                node_summary_lines(daily));

    std::vector<std::string> table;
    table.push_back("metric,tags,anchors");
    append_table_rows(table, stats::summarize(tag_values),
                      stats::summarize(anchor_values));
    write_lines((dir / "report_table.csv").string(), table);

    std::vector<std::string> by_day;
    by_day.push_back("day,role,avg_localizations,std_localizations");
    append_by_day_rows(by_day, daily);
    write_lines((dir / "report_localizations_by_day.csv").string(), by_day);

    std::vector<std::string> soc;
    soc.push_back("day,role,avg_soc,std_soc");
    for (const auto& [key, values] : soc_by_day) {
      const auto s = stats::summarize(values);
      soc.push_back(csv::join_row({std::to_string(key.first), key.second,
                                   format_double(s.avg),
                                   format_double(s.sigma)}));
    }
    write_lines((dir / "report_soc_by_day.csv").string(), soc);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitNoInput;
  }
  return kExitOk;
}

}  // namespace rtls::cli
