#include "rtls/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rtls::energy {

BatteryState::BatteryState(double capacity_j, double stored_j)
    : capacity_j_(capacity_j), stored_j_(stored_j) {
  if (capacity_j <= 0.0)
    throw std::invalid_argument("battery capacity must be > 0");
  if (stored_j < 0.0 || stored_j > capacity_j)
    throw std::invalid_argument("stored energy outside [0, capacity]");
}

double BatteryState::deposit(double energy_j) {
  if (energy_j < 0.0) throw std::invalid_argument("deposit must be >= 0");
  const double room = capacity_j_ - stored_j_;
  if (energy_j <= room) {
    stored_j_ += energy_j;
    return 0.0;
  }
  stored_j_ = capacity_j_;
  return energy_j - room;
}

bool BatteryState::withdraw(double energy_j) {
  if (energy_j < 0.0) throw std::invalid_argument("withdraw must be >= 0");
  if (stored_j_ - energy_j > 0.0) {
    stored_j_ -= energy_j;
    return true;
  }
  stored_j_ = 0.0;
  return false;
}

double BatteryState::drain(double energy_j) {
  if (energy_j < 0.0) throw std::invalid_argument("drain must be >= 0");
  const double taken = std::min(energy_j, stored_j_);
  stored_j_ = (energy_j >= stored_j_) ? 0.0 : stored_j_ - energy_j;
  return taken;
}

double self_discharge_current_a(double soc, double full_a, double low_a,
                                double low_soc) {
  if (soc < 0.0 || soc > 1.0)
    throw std::invalid_argument("soc outside [0, 1]");
  if (soc <= low_soc) return low_a;
  return low_a + (full_a - low_a) * (soc - low_soc) / (1.0 - low_soc);
}

namespace {

// Quadratic through three points, lowest-order coefficient first.
std::array<double, 3> quad_through(double x0, double y0, double x1, double y1,
                                   double x2, double y2) {
  const double d0 = (x0 - x1) * (x0 - x2);
  const double d1 = (x1 - x0) * (x1 - x2);
  const double d2 = (x2 - x0) * (x2 - x1);
  const double c2 = y0 / d0 + y1 / d1 + y2 / d2;
  const double c1 = -y0 * (x1 + x2) / d0 - y1 * (x0 + x2) / d1 -
                    y2 * (x0 + x1) / d2;
  const double c0 = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;
  return {c0, c1, c2};
}

double eval_quad(const std::array<double, 3>& c, double x) {
  return c[0] + x * (c[1] + x * c[2]);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

LuxPowerModel LuxPowerModel::bundled_default() {
  // Characterization points of the harvester chain (cell + boost converter
  // into a 3.7 V sink), one quadratic per decade-ish region.
  LuxPowerModel m;
  m.p_low = quad_through(0.2, 0.0, 5.0, 0.5e-6, 15.0, 1.7e-6);
  m.p_mid = quad_through(15.0, 1.7e-6, 400.0, 50.3e-6, 1500.0, 200.0e-6);
  m.p_high = quad_through(1500.0, 200.0e-6, 5000.0, 800.0e-6, 10000.0, 1.9e-3);
  return m;
}

double lux_to_power_w(double lux, const LuxPowerModel& model) {
  if (lux < 0.0) throw std::invalid_argument("lux must be >= 0");
  if (lux < 0.2) return 0.0;
  const double x = std::min(lux, 10000.0);
  const double s1 = sigmoid((x - model.blend_low_lux) / model.blend_low_width);
  const double s2 =
      sigmoid((x - model.blend_high_lux) / model.blend_high_width);
  const double upper = (1.0 - s2) * eval_quad(model.p_mid, x) +
                       s2 * eval_quad(model.p_high, x);
  const double blended = (1.0 - s1) * eval_quad(model.p_low, x) + s1 * upper;
  return std::max(0.0, blended);
}

namespace {

HarvestProfile square_day(const std::string& label,
                          const std::vector<std::pair<int, int>>& spans,
                          const std::vector<double>& lux_levels,
                          const LuxPowerModel& model) {
  HarvestProfile p;
  p.label = label;
  p.samples_w.assign(1440, 0.0);
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const double w = lux_to_power_w(lux_levels[s], model);
    for (int t = spans[s].first; t < spans[s].second; ++t)
      p.samples_w[static_cast<std::size_t>(t)] = w;
  }
  return p;
}

}  // namespace

bool is_bundled_profile(const std::string& label) {
  return label == "dim" || label == "typical" || label == "bright" ||
         label == "none";
}

HarvestProfile bundled_profile(const std::string& label,
                               const LuxPowerModel& model) {
  if (label == "dim") {
    // 12 h at 60 lux: ~0.31 J/day
    return square_day("dim", {{420, 1140}}, {60.0}, model);
  }
  if (label == "typical") {
    // 10 h at 400 lux: ~1.81 J/day
    return square_day("typical", {{480, 1080}}, {400.0}, model);
  }
  if (label == "bright") {
    // window-facing: 5 h of strong light plus shoulders, ~18.5 J/day
    return square_day("bright", {{480, 600}, {600, 900}, {900, 1122}},
                      {1500.0, 5000.0, 1500.0}, model);
  }
  if (label == "none") {
    HarvestProfile p;
    p.label = "none";
    p.samples_w.assign(1440, 0.0);
    return p;
  }
  throw std::invalid_argument("unknown bundled profile: " + label);
}

namespace {

// days since 1970-01-01 for a civil date (valid for all relevant years)
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_iso8601(const std::string& s, double* epoch_s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi,
                  &sec) != 7)
    return false;
  if (sep != 'T' && sep != ' ') return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec >= 61.0)
    return false;
  *epoch_s = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 +
             h * 3600.0 + mi * 60.0 + sec;
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

HarvestProfile ingest_trace(const std::string& path,
                            const LuxPowerModel& model,
                            std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("trace file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::istringstream header(line);
  std::string col0, col1;
  std::getline(header, col0, ',');
  std::getline(header, col1, ',');
  const std::string unit = lower(col1);
  bool is_lux;
  if (unit == "lux")
    is_lux = true;
  else if (unit == "watts" || unit == "w")
    is_lux = false;
  else
    throw std::runtime_error("trace header must be timestamp,lux or "
                             "timestamp,watts (got '" + line + "')");

  struct Sample {
    double t;
    double w;
  };
  std::vector<Sample> samples;
  double prev_t = -std::numeric_limits<double>::infinity();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected two comma-separated fields");
    double t = 0.0;
    if (!parse_iso8601(line.substr(0, comma), &t))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad timestamp '" + line.substr(0, comma) +
                               "'");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(line.substr(comma + 1), &used);
      if (used == 0) throw std::invalid_argument("empty");
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad numeric value '" +
                               line.substr(comma + 1) + "'");
    }
    if (value < 0.0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": negative value");
    if (t < prev_t)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": timestamps not monotone");
    prev_t = t;
    samples.push_back({t, is_lux ? lux_to_power_w(value, model) : value});
  }
  if (samples.empty())
    throw std::runtime_error("trace file has no samples: " + path);

  const double t0 = std::floor(samples.front().t / 60.0) * 60.0;
  const auto n_minutes = static_cast<std::size_t>(
      std::floor((samples.back().t - t0) / 60.0) + 1);

  HarvestProfile profile;
  profile.label = path;
  profile.samples_w.assign(n_minutes, 0.0);
  std::vector<std::uint32_t> counts(n_minutes, 0);
  for (const auto& s : samples) {
    const auto bin = static_cast<std::size_t>((s.t - t0) / 60.0);
    profile.samples_w[bin] += s.w;
    ++counts[bin];
  }
  std::size_t gaps = 0;
  for (std::size_t i = 0; i < n_minutes; ++i) {
    if (counts[i] == 0) {
      ++gaps;  // stays 0 W
    } else {
      profile.samples_w[i] /= static_cast<double>(counts[i]);
    }
  }
  if (gaps > 0 && warnings != nullptr)
    warnings->push_back(path + ": " + std::to_string(gaps) +
                        " minute(s) without samples filled with 0 W");
  return profile;
}

}  // namespace rtls::energy
