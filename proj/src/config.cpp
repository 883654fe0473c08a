#include "psdml/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace psdml {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text, const std::string& origin) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    map.set(section.empty() ? key : section + "." + key, trim(t.substr(eq + 1)));
  }
  return map;
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void ConfigMap::set(const std::string& key, const std::string& value) { values_[key] = value; }

void ConfigMap::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) != 0; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = to_integer(key, it->second);
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError("'" + key + "': value out of range");
  return static_cast<int>(v);
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = to_integer(key, it->second);
  if (v < 0) throw ConfigError("'" + key + "': must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = trim(it->second);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + it->second + "'");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (trim(item).empty()) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(to_double("list", item));
  }
  return out;
}

std::vector<double> ConfigMap::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (trim(it->second).empty()) throw ConfigError("'" + key + "': empty list");
  try {
    return parse_number_list(it->second);
  } catch (const ConfigError& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

void ConfigMap::reject_unknown(const std::set<std::string>& allowed) const {
  std::string bad;
  for (const auto& [k, v] : values_) {
    if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw ConfigError("unknown configuration keys: " + bad);
}

const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys{
      "scenario.n_mics",   "scenario.rank",          "scenario.snapshots",        "scenario.spacing_m",
      "scenario.frequency_hz", "scenario.theta_deg", "scenario.phi_s",            "scenario.phi_r",
      "scenario.p_u",      "scenario.sound_speed",   "scenario.coherence_loading", "scenario.trials",
      "scenario.n_training", "scenario.training_with_reverb", "sweep.param",      "sweep.grid",
      "run.seed",          "run.threads",            "run.output",                "bounds.scenes",
      "bounds.check_fim"};
  return keys;
}

const std::set<std::string>& enhancer_keys() {
  static const std::set<std::string> keys{
      "array.ula.n",        "array.ula.spacing_m", "array.positions",     "array.sound_speed",
      "stft.window_ms",     "stft.overlap",        "stft.sample_rate",    "enhance.variant",
      "enhance.doa_deg",    "enhance.noise_seconds", "enhance.rank",      "enhance.rank_energy",
      "enhance.alpha",      "enhance.beta",        "enhance.gain_floor_db", "enhance.psd_dump",
      "coherence.loading",  "run.threads",         "run.seed",            "run.output"};
  return keys;
}

ScenarioConfig scenario_from_config(const ConfigMap& m) {
  m.reject_unknown(scenario_keys());
  ScenarioConfig c;
  c.n_mics = m.get_int("scenario.n_mics", c.n_mics);
  c.rank = m.get_int("scenario.rank", c.rank);
  c.snapshots = m.get_int("scenario.snapshots", c.snapshots);
  c.spacing = m.get_double("scenario.spacing_m", c.spacing);
  c.frequency = m.get_double("scenario.frequency_hz", c.frequency);
  c.theta = m.get_double("scenario.theta_deg", c.theta / kDeg) * kDeg;
  c.phi_s = m.get_double("scenario.phi_s", c.phi_s);
  c.phi_r = m.get_double("scenario.phi_r", c.phi_r);
  c.p_u = m.get_double("scenario.p_u", c.p_u);
  c.sound_speed = m.get_double("scenario.sound_speed", c.sound_speed);
  c.coherence_loading = m.get_double("scenario.coherence_loading", c.coherence_loading);
  c.trials = m.get_int("scenario.trials", c.trials);
  c.n_training = m.get_int("scenario.n_training", c.n_training);
  c.training_with_reverb = m.get_bool("scenario.training_with_reverb", c.training_with_reverb);
  c.seed = m.get_u64("run.seed", c.seed);
  c.threads = m.get_int("run.threads", c.threads);
  try {
    c.sweep = parse_sweep_param(m.get_string("sweep.param", "none"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.grid = m.get_list("sweep.grid", default_grid(c.sweep));
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

EnhancerConfig enhancer_from_config(const ConfigMap& m) {
  m.reject_unknown(enhancer_keys());
  EnhancerConfig c;
  const double sound_speed = m.get_double("array.sound_speed", kDefaultSoundSpeed);
  c.stft.window_ms = m.get_double("stft.window_ms", c.stft.window_ms);
  c.stft.overlap = m.get_double("stft.overlap", c.stft.overlap);
  c.stft.sample_rate = m.get_double("stft.sample_rate", c.stft.sample_rate);
  if (m.has("array.positions")) {
    if (m.has("array.ula.n") || m.has("array.ula.spacing_m")) {
      throw ConfigError("give either array.positions or array.ula.*, not both");
    }
    c.geometry.sound_speed = sound_speed;
    c.geometry.sample_rate = c.stft.sample_rate;
    std::istringstream in(m.get_string("array.positions", ""));
    std::string item;
    while (std::getline(in, item, ';')) {
      if (trim(item).empty()) continue;
      const auto xyz = parse_number_list(item);
      if (xyz.size() != 3) throw ConfigError("array.positions: each entry needs x,y,z");
      c.geometry.mic_positions.push_back({xyz[0], xyz[1], xyz[2]});
    }
  } else {
    c.geometry = ArrayGeometry::uniform_linear(m.get_int("array.ula.n", 8), m.get_double("array.ula.spacing_m", 0.04),
                                               sound_speed, c.stft.sample_rate);
  }
  c.doa = m.get_double("enhance.doa_deg", 0.0) * kDeg;
  c.noise_seconds = m.get_double("enhance.noise_seconds", c.noise_seconds);
  const std::string rank = m.get_string("enhance.rank", "auto");
  c.rank = rank == "auto" ? -1 : m.get_int("enhance.rank", -1);
  c.rank_energy = m.get_double("enhance.rank_energy", c.rank_energy);
  c.alpha = m.get_double("enhance.alpha", c.alpha);
  c.beta = m.get_double("enhance.beta", c.beta);
  c.gain_floor_db = m.get_double("enhance.gain_floor_db", c.gain_floor_db);
  c.coherence_loading = m.get_double("coherence.loading", c.coherence_loading);
  c.threads = m.get_int("run.threads", c.threads);
  try {
    c.variant = parse_variant(m.get_string("enhance.variant", "nb-dir"));
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

std::string lines(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace

std::string describe(const ScenarioConfig& c) {
  return lines({{"scenario.n_mics", std::to_string(c.n_mics)},
                {"scenario.rank", std::to_string(c.rank)},
                {"scenario.snapshots", std::to_string(c.snapshots)},
                {"scenario.spacing_m", fmt(c.spacing)},
                {"scenario.frequency_hz", fmt(c.frequency)},
                {"scenario.theta_deg", fmt(c.theta / kDeg)},
                {"scenario.phi_s", fmt(c.phi_s)},
                {"scenario.phi_r", fmt(c.phi_r)},
                {"scenario.p_u", fmt(c.p_u)},
                {"scenario.sound_speed", fmt(c.sound_speed)},
                {"scenario.coherence_loading", fmt(c.coherence_loading)},
                {"scenario.trials", std::to_string(c.trials)},
                {"scenario.n_training", std::to_string(c.n_training)},
                {"scenario.training_with_reverb", c.training_with_reverb ? "true" : "false"},
                {"sweep.param", sweep_param_name(c.sweep)},
                {"sweep.grid", join(c.grid)},
                {"run.seed", std::to_string(c.seed)},
                {"run.threads", std::to_string(c.threads)}});
}

std::string describe(const EnhancerConfig& c) {
  std::string positions;
  for (const auto& p : c.geometry.mic_positions) {
    positions += (positions.empty() ? "" : "; ") + fmt(p[0]) + "," + fmt(p[1]) + "," + fmt(p[2]);
  }
  return lines({{"array.positions", positions},
                {"array.sound_speed", fmt(c.geometry.sound_speed)},
                {"stft.window_ms", fmt(c.stft.window_ms)},
                {"stft.overlap", fmt(c.stft.overlap)},
                {"stft.sample_rate", fmt(c.stft.sample_rate)},
                {"enhance.variant", variant_name(c.variant)},
                {"enhance.doa_deg", fmt(c.doa / kDeg)},
                {"enhance.noise_seconds", fmt(c.noise_seconds)},
                {"enhance.rank", c.rank < 0 ? "auto" : std::to_string(c.rank)},
                {"enhance.rank_energy", fmt(c.rank_energy)},
                {"enhance.alpha", fmt(c.alpha)},
                {"enhance.beta", fmt(c.beta)},
                {"enhance.gain_floor_db", fmt(c.gain_floor_db)},
                {"coherence.loading", fmt(c.coherence_loading)},
                {"run.threads", std::to_string(c.threads)}});
}

}  // namespace psdml
