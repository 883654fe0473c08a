// psdml: Monte-Carlo sweeps, bounds grids, multichannel enhancement and
// objective metrics from one binary.
//
// Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numeric failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psdml/config.hpp"
#include "psdml/enhancer.hpp"
#include "psdml/kernels.hpp"
#include "psdml/metrics.hpp"
#include "psdml/simulator.hpp"
#include "psdml/wav.hpp"

using namespace psdml;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4 };

// Flag values stay strings so that the config parser does all validation and
// an explicitly empty value (e.g. --grid "") is still seen.
struct Options {
  std::string config_path;
  std::vector<std::string> assignments;
  std::map<std::string, std::optional<std::string>> flags;  // config key -> value
  std::string out;
};

void add_flag(CLI::App* cmd, Options& o, const std::string& name, const std::string& key, const std::string& help) {
  auto& slot = o.flags[key];
  cmd->add_option_function<std::string>(name, [&slot](const std::string& v) { slot = v; }, help);
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "key=value configuration file");
  cmd->add_option("--set", o.assignments, "override a configuration key (key=value); repeatable");
  add_flag(cmd, o, "--seed", "run.seed", "random seed");
  add_flag(cmd, o, "--threads", "run.threads", "worker threads (0: all cores)");
}

/// File, then --set, then dedicated flags; later wins.
ConfigMap resolve(const Options& o) {
  ConfigMap m = o.config_path.empty() ? ConfigMap{} : ConfigMap::load(o.config_path);
  for (const auto& a : o.assignments) m.set_assignment(a);
  for (const auto& [k, v] : o.flags) {
    if (v) m.set(k, *v);
  }
  return m;
}

/// Output path: --out, else run.output from the config, else stdout.
std::string output_path(const Options& o, const ConfigMap& m) {
  if (!o.out.empty()) return o.out;
  return m.get_string("run.output", "");
}

json config_json(const std::string& described) {
  json j = json::object();
  std::istringstream in(described);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

json base_meta(const std::string& subcommand) {
  json j;
  j["tool"] = "psdml";
  j["version"] = PSDML_VERSION;
  j["subcommand"] = subcommand;
  j["isa"] = std::string(kernels::isa_name(kernels::active().isa));
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  return f;
}

/// CSV to `out` with a JSON sidecar at out + ".meta.json", or CSV to stdout
/// and the metadata to stderr.
void emit(const std::string& out, const std::string& csv, const json& meta) {
  if (out.empty()) {
    std::cout << csv << std::flush;
    std::cerr << meta.dump() << "\n";
    return;
  }
  auto f = open_out(out);
  f << csv;
  f.close();
  if (!f) throw IoError("write failed: " + out);
  auto m = open_out(out + ".meta.json");
  m << meta.dump(2) << "\n";
  m.close();
  if (!m) throw IoError("write failed: " + out + ".meta.json");
}

json warnings_json(const Warnings& w) {
  json j = json::array();
  for (const auto& s : w) j.push_back(s);
  return j;
}

int cmd_simulate(const Options& o) {
  const ConfigMap m = resolve(o);
  const ScenarioConfig c = scenario_from_config(m);
  const auto start = std::chrono::steady_clock::now();
  const SweepResult res = run_sweep(c);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream csv;
  write_sweep_csv(csv, res.rows);

  json meta = base_meta("simulate");
  meta["config"] = config_json(describe(c));
  meta["seed"] = c.seed;
  meta["max_equivalence_diff"] = res.max_equivalence_diff;
  meta["crb_convention"] =
      "crb_phiR is exact; crb_phiS and crb_psi_mean are normalized bounds averaged over the scenes of the trials";
  meta["warnings"] = warnings_json(res.warnings);
  meta["elapsed_seconds"] = elapsed;
  emit(output_path(o, m), csv.str(), meta);
  return kOk;
}

int cmd_bounds(const Options& o) {
  const ConfigMap m = resolve(o);
  const ScenarioConfig c = scenario_from_config(m);
  const int scenes = m.get_int("bounds.scenes", 200);
  const bool check_fim = m.get_bool("bounds.check_fim", false);
  if (scenes < 1) throw ConfigError("bounds.scenes must be positive");
  const auto rows = run_bounds(c, scenes, check_fim);
  std::ostringstream csv;
  write_bounds_csv(csv, rows);

  json meta = base_meta("bounds");
  meta["config"] = config_json(describe(c));
  meta["config"]["bounds.scenes"] = std::to_string(scenes);
  meta["config"]["bounds.check_fim"] = check_fim ? "true" : "false";
  meta["seed"] = c.seed;
  meta["crb_convention"] = "normalized bounds averaged over random scenes drawn as in the Monte-Carlo trials";
  if (check_fim) {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.fim_max_rel_diff);
    meta["fim_max_rel_diff"] = worst;
  }
  emit(output_path(o, m), csv.str(), meta);
  return kOk;
}

int cmd_enhance(const Options& o, const std::string& in_path, const std::string& out_path,
                const std::string& reference_path, const std::string& log_path) {
  const ConfigMap m = resolve(o);
  EnhancerConfig c = enhancer_from_config(m);
  const std::string psd_dump = m.get_string("enhance.psd_dump", "");
  c.keep_psd = !psd_dump.empty();

  const WavFile in = read_wav(in_path);
  if (in.audio.sample_rate != c.stft.sample_rate) {
    throw InvalidArgument(in_path + ": sample rate " + std::to_string(static_cast<long>(in.audio.sample_rate)) +
                          " Hz, expected " + std::to_string(static_cast<long>(c.stft.sample_rate)) +
                          " Hz (resample the input or set stft.sample_rate)");
  }
  if (in.audio.channels() != static_cast<int>(c.geometry.mic_positions.size())) {
    throw InvalidArgument(in_path + ": " + std::to_string(in.audio.channels()) + " channels but the array has " +
                          std::to_string(c.geometry.mic_positions.size()) +
                          " microphones (set array.ula.n or array.positions)");
  }
  const double seconds = static_cast<double>(in.audio.length()) / in.audio.sample_rate;
  if (seconds < c.noise_seconds) {
    throw InvalidArgument(in_path + ": " + std::to_string(seconds) + " s of audio is shorter than the " +
                          std::to_string(c.noise_seconds) + " s noise-only segment");
  }

  const auto start = std::chrono::steady_clock::now();
  const EnhanceResult res = enhance(in.audio, c);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_wav(out_path, res.output, in.format);

  if (c.keep_psd) {
    auto f = open_out(psd_dump);
    write_psd_csv(f, res.psd);
    f.close();
    if (!f) throw IoError("write failed: " + psd_dump);
  }

  json log = base_meta("enhance");
  log["input"] = in_path;
  log["output"] = out_path;
  log["variant"] = variant_name(c.variant);
  log["sample_rate"] = in.audio.sample_rate;
  log["channels"] = in.audio.channels();
  log["samples"] = in.audio.length();
  log["bins"] = res.rank_per_bin.size();
  std::map<int, int> ranks;
  double mean_rank = 0.0;
  for (int t : res.rank_per_bin) {
    ++ranks[t];
    mean_rank += t;
  }
  if (!res.rank_per_bin.empty()) mean_rank /= static_cast<double>(res.rank_per_bin.size());
  json hist = json::object();
  for (const auto& [t, count] : ranks) hist[std::to_string(t)] = count;
  log["rank_histogram"] = hist;
  log["mean_rank"] = mean_rank;
  log["fallback_bins"] = res.fallback_bins;
  log["loaded_cells"] = res.loaded_cells;
  log["warnings"] = warnings_json(res.warnings);
  log["config"] = config_json(describe(c));
  log["elapsed_seconds"] = elapsed;

  if (!reference_path.empty()) {
    const WavFile ref = read_wav(reference_path);
    if (ref.audio.sample_rate != in.audio.sample_rate) throw InvalidArgument("reference sample rate differs from input");
    const RVector clean = ref.audio.samples.col(0);
    const RVector noisy = in.audio.samples.col(0);
    const RVector enhanced = res.output.samples.col(0);
    const double fs = in.audio.sample_rate;
    const double fw_in = fwsnrseg(clean, noisy, fs), fw_out = fwsnrseg(clean, enhanced, fs);
    const double llr_in = llr(clean, noisy, fs), llr_out = llr(clean, enhanced, fs);
    log["metrics"] = {{"fwsnrseg_input", fw_in},  {"fwsnrseg_output", fw_out}, {"delta_fwsnrseg", fw_out - fw_in},
                      {"llr_input", llr_in},      {"llr_output", llr_out},     {"delta_llr", llr_out - llr_in}};
  }

  if (log_path.empty()) {
    std::cout << log.dump() << "\n";
  } else {
    std::ofstream f(log_path, std::ios::app);
    if (!f) throw IoError("cannot open log " + log_path);
    f << log.dump() << "\n";
  }
  return kOk;
}

int cmd_metrics(const std::string& ref_path, const std::string& deg_path, int channel) {
  const WavFile ref = read_wav(ref_path);
  const WavFile deg = read_wav(deg_path);
  if (ref.audio.sample_rate != deg.audio.sample_rate) {
    throw InvalidArgument("sample rates differ: " + ref_path + " vs " + deg_path);
  }
  if (channel < 0 || channel >= ref.audio.channels() || channel >= deg.audio.channels()) {
    throw InvalidArgument("channel " + std::to_string(channel) + " not present in both files");
  }
  const RVector x = ref.audio.samples.col(channel);
  const RVector y = deg.audio.samples.col(channel);
  const double fs = ref.audio.sample_rate;
  json j;
  j["reference"] = ref_path;
  j["processed"] = deg_path;
  j["sample_rate"] = fs;
  j["fwsnrseg"] = fwsnrseg(x, y, fs);
  j["llr"] = llr(x, y, fs);
  std::cout << j.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSD estimation in reverberant and noisy fields: simulation, bounds, enhancement, metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PSDML_VERSION);

  Options sim_opts;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo estimator sweep, CSV of normalized MSE and bounds");
  add_common(sim, sim_opts);
  sim->add_option("-o,--out", sim_opts.out, "CSV path; metadata goes to <out>.meta.json");
  add_flag(sim, sim_opts, "--sweep", "sweep.param", "none|snapshots|srr|srnr|snr");
  add_flag(sim, sim_opts, "--grid", "sweep.grid", "comma-separated grid values");
  add_flag(sim, sim_opts, "--trials", "scenario.trials", "trials per grid point");

  Options bnd_opts;
  auto* bnd = app.add_subcommand("bounds", "CSV of normalized CRBs and estimator variances over a grid");
  add_common(bnd, bnd_opts);
  bnd->add_option("-o,--out", bnd_opts.out, "CSV path; metadata goes to <out>.meta.json");
  add_flag(bnd, bnd_opts, "--sweep", "sweep.param", "none|snapshots|srr|srnr|snr");
  add_flag(bnd, bnd_opts, "--grid", "sweep.grid", "comma-separated grid values");
  add_flag(bnd, bnd_opts, "--scenes", "bounds.scenes", "random scenes averaged per grid point");
  bnd->add_flag_callback("--check-fim", [&bnd_opts] { bnd_opts.flags["bounds.check_fim"] = "true"; },
                         "add columns from numeric Fisher-information inversion");

  Options enh_opts;
  std::string enh_in, enh_out, enh_ref, enh_log;
  auto* enh = app.add_subcommand("enhance", "multichannel Wiener filtering of a WAV file");
  add_common(enh, enh_opts);
  enh->add_option("input", enh_in, "multichannel input WAV")->required();
  enh->add_option("output", enh_out, "enhanced mono WAV")->required();
  add_flag(enh, enh_opts, "--variant", "enhance.variant", "nb-dir|bb-dir|nb-dd|bb-dd");
  add_flag(enh, enh_opts, "--noise-seconds", "enhance.noise_seconds", "leading noise-only segment");
  add_flag(enh, enh_opts, "--rank", "enhance.rank", "noise rank T or 'auto'");
  add_flag(enh, enh_opts, "--doa-deg", "enhance.doa_deg", "speaker direction from broadside");
  add_flag(enh, enh_opts, "--psd-dump", "enhance.psd_dump", "CSV of per-cell PSD estimates");
  enh->add_option("--reference", enh_ref, "clean reference WAV; adds metrics to the log");
  enh->add_option("--log", enh_log, "append the JSON-lines record here instead of stdout");

  std::string met_ref, met_deg;
  int met_channel = 0;
  auto* met = app.add_subcommand("metrics", "fwSNRseg and LLR of a processed file against a reference");
  met->add_option("reference", met_ref, "reference WAV")->required();
  met->add_option("processed", met_deg, "processed WAV")->required();
  met->add_option("--channel", met_channel, "channel to compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*bnd) return cmd_bounds(bnd_opts);
    if (*enh) return cmd_enhance(enh_opts, enh_in, enh_out, enh_ref, enh_log);
    if (*met) return cmd_metrics(met_ref, met_deg, met_channel);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kConfig;
}
