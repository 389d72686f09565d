#include "floq/runner.hpp"

#include "floq/device.hpp"
#include "floq/dynamics.hpp"
#include "floq/effective.hpp"
#include "floq/experiments.hpp"
#include "floq/qop.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace floq::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::set<std::string> kProtocols = {"sideband_rabi", "ab_interference", "entangled_prep",
                                          "calibrate",     "dpt_sweep",       "custom_evolution"};

struct Validator {
  std::vector<std::string>& errors;
  std::vector<std::string>& warnings;

  double number(const json& obj, const std::string& path, const std::string& key, double def,
                bool required = false) const {
    if (!obj.contains(key)) {
      if (required) errors.push_back(path + key + ": missing");
      return def;
    }
    if (!obj.at(key).is_number()) {
      errors.push_back(path + key + ": must be a number");
      return def;
    }
    return obj.at(key).get<double>();
  }
  std::string text(const json& obj, const std::string& path, const std::string& key, const std::string& def,
                   bool required = false) const {
    if (!obj.contains(key)) {
      if (required) errors.push_back(path + key + ": missing");
      return def;
    }
    if (!obj.at(key).is_string()) {
      errors.push_back(path + key + ": must be a string");
      return def;
    }
    return obj.at(key).get<std::string>();
  }
};

std::vector<double> parse_grid(const json& g, const std::string& path, std::vector<std::string>& errors) {
  std::vector<double> out;
  if (g.is_array()) {
    for (const auto& v : g) {
      if (!v.is_number()) {
        errors.push_back(path + ": grid entries must be numbers");
        return out;
      }
      out.push_back(v.get<double>());
    }
    if (out.empty()) errors.push_back(path + ": grid must be non-empty");
    return out;
  }
  if (!g.is_object() || !g.contains("start") || !g.contains("stop") || !g.contains("count")) {
    errors.push_back(path + ": grid must be an array or {start, stop, count}");
    return out;
  }
  double start = g.at("start").get<double>(), stop = g.at("stop").get<double>();
  int count = g.at("count").get<int>();
  if (count < 1) {
    errors.push_back(path + ".count: must be >= 1");
    return out;
  }
  for (int i = 0; i < count; ++i)
    out.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1.0));
  return out;
}

void warn_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& path,
                       std::vector<std::string>& warnings) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) warnings.push_back(path + it.key() + ": unknown key (ignored)");
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string resolve_device(const std::string& value, const std::string& base_dir, const std::string& data_dir) {
  fs::path p(value);
  if (p.is_absolute() && fs::exists(p)) return p.string();
  if (!base_dir.empty() && fs::exists(fs::path(base_dir) / p)) return (fs::path(base_dir) / p).string();
  std::string dd = data_dir.empty() ? device::default_data_dir() : data_dir;
  if (fs::exists(fs::path(dd) / p)) return (fs::path(dd) / p).string();
  if (fs::exists(p)) return p.string();
  return "";
}

}  // namespace

std::string ExperimentConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical.dump())));
  return buf;
}

ExperimentConfig parse_config_text(const std::string& json_text, const std::string& base_dir,
                                   const std::string& data_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  std::vector<std::string> errors, warnings;
  Validator v{errors, warnings};

  ExperimentConfig cfg;
  cfg.protocol = v.text(j, "", "protocol", "", true);
  if (!cfg.protocol.empty() && !kProtocols.count(cfg.protocol))
    errors.push_back("protocol: unknown protocol '" + cfg.protocol + "'");

  double seed = v.number(j, "", "seed", 1.0);
  if (seed < 0) errors.push_back("seed: must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.output = v.text(j, "", "output", "out");

  std::string device_file = v.text(j, "", "device", "table_s1.json");
  cfg.device_path = resolve_device(device_file, base_dir, data_dir);
  if (cfg.device_path.empty()) errors.push_back("device: file '" + device_file + "' not found");

  json mode = j.value("mode", json::object());
  if (!mode.is_object()) {
    errors.push_back("mode: must be an object");
    mode = json::object();
  }
  std::string model = mode.value("model", std::string("effective"));
  std::string noise = mode.value("noise", std::string("ideal"));
  bool readout = mode.value("readout", false);
  if (model != "effective" && model != "full") errors.push_back("mode.model: must be 'effective' or 'full'");
  if (noise != "ideal" && noise != "lindblad") errors.push_back("mode.noise: must be 'ideal' or 'lindblad'");
  warn_unknown_keys(mode, {"model", "noise", "readout"}, "mode.", warnings);

  json params = j.value("params", json::object());
  if (!params.is_object()) {
    errors.push_back("params: must be an object");
    params = json::object();
  }

  json canon;
  canon["protocol"] = cfg.protocol;
  canon["seed"] = cfg.seed;
  canon["output"] = cfg.output;
  canon["device"] = device_file;
  canon["mode"] = {{"model", model}, {"noise", noise}, {"readout", readout}};
  json cp = json::object();

  auto grid_or = [&](const std::string& key, const json& def) -> json {
    return params.contains(key) ? params.at(key) : def;
  };

  if (cfg.protocol == "sideband_rabi") {
    cp["bond"] = static_cast<int>(v.number(params, "params.", "bond", 0));
    std::string kind = v.text(params, "params.", "kind", "blue");
    if (kind != "blue" && kind != "red") errors.push_back("params.kind: must be 'blue' or 'red'");
    cp["kind"] = kind;
    cp["g_mhz"] = v.number(params, "params.", "g_mhz", 0.75);
    cp["duration_ns"] = v.number(params, "params.", "duration_ns", 1000.0);
    cp["sample_every_ns"] = v.number(params, "params.", "sample_every_ns", 2.0);
    cp["ramp_ns"] = v.number(params, "params.", "ramp_ns", 20.0);
    if (cp["duration_ns"].get<double>() <= 0) errors.push_back("params.duration_ns: must be positive");
    if (cp["g_mhz"].get<double>() < 0) errors.push_back("params.g_mhz: must be >= 0");
    warn_unknown_keys(params, {"bond", "kind", "g_mhz", "duration_ns", "sample_every_ns", "ramp_ns"}, "params.",
                      warnings);
  } else if (cfg.protocol == "ab_interference") {
    std::string initial = v.text(params, "params.", "initial", "000");
    if (initial != "000" && initial != "entangled") errors.push_back("params.initial: must be '000' or 'entangled'");
    cp["initial"] = initial;
    std::string swept = v.text(params, "params.", "swept_phase", "phi_blue_12");
    try {
      experiments::swept_phase_from_string(swept);
    } catch (const std::exception&) {
      errors.push_back("params.swept_phase: unknown phase '" + swept + "'");
    }
    cp["swept_phase"] = swept;
    cp["grid"] = parse_grid(grid_or("grid", json::array({0.0})), "params.grid", errors);
    cp["g_mhz"] = v.number(params, "params.", "g_mhz", 0.75);
    cp["duration_ns"] = v.number(params, "params.", "duration_ns", 1000.0);
    cp["sample_every_ns"] = v.number(params, "params.", "sample_every_ns", 4.0);
    json base = json::object();
    if (params.contains("base_phases")) {
      const json& bp = params.at("base_phases");
      for (const auto& key : {"phi_blue_12", "phi_red_12", "phi_blue_23", "phi_red_23"})
        base[key] = bp.value(key, 0.0);
    } else {
      for (const auto& key : {"phi_blue_12", "phi_red_12", "phi_blue_23", "phi_red_23"}) base[key] = 0.0;
    }
    cp["base_phases"] = base;
    if (cp["duration_ns"].get<double>() <= 0) errors.push_back("params.duration_ns: must be positive");
    warn_unknown_keys(params, {"initial", "swept_phase", "grid", "g_mhz", "duration_ns", "sample_every_ns",
                               "base_phases"},
                      "params.", warnings);
  } else if (cfg.protocol == "entangled_prep") {
    cp["gate_x_ns"] = v.number(params, "params.", "gate_x_ns", 30.0);
    cp["gate_sqrt_iswap_ns"] = v.number(params, "params.", "gate_sqrt_iswap_ns", 1000.0 / 6.0);
    if (cp["gate_x_ns"].get<double>() < 0) errors.push_back("params.gate_x_ns: must be >= 0");
    warn_unknown_keys(params, {"gate_x_ns", "gate_sqrt_iswap_ns"}, "params.", warnings);
  } else if (cfg.protocol == "calibrate") {
    cp["n_qubits"] = static_cast<int>(v.number(params, "params.", "n_qubits", 6));
    cp["g_mhz"] = v.number(params, "params.", "g_mhz", 0.75);
    cp["sweep_points"] = static_cast<int>(v.number(params, "params.", "sweep_points", 16));
    if (cp["n_qubits"].get<int>() < 3) errors.push_back("params.n_qubits: must be >= 3");
    warn_unknown_keys(params, {"n_qubits", "g_mhz", "sweep_points"}, "params.", warnings);
  } else if (cfg.protocol == "dpt_sweep") {
    json nq = params.value("n_qubits", json(6));
    std::vector<int> ns;
    if (nq.is_array())
      for (const auto& x : nq) ns.push_back(x.get<int>());
    else
      ns.push_back(nq.get<int>());
    for (int n : ns)
      if (n < 2 || n > 6) errors.push_back("params.n_qubits: entries must be in [2, 6]");
    cp["n_qubits"] = ns;
    cp["j_mhz"] = v.number(params, "params.", "j_mhz", 0.75);
    cp["bz_over_j"] = parse_grid(grid_or("bz_over_j", json({{"start", 0.0}, {"stop", 3.0}, {"count", 21}})),
                                 "params.bz_over_j", errors);
    cp["horizon_ns"] = v.number(params, "params.", "horizon_ns", 500.0);
    cp["sample_every_ns"] = v.number(params, "params.", "sample_every_ns", 2.0);
    if (cp["horizon_ns"].get<double>() <= 0) errors.push_back("params.horizon_ns: must be positive");
    if (cp["sample_every_ns"].get<double>() <= 0) errors.push_back("params.sample_every_ns: must be positive");
    std::string source = v.text(params, "params.", "hamiltonian", "effective");
    if (source != "effective" && source != "ising") errors.push_back("params.hamiltonian: must be 'effective' or 'ising'");
    cp["hamiltonian"] = source;
    warn_unknown_keys(params, {"n_qubits", "j_mhz", "bz_over_j", "horizon_ns", "sample_every_ns", "hamiltonian"},
                      "params.", warnings);
  } else if (cfg.protocol == "custom_evolution") {
    std::string kind = v.text(params, "params.", "hamiltonian", "", true);
    if (kind != "ising" && kind != "pair" && kind != "chain")
      errors.push_back("params.hamiltonian: must be 'ising', 'pair' or 'chain'");
    cp["hamiltonian"] = kind;
    if (kind == "ising") {
      cp["n_qubits"] = static_cast<int>(v.number(params, "params.", "n_qubits", 2));
      cp["j_mhz"] = v.number(params, "params.", "j_mhz", 0.75);
      cp["bz_mhz"] = v.number(params, "params.", "bz_mhz", 0.0);
    } else if (kind == "pair") {
      cp["g_blue_mhz"] = v.number(params, "params.", "g_blue_mhz", 0.75);
      cp["phi_blue_rad"] = v.number(params, "params.", "phi_blue_rad", 0.0);
      cp["g_red_mhz"] = v.number(params, "params.", "g_red_mhz", 0.75);
      cp["phi_red_rad"] = v.number(params, "params.", "phi_red_rad", 0.0);
    } else if (kind == "chain") {
      cp["n_qubits"] = static_cast<int>(v.number(params, "params.", "n_qubits", 3));
      cp["detuning_blue_mhz"] = v.number(params, "params.", "detuning_blue_mhz", 0.0);
      if (!params.contains("bonds") || !params.at("bonds").is_array())
        errors.push_back("params.bonds: missing array");
      else
        cp["bonds"] = params.at("bonds");
    }
    std::string initial = v.text(params, "params.", "initial", "");
    if (initial.empty()) errors.push_back("params.initial: missing");
    for (char ch : initial)
      if (ch != '0' && ch != '1' && ch != '+' && ch != '-')
        errors.push_back("params.initial: symbols must be 0, 1, + or -");
    cp["initial"] = initial;
    cp["duration_ns"] = v.number(params, "params.", "duration_ns", 1000.0);
    cp["sample_every_ns"] = v.number(params, "params.", "sample_every_ns", 2.0);
    if (cp["duration_ns"].get<double>() <= 0) errors.push_back("params.duration_ns: must be positive");
    warn_unknown_keys(params,
                      {"hamiltonian", "n_qubits", "j_mhz", "bz_mhz", "g_blue_mhz", "phi_blue_rad", "g_red_mhz",
                       "phi_red_rad", "detuning_blue_mhz", "bonds", "initial", "duration_ns", "sample_every_ns"},
                      "params.", warnings);
  }

  canon["params"] = cp;
  warn_unknown_keys(j, {"protocol", "seed", "output", "device", "mode", "params"}, "", warnings);

  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  cfg.canonical = canon;
  cfg.warnings = warnings;
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const std::string& data_dir) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), fs::path(path).parent_path().string(), data_dir);
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
  for (size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("write_csv: ragged table");
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_value(row[i]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for '" + path + "'");
}

namespace {

struct Emitter {
  fs::path dir;
  std::vector<std::string> files;
  json file_meta = json::array();

  void emit(const Table& t, const std::string& name) {
    write_csv(t, (dir / name).string());
    files.push_back(name);
    file_meta.push_back({{"name", name}, {"rows", t.rows.size()}});
  }
};

void run_sideband(const ExperimentConfig& cfg, const device::DeviceSpec& dev, int threads, Emitter& em) {
  (void)threads;
  const json& p = cfg.canonical.at("params");
  experiments::RabiParams rp;
  rp.bond = p.at("bond").get<int>();
  rp.kind = device::drive_kind_from_string(p.at("kind").get<std::string>());
  rp.g_mhz = p.at("g_mhz").get<double>();
  rp.duration_ns = p.at("duration_ns").get<double>();
  rp.sample_every_ns = p.at("sample_every_ns").get<double>();
  rp.ramp_ns = p.at("ramp_ns").get<double>();
  rp.mode = cfg.canonical.at("mode").at("model") == "full" ? experiments::RabiMode::full
                                                           : experiments::RabiMode::effective;
  experiments::RabiResult r = experiments::run_sideband_rabi(dev, rp);

  Table t;
  t.header = {"time_ns"};
  for (const auto& l : r.labels) t.header.push_back("p_" + l);
  bool full = rp.mode == experiments::RabiMode::full;
  if (full) t.header.push_back("coupler_excitation");
  for (size_t s = 0; s < r.times.size(); ++s) {
    std::vector<double> row{r.times[s]};
    for (const auto& series : r.populations) row.push_back(series[s]);
    if (full) row.push_back(r.coupler_excitation[s]);
    t.rows.push_back(std::move(row));
  }
  em.emit(t, "rabi.csv");

  if (full) {
    Table c;
    c.header = {"amplitude_phi0", "drive_freq_ghz", "calibration_iterations"};
    c.rows.push_back({r.amplitude_phi0, r.drive_freq_ghz, static_cast<double>(r.calibration_iterations)});
    em.emit(c, "calibration.csv");
  }
}

void run_ab(const ExperimentConfig& cfg, const device::DeviceSpec& dev, int threads, Emitter& em) {
  const json& p = cfg.canonical.at("params");
  experiments::AbParams ap;
  ap.g_mhz = p.at("g_mhz").get<double>();
  ap.swept = experiments::swept_phase_from_string(p.at("swept_phase").get<std::string>());
  ap.grid = p.at("grid").get<std::vector<double>>();
  ap.initial = p.at("initial") == "entangled" ? experiments::AbInitial::entangled : experiments::AbInitial::ground;
  ap.duration_ns = p.at("duration_ns").get<double>();
  ap.sample_every_ns = p.at("sample_every_ns").get<double>();
  const json& bp = p.at("base_phases");
  ap.base_phases = {bp.at("phi_blue_12").get<double>(), bp.at("phi_red_12").get<double>(),
                    bp.at("phi_blue_23").get<double>(), bp.at("phi_red_23").get<double>()};
  ap.noisy = cfg.canonical.at("mode").at("noise") == "lindblad";
  ap.readout = cfg.canonical.at("mode").at("readout").get<bool>();
  if (ap.noisy || ap.readout) ap.dev = dev;
  ap.threads = threads;
  experiments::AbResult r = experiments::run_ab_interference(ap);

  Table t;
  t.header = {"phase_rad", "loop_flux_rad", "time_ns"};
  for (const auto& l : r.labels) t.header.push_back("p_" + l);
  for (size_t gi = 0; gi < r.grid.size(); ++gi)
    for (size_t s = 0; s < r.times.size(); ++s) {
      std::vector<double> row{r.grid[gi], r.loop_flux[gi], r.times[s]};
      for (size_t li = 0; li < r.labels.size(); ++li) row.push_back(r.populations[gi][li][s]);
      t.rows.push_back(std::move(row));
    }
  em.emit(t, "ab_map.csv");
}

void run_prep(const ExperimentConfig& cfg, const device::DeviceSpec& dev, Emitter& em) {
  const json& p = cfg.canonical.at("params");
  experiments::PrepOptions po;
  po.gate_x_ns = p.at("gate_x_ns").get<double>();
  po.gate_sqrt_iswap_ns = p.at("gate_sqrt_iswap_ns").get<double>();
  po.noisy = cfg.canonical.at("mode").at("noise") == "lindblad";
  if (po.noisy) po.dev = dev;
  experiments::PrepResult r = experiments::prepare_entangled_state(po);

  Table t;
  t.header = {"stage", "fidelity", "duration_ns"};
  t.rows.push_back({0.0, r.fidelity_bell_step, po.gate_x_ns + po.gate_sqrt_iswap_ns});
  t.rows.push_back({1.0, r.fidelity_target, r.total_duration_ns});
  em.emit(t, "prep.csv");
}

void run_calibrate(const ExperimentConfig& cfg, std::uint64_t seed, Emitter& em) {
  const json& p = cfg.canonical.at("params");
  int n = p.at("n_qubits").get<int>();
  double g = p.at("g_mhz").get<double>();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-qop::kPi, qop::kPi);
  effective::ChainConfig chain;
  chain.n_qubits = n;
  for (int b = 0; b + 1 < n; ++b) chain.couplings.emplace_back(b, g, uni(rng), g, uni(rng));

  experiments::CalibrationOptions opts;
  opts.g_mhz = g;
  opts.sweep_points = p.at("sweep_points").get<int>();
  experiments::CalibrationResult r = experiments::calibrate_loop_phases(chain, opts);

  Table t;
  t.header = {"triple", "tuned_bond", "corrected_phase_rad", "residual_flux_rad", "fit_amplitude"};
  for (size_t k = 0; k < r.fits.size(); ++k)
    t.rows.push_back({static_cast<double>(r.fits[k].triple), static_cast<double>(r.fits[k].tuned_bond),
                      r.fits[k].corrected_phase, r.residual_flux[k], r.fits[k].fit_amplitude});
  em.emit(t, "calibration.csv");

  Table b;
  b.header = {"bond", "jxx_mhz", "jyy_mhz", "jxy_mhz", "jyx_mhz"};
  for (const auto& c : r.aligned.couplings) {
    auto a = effective::anisotropy_decompose(c);
    b.rows.push_back({static_cast<double>(c.bond), a.jxx_mhz, a.jyy_mhz, a.jxy_mhz, a.jyx_mhz});
  }
  em.emit(b, "bonds.csv");
}

void run_dpt(const ExperimentConfig& cfg, const device::DeviceSpec& dev, int threads, Emitter& em) {
  const json& p = cfg.canonical.at("params");
  std::vector<int> ns = p.at("n_qubits").get<std::vector<int>>();

  Table czz_t, fm_t, lo_t;
  czz_t.header = {"bz_over_j", "n", "czz"};
  fm_t.header = {"bz_over_j", "n", "first_min"};
  lo_t.header = {"n", "bz_over_j", "time_ns", "loschmidt", "rate"};

  for (int n : ns) {
    experiments::DptParams dp;
    dp.n_qubits = n;
    dp.j_mhz = p.at("j_mhz").get<double>();
    dp.bz_over_j = p.at("bz_over_j").get<std::vector<double>>();
    dp.horizon_ns = p.at("horizon_ns").get<double>();
    dp.sample_every_ns = p.at("sample_every_ns").get<double>();
    dp.source = p.at("hamiltonian") == "ising" ? experiments::DptSource::ising : experiments::DptSource::effective;
    dp.noisy = cfg.canonical.at("mode").at("noise") == "lindblad";
    dp.readout = cfg.canonical.at("mode").at("readout").get<bool>();
    if (dp.noisy || dp.readout) dp.dev = dev;
    dp.threads = threads;
    experiments::DptResult r = experiments::run_dpt_sweep(dp);

    Table summary;
    summary.header = {"bz_over_j", "czz", "first_min", "first_min_time_ns"};
    for (size_t gi = 0; gi < r.bz_over_j.size(); ++gi) {
      summary.rows.push_back({r.bz_over_j[gi], r.czz[gi], r.first_min[gi], r.first_min_time_ns[gi]});
      czz_t.rows.push_back({r.bz_over_j[gi], static_cast<double>(n), r.czz[gi]});
      fm_t.rows.push_back({r.bz_over_j[gi], static_cast<double>(n), r.first_min[gi]});
      for (size_t s = 0; s < r.times.size(); ++s)
        lo_t.rows.push_back({static_cast<double>(n), r.bz_over_j[gi], r.times[s], r.loschmidt[gi][s], r.rate[gi][s]});
    }
    em.emit(summary, "summary_n" + std::to_string(n) + ".csv");
  }
  em.emit(czz_t, "czz.csv");
  em.emit(fm_t, "first_min.csv");
  em.emit(lo_t, "loschmidt.csv");
}

void run_custom(const ExperimentConfig& cfg, const device::DeviceSpec& dev, Emitter& em) {
  const json& p = cfg.canonical.at("params");
  std::string kind = p.at("hamiltonian").get<std::string>();

  qop::Operator h;
  if (kind == "ising") {
    h = effective::ising_hamiltonian(p.at("n_qubits").get<int>(), p.at("j_mhz").get<double>(),
                                     p.at("bz_mhz").get<double>());
  } else if (kind == "pair") {
    effective::EffectiveCoupling c(0, p.at("g_blue_mhz").get<double>(), p.at("phi_blue_rad").get<double>(),
                                   p.at("g_red_mhz").get<double>(), p.at("phi_red_rad").get<double>());
    h = effective::effective_pair_hamiltonian(c);
  } else {
    effective::ChainConfig cc;
    cc.n_qubits = p.at("n_qubits").get<int>();
    cc.detuning_blue_mhz = p.at("detuning_blue_mhz").get<double>();
    int b = 0;
    for (const auto& bond : p.at("bonds"))
      cc.couplings.emplace_back(b++, bond.value("g_blue_mhz", 0.0), bond.value("phi_blue_rad", 0.0),
                                bond.value("g_red_mhz", 0.0), bond.value("phi_red_rad", 0.0));
    h = effective::effective_chain_hamiltonian(cc);
  }

  std::string initial = p.at("initial").get<std::string>();
  qop::QuantumState psi0 = qop::QuantumState::product(h.space, initial);
  double duration = p.at("duration_ns").get<double>();
  double sample = p.at("sample_every_ns").get<double>();

  bool noisy = cfg.canonical.at("mode").at("noise") == "lindblad";
  bool readout = cfg.canonical.at("mode").at("readout").get<bool>();
  dynamics::Trajectory traj;
  if (noisy) {
    std::vector<std::pair<int, int>> sites;
    for (int q = 0; q < h.space.num_sites(); ++q) sites.emplace_back(q, q);
    auto collapse = dynamics::collapse_from_device(dev, h.space, sites);
    dynamics::TimeDependentHamiltonian th;
    th.space = h.space;
    th.static_part = h.mat;
    traj = dynamics::evolve_lindblad(th, qop::QuantumState::mixed(h.space, psi0.as_density_matrix()), collapse,
                                     duration, std::min(1.0, dynamics::suggested_dt(th)), sample);
  } else {
    traj = dynamics::evolve_exact(h, psi0, duration, sample);
  }

  std::optional<experiments::ReadoutModel> rm;
  if (readout) rm = experiments::ReadoutModel::from_device(dev, 0, h.space.num_sites());

  Table t;
  t.header = {"time_ns"};
  int dim = h.space.dimension();
  for (int k = 0; k < dim; ++k) {
    std::string label;
    for (int lv : h.space.levels_of(k)) label += static_cast<char>('0' + lv);
    t.header.push_back("p_" + label);
  }
  for (int s = 0; s < traj.n_samples(); ++s) {
    std::vector<double> row{traj.times[static_cast<size_t>(s)]};
    std::vector<double> pops = traj.states[static_cast<size_t>(s)].populations();
    if (rm) pops = experiments::apply_readout_error(pops, *rm);
    row.insert(row.end(), pops.begin(), pops.end());
    t.rows.push_back(std::move(row));
  }
  em.emit(t, "evolution.csv");
}

}  // namespace

ResultBundle run(const ExperimentConfig& config, const RunOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg = config;
  if (opts.seed != 0) {
    cfg.seed = opts.seed;
    cfg.canonical["seed"] = opts.seed;
  }
  std::string out_dir = opts.output_dir.empty() ? cfg.output : opts.output_dir;
  fs::create_directories(out_dir);

  device::DeviceSpec dev = device::load_device(cfg.device_path);

  Emitter em;
  em.dir = out_dir;
  int threads = std::max(1, opts.threads);

  if (cfg.protocol == "sideband_rabi")
    run_sideband(cfg, dev, threads, em);
  else if (cfg.protocol == "ab_interference")
    run_ab(cfg, dev, threads, em);
  else if (cfg.protocol == "entangled_prep")
    run_prep(cfg, dev, em);
  else if (cfg.protocol == "calibrate")
    run_calibrate(cfg, cfg.seed, em);
  else if (cfg.protocol == "dpt_sweep")
    run_dpt(cfg, dev, threads, em);
  else if (cfg.protocol == "custom_evolution")
    run_custom(cfg, dev, em);
  else
    throw std::invalid_argument("run: unknown protocol '" + cfg.protocol + "'");

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ResultBundle bundle;
  bundle.output_dir = out_dir;
  bundle.files = em.files;
  bundle.manifest = {{"config_hash", cfg.hash()},
                     {"protocol", cfg.protocol},
                     {"seed", cfg.seed},
                     {"version", kVersion},
                     {"wall_time_s", wall},
                     {"threads", threads},
                     {"files", em.file_meta}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << bundle.manifest.dump(2) << "\n";
  return bundle;
}

std::vector<std::string> list_presets(const std::string& data_dir) {
  std::string dd = data_dir.empty() ? device::default_data_dir() : data_dir;
  std::vector<std::string> names;
  fs::path presets = fs::path(dd) / "presets";
  if (!fs::exists(presets)) return names;
  for (const auto& entry : fs::directory_iterator(presets))
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::string preset_path(const std::string& name, const std::string& data_dir) {
  std::string dd = data_dir.empty() ? device::default_data_dir() : data_dir;
  fs::path p = fs::path(dd) / "presets" / (name + ".json");
  return p.string();
}

}  // namespace floq::runner
