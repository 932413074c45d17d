#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wavelab/error.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/height_solver.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

/// One sweep cell's vorticity together with the text it came from.
struct SweepVorticity {
  VorticitySpec spec;
  std::string label;
};

/// Everything a run reads from its configuration file.
struct RunConfig {
  PhysicalParams params{.g = 9.81, .p0 = -std::sqrt(9.81 * std::tanh(1.0))}; /// unit laminar depth when irrotational
  double amplitude = 0.01;
  bool amplitude_relative = true; ///< amplitude given as a fraction of the laminar depth
  int steps = 5;
  VorticitySpec vorticity;
  int nq = 129;
  int np = 65;
  NewtonOptions newton;
  std::string out_dir = "wavelab-out";
  bool plots = false;
  std::uint64_t seed = 1;
  int workers = 4;
  std::vector<SweepVorticity> sweep_vorticity;
  std::vector<double> sweep_amplitudes;

  Grid grid() const { return Grid(nq, np, params.p0); }
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto k = s.find(sep, start);
    out.push_back(trim(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start)));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

inline double to_double(std::string_view s, int line, std::string_view key) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(s) + "'", line);
  }
  return x;
}

template <class Int>
Int to_int(std::string_view s, int line, std::string_view key) {
  Int x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + std::string(s) + "'", line);
  }
  return x;
}

inline bool to_bool(std::string_view s, int line, std::string_view key) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + std::string(s) + "'", line);
}

/// "zero", "constant:G0", "affine:BETA" or "affine:BETA:G0".
inline SweepVorticity parse_sweep_vorticity(std::string_view s, int line) {
  const auto parts = split(s, ':');
  SweepVorticity out;
  out.label = std::string(s);
  auto fail = [&]() -> SweepVorticity {
    throw ConfigError("bad sweep vorticity '" + std::string(s) +
                          "' (expected zero, constant:G0, affine:BETA or affine:BETA:G0)",
                      line);
  };
  if (parts[0] == "zero" && parts.size() == 1) {
    out.spec = VorticitySpec::zero();
  } else if (parts[0] == "constant" && parts.size() == 2) {
    out.spec = VorticitySpec::constant(to_double(parts[1], line, "vorticity"));
  } else if (parts[0] == "affine" && (parts.size() == 2 || parts.size() == 3)) {
    const double beta = to_double(parts[1], line, "vorticity");
    const double g0 = parts.size() == 3 ? to_double(parts[2], line, "vorticity") : 0.0;
    out.spec = VorticitySpec::affine(beta, g0);
  } else {
    return fail();
  }
  return out;
}

} // namespace config_detail

/// Parses the flat-section key = value format. Unknown sections or keys,
/// duplicates and malformed values are rejected with the offending line.
inline RunConfig parse_config(std::istream& in) {
  using namespace config_detail;
  RunConfig cfg;
  std::string kind = "zero";
  int kind_line = 0, grid_line = 0, phys_line = 0;
  std::string section;
  std::set<std::string> seen;
  const std::map<std::string, std::set<std::string>> known = {
      {"physics", {"g", "p0", "P_atm", "c", "amplitude", "amplitude_unit", "steps"}},
      {"vorticity", {"kind", "gamma0", "beta"}},
      {"grid", {"nq", "np"}},
      {"solver", {"tolerance", "max_iterations", "max_halvings"}},
      {"output", {"dir", "plots"}},
      {"run", {"seed", "workers"}},
      {"sweep", {"vorticity", "amplitudes"}},
  };

  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = trim(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = trim(s.substr(0, hash));
    if (s.empty() || s.front() == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line);
      section = std::string(trim(s.substr(1, s.size() - 2)));
      if (!known.count(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key(trim(s.substr(0, eq)));
    const std::string_view value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line);
    if (!known.at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
    if (!seen.insert(section + "." + key).second) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);

    const std::string full = section + "." + key;
    if (full == "physics.g") cfg.params.g = to_double(value, line, key), phys_line = line;
    else if (full == "physics.p0") cfg.params.p0 = to_double(value, line, key), phys_line = line;
    else if (full == "physics.P_atm") cfg.params.P_atm = to_double(value, line, key);
    else if (full == "physics.c") cfg.params.c = to_double(value, line, key);
    else if (full == "physics.amplitude") {
      cfg.amplitude = to_double(value, line, key);
      if (!(cfg.amplitude > 0.0)) throw ConfigError("amplitude must be positive", line);
    } else if (full == "physics.amplitude_unit") {
      if (value == "depth") cfg.amplitude_relative = true;
      else if (value == "length") cfg.amplitude_relative = false;
      else throw ConfigError("amplitude_unit must be 'depth' or 'length'", line);
    } else if (full == "physics.steps") {
      cfg.steps = to_int<int>(value, line, key);
      if (cfg.steps < 1) throw ConfigError("steps must be at least 1", line);
    } else if (full == "vorticity.kind") kind = std::string(value), kind_line = line;
    else if (full == "vorticity.gamma0") cfg.vorticity.gamma0 = to_double(value, line, key);
    else if (full == "vorticity.beta") cfg.vorticity.beta = to_double(value, line, key);
    else if (full == "grid.nq") cfg.nq = to_int<int>(value, line, key), grid_line = line;
    else if (full == "grid.np") cfg.np = to_int<int>(value, line, key), grid_line = line;
    else if (full == "solver.tolerance") {
      cfg.newton.tolerance = to_double(value, line, key);
      if (!(cfg.newton.tolerance > 0.0)) throw ConfigError("tolerance must be positive", line);
    } else if (full == "solver.max_iterations") {
      cfg.newton.max_iterations = to_int<int>(value, line, key);
      if (cfg.newton.max_iterations < 1) throw ConfigError("max_iterations must be at least 1", line);
    } else if (full == "solver.max_halvings") {
      cfg.newton.max_halvings = to_int<int>(value, line, key);
      if (cfg.newton.max_halvings < 0) throw ConfigError("max_halvings must be nonnegative", line);
    } else if (full == "output.dir") {
      if (value.empty()) throw ConfigError("output dir must not be empty", line);
      cfg.out_dir = std::string(value);
    } else if (full == "output.plots") cfg.plots = to_bool(value, line, key);
    else if (full == "run.seed") cfg.seed = to_int<std::uint64_t>(value, line, key);
    else if (full == "run.workers") {
      cfg.workers = to_int<int>(value, line, key);
      if (cfg.workers < 1) throw ConfigError("workers must be at least 1", line);
    } else if (full == "sweep.vorticity") {
      for (auto item : split(value, ',')) {
        if (item.empty()) throw ConfigError("empty entry in sweep vorticity list", line);
        cfg.sweep_vorticity.push_back(parse_sweep_vorticity(item, line));
      }
    } else if (full == "sweep.amplitudes") {
      for (auto item : split(value, ',')) {
        if (item.empty()) throw ConfigError("empty entry in sweep amplitude list", line);
        const double a = to_double(item, line, key);
        if (!(a > 0.0)) throw ConfigError("sweep amplitudes must be positive", line);
        cfg.sweep_amplitudes.push_back(a);
      }
    }
  }

  try {
    cfg.vorticity = VorticitySpec::make(vorticity_kind_from_string(kind), cfg.vorticity.gamma0, cfg.vorticity.beta);
  } catch (const OutOfRange& e) {
    throw ConfigError(e.what(), kind_line);
  }
  try {
    cfg.params.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), phys_line);
  }
  try {
    cfg.grid().validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), grid_line);
  }
  return cfg;
}

inline RunConfig parse_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  return parse_config(in);
}

/// "129x65" -> {129, 65}.
inline std::pair<int, int> parse_grid_spec(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) throw ConfigError("grid must look like NqxNp, got '" + std::string(s) + "'", 0);
  const int nq = config_detail::to_int<int>(s.substr(0, x), 0, "grid");
  const int np = config_detail::to_int<int>(s.substr(x + 1), 0, "grid");
  return {nq, np};
}

} // namespace wavelab
