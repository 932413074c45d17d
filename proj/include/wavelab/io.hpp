#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "wavelab/analysis.hpp"
#include "wavelab/error.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/height_solver.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

using json = nlohmann::ordered_json;

inline constexpr int field_schema_version = 1;
inline constexpr int report_schema_version = 1;
inline constexpr std::string_view field_schema = "wavelab.height_field";
inline constexpr std::string_view report_schema = "wavelab.analysis_report";

namespace io_detail {

/// JSON has no NaN or infinity; they become null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void expect_schema(const json& j, std::string_view name, int version) {
  if (!j.is_object()) throw SchemaError("document is not a JSON object");
  const auto s = get<std::string>(j, "schema");
  if (s != name) throw SchemaError("schema '" + s + "' where '" + std::string(name) + "' was expected");
  const int v = get<int>(j, "version");
  if (v != version) throw SchemaError("unsupported " + s + " version " + std::to_string(v));
}

} // namespace io_detail

inline json to_json(const PhysicalParams& p) {
  return json{{"g", p.g}, {"p0", p.p0}, {"Q", p.Q}, {"P_atm", p.P_atm}, {"c", p.c}};
}

inline json to_json(const VorticitySpec& v) {
  return json{{"kind", std::string(to_string(v.kind))}, {"gamma0", v.gamma0}, {"beta", v.beta}};
}

inline json to_json(const Grid& g) { return json{{"nq", g.nq}, {"np", g.np}, {"p0", g.p0}}; }

inline PhysicalParams params_from_json(const json& j) {
  using io_detail::get;
  PhysicalParams p;
  p.g = get<double>(j, "g");
  p.p0 = get<double>(j, "p0");
  p.Q = get<double>(j, "Q");
  p.P_atm = get<double>(j, "P_atm");
  p.c = get<double>(j, "c");
  return p;
}

inline VorticitySpec vorticity_from_json(const json& j) {
  using io_detail::get;
  try {
    return VorticitySpec::make(vorticity_kind_from_string(get<std::string>(j, "kind")), get<double>(j, "gamma0"),
                               get<double>(j, "beta"));
  } catch (const OutOfRange& e) {
    throw SchemaError(e.what());
  }
}

/// {schema, version, params, vorticity, grid, depth, h}; h is row-major
/// (index j*nq + i, j counting p-levels up from the bed).
inline json to_json(const HeightField& f) {
  json h = json::array();
  for (double x : f.h.values()) h.push_back(x);
  return json{{"schema", field_schema},        {"version", field_schema_version}, {"params", to_json(f.params)},
              {"vorticity", to_json(f.vorticity)}, {"grid", to_json(f.grid())},      {"depth", f.depth},
              {"h", std::move(h)}};
}

inline HeightField height_field_from_json(const json& j) {
  using io_detail::get;
  io_detail::expect_schema(j, field_schema, field_schema_version);
  const auto& jg = j.at("grid");
  const Grid g(get<int>(jg, "nq"), get<int>(jg, "np"), get<double>(jg, "p0"));
  try {
    g.validate();
  } catch (const Error& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  }
  auto values = get<std::vector<double>>(j, "h");
  if (values.size() != g.size()) {
    throw SchemaError("h has " + std::to_string(values.size()) + " values, grid needs " + std::to_string(g.size()));
  }
  HeightField f;
  f.h = Field2D(g, std::move(values));
  f.params = params_from_json(get<json>(j, "params"));
  f.vorticity = vorticity_from_json(get<json>(j, "vorticity"));
  f.depth = get<double>(j, "depth");
  return f;
}

inline json to_json(const PropertyVerdict& v) {
  using io_detail::number;
  json locs = json::array();
  for (const auto& l : v.locations) locs.push_back(json{{"x", number(l.x)}, {"y", number(l.y)}});
  json metrics = json::object();
  for (const auto& [k, m] : v.metrics) metrics[k] = number(m);
  return json{{"name", v.name},
              {"status", std::string(to_string(v.status))},
              {"worst_violation", number(v.worst_violation)},
              {"tolerance", number(v.tolerance)},
              {"samples", v.samples},
              {"locations", std::move(locs)},
              {"metrics", std::move(metrics)},
              {"note", v.note}};
}

inline VerdictStatus verdict_status_from_string(std::string_view s) {
  if (s == "pass") return VerdictStatus::pass;
  if (s == "fail") return VerdictStatus::fail;
  if (s == "not-applicable") return VerdictStatus::not_applicable;
  throw SchemaError("unknown verdict status '" + std::string(s) + "'");
}

inline double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline PropertyVerdict verdict_from_json(const json& j) {
  using io_detail::get;
  PropertyVerdict v;
  v.name = get<std::string>(j, "name");
  v.status = verdict_status_from_string(get<std::string>(j, "status"));
  v.worst_violation = number_or_nan(j.at("worst_violation"));
  v.tolerance = number_or_nan(j.at("tolerance"));
  v.samples = get<std::size_t>(j, "samples");
  for (const auto& l : j.at("locations")) v.locations.push_back({number_or_nan(l.at("x")), number_or_nan(l.at("y"))});
  for (const auto& [k, m] : j.at("metrics").items()) v.metrics.emplace_back(k, number_or_nan(m));
  v.note = get<std::string>(j, "note");
  return v;
}

inline json to_json(const AnalysisReport& r) {
  using io_detail::number;
  json infl = json::array();
  for (const auto& s : r.inflections) {
    json pos = json::array();
    for (double x : s.positions) pos.push_back(number(x));
    infl.push_back(json{{"level", s.level}, {"p", s.p}, {"count", s.count()}, {"eps_curv", number(s.eps_curv)},
                        {"positions", std::move(pos)}});
  }
  json disp = json::array();
  for (const auto& d : r.displacement) {
    disp.push_back(json{{"level", d.level}, {"p", d.p}, {"mean_depth", number(d.mean_depth)}, {"H", number(d.H)}});
  }
  json verdicts = json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
  json fails = json::array();
  for (int l : r.rise_then_fall_failures) fails.push_back(l);
  return json{{"schema", report_schema},
              {"version", report_schema_version},
              {"grid", to_json(r.grid)},
              {"params", to_json(r.params)},
              {"vorticity", to_json(r.vorticity)},
              {"monotonicity_class", std::string(to_string(r.vorticity.monotonicity_class()))},
              {"depth", number(r.depth)},
              {"amplitude", number(r.amplitude)},
              {"eigenvalue",
               json{{"rectangle_bound", number(r.eigenvalue.rectangle_bound)},
                    {"discrete", number(r.eigenvalue.discrete)},
                    {"iterations", r.eigenvalue.iterations}}},
              {"admissibility", std::string(to_string(r.admissibility))},
              {"overall", r.any_failure() ? "fail" : "pass"},
              {"verdicts", std::move(verdicts)},
              {"inflections", std::move(infl)},
              {"displacement", std::move(disp)},
              {"rise_then_fall_failures", std::move(fails)}};
}

/// Verdicts of a serialized report; the rest of the document is informational.
inline std::vector<PropertyVerdict> verdicts_from_report(const json& j) {
  io_detail::expect_schema(j, report_schema, report_schema_version);
  std::vector<PropertyVerdict> out;
  for (const auto& v : j.at("verdicts")) out.push_back(verdict_from_json(v));
  return out;
}

/// Fixed-width table of verdicts.
inline void write_summary(std::ostream& os, const std::vector<PropertyVerdict>& verdicts) {
  os << std::left << std::setw(30) << "check" << std::setw(16) << "status" << std::right << std::setw(14)
     << "violation" << std::setw(14) << "tolerance" << "  where\n";
  for (const auto& v : verdicts) {
    os << std::left << std::setw(30) << v.name << std::setw(16) << to_string(v.status) << std::right
       << std::setprecision(4) << std::scientific << std::setw(14) << v.worst_violation << std::setw(14) << v.tolerance
       << std::defaultfloat;
    if (!v.locations.empty()) {
      os << "  (" << std::setprecision(6) << v.locations.front().x << ", " << v.locations.front().y << ")";
    }
    if (!v.note.empty()) os << "  " << v.note;
    os << '\n';
  }
}

inline void write_summary(std::ostream& os, const AnalysisReport& r) {
  os << "grid " << r.grid.nq << "x" << r.grid.np << ", vorticity " << to_string(r.vorticity.kind)
     << " (gamma0 = " << r.vorticity.gamma0 << ", beta = " << r.vorticity.beta << "), class "
     << to_string(r.vorticity.monotonicity_class()) << '\n';
  os << "depth " << r.depth << ", amplitude " << r.amplitude << ", Q " << r.params.Q << '\n';
  os << "lambda1: rectangle bound " << r.eigenvalue.rectangle_bound << ", discrete " << r.eigenvalue.discrete
     << "; vorticity admissibility " << to_string(r.admissibility) << "\n\n";
  write_summary(os, r.verdicts);
  os << "\noverall: " << (r.any_failure() ? "FAIL" : "PASS") << '\n';
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

/// Writes `doc` with two-space indentation and a trailing newline.
inline void write_json_file(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

template <class Writer>
void write_text_file(const std::filesystem::path& path, Writer write) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
}

} // namespace wavelab
