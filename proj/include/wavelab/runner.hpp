#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wavelab/analysis.hpp"
#include "wavelab/config.hpp"
#include "wavelab/fields.hpp"
#include "wavelab/height_solver.hpp"
#include "wavelab/io.hpp"
#include "wavelab/laminar.hpp"
#include "wavelab/svg.hpp"

namespace wavelab {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_input_error = 1, exit_incomplete = 2 };

inline constexpr std::string_view trace_schema = "wavelab.trace";
inline constexpr std::string_view sweep_schema = "wavelab.sweep";

/// A continuation run together with the laminar flow it started from.
struct BranchRun {
  Bifurcation bifurcation;
  double target = 0.0;
  ContinuationTrace trace;
};

inline BranchRun solve_branch(const RunConfig& cfg, const VorticitySpec& spec, double amplitude, bool relative) {
  const Grid grid = cfg.grid();
  BranchRun run;
  run.bifurcation = bifurcation_head(spec, cfg.params.g, cfg.params.p0, grid.np, discrete_k2(grid));
  run.target = relative ? amplitude * run.bifurcation.laminar.depth() : amplitude;
  run.trace = continue_in_amplitude(spec, cfg.params, grid, run.target, cfg.steps, cfg.newton);
  return run;
}

inline json trace_json(const BranchRun& run) {
  json members = json::array();
  for (std::size_t k = 0; k < run.trace.members.size(); ++k) {
    const auto& m = run.trace.members[k];
    std::ostringstream name;
    name << "member_" << std::setw(3) << std::setfill('0') << k << ".json";
    members.push_back(json{{"amplitude", m.amplitude},
                           {"Q", m.Q},
                           {"iterations", m.iterations},
                           {"residual", m.residual},
                           {"file", name.str()}});
  }
  return json{{"schema", trace_schema},
              {"version", 1},
              {"Q_star", run.trace.Q_star},
              {"laminar_depth", run.trace.laminar_depth},
              {"target_amplitude", run.target},
              {"complete", run.trace.complete},
              {"message", run.trace.message},
              {"members", std::move(members)}};
}

inline void write_trace(const fs::path& dir, const BranchRun& run) {
  const json index = trace_json(run);
  for (std::size_t k = 0; k < run.trace.members.size(); ++k) {
    write_json_file(dir / index["members"][k]["file"].get<std::string>(), to_json(run.trace.members[k].field));
  }
  write_json_file(dir / "trace.json", index);
  write_text_file(dir / "laminar.csv", [&](std::ostream& os) { write_csv(os, run.bifurcation.laminar); });
}

inline void write_plots(const fs::path& dir, const HeightField& f, const AnalysisReport& rep) {
  const auto vf = velocity_from_height(f);
  write_text_file(dir / "surface.svg", [&](std::ostream& os) { svg::write(os, svg::surface_plot(f, rep)); });
  write_text_file(dir / "v_streamlines.svg", [&](std::ostream& os) { svg::write(os, svg::velocity_plot(f, vf)); });
  write_text_file(dir / "displacement.svg",
                  [&](std::ostream& os) { svg::write(os, svg::displacement_plot(rep.displacement)); });
}

/// Report, summary, field CSV and the profiles of streamlines that failed rise-then-fall.
/// A field that breaks its invariants gets the report files only.
inline void write_analysis(const fs::path& dir, const std::string& stem, const HeightField& f,
                           const AnalysisReport& rep, bool plots) {
  write_json_file(dir / (stem + ".report.json"), to_json(rep));
  write_text_file(dir / (stem + ".report.txt"), [&](std::ostream& os) { write_summary(os, rep); });
  const auto* inv = rep.find("field_invariants");
  if (inv && inv->failed()) return;
  const auto vf = velocity_from_height(f);
  const auto P = pressure_from_bernoulli(vf);
  write_text_file(dir / (stem + ".field.csv"), [&](std::ostream& os) { write_csv(os, vf, P); });
  for (int level : rep.rise_then_fall_failures) {
    const auto sl = extract_streamline(f, vf, f.grid().p(level));
    const auto head = bernoulli_head(sl, f.vorticity, f.params);
    write_text_file(dir / (stem + ".streamline_" + std::to_string(level) + ".csv"),
                    [&](std::ostream& os) { write_csv(os, sl, head.E); });
  }
  if (plots) write_plots(dir / (stem + ".plots"), f, rep);
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& log) {
  BranchRun run;
  try {
    run = solve_branch(cfg, cfg.vorticity, cfg.amplitude, cfg.amplitude_relative);
  } catch (const Error& e) {
    log << "solve: " << e.what() << '\n';
    return exit_input_error;
  }
  const fs::path dir = fs::path(cfg.out_dir) / "trace";
  write_trace(dir, run);
  log << "Q* = " << run.trace.Q_star << ", laminar depth " << run.trace.laminar_depth << ", target amplitude "
      << run.target << '\n';
  for (const auto& m : run.trace.members) {
    log << "  a = " << m.amplitude << "  Q = " << std::setprecision(10) << m.Q << std::setprecision(6)
        << "  iterations " << m.iterations << "  residual " << m.residual << '\n';
  }
  if (cfg.plots && !run.trace.members.empty()) {
    const auto& f = run.trace.members.back().field;
    AnalysisOptions opt;
    opt.refinement = false;
    opt.discrete_eigenvalue = false;
    write_plots(dir / "plots", f, analyze(f, opt));
  }
  if (!run.trace.complete) {
    log << "partial trace: " << run.trace.message << '\n';
    return exit_incomplete;
  }
  return exit_ok;
}

/// Field files named by `path`: the file itself, or every member_*.json of a trace directory.
inline std::vector<fs::path> field_files(const fs::path& path) {
  if (!fs::exists(path)) throw Error("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(path)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("member_", 0) == 0 && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no member_*.json files in " + path.string());
  return out;
}

inline int cmd_analyze(const std::vector<fs::path>& inputs, const RunConfig& cfg, std::ostream& log) {
  std::vector<std::pair<fs::path, HeightField>> fields;
  try {
    for (const auto& in : inputs) {
      for (const auto& file : field_files(in)) fields.emplace_back(file, height_field_from_json(read_json_file(file)));
    }
  } catch (const Error& e) {
    log << "analyze: " << e.what() << '\n';
    return exit_input_error;
  }
  AnalysisOptions opt;
  opt.newton = cfg.newton;
  bool failed = false;
  for (const auto& [file, f] : fields) {
    AnalysisReport rep;
    try {
      rep = analyze(f, opt);
    } catch (const Error& e) {
      log << file.string() << ": analysis aborted: " << e.what() << '\n';
      failed = true;
      continue;
    }
    write_analysis(cfg.out_dir, file.stem().string(), f, rep, cfg.plots);
    log << "== " << file.string() << '\n';
    write_summary(log, rep);
    failed = failed || rep.any_failure();
  }
  return failed ? exit_incomplete : exit_ok;
}

/// One row of a sweep: a vorticity and an amplitude.
struct SweepCell {
  std::size_t index = 0;
  SweepVorticity vorticity;
  double amplitude = 0.0;
  std::string name;
};

inline std::vector<SweepCell> sweep_cells(const RunConfig& cfg) {
  if (cfg.sweep_vorticity.empty()) throw ConfigError("sweep needs a nonempty [sweep] vorticity list", 0);
  if (cfg.sweep_amplitudes.empty()) throw ConfigError("sweep needs a nonempty [sweep] amplitudes list", 0);
  std::vector<SweepCell> cells;
  for (const auto& v : cfg.sweep_vorticity) {
    for (double a : cfg.sweep_amplitudes) {
      SweepCell c;
      c.index = cells.size();
      c.vorticity = v;
      c.amplitude = a;
      std::ostringstream name;
      name << std::setw(2) << std::setfill('0') << c.index << '_';
      for (char ch : v.label) name << (ch == ':' ? '_' : ch);
      name << "_a" << a;
      c.name = name.str();
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

/// Runs one sweep cell end to end and returns its row of the matrix report.
inline json run_cell(const RunConfig& cfg, const SweepCell& cell) {
  const fs::path dir = fs::path(cfg.out_dir) / "cells" / cell.name;
  const auto& spec = cell.vorticity.spec;
  json row{{"index", cell.index},
           {"name", cell.name},
           {"vorticity", to_json(spec)},
           {"monotonicity_class", std::string(to_string(spec.monotonicity_class()))},
           {cfg.amplitude_relative ? "amplitude_over_depth" : "amplitude", cell.amplitude}};
  BranchRun run;
  try {
    run = solve_branch(cfg, spec, cell.amplitude, cfg.amplitude_relative);
  } catch (const Error& e) {
    row["complete"] = false;
    row["message"] = e.what();
    row["overall"] = "fail";
    return row;
  }
  row["Q_star"] = run.trace.Q_star;
  row["laminar_depth"] = run.trace.laminar_depth;
  row["target_amplitude"] = run.target;
  row["complete"] = run.trace.complete;
  row["message"] = run.trace.message;
  write_trace(dir / "trace", run);
  if (run.trace.members.empty()) {
    row["overall"] = "fail";
    return row;
  }
  const auto& f = run.trace.members.back().field;
  AnalysisOptions opt;
  opt.newton = cfg.newton;
  AnalysisReport rep;
  try {
    rep = analyze(f, opt);
    const double err = jacobian_spot_check(f, cfg.seed + cell.index);
    rep.verdicts.insert(rep.verdicts.begin() + 1, judge("jacobian_consistency", err, 1e-6, {0.0, 0.0}, 5));
  } catch (const Error& e) {
    row["message"] = std::string("analysis aborted: ") + e.what();
    row["overall"] = "fail";
    return row;
  }
  write_analysis(dir, "wave", f, rep, cfg.plots);
  row["Q"] = f.params.Q;
  row["depth"] = f.depth;
  row["amplitude_value"] = f.amplitude();
  json verdicts = json::object();
  for (const auto& v : rep.verdicts) {
    verdicts[v.name] = json{{"status", std::string(to_string(v.status))},
                            {"worst_violation", io_detail::number(v.worst_violation)},
                            {"tolerance", io_detail::number(v.tolerance)}};
  }
  row["verdicts"] = std::move(verdicts);
  row["overall"] = (rep.any_failure() || !run.trace.complete) ? "fail" : "pass";
  return row;
}

/// Column abbreviations for the sweep table.
inline std::string short_status(const json& row, const std::string& name) {
  if (!row.contains("verdicts") || !row["verdicts"].contains(name)) return "-";
  const auto s = row["verdicts"][name]["status"].get<std::string>();
  return s == "pass" ? "ok" : s == "fail" ? "FAIL" : "n/a";
}

inline void write_sweep_table(std::ostream& os, const json& sweep) {
  std::vector<std::string> columns;
  for (const auto& row : sweep["cells"]) {
    if (!row.contains("verdicts")) continue;
    for (const auto& [k, v] : row["verdicts"].items()) {
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    }
  }
  os << std::left << std::setw(34) << "run";
  for (std::size_t c = 0; c < columns.size(); ++c) os << std::setw(6) << ("c" + std::to_string(c + 1));
  os << "overall\n";
  for (const auto& row : sweep["cells"]) {
    os << std::setw(34) << row["name"].get<std::string>();
    for (const auto& c : columns) os << std::setw(6) << short_status(row, c);
    os << row["overall"].get<std::string>() << '\n';
  }
  os << "\ncolumns:\n";
  for (std::size_t c = 0; c < columns.size(); ++c) os << "  c" << c + 1 << " = " << columns[c] << '\n';
}

inline json run_sweep(const RunConfig& cfg) {
  const auto cells = sweep_cells(cfg);
  std::vector<json> rows(cells.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) rows[k] = run_cell(cfg, cells[k]);
      });
    }
  }
  json out{{"schema", sweep_schema},
           {"version", 1},
           {"seed", cfg.seed},
           {"grid", to_json(cfg.grid())},
           {"params", json{{"g", cfg.params.g}, {"p0", cfg.params.p0}, {"P_atm", cfg.params.P_atm}}},
           {"steps", cfg.steps},
           {"amplitude_unit", cfg.amplitude_relative ? "depth" : "length"},
           {"cells", json::array()}};
  bool ok = true;
  for (auto& r : rows) {
    ok = ok && r["overall"] == "pass";
    out["cells"].push_back(std::move(r));
  }
  out["overall"] = ok ? "pass" : "fail";
  return out;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  json sweep;
  try {
    sweep = run_sweep(cfg);
  } catch (const ConfigError& e) {
    log << "sweep: " << e.what() << '\n';
    return exit_input_error;
  }
  write_json_file(fs::path(cfg.out_dir) / "sweep.json", sweep);
  write_text_file(fs::path(cfg.out_dir) / "sweep.txt", [&](std::ostream& os) { write_sweep_table(os, sweep); });
  write_sweep_table(log, sweep);
  return sweep["overall"] == "pass" ? exit_ok : exit_incomplete;
}

/// Prints the summary of saved analysis or sweep reports.
inline int cmd_report(const std::vector<fs::path>& inputs, std::ostream& out, std::ostream& log) {
  try {
    for (const auto& in : inputs) {
      const json doc = read_json_file(in);
      if (!doc.is_object() || !doc.contains("schema")) throw SchemaError(in.string() + ": not a wavelab document");
      out << "== " << in.string() << '\n';
      if (doc["schema"] == sweep_schema) {
        write_sweep_table(out, doc);
      } else {
        write_summary(out, verdicts_from_report(doc));
        out << "overall: " << doc.at("overall").get<std::string>() << '\n';
      }
    }
  } catch (const Error& e) {
    log << "report: " << e.what() << '\n';
    return exit_input_error;
  } catch (const json::exception& e) {
    log << "report: " << e.what() << '\n';
    return exit_input_error;
  }
  return exit_ok;
}

} // namespace wavelab
