#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wavelab/config.hpp"
#include "wavelab/runner.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::string grid;
  double tol = 0.0;
  bool plots = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--grid", o.grid, "grid as NqxNp, e.g. 129x65");
  cmd->add_option("--tol", o.tol, "Newton tolerance on the max-norm residual")->check(CLI::PositiveNumber);
  cmd->add_flag("--plots", o.plots, "write SVG plots");
}

wavelab::RunConfig resolve(const Overrides& o) {
  auto cfg = o.config.empty() ? wavelab::parse_config(std::string_view{}) : wavelab::load_config(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.grid.empty()) {
    const auto [nq, np] = wavelab::parse_grid_spec(o.grid);
    cfg.nq = nq;
    cfg.np = np;
    try {
      cfg.grid().validate();
    } catch (const wavelab::Error& e) {
      throw wavelab::ConfigError(std::string("--grid: ") + e.what());
    }
  }
  if (o.tol > 0.0) cfg.newton.tolerance = o.tol;
  if (o.plots) cfg.plots = true;
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady periodic water waves: solve, analyze, sweep, report"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::string> inputs;

  auto* solve = app.add_subcommand("solve", "continue from the laminar flow to the target amplitude");
  add_common(solve, o);
  auto* analyze = app.add_subcommand("analyze", "run the property battery on field files or trace directories");
  add_common(analyze, o);
  analyze->add_option("inputs", inputs, "field JSON files or trace directories")->required();
  auto* sweep = app.add_subcommand("sweep", "cross product of vorticities and amplitudes");
  add_common(sweep, o);
  auto* report = app.add_subcommand("report", "print summaries of saved report or sweep JSON files");
  report->add_option("inputs", inputs, "report.json or sweep.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wavelab::exit_input_error;
  }

  try {
    if (*report) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      return wavelab::cmd_report(paths, std::cout, std::cerr);
    }
    const auto cfg = resolve(o);
    if (*solve) return wavelab::cmd_solve(cfg, std::cout);
    if (*analyze) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      return wavelab::cmd_analyze(paths, cfg, std::cout);
    }
    return wavelab::cmd_sweep(cfg, std::cout);
  } catch (const wavelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return wavelab::exit_input_error;
  } catch (const wavelab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return wavelab::exit_input_error;
  }
}
