#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wavelab/analysis.hpp"
#include "wavelab/config.hpp"
#include "wavelab/io.hpp"
#include "wavelab/runner.hpp"
#include "wavelab/svg.hpp"

using namespace wavelab;
using namespace wavelab::testing;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wavelab_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

int config_error_line(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

} // namespace

TEST(HeightFieldJson, RoundTripIsExact) {
  const auto f = solve_wave(VorticitySpec::affine(-0.5, 0.1), 33, 17, 0.02, 2);
  const auto dir = scratch("field");
  write_json_file(dir / "f.json", to_json(f));
  const auto back = height_field_from_json(read_json_file(dir / "f.json"));
  EXPECT_EQ(back, f);
}

TEST(HeightFieldJson, SchemaIsChecked) {
  const auto f = solve_wave(VorticitySpec::zero(), 33, 17, 0.02, 1);
  auto j = to_json(f);
  j["schema"] = "something.else";
  EXPECT_THROW(height_field_from_json(j), SchemaError);
  j = to_json(f);
  j["version"] = 99;
  EXPECT_THROW(height_field_from_json(j), SchemaError);
  j = to_json(f);
  j["h"].erase(0);
  EXPECT_THROW(height_field_from_json(j), SchemaError);
  j = to_json(f);
  j.erase("depth");
  EXPECT_THROW(height_field_from_json(j), SchemaError);
  j = to_json(f);
  j["vorticity"]["kind"] = "spline";
  EXPECT_THROW(height_field_from_json(j), SchemaError);
}

TEST(ReportJson, VerdictsRoundTrip) {
  const auto f = solve_wave(VorticitySpec::zero(), 65, 33, 0.02, 2);
  const auto rep = analyze(f);
  const auto j = to_json(rep);
  EXPECT_EQ(j["schema"], "wavelab.analysis_report");
  EXPECT_EQ(j["overall"], rep.any_failure() ? "fail" : "pass");
  const auto back = verdicts_from_report(j);
  ASSERT_EQ(back.size(), rep.verdicts.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].name, rep.verdicts[k].name);
    EXPECT_EQ(back[k].status, rep.verdicts[k].status);
    EXPECT_EQ(back[k].worst_violation, rep.verdicts[k].worst_violation);
    EXPECT_EQ(back[k].locations, rep.verdicts[k].locations);
  }
}

TEST(ReportJson, NonFiniteNumbersBecomeNull) {
  PropertyVerdict v = judge("x", std::numeric_limits<double>::infinity(), 1.0, {}, 1);
  const auto j = to_json(v);
  EXPECT_TRUE(j["worst_violation"].is_null());
  EXPECT_TRUE(std::isnan(verdict_from_json(j).worst_violation));
}

TEST(Summary, ListsEveryVerdict) {
  std::vector<PropertyVerdict> vs = {judge("alpha", 0.0, 1.0, {}, 1), judge("beta", 2.0, 1.0, {0.25, -0.5}, 1),
                                     not_applicable("gamma", "why not")};
  std::ostringstream os;
  write_summary(os, vs);
  const auto s = os.str();
  EXPECT_NE(s.find("alpha"), std::string::npos);
  EXPECT_NE(s.find("fail"), std::string::npos);
  EXPECT_NE(s.find("(0.25, -0.5)"), std::string::npos);
  EXPECT_NE(s.find("not-applicable"), std::string::npos);
  EXPECT_NE(s.find("why not"), std::string::npos);
}

TEST(Config, DefaultsDescribeTheStandardSetup) {
  const auto cfg = parse_config(std::string_view{});
  EXPECT_EQ(cfg.params.g, 9.81);
  EXPECT_NEAR(cfg.params.p0, unit_depth_p0(), 1e-6);
  EXPECT_EQ(cfg.nq, 129);
  EXPECT_EQ(cfg.np, 65);
  EXPECT_EQ(cfg.vorticity, VorticitySpec::zero());
}

TEST(Config, ParsesEverySection) {
  const auto cfg = parse_config(R"(
# comment
[physics]
g = 9.81
p0 = -2.0
P_atm = 1.5
amplitude = 0.02   # trailing comment
amplitude_unit = length
steps = 3
[vorticity]
kind = affine
beta = -0.5
gamma0 = 0.1
[grid]
nq = 65
np = 33
[solver]
tolerance = 1e-11
max_iterations = 30
max_halvings = 10
[output]
dir = out/here
plots = true
[run]
seed = 42
workers = 2
[sweep]
vorticity = zero, constant:0.3, affine:-0.5:0.1
amplitudes = 0.01, 0.05
)");
  EXPECT_EQ(cfg.params.p0, -2.0);
  EXPECT_EQ(cfg.params.P_atm, 1.5);
  EXPECT_EQ(cfg.amplitude, 0.02);
  EXPECT_FALSE(cfg.amplitude_relative);
  EXPECT_EQ(cfg.steps, 3);
  EXPECT_EQ(cfg.vorticity, VorticitySpec::affine(-0.5, 0.1));
  EXPECT_EQ(cfg.grid(), Grid(65, 33, -2.0));
  EXPECT_EQ(cfg.newton.tolerance, 1e-11);
  EXPECT_EQ(cfg.newton.max_iterations, 30);
  EXPECT_EQ(cfg.newton.max_halvings, 10);
  EXPECT_EQ(cfg.out_dir, "out/here");
  EXPECT_TRUE(cfg.plots);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.workers, 2);
  ASSERT_EQ(cfg.sweep_vorticity.size(), 3u);
  EXPECT_EQ(cfg.sweep_vorticity[1].spec, VorticitySpec::constant(0.3));
  EXPECT_EQ(cfg.sweep_vorticity[2].spec, VorticitySpec::affine(-0.5, 0.1));
  EXPECT_EQ(cfg.sweep_vorticity[2].label, "affine:-0.5:0.1");
  EXPECT_EQ(cfg.sweep_amplitudes, (std::vector<double>{0.01, 0.05}));
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  try {
    parse_config("[vorticity]\nkind = constant\ngamma00 = 0.3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("gamma00"), std::string::npos);
  }
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_EQ(config_error_line("[physics]\ng = 9.81\ng = 9.8\n"), 3);
  EXPECT_EQ(config_error_line("g = 9.81\n"), 1);
  EXPECT_EQ(config_error_line("[physic]\n"), 1);
  EXPECT_EQ(config_error_line("[physics\n"), 1);
  EXPECT_EQ(config_error_line("[physics]\ng 9.81\n"), 2);
  EXPECT_EQ(config_error_line("[physics]\ng = nine\n"), 2);
  EXPECT_EQ(config_error_line("[physics]\ng = 9.81x\n"), 2);
  EXPECT_EQ(config_error_line("[physics]\np0 = 1\n"), 2);
  EXPECT_EQ(config_error_line("[grid]\nnq = 8\n"), 2);
  EXPECT_EQ(config_error_line("[vorticity]\nkind = spline\n"), 2);
  EXPECT_EQ(config_error_line("[output]\nplots = maybe\n"), 2);
  EXPECT_EQ(config_error_line("[sweep]\nvorticity = zero,,constant:1\n"), 2);
  EXPECT_EQ(config_error_line("[sweep]\nvorticity = affine\n"), 2);
  EXPECT_EQ(config_error_line("[sweep]\namplitudes = 0.01, -1\n"), 2);
  EXPECT_EQ(config_error_line("[physics]\nsteps = 0\n"), 2);
}

TEST(Config, GridSpec) {
  EXPECT_EQ(parse_grid_spec("129x65"), (std::pair{129, 65}));
  EXPECT_THROW(parse_grid_spec("129"), ConfigError);
  EXPECT_THROW(parse_grid_spec("axb"), ConfigError);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/wavelab.ini"), ConfigError); }

TEST(Sweep, EmptyListsAreRejected) {
  auto cfg = parse_config("[sweep]\namplitudes = 0.01\n");
  EXPECT_THROW(sweep_cells(cfg), ConfigError);
  cfg = parse_config("[sweep]\nvorticity = zero\n");
  EXPECT_THROW(sweep_cells(cfg), ConfigError);
  std::ostringstream log;
  cfg.out_dir = scratch("empty_sweep").string();
  EXPECT_EQ(cmd_sweep(cfg, log), exit_input_error);
}

TEST(Sweep, CellsAreTheCrossProductInOrder) {
  const auto cfg = parse_config("[sweep]\nvorticity = zero, constant:-0.3\namplitudes = 0.01, 0.05\n");
  const auto cells = sweep_cells(cfg);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].name, "00_zero_a0.01");
  EXPECT_EQ(cells[3].name, "03_constant_-0.3_a0.05");
  EXPECT_EQ(cells[2].vorticity.spec, VorticitySpec::constant(-0.3));
}

TEST(Svg, PlotsAreDeterministicAndWellFormed) {
  const auto f = solve_wave(VorticitySpec::zero(), 33, 17, 0.02, 1);
  const auto rep = analyze(f, {.refinement = false, .discrete_eigenvalue = false});
  std::ostringstream a, b;
  svg::write(a, svg::surface_plot(f, rep));
  svg::write(b, svg::surface_plot(f, rep));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("<svg", 0), 0u);
  EXPECT_NE(a.str().find("</svg>"), std::string::npos);
  std::ostringstream c;
  svg::write(c, svg::displacement_plot(rep.displacement));
  EXPECT_NE(c.str().find("<polyline"), std::string::npos);
}
