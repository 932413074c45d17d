#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "wavelab/derivatives.hpp"
#include "wavelab/error.hpp"
#include "wavelab/fields.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/height_solver.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

enum class VerdictStatus { pass, fail, not_applicable };

inline std::string_view to_string(VerdictStatus s) {
  switch (s) {
  case VerdictStatus::pass: return "pass";
  case VerdictStatus::fail: return "fail";
  case VerdictStatus::not_applicable: return "not-applicable";
  }
  return "?";
}

struct Location {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Location&) const = default;
};

/// Outcome of one property check. `worst_violation` is measured in the units
/// of the checked quantity; fail implies worst_violation > tolerance.
struct PropertyVerdict {
  std::string name;
  VerdictStatus status = VerdictStatus::not_applicable;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  std::vector<Location> locations;
  std::size_t samples = 0;
  std::vector<std::pair<std::string, double>> metrics;
  std::string note;

  bool passed() const noexcept { return status == VerdictStatus::pass; }
  bool failed() const noexcept { return status == VerdictStatus::fail; }
  /// Pass with the worst violation at most a tenth of the tolerance.
  bool passed_with_margin(double factor = 10.0) const noexcept {
    return passed() && worst_violation <= tolerance / factor;
  }
  std::optional<double> metric(std::string_view key) const {
    for (const auto& [k, v] : metrics) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  bool operator==(const PropertyVerdict&) const = default;
};

inline PropertyVerdict not_applicable(std::string name, std::string why) {
  PropertyVerdict v;
  v.name = std::move(name);
  v.status = VerdictStatus::not_applicable;
  v.note = std::move(why);
  return v;
}

/// Decides pass/fail from a worst violation and its location.
inline PropertyVerdict judge(std::string name, double worst, double tolerance, Location where, std::size_t samples) {
  PropertyVerdict v;
  v.name = std::move(name);
  v.worst_violation = worst;
  v.tolerance = tolerance;
  v.samples = samples;
  v.status = worst > tolerance ? VerdictStatus::fail : VerdictStatus::pass;
  if (v.failed()) v.locations.push_back(where);
  return v;
}

/// Inflection points of one streamline.
struct InflectionSet {
  int level = 0;
  double p = 0.0;
  std::vector<double> positions;
  double eps_curv = 0.0;

  int count() const noexcept { return static_cast<int>(positions.size()); }
};

struct DisplacementPoint {
  int level = 0;
  double p = 0.0;
  double mean_depth = 0.0; ///< y0, the mean of y over the half period
  double H = 0.0;          ///< y(0) - y(pi)
};

namespace analysis_detail {

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Grid scale used for the discretization-noise bands.
inline double band_spacing(const Grid& g, double depth) {
  return std::max(g.dq(), (depth > 0.0 ? depth : 1.0) / (g.np - 1));
}

/// Below this |y_xx| cannot be told apart from rounding in y.
inline double curvature_floor(const Streamline& sl) {
  double ymax = 1.0;
  for (double y : sl.y) ymax = std::max(ymax, std::abs(y));
  return 100.0 * std::numeric_limits<double>::epsilon() * ymax / (sl.dx * sl.dx);
}

inline double slope_band(const std::vector<double>& dvdx, double spacing) {
  return std::max(10.0 * spacing * spacing * max_abs(dvdx), 1e3 * std::numeric_limits<double>::min());
}

} // namespace analysis_detail

/// Noise bands for one streamline.
struct Bands {
  double curv = 0.0;
  double slope = 0.0;
};

inline Bands streamline_bands(const Streamline& sl, double spacing) {
  Bands b;
  b.curv = std::max(10.0 * spacing * spacing * analysis_detail::max_abs(sl.y_xx), analysis_detail::curvature_floor(sl));
  b.slope = analysis_detail::slope_band(sl.dvdx, spacing);
  return b;
}

/// v > 0 in the open half cell and on the surface. Samples on the crest and
/// trough lines (where v vanishes by symmetry) only need v >= -tol; the rest
/// must clear +tol. The interior quantity is shifted by 2 tol so that both
/// share the single threshold tol.
inline PropertyVerdict check_v_positive(const VelocityField& vf) {
  const auto& g = vf.grid();
  double vmax = 0.0;
  for (double v : vf.v.values()) vmax = std::max(vmax, std::abs(v));
  const double vscale = std::abs(vf.u_minus_c(0, g.np - 1));
  if (vmax <= 1e-13 * std::max(vscale, 1.0)) return not_applicable("v_positive", "v vanishes identically (laminar flow)");
  const double tol = 1e-8 * vmax;
  double worst = -std::numeric_limits<double>::infinity();
  Location where;
  std::size_t n = 0;
  for (int j = 1; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const bool lateral = i == 0 || i == g.nq - 1;
      const double q = -vf.v(i, j) + (lateral ? 0.0 : 2.0 * tol);
      ++n;
      if (q > worst) {
        worst = q;
        where = {vf.x(i, j), vf.y(i, j)};
      }
    }
  }
  auto v = judge("v_positive", worst, tol, where, n);
  double min_interior = std::numeric_limits<double>::infinity();
  for (int j = 1; j < g.np; ++j) {
    for (int i = 1; i < g.nq - 1; ++i) min_interior = std::min(min_interior, vf.v(i, j));
  }
  v.metrics = {{"max_v", vmax}, {"min_v_off_symmetry_lines", min_interior}};
  return v;
}

/// Sign changes of y_xx once the band |y_xx| < eps_curv is zeroed; each
/// change gives one inflection at the linear-interpolation root.
inline InflectionSet find_inflection_points(const Streamline& sl, double spacing) {
  const auto bands = streamline_bands(sl, spacing);
  const double floor = analysis_detail::curvature_floor(sl);
  if (analysis_detail::max_abs(sl.y_xx) <= floor) {
    throw DegenerateCurveError("streamline at p = " + std::to_string(sl.p) + " is flat (|y_xx| below noise everywhere)");
  }
  InflectionSet out;
  out.level = sl.level;
  out.p = sl.p;
  out.eps_curv = bands.curv;
  int last = -1;
  for (int i = 0; i < static_cast<int>(sl.y_xx.size()); ++i) {
    if (std::abs(sl.y_xx[i]) < bands.curv) continue;
    if (last >= 0 && (sl.y_xx[i] > 0.0) != (sl.y_xx[last] > 0.0)) {
      const double a = sl.y_xx[last], b = sl.y_xx[i];
      out.positions.push_back(sl.x[last] + (sl.x[i] - sl.x[last]) * a / (a - b));
    }
    last = i;
  }
  return out;
}

/// dv/dx along the streamline has the opposite sign of y_xx wherever both are
/// outside their noise bands.
inline PropertyVerdict check_curvature_monotonicity_law(const Streamline& sl, double spacing) {
  const auto bands = streamline_bands(sl, spacing);
  double worst = 0.0;
  Location where;
  std::size_t checked = 0, mismatched = 0;
  for (std::size_t i = 0; i < sl.x.size(); ++i) {
    if (std::abs(sl.y_xx[i]) <= bands.curv || std::abs(sl.dvdx[i]) <= bands.slope) continue;
    ++checked;
    if ((sl.dvdx[i] > 0.0) == (sl.y_xx[i] > 0.0)) {
      ++mismatched;
      if (std::abs(sl.dvdx[i]) > worst) {
        worst = std::abs(sl.dvdx[i]);
        where = {sl.x[i], sl.y[i]};
      }
    }
  }
  auto v = judge("curvature_monotonicity_law", worst, bands.slope, where, checked);
  v.metrics = {{"mismatch_fraction", checked ? static_cast<double>(mismatched) / checked : 0.0},
               {"eps_curv", bands.curv}};
  return v;
}

/// v rises away from the crest and falls toward the trough. With several
/// (odd) inflections the monotone pieces alternate, starting with a rise.
inline PropertyVerdict check_rise_then_fall(const Streamline& sl, const InflectionSet& infl, double spacing) {
  if (infl.count() % 2 == 0) {
    return not_applicable("rise_then_fall", "streamline has " + std::to_string(infl.count()) + " inflection points");
  }
  const double eps = analysis_detail::slope_band(sl.dvdx, spacing);
  const double dx = sl.dx;
  double worst = 0.0;
  Location where;
  std::size_t n = 0;
  auto segment = [&](double x) {
    return static_cast<int>(std::upper_bound(infl.positions.begin(), infl.positions.end(), x) - infl.positions.begin());
  };
  for (std::size_t i = 0; i + 1 < sl.x.size(); ++i) {
    const int s0 = segment(sl.x[i]), s1 = segment(sl.x[i + 1]);
    if (s0 != s1) continue;
    ++n;
    const double slope = (sl.v[i + 1] - sl.v[i]) / dx;
    const double bad = s0 % 2 == 0 ? -slope : slope;
    if (bad > worst) {
      worst = bad;
      where = {sl.x[i], sl.y[i]};
    }
  }
  for (std::size_t i : {std::size_t{0}, sl.x.size() - 1}) {
    const double end = std::abs(sl.v[i]) / dx;
    if (end > worst) {
      worst = end;
      where = {sl.x[i], sl.y[i]};
    }
  }
  auto v = judge("rise_then_fall", worst, eps, where, n + 2);
  v.metrics = {{"inflections", static_cast<double>(infl.count())}};
  return v;
}

/// Whether the maximum principle for v is available for this vorticity class.
inline Admissibility max_principle_admissible(const VorticitySpec& spec, double lambda1_lower) {
  switch (spec.monotonicity_class()) {
  case MonotonicityClass::irrotational:
  case MonotonicityClass::constant:
  case MonotonicityClass::increasing: return Admissibility::pass;
  case MonotonicityClass::decreasing_bounded: return check_remark41_bound(spec, lambda1_lower);
  case MonotonicityClass::general: return Admissibility::fail;
  }
  return Admissibility::fail;
}

/// The global argmax of v sits on the surface within one cell of the single
/// surface inflection. Also reports the sign of the discrete v_y below the surface.
inline PropertyVerdict locate_max_v(const VelocityField& vf, const InflectionSet& surface_infl, double lambda1_lower) {
  const auto& g = vf.grid();
  if (max_principle_admissible(vf.vorticity, lambda1_lower) != Admissibility::pass) {
    return not_applicable("max_v_location", "vorticity class " + std::string(to_string(vf.vorticity.monotonicity_class())) +
                                                " is outside the maximum-principle classes");
  }
  if (surface_infl.count() != 1) {
    return not_applicable("max_v_location",
                          "surface has " + std::to_string(surface_infl.count()) + " inflection points");
  }
  int bi = 0, bj = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      if (vf.v(i, j) > best) {
        best = vf.v(i, j);
        bi = i;
        bj = j;
      }
    }
  }
  const double x0 = surface_infl.positions.front();
  const double miss = bj == g.np - 1 ? std::abs(g.q(bi) - x0) : pi + std::abs(g.q(bi) - x0);
  auto v = judge("max_v_location", miss, g.dq(), {vf.x(bi, bj), vf.y(bi, bj)}, g.size());
  if (v.failed()) v.locations.push_back({x0, vf.y(g.nq / 2, g.np - 1)});
  std::size_t positive = 0, total = 0;
  double min_step = std::numeric_limits<double>::infinity();
  for (int i = 1; i < g.nq - 1; ++i) {
    for (int j = 1; j < g.np - 1; ++j) {
      const double step = vf.v(i, j + 1) - vf.v(i, j);
      ++total;
      if (step > 0.0) ++positive;
      min_step = std::min(min_step, step);
    }
  }
  // Refined surface argmax (parabola through the top three samples) and the
  // offset from x0 implied by Bernoulli on the surface:
  // dv/dx = -g eta_x^2 / ((u - c)(1 + eta_x^2)) at the inflection.
  const int top = g.np - 1;
  int si = 0;
  for (int i = 1; i < g.nq; ++i) {
    if (vf.v(i, top) > vf.v(si, top)) si = i;
  }
  double x_refined = g.q(si);
  if (si > 0 && si < g.nq - 1) {
    const double a = vf.v(si - 1, top), b = vf.v(si, top), c = vf.v(si + 1, top);
    const double den = a - 2.0 * b + c;
    if (den < 0.0) x_refined += 0.5 * g.dq() * (a - c) / den;
  }
  const int k = std::clamp(static_cast<int>(std::lround(x0 / g.dq())), 1, g.nq - 2);
  const double eta_x = (vf.y(k + 1, top) - vf.y(k - 1, top)) / (2.0 * g.dq());
  const double umc = vf.u_minus_c(k, top);
  const double slope_at_x0 = -vf.params.g * eta_x * eta_x / (umc * (1.0 + eta_x * eta_x));
  const double curv = (vf.v(k + 1, top) - 2.0 * vf.v(k, top) + vf.v(k - 1, top)) / (g.dq() * g.dq());
  const double predicted = curv < 0.0 ? slope_at_x0 / -curv : 0.0;
  v.metrics = {{"x_argmax", g.q(bi)}, {"argmax_level", static_cast<double>(bj)}, {"x_inflection", x0}, {"v_max", best},
               {"x_argmax_surface_refined", x_refined}, {"offset_predicted", predicted},
               {"v_y_positive_fraction", total ? static_cast<double>(positive) / total : 1.0},
               {"v_y_min_step", min_step}};
  return v;
}

/// u decreases along every streamline when gamma' >= 0 and gamma >= 0.
inline PropertyVerdict check_u_decreasing(const Streamline& sl, const VorticitySpec& spec, double p0, double spacing) {
  const auto [gmin, gmax] = spec.gamma_range(p0);
  if (spec.gamma_prime(0.0) < 0.0 || gmin < 0.0) {
    return not_applicable("u_decreasing", "requires gamma' >= 0 and gamma >= 0 over the flux range");
  }
  const double eps = analysis_detail::slope_band(sl.dudx, spacing);
  double worst = 0.0;
  Location where;
  for (std::size_t i = 0; i < sl.x.size(); ++i) {
    if (sl.dudx[i] > worst) {
      worst = sl.dudx[i];
      where = {sl.x[i], sl.y[i]};
    }
  }
  return judge("u_decreasing", worst, eps, where, sl.x.size());
}

/// Vertical displacement H = y(0) - y(pi) per streamline.
inline std::vector<DisplacementPoint> displacement_points(const HeightField& f) {
  const auto& g = f.grid();
  std::vector<DisplacementPoint> out;
  for (int j = 0; j < g.np; ++j) {
    DisplacementPoint d;
    d.level = j;
    d.p = g.p(j);
    d.H = f.h(0, j) - f.h(g.nq - 1, j);
    double sum = 0.0;
    for (int i = 0; i < g.nq; ++i) sum += (i == 0 || i == g.nq - 1 ? 0.5 : 1.0) * f.h(i, j);
    d.mean_depth = sum / (g.nq - 1) - f.depth;
    out.push_back(d);
  }
  return out;
}

/// H shrinks with depth and vanishes on the bed (gamma' >= 0, gamma >= 0).
inline PropertyVerdict check_displacement_monotone(const std::vector<DisplacementPoint>& pts, const VorticitySpec& spec,
                                                   double p0) {
  const auto [gmin, gmax] = spec.gamma_range(p0);
  if (spec.gamma_prime(0.0) < 0.0 || gmin < 0.0) {
    return not_applicable("displacement_monotone", "requires gamma' >= 0 and gamma >= 0 over the flux range");
  }
  double hmax = 0.0;
  for (const auto& d : pts) hmax = std::max(hmax, std::abs(d.H));
  if (hmax == 0.0) return not_applicable("displacement_monotone", "no displacement (laminar flow)");
  const double tol = 1e-9 * hmax;
  double worst = std::abs(pts.front().H);
  Location where{0.0, pts.front().mean_depth};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    // H must be nonnegative and must not shrink going up.
    const double drop = k + 1 < pts.size() ? pts[k].H - pts[k + 1].H : 0.0;
    const double bad = std::max(-pts[k].H, drop);
    if (bad > worst) {
      worst = bad;
      where = {0.0, pts[k].mean_depth};
    }
  }
  auto v = judge("displacement_monotone", worst, tol, where, pts.size());
  v.metrics = {{"H_surface", pts.back().H}};
  return v;
}

/// Certified and numerical estimates of the first Dirichlet eigenvalue of
/// -Laplacian on the physical half cell.
struct EigenvalueEstimate {
  double rectangle_bound = 0.0; ///< 1 + pi^2 / (d + eta_max)^2, a lower bound
  double discrete = 0.0;        ///< inverse power iteration on the mapped grid
  int iterations = 0;
};

/// Rectangle (0, pi) x (-d, eta_max) contains the fluid, so its eigenvalue bounds ours from below.
inline double rectangle_eigenvalue(double height) { return 1.0 + pi * pi / (height * height); }

inline EigenvalueEstimate first_dirichlet_eigenvalue(const HeightField& f, bool with_discrete = true) {
  const auto& g = f.grid();
  double top = 0.0;
  for (int i = 0; i < g.nq; ++i) top = std::max(top, f.h(i, g.np - 1));
  EigenvalueEstimate out;
  out.rectangle_bound = rectangle_eigenvalue(top);
  if (!with_discrete) return out;

  // -Laplacian in (q, p): f_qq - 2a f_qp + (a^2 + b^2) f_pp + (a a_p + b b_p - a_q) f_p,
  // a = h_q/h_p, b = 1/h_p.
  const Field2D a = fd::map_nodes(g, [&](int i, int j) { return fd::dq(f.h, i, j, Parity::even) / fd::dp(f.h, i, j); });
  const Field2D b = fd::map_nodes(g, [&](int i, int j) { return 1.0 / fd::dp(f.h, i, j); });
  const int mq = g.nq - 2, mp = g.np - 2;
  auto id = [&](int i, int j) { return static_cast<Eigen::Index>((j - 1) * mq + (i - 1)); };
  const double dq = g.dq(), dp = g.dp();
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 1; j <= mp; ++j) {
    for (int i = 1; i <= mq; ++i) {
      const double A = a(i, j), B = b(i, j);
      const double cpp = A * A + B * B;
      const double cp = A * fd::dp(a, i, j) + B * fd::dp(b, i, j) - fd::dq(a, i, j, Parity::odd);
      const double cqp = -2.0 * A;
      auto add = [&](int ii, int jj, double v) {
        if (ii < 1 || ii > mq || jj < 1 || jj > mp) return;
        trip.emplace_back(id(i, j), id(ii, jj), -v);
      };
      add(i + 1, j, 1.0 / (dq * dq));
      add(i - 1, j, 1.0 / (dq * dq));
      add(i, j + 1, cpp / (dp * dp) + cp / (2 * dp));
      add(i, j - 1, cpp / (dp * dp) - cp / (2 * dp));
      add(i, j, -2.0 / (dq * dq) - 2.0 * cpp / (dp * dp));
      const double c = cqp / (4 * dq * dp);
      add(i + 1, j + 1, c);
      add(i + 1, j - 1, -c);
      add(i - 1, j + 1, -c);
      add(i - 1, j - 1, c);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(mq) * mp;
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu(M);
  if (lu.info() != Eigen::Success) throw Error("eigenvalue operator is singular");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  x.normalize();
  double lambda = 0.0;
  for (int it = 1; it <= 1000; ++it) {
    Eigen::VectorXd y = lu.solve(x);
    const double next = 1.0 / y.norm();
    y *= next;
    x = std::move(y);
    out.iterations = it;
    if (it > 1 && std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  out.discrete = lambda;
  return out;
}

/// Convergence verdict from max-norm errors on a grid and its 2x refinement.
inline PropertyVerdict convergence_verdict(std::string name, double coarse, double fine, double min_order, double floor,
                                           Location where) {
  PropertyVerdict v;
  v.name = std::move(name);
  v.samples = 2;
  const double order = (coarse > 0.0 && fine > 0.0) ? std::log2(coarse / fine) : 0.0;
  v.metrics = {{"coarse", coarse}, {"fine", fine}, {"observed_order", order}, {"floor", floor}};
  // The violation is the order shortfall; tiny errors on both grids count as converged.
  v.tolerance = 0.0;
  v.worst_violation = fine <= floor ? 0.0 : std::max(0.0, min_order - order);
  v.status = v.worst_violation > v.tolerance ? VerdictStatus::fail : VerdictStatus::pass;
  if (v.failed()) v.locations.push_back(where);
  return v;
}

struct LocatedNorm {
  double value = 0.0;
  Location where;
  double scale = 1.0; ///< magnitude the residual should be compared against
};

/// Residual of a pointwise identity along every streamline above the bed.
template <class Term>
LocatedNorm streamline_identity_residual(const HeightField& f, const VelocityField& vf, Term term) {
  const auto& g = f.grid();
  const Field2D P(g);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  LocatedNorm out;
  double scale = 0.0;
  for (int j = 1; j < g.np; ++j) {
    const auto sl = extract_streamline(f, vf, g.p(j), &P);
    for (int i = 0; i < g.nq; ++i) {
      const auto [lhs, rhs] = term(sl, i, gv.fx(i, j), gu.fx(i, j));
      scale = std::max(scale, std::abs(lhs));
      if (std::abs(lhs - rhs) > out.value) out = {std::abs(lhs - rhs), {sl.x[i], sl.y[i]}};
    }
  }
  out.scale = scale;
  return out;
}

/// v dv/dx = (v_x (u - c) - v u_x) y_x, with dv/dx taken along the streamline
/// and v_x, u_x partial derivatives.
inline LocatedNorm bridge_identity_residual(const HeightField& f, const VelocityField& vf) {
  return streamline_identity_residual(f, vf, [](const Streamline& sl, int i, double vx, double ux) {
    return std::pair{sl.v[i] * sl.dvdx[i], (vx * sl.u_minus_c[i] - sl.v[i] * ux) * sl.y_x[i]};
  });
}

/// dv/dx = (u - c) y_xx + y_x du/dx, all derivatives taken along the streamline.
/// The second term is what separates the extremum of v from the inflection.
inline LocatedNorm curvature_transport_residual(const HeightField& f, const VelocityField& vf) {
  return streamline_identity_residual(f, vf, [](const Streamline& sl, int i, double, double) {
    return std::pair{sl.dvdx[i], sl.u_minus_c[i] * sl.y_xx[i] + sl.y_x[i] * sl.dudx[i]};
  });
}

/// v dv/dx - y_xx (u - c)^2 y_x. Not an identity: it equals v y_x du/dx, which
/// is O(a^3); reported to quantify the gap.
inline LocatedNorm curvature_shortcut_gap(const HeightField& f, const VelocityField& vf) {
  return streamline_identity_residual(f, vf, [](const Streamline& sl, int i, double, double) {
    return std::pair{sl.v[i] * sl.dvdx[i], sl.y_xx[i] * sl.u_minus_c[i] * sl.u_minus_c[i] * sl.y_x[i]};
  });
}

/// L h_q with L the linearization of the field equation in q.
inline LocatedNorm lhq_residual(const HeightField& f) {
  const auto& g = f.grid();
  const Field2D w = fd::map_nodes(g, [&](int i, int j) { return fd::dq(f.h, i, j, Parity::even); });
  LocatedNorm out;
  double scale = 0.0;
  for (int j = 2; j < g.np - 2; ++j) {
    const double gamma = f.vorticity.gamma_of_p(g.p(j));
    for (int i = 1; i < g.nq - 1; ++i) {
      const double hq = w(i, j), hp = fd::dp(f.h, i, j), hpp = fd::dpp(f.h, i, j);
      const double hqp = fd::dqp(f.h, i, j, Parity::even);
      const double t1 = (1.0 + hq * hq) * fd::dpp(w, i, j);
      const double t2 = -2.0 * hq * hp * fd::dqp(w, i, j, Parity::odd);
      const double t3 = hp * hp * fd::dqq(w, i, j, Parity::odd);
      const double t4 = 2.0 * hq * hpp * fd::dq(w, i, j, Parity::odd);
      const double t5 = -(3.0 * gamma * hp * hp + 2.0 * hq * hqp) * fd::dp(w, i, j);
      const double r = t1 + t2 + t3 + t4 + t5;
      scale = std::max({scale, std::abs(t1), std::abs(t3), std::abs(t5)});
      if (std::abs(r) > out.value) out = {std::abs(r), {g.q(i), f.h(i, j) - f.depth}};
    }
  }
  out.scale = scale;
  return out;
}

/// Delta v - gamma'(psi) v on a uniform Cartesian sub-grid below the trough of
/// the first sub-surface streamline, two cells away from every boundary. v is carried from the mapped grid by
/// cubic interpolation along each q-column.
inline LocatedNorm laplacian_identity_residual(const HeightField& f, const VelocityField& vf) {
  const auto& g = f.grid();
  // The surface row carries one-sided p-differences; stay below it.
  const int top = g.np - 2;
  double trough = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.nq; ++i) trough = std::min(trough, f.h(i, top));
  const int levels = g.np - 2;
  const double dy = trough / levels;
  if (levels < 7) throw PreconditionError("fluid region too thin for the Laplacian check margin");

  // Cubic Lagrange through four consecutive column nodes.
  auto lagrange = [](const double* xs, const double* ys, double x) {
    double s = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b != a) w *= (x - xs[b]) / (xs[a] - xs[b]);
      }
      s += w * ys[a];
    }
    return s;
  };
  // v and psi at height H (= y + d) on column i.
  auto sample = [&](int i, double H) {
    int j = 0;
    while (j + 1 < top && f.h(i, j + 1) <= H) ++j;
    const int s = std::clamp(j - 1, 0, top - 3);
    double hs[4], ps[4], vs[4];
    for (int k = 0; k < 4; ++k) {
      hs[k] = f.h(i, s + k);
      ps[k] = g.p(s + k);
      vs[k] = vf.v(i, s + k);
    }
    // p(H) by interpolating the inverse map, then refine with Newton on h(p).
    double p = lagrange(hs, ps, H);
    for (int it = 0; it < 20; ++it) {
      const double r = lagrange(ps, hs, p) - H;
      const double e = 1e-7 * g.dp();
      const double dr = (lagrange(ps, hs, p + e) - lagrange(ps, hs, p - e)) / (2 * e);
      const double step = r / dr;
      p -= step;
      if (std::abs(step) < 1e-15 * g.dp() + 1e-300) break;
    }
    return std::pair{lagrange(ps, vs, p), -p};
  };

  const int nx = g.nq, ny = levels + 1;
  std::vector<double> V(static_cast<std::size_t>(nx) * ny, 0.0), PSI(V.size(), 0.0);
  auto at = [&](int i, int k) -> std::size_t { return static_cast<std::size_t>(k) * nx + i; };
  for (int k = 1; k < ny - 1; ++k) {
    for (int i = 1; i < nx - 1; ++i) {
      const auto [v, psi] = sample(i, k * dy);
      V[at(i, k)] = v;
      PSI[at(i, k)] = psi;
    }
  }
  LocatedNorm out;
  double vmax = 0.0;
  const double dx = g.dq();
  for (int k = 2; k <= ny - 3; ++k) {
    for (int i = 2; i <= nx - 3; ++i) {
      const double v = V[at(i, k)];
      const double lap = (V[at(i + 1, k)] - 2 * v + V[at(i - 1, k)]) / (dx * dx) +
                         (V[at(i, k + 1)] - 2 * v + V[at(i, k - 1)]) / (dy * dy);
      const double r = lap - f.vorticity.gamma_prime(PSI[at(i, k)]) * v;
      vmax = std::max(vmax, std::abs(v));
      if (std::abs(r) > out.value) out = {std::abs(r), {g.q(i), k * dy - f.depth}};
    }
  }
  out.scale = vmax;
  return out;
}

/// Largest Bernoulli deviation over all streamlines above the bed, with
/// pressure from vertical integration of the momentum equation.
inline LocatedNorm bernoulli_deviation(const HeightField& f, const VelocityField& vf) {
  const auto& g = f.grid();
  const auto P = pressure_by_vertical_integration(vf);
  LocatedNorm out;
  for (int j = 1; j < g.np; ++j) {
    const auto sl = extract_streamline(f, vf, g.p(j), &P);
    const auto b = bernoulli_head(sl, f.vorticity, f.params);
    out.scale = std::max(out.scale, std::abs(b.mean));
    if (b.max_deviation > out.value) out = {b.max_deviation, {0.0, sl.y.front()}, out.scale};
  }
  return out;
}

/// Half-resolution copy of a converged field, re-solved on its own grid.
inline std::optional<HeightField> coarse_companion(const HeightField& fine, const NewtonOptions& opt = {}) {
  const auto& g = fine.grid();
  if ((g.nq - 1) % 2 != 0 || (g.np - 1) % 2 != 0) return std::nullopt;
  const int nq = (g.nq - 1) / 2 + 1, np = (g.np - 1) / 2 + 1;
  if (nq < 17 || np < 9) return std::nullopt;
  const Grid cg(nq, np, g.p0);
  HeightField c = fine;
  c.h = Field2D(cg);
  for (int j = 0; j < np; ++j) {
    for (int i = 0; i < nq; ++i) c.h(i, j) = fine.h(2 * i, 2 * j);
  }
  const double a = fine.amplitude();
  const bool wave = std::abs(a) > 1e-12 * std::max(1.0, fine.depth);
  auto res = newton_solve(std::move(c), wave ? Constraint::amplitude(a) : Constraint::head(fine.params.Q), opt);
  if (res.status != SolveStatus::converged && res.status != SolveStatus::invariant_violation) return std::nullopt;
  res.field.depth = fine.depth;
  return std::move(res.field);
}

/// Combines per-streamline verdicts: fail if any fails, not-applicable if all
/// are; the reported violation comes from the worst streamline relative to its tolerance.
inline PropertyVerdict merge_verdicts(std::string name, const std::vector<PropertyVerdict>& parts) {
  PropertyVerdict out;
  out.name = std::move(name);
  const PropertyVerdict* worst = nullptr;
  double worst_ratio = -1.0;
  std::size_t failing = 0, applicable = 0;
  for (const auto& p : parts) {
    if (p.status == VerdictStatus::not_applicable) continue;
    ++applicable;
    out.samples += p.samples;
    if (p.failed()) ++failing;
    const double ratio = p.tolerance > 0.0 ? p.worst_violation / p.tolerance : (p.worst_violation > 0.0 ? 1e300 : 0.0);
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = &p;
    }
  }
  if (!worst) {
    out.status = VerdictStatus::not_applicable;
    out.note = parts.empty() ? "no streamlines" : parts.front().note;
    return out;
  }
  out.status = failing ? VerdictStatus::fail : VerdictStatus::pass;
  out.worst_violation = worst->worst_violation;
  out.tolerance = worst->tolerance;
  out.locations = worst->locations;
  out.metrics = {{"streamlines", static_cast<double>(applicable)}, {"failing_streamlines", static_cast<double>(failing)}};
  return out;
}

struct AnalysisOptions {
  bool refinement = true;          ///< run the identity convergence checks
  bool discrete_eigenvalue = true; ///< inverse power iteration in addition to the rectangle bound
  NewtonOptions newton{};
};

/// Everything the battery learned about one field.
struct AnalysisReport {
  Grid grid;
  PhysicalParams params;
  VorticitySpec vorticity;
  double depth = 0.0;
  double amplitude = 0.0;
  EigenvalueEstimate eigenvalue;
  Admissibility admissibility = Admissibility::not_applicable;
  std::vector<InflectionSet> inflections; ///< levels 1 .. np-1
  std::vector<DisplacementPoint> displacement;
  std::vector<int> rise_then_fall_failures;
  std::vector<PropertyVerdict> verdicts;

  const PropertyVerdict* find(std::string_view name) const {
    for (const auto& v : verdicts) {
      if (v.name == name) return &v;
    }
    return nullptr;
  }
  bool any_failure() const {
    return std::any_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.failed(); });
  }
};

namespace analysis_detail {

inline PropertyVerdict located(std::string name, double coarse, double fine, double floor, Location where) {
  return convergence_verdict(std::move(name), coarse, fine, 1.0, floor, where);
}

inline Location at_node(const VelocityField& vf, const ResidualNorm& r) { return {vf.x(r.i, r.j), vf.y(r.i, r.j)}; }

/// Roundoff floor for a residual whose natural magnitude is `scale`.
inline double floor_of(double scale) { return 1e-9 * scale; }

/// Identity convergence verdicts from a field and its half-resolution companion.
/// Floors come from the flow's speed S and depth L so that laminar fields,
/// whose residuals sit at roundoff, count as converged.
inline void identity_verdicts(const HeightField& fine, const VelocityField& vf, const HeightField& coarse,
                              double lambda1, std::vector<PropertyVerdict>& out) {
  const auto cvf = velocity_from_height(coarse);
  double S = 0.0;
  for (double u : vf.u_minus_c.values()) S = std::max(S, std::abs(u));
  const double L = fine.depth;
  const double rate = S / L;

  auto pair = [&](std::string name, const LocatedNorm& c, const LocatedNorm& f, double scale) {
    out.push_back(located(std::move(name), c.value, f.value, floor_of(scale), f.where));
  };
  pair("bridge_identity", bridge_identity_residual(coarse, cvf), bridge_identity_residual(fine, vf), S * rate);
  out.back().metrics.emplace_back("shortcut_gap", curvature_shortcut_gap(fine, vf).value);
  pair("curvature_transport_identity", curvature_transport_residual(coarse, cvf), curvature_transport_residual(fine, vf),
       rate);
  pair("lhq_identity", lhq_residual(coarse), lhq_residual(fine), L / (fine.params.p0 * fine.params.p0));
  {
    const auto c = laplacian_identity_residual(coarse, cvf);
    const auto f = laplacian_identity_residual(fine, vf);
    auto v = located("laplacian_identity", c.value, f.value, floor_of(S / (L * L)), f.where);
    const double bound = 1e-3 * f.scale * lambda1;
    v.metrics.emplace_back("finest_bound", bound);
    if (f.value > bound) {
      v.worst_violation += f.value / bound - 1.0;
      v.status = VerdictStatus::fail;
      if (v.locations.empty()) v.locations.push_back(f.where);
    }
    out.push_back(std::move(v));
  }
  {
    const auto c = divergence_residual(cvf), f = divergence_residual(vf);
    out.push_back(located("divergence", c.value, f.value, floor_of(rate), at_node(vf, f)));
  }
  {
    const auto c = vorticity_residual(cvf), f = vorticity_residual(vf);
    out.push_back(located("vorticity", c.value, f.value, floor_of(rate), at_node(vf, f)));
  }
  {
    const auto c = bernoulli_deviation(coarse, cvf), f = bernoulli_deviation(fine, vf);
    out.push_back(located("bernoulli_constancy", c.value, f.value, floor_of(S * S), f.where));
  }
  {
    const auto c = euler_residual(cvf, pressure_from_bernoulli(cvf));
    const auto f = euler_residual(vf, pressure_from_bernoulli(vf));
    out.push_back(located("momentum", c.value, f.value, floor_of(S * rate), at_node(vf, f)));
  }
}

} // namespace analysis_detail

/// Full battery: consistency, sign and shape theorems, and (with a companion)
/// identity convergence.
inline AnalysisReport analyze(const HeightField& f, const AnalysisOptions& opt = {},
                              const HeightField* companion = nullptr) {
  using namespace analysis_detail;
  const auto& g = f.grid();
  AnalysisReport rep;
  rep.grid = g;
  rep.params = f.params;
  rep.vorticity = f.vorticity;
  rep.depth = f.depth;
  rep.amplitude = f.amplitude();

  {
    PropertyVerdict inv;
    inv.name = "field_invariants";
    inv.samples = g.size();
    const auto msg = invariant_violation(f, opt.newton.tolerance);
    inv.status = msg ? VerdictStatus::fail : VerdictStatus::pass;
    inv.worst_violation = msg ? 1.0 : 0.0;
    if (msg) {
      inv.note = *msg;
      inv.locations.push_back({0.0, 0.0});
    }
    rep.verdicts.push_back(inv);
    if (msg) return rep;
  }
  const auto vf = velocity_from_height(f);
  {
    const auto k = kinematic_residual(vf);
    const double spacing = band_spacing(g, f.depth);
    const double tol = 10.0 * (opt.newton.tolerance + spacing * spacing);
    rep.verdicts.push_back(judge("surface_kinematic", k.value, tol, at_node(vf, k), static_cast<std::size_t>(g.nq)));
  }

  rep.eigenvalue = first_dirichlet_eigenvalue(f, opt.discrete_eigenvalue);
  rep.admissibility = check_remark41_bound(f.vorticity, rep.eigenvalue.rectangle_bound);
  {
    PropertyVerdict v;
    v.name = "vorticity_admissibility";
    v.status = rep.admissibility == Admissibility::pass   ? VerdictStatus::pass
               : rep.admissibility == Admissibility::fail ? VerdictStatus::fail
                                                     : VerdictStatus::not_applicable;
    v.worst_violation = std::abs(f.vorticity.gamma_prime(0.0));
    v.tolerance = rep.eigenvalue.rectangle_bound;
    v.samples = 1;
    if (v.failed()) v.locations.push_back({0.0, 0.0});
    v.metrics = {{"lambda1_rectangle", rep.eigenvalue.rectangle_bound}, {"lambda1_discrete", rep.eigenvalue.discrete}};
    rep.verdicts.push_back(v);
  }

  const double spacing = band_spacing(g, f.depth);
  rep.displacement = displacement_points(f);
  const auto vpos = check_v_positive(vf);
  rep.verdicts.push_back(vpos);
  const bool wave = vpos.status != VerdictStatus::not_applicable;

  const Field2D P = pressure_by_vertical_integration(vf);
  std::vector<Streamline> lines;
  for (int j = 1; j < g.np; ++j) lines.push_back(extract_streamline(f, vf, g.p(j), &P));

  std::vector<PropertyVerdict> curv, rise, udec;
  PropertyVerdict parity;
  parity.name = "inflection_parity";
  std::size_t even = 0;
  Location even_at;
  if (wave) {
    for (const auto& sl : lines) {
      InflectionSet in;
      try {
        in = find_inflection_points(sl, spacing);
      } catch (const DegenerateCurveError&) {
        in.level = sl.level;
        in.p = sl.p;
      }
      if (in.count() % 2 == 0) {
        if (even++ == 0) even_at = {pi / 2, sl.y[sl.y.size() / 2]};
      }
      curv.push_back(check_curvature_monotonicity_law(sl, spacing));
      rise.push_back(check_rise_then_fall(sl, in, spacing));
      if (rise.back().failed()) rep.rise_then_fall_failures.push_back(sl.level);
      udec.push_back(check_u_decreasing(sl, f.vorticity, g.p0, spacing));
      rep.inflections.push_back(std::move(in));
    }
    parity = judge("inflection_parity", static_cast<double>(even), 0.0, even_at, lines.size());
    int lo = 1 << 30, hi = 0;
    for (const auto& in : rep.inflections) {
      lo = std::min(lo, in.count());
      hi = std::max(hi, in.count());
    }
    parity.metrics = {{"min_count", static_cast<double>(lo)}, {"max_count", static_cast<double>(hi)}};
    rep.verdicts.push_back(parity);
    rep.verdicts.push_back(merge_verdicts("curvature_monotonicity_law", curv));
    rep.verdicts.push_back(merge_verdicts("rise_then_fall", rise));
    rep.verdicts.push_back(locate_max_v(vf, rep.inflections.back(), rep.eigenvalue.rectangle_bound));
    rep.verdicts.push_back(merge_verdicts("u_decreasing", udec));
    rep.verdicts.push_back(check_displacement_monotone(rep.displacement, f.vorticity, g.p0));
  } else {
    const std::string why = "laminar flow: no wave to test";
    for (const char* name : {"inflection_parity", "curvature_monotonicity_law", "rise_then_fall", "max_v_location",
                             "u_decreasing", "displacement_monotone"}) {
      rep.verdicts.push_back(not_applicable(name, why));
    }
  }

  if (opt.refinement) {
    std::optional<HeightField> own;
    if (!companion) {
      own = coarse_companion(f, opt.newton);
      if (own) companion = &*own;
    }
    if (companion) {
      analysis_detail::identity_verdicts(f, vf, *companion, rep.eigenvalue.rectangle_bound, rep.verdicts);
    } else {
      for (const char* name : {"bridge_identity", "curvature_transport_identity", "lhq_identity", "laplacian_identity",
                               "divergence", "vorticity", "bernoulli_constancy", "momentum"}) {
        rep.verdicts.push_back(not_applicable(name, "no half-resolution companion for this grid"));
      }
    }
  }
  return rep;
}

} // namespace wavelab
