#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "wavelab/error.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/height_equation.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

/// How a laminar profile is computed.
///  - exact: closed form for zero/constant vorticity, RK4 otherwise
///  - rk4: RK4 integration of h_pp = gamma(-p) h_p^3 for every kind
///  - grid: discrete march with the 2-D solver's stencils, so the profile is
///    an exact solution of the discretized equations
enum class LaminarScheme { exact, rk4, grid };

/// x-independent flow with a flat surface, sampled on the p-nodes.
struct LaminarProfile {
  std::vector<double> p;
  std::vector<double> h;
  std::vector<double> hp;
  double Q = 0.0;
  double bed_slope = 0.0; ///< h_p at the bed (or h_1/dp for the grid scheme)
  LaminarScheme scheme = LaminarScheme::exact;

  double depth() const { return h.back(); }

  /// 1 + (2 g h(0) - Q) h_p(0)^2
  double surface_residual(double g) const {
    return height_equation::surface(h.back(), 0.0, hp.back(), g, Q);
  }
};

inline void write_csv(std::ostream& os, const LaminarProfile& prof) {
  os << "p,h,h_p\n";
  os.precision(17);
  for (std::size_t k = 0; k < prof.p.size(); ++k) {
    os << prof.p[k] << ',' << prof.h[k] << ',' << prof.hp[k] << '\n';
  }
}

namespace laminar_detail {

inline std::vector<double> p_nodes(double p0, int np) {
  Grid g;
  g.nq = 17;
  g.np = np;
  g.p0 = p0;
  std::vector<double> p(np);
  for (int j = 0; j < np; ++j) p[j] = g.p(j);
  return p;
}

inline void check_monotone(const LaminarProfile& prof) {
  for (std::size_t k = 0; k < prof.hp.size(); ++k) {
    if (!(prof.hp[k] > 0.0) || !std::isfinite(prof.hp[k])) {
      throw StagnationError("laminar profile loses h_p > 0 at p = " + std::to_string(prof.p[k]));
    }
  }
}

/// RK4 for (h, w)' = (w, gamma(-p) w^3) from the bed with h = 0, w = w0.
inline LaminarProfile integrate_rk4(const VorticitySpec& spec, double w0,
                                    const std::vector<double>& p, int substeps) {
  LaminarProfile prof;
  prof.p = p;
  prof.h.assign(p.size(), 0.0);
  prof.hp.assign(p.size(), w0);
  double h = 0.0;
  double w = w0;
  auto rhs = [&](double pp, double ww) { return spec.gamma_of_p(pp) * ww * ww * ww; };
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const double step = (p[k + 1] - p[k]) / substeps;
    double pp = p[k];
    for (int s = 0; s < substeps; ++s) {
      const double k1h = w, k1w = rhs(pp, w);
      const double k2h = w + 0.5 * step * k1w, k2w = rhs(pp + 0.5 * step, w + 0.5 * step * k1w);
      const double k3h = w + 0.5 * step * k2w, k3w = rhs(pp + 0.5 * step, w + 0.5 * step * k2w);
      const double k4h = w + step * k3w, k4w = rhs(pp + step, w + step * k3w);
      h += step / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
      w += step / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
      pp += step;
      if (!std::isfinite(w) || w <= 0.0) {
        throw StagnationError("laminar ODE blows up before p = " + std::to_string(p[k + 1]));
      }
    }
    prof.h[k + 1] = h;
    prof.hp[k + 1] = w;
  }
  return prof;
}

/// h_p = (w0^-2 - 2 gamma0 (p - p0))^(-1/2) and its antiderivative.
inline LaminarProfile closed_form(const VorticitySpec& spec, double w0, const std::vector<double>& p) {
  LaminarProfile prof;
  prof.p = p;
  prof.h.resize(p.size());
  prof.hp.resize(p.size());
  const double p0 = p.front();
  const double a = 1.0 / (w0 * w0);
  const double g0 = spec.kind == VorticityKind::constant ? spec.gamma0 : 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = a - 2.0 * g0 * (p[k] - p0);
    if (!(x > 0.0)) {
      throw StagnationError("laminar slope becomes infinite before p = " + std::to_string(p[k]));
    }
    prof.hp[k] = 1.0 / std::sqrt(x);
    prof.h[k] = g0 == 0.0 ? w0 * (p[k] - p0) : -(std::sqrt(x) - std::sqrt(a)) / g0;
  }
  return prof;
}

/// Discrete march of the interior stencil; the unknown each step is the
/// central slope s = (h_{j+1} - h_{j-1}) / (2 dp), which satisfies
/// (gamma dp / 2) s^3 - s + m = 0 with m the backward slope.
inline LaminarProfile march_grid(const VorticitySpec& spec, double t, const std::vector<double>& p) {
  const int np = static_cast<int>(p.size());
  const double dp = p[1] - p[0];
  LaminarProfile prof;
  prof.p = p;
  prof.h.assign(np, 0.0);
  prof.hp.assign(np, 0.0);
  prof.h[1] = t * dp;
  for (int j = 1; j + 1 < np; ++j) {
    const double m = (prof.h[j] - prof.h[j - 1]) / dp;
    const double eps = 0.5 * spec.gamma_of_p(p[j]) * dp;
    double s = m;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      const double f = eps * s * s * s - s + m;
      const double df = 3.0 * eps * s * s - 1.0;
      if (std::abs(df) < 1e-3) break;
      const double ds = f / df;
      s -= ds;
      if (std::abs(ds) <= 1e-15 * std::abs(s)) {
        ok = true;
        break;
      }
    }
    if (!ok || !(s > 0.0) || !std::isfinite(s)) {
      throw StagnationError("discrete laminar march stagnates near p = " + std::to_string(p[j]));
    }
    prof.h[j + 1] = prof.h[j - 1] + 2.0 * dp * s;
  }
  for (int j = 0; j < np; ++j) {
    if (j == 0) prof.hp[j] = (-3.0 * prof.h[0] + 4.0 * prof.h[1] - prof.h[2]) / (2.0 * dp);
    else if (j == np - 1) prof.hp[j] = (3.0 * prof.h[j] - 4.0 * prof.h[j - 1] + prof.h[j - 2]) / (2.0 * dp);
    else prof.hp[j] = (prof.h[j + 1] - prof.h[j - 1]) / (2.0 * dp);
  }
  return prof;
}

inline LaminarProfile profile_for_slope(const VorticitySpec& spec, double w0, const std::vector<double>& p,
                                        LaminarScheme scheme) {
  LaminarProfile prof;
  switch (scheme) {
  case LaminarScheme::exact:
    prof = spec.kind == VorticityKind::affine ? integrate_rk4(spec, w0, p, 64) : closed_form(spec, w0, p);
    break;
  case LaminarScheme::rk4: prof = integrate_rk4(spec, w0, p, 64); break;
  case LaminarScheme::grid: prof = march_grid(spec, w0, p); break;
  }
  check_monotone(prof);
  prof.bed_slope = w0;
  prof.scheme = scheme;
  prof.Q = std::numeric_limits<double>::quiet_NaN();
  return prof;
}

/// Profile for bed slope w with the head that its flat surface requires.
inline LaminarProfile profile_with_head(const VorticitySpec& spec, double g, double w,
                                        const std::vector<double>& p, LaminarScheme scheme) {
  auto prof = profile_for_slope(spec, w, p, scheme);
  prof.Q = 2.0 * g * prof.h.back() + 1.0 / (prof.hp.back() * prof.hp.back());
  return prof;
}

/// Log-spaced scan of the bed slope over the family of laminar flows with fixed p0.
struct FamilyScan {
  std::vector<double> slope;
  std::vector<std::optional<LaminarProfile>> profile;
  std::size_t critical = 0; ///< index of the minimum head (critical flow)
};

inline FamilyScan scan_family(const VorticitySpec& spec, double g, const std::vector<double>& p,
                              LaminarScheme scheme, int points = 600) {
  const double p0 = p.front();
  const double s_crit = std::cbrt(1.0 / (g * -p0));
  double w_max = s_crit * 1e3;
  // w^-2 must stay above 2 (Gamma(p) - Gamma(p0)) for the slope to stay finite.
  const GammaIntegral big_gamma = gamma_integral(spec, p0, static_cast<int>(p.size()));
  double rise = 0.0;
  for (double pp : p) rise = std::max(rise, big_gamma(pp) - big_gamma(p0));
  if (rise > 0.0) w_max = std::min(w_max, (1.0 - 1e-9) / std::sqrt(2.0 * rise));
  const double w_min = s_crit * 1e-3;
  FamilyScan scan;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double w = w_min * std::pow(w_max / w_min, static_cast<double>(k) / (points - 1));
    scan.slope.push_back(w);
    try {
      auto prof = profile_with_head(spec, g, w, p, scheme);
      if (prof.Q < best) {
        best = prof.Q;
        scan.critical = scan.profile.size();
      }
      scan.profile.emplace_back(std::move(prof));
    } catch (const StagnationError&) {
      scan.profile.emplace_back(std::nullopt);
    }
  }
  if (!std::isfinite(best)) throw NoRealSlopeError("no laminar flow exists for this flux and vorticity");
  return scan;
}

template <class F>
double bracket_root(F f, double lo, double hi, double flo, double fhi) {
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(std::abs(a), std::abs(b)); };
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return std::abs(f(a)) < std::abs(f(b)) ? a : b;
}

} // namespace laminar_detail

/// Laminar profile with bed slope w0 (no head matching); useful on partial
/// flux intervals where the full flow would stagnate.
inline LaminarProfile integrate_laminar(const VorticitySpec& spec, double w0, const std::vector<double>& p,
                                        LaminarScheme scheme = LaminarScheme::exact) {
  auto prof = laminar_detail::profile_for_slope(spec, w0, p, scheme);
  prof.Q = std::numeric_limits<double>::quiet_NaN();
  return prof;
}

/// Subcritical laminar flow with flux p0 and head Q, sampled on `np` p-nodes.
inline LaminarProfile solve_laminar(const VorticitySpec& spec, double g, double p0, double Q, int np,
                                    LaminarScheme scheme = LaminarScheme::exact) {
  if (!(p0 < 0.0) || !(g > 0.0)) throw PreconditionError("solve_laminar needs p0 < 0 and g > 0");
  const auto p = laminar_detail::p_nodes(p0, np);
  const auto scan = laminar_detail::scan_family(spec, g, p, scheme);
  const double q_min = scan.profile[scan.critical]->Q;
  if (Q < q_min) {
    std::ostringstream msg;
    msg << "no real surface slope: head Q = " << Q << " is below the critical head " << q_min;
    throw NoRealSlopeError(msg.str());
  }
  std::size_t k = scan.critical + 1;
  while (k < scan.profile.size() && (!scan.profile[k] || scan.profile[k]->Q < Q)) ++k;
  if (k >= scan.profile.size() || !scan.profile[k - 1]) {
    throw NoRealSlopeError("head Q = " + std::to_string(Q) + " lies beyond the scanned subcritical family");
  }
  auto f = [&](double w) { return laminar_detail::profile_with_head(spec, g, w, p, scheme).Q - Q; };
  const double lo = scan.slope[k - 1], hi = scan.slope[k];
  const double flo = scan.profile[k - 1]->Q - Q, fhi = scan.profile[k]->Q - Q;
  const double w = flo == 0.0 ? lo : laminar_detail::bracket_root(f, lo, hi, flo, fhi);
  auto prof = laminar_detail::profile_with_head(spec, g, w, p, scheme);
  prof.Q = Q;
  return prof;
}

/// Result of locating the first bifurcation from the laminar family.
struct Bifurcation {
  double Q_star = 0.0;
  LaminarProfile laminar;  ///< grid-consistent profile at Q_star
  std::vector<double> mode; ///< p-dependence of the cos(q) null mode, normalized to 1 at the surface
};

namespace laminar_detail {

/// Discrete shooting for the linearized k-mode about a grid laminar profile.
/// Returns the surface-row residual of the mode started with phi_0 = 0,
/// phi_1 = 1 (scaled to max|phi| = 1). Zero iff the linearized operator is singular.
inline double mode_defect(const VorticitySpec& spec, double g, const LaminarProfile& prof, double k2,
                          std::vector<double>* mode_out = nullptr) {
  const int np = static_cast<int>(prof.p.size());
  const double dp = prof.p[1] - prof.p[0];
  std::vector<double> phi(np, 0.0);
  phi[1] = 1.0;
  for (int j = 1; j + 1 < np; ++j) {
    height_equation::Jet jet;
    jet.hp = prof.hp[j];
    jet.hpp = (prof.h[j + 1] - 2.0 * prof.h[j] + prof.h[j - 1]) / (dp * dp);
    const auto part = height_equation::interior_partials(jet, spec.gamma_of_p(prof.p[j]));
    const double up = part.hpp / (dp * dp) + part.hp / (2.0 * dp);
    const double mid = -2.0 * part.hpp / (dp * dp) - k2 * part.hqq;
    const double dn = part.hpp / (dp * dp) - part.hp / (2.0 * dp);
    phi[j + 1] = -(mid * phi[j] + dn * phi[j - 1]) / up;
    if (std::abs(phi[j + 1]) > 1e150) {
      for (auto& v : phi) v *= 1e-150;
    }
  }
  double scale = 0.0;
  for (double v : phi) scale = std::max(scale, std::abs(v));
  for (auto& v : phi) v /= scale;
  const int n = np - 1;
  const double hp = prof.hp[n];
  const double dphi = (3.0 * phi[n] - 4.0 * phi[n - 1] + phi[n - 2]) / (2.0 * dp);
  const auto sp = height_equation::surface_partials(prof.h[n], 0.0, hp, g, prof.Q);
  const double defect = sp.h * phi[n] + sp.hp * dphi;
  if (mode_out) {
    for (auto& v : phi) v /= phi[n];
    *mode_out = std::move(phi);
  }
  return defect;
}

} // namespace laminar_detail

/// Head Q* at which the laminar flow with flux p0 first admits a cos(q)
/// perturbation. `k2` is the squared wavenumber seen by the q-discretization
/// (1 for the continuum).
inline Bifurcation bifurcation_head(const VorticitySpec& spec, double g, double p0, int np, double k2 = 1.0) {
  using namespace laminar_detail;
  if (!(p0 < 0.0) || !(g > 0.0)) throw PreconditionError("bifurcation_head needs p0 < 0 and g > 0");
  const auto p = p_nodes(p0, np);
  const auto scan = scan_family(spec, g, p, LaminarScheme::grid);
  // Near-critical flows bifurcate close to the head minimum, so pin the
  // minimum down and sample densely up to the next scan point.
  auto head = [&](double w) { return profile_with_head(spec, g, w, p, LaminarScheme::grid).Q; };
  const std::size_t c = scan.critical;
  const double lo = scan.slope[c > 0 ? c - 1 : c];
  const double hi = scan.slope[std::min(c + 1, scan.slope.size() - 1)];
  const double w_crit = boost::math::tools::brent_find_minima(head, lo, hi, 52).first;
  std::vector<double> slopes;
  const double w_next = std::max(hi, w_crit);
  for (int k = 0; k < 64; ++k) slopes.push_back(w_crit * std::pow(w_next / w_crit, k / 64.0));
  for (std::size_t k = c + 1; k < scan.profile.size() && scan.profile[k]; ++k) {
    if (scan.slope[k] >= w_next) slopes.push_back(scan.slope[k]);
  }
  auto defect_at = [&](double w) { return mode_defect(spec, g, profile_with_head(spec, g, w, p, LaminarScheme::grid), k2); };
  double d_prev = defect_at(slopes.front());
  for (std::size_t k = 1; k < slopes.size(); ++k) {
    const double d = defect_at(slopes[k]);
    if (d == 0.0 || (d > 0.0) != (d_prev > 0.0)) {
      const double w = d == 0.0 ? slopes[k] : bracket_root(defect_at, slopes[k - 1], slopes[k], d_prev, d);
      Bifurcation out;
      out.laminar = profile_with_head(spec, g, w, p, LaminarScheme::grid);
      out.Q_star = out.laminar.Q;
      mode_defect(spec, g, out.laminar, k2, &out.mode);
      return out;
    }
    d_prev = d;
  }
  std::ostringstream msg;
  msg << "no bifurcation found for bed slopes in [" << scan.slope[scan.critical] << ", " << scan.slope.back()
      << "] (heads from " << scan.profile[scan.critical]->Q << ")";
  throw NoBifurcationError(msg.str());
}

} // namespace wavelab
