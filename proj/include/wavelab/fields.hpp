#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "wavelab/derivatives.hpp"
#include "wavelab/error.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

/// Velocity and coordinates reconstructed node by node from a HeightField.
struct VelocityField {
  Field2D u_minus_c; ///< -1/h_p
  Field2D v;         ///< -h_q/h_p
  Field2D x;
  Field2D y;         ///< h - d
  Field2D psi;       ///< -p
  Field2D hq;
  Field2D hp;
  PhysicalParams params;
  VorticitySpec vorticity;
  double depth = 0.0;

  const Grid& grid() const noexcept { return v.grid(); }
};

inline VelocityField velocity_from_height(const HeightField& f) {
  const auto& g = f.grid();
  const double eps = flow_epsilon(f.depth > 0.0 ? f.depth : 1.0, g.p0);
  VelocityField out;
  out.params = f.params;
  out.vorticity = f.vorticity;
  out.depth = f.depth;
  out.hq = fd::map_nodes(g, [&](int i, int j) { return fd::dq(f.h, i, j, Parity::even); });
  out.hp = fd::map_nodes(g, [&](int i, int j) { return fd::dp(f.h, i, j); });
  out.u_minus_c = Field2D(g);
  out.v = Field2D(g);
  out.x = Field2D(g);
  out.y = Field2D(g);
  out.psi = Field2D(g);
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const double hp = out.hp(i, j);
      if (!(hp > eps)) {
        throw StagnationError("h_p = " + std::to_string(hp) + " at node (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") is within the stagnation guard");
      }
      out.u_minus_c(i, j) = -1.0 / hp;
      out.v(i, j) = -out.hq(i, j) / hp;
      out.x(i, j) = g.q(i);
      out.y(i, j) = f.h(i, j) - f.depth;
      out.psi(i, j) = -g.p(j);
    }
  }
  return out;
}

/// Physical-space derivatives of a node field F via the chain rule
/// F_x = F_q - (h_q/h_p) F_p, F_y = F_p / h_p.
struct Gradient {
  Field2D fx;
  Field2D fy;
};

inline Gradient physical_gradient(const Field2D& F, Parity parity, const VelocityField& vf) {
  const auto& g = F.grid();
  Gradient out{Field2D(g), Field2D(g)};
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const double fq = fd::dq(F, i, j, parity);
      const double fp = fd::dp(F, i, j);
      const double hp = vf.hp(i, j);
      out.fx(i, j) = fq - vf.hq(i, j) / hp * fp;
      out.fy(i, j) = fp / hp;
    }
  }
  return out;
}

/// Pressure from the vertical momentum equation integrated down each column from
/// P = P_atm on the surface, with the trapezoid rule in p (dy = h_p dp).
inline Field2D pressure_by_vertical_integration(const VelocityField& vf) {
  const auto& g = vf.grid();
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  Field2D P(g);
  const double dp = g.dp();
  for (int i = 0; i < g.nq; ++i) {
    auto integrand = [&](int j) {
      // -P_y = g + (u - c) v_x + v v_y
      return (vf.params.g + vf.u_minus_c(i, j) * gv.fx(i, j) + vf.v(i, j) * gv.fy(i, j)) * vf.hp(i, j);
    };
    P(i, g.np - 1) = vf.params.P_atm;
    for (int j = g.np - 2; j >= 0; --j) P(i, j) = P(i, j + 1) + 0.5 * dp * (integrand(j) + integrand(j + 1));
  }
  return P;
}

/// Bernoulli constant E = Q/2 + P_atm - g d, the same on every streamline.
inline double bernoulli_constant(const PhysicalParams& params, double depth) {
  return 0.5 * params.Q + params.P_atm - params.g * depth;
}

/// P = E - ((c-u)^2 + v^2)/2 - g y - Gamma(-psi).
inline Field2D pressure_from_bernoulli(const VelocityField& vf) {
  const auto& g = vf.grid();
  const auto Gamma = gamma_integral(vf.vorticity, g.p0, g.np);
  const double E = bernoulli_constant(vf.params, vf.depth);
  Field2D P(g);
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const double kin = 0.5 * (vf.u_minus_c(i, j) * vf.u_minus_c(i, j) + vf.v(i, j) * vf.v(i, j));
      P(i, j) = E - kin - vf.params.g * vf.y(i, j) - Gamma(g.p(j));
    }
  }
  return P;
}

/// One p-level of the flow: in height-function variables streamlines are grid rows.
struct Streamline {
  int level = 0;
  double p = 0.0;
  double dx = 0.0;
  std::vector<double> x, y, y_x, y_xx, v, u_minus_c, dvdx, dudx, P;
};

namespace fields_detail {

/// Fourth-order central differences of an even periodic sequence on [0, pi].
inline void even_derivatives(const std::vector<double>& y, double dx, std::vector<double>& d1,
                             std::vector<double>& d2) {
  const int n = static_cast<int>(y.size());
  auto at = [&](int i) {
    if (i < 0) i = -i;
    if (i > n - 1) i = 2 * (n - 1) - i;
    return y[static_cast<std::size_t>(i)];
  };
  d1.assign(n, 0.0);
  d2.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    d1[i] = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * dx);
    d2[i] = (-at(i + 2) + 16.0 * at(i + 1) - 30.0 * at(i) + 16.0 * at(i - 1) - at(i - 2)) / (12.0 * dx * dx);
  }
}

} // namespace fields_detail

inline int nearest_level(const Grid& g, double p_level) {
  const double slack = 1e-12 * -g.p0;
  if (p_level < g.p0 - slack || p_level > slack) {
    throw OutOfRange("p = " + std::to_string(p_level) + " outside [" + std::to_string(g.p0) + ", 0]");
  }
  const int j = static_cast<int>(std::lround((p_level - g.p0) / g.dp()));
  return std::clamp(j, 0, g.np - 1);
}

/// Streamline on the grid row nearest to p_level. `pressure` defaults to the
/// vertically integrated field when empty.
inline Streamline extract_streamline(const HeightField& f, const VelocityField& vf, double p_level,
                                     const Field2D* pressure = nullptr) {
  const auto& g = f.grid();
  const int j = nearest_level(g, p_level);
  Streamline sl;
  sl.level = j;
  sl.p = g.p(j);
  sl.dx = g.dq();
  sl.x.resize(g.nq);
  sl.y.resize(g.nq);
  for (int i = 0; i < g.nq; ++i) {
    sl.x[i] = g.q(i);
    sl.y[i] = f.h(i, j) - f.depth;
  }
  fields_detail::even_derivatives(sl.y, sl.dx, sl.y_x, sl.y_xx);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  Field2D integrated;
  if (!pressure) {
    integrated = pressure_by_vertical_integration(vf);
    pressure = &integrated;
  }
  for (int i = 0; i < g.nq; ++i) {
    sl.v.push_back(vf.v(i, j));
    sl.u_minus_c.push_back(vf.u_minus_c(i, j));
    // Along the curve: d/dx = d/dx + y_x d/dy with y_x = h_q.
    sl.dvdx.push_back(gv.fx(i, j) + gv.fy(i, j) * vf.hq(i, j));
    sl.dudx.push_back(gu.fx(i, j) + gu.fy(i, j) * vf.hq(i, j));
    sl.P.push_back((*pressure)(i, j));
  }
  return sl;
}

struct BernoulliHead {
  double mean = 0.0;
  double max_deviation = 0.0;
  std::vector<double> E;
};

/// E_i = ((c-u)^2 + v^2)/2 + g y + P + Gamma(-psi) along a streamline.
inline BernoulliHead bernoulli_head(const Streamline& sl, const VorticitySpec& spec, const PhysicalParams& params) {
  const auto Gamma = gamma_integral(spec, params.p0);
  BernoulliHead out;
  for (std::size_t i = 0; i < sl.x.size(); ++i) {
    const double kin = 0.5 * (sl.u_minus_c[i] * sl.u_minus_c[i] + sl.v[i] * sl.v[i]);
    out.E.push_back(kin + params.g * sl.y[i] + sl.P[i] + Gamma(sl.p));
  }
  for (double e : out.E) out.mean += e;
  out.mean /= static_cast<double>(out.E.size());
  for (double e : out.E) out.max_deviation = std::max(out.max_deviation, std::abs(e - out.mean));
  return out;
}

/// Max-norm of a node-wise quantity over a sub-rectangle of rows, with location.
struct ResidualNorm {
  double value = 0.0;
  int i = 0;
  int j = 0;
};

template <class F>
ResidualNorm max_over_rows(const Grid& g, int j_begin, int j_end, F fn) {
  ResidualNorm out;
  for (int j = j_begin; j < j_end; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const double r = std::abs(fn(i, j));
      if (r > out.value) out = {r, i, j};
    }
  }
  return out;
}

/// Rows whose derivative stencils stay central for derived quantities.
inline std::pair<int, int> interior_rows(const Grid& g) { return {2, g.np - 2}; }

/// u_x + v_y.
inline ResidualNorm divergence_residual(const VelocityField& vf) {
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  const auto [a, b] = interior_rows(vf.grid());
  return max_over_rows(vf.grid(), a, b, [&](int i, int j) { return gu.fx(i, j) + gv.fy(i, j); });
}

/// u_y - v_x - gamma(psi).
inline ResidualNorm vorticity_residual(const VelocityField& vf) {
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  const auto [a, b] = interior_rows(vf.grid());
  return max_over_rows(vf.grid(), a, b, [&](int i, int j) {
    return gu.fy(i, j) - gv.fx(i, j) - vf.vorticity.gamma(vf.psi(i, j));
  });
}

/// Both steady Euler equations with the given pressure; max of the two.
inline ResidualNorm euler_residual(const VelocityField& vf, const Field2D& P) {
  const auto gu = physical_gradient(vf.u_minus_c, Parity::even, vf);
  const auto gv = physical_gradient(vf.v, Parity::odd, vf);
  const auto gp = physical_gradient(P, Parity::even, vf);
  const auto [a, b] = interior_rows(vf.grid());
  return max_over_rows(vf.grid(), a, b, [&](int i, int j) {
    const double um = vf.u_minus_c(i, j), v = vf.v(i, j);
    const double rx = um * gu.fx(i, j) + v * gu.fy(i, j) + gp.fx(i, j);
    const double ry = um * gv.fx(i, j) + v * gv.fy(i, j) + gp.fy(i, j) + vf.params.g;
    return std::max(std::abs(rx), std::abs(ry));
  });
}

/// Surface kinematic condition v - (u - c) eta_x, with eta_x = h_q on p = 0.
inline ResidualNorm kinematic_residual(const VelocityField& vf) {
  const auto& g = vf.grid();
  return max_over_rows(g, g.np - 1, g.np, [&](int i, int j) {
    return vf.v(i, j) - vf.u_minus_c(i, j) * vf.hq(i, j);
  });
}

/// First-order irrotational wave about a uniform stream of depth d:
///   eta = A cos x, c0^2 = g tanh d,
///   v = A c0 sinh(y+d)/sinh d sin x, u - c = -c0 + A c0 cosh(y+d)/sinh d cos x.
struct LinearWave {
  double g = 9.81;
  double depth = 1.0;
  double A = 0.0;

  double c0() const { return std::sqrt(g * std::tanh(depth)); }
  double eta(double x) const { return A * std::cos(x); }
  double eta_x(double x) const { return -A * std::sin(x); }
  double v(double x, double y) const { return A * c0() * std::sinh(y + depth) / std::sinh(depth) * std::sin(x); }
  double u_minus_c(double x, double y) const {
    return -c0() + A * c0() * std::cosh(y + depth) / std::sinh(depth) * std::cos(x);
  }
  /// Streamline with mean level y0.
  double streamline(double y0, double x) const {
    return y0 + A * std::sinh(y0 + depth) / std::sinh(depth) * std::cos(x);
  }
  /// Head of the undisturbed stream.
  double Q() const { return c0() * c0() + 2.0 * g * depth; }
  /// Flux of the undisturbed stream.
  double p0() const { return -c0() * depth; }

  /// Height function of the first-order wave on a grid whose p0 must equal p0().
  HeightField height_field(int nq, int np) const {
    const Grid grid(nq, np, p0());
    HeightField f;
    f.h = Field2D(grid);
    const double s = 1.0 / c0();
    for (int j = 0; j < np; ++j) {
      const double h0 = (grid.p(j) - grid.p0) * s;
      for (int i = 0; i < nq; ++i) {
        f.h(i, j) = j == 0 ? 0.0 : h0 + A * std::sinh(h0) / std::sinh(depth) * std::cos(grid.q(i));
      }
    }
    f.params.g = g;
    f.params.p0 = grid.p0;
    f.params.Q = Q();
    f.params.c = c0();
    f.vorticity = VorticitySpec::zero();
    f.depth = depth;
    return f;
  }
};

inline LinearWave linear_wave_oracle(double g, double depth, double A) { return {g, depth, A}; }

inline void write_csv(std::ostream& os, const VelocityField& vf, const Field2D& P) {
  const auto& g = vf.grid();
  os << "q,p,x,y,u_minus_c,v,P,psi\n";
  os.precision(17);
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      os << g.q(i) << ',' << g.p(j) << ',' << vf.x(i, j) << ',' << vf.y(i, j) << ',' << vf.u_minus_c(i, j) << ','
         << vf.v(i, j) << ',' << P(i, j) << ',' << vf.psi(i, j) << '\n';
    }
  }
}

inline void write_csv(std::ostream& os, const Streamline& sl, const std::vector<double>& E) {
  os << "x,y,y_x,y_xx,v,E\n";
  os.precision(17);
  for (std::size_t i = 0; i < sl.x.size(); ++i) {
    os << sl.x[i] << ',' << sl.y[i] << ',' << sl.y_x[i] << ',' << sl.y_xx[i] << ',' << sl.v[i] << ','
       << (i < E.size() ? E[i] : 0.0) << '\n';
  }
}

} // namespace wavelab
