#pragma once

// Pointwise form of the height-function equations. Shared by the 2-D solver,
// the laminar march and the linearizations so that every route discretizes
// the same expressions.

namespace wavelab::height_equation {

/// Local derivatives of h at a node.
struct Jet {
  double hq = 0.0;
  double hp = 0.0;
  double hqq = 0.0;
  double hpp = 0.0;
  double hqp = 0.0;
};

/// (1 + h_q^2) h_pp - 2 h_q h_p h_qp + h_p^2 h_qq - gamma(-p) h_p^3
inline double interior(const Jet& d, double gamma) {
  return (1.0 + d.hq * d.hq) * d.hpp - 2.0 * d.hq * d.hp * d.hqp + d.hp * d.hp * d.hqq -
         gamma * d.hp * d.hp * d.hp;
}

/// Partial derivatives of `interior` with respect to each jet entry.
inline Jet interior_partials(const Jet& d, double gamma) {
  Jet out;
  out.hq = 2.0 * d.hq * d.hpp - 2.0 * d.hp * d.hqp;
  out.hp = -2.0 * d.hq * d.hqp + 2.0 * d.hp * d.hqq - 3.0 * gamma * d.hp * d.hp;
  out.hqq = d.hp * d.hp;
  out.hpp = 1.0 + d.hq * d.hq;
  out.hqp = -2.0 * d.hq * d.hp;
  return out;
}

/// Dynamic condition on p = 0: 1 + h_q^2 + (2 g h - Q) h_p^2.
inline double surface(double h, double hq, double hp, double g, double Q) {
  return 1.0 + hq * hq + (2.0 * g * h - Q) * hp * hp;
}

struct SurfacePartials {
  double h, hq, hp, Q;
};

inline SurfacePartials surface_partials(double h, double hq, double hp, double g, double Q) {
  return {2.0 * g * hp * hp, 2.0 * hq, 2.0 * (2.0 * g * h - Q) * hp, -hp * hp};
}

} // namespace wavelab::height_equation
