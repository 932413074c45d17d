#pragma once

#include "wavelab/grid.hpp"

namespace wavelab {

/// Behaviour of a field under reflection about q = 0 and q = pi.
enum class Parity { even, odd };

namespace fd {

/// f at a q-index that may lie one or two nodes outside [0, Nq-1].
inline double mirrored(const Field2D& f, int i, int j, Parity parity) {
  const auto& g = f.grid();
  const int r = g.reflect(i);
  const double v = f(r, j);
  return (r != i && parity == Parity::odd) ? -v : v;
}

/// Second-order central d/dq; the reflection ghosts make it valid at q = 0, pi.
inline double dq(const Field2D& f, int i, int j, Parity parity) {
  return (mirrored(f, i + 1, j, parity) - mirrored(f, i - 1, j, parity)) / (2.0 * f.grid().dq());
}

inline double dqq(const Field2D& f, int i, int j, Parity parity) {
  const double d = f.grid().dq();
  return (mirrored(f, i + 1, j, parity) - 2.0 * f(i, j) + mirrored(f, i - 1, j, parity)) / (d * d);
}

/// Second-order d/dp: central inside, one-sided on the bed and surface rows.
inline double dp(const Field2D& f, int i, int j) {
  const auto& g = f.grid();
  const double h = g.dp();
  if (j == 0) return (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) / (2.0 * h);
  if (j == g.np - 1) return (3.0 * f(i, j) - 4.0 * f(i, j - 1) + f(i, j - 2)) / (2.0 * h);
  return (f(i, j + 1) - f(i, j - 1)) / (2.0 * h);
}

inline double dpp(const Field2D& f, int i, int j) {
  const auto& g = f.grid();
  const double h = g.dp();
  if (j == 0) return (2.0 * f(i, 0) - 5.0 * f(i, 1) + 4.0 * f(i, 2) - f(i, 3)) / (h * h);
  if (j == g.np - 1) {
    return (2.0 * f(i, j) - 5.0 * f(i, j - 1) + 4.0 * f(i, j - 2) - f(i, j - 3)) / (h * h);
  }
  return (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) / (h * h);
}

/// Mixed derivative from central q-differences of the p-derivative.
inline double dqp(const Field2D& f, int i, int j, Parity parity) {
  const double s = parity == Parity::even ? 1.0 : -1.0;
  const auto& g = f.grid();
  auto dp_at = [&](int ii) {
    const int r = g.reflect(ii);
    const double v = dp(f, r, j);
    return r != ii ? s * v : v;
  };
  return (dp_at(i + 1) - dp_at(i - 1)) / (2.0 * g.dq());
}

/// Applies a pointwise derivative to every node.
template <class Op>
Field2D map_nodes(const Grid& grid, Op op) {
  Field2D out(grid);
  for (int j = 0; j < grid.np; ++j) {
    for (int i = 0; i < grid.nq; ++i) out(i, j) = op(i, j);
  }
  return out;
}

} // namespace fd
} // namespace wavelab
