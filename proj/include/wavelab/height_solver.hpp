#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "wavelab/derivatives.hpp"
#include "wavelab/error.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/height_equation.hpp"
#include "wavelab/laminar.hpp"

namespace wavelab {

/// Extra source terms for manufactured-solution runs. Subtracted from the
/// interior and surface residual rows.
struct Forcing {
  Field2D interior;
  std::vector<double> surface;
};

/// What closes the system: either Q is fixed, or Q is released and the
/// crest-to-trough height is pinned.
struct Constraint {
  enum class Kind { head, amplitude };
  Kind kind = Kind::head;
  double value = 0.0;

  static Constraint head(double Q) { return {Kind::head, Q}; }
  static Constraint amplitude(double a) { return {Kind::amplitude, a}; }
};

namespace solver_detail {

inline height_equation::Jet interior_jet(const Field2D& h, int i, int j) {
  height_equation::Jet d;
  d.hq = fd::dq(h, i, j, Parity::even);
  d.hp = fd::dp(h, i, j);
  d.hqq = fd::dqq(h, i, j, Parity::even);
  d.hpp = fd::dpp(h, i, j);
  d.hqp = fd::dqp(h, i, j, Parity::even);
  return d;
}

inline double reference_depth(const HeightField& f) {
  if (f.depth > 0.0) return f.depth;
  const auto& g = f.grid();
  double m = 0.0;
  for (int i = 0; i < g.nq; ++i) m = std::max(m, f.h(i, g.np - 1));
  return m > 0.0 ? m : 1.0;
}

inline void check_flow(const HeightField& f) {
  const auto& g = f.grid();
  const double eps = flow_epsilon(reference_depth(f), g.p0);
  for (int j = 0; j < g.np; ++j) {
    for (int i = 0; i < g.nq; ++i) {
      const double hp = fd::dp(f.h, i, j);
      if (!(hp > eps)) {
        throw StagnationError("h_p = " + std::to_string(hp) + " <= " + std::to_string(eps) + " at (q, p) = (" +
                              std::to_string(g.q(i)) + ", " + std::to_string(g.p(j)) +
                              "): flow too close to stagnation");
      }
    }
  }
}

} // namespace solver_detail

/// Residual of the discrete height equations, one entry per node:
/// bed rows carry h, interior rows the field equation (with reflection ghosts
/// at q = 0, pi), surface rows the dynamic condition.
inline Field2D assemble_residual(const HeightField& f, const Forcing* forcing = nullptr) {
  solver_detail::check_flow(f);
  const auto& g = f.grid();
  Field2D r(g);
  for (int i = 0; i < g.nq; ++i) r(i, 0) = f.h(i, 0);
  for (int j = 1; j < g.np - 1; ++j) {
    const double gamma = f.vorticity.gamma_of_p(g.p(j));
    for (int i = 0; i < g.nq; ++i) {
      r(i, j) = height_equation::interior(solver_detail::interior_jet(f.h, i, j), gamma);
      if (forcing) r(i, j) -= forcing->interior(i, j);
    }
  }
  const int n = g.np - 1;
  for (int i = 0; i < g.nq; ++i) {
    r(i, n) = height_equation::surface(f.h(i, n), fd::dq(f.h, i, n, Parity::even), fd::dp(f.h, i, n),
                                       f.params.g, f.params.Q);
    if (forcing) r(i, n) -= forcing->surface[i];
  }
  return r;
}

inline double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Exact Jacobian of assemble_residual. Unknowns are the node values in
/// row-major order; with an amplitude constraint one more column (Q) and one
/// more row (the pin) are appended.
inline Eigen::SparseMatrix<double> assemble_jacobian(const HeightField& f,
                                                     Constraint::Kind kind = Constraint::Kind::head) {
  solver_detail::check_flow(f);
  const auto& g = f.grid();
  const auto n_nodes = static_cast<Eigen::Index>(g.size());
  const bool pinned = kind == Constraint::Kind::amplitude;
  const Eigen::Index n = n_nodes + (pinned ? 1 : 0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * 10 + 4);
  auto col = [&](int i, int j) { return static_cast<Eigen::Index>(g.index(g.reflect(i), j)); };
  const double dq = g.dq(), dp = g.dp();

  for (int i = 0; i < g.nq; ++i) {
    const auto row = col(i, 0);
    trip.emplace_back(row, row, 1.0);
  }
  for (int j = 1; j < g.np - 1; ++j) {
    const double gamma = f.vorticity.gamma_of_p(g.p(j));
    for (int i = 0; i < g.nq; ++i) {
      const auto row = static_cast<Eigen::Index>(g.index(i, j));
      const auto d = height_equation::interior_partials(solver_detail::interior_jet(f.h, i, j), gamma);
      auto add = [&](int ii, int jj, double v) { trip.emplace_back(row, col(ii, jj), v); };
      add(i + 1, j, d.hq / (2 * dq) + d.hqq / (dq * dq));
      add(i - 1, j, -d.hq / (2 * dq) + d.hqq / (dq * dq));
      add(i, j + 1, d.hp / (2 * dp) + d.hpp / (dp * dp));
      add(i, j - 1, -d.hp / (2 * dp) + d.hpp / (dp * dp));
      add(i, j, -2.0 * d.hqq / (dq * dq) - 2.0 * d.hpp / (dp * dp));
      const double c = d.hqp / (4 * dq * dp);
      add(i + 1, j + 1, c);
      add(i + 1, j - 1, -c);
      add(i - 1, j + 1, -c);
      add(i - 1, j - 1, c);
    }
  }
  const int top = g.np - 1;
  for (int i = 0; i < g.nq; ++i) {
    const auto row = static_cast<Eigen::Index>(g.index(i, top));
    const auto s = height_equation::surface_partials(f.h(i, top), fd::dq(f.h, i, top, Parity::even),
                                                     fd::dp(f.h, i, top), f.params.g, f.params.Q);
    auto add = [&](int ii, int jj, double v) { trip.emplace_back(row, col(ii, jj), v); };
    add(i, top, s.h + 3.0 * s.hp / (2 * dp));
    add(i, top - 1, -4.0 * s.hp / (2 * dp));
    add(i, top - 2, s.hp / (2 * dp));
    add(i + 1, top, s.hq / (2 * dq));
    add(i - 1, top, -s.hq / (2 * dq));
    if (pinned) trip.emplace_back(row, n_nodes, s.Q);
  }
  if (pinned) {
    trip.emplace_back(n_nodes, col(0, top), 1.0);
    trip.emplace_back(n_nodes, col(g.nq - 1, top), -1.0);
  }
  Eigen::SparseMatrix<double> J(n, n);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

enum class SolveStatus { converged, diverged, stalled, max_iterations, stagnation, invariant_violation };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::converged: return "converged";
  case SolveStatus::diverged: return "diverged";
  case SolveStatus::stalled: return "stalled";
  case SolveStatus::max_iterations: return "max-iterations";
  case SolveStatus::stagnation: return "stagnation";
  case SolveStatus::invariant_violation: return "invariant-violation";
  }
  return "?";
}

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  int max_halvings = 30;
  bool check_invariants = true;
};

struct NewtonResult {
  HeightField field;
  SolveStatus status = SolveStatus::converged;
  int iterations = 0;
  double residual = 0.0;
  std::string message;

  bool ok() const noexcept { return status == SolveStatus::converged; }
};

/// Checks the HeightField invariants. Returns a description of the first
/// violation, or nothing.
inline std::optional<std::string> invariant_violation(const HeightField& f, double tolerance = 1e-10) {
  const auto& g = f.grid();
  for (int i = 0; i < g.nq; ++i) {
    if (f.h(i, 0) != 0.0) return "bed row is not at h = 0";
  }
  try {
    solver_detail::check_flow(f);
  } catch (const StagnationError& e) {
    return std::string(e.what());
  }
  for (int j = 1; j < g.np - 1; ++j) {
    for (int i = 1; i < g.nq - 1; ++i) {
      const double hq = fd::dq(f.h, i, j, Parity::even);
      if (hq > 1e-12) {
        return "h_q = " + std::to_string(hq) + " > 0 at interior node (" + std::to_string(i) + ", " +
               std::to_string(j) + ")";
      }
    }
  }
  const int top = g.np - 1;
  for (int i = 0; i < g.nq; ++i) {
    const double r = height_equation::surface(f.h(i, top), fd::dq(f.h, i, top, Parity::even),
                                              fd::dp(f.h, i, top), f.params.g, f.params.Q);
    if (std::abs(r) > 10.0 * tolerance) return "surface condition residual " + std::to_string(r);
  }
  return std::nullopt;
}

namespace solver_detail {

inline Eigen::VectorXd full_residual(const HeightField& f, const Constraint& c, const Forcing* forcing) {
  const auto r = assemble_residual(f, forcing);
  const auto n = static_cast<Eigen::Index>(r.values().size());
  Eigen::VectorXd out(n + (c.kind == Constraint::Kind::amplitude ? 1 : 0));
  for (Eigen::Index k = 0; k < n; ++k) out[k] = r.values()[static_cast<std::size_t>(k)];
  if (c.kind == Constraint::Kind::amplitude) out[n] = f.amplitude() - c.value;
  return out;
}

} // namespace solver_detail

/// Damped Newton iteration on the discrete height equations.
inline NewtonResult newton_solve(HeightField start, const Constraint& constraint, const NewtonOptions& opt = {},
                                 const Forcing* forcing = nullptr) {
  const auto& g = start.grid();
  for (int i = 0; i < g.nq; ++i) {
    if (start.h(i, 0) != 0.0) throw PreconditionError("newton_solve: start field must satisfy h = 0 on the bed");
  }
  if (constraint.kind == Constraint::Kind::head) start.params.Q = constraint.value;

  NewtonResult res;
  res.field = std::move(start);
  HeightField& f = res.field;
  const bool pinned = constraint.kind == Constraint::Kind::amplitude;
  const auto n_nodes = static_cast<Eigen::Index>(g.size());

  Eigen::VectorXd r;
  try {
    r = solver_detail::full_residual(f, constraint, forcing);
  } catch (const StagnationError& e) {
    res.status = SolveStatus::stagnation;
    res.message = e.what();
    return res;
  }
  res.residual = r.lpNorm<Eigen::Infinity>();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  while (res.residual > opt.tolerance) {
    if (res.iterations >= opt.max_iterations) {
      res.status = SolveStatus::max_iterations;
      res.message = "no convergence in " + std::to_string(opt.max_iterations) + " iterations";
      return res;
    }
    const auto J = assemble_jacobian(f, constraint.kind);
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      res.status = SolveStatus::diverged;
      res.message = "singular Jacobian";
      return res;
    }
    Eigen::VectorXd step = lu.solve(-r);
    // Bed rows are identity equations already satisfied; keep them exactly zero.
    for (int i = 0; i < g.nq; ++i) step[static_cast<Eigen::Index>(g.index(i, 0))] = 0.0;
    ++res.iterations;

    const double r0 = r.norm();
    double alpha = 1.0;
    bool accepted = false;
    HeightField trial = f;
    Eigen::VectorXd r_trial;
    for (int halving = 0; halving <= opt.max_halvings; ++halving, alpha *= 0.5) {
      auto vals = trial.h.values();
      const auto base = f.h.values();
      for (Eigen::Index k = 0; k < n_nodes; ++k) {
        vals[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + alpha * step[k];
      }
      if (pinned) trial.params.Q = f.params.Q + alpha * step[n_nodes];
      try {
        r_trial = solver_detail::full_residual(trial, constraint, forcing);
      } catch (const StagnationError&) {
        continue;
      }
      if (r_trial.allFinite() && r_trial.norm() <= (1.0 - 1e-4 * alpha) * r0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.status = SolveStatus::diverged;
      res.message = "residual did not decrease after " + std::to_string(opt.max_halvings) + " step halvings";
      return res;
    }
    const double step_norm = alpha * step.lpNorm<Eigen::Infinity>();
    f = std::move(trial);
    r = std::move(r_trial);
    res.residual = r.lpNorm<Eigen::Infinity>();
    if (step_norm < 1e-14 && res.residual > opt.tolerance) {
      res.status = SolveStatus::stalled;
      res.message = "Newton step below 1e-14 with residual " + std::to_string(res.residual);
      return res;
    }
  }
  res.status = SolveStatus::converged;
  if (opt.check_invariants) {
    if (auto bad = invariant_violation(f, opt.tolerance)) {
      res.status = SolveStatus::invariant_violation;
      res.message = *bad;
    }
  }
  return res;
}

/// Laminar profile copied into every q-column.
inline HeightField laminar_field(const LaminarProfile& prof, int nq, const PhysicalParams& params,
                                 const VorticitySpec& spec) {
  const Grid grid(nq, static_cast<int>(prof.p.size()), prof.p.front());
  HeightField f;
  f.h = Field2D(grid);
  for (int j = 0; j < grid.np; ++j) {
    for (int i = 0; i < nq; ++i) f.h(i, j) = prof.h[static_cast<std::size_t>(j)];
  }
  f.params = params;
  f.params.p0 = grid.p0;
  f.params.Q = prof.Q;
  f.vorticity = spec;
  f.depth = prof.depth();
  return f;
}

/// Effective squared wavenumber of cos(q) under the reflected second difference.
inline double discrete_k2(const Grid& g) {
  const double dq = g.dq();
  return (2.0 - 2.0 * std::cos(dq)) / (dq * dq);
}

/// Surface height of the grid-consistent laminar flow with the same flux and head.
inline double laminar_reference_depth(const VorticitySpec& spec, const PhysicalParams& params, int np) {
  return solve_laminar(spec, params.g, params.p0, params.Q, np, LaminarScheme::grid).depth();
}

struct TraceMember {
  double amplitude = 0.0;
  double Q = 0.0;
  HeightField field;
  int iterations = 0;
  double residual = 0.0;
};

struct ContinuationTrace {
  std::vector<TraceMember> members;
  double Q_star = 0.0;
  double laminar_depth = 0.0;
  bool complete = false;
  std::string message;
};

/// Marches the crest-to-trough height a_k = k * target / steps from the
/// laminar state at the bifurcation, releasing Q at every step.
inline ContinuationTrace continue_in_amplitude(const VorticitySpec& spec, const PhysicalParams& params,
                                               const Grid& grid, double target_a, int steps,
                                               const NewtonOptions& opt = {}) {
  if (!(target_a > 0.0)) throw PreconditionError("continuation target amplitude must be positive");
  if (steps < 1) throw PreconditionError("continuation needs at least one step");
  params.validate();
  grid.validate();

  ContinuationTrace trace;
  const auto bif = bifurcation_head(spec, params.g, params.p0, grid.np, discrete_k2(grid));
  trace.Q_star = bif.Q_star;
  trace.laminar_depth = bif.laminar.depth();
  PhysicalParams base = params;
  base.p0 = grid.p0;
  if (base.c == 0.0) base.c = std::sqrt(base.g * std::tanh(trace.laminar_depth));
  const HeightField laminar = laminar_field(bif.laminar, grid.nq, base, spec);

  for (int k = 1; k <= steps; ++k) {
    const double a = target_a * k / steps;
    HeightField guess = laminar;
    const auto n = trace.members.size();
    if (n == 0) {
      for (int j = 0; j < grid.np; ++j) {
        for (int i = 0; i < grid.nq; ++i) guess.h(i, j) += 0.5 * a * std::cos(grid.q(i)) * bif.mode[j];
      }
    } else if (n == 1) {
      const auto& prev = trace.members.back();
      const double s = a / prev.amplitude;
      auto out = guess.h.values();
      const auto lam = laminar.h.values();
      const auto pv = prev.field.h.values();
      for (std::size_t m = 0; m < out.size(); ++m) out[m] = lam[m] + s * (pv[m] - lam[m]);
      guess.params.Q = laminar.params.Q + s * s * (prev.Q - laminar.params.Q);
    } else {
      const auto& p1 = trace.members[n - 1];
      const auto& p2 = trace.members[n - 2];
      const double s = (a - p1.amplitude) / (p1.amplitude - p2.amplitude);
      auto out = guess.h.values();
      const auto v1 = p1.field.h.values();
      const auto v2 = p2.field.h.values();
      for (std::size_t m = 0; m < out.size(); ++m) out[m] = v1[m] + s * (v1[m] - v2[m]);
      guess.params.Q = p1.Q + s * (p1.Q - p2.Q);
    }
    for (int i = 0; i < grid.nq; ++i) guess.h(i, 0) = 0.0;

    NewtonResult res;
    try {
      res = newton_solve(std::move(guess), Constraint::amplitude(a), opt);
    } catch (const Error& e) {
      res.status = SolveStatus::diverged;
      res.message = e.what();
    }
    if (!res.ok()) {
      trace.message = "step " + std::to_string(k) + " (a = " + std::to_string(a) + ") failed: " +
                      std::string(to_string(res.status)) + (res.message.empty() ? "" : ": " + res.message);
      if (trace.members.empty()) trace.message = "first-step failure: " + trace.message;
      return trace;
    }
    try {
      res.field.depth = laminar_reference_depth(spec, res.field.params, grid.np);
    } catch (const Error&) {
      res.field.depth = trace.laminar_depth;
    }
    trace.members.push_back({a, res.field.params.Q, std::move(res.field), res.iterations, res.residual});
  }
  trace.complete = true;
  return trace;
}

/// Largest relative mismatch between J d and the central difference
/// (R(h + e d) - R(h - e d)) / 2e over `directions` seeded random directions.
inline double jacobian_spot_check(const HeightField& f, std::uint64_t seed, int directions = 5, double step = 1e-6) {
  const auto J = assemble_jacobian(f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(f.grid().size());
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd d(n);
    for (Eigen::Index m = 0; m < n; ++m) d[m] = unit(rng);
    HeightField plus = f, minus = f;
    auto vp = plus.h.values();
    auto vm = minus.h.values();
    for (Eigen::Index m = 0; m < n; ++m) {
      vp[static_cast<std::size_t>(m)] += step * d[m];
      vm[static_cast<std::size_t>(m)] -= step * d[m];
    }
    const Field2D res_p = assemble_residual(plus);
    const Field2D res_m = assemble_residual(minus);
    const auto rp = res_p.values();
    const auto rm = res_m.values();
    const Eigen::VectorXd jd = J * d;
    double diff = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      const double fd = (rp[static_cast<std::size_t>(m)] - rm[static_cast<std::size_t>(m)]) / (2.0 * step);
      diff = std::max(diff, std::abs(fd - jd[m]));
    }
    worst = std::max(worst, diff / jd.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

} // namespace wavelab
