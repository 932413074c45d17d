#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "wavelab/error.hpp"

namespace wavelab {

enum class VorticityKind { zero, constant, affine };

/// Sign class of gamma' over the flux range; drives which theorems apply.
enum class MonotonicityClass { irrotational, constant, increasing, decreasing_bounded, general };

inline std::string_view to_string(VorticityKind k) {
  switch (k) {
  case VorticityKind::zero: return "zero";
  case VorticityKind::constant: return "constant";
  case VorticityKind::affine: return "affine";
  }
  return "?";
}

inline std::string_view to_string(MonotonicityClass c) {
  switch (c) {
  case MonotonicityClass::irrotational: return "irrotational";
  case MonotonicityClass::constant: return "constant";
  case MonotonicityClass::increasing: return "increasing";
  case MonotonicityClass::decreasing_bounded: return "decreasing-bounded";
  case MonotonicityClass::general: return "general";
  }
  return "?";
}

inline VorticityKind vorticity_kind_from_string(std::string_view s) {
  if (s == "zero") return VorticityKind::zero;
  if (s == "constant") return VorticityKind::constant;
  if (s == "affine") return VorticityKind::affine;
  throw OutOfRange("unknown vorticity kind '" + std::string(s) + "' (expected zero, constant or affine)");
}

/// Vorticity as a function of the stream function, gamma(psi) = beta*psi + gamma0.
///
/// The three kinds are restrictions of the affine form: zero forces both
/// coefficients to 0, constant forces beta = 0.
struct VorticitySpec {
  VorticityKind kind = VorticityKind::zero;
  double gamma0 = 0.0;
  double beta = 0.0;

  static VorticitySpec zero() { return {}; }
  static VorticitySpec constant(double gamma0) { return {VorticityKind::constant, gamma0, 0.0}; }
  static VorticitySpec affine(double beta, double gamma0 = 0.0) {
    return {VorticityKind::affine, gamma0, beta};
  }

  static VorticitySpec make(VorticityKind kind, double gamma0, double beta) {
    switch (kind) {
    case VorticityKind::zero: return zero();
    case VorticityKind::constant: return constant(gamma0);
    case VorticityKind::affine: return affine(beta, gamma0);
    }
    return zero();
  }

  double gamma(double psi) const noexcept {
    switch (kind) {
    case VorticityKind::zero: return 0.0;
    case VorticityKind::constant: return gamma0;
    case VorticityKind::affine: return beta * psi + gamma0;
    }
    return 0.0;
  }

  double gamma_prime(double /*psi*/) const noexcept {
    return kind == VorticityKind::affine ? beta : 0.0;
  }

  /// gamma(-p), the form that appears in the height-function equation.
  double gamma_of_p(double p) const noexcept { return gamma(-p); }

  MonotonicityClass monotonicity_class() const noexcept {
    switch (kind) {
    case VorticityKind::zero: return MonotonicityClass::irrotational;
    case VorticityKind::constant: return MonotonicityClass::constant;
    case VorticityKind::affine:
      if (beta > 0.0) return MonotonicityClass::increasing;
      if (beta < 0.0) return MonotonicityClass::decreasing_bounded;
      return MonotonicityClass::constant;
    }
    return MonotonicityClass::general;
  }

  /// min and max of gamma over psi in [0, -p0]; affine is monotone so the ends suffice.
  std::pair<double, double> gamma_range(double p0) const noexcept {
    const double a = gamma(0.0);
    const double b = gamma(-p0);
    return {std::min(a, b), std::max(a, b)};
  }

  bool operator==(const VorticitySpec&) const = default;
};

/// gamma(psi) with the flux range [0, -p0] enforced.
inline double evaluate_gamma(const VorticitySpec& spec, double psi, double p0) {
  const double top = -p0;
  const double slack = 1e-12 * std::max(1.0, top);
  if (!(psi >= -slack && psi <= top + slack)) {
    throw OutOfRange("psi = " + std::to_string(psi) + " outside the flux interval [0, " +
                     std::to_string(top) + "]");
  }
  return spec.gamma(psi);
}

/// Gamma(p) = int_0^p gamma(-s) ds on [p0, 0], plus its maximum.
class GammaIntegral {
public:
  GammaIntegral(VorticitySpec spec, double p0, double gamma_max)
      : spec_(spec), p0_(p0), gamma_max_(gamma_max) {}

  /// Closed form: gamma(-s) = -beta*s + gamma0 integrates to gamma0*p - beta*p^2/2.
  double operator()(double p) const noexcept {
    switch (spec_.kind) {
    case VorticityKind::zero: return 0.0;
    case VorticityKind::constant: return spec_.gamma0 * p;
    case VorticityKind::affine: return spec_.gamma0 * p - 0.5 * spec_.beta * p * p;
    }
    return 0.0;
  }

  double max() const noexcept { return gamma_max_; }
  double p0() const noexcept { return p0_; }

private:
  VorticitySpec spec_;
  double p0_;
  double gamma_max_;
};

/// Builds Gamma for the flux range [p0, 0]. Gamma_max is sampled on a grid
/// four times finer than a solver p-grid with `np` nodes.
inline GammaIntegral gamma_integral(const VorticitySpec& spec, double p0, int np = 65) {
  if (!(p0 < 0.0)) throw PreconditionError("gamma_integral requires p0 < 0");
  if (np < 2) np = 2;
  GammaIntegral probe(spec, p0, 0.0);
  const int samples = 4 * (np - 1);
  double best = probe(0.0);
  for (int k = 0; k <= samples; ++k) {
    const double p = p0 * (1.0 - static_cast<double>(k) / samples);
    best = std::max(best, probe(p));
  }
  return GammaIntegral(spec, p0, best);
}

enum class Admissibility { pass, fail, not_applicable };

inline std::string_view to_string(Admissibility a) {
  switch (a) {
  case Admissibility::pass: return "pass";
  case Admissibility::fail: return "fail";
  case Admissibility::not_applicable: return "not-applicable";
  }
  return "?";
}

/// Decreasing vorticity keeps the maximum principle for v only while
/// sup|gamma'| stays below the first Dirichlet eigenvalue of the half cell.
inline Admissibility check_remark41_bound(const VorticitySpec& spec, double lambda1_lower) {
  if (spec.monotonicity_class() != MonotonicityClass::decreasing_bounded) {
    return Admissibility::not_applicable;
  }
  if (!(lambda1_lower > 0.0)) throw PreconditionError("eigenvalue lower bound must be positive");
  return std::abs(spec.beta) < lambda1_lower ? Admissibility::pass : Admissibility::fail;
}

} // namespace wavelab
