#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wavelab/error.hpp"
#include "wavelab/vorticity.hpp"

namespace wavelab {

inline constexpr double pi = std::numbers::pi;

/// Physical data of the problem. Lengths, times and fluxes are in any
/// consistent unit system; the wave period is fixed at 2*pi.
struct PhysicalParams {
  double g = 9.81;
  double p0 = -1.0;   ///< relative mass flux, negative
  double Q = 0.0;     ///< Bernoulli head constant of the surface condition
  double P_atm = 0.0;
  double c = 0.0;     ///< wave speed used only when reporting u itself

  void validate() const {
    if (!(p0 < 0.0)) throw PreconditionError("p0 must be negative");
    if (!(g > 0.0)) throw PreconditionError("g must be positive");
  }

  bool operator==(const PhysicalParams&) const = default;
};

/// Uniform nodes on [0, pi] x [p0, 0], endpoints included.
struct Grid {
  int nq = 17;
  int np = 9;
  double p0 = -1.0;

  Grid() = default;
  Grid(int nq_, int np_, double p0_) : nq(nq_), np(np_), p0(p0_) { validate(); }

  void validate() const {
    if (nq < 17 || np < 9) {
      throw PreconditionError("grid needs Nq >= 17 and Np >= 9 (got " + std::to_string(nq) + "x" +
                              std::to_string(np) + ")");
    }
    if (!(p0 < 0.0)) throw PreconditionError("grid needs p0 < 0");
  }

  double dq() const noexcept { return pi / (nq - 1); }
  double dp() const noexcept { return -p0 / (np - 1); }
  double q(int i) const noexcept { return i * dq(); }
  double p(int j) const noexcept { return j == np - 1 ? 0.0 : p0 + j * dp(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(nq) * np; }
  std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(j) * nq + i; }

  /// Mirror image of a q-index across q = 0 and q = pi.
  int reflect(int i) const noexcept {
    if (i < 0) return -i;
    if (i > nq - 1) return 2 * (nq - 1) - i;
    return i;
  }

  bool operator==(const Grid&) const = default;
};

/// Node values on a Grid, stored row-major with one row per p-level.
class Field2D {
public:
  Field2D() = default;
  explicit Field2D(const Grid& grid, double fill = 0.0) : grid_(grid), data_(grid.size(), fill) {}
  Field2D(const Grid& grid, std::vector<double> values) : grid_(grid), data_(std::move(values)) {
    if (data_.size() != grid_.size()) throw PreconditionError("field size does not match grid");
  }

  double& operator()(int i, int j) noexcept { return data_[grid_.index(i, j)]; }
  double operator()(int i, int j) const noexcept { return data_[grid_.index(i, j)]; }

  const Grid& grid() const noexcept { return grid_; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double> row(int j) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(grid_.index(0, j)),
            data_.begin() + static_cast<std::ptrdiff_t>(grid_.index(0, j) + grid_.nq)};
  }

  bool operator==(const Field2D&) const = default;

private:
  Grid grid_;
  std::vector<double> data_;
};

/// Discrete height function h(q, p) together with everything needed to
/// interpret it physically.
struct HeightField {
  Field2D h;
  PhysicalParams params;
  VorticitySpec vorticity;
  double depth = 0.0; ///< d, so that y = h - d

  const Grid& grid() const noexcept { return h.grid(); }
  /// Crest-to-trough surface height h(0,0) - h(pi,0).
  double amplitude() const noexcept {
    const auto& gr = grid();
    return h(0, gr.np - 1) - h(gr.nq - 1, gr.np - 1);
  }

  bool operator==(const HeightField&) const = default;
};

/// Stagnation guard on h_p.
inline double flow_epsilon(double depth, double p0) { return 1e-6 * depth / -p0; }

} // namespace wavelab
