#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/vec.hpp"

namespace darboux {

// A curve sampled on an increasing parameter grid. `uv` carries the
// parameter-plane track when the curve lives on a parametric surface and is
// empty otherwise.
struct CurveSamples {
  std::vector<double> s;
  std::vector<Vec3> p;
  std::vector<Vec2> uv;

  std::size_t size() const { return s.size(); }
};

// Orthonormal moving frame along a sampled curve: tangent T, the surface
// normal U, and the sideways direction V = U x T.
struct FrameSeries {
  std::vector<Vec3> T, V, U;

  std::size_t size() const { return T.size(); }
};

// Geodesic curvature, normal curvature and geodesic torsion along a curve.
struct ScalarSeries {
  std::vector<double> kg, kn, tg;

  std::size_t size() const { return kg.size(); }
};

// Frenet data of a space curve under a general (not arclength) parameter.
// `ok[i]` is false where curvature is too small for N, B, tau to mean much.
struct FrenetSeries {
  std::vector<Vec3> T, N, B;
  std::vector<double> kappa, tau;
  std::vector<char> ok;

  std::size_t size() const { return kappa.size(); }
};

// Differentiation and aggregation drop this many samples at each end, where
// one-sided differences degrade the estimates.
inline constexpr std::size_t kEndTrim = 3;

inline void validate_grid(const std::vector<double>& s, std::size_t n_min = 2) {
  if (s.size() < n_min) throw GeometryError("curve has too few samples");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw GeometryError("sample grid is not strictly increasing");
  // the end stencils below assume constant spacing; allow only rounding jitter
  if (s.size() < 3) return;
  const double h = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  for (std::size_t i = 1; i < s.size(); ++i)
    if (std::abs((s[i] - s[i - 1]) - h) > 1e-6 * h)
      throw GeometryError("sample grid is not uniform");
}

// First derivative on a grid: central differences inside, one-sided
// three-point stencils at the ends (hence the uniform-grid requirement).
template <class T>
std::vector<T> grid_derivative(const std::vector<double>& s, const std::vector<T>& f) {
  const std::size_t n = s.size();
  if (f.size() != n) throw GeometryError("derivative input sizes differ");
  validate_grid(s);
  std::vector<T> d(n);
  if (n == 2) {
    d[0] = (f[1] - f[0]) / (s[1] - s[0]);
    d[1] = d[0];
    return d;
  }
  d[0] = ((f[0] * -3.0) + (f[1] * 4.0) - f[2]) / (2 * (s[1] - s[0]));
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (s[i + 1] - s[i - 1]);
  d[n - 1] =
      ((f[n - 1] * 3.0) - (f[n - 2] * 4.0) + f[n - 3]) / (2 * (s[n - 1] - s[n - 2]));
  return d;
}

}  // namespace darboux
