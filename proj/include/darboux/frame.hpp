#pragma once

#include <cmath>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/samples.hpp"
#include "darboux/vec.hpp"

namespace darboux {

// Frame along a surface curve from sampled positions and the sampled surface
// normal. The raw tangent estimate is projected into the tangent plane before
// normalizing, so T _|_ U and V = U x T hold exactly.
inline FrameSeries frames_from_samples(const CurveSamples& c, const std::vector<Vec3>& U) {
  if (U.size() != c.size()) throw GeometryError("normal series size differs from curve");
  validate_grid(c.s, 3);
  const std::vector<Vec3> dp = grid_derivative(c.s, c.p);
  FrameSeries f;
  f.T.resize(c.size());
  f.V.resize(c.size());
  f.U = U;
  for (std::size_t i = 0; i < c.size(); ++i) {
    Vec3 t = dp[i] - U[i] * dot(dp[i], U[i]);
    const double len = norm(t);
    if (!(len > 1e-12)) throw GeometryError("tangent estimate vanished along the curve");
    f.T[i] = t / len;
    f.V[i] = cross(U[i], f.T[i]);
  }
  return f;
}

// Geodesic curvature, normal curvature and geodesic torsion from a sampled
// frame: kg = <T',V>, kn = <T',U>, tg = <V',U>.
inline ScalarSeries scalars_from_frames(const std::vector<double>& s, const FrameSeries& f) {
  if (f.size() != s.size()) throw GeometryError("frame series size differs from grid");
  validate_grid(s, 5);
  const std::vector<Vec3> dT = grid_derivative(s, f.T);
  const std::vector<Vec3> dV = grid_derivative(s, f.V);
  ScalarSeries out;
  out.kg.resize(s.size());
  out.kn.resize(s.size());
  out.tg.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.kg[i] = dot(dT[i], f.V[i]);
    out.kn[i] = dot(dT[i], f.U[i]);
    out.tg[i] = dot(dV[i], f.U[i]);
  }
  return out;
}

// The slant function
//   sigma(s) = (tg' kg - kg' tg - kn (kg^2 + tg^2)) / (kg^2 + tg^2)^(3/2),
// constant exactly on the curves this library traces in its default mode.
// Entries are NaN where kg^2 + tg^2 falls below eps_deg^2 (the formula
// degenerates on lines of curvature through flat directions).
inline std::vector<double> slant_function(const std::vector<double>& s, const ScalarSeries& q,
                                          double eps_deg = 1e-8) {
  if (q.size() != s.size()) throw GeometryError("scalar series size differs from grid");
  const std::vector<double> dkg = grid_derivative(s, q.kg);
  const std::vector<double> dtg = grid_derivative(s, q.tg);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m2 = q.kg[i] * q.kg[i] + q.tg[i] * q.tg[i];
    if (!(m2 > eps_deg * eps_deg)) {
      out[i] = kNaN;
      continue;
    }
    out[i] = (dtg[i] * q.kg[i] - dkg[i] * q.tg[i] - q.kn[i] * m2) / (m2 * std::sqrt(m2));
  }
  return out;
}

// Same quantity through the angle form: with (kg, tg) = m (cos phi, sin phi),
//   sigma = (phi' - kn) / m.
// Used as an independent cross-check of slant_function.
inline std::vector<double> slant_function_angle_form(const std::vector<double>& s,
                                                     const ScalarSeries& q,
                                                     double eps_deg = 1e-8) {
  if (q.size() != s.size()) throw GeometryError("scalar series size differs from grid");
  std::vector<double> phi(s.size());
  double prev_raw = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double raw = std::atan2(q.tg[i], q.kg[i]);
    if (i == 0) {
      phi[0] = raw;
    } else {
      double delta = raw - prev_raw;
      while (delta > kPi) delta -= 2 * kPi;
      while (delta < -kPi) delta += 2 * kPi;
      phi[i] = phi[i - 1] + delta;
    }
    prev_raw = raw;
  }
  const std::vector<double> dphi = grid_derivative(s, phi);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = std::hypot(q.kg[i], q.tg[i]);
    out[i] = m > eps_deg ? (dphi[i] - q.kn[i]) / m : kNaN;
  }
  return out;
}

// Frenet apparatus of a space curve under an arbitrary regular parameter:
//   kappa = |p' x p''| / |p'|^3,   tau = <p' x p'', p'''> / |p' x p''|^2.
inline FrenetSeries frenet_apparatus(const std::vector<double>& s, const std::vector<Vec3>& p,
                                     double eps = 1e-10) {
  validate_grid(s, 5);
  if (p.size() != s.size()) throw GeometryError("curve size differs from grid");
  const std::vector<Vec3> d1 = grid_derivative(s, p);
  const std::vector<Vec3> d2 = grid_derivative(s, d1);
  const std::vector<Vec3> d3 = grid_derivative(s, d2);
  FrenetSeries out;
  const std::size_t n = s.size();
  out.T.resize(n);
  out.N.resize(n);
  out.B.resize(n);
  out.kappa.resize(n);
  out.tau.resize(n);
  out.ok.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double speed = norm(d1[i]);
    const Vec3 c = cross(d1[i], d2[i]);
    const double cn = norm(c);
    out.T[i] = speed > eps ? d1[i] / speed : Vec3{kNaN, kNaN, kNaN};
    out.kappa[i] = speed > eps ? cn / (speed * speed * speed) : kNaN;
    if (cn > eps * eps && speed > eps) {
      out.B[i] = c / cn;
      out.N[i] = cross(out.B[i], out.T[i]);
      out.tau[i] = dot(c, d3[i]) / (cn * cn);
      out.ok[i] = 1;
    } else {
      out.N[i] = out.B[i] = {kNaN, kNaN, kNaN};
      out.tau[i] = kNaN;
      out.ok[i] = 0;
    }
  }
  return out;
}

// Geodesic curvature of a curve lying on the unit sphere:
//   <g' x g'', g> / |g'|^3.
inline std::vector<double> sphere_geodesic_curvature(const std::vector<double>& s,
                                                     const std::vector<Vec3>& g,
                                                     double eps = 1e-10) {
  validate_grid(s, 5);
  if (g.size() != s.size()) throw GeometryError("curve size differs from grid");
  const std::vector<Vec3> d1 = grid_derivative(s, g);
  const std::vector<Vec3> d2 = grid_derivative(s, d1);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double speed = norm(d1[i]);
    out[i] = speed > eps ? dot(cross(d1[i], d2[i]), g[i]) / (speed * speed * speed) : kNaN;
  }
  return out;
}

// Projections of the frame's instantaneous rotation vector
//   delta = tg T - kn V + kg U
// onto the three coordinate planes of the frame.
struct DarbouxFields {
  std::vector<Vec3> normal;      // -kn V + kg U  (T component dropped)
  std::vector<Vec3> rectifying;  //  tg T + kg U  (V component dropped)
  std::vector<Vec3> osculating;  //  tg T - kn V  (U component dropped)
};

inline DarbouxFields darboux_fields(const FrameSeries& f, const ScalarSeries& q) {
  if (f.size() != q.size()) throw GeometryError("frame and scalar series sizes differ");
  DarbouxFields out;
  const std::size_t n = f.size();
  out.normal.resize(n);
  out.rectifying.resize(n);
  out.osculating.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.normal[i] = f.V[i] * -q.kn[i] + f.U[i] * q.kg[i];
    out.rectifying[i] = f.T[i] * q.tg[i] + f.U[i] * q.kg[i];
    out.osculating[i] = f.T[i] * q.tg[i] - f.V[i] * q.kn[i];
  }
  return out;
}

}  // namespace darboux
