#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/samples.hpp"
#include "darboux/surface.hpp"
#include "darboux/vec.hpp"

namespace darboux {

// Which frame vector holds a constant angle with the fixed axis. The frame
// is {T, V, U}: curve tangent, tangent-plane normal V = U x T, surface
// normal U.
enum class Family {
  Slant,     // <V, axis> = cos(theta)
  Helix,     // <T, axis> = cos(theta), the classical constant-slope curve
  Isophote,  // <U, axis> = cos(theta), a constant-illumination line
};

enum class Branch { Plus, Minus };

enum class Termination {
  Completed,             // integrated through s_max
  DiscriminantNegative,  // the direction system lost its real solutions
  RegularityLost,        // surface or level-set regularity failed mid-trace
  DomainExit,            // left the parameter domain / bounding box
  StepFailure,           // a step, projection or pairing failed numerically
};

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Slant: return "slant";
    case Family::Helix: return "helix";
    case Family::Isophote: return "isophote";
  }
  return "?";
}

inline const char* to_string(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::DiscriminantNegative: return "discriminant_negative";
    case Termination::RegularityLost: return "regularity_lost";
    case Termination::DomainExit: return "domain_exit";
    case Termination::StepFailure: return "step_failure";
  }
  return "?";
}

struct TraceTolerances {
  double surface_residual = 1e-8;      // how far off the level set a start may sit
  double constraint_residual = 1e-10;  // direction-candidate acceptance (scaled)
  double discriminant_floor = 0.0;     // extra negative slack before giving up
  double eps_reg = 1e-10;              // regularity threshold |Xu x Xv|, |grad f|
  double eps_deg = 1e-8;               // axis-vs-normal degeneracy threshold
  double projection_tol = 1e-12;       // Newton projection / correction target
};

struct TraceConfig {
  Family family = Family::Slant;
  Vec3 axis{0, 0, 1};
  double theta = kPi / 4;
  Branch branch = Branch::Plus;
  double step = 1e-3;
  double s_max = 1.0;
  TraceTolerances tol{};
};

struct TraceResult {
  CurveSamples curve;
  FrameSeries frames;  // exact frames from the integrator states, not differences
  Termination termination = Termination::Completed;
  double s_reached = 0;
  // per-sample diagnostics
  std::vector<double> angle_err;    // <frame vector, axis> - cos(theta)
  std::vector<double> speed_err;    // | |velocity| - 1 |
  std::vector<double> surface_err;  // |f| (implicit traces; zero otherwise)
};

namespace detail {

// Square root of a discriminant. Values within roundoff of zero collapse to
// an exact double root — near tangency the raw value wobbles either side of
// zero and taking sqrt of the noise would split the root by sqrt(eps).
// Genuinely negative values set `negative` instead. `scale` is the term
// magnitude before cancellation.
inline double checked_sqrt(double value, double scale, double extra_slack, bool& negative) {
  const double slack = std::max(extra_slack, 1e-12 * std::max(1.0, scale));
  if (std::abs(value) <= slack) return 0.0;
  if (value >= 0) return std::sqrt(value);
  negative = true;
  return 0.0;
}

struct ParamPoint {
  ParametricSurface::Patch q;
  FirstForm I;
  double W2 = 0, W = 0;
  Vec3 U;
  double qu = 0, qv = 0;  // <Xu, axis>, <Xv, axis>
};

inline ParamPoint param_point(const ParametricSurface& S, double u, double v, const Vec3& d,
                              double eps_reg) {
  ParamPoint e;
  e.q = S.patch_unchecked(u, v);
  e.I = ParametricSurface::first_form(e.q);
  e.W2 = e.I.det();
  if (!(e.W2 > eps_reg * eps_reg))
    throw TraceError(TraceError::Code::Regularity, "surface parametrization is singular here");
  e.W = std::sqrt(e.W2);
  e.U = cross(e.q.Xu, e.q.Xv) / e.W;
  e.qu = dot(e.q.Xu, d);
  e.qv = dot(e.q.Xv, d);
  return e;
}

inline void push_unique(std::vector<Vec2>& out, const Vec2& w) {
  for (const Vec2& x : out) {
    const double tol = 1e-12 * (1 + std::max(std::abs(x.u), std::abs(x.v)));
    if (std::abs(x.u - w.u) <= tol && std::abs(x.v - w.v) <= tol) return;
  }
  out.push_back(w);
}

inline void push_unique(std::vector<Vec3>& out, const Vec3& w) {
  for (const Vec3& x : out) {
    const double tol = 1e-12 * (1 + std::max({std::abs(x.x), std::abs(x.y), std::abs(x.z)}));
    if (std::abs(x.x - w.x) <= tol && std::abs(x.y - w.y) <= tol && std::abs(x.z - w.z) <= tol)
      return;
  }
  out.push_back(w);
}

// Unit-speed parameter velocities with <V, axis> = c. Derived from the pair
//   (E qv - F qu) u' + (F qv - G qu) v' = c W      (the angle constraint)
//   E u'^2 + 2 F u' v' + G v'^2 = 1                (unit speed)
// via the resolved quadratic for each component; all four sign pairs are
// formed and checked back against the pair above, which keeps only the
// genuine intersections.
inline void slant_candidates(const ParamPoint& e, double c, const TraceTolerances& tol,
                             std::vector<Vec2>& out) {
  const double E = e.I.E, F = e.I.F, G = e.I.G, W2 = e.W2, W = e.W;
  const double A = E * e.qv * e.qv - 2 * F * e.qu * e.qv + G * e.qu * e.qu;
  const double metric_scale = std::max(1.0, E + std::abs(F) + G);
  if (A <= tol.eps_deg * tol.eps_deg * metric_scale) {
    // The axis is normal to the surface, so <V, axis> vanishes identically:
    // only theta = pi/2 is consistent, and every direction satisfies it.
    // Take the X_u direction as the representative root pair.
    if (std::abs(c) <= 1e-12) {
      out.push_back({1 / std::sqrt(E), 0});
      out.push_back({-1 / std::sqrt(E), 0});
      return;
    }
    throw TraceError(TraceError::Code::Degenerate,
                     "axis is normal to the surface, no direction meets the angle condition");
  }
  const double a1 = E * e.qv - F * e.qu;
  const double a2 = F * e.qv - G * e.qu;
  const double cW22 = 4 * c * c * W2 * W2;
  const double tu1 = cW22 * (e.qv * e.qv * W2 - A * G);
  const double tu2 = 4 * A * W2 * a2 * a2;
  const double tv1 = cW22 * (e.qu * e.qu * W2 - A * E);
  const double tv2 = 4 * A * W2 * a1 * a1;
  const double scale_u = cW22 * (e.qv * e.qv * W2 + A * G) + tu2;
  const double scale_v = cW22 * (e.qu * e.qu * W2 + A * E) + tv2;
  bool neg = false;
  const double ru = checked_sqrt(tu1 + tu2, scale_u, tol.discriminant_floor, neg);
  const double rv = checked_sqrt(tv1 + tv2, scale_v, tol.discriminant_floor, neg);
  if (neg)
    throw TraceError(TraceError::Code::DiscriminantNegative, "discriminant Delta negative");
  const double denom = 2 * A * W2;
  const double bu = 2 * c * W2 * W * e.qv;
  const double bv = -2 * c * W2 * W * e.qu;
  const double rhs = c * W;
  const double lin_scale = std::max(1.0, std::abs(a1) + std::abs(a2) + std::abs(rhs));
  for (const int su : {+1, -1})
    for (const int sv : {+1, -1}) {
      const Vec2 w = {(bu + su * ru) / denom, (bv + sv * rv) / denom};
      if (std::abs(a1 * w.u + a2 * w.v - rhs) > tol.constraint_residual * lin_scale) continue;
      if (std::abs(e.I.norm2(w) - 1) > tol.constraint_residual * metric_scale) continue;
      push_unique(out, w);
    }
}

// Unit-speed parameter velocities with <T, axis> = c, i.e.
//   qu u' + qv v' = c  together with unit speed. Solved by eliminating the
// component with the smaller axis projection.
inline void helix_candidates(const ParamPoint& e, double c, const TraceTolerances& tol,
                             std::vector<Vec2>& out) {
  const double E = e.I.E, F = e.I.F, G = e.I.G, W2 = e.W2;
  const double A = E * e.qv * e.qv - 2 * F * e.qu * e.qv + G * e.qu * e.qu;
  const double metric_scale = std::max(1.0, E + std::abs(F) + G);
  if (A <= tol.eps_deg * tol.eps_deg * metric_scale) {
    // Axis normal to the surface: <T, axis> = 0 for every direction.
    if (std::abs(c) <= 1e-12) {
      out.push_back({1 / std::sqrt(E), 0});
      out.push_back({-1 / std::sqrt(E), 0});
      return;
    }
    throw TraceError(TraceError::Code::Degenerate,
                     "axis is normal to the surface, no direction meets the angle condition");
  }
  const double disc4 = A - c * c * W2;  // common factor of both resolvents
  bool neg = false;
  const double root = checked_sqrt(disc4, std::abs(A) + c * c * W2, tol.discriminant_floor, neg);
  if (neg)
    throw TraceError(TraceError::Code::DiscriminantNegative, "discriminant Delta negative");
  const double lin_scale = std::max(1.0, std::abs(e.qu) + std::abs(e.qv) + std::abs(c));
  auto consider = [&](Vec2 w) {
    if (std::abs(e.qu * w.u + e.qv * w.v - c) > tol.constraint_residual * lin_scale) return;
    if (std::abs(e.I.norm2(w) - 1) > tol.constraint_residual * metric_scale) return;
    push_unique(out, w);
  };
  if (std::abs(e.qv) >= std::abs(e.qu)) {
    const double b = c * (F * e.qv - G * e.qu);
    for (const int sgn : {+1, -1}) {
      const double up = (-b + sgn * std::abs(e.qv) * root) / A;
      consider({up, (c - e.qu * up) / e.qv});
    }
  } else {
    const double b = c * (F * e.qu - E * e.qv);
    for (const int sgn : {+1, -1}) {
      const double vp = (-b + sgn * std::abs(e.qu) * root) / A;
      consider({(c - e.qv * vp) / e.qu, vp});
    }
  }
}

// Unit velocities v with <r1, v> = c1 and <r2, v> = c2 (two plane sections of
// the unit sphere). Pivot on the largest component of r1 x r2; the other two
// components follow by elimination. `r2_scale` normalizes the parallel test
// when r2 itself can vanish.
inline void two_plane_candidates(const Vec3& r1, double c1, const Vec3& r2, double c2,
                                 double r2_scale, const TraceTolerances& tol,
                                 std::vector<Vec3>& out) {
  const Vec3 piv = cross(r1, r2);
  const double r1n = norm(r1);
  if (norm(piv) <= tol.eps_deg * r1n * std::max(r2_scale, 1e-300)) {
    // The two planes are parallel: consistent only when both pass through the
    // origin, and then the whole great circle solves the system. Take the
    // projection of the first usable coordinate axis as the representative.
    const double c_scale = std::max(1.0, r1n) * std::max(1.0, r2_scale);
    if (std::abs(c1) <= 1e-12 * c_scale && std::abs(c2) <= 1e-12 * c_scale) {
      const Vec3 n = r1 / r1n;
      for (const Vec3& axis : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}) {
        const Vec3 t = axis - n * dot(axis, n);
        if (norm(t) > 0.1) {
          out.push_back(normalized(t));
          out.push_back(normalized(t) * -1.0);
          return;
        }
      }
    }
    throw TraceError(TraceError::Code::Degenerate,
                     "axis is normal to the surface, no direction meets the angle condition");
  }
  const double r1c[3] = {r1.x, r1.y, r1.z};
  const double r2c[3] = {r2.x, r2.y, r2.z};
  const double cc[3] = {c1, c2, 0};
  const double pv[3] = {piv.x, piv.y, piv.z};
  int w = 0;
  for (int k = 1; k < 3; ++k)
    if (std::abs(pv[k]) > std::abs(pv[w])) w = k;
  const int i = (w + 1) % 3, j = (w + 2) % 3;
  const double det = pv[w];  // = r1[i] r2[j] - r1[j] r2[i]
  const double ai = (r1c[j] * r2c[w] - r1c[w] * r2c[j]) / det;
  const double bi = (cc[0] * r2c[j] - r1c[j] * cc[1]) / det;
  const double aj = (r1c[w] * r2c[i] - r1c[i] * r2c[w]) / det;
  const double bj = (r1c[i] * cc[1] - cc[0] * r2c[i]) / det;
  const double q1 = ai * ai + aj * aj + 1;
  const double q2 = 2 * (ai * bi + aj * bj);
  const double q3 = bi * bi + bj * bj - 1;
  bool neg = false;
  const double disc = q2 * q2 - 4 * q1 * q3;
  const double root =
      checked_sqrt(disc, q2 * q2 + 4 * std::abs(q1 * q3), tol.discriminant_floor, neg);
  if (neg)
    throw TraceError(TraceError::Code::DiscriminantNegative, "discriminant Delta negative");
  const double lin1 = std::max(1.0, r1n + std::abs(c1));
  const double lin2 = std::max(1.0, norm(r2) + std::abs(c2));
  for (const int sgn : {+1, -1}) {
    const double vw = (-q2 + sgn * root) / (2 * q1);
    double comp[3];
    comp[w] = vw;
    comp[i] = ai * vw + bi;
    comp[j] = aj * vw + bj;
    const Vec3 v{comp[0], comp[1], comp[2]};
    if (std::abs(dot(r1, v) - c1) > tol.constraint_residual * lin1) continue;
    if (std::abs(dot(r2, v) - c2) > tol.constraint_residual * lin2) continue;
    if (std::abs(norm2(v) - 1) > tol.constraint_residual * 4) continue;
    push_unique(out, v);
  }
}

struct ImplPoint {
  ImplicitSurface::Sample smp;
  double gn = 0;  // |grad f|
  Vec3 nrm;       // unit normal
};

inline ImplPoint impl_point(const ImplicitSurface& S, const Vec3& p, double eps_reg) {
  ImplPoint e;
  e.smp = S.sample(p);
  e.gn = norm(e.smp.grad);
  if (!(e.gn > eps_reg))
    throw TraceError(TraceError::Code::LevelSetSingular, "level set is singular here");
  e.nrm = e.smp.grad / e.gn;
  return e;
}

inline void impl_candidates(const ImplPoint& e, Family family, const Vec3& d, double c,
                            const TraceTolerances& tol, std::vector<Vec3>& out) {
  if (family == Family::Slant) {
    // tangency <grad f, v> = 0 and <axis x grad f, v> = |grad f| cos(theta)
    two_plane_candidates(e.smp.grad, 0, cross(d, e.smp.grad), e.gn * c, e.gn, tol, out);
  } else {
    // tangency and <axis, v> = cos(theta)
    two_plane_candidates(e.smp.grad, 0, d, c, 1.0, tol, out);
  }
}

// Reference direction that defines the Plus branch at the start point.
inline Vec3 branch_reference(Family family, const Vec3& U, const Vec3& d) {
  return family == Family::Slant ? d - U * dot(d, U) : cross(U, d);
}

// Pick a candidate: by continuity against `ref` when given, otherwise by the
// branch convention (Plus keeps positive sweep around the axis; exact ties
// fall back to lexicographic order of the velocity).
template <class VelT>
std::size_t pick_candidate(const std::vector<VelT>& cands, const std::vector<Vec3>& vel3,
                           const Vec3* ref, Branch branch, const Vec3& branch_ref) {
  std::size_t best = 0;
  if (ref) {
    double top = -kInf;
    for (std::size_t k = 0; k < vel3.size(); ++k) {
      const double score = dot(vel3[k], *ref);
      if (score > top) {
        top = score;
        best = k;
      }
    }
    return best;
  }
  auto key = [&](std::size_t k) {
    return std::array<double, 4>{dot(vel3[k], branch_ref), vel3[k].x, vel3[k].y, vel3[k].z};
  };
  for (std::size_t k = 1; k < cands.size(); ++k) {
    const bool greater = key(k) > key(best);
    if ((branch == Branch::Plus) == greater) best = k;
  }
  return best;
}

struct ParamEval {
  Vec2 vel2;
  Vec3 vel3;
  Vec3 pos, U;
  double angle_err = 0, speed_err = 0;
};

inline ParamEval param_rhs(const ParametricSurface& S, const Vec2& y, const TraceConfig& cfg,
                           const Vec3& d, double c, const Vec3* ref) {
  const ParamPoint e = param_point(S, y.u, y.v, d, cfg.tol.eps_reg);
  std::vector<Vec2> cands;
  if (cfg.family == Family::Slant)
    slant_candidates(e, c, cfg.tol, cands);
  else
    helix_candidates(e, c, cfg.tol, cands);
  if (cands.empty())
    throw TraceError(TraceError::Code::Degenerate,
                     "no direction satisfies the angle and speed constraints");
  std::vector<Vec3> vel3(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k)
    vel3[k] = e.q.Xu * cands[k].u + e.q.Xv * cands[k].v;
  const std::size_t k =
      pick_candidate(cands, vel3, ref, cfg.branch, branch_reference(cfg.family, e.U, d));
  ParamEval out;
  out.vel2 = cands[k];
  out.vel3 = vel3[k];
  out.pos = e.q.p;
  out.U = e.U;
  const Vec3 pref = cfg.family == Family::Slant ? cross(e.U, out.vel3) : out.vel3;
  out.angle_err = dot(pref, d) - c;
  out.speed_err = std::abs(norm(out.vel3) - 1);
  return out;
}

struct ImplEval {
  Vec3 vel3;
  Vec3 U;
  double f_abs = 0, angle_err = 0, speed_err = 0;
};

inline ImplEval impl_rhs(const ImplicitSurface& S, const Vec3& p, const TraceConfig& cfg,
                         const Vec3& d, double c, const Vec3* ref) {
  const ImplPoint e = impl_point(S, p, cfg.tol.eps_reg);
  std::vector<Vec3> cands;
  impl_candidates(e, cfg.family, d, c, cfg.tol, cands);
  if (cands.empty())
    throw TraceError(TraceError::Code::Degenerate,
                     "no direction satisfies the angle and speed constraints");
  const std::size_t k =
      pick_candidate(cands, cands, ref, cfg.branch, branch_reference(cfg.family, e.nrm, d));
  ImplEval out;
  out.vel3 = cands[k];
  out.U = e.nrm;
  out.f_abs = std::abs(e.smp.f);
  const Vec3 pref = cfg.family == Family::Slant ? cross(e.nrm, out.vel3) : out.vel3;
  out.angle_err = dot(pref, d) - c;
  out.speed_err = std::abs(norm(out.vel3) - 1);
  return out;
}

inline Termination map_failure(const TraceError& err) {
  switch (err.code) {
    case TraceError::Code::DiscriminantNegative: return Termination::DiscriminantNegative;
    case TraceError::Code::Regularity:
    case TraceError::Code::LevelSetSingular: return Termination::RegularityLost;
    case TraceError::Code::Domain: return Termination::DomainExit;
    default: return Termination::StepFailure;
  }
}

inline std::size_t step_budget(double s_max, double step) {
  if (!(step > 0)) throw GeometryError("step size must be positive");
  if (!(s_max >= 0)) throw GeometryError("s_max must be non-negative");
  return static_cast<std::size_t>(std::floor(s_max / step + 1e-9));
}

inline bool finite(const Vec2& y) { return std::isfinite(y.u) && std::isfinite(y.v); }
inline bool finite(const Vec3& y) {
  return std::isfinite(y.x) && std::isfinite(y.y) && std::isfinite(y.z);
}

template <class Eval>
void push_sample(TraceResult& out, double s, const Vec3& pos, const Eval& e, double f_abs) {
  out.curve.s.push_back(s);
  out.curve.p.push_back(pos);
  const Vec3 T = normalized(e.vel3);
  out.frames.T.push_back(T);
  out.frames.U.push_back(e.U);
  out.frames.V.push_back(cross(e.U, T));
  out.angle_err.push_back(e.angle_err);
  out.speed_err.push_back(e.speed_err);
  out.surface_err.push_back(f_abs);
  out.s_reached = s;
}

}  // namespace detail

// All admissible unit-speed directions at one point, before branch selection.
inline std::vector<Vec2> direction_candidates(const ParametricSurface& S, const Vec2& at,
                                              const TraceConfig& cfg) {
  const Vec3 d = normalized(cfg.axis);
  const double c = std::cos(cfg.theta);
  const detail::ParamPoint e = detail::param_point(S, at.u, at.v, d, cfg.tol.eps_reg);
  std::vector<Vec2> cands;
  if (cfg.family == Family::Slant) {
    detail::slant_candidates(e, c, cfg.tol, cands);
  } else if (cfg.family == Family::Helix) {
    detail::helix_candidates(e, c, cfg.tol, cands);
  } else {
    throw GeometryError("isophote directions come from the angle field, not a direction system");
  }
  return cands;
}

inline std::vector<Vec3> direction_candidates(const ImplicitSurface& S, const Vec3& at,
                                              const TraceConfig& cfg) {
  if (cfg.family == Family::Isophote)
    throw GeometryError("isophote traces need a parametric surface");
  const Vec3 d = normalized(cfg.axis);
  const double c = std::cos(cfg.theta);
  const detail::ImplPoint e = detail::impl_point(S, at, cfg.tol.eps_reg);
  std::vector<Vec3> cands;
  detail::impl_candidates(e, cfg.family, d, c, cfg.tol, cands);
  return cands;
}

namespace detail {

inline TraceResult trace_param_ode(const ParametricSurface& S, Vec2 start,
                                   const TraceConfig& cfg) {
  const Vec3 d = normalized(cfg.axis);
  const double c = std::cos(cfg.theta);
  const double h = cfg.step;
  const std::size_t steps = step_budget(cfg.s_max, cfg.step);

  if (!S.in_domain(start.u, start.v))
    throw TraceError(TraceError::Code::Domain, "start point is outside the surface domain");

  TraceResult out;
  ParamEval cur;
  try {
    cur = param_rhs(S, start, cfg, d, c, nullptr);
  } catch (const TraceError& err) {
    throw TraceError(err.code, std::string(err.what()) + " at initial point");
  }
  Vec2 y = start;
  out.curve.uv.push_back(y);
  push_sample(out, 0.0, cur.pos, cur, 0.0);

  for (std::size_t n = 0; n < steps; ++n) {
    Vec2 y_next;
    ParamEval next;
    try {
      const ParamEval& k1 = cur;
      const ParamEval k2 = param_rhs(S, y + (h / 2) * k1.vel2, cfg, d, c, &k1.vel3);
      const ParamEval k3 = param_rhs(S, y + (h / 2) * k2.vel2, cfg, d, c, &k2.vel3);
      const ParamEval k4 = param_rhs(S, y + h * k3.vel2, cfg, d, c, &k3.vel3);
      y_next = y + (h / 6) * (k1.vel2 + 2 * k2.vel2 + 2 * k3.vel2 + k4.vel2);
      if (!finite(y_next))
        throw TraceError(TraceError::Code::Degenerate, "step produced a non-finite state");
      if (!S.in_domain(y_next.u, y_next.v))
        throw TraceError(TraceError::Code::Domain, "trace left the surface domain");
      next = param_rhs(S, y_next, cfg, d, c, &k4.vel3);
    } catch (const TraceError& err) {
      out.termination = map_failure(err);
      return out;
    } catch (const Error&) {
      out.termination = Termination::StepFailure;
      return out;
    }
    y = y_next;
    cur = next;
    out.curve.uv.push_back(y);
    push_sample(out, static_cast<double>(n + 1) * h, cur.pos, cur, 0.0);
  }
  out.termination = Termination::Completed;
  return out;
}

inline TraceResult trace_impl_ode(const ImplicitSurface& S, Vec3 start, const TraceConfig& cfg) {
  const Vec3 d = normalized(cfg.axis);
  const double c = std::cos(cfg.theta);
  const double h = cfg.step;
  const std::size_t steps = step_budget(cfg.s_max, cfg.step);

  if (!S.box().contains(start))
    throw TraceError(TraceError::Code::Domain, "start point is outside the bounding box");
  if (std::abs(S.value(start)) > cfg.tol.surface_residual)
    throw TraceError(TraceError::Code::NotOnLevelSet, "start point is not on the surface");
  Vec3 p;
  try {
    p = S.project(start, cfg.tol.projection_tol);
  } catch (const Error& err) {
    throw TraceError(TraceError::Code::ProjectionFailed, err.what());
  }

  TraceResult out;
  ImplEval cur;
  try {
    cur = impl_rhs(S, p, cfg, d, c, nullptr);
  } catch (const TraceError& err) {
    throw TraceError(err.code, std::string(err.what()) + " at initial point");
  }
  push_sample(out, 0.0, p, cur, cur.f_abs);

  for (std::size_t n = 0; n < steps; ++n) {
    Vec3 p_next;
    ImplEval next;
    try {
      const ImplEval& k1 = cur;
      const ImplEval k2 = impl_rhs(S, p + k1.vel3 * (h / 2), cfg, d, c, &k1.vel3);
      const ImplEval k3 = impl_rhs(S, p + k2.vel3 * (h / 2), cfg, d, c, &k2.vel3);
      const ImplEval k4 = impl_rhs(S, p + k3.vel3 * h, cfg, d, c, &k3.vel3);
      p_next = p + (k1.vel3 + (k2.vel3 + k3.vel3) * 2.0 + k4.vel3) * (h / 6);
      if (!finite(p_next))
        throw TraceError(TraceError::Code::Degenerate, "step produced a non-finite state");
      // hold the integrated point exactly on the level set
      try {
        p_next = S.project(p_next, cfg.tol.projection_tol);
      } catch (const Error& err) {
        throw TraceError(TraceError::Code::ProjectionFailed, err.what());
      }
      if (!S.box().contains(p_next))
        throw TraceError(TraceError::Code::Domain, "trace left the bounding box");
      next = impl_rhs(S, p_next, cfg, d, c, &k4.vel3);
    } catch (const TraceError& err) {
      out.termination = map_failure(err);
      return out;
    } catch (const Error&) {
      out.termination = Termination::StepFailure;
      return out;
    }
    p = p_next;
    cur = next;
    push_sample(out, static_cast<double>(n + 1) * h, p, cur, cur.f_abs);
  }
  out.termination = Termination::Completed;
  return out;
}

// --- isophotes ---------------------------------------------------------
// An isophote is the level curve g(u,v) = <U(u,v), axis> - cos(theta) = 0.
// It is traced as such: an RK4 predictor follows the level direction
// (-g_v, g_u) at unit surface speed and a Newton corrector pulls each
// accepted sample back onto g = 0.

struct IsoPoint {
  ParametricSurface::Patch q;
  FirstForm I;
  double W = 0;
  Vec3 U;
  double g = 0;
  Vec2 grad_g;
};

inline IsoPoint iso_point(const ParametricSurface& S, const Vec2& y, const Vec3& d, double c,
                          double eps_reg) {
  IsoPoint e;
  e.q = S.patch_unchecked(y.u, y.v);
  e.I = ParametricSurface::first_form(e.q);
  const double W2 = e.I.det();
  if (!(W2 > eps_reg * eps_reg))
    throw TraceError(TraceError::Code::Regularity, "surface parametrization is singular here");
  e.W = std::sqrt(W2);
  const Vec3 C = cross(e.q.Xu, e.q.Xv);
  e.U = C / e.W;
  const Vec3 Cu = cross(e.q.Xuu, e.q.Xv) + cross(e.q.Xu, e.q.Xuv);
  const Vec3 Cv = cross(e.q.Xuv, e.q.Xv) + cross(e.q.Xu, e.q.Xvv);
  const double W3 = e.W * e.W * e.W;
  const Vec3 Uu = Cu / e.W - C * (dot(C, Cu) / W3);
  const Vec3 Uv = Cv / e.W - C * (dot(C, Cv) / W3);
  e.g = dot(e.U, d) - c;
  e.grad_g = {dot(Uu, d), dot(Uv, d)};
  return e;
}

struct IsoEval {
  Vec2 vel2;
  Vec3 vel3;
  Vec3 pos, U;
  double angle_err = 0, speed_err = 0;
};

inline IsoEval iso_rhs(const ParametricSurface& S, const Vec2& y, const TraceConfig& cfg,
                       const Vec3& d, double c, const Vec3* ref) {
  const IsoPoint e = iso_point(S, y, d, c, cfg.tol.eps_reg);
  const double gsz = std::hypot(e.grad_g.u, e.grad_g.v);
  if (!(gsz > cfg.tol.eps_deg))
    throw TraceError(TraceError::Code::LevelSetSingular,
                     "the angle field is critical here (grad g ~ 0)");
  Vec2 w = {-e.grad_g.v, e.grad_g.u};
  const double wlen = e.I.norm(w);
  if (!(wlen > 0))
    throw TraceError(TraceError::Code::LevelSetSingular, "level direction degenerated");
  w = (1 / wlen) * w;
  Vec3 v3 = e.q.Xu * w.u + e.q.Xv * w.v;
  const bool flip = ref ? dot(v3, *ref) < 0 : cfg.branch == Branch::Minus;
  if (flip) {
    w = -1.0 * w;
    v3 = v3 * -1.0;
  }
  IsoEval out;
  out.vel2 = w;
  out.vel3 = v3;
  out.pos = e.q.p;
  out.U = e.U;
  out.angle_err = e.g;
  out.speed_err = std::abs(norm(v3) - 1);
  return out;
}

inline Vec2 iso_correct(const ParametricSurface& S, Vec2 y, const Vec3& d, double c,
                        const TraceTolerances& tol) {
  for (int iter = 0; iter < 8; ++iter) {
    const IsoPoint e = iso_point(S, y, d, c, tol.eps_reg);
    if (std::abs(e.g) <= tol.projection_tol) return y;
    const double n2 = e.grad_g.u * e.grad_g.u + e.grad_g.v * e.grad_g.v;
    if (!(n2 > tol.eps_deg * tol.eps_deg))
      throw TraceError(TraceError::Code::LevelSetSingular,
                       "the angle field is critical here (grad g ~ 0)");
    y = y + (-e.g / n2) * e.grad_g;
  }
  const IsoPoint e = iso_point(S, y, d, c, tol.eps_reg);
  if (std::abs(e.g) <= tol.projection_tol) return y;
  throw TraceError(TraceError::Code::ProjectionFailed,
                   "correction onto the isophote level did not converge");
}

inline TraceResult trace_isophote(const ParametricSurface& S, Vec2 start,
                                  const TraceConfig& cfg) {
  const Vec3 d = normalized(cfg.axis);
  const double c = std::cos(cfg.theta);
  const double h = cfg.step;
  const std::size_t steps = step_budget(cfg.s_max, cfg.step);

  if (!S.in_domain(start.u, start.v))
    throw TraceError(TraceError::Code::Domain, "start point is outside the surface domain");

  TraceResult out;
  Vec2 y;
  IsoEval cur;
  try {
    const IsoPoint e0 = iso_point(S, start, d, c, cfg.tol.eps_reg);
    if (std::abs(e0.g) > cfg.tol.surface_residual)
      throw TraceError(TraceError::Code::NotOnLevelSet,
                       "start point does not lie on the requested isophote");
    y = iso_correct(S, start, d, c, cfg.tol);
    cur = iso_rhs(S, y, cfg, d, c, nullptr);
  } catch (const TraceError& err) {
    throw TraceError(err.code, std::string(err.what()) + " at initial point");
  }
  out.curve.uv.push_back(y);
  push_sample(out, 0.0, cur.pos, cur, 0.0);

  for (std::size_t n = 0; n < steps; ++n) {
    Vec2 y_next;
    IsoEval next;
    try {
      const IsoEval& k1 = cur;
      const IsoEval k2 = iso_rhs(S, y + (h / 2) * k1.vel2, cfg, d, c, &k1.vel3);
      const IsoEval k3 = iso_rhs(S, y + (h / 2) * k2.vel2, cfg, d, c, &k2.vel3);
      const IsoEval k4 = iso_rhs(S, y + h * k3.vel2, cfg, d, c, &k3.vel3);
      y_next = y + (h / 6) * (k1.vel2 + 2 * k2.vel2 + 2 * k3.vel2 + k4.vel2);
      if (!finite(y_next))
        throw TraceError(TraceError::Code::Degenerate, "step produced a non-finite state");
      y_next = iso_correct(S, y_next, d, c, cfg.tol);
      if (!S.in_domain(y_next.u, y_next.v))
        throw TraceError(TraceError::Code::Domain, "trace left the surface domain");
      next = iso_rhs(S, y_next, cfg, d, c, &k4.vel3);
    } catch (const TraceError& err) {
      out.termination = map_failure(err);
      return out;
    } catch (const Error&) {
      out.termination = Termination::StepFailure;
      return out;
    }
    y = y_next;
    cur = next;
    out.curve.uv.push_back(y);
    push_sample(out, static_cast<double>(n + 1) * h, cur.pos, cur, 0.0);
  }
  out.termination = Termination::Completed;
  return out;
}

}  // namespace detail

// Trace a constant-angle curve on a parametric surface with fixed-step RK4
// (slant and helix families) or predictor-corrector continuation along the
// angle level set (isophote family). Failures at the start point throw a
// TraceError; failures along the way end the trace with a recorded
// termination reason.
inline TraceResult trace(const ParametricSurface& S, const Vec2& start, const TraceConfig& cfg) {
  if (!(norm(cfg.axis) > 0)) throw GeometryError("axis must be a nonzero vector");
  if (cfg.family == Family::Isophote) return detail::trace_isophote(S, start, cfg);
  return detail::trace_param_ode(S, start, cfg);
}

// Trace on an implicit surface. The isophote family needs a parametrization
// and is rejected here.
inline TraceResult trace(const ImplicitSurface& S, const Vec3& start, const TraceConfig& cfg) {
  if (!(norm(cfg.axis) > 0)) throw GeometryError("axis must be a nonzero vector");
  if (cfg.family == Family::Isophote)
    throw GeometryError("isophote traces need a parametric surface");
  return detail::trace_impl_ode(S, start, cfg);
}

using StartPoint = std::variant<Vec2, Vec3>;

inline TraceResult trace(const Surface& S, const StartPoint& start, const TraceConfig& cfg) {
  if (const auto* ps = std::get_if<ParametricSurface>(&S)) {
    if (const auto* y = std::get_if<Vec2>(&start)) return trace(*ps, *y, cfg);
    throw GeometryError("a parametric surface needs a (u,v) start point");
  }
  const auto& is = std::get<ImplicitSurface>(S);
  if (const auto* p = std::get_if<Vec3>(&start)) return trace(is, *p, cfg);
  throw GeometryError("an implicit surface needs an (x,y,z) start point");
}

}  // namespace darboux
