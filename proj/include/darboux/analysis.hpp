#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/frame.hpp"
#include "darboux/samples.hpp"
#include "darboux/vec.hpp"

namespace darboux {

// Gates used by the verification helpers. Constancy is judged relative to
// the mean, zero tests relative to the overall scalar scale, and agreement
// between independent estimates relative to the shared value.
struct AnalysisTolerances {
  double constancy_rel = 1e-3;
  double zero_abs = 1e-6;
  double match_rel = 1e-3;
  double eps_deg = 1e-8;
};

// ---------------------------------------------------------------------------
// series statistics

struct SeriesStats {
  double mean = 0, lo = kInf, hi = -kInf, max_abs = 0;
  std::size_t n = 0;

  double spread() const { return n ? hi - lo : kInf; }
  // (max-min) relative to max(1, |mean|): the constancy measure
  double variation() const { return n ? spread() / std::max(1.0, std::abs(mean)) : kInf; }
};

// Statistics over the interior samples (ends trimmed, non-finite skipped).
inline SeriesStats interior_stats(const std::vector<double>& x, std::size_t trim = kEndTrim) {
  SeriesStats st;
  if (x.size() <= 2 * trim) return st;
  double sum = 0;
  for (std::size_t i = trim; i + trim < x.size(); ++i) {
    if (!std::isfinite(x[i])) continue;
    sum += x[i];
    st.lo = std::min(st.lo, x[i]);
    st.hi = std::max(st.hi, x[i]);
    st.max_abs = std::max(st.max_abs, std::abs(x[i]));
    ++st.n;
  }
  if (st.n) st.mean = sum / static_cast<double>(st.n);
  return st;
}

inline bool nearly_constant(const SeriesStats& st, double rel) {
  return st.n > 0 && st.variation() <= rel;
}

// ---------------------------------------------------------------------------
// small dense linear algebra

namespace detail {

// Solve A x = b for 3x3 A by Gaussian elimination with partial pivoting.
inline bool solve3(double A[3][3], const double b[3], double x[3]) {
  double m[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r][c] = A[r][c];
    m[r][3] = b[r];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-300) return false;
    if (piv != col)
      for (int c = 0; c < 4; ++c) std::swap(m[piv][c], m[col][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  for (int r = 0; r < 3; ++r) x[r] = m[r][3] / m[r][r];
  return true;
}

// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix. Eigenvalues land
// in `eval`, matching eigenvectors in the columns of `evec`.
inline void jacobi3(Mat3 a, double eval[3], Mat3& evec) {
  evec = Mat3{};
  evec.m[0][0] = evec.m[1][1] = evec.m[2][2] = 1;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a.m[0][1]) + std::abs(a.m[0][2]) + std::abs(a.m[1][2]);
    if (off < 1e-15 * (1 + std::abs(a.m[0][0]) + std::abs(a.m[1][1]) + std::abs(a.m[2][2])))
      break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (a.m[p][q] == 0) continue;
        const double phi = 0.5 * std::atan2(2 * a.m[p][q], a.m[q][q] - a.m[p][p]);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < 3; ++k) {
          const double akp = a.m[k][p], akq = a.m[k][q];
          a.m[k][p] = c * akp - s * akq;
          a.m[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a.m[p][k], aqk = a.m[q][k];
          a.m[p][k] = c * apk - s * aqk;
          a.m[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = evec.m[k][p], vkq = evec.m[k][q];
          evec.m[k][p] = c * vkp - s * vkq;
          evec.m[k][q] = s * vkp + c * vkq;
        }
      }
  }
  for (int k = 0; k < 3; ++k) eval[k] = a.m[k][k];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// geometric fits

struct PlaneFit {
  Vec3 normal{0, 0, 1};
  double offset = 0;        // <normal, p> = offset on the plane
  double max_residual = kInf;
};

inline PlaneFit fit_plane(const std::vector<Vec3>& pts) {
  PlaneFit out;
  if (pts.size() < 3) return out;
  Vec3 centroid{};
  for (const Vec3& p : pts) centroid += p;
  centroid = centroid / static_cast<double>(pts.size());
  Mat3 cov{};
  for (const Vec3& p : pts) {
    const Vec3 q = p - centroid;
    const double qc[3] = {q.x, q.y, q.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov.m[r][c] += qc[r] * qc[c];
  }
  double eval[3];
  Mat3 evec;
  detail::jacobi3(cov, eval, evec);
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (eval[i] < eval[k]) k = i;
  out.normal = normalized({evec.m[0][k], evec.m[1][k], evec.m[2][k]});
  out.offset = dot(out.normal, centroid);
  out.max_residual = 0;
  for (const Vec3& p : pts)
    out.max_residual = std::max(out.max_residual, std::abs(dot(out.normal, p) - out.offset));
  return out;
}

struct CircleFit {
  Vec3 center{};
  Vec3 normal{0, 0, 1};
  double radius = 0;
  double max_residual = kInf;  // max deviation (in-plane radial or off-plane), / radius
};

// Best-fit circle in space: plane fit first, then an algebraic circle fit in
// plane coordinates.
inline CircleFit fit_circle(const std::vector<Vec3>& pts) {
  CircleFit out;
  if (pts.size() < 4) return out;
  const PlaneFit pl = fit_plane(pts);
  out.normal = pl.normal;
  // in-plane orthonormal basis
  Vec3 seed{1, 0, 0};
  if (std::abs(pl.normal.x) > 0.9) seed = {0, 1, 0};
  const Vec3 e1 = normalized(cross(pl.normal, seed));
  const Vec3 e2 = cross(pl.normal, e1);
  Vec3 centroid{};
  for (const Vec3& p : pts) centroid += p;
  centroid = centroid / static_cast<double>(pts.size());
  double Saa = 0, Sab = 0, Sbb = 0, Sa = 0, Sb = 0, Sar = 0, Sbr = 0, Sr = 0;
  for (const Vec3& p : pts) {
    const Vec3 q = p - centroid;
    const double a = dot(q, e1), b = dot(q, e2), r2 = a * a + b * b;
    Saa += a * a;
    Sab += a * b;
    Sbb += b * b;
    Sa += a;
    Sb += b;
    Sar += a * r2;
    Sbr += b * r2;
    Sr += r2;
  }
  const double n = static_cast<double>(pts.size());
  double A[3][3] = {{Saa, Sab, Sa}, {Sab, Sbb, Sb}, {Sa, Sb, n}};
  const double rhs[3] = {-Sar, -Sbr, -Sr};
  double def[3];
  if (!detail::solve3(A, rhs, def)) return out;
  const double ca = -def[0] / 2, cb = -def[1] / 2;
  const double r2 = ca * ca + cb * cb - def[2];
  if (!(r2 > 0)) return out;
  out.radius = std::sqrt(r2);
  out.center = centroid + e1 * ca + e2 * cb;
  out.max_residual = 0;
  for (const Vec3& p : pts) {
    const Vec3 q = p - out.center;
    const double off_plane = std::abs(dot(q, pl.normal));
    const double in_plane = std::hypot(dot(q, e1), dot(q, e2));
    const double dev = std::max(off_plane, std::abs(in_plane - out.radius));
    out.max_residual = std::max(out.max_residual, dev / out.radius);
  }
  return out;
}

// ---------------------------------------------------------------------------
// cumulative integration

// Cumulative integral on a uniform grid with fourth-order end-corrected
// stencils; out[i] = integral from s[0] to s[i].
template <class T>
std::vector<T> integral_curve(const std::vector<double>& s, const std::vector<T>& f) {
  validate_grid(s, 4);
  if (f.size() != s.size()) throw GeometryError("integrand size differs from grid");
  const std::size_t n = s.size();
  std::vector<T> out(n);
  out[0] = T{};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = s[i + 1] - s[i];
    T inc;
    if (i == 0)
      inc = (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * (h / 24);
    else if (i == n - 2)
      inc = (f[n - 4] - f[n - 3] * 5.0 + f[n - 2] * 19.0 + f[n - 1] * 9.0) * (h / 24);
    else
      inc = (f[i] * 13.0 + f[i + 1] * 13.0 - f[i - 1] - f[i + 2]) * (h / 24);
    out[i + 1] = out[i] + inc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// axis recovery

// Fixed direction and angle reconstructed from the frame of a sampled curve,
// assuming the tangent normal V holds a constant angle against some axis.
// With m = sqrt(kg^2 + tg^2) and sigma the slant function, the axis is
//   axis = sign(sigma) sin(theta)/m (tg T + kg U) + cos(theta) V,
//   cot(theta) = |sigma|,
// reported with theta in (0, pi/2]; {-axis, pi - theta} names the same line.
struct AxisEstimate {
  Vec3 axis{0, 0, 1};
  double theta = 0;
  double sigma = 0;           // trimmed mean of the slant function
  double axis_spread = kInf;  // max deviation of per-sample axes from the mean
  double angle_residual = kInf;  // max | <V, axis> - cos(theta) |
};

inline AxisEstimate recover_axis(const std::vector<double>& s, const FrameSeries& f,
                                 const ScalarSeries& q, double eps_deg = 1e-8) {
  if (f.size() != s.size() || q.size() != s.size())
    throw GeometryError("series sizes differ from grid");
  const std::vector<double> sigma = slant_function(s, q, eps_deg);
  const SeriesStats st = interior_stats(sigma);
  if (st.n == 0)
    throw GeometryError("slant function is undefined along this curve (kg^2+tg^2 ~ 0)");
  AxisEstimate out;
  out.sigma = st.mean;
  const double sg = st.mean >= 0 ? 1.0 : -1.0;
  out.theta = std::atan2(1.0, std::abs(st.mean));
  const double sth = std::sin(out.theta), cth = std::cos(out.theta);
  std::vector<Vec3> axes;
  Vec3 sum{};
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i) {
    const double m = std::hypot(q.kg[i], q.tg[i]);
    if (!(m > eps_deg)) continue;
    const Vec3 di = normalized((f.T[i] * q.tg[i] + f.U[i] * q.kg[i]) * (sg * sth / m) +
                               f.V[i] * cth);
    axes.push_back(di);
    sum += di;
  }
  if (axes.empty())
    throw GeometryError("axis reconstruction has no admissible samples");
  out.axis = normalized(sum / static_cast<double>(axes.size()));
  if (cth <= 1e-12) {
    // theta = pi/2: both orientations are equivalent, keep the
    // lexicographically larger representative
    const Vec3& a = out.axis;
    if (std::array<double, 3>{-a.x, -a.y, -a.z} > std::array<double, 3>{a.x, a.y, a.z})
      out.axis = a * -1.0;
  }
  out.axis_spread = 0;
  for (const Vec3& a : axes) {
    const double dev = std::min(distance(a, out.axis), distance(a * -1.0, out.axis));
    out.axis_spread = std::max(out.axis_spread, dev);
  }
  out.angle_residual = 0;
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i)
    out.angle_residual =
        std::max(out.angle_residual, std::abs(dot(f.V[i], out.axis) - cth));
  return out;
}

// ---------------------------------------------------------------------------
// invariants of derived curves

// The running integral of the tangent normal V is a unit-speed space curve
// whose curvature is m = sqrt(kg^2+tg^2) and whose torsion-to-curvature
// ratio reproduces the slant function of the base curve.
struct TangentNormalCurveCheck {
  double kappa_residual = kInf;  // max relative |kappa - m|
  double ratio_residual = kInf;  // max |tau/kappa - sigma|
  double ratio_variation = kInf;
  bool helix = false;  // tau/kappa nearly constant
};

inline TangentNormalCurveCheck check_tangent_normal_curve(const std::vector<double>& s,
                                                          const FrameSeries& f,
                                                          const ScalarSeries& q,
                                                          const AnalysisTolerances& tol = {}) {
  const std::vector<Vec3> beta = integral_curve(s, f.V);
  const FrenetSeries fr = frenet_apparatus(s, beta);
  const std::vector<double> sigma = slant_function(s, q, tol.eps_deg);
  TangentNormalCurveCheck out;
  out.kappa_residual = 0;
  out.ratio_residual = 0;
  std::vector<double> ratio(s.size(), kNaN);
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i) {
    const double m = std::hypot(q.kg[i], q.tg[i]);
    if (std::isfinite(fr.kappa[i]))
      out.kappa_residual =
          std::max(out.kappa_residual, std::abs(fr.kappa[i] - m) / std::max(1.0, m));
    if (fr.ok[i] && fr.kappa[i] > tol.eps_deg) {
      ratio[i] = fr.tau[i] / fr.kappa[i];
      if (std::isfinite(sigma[i]))
        out.ratio_residual = std::max(out.ratio_residual, std::abs(ratio[i] - sigma[i]));
    }
  }
  const SeriesStats rst = interior_stats(ratio);
  out.ratio_variation = rst.variation();
  out.helix = nearly_constant(rst, tol.constancy_rel);
  return out;
}

// The running integral of the rectifying field tg T + kg U has curvature
// |sigma| and torsion +1 whenever the slant function sigma is constant.
struct RectifyingCurveCheck {
  double kappa_mean = kNaN;
  double tau_mean = kNaN;
  double kappa_residual = kInf;  // |kappa_mean - |sigma||
  double tau_residual = kInf;    // max |tau - 1|
  double kappa_variation = kInf;
};

inline RectifyingCurveCheck check_rectifying_curve(const std::vector<double>& s,
                                                   const FrameSeries& f, const ScalarSeries& q,
                                                   double sigma,
                                                   const AnalysisTolerances& tol = {}) {
  std::vector<Vec3> field(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    field[i] = f.T[i] * q.tg[i] + f.U[i] * q.kg[i];
  const std::vector<Vec3> beta = integral_curve(s, field);
  const FrenetSeries fr = frenet_apparatus(s, beta);
  std::vector<double> kap(s.size(), kNaN), tau(s.size(), kNaN);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(fr.kappa[i])) continue;
    kap[i] = fr.kappa[i];
    if (fr.ok[i]) tau[i] = fr.tau[i];
  }
  RectifyingCurveCheck out;
  const SeriesStats kst = interior_stats(kap);
  const SeriesStats tst = interior_stats(tau);
  if (kst.n == 0 || tst.n == 0) return out;
  out.kappa_mean = kst.mean;
  out.tau_mean = tst.mean;
  out.kappa_variation = kst.variation();
  out.kappa_residual = std::abs(kst.mean - std::abs(sigma));
  out.tau_residual = 0;
  (void)tol;
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i)
    if (std::isfinite(tau[i])) out.tau_residual = std::max(out.tau_residual, std::abs(tau[i] - 1));
  return out;
}

// ---------------------------------------------------------------------------
// the equivalence bundle

struct ConditionReport {
  bool pass = false;
  double residual = kInf;
};

// Six numerically independent renderings of "V holds a constant angle with a
// fixed axis", evaluated on one sampled curve. On a curve of this class all
// six pass; on a generic curve they fail together.
struct SlantEquivalence {
  ConditionReport slant_constant;     // slant function has ~zero variation
  ConditionReport fixed_axis_angle;   // <V, recovered axis> ~ cos(theta) throughout
  ConditionReport image_circle;       // V traces a circle on the unit sphere
  ConditionReport image_turning;      // geodesic curvature of that image ~ sigma, constant
  ConditionReport integral_helix;     // integral curve of V has constant tau/kappa ~ sigma
  ConditionReport angle_form_match;   // polar-angle form of sigma agrees pointwise
  AxisEstimate axis;

  bool all() const {
    return slant_constant.pass && fixed_axis_angle.pass && image_circle.pass &&
           image_turning.pass && integral_helix.pass && angle_form_match.pass;
  }
};

inline SlantEquivalence check_slant_equivalence(const std::vector<double>& s,
                                                const FrameSeries& f, const ScalarSeries& q,
                                                const AnalysisTolerances& tol = {}) {
  if (s.size() < 2 * kEndTrim + 8)
    throw GeometryError("curve has too few samples for the equivalence checks");
  SlantEquivalence out;
  const std::vector<double> sigma = slant_function(s, q, tol.eps_deg);
  const SeriesStats sst = interior_stats(sigma);

  out.slant_constant.residual = sst.variation();
  out.slant_constant.pass = nearly_constant(sst, tol.constancy_rel);

  out.axis = recover_axis(s, f, q, tol.eps_deg);
  out.fixed_axis_angle.residual = out.axis.angle_residual;
  out.fixed_axis_angle.pass = out.axis.angle_residual <= tol.match_rel;

  std::vector<Vec3> image(f.V.begin() + static_cast<std::ptrdiff_t>(kEndTrim),
                          f.V.end() - static_cast<std::ptrdiff_t>(kEndTrim));
  const CircleFit cf = fit_circle(image);
  out.image_circle.residual = cf.max_residual;
  out.image_circle.pass = cf.max_residual <= tol.match_rel;

  const std::vector<double> turning = sphere_geodesic_curvature(s, f.V, tol.eps_deg);
  const SeriesStats tst = interior_stats(turning);
  const double turn_match =
      tst.n ? std::abs(tst.mean - sst.mean) / std::max(1.0, std::abs(sst.mean)) : kInf;
  out.image_turning.residual = std::max(tst.variation(), turn_match);
  out.image_turning.pass =
      nearly_constant(tst, tol.constancy_rel) && turn_match <= tol.match_rel;

  const TangentNormalCurveCheck tn = check_tangent_normal_curve(s, f, q, tol);
  out.integral_helix.residual = std::max(tn.ratio_variation, tn.ratio_residual);
  out.integral_helix.pass = tn.helix && tn.ratio_residual <= tol.match_rel;

  const std::vector<double> alt = slant_function_angle_form(s, q, tol.eps_deg);
  double diff = 0;
  std::size_t nd = 0;
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i)
    if (std::isfinite(sigma[i]) && std::isfinite(alt[i])) {
      diff = std::max(diff, std::abs(sigma[i] - alt[i]));
      ++nd;
    }
  out.angle_form_match.residual = nd ? diff : kInf;
  out.angle_form_match.pass = nd > 0 && diff <= tol.match_rel;
  return out;
}

// ---------------------------------------------------------------------------
// constant-angle mates

// A curve with <T, axis> constant also keeps the unit field -kn V + kg U at
// a constant angle with the same axis; a curve with <U, axis> constant does
// the same with the unit field tg T - kn V. `base_drift` and `mate_drift`
// are the spreads of the two products along the curve.
struct FieldAngleCheck {
  double base_value = kNaN, base_drift = kInf;
  double mate_value = kNaN, mate_drift = kInf;
  bool defined = false;
};

namespace detail {

inline FieldAngleCheck field_angle_check(const std::vector<double>& s,
                                         const std::vector<Vec3>& base,
                                         const std::vector<Vec3>& mate, const Vec3& axis,
                                         double eps_deg) {
  FieldAngleCheck out;
  std::vector<double> bv(s.size(), kNaN), mv(s.size(), kNaN);
  for (std::size_t i = 0; i < s.size(); ++i) {
    bv[i] = dot(base[i], axis);
    const double mn = norm(mate[i]);
    if (mn > eps_deg) mv[i] = dot(mate[i], axis) / mn;
  }
  const SeriesStats bst = interior_stats(bv);
  const SeriesStats mst = interior_stats(mv);
  if (bst.n == 0 || mst.n == 0) return out;
  out.defined = true;
  out.base_value = bst.mean;
  out.base_drift = bst.spread();
  out.mate_value = mst.mean;
  out.mate_drift = mst.spread();
  return out;
}

}  // namespace detail

inline FieldAngleCheck check_helix_mate(const std::vector<double>& s, const FrameSeries& f,
                                        const ScalarSeries& q, const Vec3& axis,
                                        double eps_deg = 1e-8) {
  std::vector<Vec3> mate(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    mate[i] = f.V[i] * -q.kn[i] + f.U[i] * q.kg[i];
  return detail::field_angle_check(s, f.T, mate, normalized(axis), eps_deg);
}

inline FieldAngleCheck check_isophote_mate(const std::vector<double>& s, const FrameSeries& f,
                                           const ScalarSeries& q, const Vec3& axis,
                                           double eps_deg = 1e-8) {
  std::vector<Vec3> mate(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    mate[i] = f.T[i] * q.tg[i] - f.V[i] * q.kn[i];
  return detail::field_angle_check(s, f.U, mate, normalized(axis), eps_deg);
}

// ---------------------------------------------------------------------------
// classification

struct ClassFlag {
  bool holds = false;
  double value = kNaN;     // representative value of the tested quantity
  double residual = kInf;  // the measured deviation
  bool defined = false;
};

// What a sampled surface curve is, judged numerically: the three vanishing
// conditions on (kg, kn, tg) and the three constant-angle families.
struct CurveClassification {
  ClassFlag geodesic;   // kg ~ 0
  ClassFlag asymptotic; // kn ~ 0
  ClassFlag principal;  // tg ~ 0 (line of curvature)
  ClassFlag helix;      // turning of the T-image constant
  ClassFlag slant;      // slant function constant
  ClassFlag isophote;   // turning of the U-image constant
};

namespace detail {

inline ClassFlag zero_flag(const std::vector<double>& x, double scale, double zero_abs) {
  ClassFlag out;
  const SeriesStats st = interior_stats(x);
  if (st.n == 0) return out;
  out.defined = true;
  out.value = st.mean;
  out.residual = st.max_abs;
  out.holds = st.max_abs <= zero_abs * (1 + scale);
  return out;
}

inline ClassFlag constant_flag(const std::vector<double>& x, double rel, std::size_t n_min) {
  ClassFlag out;
  const SeriesStats st = interior_stats(x);
  if (st.n < n_min) return out;
  out.defined = true;
  out.value = st.mean;
  out.residual = st.variation();
  out.holds = nearly_constant(st, rel);
  return out;
}

}  // namespace detail

inline CurveClassification classify(const std::vector<double>& s, const FrameSeries& f,
                                    const ScalarSeries& q, const AnalysisTolerances& tol = {}) {
  CurveClassification out;
  double scale = 0;
  for (std::size_t i = kEndTrim; i + kEndTrim < s.size(); ++i)
    scale = std::max({scale, std::abs(q.kg[i]), std::abs(q.kn[i]), std::abs(q.tg[i])});
  out.geodesic = detail::zero_flag(q.kg, scale, tol.zero_abs);
  out.asymptotic = detail::zero_flag(q.kn, scale, tol.zero_abs);
  out.principal = detail::zero_flag(q.tg, scale, tol.zero_abs);
  const std::size_t interior = s.size() > 2 * kEndTrim ? s.size() - 2 * kEndTrim : 0;
  const std::size_t n_min = std::max<std::size_t>(5, interior / 2);
  out.helix =
      detail::constant_flag(sphere_geodesic_curvature(s, f.T, tol.eps_deg), tol.constancy_rel,
                            n_min);
  out.slant = detail::constant_flag(slant_function(s, q, tol.eps_deg), tol.constancy_rel, n_min);
  out.isophote =
      detail::constant_flag(sphere_geodesic_curvature(s, f.U, tol.eps_deg), tol.constancy_rel,
                            n_min);
  return out;
}

// Convenience: frames + scalars + slant in one pass from raw samples and
// surface normals (finite differences throughout).
struct CurveAnalysis {
  FrameSeries frames;
  ScalarSeries scalars;
  std::vector<double> sigma;
};

inline CurveAnalysis analyze_curve(const CurveSamples& c, const std::vector<Vec3>& normals,
                                   double eps_deg = 1e-8) {
  CurveAnalysis out;
  out.frames = frames_from_samples(c, normals);
  out.scalars = scalars_from_frames(c.s, out.frames);
  out.sigma = slant_function(c.s, out.scalars, eps_deg);
  return out;
}

}  // namespace darboux
