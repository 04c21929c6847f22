#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "darboux/error.hpp"
#include "darboux/expr.hpp"
#include "darboux/vec.hpp"

namespace darboux {

// Coefficients of the first fundamental form at a point.
struct FirstForm {
  double E = 0, F = 0, G = 0;

  double det() const { return E * G - F * F; }
  // Squared length of a parameter-plane vector in the induced metric.
  double norm2(const Vec2& w) const { return E * w.u * w.u + 2 * F * w.u * w.v + G * w.v * w.v; }
  double norm(const Vec2& w) const { return std::sqrt(norm2(w)); }
};

// Coefficients of the second fundamental form (w.r.t. the unit normal).
struct SecondForm {
  double L = 0, M = 0, N = 0;
};

// Rectangular parameter domain; infinite bounds mean "unbounded".
struct Domain2 {
  double u_min = -kInf, u_max = kInf;
  double v_min = -kInf, v_max = kInf;

  bool contains(double u, double v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }
};

// Axis-aligned box for implicit traces; infinite bounds mean "unbounded".
struct Box3 {
  double x_min = -kInf, x_max = kInf;
  double y_min = -kInf, y_max = kInf;
  double z_min = -kInf, z_max = kInf;

  bool contains(const Vec3& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max && p.z >= z_min &&
           p.z <= z_max;
  }
};

// Surface given by a map (u,v) -> R^3 with expression components.
class ParametricSurface {
 public:
  // Position and all partials through second order at one parameter point.
  struct Patch {
    Vec3 p, Xu, Xv, Xuu, Xuv, Xvv;
  };

  ParametricSurface(Expression x, Expression y, Expression z, Domain2 domain = {})
      : x_(std::move(x)), y_(std::move(y)), z_(std::move(z)), domain_(domain) {
    if (x_.variables().size() != 2 || y_.variables() != x_.variables() ||
        z_.variables() != x_.variables())
      throw GeometryError("surface components must share one (u,v) variable pair");
  }

  const Domain2& domain() const { return domain_; }
  void set_domain(const Domain2& d) { domain_ = d; }

  bool in_domain(double u, double v) const { return domain_.contains(u, v); }

  Patch patch(double u, double v) const {
    if (!in_domain(u, v))
      throw GeometryError("parameter point (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") is outside the surface domain");
    return patch_unchecked(u, v);
  }

  // No domain test; integrator stages may poke slightly outside the box.
  Patch patch_unchecked(double u, double v) const {
    const double pt[2] = {u, v};
    const Jet2 jx = x_.jet2(pt), jy = y_.jet2(pt), jz = z_.jet2(pt);
    Patch out;
    out.p = {jx.value(), jy.value(), jz.value()};
    out.Xu = {jx.grad(0), jy.grad(0), jz.grad(0)};
    out.Xv = {jx.grad(1), jy.grad(1), jz.grad(1)};
    out.Xuu = {jx.hess(0, 0), jy.hess(0, 0), jz.hess(0, 0)};
    out.Xuv = {jx.hess(0, 1), jy.hess(0, 1), jz.hess(0, 1)};
    out.Xvv = {jx.hess(1, 1), jy.hess(1, 1), jz.hess(1, 1)};
    return out;
  }

  Vec3 position(double u, double v) const {
    const double pt[2] = {u, v};
    return {x_.value(pt), y_.value(pt), z_.value(pt)};
  }

  static FirstForm first_form(const Patch& q) {
    return {dot(q.Xu, q.Xu), dot(q.Xu, q.Xv), dot(q.Xv, q.Xv)};
  }

  // Unit normal Xu x Xv / |Xu x Xv|; fails where the parametrization is singular.
  static Vec3 normal(const Patch& q, double eps_reg = 1e-10) {
    const Vec3 c = cross(q.Xu, q.Xv);
    const double w = norm(c);
    if (!(w > eps_reg))
      throw GeometryError("surface parametrization is singular here (|Xu x Xv| ~ 0)");
    return c / w;
  }

  static SecondForm second_form(const Patch& q, const Vec3& unit_normal) {
    return {dot(q.Xuu, unit_normal), dot(q.Xuv, unit_normal), dot(q.Xvv, unit_normal)};
  }

  const Expression& x() const { return x_; }
  const Expression& y() const { return y_; }
  const Expression& z() const { return z_; }

 private:
  Expression x_, y_, z_;
  Domain2 domain_;
};

// Surface given as the zero set of f(x,y,z).
class ImplicitSurface {
 public:
  struct Sample {
    double f = 0;
    Vec3 grad;
    Mat3 hess;
  };

  explicit ImplicitSurface(Expression f, Box3 box = {}) : f_(std::move(f)), box_(box) {
    if (f_.variables().size() != 3)
      throw GeometryError("an implicit surface needs exactly three variables (x,y,z)");
  }

  const Box3& box() const { return box_; }
  void set_box(const Box3& b) { box_ = b; }

  Sample sample(const Vec3& p) const {
    const double pt[3] = {p.x, p.y, p.z};
    const Jet2 j = f_.jet2(pt);
    Sample out;
    out.f = j.value();
    out.grad = {j.grad(0), j.grad(1), j.grad(2)};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        out.hess.m[a][b] = j.hess(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return out;
  }

  double value(const Vec3& p) const {
    const double pt[3] = {p.x, p.y, p.z};
    return f_.value(pt);
  }

  // Outward field direction: +grad f / |grad f|.
  static Vec3 normal(const Sample& s, double eps_reg = 1e-10) {
    const double g = norm(s.grad);
    if (!(g > eps_reg)) throw GeometryError("level set is singular here (|grad f| ~ 0)");
    return s.grad / g;
  }

  // Newton steps along grad f back to the level set. Returns the moved point;
  // throws if |f| will not come down to tol.
  Vec3 project(Vec3 p, double tol = 1e-12, int max_iter = 20) const {
    for (int i = 0; i < max_iter; ++i) {
      const double pt[3] = {p.x, p.y, p.z};
      const Jet2 j = f_.jet2(pt);
      if (std::abs(j.value()) <= tol) return p;
      const Vec3 g = {j.grad(0), j.grad(1), j.grad(2)};
      const double g2 = norm2(g);
      if (!(g2 > 0)) throw GeometryError("cannot project to the level set: gradient vanished");
      p -= g * (j.value() / g2);
    }
    const double pt[3] = {p.x, p.y, p.z};
    if (std::abs(f_.value(pt)) <= tol) return p;
    throw GeometryError("projection onto the level set did not converge");
  }

  const Expression& f() const { return f_; }

 private:
  Expression f_;
  Box3 box_;
};

using Surface = std::variant<ParametricSurface, ImplicitSurface>;

// ---------------------------------------------------------------------------
// Built-in surfaces

struct PresetInfo {
  std::string name;
  std::string kind;  // "parametric" | "implicit"
  std::string summary;
};

inline const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> table = {
      {"plane", "parametric", "flat sheet (u, v, 0)"},
      {"sphere", "parametric", "unit sphere, u = longitude, v = latitude in (-pi/2, pi/2)"},
      {"cylinder", "parametric", "unit circular cylinder (cos u, sin u, v)"},
      {"paraboloid", "parametric", "rotational paraboloid (u cos v, u sin v, u^2), u > 0"},
      {"torus", "parametric", "torus of radii 2 and 1, u = tube angle, v = axis angle"},
      {"sphere_implicit", "implicit", "unit sphere as the zero set of x^2+y^2+z^2-1"},
      {"spindle", "implicit", "waisted rotational quartic (x^2+y^2)(z^2+1/4) = 1/4"},
  };
  return table;
}

inline Surface make_preset(const std::string& name) {
  auto param = [](const char* x, const char* y, const char* z, Domain2 dom = {}) -> Surface {
    const std::vector<std::string> uv = {"u", "v"};
    return ParametricSurface(Expression::parse(x, uv), Expression::parse(y, uv),
                             Expression::parse(z, uv), dom);
  };
  if (name == "plane") return param("u", "v", "0");
  if (name == "sphere") {
    Domain2 dom;
    dom.v_min = -kPi / 2;
    dom.v_max = kPi / 2;
    return param("cos(u)*cos(v)", "sin(u)*cos(v)", "sin(v)", dom);
  }
  if (name == "cylinder") return param("cos(u)", "sin(u)", "v");
  if (name == "paraboloid") {
    Domain2 dom;
    dom.u_min = 0;
    return param("u*cos(v)", "u*sin(v)", "u^2", dom);
  }
  if (name == "torus")
    return param("(2+cos(u))*cos(v)", "(2+cos(u))*sin(v)", "sin(u)");
  const std::vector<std::string> xyz = {"x", "y", "z"};
  if (name == "sphere_implicit")
    return ImplicitSurface(Expression::parse("x^2+y^2+z^2-1", xyz));
  if (name == "spindle")
    return ImplicitSurface(
        Expression::parse("(x^2+y^2)*z^2+(x^2+y^2)/4-1/4", xyz));
  throw GeometryError("unknown surface preset '" + name + "'");
}

}  // namespace darboux
