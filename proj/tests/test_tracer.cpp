#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "darboux/tracer.hpp"

using namespace darboux;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const std::vector<double>& x) {
  double m = 0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

TraceConfig slant_cfg(Vec3 axis, double theta, double s_max = 1.0, Branch b = Branch::Plus) {
  TraceConfig cfg;
  cfg.family = Family::Slant;
  cfg.axis = axis;
  cfg.theta = theta;
  cfg.s_max = s_max;
  cfg.branch = b;
  return cfg;
}

}  // namespace

TEST_CASE("cylinder slant directions solve angle and speed exactly", "[tracer]") {
  // at (0,0) with a vertical axis the direction system reduces to
  // u' = cos(theta), v' = +-sin(theta)
  const Surface s = make_preset("cylinder");
  const auto& cy = std::get<ParametricSurface>(s);
  const double th = 0.9;
  const auto c = direction_candidates(cy, {0.0, 0.0}, slant_cfg({0, 0, 1}, th));
  REQUIRE(c.size() == 2);
  CHECK_THAT(c[0].u, WithinAbs(std::cos(th), 1e-14));
  CHECK_THAT(c[1].u, WithinAbs(std::cos(th), 1e-14));
  CHECK_THAT(std::abs(c[0].v), WithinAbs(std::sin(th), 1e-14));
  CHECK_THAT(c[0].v + c[1].v, WithinAbs(0.0, 1e-15));
}

TEST_CASE("cylinder slant trace matches the closed-form pitched circle", "[tracer]") {
  const Surface s = make_preset("cylinder");
  TraceConfig cfg = slant_cfg({0, 0, 1}, kPi / 4, 2.0);
  const TraceResult r = trace(s, StartPoint{Vec2{0.0, 0.0}}, cfg);
  REQUIRE(r.termination == Termination::Completed);
  REQUIRE(r.curve.size() == 2001);
  CHECK(r.s_reached == 2.0);

  const double a = std::cos(kPi / 4);  // du/ds; the plus branch rises
  double pos_err = 0;
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    const double t = a * r.curve.s[i];
    const Vec3 exact{std::cos(t), std::sin(t), a * r.curve.s[i]};
    pos_err = std::max(pos_err, norm(r.curve.p[i] - exact));
  }
  CHECK(pos_err < 1e-12);
  CHECK(max_abs(r.angle_err) < 1e-14);
  CHECK(max_abs(r.speed_err) < 1e-14);
  // frames are integrator states: orthonormal to machine precision
  for (std::size_t i = 0; i < r.curve.size(); i += 400) {
    CHECK_THAT(dot(r.frames.T[i], r.frames.U[i]), WithinAbs(0.0, 1e-14));
    CHECK_THAT(norm(r.frames.V[i]), WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("sphere latitude is a tangency locus with one slant direction", "[tracer]") {
  // along z = 0.6 both root discriminants vanish identically; the double
  // root must collapse to the single latitude direction, not split under
  // rounding noise.
  const Surface s = make_preset("sphere");
  const auto& sp = std::get<ParametricSurface>(s);
  const Vec2 start{0.0, std::asin(0.6)};
  TraceConfig cfg = slant_cfg({0, 0, 1}, std::acos(0.8), 2.0);

  const auto c = direction_candidates(sp, start, cfg);
  REQUIRE(c.size() == 1);
  CHECK_THAT(c[0].u, WithinAbs(1.25, 1e-12));
  CHECK_THAT(c[0].v, WithinAbs(0.0, 1e-12));

  const TraceResult r = trace(s, StartPoint{start}, cfg);
  REQUIRE(r.termination == Termination::Completed);
  double v_drift = 0;
  for (const Vec2& uv : r.curve.uv) v_drift = std::max(v_drift, std::abs(uv.v - start.v));
  CHECK(v_drift < 1e-12);
  CHECK(max_abs(r.angle_err) < 1e-12);
}

TEST_CASE("paraboloid slant directions at a worked point", "[tracer]") {
  // at (u,v) = (1,0) with axis z and theta = pi/3: E=5, F=0, G=1, W^2=5,
  // projections (2, 0); the constraint pins v' = -sqrt(5)/4 and the speed
  // condition leaves u' = +-sqrt(55)/20.
  const Surface s = make_preset("paraboloid");
  const auto& pb = std::get<ParametricSurface>(s);
  const auto c = direction_candidates(pb, {1.0, 0.0}, slant_cfg({0, 0, 1}, kPi / 3));
  REQUIRE(c.size() == 2);
  const double up = std::sqrt(55.0) / 20.0, vp = -std::sqrt(5.0) / 4.0;
  CHECK_THAT(std::abs(c[0].u), WithinAbs(up, 1e-14));
  CHECK_THAT(std::abs(c[1].u), WithinAbs(up, 1e-14));
  CHECK_THAT(c[0].u + c[1].u, WithinAbs(0.0, 1e-15));
  CHECK_THAT(c[0].v, WithinAbs(vp, 1e-14));
  CHECK_THAT(c[1].v, WithinAbs(vp, 1e-14));
}

TEST_CASE("paraboloid trace stops where the direction system loses real roots", "[tracer]") {
  // inward, the slant condition with theta = pi/3 stays solvable only for
  // u > 1/(2 sqrt(3)) ~ 0.28868
  const Surface s = make_preset("paraboloid");
  TraceConfig cfg = slant_cfg({0, 0, 1}, kPi / 3, 2.0, Branch::Minus);
  const TraceResult r = trace(s, StartPoint{Vec2{1.0, 0.0}}, cfg);
  CHECK(r.termination == Termination::DiscriminantNegative);
  CHECK(r.s_reached > 1.0);
  CHECK(r.s_reached < 2.0);
  CHECK_THAT(r.curve.uv.back().u, WithinAbs(1.0 / (2.0 * std::sqrt(3.0)), 1e-5));

  cfg.branch = Branch::Plus;  // outward stays admissible
  const TraceResult r2 = trace(s, StartPoint{Vec2{1.0, 0.0}}, cfg);
  CHECK(r2.termination == Termination::Completed);
  CHECK(r2.curve.uv.back().u > 1.5);
}

TEST_CASE("inadmissible start reports the failed condition", "[tracer]") {
  const Surface s = make_preset("paraboloid");
  const auto& pb = std::get<ParametricSurface>(s);
  try {
    direction_candidates(pb, {0.2, 0.0}, slant_cfg({0, 0, 1}, kPi / 3));
    FAIL("expected a trace error");
  } catch (const TraceError& err) {
    CHECK(err.code == TraceError::Code::DiscriminantNegative);
  }
  try {
    trace(s, StartPoint{Vec2{0.2, 0.0}}, slant_cfg({0, 0, 1}, kPi / 3));
    FAIL("expected a trace error");
  } catch (const TraceError& err) {
    CHECK(std::string(err.what()).find("at initial point") != std::string::npos);
  }
}

TEST_CASE("axis along the normal degenerates the slant system", "[tracer]") {
  const Surface s = make_preset("plane");
  const auto& pl = std::get<ParametricSurface>(s);
  // right angle: every unit direction works, the pair collapses to a
  // canonical +-(1/sqrt(E), 0)
  const auto c = direction_candidates(pl, {0.0, 0.0}, slant_cfg({0, 0, 1}, kPi / 2));
  REQUIRE(c.size() == 2);
  CHECK_THAT(c[0].u + c[1].u, WithinAbs(0.0, 1e-15));
  CHECK_THAT(std::abs(c[0].u), WithinAbs(1.0, 1e-14));
  CHECK_THAT(c[0].v, WithinAbs(0.0, 1e-15));
  // any other angle is unreachable
  try {
    direction_candidates(pl, {0.0, 0.0}, slant_cfg({0, 0, 1}, kPi / 3));
    FAIL("expected a trace error");
  } catch (const TraceError& err) {
    CHECK(err.code == TraceError::Code::Degenerate);
  }
}

TEST_CASE("branches bracket the start and a domain wall stops the trace", "[tracer]") {
  ParametricSurface pl(Expression::parse("u", {"u", "v"}),
                       Expression::parse("v", {"u", "v"}),
                       Expression::parse("0*u", {"u", "v"}));
  Domain2 d;
  d.u_min = -0.25;
  d.u_max = 0.25;
  d.v_min = -0.25;
  d.v_max = 0.25;
  pl.set_domain(d);
  // in-plane axis: the slant curve on a plane is a straight line, which
  // must hit the wall and stop with a clean termination reason
  TraceConfig cfg = slant_cfg({0, 1, 0}, kPi / 3, 5.0);
  const TraceResult r = trace(Surface{pl}, StartPoint{Vec2{0.0, 0.0}}, cfg);
  CHECK(r.termination == Termination::DomainExit);
  CHECK(r.s_reached < 0.5);
  // straightness: chord length equals arc length
  const double chord = norm(r.curve.p.back() - r.curve.p.front());
  CHECK_THAT(chord, WithinAbs(r.s_reached, 1e-12));

  cfg.branch = Branch::Minus;
  const TraceResult r2 = trace(Surface{pl}, StartPoint{Vec2{0.0, 0.0}}, cfg);
  // the two branches leave in different directions
  CHECK(norm(r2.curve.p.back() - r.curve.p.back()) > 0.1);
}

TEST_CASE("cylinder helix branches and closed form", "[tracer]") {
  const Surface s = make_preset("cylinder");
  const auto& cy = std::get<ParametricSurface>(s);
  const double th = kPi / 3;
  TraceConfig cfg;
  cfg.family = Family::Helix;
  cfg.axis = {0, 0, 1};
  cfg.theta = th;
  cfg.s_max = 1.5;

  const auto c = direction_candidates(cy, {0.5, 0.25}, cfg);
  REQUIRE(c.size() == 2);
  CHECK_THAT(std::abs(c[0].u), WithinAbs(std::sin(th), 1e-14));
  CHECK_THAT(c[0].v, WithinAbs(std::cos(th), 1e-14));
  CHECK_THAT(c[1].v, WithinAbs(std::cos(th), 1e-14));

  for (Branch b : {Branch::Plus, Branch::Minus}) {
    cfg.branch = b;
    const TraceResult r = trace(s, StartPoint{Vec2{0.5, 0.25}}, cfg);
    REQUIRE(r.termination == Termination::Completed);
    // u moves linearly at rate +-sin(theta), v at rate cos(theta)
    const double du = (r.curve.uv[1].u - r.curve.uv[0].u) > 0 ? std::sin(th) : -std::sin(th);
    double err = 0;
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
      err = std::max(err, std::abs(r.curve.uv[i].u - (0.5 + du * r.curve.s[i])));
      err = std::max(err, std::abs(r.curve.uv[i].v - (0.25 + std::cos(th) * r.curve.s[i])));
    }
    CHECK(err < 1e-12);
    CHECK(max_abs(r.angle_err) < 1e-14);
  }
}

TEST_CASE("implicit sphere slant starts tangent to the meridian plane", "[tracer]") {
  const Surface s = make_preset("sphere_implicit");
  const auto& f = std::get<ImplicitSurface>(s);
  const double th = kPi / 3;
  TraceConfig cfg = slant_cfg({0, 0, 1}, th, 1.0);
  const auto c = direction_candidates(f, {1.0, 0.0, 0.0}, cfg);
  REQUIRE(c.size() == 2);
  for (const Vec3& w : c) {
    CHECK_THAT(w.x, WithinAbs(0.0, 1e-13));
    CHECK_THAT(std::abs(w.y), WithinAbs(std::cos(th), 1e-13));
    CHECK_THAT(std::abs(w.z), WithinAbs(std::sin(th), 1e-13));
  }

  const TraceResult r = trace(s, StartPoint{Vec3{1.0, 0.0, 0.0}}, cfg);
  REQUIRE(r.termination == Termination::Completed);
  CHECK(max_abs(r.surface_err) < 1e-12);  // Newton projection holds the level set
  CHECK(max_abs(r.angle_err) < 1e-10);
  CHECK(max_abs(r.speed_err) < 1e-12);
}

TEST_CASE("implicit start point must sit on the level set", "[tracer]") {
  const Surface s = make_preset("sphere_implicit");
  TraceConfig cfg;
  cfg.family = Family::Helix;
  cfg.axis = {0, 0, 1};
  cfg.theta = kPi / 4;
  try {
    trace(s, StartPoint{Vec3{1.1, 0.0, 0.0}}, cfg);
    FAIL("expected a trace error");
  } catch (const TraceError& err) {
    CHECK(err.code == TraceError::Code::NotOnLevelSet);
  }
}

TEST_CASE("bounding box stops an implicit trace", "[tracer]") {
  const Surface s0 = make_preset("sphere_implicit");
  ImplicitSurface f = std::get<ImplicitSurface>(s0);
  Box3 box = f.box();
  box.z_max = 0.5;
  f.set_box(box);
  TraceConfig cfg;
  cfg.family = Family::Helix;
  cfg.axis = {0, 0, 1};
  cfg.theta = kPi / 4;
  cfg.s_max = 5.0;
  const TraceResult r = trace(Surface{f}, StartPoint{Vec3{1.0, 0.0, 0.0}}, cfg);
  CHECK(r.termination == Termination::DomainExit);
  // a helix against a vertical axis climbs at rate cos(theta)
  CHECK_THAT(r.s_reached, WithinAbs(0.5 / std::cos(kPi / 4), 2e-3));
  CHECK(r.curve.p.back().z <= 0.5);
}

TEST_CASE("latitude isophote paces by the spherical illumination field", "[tracer]") {
  // on the unit sphere with a vertical axis the illumination level through
  // v0 = asin(0.6) is the latitude itself; unit speed forces
  // |du/ds| = 1/cos(v0) = 1.25 with v frozen.
  const Surface s = make_preset("sphere");
  const double v0 = std::asin(0.6);
  TraceConfig cfg;
  cfg.family = Family::Isophote;
  cfg.axis = {0, 0, 1};
  cfg.theta = std::acos(0.6);
  cfg.s_max = 1.0;
  const TraceResult r = trace(s, StartPoint{Vec2{0.0, v0}}, cfg);
  REQUIRE(r.termination == Termination::Completed);
  REQUIRE(r.curve.size() == 1001);
  double v_drift = 0, pace_err = 0;
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    v_drift = std::max(v_drift, std::abs(r.curve.uv[i].v - v0));
    pace_err = std::max(pace_err, std::abs(r.curve.uv[i].u - (-1.25 * r.curve.s[i])));
  }
  CHECK(v_drift < 1e-12);
  CHECK(pace_err < 1e-9);
  CHECK(max_abs(r.angle_err) < 1e-12);  // <U, axis> stays cos(theta)

  cfg.branch = Branch::Minus;
  const TraceResult r2 = trace(s, StartPoint{Vec2{0.0, v0}}, cfg);
  CHECK(r2.curve.uv.back().u > 1.0);  // the other orientation
}

TEST_CASE("isophotes are rejected off the parametric path", "[tracer]") {
  const Surface s = make_preset("sphere_implicit");
  TraceConfig cfg;
  cfg.family = Family::Isophote;
  cfg.axis = {0, 0, 1};
  cfg.theta = kPi / 4;
  CHECK_THROWS_AS(trace(s, StartPoint{Vec3{1.0, 0.0, 0.0}}, cfg), GeometryError);
  const auto& f = std::get<ImplicitSurface>(s);
  CHECK_THROWS_AS(direction_candidates(f, {1.0, 0.0, 0.0}, cfg), GeometryError);
}

TEST_CASE("torus helix runs into its closed-form admissibility boundary", "[tracer]") {
  // with a vertical axis, <X_u, z> = cos(u) forces u' = cos(theta)/cos(u),
  // so sin(u) grows linearly in s and the direction system loses real roots
  // exactly at u = theta; from u0 = 0.3 with theta = pi/3 that happens at
  // s = 2 (sin(pi/3) - sin(0.3)).
  const Surface s = make_preset("torus");
  TraceConfig cfg;
  cfg.family = Family::Helix;
  cfg.axis = {0, 0, 1};
  cfg.theta = kPi / 3;
  cfg.s_max = 3.0;
  const TraceResult r = trace(s, StartPoint{Vec2{0.3, 0.2}}, cfg);
  REQUIRE(r.termination == Termination::DiscriminantNegative);
  CHECK_THAT(r.s_reached, WithinAbs(2 * (std::sin(kPi / 3) - std::sin(0.3)), 2e-3));
  CHECK_THAT(r.curve.uv.back().u, WithinAbs(kPi / 3, 1e-4));
  CHECK(max_abs(r.angle_err) < 1e-12);
  CHECK(max_abs(r.speed_err) < 1e-12);
  // tangent angle recomputed from the stored frames, not the diagnostics
  double worst = 0;
  for (std::size_t i = 0; i < r.curve.size(); ++i)
    worst = std::max(worst, std::abs(dot(r.frames.T[i], Vec3{0, 0, 1}) - 0.5));
  CHECK(worst < 1e-12);
}

TEST_CASE("arc-length grid is exact and the step budget honors s_max", "[tracer]") {
  const Surface s = make_preset("cylinder");
  TraceConfig cfg = slant_cfg({0, 0, 1}, kPi / 4, 1.0);
  cfg.step = 1e-3;
  const TraceResult r = trace(s, StartPoint{Vec2{0.0, 0.0}}, cfg);
  REQUIRE(r.curve.size() == 1001);
  CHECK(r.curve.s[500] == 500 * 1e-3);
  CHECK(r.curve.s.back() == 1000 * 1e-3);
  CHECK(r.s_reached == r.curve.s.back());
}
