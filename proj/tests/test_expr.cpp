#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "darboux/expr.hpp"

using namespace darboux;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
double val(const char* src, std::vector<double> point = {},
           std::vector<std::string> vars = {}) {
  return Expression::parse(src, std::move(vars)).value(point);
}
}  // namespace

TEST_CASE("arithmetic and precedence", "[expr]") {
  CHECK(val("1 + 2*3") == 7.0);
  CHECK(val("(1 + 2)*3") == 9.0);
  CHECK(val("2 - 3 - 4") == -5.0);      // left associative
  CHECK(val("24 / 4 / 2") == 3.0);      // left associative
  CHECK(val("-2^2") == -4.0);           // unary minus binds looser than the power
  CHECK(val("2^3^2") == 64.0);          // power chains apply left to right
  CHECK(val("2^-2") == 0.25);           // exponent may carry its own sign
  CHECK(val("1e-3 * 1000") == 1.0);
  CHECK_THAT(val("pi"), WithinAbs(3.14159265358979323846, 0.0));
  CHECK_THAT(val("2*pi/4 - pi/2"), WithinAbs(0.0, 1e-300));
}

TEST_CASE("variables evaluate positionally", "[expr]") {
  Expression e = Expression::parse("u^2 - v", {"u", "v"});
  REQUIRE(e.variables() == std::vector<std::string>{"u", "v"});
  CHECK(e.value(std::vector<double>{3.0, 1.0}) == 8.0);
  CHECK(e.value(std::vector<double>{-3.0, 0.5}) == 8.5);
}

TEST_CASE("functions match the C library", "[expr]") {
  const double x = 0.73;
  CHECK_THAT(val("sin(x)", {x}, {"x"}), WithinRel(std::sin(x), 1e-15));
  CHECK_THAT(val("cos(x)", {x}, {"x"}), WithinRel(std::cos(x), 1e-15));
  CHECK_THAT(val("tan(x)", {x}, {"x"}), WithinRel(std::tan(x), 1e-15));
  CHECK_THAT(val("exp(x)", {x}, {"x"}), WithinRel(std::exp(x), 1e-15));
  CHECK_THAT(val("ln(x)", {x}, {"x"}), WithinRel(std::log(x), 1e-15));
  CHECK_THAT(val("sqrt(x)", {x}, {"x"}), WithinRel(std::sqrt(x), 1e-15));
  CHECK_THAT(val("x^0.4", {x}, {"x"}), WithinRel(std::pow(x, 0.4), 1e-15));
  CHECK(val("x^2", {-3.0}, {"x"}) == 9.0);  // integer powers accept negative bases
}

TEST_CASE("second-order jets match hand derivatives", "[expr]") {
  // f(u,v) = sin(u) exp(v) + u^3 v - ln(u + 2)
  Expression f = Expression::parse("sin(u)*exp(v) + u^3*v - ln(u + 2)", {"u", "v"});
  const double u = 0.7, v = -0.3;
  const Jet2 j = f.jet2(std::vector<double>{u, v});

  const double se = std::sin(u) * std::exp(v);
  const double ce = std::cos(u) * std::exp(v);
  CHECK_THAT(j.value(), WithinRel(se + u * u * u * v - std::log(u + 2), 1e-14));
  CHECK_THAT(j.grad(0), WithinRel(ce + 3 * u * u * v - 1 / (u + 2), 1e-14));
  CHECK_THAT(j.grad(1), WithinRel(se + u * u * u, 1e-14));
  CHECK_THAT(j.hess(0, 0), WithinRel(-se + 6 * u * v + 1 / ((u + 2) * (u + 2)), 1e-14));
  CHECK_THAT(j.hess(0, 1), WithinRel(ce + 3 * u * u, 1e-14));
  CHECK_THAT(j.hess(1, 0), WithinRel(ce + 3 * u * u, 1e-14));  // symmetric by construction
  CHECK_THAT(j.hess(1, 1), WithinRel(se, 1e-14));
}

TEST_CASE("jets through quotients and real powers", "[expr]") {
  // g(x) = x^1.5 / (1 + x^2); g'(x) and g''(x) written out by hand
  Expression g = Expression::parse("x^1.5 / (1 + x^2)", {"x"});
  const double x = 1.3;
  const Jet2 j = g.jet2(std::vector<double>{x});
  const double p = std::pow(x, 1.5), q = 1 + x * x;
  const double dp = 1.5 * std::pow(x, 0.5), ddp = 0.75 * std::pow(x, -0.5);
  const double dg = (dp * q - p * 2 * x) / (q * q);
  const double ddg = (ddp * q * q - 2 * q * (2 * x * dp + p) + 8 * x * x * p) / (q * q * q);
  CHECK_THAT(j.value(), WithinRel(p / q, 1e-14));
  CHECK_THAT(j.grad(0), WithinRel(dg, 1e-13));
  CHECK_THAT(j.hess(0, 0), WithinRel(ddg, 1e-12));
}

TEST_CASE("canonical text round-trips", "[expr]") {
  for (const char* src : {"u^2 - 2*u*v + sin(v)/(1 + u^2)", "sqrt(u + 3) * exp(-v)",
                          "(2 + cos(u))*cos(v)", "u^-3 + 0.1"}) {
    Expression e1 = Expression::parse(src, {"u", "v"});
    Expression e2 = Expression::parse(e1.str(), {"u", "v"});
    for (double u : {0.2, 1.7})
      for (double v : {-0.4, 0.9})
        CHECK_THAT(e2.value(std::vector<double>{u, v}),
                   WithinRel(e1.value(std::vector<double>{u, v}), 1e-15));
    CHECK(e2.str() == e1.str());  // printing is a fixed point
  }
}

TEST_CASE("parse rejections", "[expr]") {
  CHECK_THROWS_AS(Expression::parse("u +", {"u"}), ParseError);
  CHECK_THROWS_AS(Expression::parse("(u", {"u"}), ParseError);
  CHECK_THROWS_AS(Expression::parse("u w", {"u", "w"}), ParseError);
  CHECK_THROWS_AS(Expression::parse("", {}), ParseError);
  CHECK_THROWS_AS(Expression::parse("u*w", {"u"}), ParseError);        // unknown identifier
  CHECK_THROWS_AS(Expression::parse("sin()", {}), ParseError);
  CHECK_THROWS_AS(Expression::parse("bogus(1)", {}), ParseError);
  CHECK_THROWS_AS(Expression::parse("u", {"u", "u"}), ParseError);     // duplicate variable
  CHECK_THROWS_AS(Expression::parse("pi", {"pi"}), ParseError);        // reserved name
  CHECK_THROWS_AS(Expression::parse("sin", {"sin"}), ParseError);      // reserved name
  CHECK_THROWS_AS(Expression::parse("a", {"a", "b", "c", "d", "e"}), ParseError);
  CHECK_THROWS_AS(Expression::parse("x^y", {"x", "y"}), ParseError);   // exponent must fold
  CHECK_THROWS_AS(Expression::parse("x^(1/0)", {"x"}), ParseError);

  try {
    Expression::parse("u + &", {"u"});
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.offset == 4);
  }
}

TEST_CASE("evaluation domain violations", "[expr]") {
  CHECK_THROWS_AS(val("1/x", {0.0}, {"x"}), EvalError);
  CHECK_THROWS_AS(val("ln(x)", {0.0}, {"x"}), EvalError);
  CHECK_THROWS_AS(val("ln(x)", {-1.0}, {"x"}), EvalError);
  CHECK_THROWS_AS(val("sqrt(x)", {-1e-12}, {"x"}), EvalError);
  CHECK_THROWS_AS(val("x^-2", {0.0}, {"x"}), EvalError);
  CHECK_THROWS_AS(val("x^0.5", {-1.0}, {"x"}), EvalError);  // real power needs base > 0
  CHECK_NOTHROW(val("x^3", {-2.0}, {"x"}));
}
