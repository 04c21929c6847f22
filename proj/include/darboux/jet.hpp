#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>

namespace darboux {

// Maximum number of independent variables a jet can carry. Three is enough
// for every surface form in this library (u,v and x,y,z); one spare.
inline constexpr std::size_t kMaxJetVars = 4;

// Second-order forward-mode number: value, gradient and Hessian with respect
// to n <= kMaxJetVars variables. Storage is inline (no heap) and the Hessian
// is a packed upper triangle, so symmetry holds by construction.
class Jet2 {
 public:
  Jet2() = default;

  static Jet2 constant(double c, std::size_t n) {
    Jet2 j;
    j.n_ = n;
    j.v_ = c;
    return j;
  }

  static Jet2 variable(double x, std::size_t index, std::size_t n) {
    assert(index < n && n <= kMaxJetVars);
    Jet2 j;
    j.n_ = n;
    j.v_ = x;
    j.g_[index] = 1.0;
    return j;
  }

  std::size_t vars() const { return n_; }
  double value() const { return v_; }
  double grad(std::size_t i) const { return g_[i]; }
  double hess(std::size_t i, std::size_t j) const {
    return i <= j ? h_[pack(i, j)] : h_[pack(j, i)];
  }

  friend Jet2 operator+(const Jet2& a, const Jet2& b) {
    Jet2 r = a;
    r.v_ += b.v_;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] += b.g_[i];
    for (std::size_t k = 0; k < tsize(a.n_); ++k) r.h_[k] += b.h_[k];
    return r;
  }

  friend Jet2 operator-(const Jet2& a, const Jet2& b) {
    Jet2 r = a;
    r.v_ -= b.v_;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] -= b.g_[i];
    for (std::size_t k = 0; k < tsize(a.n_); ++k) r.h_[k] -= b.h_[k];
    return r;
  }

  friend Jet2 operator-(const Jet2& a) {
    Jet2 r = a;
    r.v_ = -r.v_;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] = -r.g_[i];
    for (std::size_t k = 0; k < tsize(a.n_); ++k) r.h_[k] = -r.h_[k];
    return r;
  }

  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.n_ = a.n_;
    r.v_ = a.v_ * b.v_;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] = a.g_[i] * b.v_ + b.g_[i] * a.v_;
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t j = i; j < a.n_; ++j)
        r.h_[r.pack(i, j)] = a.hess(i, j) * b.v_ + b.hess(i, j) * a.v_ +
                             a.g_[i] * b.g_[j] + a.g_[j] * b.g_[i];
    return r;
  }

  // Quotient a/b, assuming b.value() != 0 (the evaluator checks).
  friend Jet2 operator/(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.n_ = a.n_;
    const double inv = 1.0 / b.v_;
    r.v_ = a.v_ * inv;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] = (a.g_[i] - r.v_ * b.g_[i]) * inv;
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t j = i; j < a.n_; ++j)
        r.h_[r.pack(i, j)] = (a.hess(i, j) - r.g_[i] * b.g_[j] - r.g_[j] * b.g_[i] -
                              r.v_ * b.hess(i, j)) * inv;
    return r;
  }

  // Composition with a scalar function: f(a) given f, f', f'' at a.value().
  static Jet2 compose(const Jet2& a, double f, double d1, double d2) {
    Jet2 r;
    r.n_ = a.n_;
    r.v_ = f;
    for (std::size_t i = 0; i < a.n_; ++i) r.g_[i] = d1 * a.g_[i];
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t j = i; j < a.n_; ++j)
        r.h_[r.pack(i, j)] = d1 * a.hess(i, j) + d2 * a.g_[i] * a.g_[j];
    return r;
  }

 private:
  static std::size_t tsize(std::size_t n) { return n * (n + 1) / 2; }
  // Index of (i,j), i <= j, in the row-major packed upper triangle.
  std::size_t pack(std::size_t i, std::size_t j) const {
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  std::size_t n_ = 0;
  double v_ = 0;
  std::array<double, kMaxJetVars> g_{};
  std::array<double, kMaxJetVars*(kMaxJetVars + 1) / 2> h_{};
};

inline Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return Jet2::compose(a, s, c, -s);
}

inline Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return Jet2::compose(a, c, -s, -c);
}

inline Jet2 tan(const Jet2& a) {
  const double t = std::tan(a.value());
  const double d1 = 1.0 + t * t;
  return Jet2::compose(a, t, d1, 2.0 * t * d1);
}

inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.value());
  return Jet2::compose(a, e, e, e);
}

// Natural log; caller guarantees a.value() > 0.
inline Jet2 log(const Jet2& a) {
  const double inv = 1.0 / a.value();
  return Jet2::compose(a, std::log(a.value()), inv, -inv * inv);
}

// Square root; caller guarantees a.value() >= 0 (derivatives blow up at 0).
inline Jet2 sqrt(const Jet2& a) {
  const double r = std::sqrt(a.value());
  const double d1 = 0.5 / r;
  return Jet2::compose(a, r, d1, -0.5 * d1 / a.value());
}

// Integer power by repeated multiplication (binary exponentiation). k may be
// negative; caller guarantees a.value() != 0 in that case.
inline Jet2 pow_int(const Jet2& a, long long k) {
  if (k == 0) return Jet2::constant(1.0, a.vars());
  const bool neg = k < 0;
  unsigned long long e = neg ? -static_cast<unsigned long long>(k) : static_cast<unsigned long long>(k);
  Jet2 base = a;
  Jet2 result = Jet2::constant(1.0, a.vars());
  while (e != 0) {
    if (e & 1ull) result = result * base;
    e >>= 1;
    if (e != 0) base = base * base;
  }
  return neg ? Jet2::constant(1.0, a.vars()) / result : result;
}

// Real power; caller guarantees a.value() > 0.
inline Jet2 pow_real(const Jet2& a, double e) {
  const double v = a.value();
  const double f = std::pow(v, e);
  return Jet2::compose(a, f, e * std::pow(v, e - 1.0), e * (e - 1.0) * std::pow(v, e - 2.0));
}

}  // namespace darboux
