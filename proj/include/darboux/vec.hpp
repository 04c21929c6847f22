#pragma once

#include <cmath>
#include <limits>

namespace darboux {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double c) { x *= c; y *= c; z *= c; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double c, Vec3 a) { return a *= c; }
inline Vec3 operator*(Vec3 a, double c) { return a *= c; }
inline Vec3 operator/(Vec3 a, double c) { return a *= 1.0 / c; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

// Unsigned angle between two directions, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

// Parameter-plane pair (u,v); also used for parameter-space gradients/velocities.
struct Vec2 {
  double u = 0, v = 0;
};

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.u + b.u, a.v + b.v}; }
inline Vec2 operator*(double c, const Vec2& a) { return {c * a.u, c * a.v}; }

// Row-major 3x3 matrix; just enough for Hessians and small linear algebra.
struct Mat3 {
  double m[3][3] = {};

  Vec3 operator*(const Vec3& w) const {
    return {m[0][0] * w.x + m[0][1] * w.y + m[0][2] * w.z,
            m[1][0] * w.x + m[1][1] * w.y + m[1][2] * w.z,
            m[2][0] * w.x + m[2][1] * w.y + m[2][2] * w.z};
  }
};

}  // namespace darboux
