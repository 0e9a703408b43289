#pragma once

#include <cmath>

namespace geoxray {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  constexpr double norm2() const { return x * x + y * y; }
  double norm() const { return std::hypot(x, y); }
  /// Counter-clockwise rotation by a quarter turn.
  constexpr Vec2 perp() const { return {-y, x}; }
  double angle() const { return std::atan2(y, x); }

  static Vec2 polar(double r, double theta) { return {r * std::cos(theta), r * std::sin(theta)}; }
  static Vec2 unit(double theta) { return {std::cos(theta), std::sin(theta)}; }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Ambient vector in R^3 (sphere) or Minkowski R^{2,1} (hyperboloid). The
/// third component is the "height" axis through the chart origin.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
  constexpr Vec3(Vec2 s, double z_) : x(s.x), y(s.y), z(z_) {}

  constexpr Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec2 spatial() const { return {x, y}; }
};

constexpr Vec3 operator*(double s, Vec3 v) { return v * s; }

}  // namespace geoxray
