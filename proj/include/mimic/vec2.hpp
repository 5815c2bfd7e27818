#pragma once

#include <cmath>

namespace mimic {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
    double norm_sq() const { return x * x + y * y; }

    // CCW perpendicular, used for 2D cross products.
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

// z-component of the 3D cross product of two in-plane vectors.
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

// Rotation of v by angle a.
inline Vec2 rotate(const Vec2& v, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Vec2 unit_dir(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

}  // namespace mimic
