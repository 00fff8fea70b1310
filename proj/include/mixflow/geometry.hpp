#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace mixflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2&) const = default;

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{};
    }
    /// Unit vector pointing to the right of this direction (right-hand traffic).
    Vec2 right() const { return {y, -x}; }
};

inline Vec2 unit_from_angle(double rad) { return {std::cos(rad), std::sin(rad)}; }

/// Shortest distance between segments [a0,a1] and [b0,b1].
double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);

/// Piecewise-linear centerline with cached cumulative arclength.
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> points);

    const std::vector<Vec2>& points() const { return points_; }
    double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

    /// Point at arclength `s`, clamped to [0, length()].
    Vec2 point_at(double s) const;
    /// Unit tangent at arclength `s`.
    Vec2 heading_at(double s) const;

    /// Minimum distance between two polylines (0 when they cross).
    double distance_to(const Polyline& other) const;

    bool operator==(const Polyline& other) const { return points_ == other.points_; }

private:
    std::size_t segment_index(double s) const;

    std::vector<Vec2> points_;
    std::vector<double> cumulative_;
};

/// Samples a cubic Bezier curve into `segments` straight pieces.
std::vector<Vec2> cubic_bezier(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, int segments);

/// Samples a circular arc (counter-clockwise from `from_rad` to `to_rad`).
std::vector<Vec2> arc_points(Vec2 center, double radius, double from_rad, double to_rad, int segments);

}  // namespace mixflow
