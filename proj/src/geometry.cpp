#include "mixflow/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mixflow {

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

bool segments_cross(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    const Vec2 r = a1 - a0;
    const Vec2 s = b1 - b0;
    const double denom = r.cross(s);
    if (denom == 0.0) return false;
    const double t = (b0 - a0).cross(s) / denom;
    const double u = (b0 - a0).cross(r) / denom;
    return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

}  // namespace

double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    if (segments_cross(a0, a1, b0, b1)) return 0.0;
    return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                     point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("polyline needs at least two points");
    cumulative_.reserve(points_.size());
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double seg = (points_[i] - points_[i - 1]).norm();
        if (!(seg > 0.0)) throw std::invalid_argument("polyline has a zero-length segment");
        cumulative_.push_back(cumulative_.back() + seg);
    }
}

std::size_t Polyline::segment_index(double s) const {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    std::size_t i = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    return std::min(i, points_.size() - 2);
}

Vec2 Polyline::point_at(double s) const {
    s = std::clamp(s, 0.0, length());
    const std::size_t i = segment_index(s);
    const double seg = cumulative_[i + 1] - cumulative_[i];
    const double t = (s - cumulative_[i]) / seg;
    return points_[i] + (points_[i + 1] - points_[i]) * t;
}

Vec2 Polyline::heading_at(double s) const {
    s = std::clamp(s, 0.0, length());
    const std::size_t i = segment_index(s);
    return (points_[i + 1] - points_[i]).normalized();
}

double Polyline::distance_to(const Polyline& other) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
        for (std::size_t j = 0; j + 1 < other.points_.size(); ++j) {
            best = std::min(best, segment_distance(points_[i], points_[i + 1], other.points_[j],
                                                   other.points_[j + 1]));
            if (best == 0.0) return 0.0;
        }
    }
    return best;
}

std::vector<Vec2> cubic_bezier(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, int segments) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k) {
        const double t = static_cast<double>(k) / segments;
        const double u = 1.0 - t;
        out.push_back(p0 * (u * u * u) + p1 * (3 * u * u * t) + p2 * (3 * u * t * t) + p3 * (t * t * t));
    }
    return out;
}

std::vector<Vec2> arc_points(Vec2 center, double radius, double from_rad, double to_rad, int segments) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k) {
        const double a = from_rad + (to_rad - from_rad) * k / segments;
        out.push_back(center + unit_from_angle(a) * radius);
    }
    return out;
}

}  // namespace mixflow
