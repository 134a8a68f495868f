#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace cfa {

struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool valid() const { return x1 < x2 && y1 < y2; }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }
    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }

    bool contains(const BBox& other) const {
        return x1 <= other.x1 && y1 <= other.y1 && x2 >= other.x2 && y2 >= other.y2;
    }

    friend bool operator==(const BBox& a, const BBox& b) = default;
};

// Smallest axis-aligned box containing both inputs.
inline BBox union_box(const BBox& a, const BBox& b) {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

using Vec2 = std::array<double, 2>;

// Center-offset vector from the subject box to the object box.
inline Vec2 spatial_vector(const BBox& sub, const BBox& obj) {
    return {obj.center_x() - sub.center_x(), obj.center_y() - sub.center_y()};
}

inline double norm2(const Vec2& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1]); }

// Cosine test used by the spatial restriction. A zero vector on either side
// makes the cosine undefined and fails the test.
inline bool spatial_match(const Vec2& a, const Vec2& b, double sigma) {
    double na = norm2(a);
    double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return false;
    double c = (a[0] * b[0] + a[1] * b[1]) / (na * nb);
    return c > sigma;
}

}  // namespace cfa
