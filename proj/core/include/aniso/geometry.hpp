#pragma once

#include <Eigen/Core>

#include <array>

namespace aniso {

/// Closest point on triangle abc to p (any dimension). Writes barycentric weights of the
/// result with respect to (a, b, c).
template <class V>
V closest_point_on_triangle(const V& p, const V& a, const V& b, const V& c, std::array<double, 3>& w) {
    const V ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        w = {1, 0, 0};
        return a;
    }
    const V bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        w = {0, 1, 0};
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double t = d1 / (d1 - d3);
        w = {1 - t, t, 0};
        return a + t * ab;
    }
    const V cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        w = {0, 0, 1};
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double t = d2 / (d2 - d6);
        w = {1 - t, 0, t};
        return a + t * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        w = {0, 1 - t, t};
        return b + t * (c - b);
    }
    const double sum = va + vb + vc;
    if (!(sum > 0)) { // degenerate triangle: fall back to the nearest vertex
        const double da = (p - a).squaredNorm(), db = (p - b).squaredNorm(), dc = (p - c).squaredNorm();
        if (da <= db && da <= dc) { w = {1, 0, 0}; return a; }
        if (db <= dc) { w = {0, 1, 0}; return b; }
        w = {0, 0, 1};
        return c;
    }
    const double v = vb / sum, u = vc / sum;
    w = {1 - v - u, v, u};
    return a + v * ab + u * ac;
}

template <class V>
double point_segment_distance(const V& p, const V& a, const V& b) {
    const V ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
    t = t < 0 ? 0 : (t > 1 ? 1 : t);
    return (p - (a + t * ab)).norm();
}

} // namespace aniso
