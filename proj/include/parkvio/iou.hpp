#pragma once

#include "parkvio/geom.hpp"

#include <array>
#include <vector>

namespace parkvio {

using Quad = std::array<Vec2, 4>;

inline double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p0 = poly[i];
    const Vec2& p1 = poly[(i + 1) % poly.size()];
    s += p0.x() * p1.y() - p1.x() * p0.y();
  }
  return 0.5 * std::abs(s);
}

inline double quad_area(const Quad& q) {
  return polygon_area(std::vector<Vec2>(q.begin(), q.end()));
}

namespace detail {

inline std::vector<Vec2> ccw_of(const Quad& q) {
  std::vector<Vec2> poly(q.begin(), q.end());
  double s = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p0 = poly[i];
    const Vec2& p1 = poly[(i + 1) % poly.size()];
    s += p0.x() * p1.y() - p1.x() * p0.y();
  }
  if (s < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

// Sutherland-Hodgman clip of a convex subject polygon by a convex CCW clip
// polygon.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
  for (size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Vec2 a = clip[i];
    const Vec2 b = clip[(i + 1) % clip.size()];
    const Vec2 edge = b - a;
    const auto inside = [&](const Vec2& p) {
      return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()) >= -1e-12;
    };
    std::vector<Vec2> out;
    out.reserve(subject.size() + 1);
    for (size_t j = 0; j < subject.size(); ++j) {
      const Vec2 cur = subject[j];
      const Vec2 nxt = subject[(j + 1) % subject.size()];
      const bool cur_in = inside(cur);
      const bool nxt_in = inside(nxt);
      if (cur_in) out.push_back(cur);
      if (cur_in != nxt_in) {
        const double d_cur = edge.x() * (cur.y() - a.y()) - edge.y() * (cur.x() - a.x());
        const double d_nxt = edge.x() * (nxt.y() - a.y()) - edge.y() * (nxt.x() - a.x());
        const double u = d_cur / (d_cur - d_nxt);
        out.push_back(cur + u * (nxt - cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

// Intersection-over-union of two convex quads. A degenerate (zero-area)
// input yields 0 and sets the optional flag.
inline double iou(const Quad& a, const Quad& b, bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  const double area_a = quad_area(a);
  const double area_b = quad_area(b);
  if (area_a < 1e-12 || area_b < 1e-12) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const auto inter = detail::clip_convex(detail::ccw_of(a), detail::ccw_of(b));
  const double area_i = polygon_area(inter);
  const double area_u = area_a + area_b - area_i;
  if (area_u <= 0) return 0.0;
  return std::clamp(area_i / area_u, 0.0, 1.0);
}

}  // namespace parkvio
