#pragma once

// Incremental Bowyer-Watson Delaunay triangulation in 2-D.
//
// Built for the tumour simulator's neighbourhood queries: a few hundred to a
// few thousand points, rebuilt every step. Points are inserted one at a time
// into a super-triangle; the cavity of circumcircle-violating triangles is
// found by flood fill from the located triangle and retriangulated as a fan.
// Cocircular ties resolve to "not inside", which keeps whichever diagonal was
// created first; that is still a valid Delaunay triangulation. Hot-path
// bookkeeping uses epoch-stamped scratch arrays, no per-insertion maps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sbikit/core/errors.hpp"

namespace sbikit {

struct Point2 {
  double x;
  double y;
};

namespace detail {

inline double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when p lies strictly inside the circumcircle of CCW triangle (a,b,c).
inline double incircle_det(const Point2& a, const Point2& b, const Point2& c,
                           const Point2& p) {
  const double ax = a.x - p.x, ay = a.y - p.y;
  const double bx = b.x - p.x, by = b.y - p.y;
  const double cx = c.x - p.x, cy = c.y - p.y;
  const double a2 = ax * ax + ay * ay;
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) +
         a2 * (bx * cy - by * cx);
}

}  // namespace detail

class DelaunayTriangulation {
 public:
  struct Triangle {
    int v[3];    // vertex indices, CCW
    int nbr[3];  // nbr[i] faces the edge opposite v[i]; -1 on the hull
    bool alive;
  };

  // Throws DomainError for fewer than 3 points, duplicate points, or an
  // all-collinear configuration.
  static DelaunayTriangulation build(const std::vector<Point2>& points) {
    if (points.size() < 3)
      throw DomainError("delaunay: need at least 3 points");
    DelaunayTriangulation dt;
    dt.n_input_ = points.size();
    dt.pts_ = points;
    dt.tris_.reserve(2 * points.size() + 16);
    dt.add_super_triangle();
    // Spatially sorted insertion keeps the locate walk short: consecutive
    // points are near each other, so the walk from the previous triangle is
    // O(1) amortized instead of O(sqrt(n)).
    std::vector<int> order(dt.n_input_);
    for (std::size_t i = 0; i < dt.n_input_; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&points](int a, int b) {
      if (points[a].y != points[b].y) return points[a].y < points[b].y;
      return points[a].x < points[b].x;
    });
    for (int i : order) dt.insert(i);
    dt.finalize();
    if (dt.triangles_.empty())
      throw DomainError("delaunay: all points collinear");
    return dt;
  }

  // Final triangles over input vertices only.
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

  // Symmetric, sorted neighbour lists over input vertices.
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

  std::size_t edge_count() const { return edge_count_; }

 private:
  void add_super_triangle() {
    double lo_x = pts_[0].x, hi_x = pts_[0].x;
    double lo_y = pts_[0].y, hi_y = pts_[0].y;
    for (const auto& p : pts_) {
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
    const double cx = 0.5 * (lo_x + hi_x);
    const double cy = 0.5 * (lo_y + hi_y);
    const double r = 64.0 * (std::max(hi_x - lo_x, hi_y - lo_y) + 1.0);
    const int s = static_cast<int>(pts_.size());
    pts_.push_back({cx - 2.0 * r, cy - r});
    pts_.push_back({cx + 2.0 * r, cy - r});
    pts_.push_back({cx, cy + 2.0 * r});
    tris_.push_back({{s, s + 1, s + 2}, {-1, -1, -1}, true});
    visit_stamp_.push_back(0);
    cavity_stamp_.push_back(0);
    last_tri_ = 0;
  }

  bool strictly_in_circumcircle(int tri, int pi) const {
    const Triangle& t = tris_[tri];
    const Point2& a = pts_[t.v[0]];
    const Point2& b = pts_[t.v[1]];
    const Point2& c = pts_[t.v[2]];
    const Point2& p = pts_[pi];
    const double det = detail::incircle_det(a, b, c, p);
    auto sq = [&p](const Point2& q) {
      const double dx = q.x - p.x, dy = q.y - p.y;
      return dx * dx + dy * dy;
    };
    const double m2 = std::max({sq(a), sq(b), sq(c)});
    return det > 1e-11 * m2 * m2;
  }

  // Walk toward the point; fall back to a scan if the walk cycles.
  int locate(int pi) const {
    const Point2& p = pts_[pi];
    int cur = last_tri_;
    if (!tris_[cur].alive) cur = first_alive();
    const int guard = static_cast<int>(tris_.size()) * 4 + 16;
    for (int steps = 0; steps < guard; ++steps) {
      const Triangle& t = tris_[cur];
      bool moved = false;
      for (int e = 0; e < 3; ++e) {
        const Point2& a = pts_[t.v[(e + 1) % 3]];
        const Point2& b = pts_[t.v[(e + 2) % 3]];
        if (detail::orient2d(a, b, p) < 0.0) {
          if (t.nbr[e] < 0) break;  // outside through a hull edge
          cur = t.nbr[e];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
    }
    // Degenerate walk; scan everything.
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      if (!tris_[i].alive) continue;
      const Triangle& t = tris_[i];
      bool inside = true;
      for (int e = 0; e < 3 && inside; ++e) {
        const Point2& a = pts_[t.v[(e + 1) % 3]];
        const Point2& b = pts_[t.v[(e + 2) % 3]];
        if (detail::orient2d(a, b, p) < 0.0) inside = false;
      }
      if (inside) return static_cast<int>(i);
    }
    throw DomainError("delaunay: point location failed");
  }

  int first_alive() const {
    for (std::size_t i = 0; i < tris_.size(); ++i)
      if (tris_[i].alive) return static_cast<int>(i);
    throw DomainError("delaunay: no triangles");
  }

  void push_triangle(const Triangle& t) {
    tris_.push_back(t);
    visit_stamp_.push_back(0);
    cavity_stamp_.push_back(0);
  }

  void insert(int pi) {
    const int start = locate(pi);
    for (int k = 0; k < 3; ++k) {
      const Point2& v = pts_[tris_[start].v[k]];
      const double dx = v.x - pts_[pi].x, dy = v.y - pts_[pi].y;
      if (dx * dx + dy * dy < 1e-24)
        throw DomainError("delaunay: duplicate point");
    }

    ++epoch_;
    // Cavity flood fill: triangles whose circumcircle strictly contains p.
    cavity_.clear();
    stack_.clear();
    stack_.push_back(start);
    visit_stamp_[start] = epoch_;
    while (!stack_.empty()) {
      const int cur = stack_.back();
      stack_.pop_back();
      if (cur != start && !strictly_in_circumcircle(cur, pi)) continue;
      cavity_.push_back(cur);
      cavity_stamp_[cur] = epoch_;
      for (int e = 0; e < 3; ++e) {
        const int nb = tris_[cur].nbr[e];
        if (nb >= 0 && visit_stamp_[nb] != epoch_) {
          visit_stamp_[nb] = epoch_;
          stack_.push_back(nb);
        }
      }
    }
    for (int c : cavity_) tris_[c].alive = false;

    // Boundary edges of the cavity, oriented as seen from inside.
    boundary_.clear();
    for (int c : cavity_) {
      const Triangle& t = tris_[c];
      for (int e = 0; e < 3; ++e) {
        const int nb = t.nbr[e];
        if (nb >= 0 && cavity_stamp_[nb] == epoch_) continue;
        BoundaryEdge be;
        be.a = t.v[(e + 1) % 3];
        be.b = t.v[(e + 2) % 3];
        be.outer = nb;
        be.outer_slot = -1;
        if (nb >= 0)
          for (int k = 0; k < 3; ++k)
            if (tris_[nb].nbr[k] == c) be.outer_slot = k;
        boundary_.push_back(be);
      }
    }

    // Fan of new triangles (a, b, p); spokes matched by shared vertex.
    spokes_.clear();
    const int base = static_cast<int>(tris_.size());
    for (std::size_t i = 0; i < boundary_.size(); ++i) {
      const auto& be = boundary_[i];
      Triangle nt;
      nt.v[0] = be.a;
      nt.v[1] = be.b;
      nt.v[2] = pi;
      nt.nbr[0] = -1;        // across (b, p)
      nt.nbr[1] = -1;        // across (p, a)
      nt.nbr[2] = be.outer;  // across (a, b)
      nt.alive = true;
      const int tid = base + static_cast<int>(i);
      if (be.outer >= 0 && be.outer_slot >= 0)
        tris_[be.outer].nbr[be.outer_slot] = tid;
      push_triangle(nt);

      // Spoke through vertex b (slot 0) and through vertex a (slot 1); two
      // new triangles meeting at a shared boundary vertex share that spoke.
      match_spoke(be.b, tid, 0);
      match_spoke(be.a, tid, 1);
    }
    last_tri_ = base;
  }

  void match_spoke(int vertex, int tid, int slot) {
    for (auto& s : spokes_) {
      if (s.vertex != vertex) continue;
      tris_[tid].nbr[slot] = s.tri;
      tris_[s.tri].nbr[s.slot] = tid;
      s = spokes_.back();
      spokes_.pop_back();
      return;
    }
    spokes_.push_back({vertex, tid, slot});
  }

  void finalize() {
    adjacency_.assign(n_input_, {});
    triangles_.clear();
    const int n = static_cast<int>(n_input_);
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
      triangles_.push_back({t.v[0], t.v[1], t.v[2]});
      for (int e = 0; e < 3; ++e) {
        adjacency_[t.v[e]].push_back(t.v[(e + 1) % 3]);
        adjacency_[t.v[e]].push_back(t.v[(e + 2) % 3]);
      }
    }
    edge_count_ = 0;
    for (auto& nbrs : adjacency_) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
      edge_count_ += nbrs.size();
    }
    edge_count_ /= 2;
  }

  struct BoundaryEdge {
    int a, b;
    int outer;       // triangle beyond the edge, -1 on super hull
    int outer_slot;  // which nbr slot of outer points back
  };
  struct Spoke {
    int vertex;
    int tri;
    int slot;
  };

  std::size_t n_input_ = 0;
  std::vector<Point2> pts_;
  std::vector<Triangle> tris_;
  std::vector<int> visit_stamp_;
  std::vector<int> cavity_stamp_;
  std::vector<int> cavity_;
  std::vector<int> stack_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<Spoke> spokes_;
  int epoch_ = 0;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<std::vector<int>> adjacency_;
  std::size_t edge_count_ = 0;
  int last_tri_ = 0;
};

inline std::vector<std::vector<int>> delaunay_neighbors(
    const std::vector<Point2>& points) {
  return DelaunayTriangulation::build(points).adjacency();
}

}  // namespace sbikit
