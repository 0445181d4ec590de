#pragma once

// Off-lattice biphasic tumour growth simulator.
//
// Cells are points in the plane (lattice constant 1 at initialisation).
// Each hourly step: cancer cells divide with probability
// p_d = p0 (1 - d/d_max), p0 = dt/g_age, where d is the cell's depth inside
// the tumour (distance to the nearest healthy cell minus one rest length,
// clamped to [0, d_max]); each cancer cell converts a uniformly chosen
// Delaunay-adjacent healthy cell with probability p_psc; then all positions
// relax synchronously by a Hooke's-law update over Delaunay neighbours with
// rest length equal to the initial lattice spacing. The growth-phase g_age
// switches from g_age_1 to g_age_2 at hour tau. Area is cancer-cell count
// times a calibration constant, recorded once per day.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/simulator.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/sim/delaunay.hpp"

namespace sbikit {

struct BvcbmCell {
  Point2 pos;
  bool cancer;
  double age_hours;  // since last division / conversion
};

struct BvcbmState {
  std::vector<BvcbmCell> cells;
  std::size_t n_cancer = 0;
  double rest_length = 1.0;
};

struct BvcbmParams {
  double dt = 1.0;          // hours per step
  double cell_area = 0.01;  // mm^2 per cancer cell
  double d_max = 3.0;       // division-gradient depth cutoff, length units
  double lambda = 0.1;      // mechanical step size (0.1 * dt)
  double p_psc = 1e-5;      // per-step invasion probability, fixed
  // Cost ceiling for scaled-down configurations: once the cell count reaches
  // it, the biphasic run stops stepping and the remaining daily areas repeat
  // the frozen value. Such runaway trajectories are already astronomically
  // far from any plausible observation, so inference treats them exactly as
  // it would the unsaturated ones: reject. 0 disables the ceiling.
  std::size_t max_cells = 0;
};

// Triangular lattice: centre cell plus n_rings hexagonal rings, lattice
// constant 1. The centre cell is the initial cancer cell.
inline BvcbmState init_hexagonal(int n_rings) {
  if (n_rings < 1) throw DomainError("init_hexagonal: n_rings >= 1");
  BvcbmState state;
  auto axial_to_xy = [](int q, int r) {
    return Point2{q + 0.5 * r, r * std::numbers::sqrt3 / 2.0};
  };
  state.cells.push_back({axial_to_xy(0, 0), true, 0.0});
  for (int q = -n_rings; q <= n_rings; ++q)
    for (int r = -n_rings; r <= n_rings; ++r) {
      if (q == 0 && r == 0) continue;
      const int dist = (std::abs(q) + std::abs(r) + std::abs(q + r)) / 2;
      if (dist > n_rings) continue;
      state.cells.push_back({axial_to_xy(q, r), false, 0.0});
    }
  state.n_cancer = 1;
  state.rest_length = 1.0;
  return state;
}

inline double division_probability(double p0, double d, double d_max) {
  if (!(d_max > 0.0)) throw DomainError("division_probability: d_max > 0");
  const double dc = std::clamp(d, 0.0, d_max);
  return p0 * (1.0 - dc / d_max);
}

// Spring displacement contribution of neighbour j on cell i (before the
// lambda factor): (r_ij / |r_ij|) (s - |r_ij|). Zero at rest length.
inline Point2 hooke_increment(const Point2& ri, const Point2& rj, double rest) {
  const double dx = ri.x - rj.x;
  const double dy = ri.y - rj.y;
  const double dist = std::hypot(dx, dy);
  if (dist < 1e-12) return {0.0, 0.0};
  const double coeff = (rest - dist) / dist;
  return {coeff * dx, coeff * dy};
}

namespace detail {

inline std::vector<Point2> positions_of(const BvcbmState& state) {
  std::vector<Point2> pts;
  pts.reserve(state.cells.size());
  for (const auto& c : state.cells) pts.push_back(c.pos);
  return pts;
}

// Uniform bucket grid over a subset of a step's snapshot cells, for nearest
// neighbour queries. The query takes a cutoff radius: for depth queries any
// healthy cell beyond d_max + rest leaves the division probability at exactly
// zero, so the ring search never expands past the cutoff and the per-cell
// cost stays local even when the tumour is large.
class bucket_grid {
 public:
  enum class subset { healthy_only, all };

  bucket_grid(const std::vector<BvcbmCell>& cells, std::size_t n_snapshot,
              double bucket_hint, subset which) {
    for (std::size_t i = 0; i < n_snapshot; ++i)
      if (which == subset::all || !cells[i].cancer) {
        pts_.push_back(cells[i].pos);
        cell_ids_.push_back(static_cast<int>(i));
      }
    if (pts_.empty()) return;
    min_x_ = max_x_ = pts_[0].x;
    min_y_ = max_y_ = pts_[0].y;
    for (const auto& p : pts_) {
      min_x_ = std::min(min_x_, p.x);
      max_x_ = std::max(max_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_y_ = std::max(max_y_, p.y);
    }
    const double span = std::max(max_x_ - min_x_, max_y_ - min_y_);
    bucket_ = std::max(bucket_hint, span / 2048.0);
    nx_ = static_cast<int>((max_x_ - min_x_) / bucket_) + 1;
    ny_ = static_cast<int>((max_y_ - min_y_) / bucket_) + 1;
    starts_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (const auto& p : pts_) ++starts_[flat_index(p) + 1];
    for (std::size_t b = 1; b < starts_.size(); ++b) starts_[b] += starts_[b - 1];
    ids_.resize(pts_.size());
    std::vector<int> cursor(starts_.begin(), starts_.end() - 1);
    for (std::size_t i = 0; i < pts_.size(); ++i)
      ids_[static_cast<std::size_t>(cursor[flat_index(pts_[i])]++)] =
          static_cast<int>(i);
  }

  bool empty() const { return pts_.empty(); }

  // Exact distance to the nearest stored cell whenever that distance is at
  // most r_cut; any value greater than r_cut (infinity included) may be
  // returned otherwise. Expanding Chebyshev ring search: after ring k, every
  // unscanned point is at least k * bucket away. exclude skips one cell
  // index (a cell querying its own neighbourhood).
  double nearest_within(const Point2& q, double r_cut, int exclude = -1) const {
    double best = std::numeric_limits<double>::infinity();
    if (pts_.empty()) return best;
    const int qbx = static_cast<int>(std::floor((q.x - min_x_) / bucket_));
    const int qby = static_cast<int>(std::floor((q.y - min_y_) / bucket_));
    const int k_max =
        std::max({qbx, nx_ - 1 - qbx, qby, ny_ - 1 - qby, 0});
    for (int k = 0; k <= k_max; ++k) {
      const double ring_min = (k - 1) * bucket_;
      if (k > 0 && (best <= ring_min || ring_min > r_cut)) break;
      scan_ring(q, qbx, qby, k, exclude, best);
    }
    return best;
  }

 private:
  std::size_t flat_index(const Point2& p) const {
    int bx = static_cast<int>((p.x - min_x_) / bucket_);
    int by = static_cast<int>((p.y - min_y_) / bucket_);
    bx = std::clamp(bx, 0, nx_ - 1);
    by = std::clamp(by, 0, ny_ - 1);
    return static_cast<std::size_t>(by) * nx_ + bx;
  }

  void scan_bucket(const Point2& q, int bx, int by, int exclude,
                   double& best) const {
    if (bx < 0 || bx >= nx_ || by < 0 || by >= ny_) return;
    const std::size_t b = static_cast<std::size_t>(by) * nx_ + bx;
    for (int s = starts_[b]; s < starts_[b + 1]; ++s) {
      const std::size_t e = static_cast<std::size_t>(ids_[s]);
      if (cell_ids_[e] == exclude) continue;
      const Point2& p = pts_[e];
      best = std::min(best, std::hypot(q.x - p.x, q.y - p.y));
    }
  }

  void scan_ring(const Point2& q, int qbx, int qby, int k, int exclude,
                 double& best) const {
    if (k == 0) {
      scan_bucket(q, qbx, qby, exclude, best);
      return;
    }
    for (int dx = -k; dx <= k; ++dx) {
      scan_bucket(q, qbx + dx, qby - k, exclude, best);
      scan_bucket(q, qbx + dx, qby + k, exclude, best);
    }
    for (int dy = -k + 1; dy <= k - 1; ++dy) {
      scan_bucket(q, qbx - k, qby + dy, exclude, best);
      scan_bucket(q, qbx + k, qby + dy, exclude, best);
    }
  }

  std::vector<Point2> pts_;
  std::vector<int> cell_ids_;
  std::vector<int> starts_;
  std::vector<int> ids_;
  double min_x_ = 0.0, max_x_ = 0.0, min_y_ = 0.0, max_y_ = 0.0;
  double bucket_ = 1.0;
  int nx_ = 0, ny_ = 0;
};

// Delaunay with a jitter retry for degenerate configurations.
inline DelaunayTriangulation triangulate_cells(const std::vector<Point2>& pts,
                                               Rng& rng) {
  try {
    return DelaunayTriangulation::build(pts);
  } catch (const DomainError&) {
    std::vector<Point2> jittered = pts;
    for (auto& p : jittered) {
      p.x += rng.normal(0.0, 1e-9);
      p.y += rng.normal(0.0, 1e-9);
    }
    try {
      return DelaunayTriangulation::build(jittered);
    } catch (const DomainError& e) {
      throw SimulationError(std::string("bvcbm: triangulation failed: ") +
                            e.what());
    }
  }
}

}  // namespace detail

// One step of duration dt with the given phase g_age. Division and invasion
// run over a snapshot of the step's initial cancer cells, then all positions
// (daughters included) relax mechanically. When stop_at_cancer reached during
// the birth phase the step returns early; used by grow_to_threshold to honour
// the "threshold plus at most one cell" contract.
inline bool bvcbm_step(BvcbmState& state, double g_age,
                       const BvcbmParams& params, Rng& rng,
                       std::size_t stop_at_cancer = 0) {
  if (!(g_age >= params.dt))
    throw DomainError("bvcbm_step: g_age must be at least dt");
  const double p0 = params.dt / g_age;
  const std::size_t n0 = state.cells.size();

  for (auto& c : state.cells) c.age_hours += params.dt;

  // Division over the snapshot of current cancer cells. Depth is distance to
  // the nearest healthy cell minus one rest length; beyond r_cut it clamps to
  // d_max and the division probability is exactly zero, which bounds the
  // grid search. The placement radius (nearest snapshot cell of any kind) is
  // only needed for cells that actually divide, so it is computed lazily.
  // Neither query consumes randomness: the draw sequence is one division
  // uniform per cancer cell plus one angle per division.
  const double r_cut = params.d_max + state.rest_length;
  const detail::bucket_grid healthy(state.cells, n0, state.rest_length,
                                    detail::bucket_grid::subset::healthy_only);
  std::optional<detail::bucket_grid> all_cells;
  for (std::size_t i = 0; i < n0; ++i) {
    if (!state.cells[i].cancer) continue;
    // depth inside the tumour; 0 when touching the healthy front or when no
    // healthy cells remain
    double depth = 0.0;
    if (!healthy.empty()) {
      const double nearest_healthy =
          healthy.nearest_within(state.cells[i].pos, r_cut);
      depth = std::max(0.0, nearest_healthy - state.rest_length);
    }
    const double p_d = division_probability(p0, depth, params.d_max);
    if (rng.uniform() < p_d) {
      if (!all_cells)
        all_cells.emplace(state.cells, n0, state.rest_length,
                          detail::bucket_grid::subset::all);
      const double nearest_any = all_cells->nearest_within(
          state.cells[i].pos, std::numeric_limits<double>::infinity(),
          static_cast<int>(i));
      const double r = std::isfinite(nearest_any) ? nearest_any : state.rest_length;
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      Point2 pos = state.cells[i].pos;
      pos.x += 0.5 * r * std::cos(angle);
      pos.y += 0.5 * r * std::sin(angle);
      state.cells.push_back({pos, true, 0.0});
      state.cells[i].age_hours = 0.0;
      ++state.n_cancer;
      if (stop_at_cancer && state.n_cancer >= stop_at_cancer) return true;
    }
  }

  // Invasion: convert a Delaunay-adjacent healthy cell with probability
  // p_psc. The triangulation is built lazily; with p_psc ~ 1e-5 this branch
  // almost never runs.
  std::optional<DelaunayTriangulation> inv_tri;
  for (std::size_t i = 0; i < n0; ++i) {
    if (!state.cells[i].cancer) continue;
    if (rng.uniform() >= params.p_psc) continue;
    if (!inv_tri) {
      std::vector<Point2> pts0(n0);
      for (std::size_t k = 0; k < n0; ++k) pts0[k] = state.cells[k].pos;
      inv_tri.emplace(detail::triangulate_cells(pts0, rng));
    }
    std::vector<int> healthy_nbrs;
    for (int j : inv_tri->adjacency()[i])
      if (!state.cells[j].cancer) healthy_nbrs.push_back(j);
    if (healthy_nbrs.empty()) continue;
    const int victim =
        healthy_nbrs[rng.uniform_int(healthy_nbrs.size())];
    state.cells[victim].cancer = true;
    state.cells[victim].age_hours = 0.0;
    ++state.n_cancer;
    if (stop_at_cancer && state.n_cancer >= stop_at_cancer) return true;
  }

  // Synchronous Hooke relaxation over Delaunay neighbours of all cells.
  const auto tri = detail::triangulate_cells(detail::positions_of(state), rng);
  const auto& adj = tri.adjacency();
  std::vector<Point2> delta(state.cells.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < state.cells.size(); ++i) {
    for (int j : adj[i]) {
      const Point2 inc =
          hooke_increment(state.cells[i].pos, state.cells[j].pos, state.rest_length);
      delta[i].x += inc.x;
      delta[i].y += inc.y;
    }
  }
  for (std::size_t i = 0; i < state.cells.size(); ++i) {
    state.cells[i].pos.x += params.lambda * delta[i].x;
    state.cells[i].pos.y += params.lambda * delta[i].y;
  }
  return false;
}

// Grows from the hexagonal seed until cancer area reaches 100 mm^2. The
// threshold is checked after every individual birth, so the final area is in
// [100, 100 + cell_area).
inline BvcbmState grow_to_threshold(const BvcbmParams& params, double g_age,
                                    int n_rings, std::uint64_t seed,
                                    double target_area = 100.0) {
  BvcbmState state = init_hexagonal(n_rings);
  Rng rng(seed);
  const double quotient = target_area / params.cell_area;
  const std::size_t target_cells =
      static_cast<std::size_t>(std::ceil(quotient * (1.0 - 1e-12)));
  if (state.n_cancer >= target_cells) return state;
  for (std::size_t step = 0; step < 1000000; ++step) {
    if (bvcbm_step(state, g_age, params, rng, target_cells)) return state;
  }
  throw BudgetError("grow_to_threshold: 1e6 steps without reaching area");
}

// Biphasic run from a prepared initial configuration: g_age_1 before hour
// tau, g_age_2 from hour tau on. Area recorded at the start of each day;
// trajectory length equals days.
inline std::vector<double> simulate_biphasic(const BvcbmState& initial,
                                             double g_age_1, double tau_hours,
                                             double g_age_2, int days,
                                             const BvcbmParams& params,
                                             std::uint64_t seed) {
  if (days < 1) throw DomainError("simulate_biphasic: days >= 1");
  BvcbmState state = initial;
  Rng rng(seed);
  std::vector<double> trajectory;
  trajectory.reserve(days);
  const int hours = 24 * days;
  for (int h = 0; h < hours; ++h) {
    if (h % 24 == 0)
      trajectory.push_back(static_cast<double>(state.n_cancer) * params.cell_area);
    if (params.max_cells > 0 && state.cells.size() >= params.max_cells)
      continue;  // saturated: area frozen for the remaining days
    const double g = (static_cast<double>(h) < tau_hours) ? g_age_1 : g_age_2;
    bvcbm_step(state, g, params, rng);
  }
  return trajectory;
}

struct BvcbmModelConfig {
  int days = 32;
  int n_rings = 60;
  double cell_area = 0.01;
  double growth_g_age = 24.0;     // phase used only to reach the 100 mm^2 start
  std::uint64_t growth_seed = 1;  // shared across all simulations of a model
  double dt = 1.0;
  double d_max = 3.0;
  double lambda = 0.1;
  double p_psc = 1e-5;
  double target_area = 100.0;
  std::size_t max_cells = 0;  // see BvcbmParams::max_cells
};

// SimulatorModel over theta = (g_age_1 [hours], tau [days], g_age_2 [hours]).
// The 100 mm^2 starting configuration is grown once (growth_seed) and shared
// by every simulation, so inference runs branch from a common initial state.
class BvcbmModel {
 public:
  explicit BvcbmModel(BvcbmModelConfig config) : config_(config) {
    if (config_.days < 1) throw DomainError("bvcbm model: days >= 1");
    const double hi = 24.0 * config_.days;
    prior_ = PriorSpec::uniform_box({2.0, 1.0, 2.0},
                                    {hi, static_cast<double>(config_.days), hi});
  }

  std::size_t param_dim() const { return 3; }
  std::size_t summary_dim() const { return static_cast<std::size_t>(config_.days); }
  const PriorSpec& prior() const { return prior_; }
  const BvcbmModelConfig& config() const { return config_; }

  SummaryVector simulate_summary(const ParamVector& theta,
                                 std::uint64_t seed) const {
    if (theta.size() != 3)
      throw DimensionError("bvcbm model: theta must be (g_age_1, tau, g_age_2)");
    const BvcbmState& start = initial_state();
    return simulate_biphasic(start, theta[0], 24.0 * theta[1], theta[2],
                             config_.days, params(), seed);
  }

  const BvcbmState& initial_state() const {
    std::call_once(grow_once_, [this] {
      initial_ = grow_to_threshold(params(), config_.growth_g_age,
                                   config_.n_rings, config_.growth_seed,
                                   config_.target_area);
    });
    return initial_;
  }

  BvcbmParams params() const {
    BvcbmParams p;
    p.dt = config_.dt;
    p.cell_area = config_.cell_area;
    p.d_max = config_.d_max;
    p.lambda = config_.lambda * config_.dt;
    p.p_psc = config_.p_psc;
    p.max_cells = config_.max_cells;
    return p;
  }

 private:
  BvcbmModelConfig config_;
  PriorSpec prior_;
  mutable std::once_flag grow_once_;
  mutable BvcbmState initial_;
};

}  // namespace sbikit
