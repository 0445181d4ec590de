#pragma once

// Hexagonal-lattice stochastic cell-invasion simulator.
//
// Cells live on a width x height hex lattice (odd-r offset storage, unit site
// spacing) and carry a three-phase cycle: red -> yellow -> green -> red. Each
// cell contributes propensity R_phase + M_phase; the Gillespie algorithm
// draws exponential inter-event times at the total propensity and picks the
// event proportionally. Movement targets one of the 6 neighbours uniformly
// and aborts (time still advances) when the target is occupied or
// off-lattice. The green -> red transition divides: the parent turns red and
// a red daughter appears at a uniformly chosen empty neighbour; with no empty
// neighbour the whole event aborts and the cell stays green, so a full
// lattice stalls proliferation rather than erroring. Summary families:
// per-phase counts (3), counts + per-phase mean travel distance per residency
// (6), counts + per-phase-per-side median and IQR of lateral position (15).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/prior.hpp"
#include "sbikit/core/rng.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/core/types.hpp"

namespace sbikit {

enum class CellPhase : std::uint8_t { red = 0, yellow = 1, green = 2 };

inline const char* phase_name(CellPhase p) {
  switch (p) {
    case CellPhase::red: return "red";
    case CellPhase::yellow: return "yellow";
    default: return "green";
  }
}

// theta = (R_r, R_y, R_g, M_r, M_y, M_g): per-hour transition and movement
// rates, prior support [0,1]^3 x [0,10]^3.
struct InvasionParams {
  double transition[3] = {0.0, 0.0, 0.0};
  double movement[3] = {0.0, 0.0, 0.0};

  static InvasionParams from_theta(const ParamVector& theta) {
    if (theta.size() != 6)
      throw DimensionError(
          "invasion params: theta must be (R_r, R_y, R_g, M_r, M_y, M_g)");
    InvasionParams p;
    for (int i = 0; i < 3; ++i) {
      p.transition[i] = theta[static_cast<std::size_t>(i)];
      p.movement[i] = theta[static_cast<std::size_t>(i) + 3];
    }
    p.validate();
    return p;
  }

  void validate() const {
    for (int i = 0; i < 3; ++i) {
      if (!(transition[i] >= 0.0) || !std::isfinite(transition[i]))
        throw DomainError("invasion params: transition rates must be >= 0");
      if (!(movement[i] >= 0.0) || !std::isfinite(movement[i]))
        throw DomainError("invasion params: movement rates must be >= 0");
    }
  }
};

struct InvasionCell {
  int site;
  CellPhase phase;
  double dist_phase;        // successful moves since entering current phase
  double phase_entry_time;  // hours
};

// Occupancy grid plus the scratch geometry needed by the density summary.
struct InvasionState {
  int width = 0;
  int height = 0;
  int scratch_lo = 0;     // first scratch column
  int scratch_width = 0;  // scratch column count
  std::vector<int> occupant;  // site -> cell index, -1 empty
  std::vector<InvasionCell> cells;

  int site_of(int col, int row) const { return row * width + col; }

  // odd-r offset -> physical coordinates, unit site spacing
  std::array<double, 2> site_xy(int site) const {
    const int row = site / width;
    const int col = site % width;
    return {col + 0.5 * (row & 1), row * std::numbers::sqrt3 / 2.0};
  }

  double lateral_of(int site) const { return site_xy(site)[0]; }
};

namespace detail {

// Neighbour in direction d (0..5) of an odd-r offset site, or -1 off-lattice.
inline int hex_neighbor(const InvasionState& state, int site, int d) {
  const int row = site / state.width;
  const int col = site % state.width;
  const int odd = row & 1;
  static constexpr int col_off[2][6] = {
      {+1, -1, 0, -1, 0, -1},  // even rows: E W NE NW SE SW
      {+1, -1, +1, 0, +1, 0},  // odd rows
  };
  static constexpr int row_off[6] = {0, 0, -1, -1, +1, +1};
  const int nc = col + col_off[odd][d];
  const int nr = row + row_off[d];
  if (nc < 0 || nc >= state.width || nr < 0 || nr >= state.height) return -1;
  return state.site_of(nc, nr);
}

}  // namespace detail

struct InvasionConfig {
  int width = 200;
  int height = 200;
  double density = 0.3;           // Bernoulli occupancy in the two bands
  int scratch_width = -1;         // -1: one third of width, rounded
  double phase_proportions[3] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double horizon = 48.0;          // hours
  bool record_events = false;

  int effective_scratch_width() const {
    return scratch_width >= 0
               ? scratch_width
               : static_cast<int>(std::lround(width / 3.0));
  }

  void validate() const {
    std::vector<std::string> problems;
    if (width < 1 || height < 1)
      problems.push_back("invasion: lattice dimensions must be positive");
    if (!(density >= 0.0 && density <= 1.0))
      problems.push_back("invasion: density must lie in [0, 1]");
    if (effective_scratch_width() < 0 || effective_scratch_width() >= width)
      problems.push_back("invasion: scratch width must be < lattice width");
    double total = 0.0;
    for (double p : phase_proportions) {
      if (!(p >= 0.0)) problems.push_back("invasion: phase proportions must be >= 0");
      total += p;
    }
    if (!(std::abs(total - 1.0) < 1e-9))
      problems.push_back("invasion: phase proportions must sum to 1");
    if (!(horizon > 0.0))
      problems.push_back("invasion: horizon must be positive");
    if (!problems.empty()) throw ConfigError(problems);
  }
};

// Two occupied bands astride an empty central scratch. Each band site is
// occupied independently with the configured density, phases drawn from the
// configured proportions.
inline InvasionState init_scratch(const InvasionConfig& config, Rng& rng) {
  config.validate();
  InvasionState state;
  state.width = config.width;
  state.height = config.height;
  state.scratch_width = config.effective_scratch_width();
  state.scratch_lo = (config.width - state.scratch_width) / 2;
  state.occupant.assign(
      static_cast<std::size_t>(config.width) * config.height, -1);
  const double p_r = config.phase_proportions[0];
  const double p_y = config.phase_proportions[1];
  for (int row = 0; row < config.height; ++row)
    for (int col = 0; col < config.width; ++col) {
      if (col >= state.scratch_lo && col < state.scratch_lo + state.scratch_width)
        continue;
      if (rng.uniform() >= config.density) continue;
      const double u = rng.uniform();
      const CellPhase phase = u < p_r               ? CellPhase::red
                              : u < p_r + p_y       ? CellPhase::yellow
                                                    : CellPhase::green;
      const int site = state.site_of(col, row);
      state.occupant[static_cast<std::size_t>(site)] =
          static_cast<int>(state.cells.size());
      state.cells.push_back({site, phase, 0.0, 0.0});
    }
  if (state.cells.empty())
    throw SimulationError("init_scratch: zero cells seeded");
  return state;
}

enum class InvasionEventKind : std::uint8_t {
  move = 0,
  move_blocked = 1,
  transition = 2,   // red->yellow or yellow->green
  divide = 3,       // green->red with daughter placed
  divide_blocked = 4,
};

struct InvasionEvent {
  double time;
  int cell;
  int from_site;
  int to_site;  // move target / daughter site; -1 when none
  InvasionEventKind kind;
};

struct InvasionResult {
  InvasionState state;
  double residency_dist_sum[3] = {0.0, 0.0, 0.0};
  std::size_t residency_count[3] = {0, 0, 0};
  std::size_t n_events = 0;  // blocked attempts included
  std::vector<InvasionEvent> events;  // filled when record_events
};

// Exact stochastic simulation to the horizon. Residency bookkeeping: every
// stay of a cell in a phase, whether ended by a transition or truncated by
// the horizon, contributes its travelled distance to that phase's mean.
inline InvasionResult gillespie_run(const InvasionState& initial,
                                    const InvasionParams& params,
                                    double horizon, Rng& rng,
                                    bool record_events = false) {
  params.validate();
  if (!(horizon > 0.0)) throw DomainError("gillespie_run: horizon > 0");
  if (initial.cells.empty())
    throw SimulationError("gillespie_run: at least one cell required");
  InvasionResult result;
  result.state = initial;
  InvasionState& state = result.state;

  // per-phase member lists; each cell knows its slot for swap-removal
  std::array<std::vector<int>, 3> members;
  std::vector<int> slot(state.cells.size());
  auto add_member = [&](int cell) {
    auto& list = members[static_cast<std::size_t>(state.cells[cell].phase)];
    slot[static_cast<std::size_t>(cell)] = static_cast<int>(list.size());
    list.push_back(cell);
  };
  auto remove_member = [&](int cell) {
    auto& list = members[static_cast<std::size_t>(state.cells[cell].phase)];
    const int s = slot[static_cast<std::size_t>(cell)];
    list[static_cast<std::size_t>(s)] = list.back();
    slot[static_cast<std::size_t>(list.back())] = s;
    list.pop_back();
  };
  for (std::size_t i = 0; i < state.cells.size(); ++i)
    add_member(static_cast<int>(i));

  const auto weight = [&params](int ph) {
    return params.transition[ph] + params.movement[ph];
  };

  auto log_event = [&](double t, int cell, int from, int to,
                       InvasionEventKind kind) {
    ++result.n_events;
    if (record_events) result.events.push_back({t, cell, from, to, kind});
  };

  double t = 0.0;
  for (;;) {
    double total = 0.0;
    for (int ph = 0; ph < 3; ++ph)
      total += static_cast<double>(members[static_cast<std::size_t>(ph)].size()) *
               weight(ph);
    if (!(total > 0.0)) break;  // frozen configuration
    t += rng.exponential(total);
    if (t > horizon) break;

    // phase bucket proportional to count * weight, then a uniform member
    int ph = 2;
    double u = rng.uniform() * total;
    for (int k = 0; k < 2; ++k) {
      const double block =
          static_cast<double>(members[static_cast<std::size_t>(k)].size()) *
          weight(k);
      if (u < block) {
        ph = k;
        break;
      }
      u -= block;
    }
    const auto& list = members[static_cast<std::size_t>(ph)];
    const int cell = list[rng.uniform_int(list.size())];
    InvasionCell& c = state.cells[static_cast<std::size_t>(cell)];

    const bool is_transition =
        rng.uniform() * weight(ph) < params.transition[ph];
    if (!is_transition) {
      const int target = detail::hex_neighbor(state, c.site, static_cast<int>(rng.uniform_int(6)));
      if (target < 0 || state.occupant[static_cast<std::size_t>(target)] >= 0) {
        log_event(t, cell, c.site, target, InvasionEventKind::move_blocked);
        continue;
      }
      state.occupant[static_cast<std::size_t>(target)] = cell;
      state.occupant[static_cast<std::size_t>(c.site)] = -1;
      log_event(t, cell, c.site, target, InvasionEventKind::move);
      c.site = target;
      c.dist_phase += 1.0;
      continue;
    }

    if (c.phase != CellPhase::green) {
      // red -> yellow or yellow -> green
      const int old_ph = static_cast<int>(c.phase);
      result.residency_dist_sum[old_ph] += c.dist_phase;
      ++result.residency_count[old_ph];
      remove_member(cell);
      c.phase = static_cast<CellPhase>(old_ph + 1);
      c.dist_phase = 0.0;
      c.phase_entry_time = t;
      add_member(cell);
      log_event(t, cell, c.site, -1, InvasionEventKind::transition);
      continue;
    }

    // green -> red divides; aborted outright when no empty neighbour
    int empties[6];
    int n_empty = 0;
    for (int d = 0; d < 6; ++d) {
      const int nb = detail::hex_neighbor(state, c.site, d);
      if (nb >= 0 && state.occupant[static_cast<std::size_t>(nb)] < 0)
        empties[n_empty++] = nb;
    }
    if (n_empty == 0) {
      log_event(t, cell, c.site, -1, InvasionEventKind::divide_blocked);
      continue;
    }
    const int daughter_site =
        empties[rng.uniform_int(static_cast<std::size_t>(n_empty))];
    result.residency_dist_sum[2] += c.dist_phase;
    ++result.residency_count[2];
    remove_member(cell);
    c.phase = CellPhase::red;
    c.dist_phase = 0.0;
    c.phase_entry_time = t;
    add_member(cell);
    const int daughter = static_cast<int>(state.cells.size());
    state.occupant[static_cast<std::size_t>(daughter_site)] = daughter;
    state.cells.push_back({daughter_site, CellPhase::red, 0.0, t});
    slot.push_back(0);
    add_member(daughter);
    log_event(t, cell, state.cells[static_cast<std::size_t>(cell)].site,
              daughter_site, InvasionEventKind::divide);
  }

  // truncated residencies at the horizon
  for (const auto& c : state.cells) {
    result.residency_dist_sum[static_cast<std::size_t>(c.phase)] += c.dist_phase;
    ++result.residency_count[static_cast<std::size_t>(c.phase)];
  }
  return result;
}

// (n_red, n_yellow, n_green)
inline SummaryVector summarize_counts(const InvasionState& state) {
  SummaryVector counts(3, 0.0);
  for (const auto& c : state.cells)
    counts[static_cast<std::size_t>(c.phase)] += 1.0;
  return counts;
}

// counts + per-phase mean travelled distance over residencies, order
// (n_r, n_y, n_g, dist_r, dist_y, dist_g).
inline SummaryVector summarize_trajectory(const InvasionResult& result) {
  SummaryVector out = summarize_counts(result.state);
  for (int ph = 0; ph < 3; ++ph) {
    if (result.residency_count[ph] == 0)
      throw DegenerateSummaryError(
          std::string("summarize_trajectory: no residency observed for ") +
          phase_name(static_cast<CellPhase>(ph)));
    out.push_back(result.residency_dist_sum[ph] /
                  static_cast<double>(result.residency_count[ph]));
  }
  return out;
}

// counts + for each phase x side (left, right of the scratch midline) the
// median and IQR of lateral positions, order (n_r, n_y, n_g, then
// (median, iqr) for red-left, red-right, yellow-left, yellow-right,
// green-left, green-right).
inline SummaryVector summarize_density(const InvasionState& state) {
  SummaryVector out = summarize_counts(state);
  const double midline =
      static_cast<double>(state.scratch_lo) + state.scratch_width / 2.0;
  std::array<std::vector<double>, 6> groups;  // phase * 2 + side
  for (const auto& c : state.cells) {
    const double lat = state.lateral_of(c.site);
    const std::size_t side = lat < midline ? 0 : 1;
    groups[static_cast<std::size_t>(c.phase) * 2 + side].push_back(lat);
  }
  for (int ph = 0; ph < 3; ++ph)
    for (int side = 0; side < 2; ++side) {
      auto& g = groups[static_cast<std::size_t>(ph) * 2 +
                       static_cast<std::size_t>(side)];
      if (g.empty())
        throw DegenerateSummaryError(
            std::string("summarize_density: no ") +
            phase_name(static_cast<CellPhase>(ph)) + " cells on the " +
            (side == 0 ? "left" : "right") + " side");
      out.push_back(median(g));
      out.push_back(iqr(g));
    }
  return out;
}

enum class InvasionSummaryFamily { counts, trajectory, density };

inline std::size_t summary_family_dim(InvasionSummaryFamily family) {
  switch (family) {
    case InvasionSummaryFamily::counts: return 3;
    case InvasionSummaryFamily::trajectory: return 6;
    default: return 15;
  }
}

inline std::string summary_family_name(InvasionSummaryFamily family) {
  switch (family) {
    case InvasionSummaryFamily::counts: return "counts";
    case InvasionSummaryFamily::trajectory: return "trajectory";
    default: return "density";
  }
}

// SimulatorModel over theta = (R_r, R_y, R_g, M_r, M_y, M_g). Every
// simulation draws a fresh scratch seeding from its own seed, then runs the
// Gillespie dynamics to the horizon; the initial plate is part of the
// stochastic data-generating process.
class InvasionModel {
 public:
  explicit InvasionModel(
      InvasionConfig config,
      InvasionSummaryFamily family = InvasionSummaryFamily::counts)
      : config_(config), family_(family) {
    config_.validate();
    prior_ = PriorSpec::uniform_box({0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                                    {1.0, 1.0, 1.0, 10.0, 10.0, 10.0});
  }

  std::size_t param_dim() const { return 6; }
  std::size_t summary_dim() const { return summary_family_dim(family_); }
  const PriorSpec& prior() const { return prior_; }
  const InvasionConfig& config() const { return config_; }
  InvasionSummaryFamily family() const { return family_; }

  SummaryVector simulate_summary(const ParamVector& theta,
                                 std::uint64_t seed) const {
    const InvasionParams params = InvasionParams::from_theta(theta);
    Rng rng(seed);
    const InvasionState initial = init_scratch(config_, rng);
    const InvasionResult result =
        gillespie_run(initial, params, config_.horizon, rng);
    switch (family_) {
      case InvasionSummaryFamily::counts: return summarize_counts(result.state);
      case InvasionSummaryFamily::trajectory: return summarize_trajectory(result);
      default: return summarize_density(result.state);
    }
  }

 private:
  InvasionConfig config_;
  InvasionSummaryFamily family_;
  PriorSpec prior_;
};

}  // namespace sbikit
