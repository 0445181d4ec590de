#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sbikit/sim/bvcbm.hpp"
#include "test_util.hpp"

using namespace sbikit;

namespace {

// Small calibration used throughout: 25 cells reach the 100 mm^2 threshold.
BvcbmModelConfig small_config() {
  BvcbmModelConfig c;
  c.days = 32;
  c.n_rings = 5;
  c.cell_area = 4.0;
  c.d_max = 0.75;
  c.max_cells = 2000;
  c.growth_g_age = 12.0;
  c.growth_seed = 3;
  return c;
}

}  // namespace

TEST_CASE("hexagonal init: ring counts and geometry") {
  const auto s1 = init_hexagonal(1);
  REQUIRE(s1.cells.size() == 7);
  REQUIRE(s1.n_cancer == 1);
  REQUIRE(s1.cells[0].cancer);
  for (std::size_t i = 1; i < 7; ++i) {
    REQUIRE_FALSE(s1.cells[i].cancer);
    const double d = std::hypot(s1.cells[i].pos.x - s1.cells[0].pos.x,
                                s1.cells[i].pos.y - s1.cells[0].pos.y);
    REQUIRE(d == Catch::Approx(1.0).margin(1e-12));
  }

  REQUIRE(init_hexagonal(2).cells.size() == 19);
  REQUIRE(init_hexagonal(4).cells.size() == 1 + 3 * 4 * 5);

  // nearest-neighbour distance equals the lattice constant everywhere
  const auto s3 = init_hexagonal(3);
  for (std::size_t i = 0; i < s3.cells.size(); ++i) {
    double nn = 1e9;
    for (std::size_t j = 0; j < s3.cells.size(); ++j) {
      if (i == j) continue;
      nn = std::min(nn, std::hypot(s3.cells[i].pos.x - s3.cells[j].pos.x,
                                   s3.cells[i].pos.y - s3.cells[j].pos.y));
    }
    REQUIRE(nn == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("division probability endpoints and clamping") {
  const double p0 = 1.0 / 24.0;
  REQUIRE(division_probability(p0, 0.0, 3.0) == Catch::Approx(p0));
  REQUIRE(division_probability(p0, 3.0, 3.0) == 0.0);
  REQUIRE(division_probability(p0, 99.0, 3.0) == 0.0);  // clamped beyond d_max
  REQUIRE(division_probability(p0, 1.5, 3.0) == Catch::Approx(0.5 * p0));
  REQUIRE_THROWS_AS(division_probability(p0, 1.0, 0.0), DomainError);
}

TEST_CASE("hooke displacement vanishes at rest length") {
  REQUIRE(hooke_increment({0, 0}, {1, 0}, 1.0).x == 0.0);
  REQUIRE(hooke_increment({0, 0}, {1, 0}, 1.0).y == 0.0);
  // compressed pair pushes apart, stretched pair pulls together
  REQUIRE(hooke_increment({0, 0}, {0.5, 0}, 1.0).x < 0.0);
  REQUIRE(hooke_increment({0, 0}, {2.0, 0}, 1.0).x > 0.0);
}

TEST_CASE("equilateral triangle at rest length is mechanically stable") {
  BvcbmState state;
  state.rest_length = 1.0;
  state.cells.push_back({{0.0, 0.0}, true, 0.0});
  state.cells.push_back({{1.0, 0.0}, false, 0.0});
  state.cells.push_back({{0.5, std::sqrt(3.0) / 2.0}, false, 0.0});
  const auto before = state.cells;
  BvcbmParams params;
  params.p_psc = 0.0;
  Rng rng(5);
  // huge g_age: division probability ~ 0 so only mechanics act
  bvcbm_step(state, 1e9, params, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(state.cells[i].pos.x == Catch::Approx(before[i].pos.x).margin(1e-9));
    REQUIRE(state.cells[i].pos.y == Catch::Approx(before[i].pos.y).margin(1e-9));
  }
}

TEST_CASE("growth reaches the area threshold with at most one extra cell") {
  const auto cfg = small_config();
  BvcbmParams params;
  params.cell_area = cfg.cell_area;
  const auto state =
      grow_to_threshold(params, cfg.growth_g_age, cfg.n_rings, 17);
  REQUIRE(state.n_cancer == 25);  // 100 / 4.0 exactly
  const double area = state.n_cancer * params.cell_area;
  REQUIRE(area >= 100.0);
  REQUIRE(area < 100.0 + params.cell_area);
}

TEST_CASE("cancer count is non-decreasing and healthy count fixed at p_psc=0") {
  BvcbmParams params;
  params.cell_area = 4.0;
  params.p_psc = 0.0;
  BvcbmState state = init_hexagonal(4);
  Rng rng(9);
  std::size_t prev_cancer = state.n_cancer;
  const auto count_healthy = [&] {
    std::size_t h = 0;
    for (const auto& c : state.cells)
      if (!c.cancer) ++h;
    return h;
  };
  const std::size_t healthy0 = count_healthy();
  for (int step = 0; step < 60; ++step) {
    bvcbm_step(state, 6.0, params, rng);
    REQUIRE(state.n_cancer >= prev_cancer);
    prev_cancer = state.n_cancer;
    REQUIRE(count_healthy() == healthy0);
  }
  REQUIRE(state.n_cancer > 1);  // growth actually happened at g_age = 6
}

TEST_CASE("smaller g_age reaches the threshold in fewer steps on average") {
  BvcbmParams params;
  params.cell_area = 4.0;
  auto steps_to_50 = [&](double g_age, std::uint64_t seed) {
    BvcbmState state = init_hexagonal(5);
    Rng rng(seed);
    int steps = 0;
    while (state.n_cancer < 50 && steps < 100000) {
      bvcbm_step(state, g_age, params, rng);
      ++steps;
    }
    return steps;
  };
  double fast = 0, slow = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    fast += steps_to_50(6.0, 100 + s);
    slow += steps_to_50(20.0, 100 + s);
  }
  REQUIRE(fast / 20.0 < slow / 20.0);
}

TEST_CASE("biphasic trajectory contract: length, start, reproducibility") {
  BvcbmModel model(small_config());
  const ParamVector theta = {300.0, 16.0, 100.0};
  const auto t1 = model.simulate_summary(theta, 42);
  REQUIRE(t1.size() == 32);
  REQUIRE(t1[0] >= 100.0);
  REQUIRE(t1[0] < 100.0 + model.config().cell_area);
  for (double a : t1) REQUIRE(a > 0.0);

  const auto t2 = model.simulate_summary(theta, 42);
  REQUIRE(t1 == t2);  // bit-identical

  const auto t3 = model.simulate_summary(theta, 43);
  REQUIRE(t1 != t3);  // different randomness actually used
}

TEST_CASE("vacuous phase switch: equal g_age makes tau irrelevant") {
  BvcbmModel model(small_config());
  const auto a = model.simulate_summary({150.0, 4.0, 150.0}, 7);
  const auto b = model.simulate_summary({150.0, 28.0, 150.0}, 7);
  REQUIRE(a == b);
}

TEST_CASE("tau = days means the second phase never runs") {
  BvcbmModel model(small_config());
  // g_age_2 wildly different but unreachable when tau = days
  const auto a = model.simulate_summary({150.0, 32.0, 150.0}, 11);
  const auto b = model.simulate_summary({150.0, 32.0, 3.0}, 11);
  REQUIRE(a == b);
}

TEST_CASE("paper configuration shows faster growth after the switch") {
  // theta = (300, 16, 100) over 32 days: mean daily growth in days 17..32
  // exceeds that of days 1..16, averaged over 20 seeds.
  BvcbmModel model(small_config());
  double pre = 0.0, post = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto traj = model.simulate_summary({300.0, 16.0, 100.0}, 1000 + seed);
    pre += (traj[15] - traj[0]) / 15.0;
    post += (traj[31] - traj[15]) / 16.0;
  }
  REQUIRE(post / 20.0 > pre / 20.0);
}

TEST_CASE("model prior matches the experiment-length bounds") {
  BvcbmModel model(small_config());
  const auto& prior = model.prior();
  REQUIRE(prior.dim() == 3);
  REQUIRE(model.summary_dim() == 32);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto theta = prior.sample(rng);
    REQUIRE(theta[0] >= 2.0);
    REQUIRE(theta[0] <= 768.0);
    REQUIRE(theta[1] >= 1.0);
    REQUIRE(theta[1] <= 32.0);
    REQUIRE(theta[2] >= 2.0);
    REQUIRE(theta[2] <= 768.0);
  }
}

TEST_CASE("shared initial state across simulations of one model") {
  BvcbmModel model(small_config());
  const auto a = model.simulate_summary({100.0, 10.0, 100.0}, 1);
  const auto b = model.simulate_summary({700.0, 30.0, 700.0}, 2);
  REQUIRE(a[0] == b[0]);  // both start from the cached configuration
}
