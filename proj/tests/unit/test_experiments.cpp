#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "srb/experiments.hpp"
#include "srb/maps.hpp"

using namespace srb;
using doctest::Approx;

TEST_CASE("Birkhoff density of the doubling product") {
  const auto p = SkewMapParams::doubling_product();
  const auto g = Grid::for_map(p, 4, 4);
  const int orbits = 200, length = 1100, burn = 100;
  const auto a = birkhoff_density(p, orbits, length, burn, g, 1);
  REQUIRE(a.samples == static_cast<std::size_t>(orbits) * (length - burn));
  CHECK(a.escaped_orbits == 0);
  CHECK(a.density.mass() == Approx(1.0));

  const double n = static_cast<double>(a.samples);
  const double pc = 1.0 / 16;
  const double sigma = std::sqrt((1 - pc) / (pc * n));
  for (double v : a.density.values()) CHECK(std::abs(v - 1.0) < 4 * sigma);

  // two independent estimates differ by about sum_cells sqrt(4p/(pi N))
  const auto b = birkhoff_density(p, orbits, length, burn, g, 2);
  const double floor = 16 * std::sqrt(4 * pc / (std::numbers::pi * n));
  CHECK(l1_distance(a.density, b.density) <= 2 * floor);
  CHECK(l1_distance(a.density, birkhoff_density(p, orbits, length, burn, g, 1).density) == 0.0);
}

TEST_CASE("stability sweep on a small grid") {
  const auto base = SkewMapParams::viana(16, 1.7, 0.01);
  PipelineConfig cfg;
  cfg.n_theta = 16;
  cfg.n_x = 32;
  cfg.subsamples = 64;
  cfg.birkhoff_orbits = 50;
  cfg.birkhoff_length = 1100;
  cfg.tol = 1e-9;
  const std::vector<double> deltas{0.0, 1e-2, 1e-1};
  const auto r = stability_sweep(base, deltas, cfg);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].l1 == 0.0);
  for (const auto& e : r.entries) {
    CHECK(e.error.empty());
    CHECK(e.residual < 1e-9);
    CHECK(e.l1 <= 2.0);
    CHECK(e.birkhoff_crosscheck < 0.5);
  }
  CHECK(r.entries[2].l1 > r.entries[1].l1);

  const std::vector<double> no_zero{1e-2};
  CHECK_THROWS_AS(stability_sweep(base, no_zero, cfg), ValidationError);

  const auto dom = sweep_domain(base, deltas);
  CHECK(dom.lo < base.domain().lo);
  CHECK(dom.hi > base.domain().hi);
  CHECK(sweep_direction(0.5).amplitude == 0.5);
}

TEST_CASE("exceptional set estimate") {
  const auto p = SkewMapParams::viana(16, 1.9, 0.01);
  const std::vector<int> ns{1, 2, 3, 4, 6, 8};
  const auto r = estimate_exceptional_measure(p, ns, 20000, HyperbolicParams{}, 3);
  REQUIRE(r.entries.size() == ns.size());
  CHECK(r.entries[0].count == 0);
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(r.entries[i].fraction >= 0.0);
    CHECK(r.entries[i].fraction <= 1.0);
    if (i > 0) CHECK(r.entries[i].isotonic <= r.entries[i - 1].isotonic);
  }
  CHECK(r.entries[1].count > 0);

  // G_1 is empty, so every bin is zero
  const std::vector<int> only_one{1};
  const auto empty = estimate_exceptional_measure(p, only_one, 1000, HyperbolicParams{}, 3);
  CHECK_FALSE(empty.fitted);
  CHECK_FALSE(empty.notice.empty());
  CHECK_THROWS_AS(estimate_exceptional_measure(p, ns, 999, HyperbolicParams{}, 3), ValidationError);
  CHECK_THROWS_AS(estimate_exceptional_measure(SkewMapParams::viana(16, 1.9, 0.0), ns, 1000, HyperbolicParams{}, 3),
                  ValidationError);
}

TEST_CASE("isotonic regression and weighted line fit") {
  const std::vector<double> v{3.0, 1.0, 2.0};
  const auto iso = isotonic_nonincreasing(v);
  CHECK(iso == std::vector<double>{3.0, 1.5, 1.5});
  const std::vector<double> w{1.0, 1.0, 3.0};
  const auto wiso = isotonic_nonincreasing(v, w);
  CHECK(wiso[1] == Approx(1.75));
  CHECK(wiso[2] == Approx(1.75));
  const std::vector<double> mono{5.0, 4.0, 4.0, 1.0};
  CHECK(isotonic_nonincreasing(mono) == mono);

  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> y{1.0, 3.0, 5.0, 7.0};
  const std::vector<double> ones(4, 1.0);
  const auto f = weighted_line_fit(x, y, ones);
  CHECK(f.intercept == Approx(1.0));
  CHECK(f.slope == Approx(2.0));
  CHECK(f.r_squared == Approx(1.0));
  const std::vector<double> same{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(weighted_line_fit(same, y, ones), ValidationError);
}

TEST_CASE("recovery depth") {
  const auto p = SkewMapParams::viana(16, 1.9, 0.01);
  // lands on the critical line after one step and re-enters the strip
  CHECK_FALSE(recovery_depth(p, {0.0, std::sqrt(p.a(0.0))}, 0.1, 1000).has_value());

  const auto small = estimate_recovery_depth(p, 2000, 0.1, 4);
  const auto large = estimate_recovery_depth(p, 4000, 0.1, 4);
  CHECK(small.samples == 2000);
  CHECK(small.censored < small.samples);
  CHECK(std::abs(small.median - large.median) <= 1.0);
  CHECK(small.log_ratio == Approx(small.median / std::log(100.0)));
  for (int d : small.depths) CHECK(d >= 1);
}

TEST_CASE("fiber image and growth") {
  const auto img = fiber_image(1.0, {-0.5, 1.0});
  CHECK(img.lo == Approx(0.0));
  CHECK(img.hi == Approx(1.0));
  const auto pos = fiber_image(1.0, {0.5, 1.0});
  CHECK(pos.lo == Approx(0.0));
  CHECK(pos.hi == Approx(0.75));

  const auto p = SkewMapParams::viana(16, 1.9, 0.0);
  const auto I = p.domain();
  for (const auto& s : lambda_section(p, 0.3)) {
    CHECK(s.lo >= I.lo - 1e-12);
    CHECK(s.hi <= I.hi + 1e-12);
  }

  const auto whole = fiber_growth(p, 0.37, {I.lo, I.hi}, 0.1, 2);
  REQUIRE(whole.cover_time.has_value());
  CHECK(*whole.cover_time <= 2);

  std::vector<std::optional<int>> first_cross;
  for (double len : {1e-4, 1e-3, 1e-2}) {
    const auto log = fiber_growth(p, 0.37, {0.5, 0.5 + len}, 0.1, 40);
    CHECK(log.cover_time.has_value());
    CHECK(log.lengths[0] == Approx(len));
    for (double l : log.lengths) CHECK(l <= I.length() + 1e-12);
    first_cross.push_back(log.crossing[2]);
  }
  for (std::size_t i = 1; i < first_cross.size(); ++i) {
    REQUIRE(first_cross[i].has_value());
    CHECK(*first_cross[i] <= *first_cross[i - 1]);
  }
}

TEST_CASE("density cell search") {
  FineSet b{4, 4, std::vector<bool>(16, false)};
  for (int i : {10, 11, 14, 15}) b.mask[i] = true;
  // coarse 2x2: cell 3 is fully inside B
  CHECK(density_cell_search(b, 2, 2, 0.1) == std::optional<std::size_t>{3});
  b.mask[15] = false;
  CHECK_FALSE(density_cell_search(b, 2, 2, 0.1).has_value());
  CHECK(density_cell_search(b, 2, 2, 0.3) == std::optional<std::size_t>{3});
  CHECK_THROWS_AS(density_cell_search(b, 3, 2, 0.1), ValidationError);
  FineSet none{2, 2, std::vector<bool>(4, false)};
  CHECK_THROWS_AS(density_cell_search(none, 1, 1, 0.1), ValidationError);
}

TEST_CASE("vertical Lyapunov exponent") {
  const auto dbl = lyapunov_vertical(SkewMapParams::doubling_product(), 20, 500, 1);
  for (double e : dbl.exponents) CHECK(e == std::log(2.0));
  CHECK(dbl.fraction_positive == 1.0);

  const auto p = SkewMapParams::viana(16, 1.9, 0.01);
  const auto a = lyapunov_vertical(p, 200, 5000, 1);
  const auto b = lyapunov_vertical(p, 200, 5000, 2);
  CHECK(a.median == Approx(b.median).epsilon(0.05));
  CHECK(a.median > 0.0);
  CHECK(a.median < std::log(4.0));
}

TEST_CASE("Spearman correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 8, 16, 32};
  const std::vector<double> down{5, 4, 3, 2, 1};
  const std::vector<double> flat{1, 1, 1, 1, 1};
  CHECK(spearman(x, up) == Approx(1.0));
  CHECK(spearman(x, down) == Approx(-1.0));
  CHECK(spearman(x, flat) == 0.0);
  // ties get the average rank: ranks of {1,1,2} are {1.5,1.5,3}
  const std::vector<double> t{1, 1, 2};
  const std::vector<double> u{1, 2, 3};
  CHECK(spearman(t, u) == Approx(std::sqrt(3.0) / 2));
}
