#include "srb/induced.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include "srb/parallel.hpp"
#include "srb/random.hpp"

namespace srb {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": grids differ");
}

CylinderPoint random_point_in(const Grid& grid, std::size_t cell, Rng& rng) {
  const double th0 = grid.theta_lo(grid.theta_index(cell));
  const double x0 = grid.x_lo(grid.x_index(cell));
  return {th0 + rng.uniform() * grid.theta_width(), x0 + rng.uniform() * grid.x_width()};
}

// Signed return code; outside the strip only the side of the critical line counts.
int itinerary_symbol(double x, double alpha) {
  constexpr int kOutside = 1 << 20;
  const int r = alpha > 0.0 ? return_code(x, alpha) : 0;
  if (r == 0) return x > 0.0 ? kOutside : -kOutside;
  return x > 0.0 ? r : -r;
}

}  // namespace

InducedScheme build_induced(const SkewMapParams& params, const Grid& grid, const HyperbolicParams& hp,
                            int probes_per_cell, int max_steps, std::uint64_t seed) {
  hp.validate();
  if (probes_per_cell < 1) throw ValidationError("probes_per_cell: must be >= 1");
  if (max_steps < hp.p_start) throw ValidationError("max_steps: must be >= p_start");
  if (!(grid.domain == params.domain())) throw ValidationError("build_induced: grid domain differs from the map's");
  InducedScheme scheme;
  scheme.grid = grid;
  scheme.hp = hp;
  scheme.max_steps = max_steps;
  const std::size_t n = grid.cells();
  scheme.h.assign(n, std::nullopt);
  scheme.disagreement.assign(n, 0.0);
  parallel_for(n, [&](std::size_t cell) {
    const auto h = first_hyperbolic_return(params, grid.center(cell), hp, max_steps);
    scheme.h[cell] = h;
    if (probes_per_cell == 1) return;
    Rng rng(derive_seed(seed, cell));
    int differ = 0;
    for (int k = 1; k < probes_per_cell; ++k) {
      const CylinderPoint p = random_point_in(grid, cell, rng);
      if (first_hyperbolic_return(params, p, hp, max_steps, rng.next()) != h) ++differ;
    }
    scheme.disagreement[cell] = static_cast<double>(differ) / (probes_per_cell - 1);
  });
  std::size_t undecided = 0;
  for (const auto& h : scheme.h) undecided += h ? 0 : 1;
  scheme.undecided_fraction = static_cast<double>(undecided) / static_cast<double>(n);
  return scheme;
}

TailReport return_time_tail(const InducedScheme& scheme, int N, double q) {
  if (N < 1) throw ValidationError("tail: N must be >= 1");
  if (!(q >= 1.0)) throw ValidationError("tail: q must be >= 1");
  TailReport report;
  report.N = N;
  report.q = q;
  double s = 0.0;
  for (std::size_t c = 0; c < scheme.h.size(); ++c) {
    ++report.histogram[scheme.h[c] ? *scheme.h[c] : -1];
    // sum_{j >= N} chi_{h > j} = max(0, h - N)
    const double excess = std::max(0, scheme.h_or_cap(c) - N);
    s += std::pow(excess, q);
  }
  report.tail_q_norm = std::pow(s * scheme.grid.cell_area(), 1.0 / q);
  return report;
}

ReconstructResult reconstruct_srb(const InducedScheme& scheme, const GridDensity& mu, int truncate_N,
                                  const UlamOperator& op) {
  if (truncate_N < 1) throw ValidationError("reconstruct_srb: truncate_N must be >= 1");
  require_same_grid(scheme.grid, mu.grid(), "reconstruct_srb");
  require_same_grid(scheme.grid, op.grid(), "reconstruct_srb");
  const std::size_t n = scheme.grid.cells();
  const double area = scheme.grid.cell_area();
  auto restricted = [&](int j) {
    std::vector<double> v(n, 0.0);
    for (std::size_t c = 0; c < n; ++c)
      if (scheme.h_or_cap(c) > j || !scheme.h[c]) v[c] = mu[c];
    return v;
  };
  // Horner: S = r_{N-1}; S = L S + r_j for j = N-2 .. 0
  std::vector<double> sum = restricted(truncate_N - 1);
  for (int j = truncate_N - 2; j >= 0; --j) {
    sum = op.apply(sum);
    const auto r = restricted(j);
    for (std::size_t c = 0; c < n; ++c) sum[c] += r[c];
  }
  ReconstructResult result{GridDensity::uniform(scheme.grid), 0.0, 0.0};
  double raw = 0.0;
  for (double v : sum) raw += v;
  result.raw_mass = raw * area;
  double truncated = 0.0;
  for (std::size_t c = 0; c < n; ++c) truncated += mu[c] * std::max(0, scheme.h_or_cap(c) - truncate_N);
  result.truncated_mass = truncated * area;
  result.density = GridDensity::normalized(scheme.grid, std::move(sum));
  return result;
}

std::vector<double> u1_check(const InducedScheme& s0, const InducedScheme& s1, int N) {
  require_same_grid(s0.grid, s1.grid, "u1_check");
  if (N < 1) throw ValidationError("u1_check: N must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(N), 0.0);
  const double area = s0.grid.cell_area();
  for (std::size_t c = 0; c < s0.h.size(); ++c) {
    if (!s0.h[c] || !s1.h[c]) continue;
    const int a = *s0.h[c];
    const int b = *s1.h[c];
    if (a == b) continue;
    if (a >= 1 && a <= N) out[static_cast<std::size_t>(a - 1)] += area;
    if (b >= 1 && b <= N) out[static_cast<std::size_t>(b - 1)] += area;
  }
  return out;
}

std::vector<double> u1_check(const SkewMapParams& params0, const SkewMapParams& params1, const Grid& grid,
                             const HyperbolicParams& hp, int N, int probes, int cap, std::uint64_t seed) {
  const auto s0 = build_induced(params0, grid, hp, probes, cap, seed);
  const auto s1 = build_induced(params1, grid, hp, probes, cap, seed);
  return u1_check(s0, s1, N);
}

double u1_excluded_mass(const InducedScheme& s0, const InducedScheme& s1) {
  require_same_grid(s0.grid, s1.grid, "u1_excluded_mass");
  std::size_t count = 0;
  for (std::size_t c = 0; c < s0.h.size(); ++c) count += (!s0.h[c] || !s1.h[c]) ? 1 : 0;
  return static_cast<double>(count) * s0.grid.cell_area();
}

double return_time_difference(const InducedScheme& s0, const InducedScheme& s1, double q) {
  require_same_grid(s0.grid, s1.grid, "return_time_difference");
  if (!(q >= 1.0)) throw ValidationError("return_time_difference: q must be >= 1");
  double s = 0.0;
  for (std::size_t c = 0; c < s0.h.size(); ++c) {
    if (!s0.h[c] || !s1.h[c]) continue;
    s += std::pow(std::abs(*s1.h[c] - *s0.h[c]), q);
  }
  return std::pow(s * s0.grid.cell_area(), 1.0 / q);
}

DistortionReport distortion_probe(const SkewMapParams& params, const InducedScheme& scheme, int pairs_per_cell,
                                  std::uint64_t seed) {
  if (pairs_per_cell < 1) throw ValidationError("distortion_probe: pairs_per_cell must be >= 1");
  const Grid& grid = scheme.grid;
  const std::size_t n = grid.cells();
  const double alpha = params.alpha();
  DistortionReport report;
  report.cell_max.assign(n, 1.0);
  std::vector<std::size_t> accepted(n, 0), critical(n, 0), split(n, 0);
  parallel_for(n, [&](std::size_t cell) {
    if (!scheme.h[cell]) return;
    const int h = *scheme.h[cell];
    Rng rng(derive_seed(seed, cell));
    for (int k = 0; k < pairs_per_cell; ++k) {
      const CylinderPoint p1 = random_point_in(grid, cell, rng);
      // vertical offset, log-uniform between 1e-14 and one cell height
      const double scale = grid.x_width() * std::pow(10.0, -14.0 * rng.uniform());
      const double lo = grid.x_lo(grid.x_index(cell));
      double x2 = p1.x + (rng.uniform() < 0.5 ? -scale : scale);
      if (x2 < lo || x2 > lo + grid.x_width()) x2 = 2.0 * p1.x - x2;
      x2 = std::clamp(x2, lo, lo + grid.x_width());
      const CylinderPoint p2{p1.theta, x2};
      const std::uint64_t digits = rng.next();
      OrbitCursor a(params, p1, OrbitCursor::DigitStream{digits});
      OrbitCursor b(params, p2, OrbitCursor::DigitStream{digits});
      double log_ratio = 0.0;
      bool zero = false;
      bool same = true;
      for (int i = 0; i < h; ++i) {
        const CylinderPoint pa = a.point();
        const CylinderPoint pb = b.point();
        if (itinerary_symbol(pa.x, alpha) != itinerary_symbol(pb.x, alpha)) {
          same = false;
          break;
        }
        const double ja = jacobian_det(params, pa);
        const double jb = jacobian_det(params, pb);
        if (ja == 0.0 || jb == 0.0) {
          zero = true;
          break;
        }
        log_ratio += std::log(ja) - std::log(jb);
        a.step();
        b.step();
      }
      if (zero) {
        ++critical[cell];
      } else if (!same) {
        ++split[cell];
      } else {
        ++accepted[cell];
        report.cell_max[cell] = std::max(report.cell_max[cell], std::exp(std::abs(log_ratio)));
      }
    }
  });
  for (std::size_t c = 0; c < n; ++c) {
    report.accepted_pairs += accepted[c];
    report.critical_discards += critical[c];
    report.itinerary_discards += split[c];
    report.global_max = std::max(report.global_max, report.cell_max[c]);
  }
  return report;
}

void write_scheme_csv(std::ostream& os, const InducedScheme& scheme) {
  os << "cell_theta_idx,cell_x_idx,h_or_-1,disagreement\n";
  std::ostringstream num;
  num.precision(17);
  for (std::size_t c = 0; c < scheme.h.size(); ++c) {
    num.str("");
    num << scheme.disagreement[c];
    os << scheme.grid.theta_index(c) << ',' << scheme.grid.x_index(c) << ',' << (scheme.h[c] ? *scheme.h[c] : -1)
       << ',' << num.str() << '\n';
  }
}

}  // namespace srb
