#include "srb/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "srb/parallel.hpp"
#include "srb/random.hpp"

namespace srb {

namespace {

CylinderPoint uniform_point(const SkewMapParams& params, Rng& rng) {
  const auto& d = params.domain();
  return {rng.uniform(), rng.uniform(d.lo, d.hi)};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

// Number of independent accumulation blocks for histogram-style loops. Counts
// are integers, so the block merge is exact whatever the schedule.
constexpr std::size_t kBlocks = 16;

}  // namespace

BirkhoffResult birkhoff_density(const SkewMapParams& params, int n_orbits, int length, int burn_in,
                                const Grid& grid, std::uint64_t seed) {
  if (n_orbits < 1) throw ValidationError("birkhoff: n_orbits must be >= 1");
  if (burn_in < 0 || length <= burn_in) throw ValidationError("birkhoff: need length > burn_in >= 0");
  if (!(grid.domain == params.domain())) throw ValidationError("birkhoff: grid domain differs from the map's");
  const std::size_t orbits = static_cast<std::size_t>(n_orbits);
  const std::size_t blocks = std::min(kBlocks, orbits);
  std::vector<std::vector<std::uint64_t>> counts(blocks);
  std::vector<std::size_t> escaped(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    auto& hist = counts[b];
    hist.assign(grid.cells(), 0);
    for (std::size_t k = b; k < orbits; k += blocks) {
      Rng rng(derive_seed(seed, k));
      OrbitCursor cursor(params, uniform_point(params, rng), rng.next());
      try {
        for (int j = 0; j < length; ++j) {
          if (j >= burn_in) ++hist[*grid.locate(cursor.point())];
          if (j + 1 < length) cursor.step();
        }
      } catch (const DomainEscape&) {
        ++escaped[b];
      }
    }
  });
  std::vector<double> total(grid.cells(), 0.0);
  std::uint64_t samples = 0;
  for (const auto& hist : counts)
    for (std::size_t i = 0; i < hist.size(); ++i) {
      total[i] += static_cast<double>(hist[i]);
      samples += hist[i];
    }
  BirkhoffResult result{GridDensity::normalized(grid, std::move(total)), static_cast<std::size_t>(samples), 0};
  for (auto e : escaped) result.escaped_orbits += e;
  return result;
}

Perturbation sweep_direction(double delta) { return {delta, 1, 1.0}; }

DomainInterval sweep_domain(const SkewMapParams& base, std::span<const double> deltas) {
  double a_min = std::numeric_limits<double>::infinity();
  double a_max = -a_min;
  for (double delta : deltas) {
    const Perturbation dir = sweep_direction(delta);
    // a(theta) only; the shared I is validated when it is applied
    for (int i = 0; i < (1 << 16); ++i) {
      const double th = i / 65536.0;
      const double v = base.a(th) + dir.amplitude * std::sin(2.0 * std::numbers::pi * dir.frequency * th + dir.phase);
      a_min = std::min(a_min, v);
      a_max = std::max(a_max, v);
    }
  }
  return invariant_domain(a_min, a_max);
}

StabilityReport stability_sweep(const SkewMapParams& base, std::span<const double> deltas, const PipelineConfig& cfg) {
  if (std::find(deltas.begin(), deltas.end(), 0.0) == deltas.end())
    throw ValidationError("deltas: the sweep must include 0");
  const DomainInterval domain = sweep_domain(base, deltas);
  const SkewMapParams reference = base.with_domain(domain);
  StabilityReport report;
  report.grid = Grid::for_map(reference, cfg.n_theta, cfg.n_x);
  report.seed = cfg.seed;

  struct Run {
    GridDensity density;
    double residual;
    std::optional<GridDensity> induced;
  };
  auto run = [&](const SkewMapParams& p) {
    const UlamOperator op = build_ulam(p, report.grid, cfg.subsamples, cfg.seed);
    auto inv = invariant_density(op, cfg.tol, cfg.max_iter);
    Run r{inv.density, inv.residual, std::nullopt};
    if (cfg.with_induced) {
      const auto scheme = build_induced(p, report.grid, cfg.hp, 1, cfg.induced_cap, cfg.seed);
      r.induced = reconstruct_srb(scheme, inv.density, cfg.truncate_N, op).density;
    }
    return r;
  };

  const Run base_run = run(reference.with_perturbation(sweep_direction(0.0), domain));
  for (double delta : deltas) {
    StabilityEntry e;
    e.delta = delta;
    try {
      const SkewMapParams p = reference.with_perturbation(sweep_direction(delta), domain);
      const Run r = delta == 0.0 ? base_run : run(p);
      e.l1 = l1_distance(r.density, base_run.density);
      e.residual = r.residual;
      if (r.induced && base_run.induced) e.induced_l1 = l1_distance(*r.induced, *base_run.induced);
      const auto birk = birkhoff_density(p, cfg.birkhoff_orbits, cfg.birkhoff_length, cfg.birkhoff_burn_in,
                                         report.grid, cfg.seed);
      e.birkhoff_crosscheck = l1_distance(r.density, birk.density);
    } catch (const std::exception& ex) {
      e.error = ex.what();
      e.l1 = std::numeric_limits<double>::quiet_NaN();
      e.birkhoff_crosscheck = std::numeric_limits<double>::quiet_NaN();
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> values, std::span<const double> weights) {
  struct Block {
    double mean;
    double weight;
    std::size_t size;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    blocks.push_back({values[i], w, 1});
    // merge while the nonincreasing order is violated
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean < blocks.back().mean) {
      const Block last = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double wsum = prev.weight + last.weight;
      prev.mean = wsum > 0.0 ? (prev.mean * prev.weight + last.mean * last.weight) / wsum
                             : 0.5 * (prev.mean + last.mean);
      prev.weight = wsum;
      prev.size += last.size;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.size, b.mean);
  return out;
}

LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  if (!(sw > 0.0)) throw ValidationError("line fit: zero total weight");
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("line fit: need two distinct abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

DecayReport estimate_exceptional_measure(const SkewMapParams& params, std::span<const int> n_list, int samples,
                                         const HyperbolicParams& hp, std::uint64_t seed) {
  if (samples < 1000) throw ValidationError("samples: need at least 1000");
  if (n_list.empty()) throw ValidationError("n_list: empty");
  if (!(params.alpha() > 0.0)) throw ValidationError("alpha: exceptional sets need alpha > 0");
  if (!(hp.eta > 0.0 && hp.eta < 0.25)) throw ValidationError("hp.eta: need 0 < eta < 1/4");
  std::vector<int> ns(n_list.begin(), n_list.end());
  for (int n : ns)
    if (n < 1) throw ValidationError("n_list: entries must be >= 1");
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const int n_max = ns.back();
  const double alpha = params.alpha();
  const double threshold = deep_return_threshold(alpha, hp.eta);

  const std::size_t count = static_cast<std::size_t>(samples);
  const std::size_t blocks = std::min(kBlocks, count);
  std::vector<std::vector<std::size_t>> hits(blocks, std::vector<std::size_t>(ns.size(), 0));
  parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t s = b; s < count; s += blocks) {
      Rng rng(derive_seed(seed, s));
      OrbitCursor cursor(params, uniform_point(params, rng), rng.next());
      // weight(n) = sum over G_n = deep returns at indices 1..n-1; the cursor
      // sits at time n-1 when n is checked
      long long weight = 0;
      std::size_t next = 0;
      for (int n = 1; n <= n_max; ++n) {
        if (n >= 2) {
          const int r = return_code(cursor.x(), alpha);
          if (r >= 1 && r >= threshold) weight += r;
        }
        while (next < ns.size() && ns[next] == n) {
          if (weight > 2LL * n) ++hits[b][next];
          ++next;
        }
        if (n < n_max) cursor.step();
      }
    }
  });
  DecayReport report;
  report.samples = count;
  std::vector<double> fractions, weights;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    std::size_t c = 0;
    for (const auto& h : hits) c += h[i];
    DecayEntry e;
    e.n = ns[i];
    e.count = c;
    e.fraction = static_cast<double>(c) / static_cast<double>(count);
    fractions.push_back(e.fraction);
    weights.push_back(1.0);
    report.entries.push_back(e);
  }
  const auto iso = isotonic_nonincreasing(fractions, weights);
  for (std::size_t i = 0; i < iso.size(); ++i) report.entries[i].isotonic = iso[i];

  std::vector<double> xs, ys, ws;
  for (const auto& e : report.entries) {
    if (e.count == 0) continue;
    xs.push_back(std::sqrt(static_cast<double>(e.n)));
    ys.push_back(std::log(e.fraction));
    ws.push_back(static_cast<double>(e.count));
  }
  report.fit_bins = xs.size();
  if (xs.size() < 2) {
    report.notice = xs.empty() ? "all exceptional fractions are zero; fit skipped"
                               : "only one nonzero bin; fit skipped";
    return report;
  }
  const LineFit fit = weighted_line_fit(xs, ys, ws);
  report.fitted = true;
  report.c_hat = std::exp(fit.intercept);
  report.gamma_hat = -fit.slope;
  report.r_squared = fit.r_squared;
  return report;
}

std::optional<int> recovery_depth(const SkewMapParams& params, CylinderPoint pt, double eta, int cap,
                                  std::uint64_t seed) {
  const double alpha = params.alpha();
  if (!(alpha > 0.0)) throw ValidationError("alpha: recovery depth needs alpha > 0");
  const double root = std::sqrt(alpha);
  const double target = std::log(std::abs(pt.x)) + (-1.0 + eta) * std::log(alpha);
  OrbitCursor cursor(params, pt, seed);
  double log_product = 0.0;
  for (int n = 1; n <= cap; ++n) {
    log_product += std::log(std::abs(vertical_derivative(params, cursor.point())));
    cursor.step();
    if (!(std::abs(cursor.x()) > root)) return std::nullopt;  // re-entered before recovering
    if (log_product >= target) return n;
  }
  return std::nullopt;
}

RecoverySummary estimate_recovery_depth(const SkewMapParams& params, int samples, double eta, std::uint64_t seed,
                                        int cap) {
  const double alpha = params.alpha();
  if (!(alpha > 0.0)) throw ValidationError("alpha: recovery depth needs alpha > 0");
  if (samples < 1) throw ValidationError("samples: must be >= 1");
  const double root = std::sqrt(alpha);
  std::vector<std::optional<int>> depth(static_cast<std::size_t>(samples));
  parallel_for(depth.size(), [&](std::size_t s) {
    Rng rng(derive_seed(seed, s));
    double x = 0.0;
    do {
      x = rng.uniform(-2.0 * root, 2.0 * root);
    } while (x == 0.0 || !params.domain().contains(x));
    depth[s] = recovery_depth(params, {rng.uniform(), x}, eta, cap, rng.next());
  });
  RecoverySummary out;
  out.alpha = alpha;
  out.samples = depth.size();
  std::vector<double> values;
  for (const auto& d : depth) {
    if (!d) {
      ++out.censored;
      continue;
    }
    out.depths.push_back(*d);
    values.push_back(*d);
  }
  out.median = median_of(values);
  out.log_ratio = out.median / std::log(1.0 / alpha);
  return out;
}

Interval fiber_image(double a, Interval j) {
  const double sq_lo = j.lo * j.lo;
  const double sq_hi = j.hi * j.hi;
  const double max_sq = std::max(sq_lo, sq_hi);
  const double min_sq = (j.lo <= 0.0 && j.hi >= 0.0) ? 0.0 : std::min(sq_lo, sq_hi);
  return {a - max_sq, a - min_sq};
}

std::vector<Interval> lambda_section(const SkewMapParams& params, double theta) {
  if (params.variant() != Variant::viana) throw ValidationError("lambda_section: viana maps only");
  const int d = params.degree();
  const int d2 = d * d;
  const Interval full{params.domain().lo, params.domain().hi};
  std::vector<Interval> pieces;
  pieces.reserve(static_cast<std::size_t>(d2));
  for (int k = 0; k < d2; ++k) {
    const double pre2 = (theta + k) / d2;     // g^2(pre2) = theta
    const double pre1 = wrap_unit(d * pre2);  // g(pre2)
    pieces.push_back(fiber_image(params.a(pre1), fiber_image(params.a(pre2), full)));
  }
  std::sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& p : pieces) {
    if (!merged.empty() && p.lo <= merged.back().hi)
      merged.back().hi = std::max(merged.back().hi, p.hi);
    else
      merged.push_back(p);
  }
  return merged;
}

GrowthLog fiber_growth(const SkewMapParams& params, double theta0, Interval J, double eta, int max_iter,
                       std::uint64_t seed) {
  if (params.variant() != Variant::viana) throw ValidationError("fiber_growth: viana maps only");
  const auto& dom = params.domain();
  if (!(J.lo <= J.hi && dom.contains(J.lo) && dom.contains(J.hi) && J.hi > J.lo))
    throw ValidationError("fiber_growth: J must be a nonempty subinterval of I");
  if (max_iter < 1) throw ValidationError("fiber_growth: max_iter must be >= 1");
  const double alpha = params.alpha();
  GrowthLog log;
  log.thresholds = {std::pow(alpha, 1.0 - 2.0 * eta), std::sqrt(alpha), 0.1 * dom.length()};
  log.crossing.assign(log.thresholds.size(), std::nullopt);
  log.lengths.push_back(J.length());
  // the cursor only supplies the circle orbit
  OrbitCursor base(params, {theta0, 0.0}, seed);
  Interval image = J;
  auto note_crossings = [&](int n) {
    for (std::size_t t = 0; t < log.thresholds.size(); ++t)
      if (!log.crossing[t] && image.length() > log.thresholds[t]) log.crossing[t] = n;
  };
  note_crossings(0);
  for (int n = 1; n <= max_iter; ++n) {
    image = fiber_image(params.a(base.point().theta), image);
    base.step();
    log.lengths.push_back(image.length());
    note_crossings(n);
    if (!log.cover_time) {
      const auto section = lambda_section(params, base.point().theta);
      const bool covers = std::all_of(section.begin(), section.end(), [&](const Interval& s) {
        return image.lo <= s.lo && image.hi >= s.hi;
      });
      if (covers) log.cover_time = n;
    }
  }
  log.final_image = image;
  return log;
}

std::optional<std::size_t> density_cell_search(const FineSet& b, int coarse_theta, int coarse_x, double eps) {
  if (coarse_theta < 1 || coarse_x < 1 || b.n_theta % coarse_theta != 0 || b.n_x % coarse_x != 0)
    throw ValidationError("density_cell_search: fine grid must refine the coarse grid");
  if (b.mask.size() != static_cast<std::size_t>(b.n_theta) * static_cast<std::size_t>(b.n_x))
    throw ValidationError("density_cell_search: mask size mismatch");
  if (std::none_of(b.mask.begin(), b.mask.end(), [](bool v) { return v; }))
    throw ValidationError("density_cell_search: m(B) = 0");
  const int ft = b.n_theta / coarse_theta;
  const int fx = b.n_x / coarse_x;
  const double cell_fine = static_cast<double>(ft) * fx;
  for (int ct = 0; ct < coarse_theta; ++ct) {
    for (int cx = 0; cx < coarse_x; ++cx) {
      std::size_t outside = 0;
      for (int i = 0; i < ft; ++i)
        for (int j = 0; j < fx; ++j) {
          const std::size_t idx = static_cast<std::size_t>(ct * ft + i) * static_cast<std::size_t>(b.n_x) +
                                  static_cast<std::size_t>(cx * fx + j);
          if (!b.mask[idx]) ++outside;
        }
      if (static_cast<double>(outside) < eps * cell_fine)
        return static_cast<std::size_t>(ct) * static_cast<std::size_t>(coarse_x) + static_cast<std::size_t>(cx);
    }
  }
  return std::nullopt;
}

LyapunovSummary lyapunov_vertical(const SkewMapParams& params, int samples, int n, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("samples: must be >= 1");
  if (n < 1) throw ValidationError("n: must be >= 1");
  LyapunovSummary out;
  out.exponents.assign(static_cast<std::size_t>(samples), 0.0);
  std::vector<std::size_t> zeros(static_cast<std::size_t>(samples), 0);
  parallel_for(out.exponents.size(), [&](std::size_t s) {
    Rng rng(derive_seed(seed, s));
    OrbitCursor cursor(params, uniform_point(params, rng), rng.next());
    // product kept as mantissa in [1,2) times 2^e: one log at the end, and a
    // constant derivative 2 gives exactly log 2
    double mantissa = 1.0;
    long long e2 = 0;
    int counted = 0;
    for (int j = 0; j < n; ++j) {
      const double dv = std::abs(vertical_derivative(params, cursor.point()));
      if (dv == 0.0) {
        ++zeros[s];
      } else {
        int k = 0;
        mantissa = 2.0 * std::frexp(mantissa * dv, &k);
        e2 += k - 1;
        ++counted;
      }
      if (j + 1 < n) cursor.step();
    }
    out.exponents[s] = counted == 0 ? 0.0
                                    : std::log(mantissa) / counted +
                                          (static_cast<double>(e2) / counted) * std::numbers::ln2;
  });
  std::size_t positive = 0;
  double total = 0.0;
  for (double e : out.exponents) {
    positive += e > 0.0 ? 1 : 0;
    total += e;
  }
  for (auto z : zeros) out.zero_hits += z;
  out.mean = total / samples;
  out.median = median_of(out.exponents);
  out.fraction_positive = static_cast<double>(positive) / samples;
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  if (a.size() < 2) return 0.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

InducedSweepReport induced_sweep(const SkewMapParams& base, std::span<const double> deltas,
                                 const InducedSweepConfig& cfg) {
  const DomainInterval domain = sweep_domain(base, deltas);
  const SkewMapParams reference = base.with_domain(domain);
  const Grid grid = Grid::for_map(reference, cfg.n_theta, cfg.n_x);
  const auto base_scheme = build_induced(reference, grid, cfg.hp, cfg.probes, cfg.cap, cfg.seed);
  InducedSweepReport report;
  report.base_tail = return_time_tail(base_scheme, cfg.tail_N, cfg.q);
  report.base_undecided = base_scheme.undecided_fraction;
  std::vector<double> u1s, tails, hdiffs;
  for (double delta : deltas) {
    InducedSweepEntry e;
    e.delta = delta;
    try {
      const auto p = reference.with_perturbation(sweep_direction(delta), domain);
      const auto scheme = delta == 0.0 ? base_scheme : build_induced(p, grid, cfg.hp, cfg.probes, cfg.cap, cfg.seed);
      e.u1 = u1_check(base_scheme, scheme, cfg.u1_levels);
      e.u1_total = std::accumulate(e.u1.begin(), e.u1.end(), 0.0);
      e.tail = return_time_tail(scheme, cfg.tail_N, cfg.q).tail_q_norm;
      e.tail_change = std::abs(e.tail - report.base_tail.tail_q_norm);
      e.h_difference = return_time_difference(base_scheme, scheme, cfg.q);
      e.undecided_fraction = scheme.undecided_fraction;
      u1s.push_back(e.u1_total);
      tails.push_back(e.tail_change);
      hdiffs.push_back(e.h_difference);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    report.entries.push_back(std::move(e));
  }
  report.spearman_u1_tail = spearman(u1s, tails);
  report.spearman_hdiff_tail = spearman(hdiffs, tails);
  return report;
}

}  // namespace srb
