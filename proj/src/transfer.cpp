#include "srb/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "srb/parallel.hpp"
#include "srb/random.hpp"

namespace srb {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": densities live on different grids");
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Grid::Grid(int n_theta_, int n_x_, DomainInterval domain_) : n_theta(n_theta_), n_x(n_x_), domain(domain_) {
  if (n_theta < 1 || n_x < 1) throw ValidationError("grid: dimensions must be positive");
  if (!(domain.lo < domain.hi)) throw ValidationError("grid: empty domain");
}

Grid Grid::for_map(const SkewMapParams& params, int n_theta, int n_x) {
  if (params.variant() == Variant::viana) {
    long long power = 1;
    while (power < n_theta) power *= params.degree();
    if (power != n_theta)
      throw ValidationError("grid: n_theta = " + std::to_string(n_theta) + " is not a power of d = " +
                            std::to_string(params.degree()));
  }
  return Grid(n_theta, n_x, params.domain());
}

CylinderPoint Grid::center(std::size_t cell) const {
  return {(theta_index(cell) + 0.5) / n_theta, x_lo(x_index(cell)) + 0.5 * x_width()};
}

std::optional<std::size_t> Grid::locate(CylinderPoint pt) const {
  if (!domain.contains(pt.x)) return std::nullopt;
  int it = static_cast<int>(std::floor(wrap_unit(pt.theta) * n_theta));
  int ix = static_cast<int>(std::floor((pt.x - domain.lo) / domain.length() * n_x));
  it = std::clamp(it, 0, n_theta - 1);
  ix = std::clamp(ix, 0, n_x - 1);
  return index(it, ix);
}

GridDensity::GridDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cells())
    throw ValidationError("density: expected " + std::to_string(grid_.cells()) + " values, got " +
                          std::to_string(values_.size()));
}

GridDensity GridDensity::uniform(const Grid& grid) { return {grid, std::vector<double>(grid.cells(), 1.0)}; }

GridDensity GridDensity::normalized(const Grid& grid, std::vector<double> values) {
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) throw ValidationError("density: negative or NaN entry");
    total += v;
  }
  if (!(total > 0.0)) throw ValidationError("density: zero mass");
  const double scale = static_cast<double>(values.size()) / total;
  for (double& v : values) v *= scale;
  return {grid, std::move(values)};
}

GridDensity GridDensity::from_function(const Grid& grid, const std::function<double(CylinderPoint)>& fn) {
  std::vector<double> v(grid.cells());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.center(i));
  return normalized(grid, std::move(v));
}

double GridDensity::mass() const {
  double total = 0.0;
  for (double v : values_) total += v;
  return total * grid_.cell_area();
}

double GridDensity::at(CylinderPoint pt) const {
  const auto cell = grid_.locate(pt);
  return cell ? values_[*cell] : 0.0;
}

std::vector<double> GridDensity::theta_marginal() const {
  std::vector<double> m(static_cast<std::size_t>(grid_.n_theta), 0.0);
  for (std::size_t i = 0; i < values_.size(); ++i) m[static_cast<std::size_t>(grid_.theta_index(i))] += values_[i];
  for (double& v : m) v /= grid_.n_x;
  return m;
}

std::vector<double> GridDensity::x_marginal() const {
  std::vector<double> m(static_cast<std::size_t>(grid_.n_x), 0.0);
  for (std::size_t i = 0; i < values_.size(); ++i) m[static_cast<std::size_t>(grid_.x_index(i))] += values_[i];
  for (double& v : m) v /= grid_.n_theta;
  return m;
}

UlamOperator::UlamOperator(Grid grid, std::vector<std::vector<Entry>> rows, int subsamples, std::uint64_t seed)
    : grid_(grid), subsamples_(subsamples), seed_(seed) {
  const std::size_t n = grid_.cells();
  if (rows.size() != n) throw ValidationError("ulam: row count does not match the grid");
  row_ptr_.assign(n + 1, 0);
  std::vector<std::size_t> col_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    std::vector<Entry> merged;
    merged.reserve(r.size());
    for (const auto& e : r) {
      if (e.col >= n) throw ValidationError("ulam: column index out of range");
      if (!(e.weight >= 0.0)) throw ValidationError("ulam: negative weight in row " + std::to_string(i));
      if (e.weight == 0.0) continue;
      if (!merged.empty() && merged.back().col == e.col)
        merged.back().weight += e.weight;
      else
        merged.push_back(e);
    }
    double sum = 0.0;
    for (const auto& e : merged) sum += e.weight;
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("ulam: row " + std::to_string(i) + " sums to " + fmt17(sum));
    for (const auto& e : merged) ++col_count[e.col];
    entries_.insert(entries_.end(), merged.begin(), merged.end());
    row_ptr_[i + 1] = entries_.size();
  }
  col_ptr_.assign(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) col_ptr_[j + 1] = col_ptr_[j] + col_count[j];
  col_.resize(entries_.size());
  col_weight_.resize(entries_.size());
  std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const auto& e = entries_[k];
      col_[fill[e.col]] = i;
      col_weight_[fill[e.col]] = e.weight;
      ++fill[e.col];
    }
  }
}

std::span<const UlamOperator::Entry> UlamOperator::row(std::size_t i) const {
  return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

double UlamOperator::row_sum(std::size_t i) const {
  double s = 0.0;
  for (const auto& e : row(i)) s += e.weight;
  return s;
}

std::vector<double> UlamOperator::apply(std::span<const double> in) const {
  const std::size_t n = size();
  if (in.size() != n) throw ValidationError("ulam: vector size does not match the grid");
  std::vector<double> out(n, 0.0);
  // gather by column; each output is a fixed-order sum
  parallel_for(n, [&](std::size_t j) {
    double s = 0.0;
    for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) s += col_weight_[k] * in[col_[k]];
    out[j] = s;
  });
  return out;
}

GridDensity UlamOperator::apply(const GridDensity& f) const {
  require_same_grid(grid_, f.grid(), "ulam apply");
  return {grid_, apply(f.values())};
}

bool UlamOperator::operator==(const UlamOperator& other) const {
  if (!(grid_ == other.grid_) || row_ptr_ != other.row_ptr_ || entries_.size() != other.entries_.size())
    return false;
  for (std::size_t k = 0; k < entries_.size(); ++k)
    if (entries_[k].col != other.entries_[k].col || entries_[k].weight != other.entries_[k].weight) return false;
  return true;
}

Strata ulam_strata(const SkewMapParams& params, int subsamples) {
  if (subsamples < 1) throw ValidationError("subsamples: must be >= 1");
  Strata s;
  s.theta = params.theta_expansion();
  const int ex = params.x_expansion();
  const int want_x = (subsamples + s.theta - 1) / s.theta;
  s.x = std::max(ex, ((want_x + ex - 1) / ex) * ex);
  return s;
}

UlamOperator build_ulam(const SkewMapParams& params, const Grid& grid, int subsamples, std::uint64_t seed) {
  const Strata strata = ulam_strata(params, subsamples);
  const std::size_t n = grid.cells();
  const double weight = 1.0 / strata.total();
  std::vector<std::vector<UlamOperator::Entry>> rows(n);
  parallel_for(n, [&](std::size_t cell) {
    Rng rng(derive_seed(seed, cell));
    const int it = grid.theta_index(cell);
    const int ix = grid.x_index(cell);
    const double th0 = grid.theta_lo(it);
    const double x0 = grid.x_lo(ix);
    const double dth = grid.theta_width() / strata.theta;
    const double dx = grid.x_width() / strata.x;
    auto& row = rows[cell];
    row.reserve(static_cast<std::size_t>(strata.total()));
    for (int a = 0; a < strata.theta; ++a) {
      for (int b = 0; b < strata.x; ++b) {
        const CylinderPoint p{th0 + (a + rng.uniform()) * dth, x0 + (b + rng.uniform()) * dx};
        CylinderPoint image;
        try {
          image = eval(params, p);
        } catch (const DomainEscape& e) {
          throw DomainEscape("ulam: sample from cell " + std::to_string(cell) + " (theta " + std::to_string(it) +
                                 ", x " + std::to_string(ix) + "): " + e.what(),
                             e.value());
        }
        row.push_back({*grid.locate(image), weight});
      }
    }
  });
  // counts are multiples of `weight`; renormalize to kill rounding drift
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.col < b.col; });
    std::vector<UlamOperator::Entry> merged;
    for (const auto& e : row) {
      if (!merged.empty() && merged.back().col == e.col)
        merged.back().weight += 1.0;
      else
        merged.push_back({e.col, 1.0});
    }
    for (auto& e : merged) e.weight /= strata.total();
    row = std::move(merged);
  }
  return UlamOperator(grid, std::move(rows), subsamples, seed);
}

InvariantDensityResult invariant_density(const UlamOperator& op, double tol, int max_iter, int stage_length) {
  if (!(tol > 0.0)) throw ValidationError("tol: must be > 0");
  if (stage_length < 1) throw ValidationError("stage_length: must be >= 1");
  const Grid& grid = op.grid();
  const std::size_t n = grid.cells();
  const double area = grid.cell_area();
  std::vector<double> start(n, 1.0);
  InvariantDensityResult result{GridDensity::uniform(grid), 0.0, 0, {}, {}};
  double residual = std::numeric_limits<double>::infinity();
  while (result.matvecs + stage_length <= max_iter) {
    // f = (1/K) sum_{j<K} L^j u and L f = (1/K) sum_{j=1..K} L^j u
    std::vector<double> sum(n, 0.0);
    std::vector<double> v = start;
    for (int j = 0; j < stage_length; ++j) {
      for (std::size_t i = 0; i < n; ++i) sum[i] += v[i];
      v = op.apply(v);
      ++result.matvecs;
    }
    const double inv = 1.0 / stage_length;
    double integral = 0.0;
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = sum[i] * inv;
      const double lf = (sum[i] - start[i] + v[i]) * inv;
      residual += std::abs(lf - f);
      integral += f;
      start[i] = f;
    }
    residual *= area;
    result.stage_integrals.push_back(integral * area);
    result.stage_variations.push_back(discrete_variation(grid, start));
    if (residual < tol) {
      // renormalize against rounding drift; the residual scales with it
      const double scale = 1.0 / (integral * area);
      for (double& f : start) f *= scale;
      result.residual = residual * scale;
      result.density = GridDensity(grid, std::move(start));
      return result;
    }
  }
  throw ConvergenceError("invariant_density: no convergence after " + std::to_string(result.matvecs) +
                             " products, last residual " + fmt17(residual),
                         residual);
}

double l1_distance(const GridDensity& d1, const GridDensity& d2) {
  require_same_grid(d1.grid(), d2.grid(), "l1_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < d1.values().size(); ++i) s += std::abs(d1[i] - d2[i]);
  return s * d1.grid().cell_area();
}

double lp_norm(const GridDensity& d, double p) {
  if (!(p >= 1.0)) throw ValidationError("lp_norm: p must be >= 1");
  double s = 0.0;
  for (double v : d.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * d.grid().cell_area(), 1.0 / p);
}

double discrete_variation(const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.cells()) throw ValidationError("discrete_variation: size mismatch");
  const double theta_edge = 1.0 / grid.n_x;  // edge between theta-neighbours spans one x cell
  const double x_edge = 1.0 / grid.n_theta;
  double tv = 0.0;
  for (int it = 0; it < grid.n_theta; ++it) {
    for (int ix = 0; ix < grid.n_x; ++ix) {
      const double v = values[grid.index(it, ix)];
      if (it + 1 < grid.n_theta) tv += std::abs(values[grid.index(it + 1, ix)] - v) * theta_edge;
      if (ix + 1 < grid.n_x) tv += std::abs(values[grid.index(it, ix + 1)] - v) * x_edge;
    }
  }
  return tv;
}

double discrete_variation(const GridDensity& d) { return discrete_variation(d.grid(), d.values()); }

LyDiagnostics lasota_yorke_diagnostic(const UlamOperator& op, std::span<const GridDensity> tests) {
  if (tests.size() < 2) throw ValidationError("lasota_yorke: need at least two test densities");
  // y = lambda v + K m
  double svv = 0.0, svm = 0.0, smm = 0.0, syv = 0.0, sym = 0.0;
  std::vector<double> vs, ms, ys;
  for (const auto& f : tests) {
    const double v = discrete_variation(f);
    const double m = lp_norm(f, 1.0);
    const double y = discrete_variation(op.apply(f));
    vs.push_back(v);
    ms.push_back(m);
    ys.push_back(y);
    svv += v * v;
    svm += v * m;
    smm += m * m;
    syv += y * v;
    sym += y * m;
  }
  const double det = svv * smm - svm * svm;
  if (!(det > 1e-12 * svv * smm))
    throw ValidationError("lasota_yorke: degenerate fit (test densities carry no spread in variation)");
  double lambda = (syv * smm - sym * svm) / det;
  double k2 = (sym * svv - syv * svm) / det;
  // nonnegativity: fall back to the best single-coefficient fit
  if (lambda < 0.0) {
    lambda = 0.0;
    k2 = std::max(0.0, sym / smm);
  } else if (k2 < 0.0) {
    k2 = 0.0;
    lambda = std::max(0.0, syv / svv);
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double e = ys[i] - lambda * vs[i] - k2 * ms[i];
    rss += e * e;
  }
  return {lambda, k2, tests.size(), std::sqrt(rss)};
}

double duality_check(const SkewMapParams& params, const Grid& grid, const GridDensity& f, const GridDensity& g,
                     int samples, std::uint64_t seed) {
  require_same_grid(grid, f.grid(), "duality_check");
  require_same_grid(grid, g.grid(), "duality_check");
  const UlamOperator op = build_ulam(params, grid, samples, seed);
  const auto lf = op.apply(f.values());
  double lhs = 0.0;
  for (std::size_t j = 0; j < lf.size(); ++j) lhs += lf[j] * g[j];
  lhs *= grid.cell_area();

  // independent sample set for the composition side
  const std::uint64_t rhs_seed = derive_seed(seed, 0x5eedULL);
  const Strata strata = ulam_strata(params, samples);
  std::vector<double> cell_mean(grid.cells(), 0.0);
  parallel_for(grid.cells(), [&](std::size_t cell) {
    Rng rng(derive_seed(rhs_seed, cell));
    const double th0 = grid.theta_lo(grid.theta_index(cell));
    const double x0 = grid.x_lo(grid.x_index(cell));
    const double dth = grid.theta_width() / strata.theta;
    const double dx = grid.x_width() / strata.x;
    double acc = 0.0;
    for (int a = 0; a < strata.theta; ++a)
      for (int b = 0; b < strata.x; ++b)
        acc += g.at(eval(params, {th0 + (a + rng.uniform()) * dth, x0 + (b + rng.uniform()) * dx}));
    cell_mean[cell] = acc / strata.total();
  });
  double rhs = 0.0;
  for (std::size_t i = 0; i < cell_mean.size(); ++i) rhs += f[i] * cell_mean[i];
  rhs *= grid.cell_area();
  return std::abs(lhs - rhs);
}

double transfer_perturbation_residual(const SkewMapParams& params0, const SkewMapParams& params1, const Grid& grid,
                                      const GridDensity& f, int subsamples, std::uint64_t seed) {
  require_same_grid(grid, f.grid(), "transfer_perturbation_residual");
  const auto l0 = build_ulam(params0, grid, subsamples, seed).apply(f.values());
  const auto l1 = build_ulam(params1, grid, subsamples, seed).apply(f.values());
  double s = 0.0;
  for (std::size_t i = 0; i < l0.size(); ++i) s += std::abs(l1[i] - l0[i]);
  return s * grid.cell_area();
}

void write_density(std::ostream& os, const GridDensity& d) {
  const Grid& g = d.grid();
  os << "srb-density v1; " << g.n_theta << "; " << g.n_x << "; theta in [0,1); x in [" << fmt17(g.domain.lo) << ","
     << fmt17(g.domain.hi) << "]\n";
  for (double v : d.values()) os << fmt17(v) << '\n';
}

GridDensity read_density(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("density file: missing header");
  int n_theta = 0;
  int n_x = 0;
  double lo = 0.0;
  double hi = 0.0;
  char tail = 0;
  const int matched =
      std::sscanf(header.c_str(), "srb-density v1; %d; %d; theta in [0,1); x in [%lf,%lf%c", &n_theta, &n_x, &lo, &hi, &tail);
  if (matched != 5 || tail != ']') throw ValidationError("density file: malformed header '" + header + "'");
  const Grid grid(n_theta, n_x, {lo, hi});
  std::vector<double> values;
  values.reserve(grid.cells());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      throw ValidationError("density file: bad value '" + line + "'");
    }
    if (used != line.size()) throw ValidationError("density file: bad value '" + line + "'");
    values.push_back(v);
  }
  return {grid, std::move(values)};
}

void write_marginals_csv(std::ostream& os, const GridDensity& d) {
  const Grid& g = d.grid();
  os << "axis,center,density\n";
  const auto mt = d.theta_marginal();
  for (int i = 0; i < g.n_theta; ++i) os << "theta," << fmt17((i + 0.5) / g.n_theta) << ',' << fmt17(mt[i]) << '\n';
  const auto mx = d.x_marginal();
  for (int i = 0; i < g.n_x; ++i) os << "x," << fmt17(g.x_lo(i) + 0.5 * g.x_width()) << ',' << fmt17(mx[i]) << '\n';
}

}  // namespace srb
