#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srb/maps.hpp"

namespace srb {

/// Uniform n_theta x n_x grid on S^1 x I. Cells are indexed theta-major:
/// index = i_theta * n_x + i_x. The measure is Lebesgue normalized to total
/// mass 1, so every cell has area 1 / (n_theta n_x).
struct Grid {
  int n_theta = 1;
  int n_x = 1;
  DomainInterval domain{};

  Grid() = default;
  Grid(int n_theta, int n_x, DomainInterval domain);

  /// Grid for params' domain. For the viana variant n_theta must be a power
  /// of the degree so cells align with the Markov partitions of the circle.
  static Grid for_map(const SkewMapParams& params, int n_theta, int n_x);

  std::size_t cells() const { return static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_x); }
  double cell_area() const { return 1.0 / static_cast<double>(cells()); }
  std::size_t index(int i_theta, int i_x) const {
    return static_cast<std::size_t>(i_theta) * static_cast<std::size_t>(n_x) + static_cast<std::size_t>(i_x);
  }
  int theta_index(std::size_t cell) const { return static_cast<int>(cell / static_cast<std::size_t>(n_x)); }
  int x_index(std::size_t cell) const { return static_cast<int>(cell % static_cast<std::size_t>(n_x)); }
  double theta_width() const { return 1.0 / n_theta; }
  double x_width() const { return domain.length() / n_x; }
  double theta_lo(int i) const { return static_cast<double>(i) / n_theta; }
  double x_lo(int i) const { return domain.lo + domain.length() * i / n_x; }
  CylinderPoint center(std::size_t cell) const;

  /// Cell containing pt; x = hi goes to the last row. nullopt outside I.
  std::optional<std::size_t> locate(CylinderPoint pt) const;

  bool operator==(const Grid&) const = default;
};

/// Piecewise-constant density on a Grid. Values are w.r.t. the normalized
/// measure, so the uniform density is 1 everywhere.
class GridDensity {
 public:
  GridDensity(Grid grid, std::vector<double> values);

  static GridDensity uniform(const Grid& grid);
  /// Nonnegative values rescaled to unit mass. Throws ValidationError for
  /// negative entries or zero mass.
  static GridDensity normalized(const Grid& grid, std::vector<double> values);
  /// Density of fn sampled at cell centers, normalized.
  static GridDensity from_function(const Grid& grid, const std::function<double(CylinderPoint)>& fn);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  /// Integral over S^1 x I w.r.t. the normalized measure.
  double mass() const;
  /// Value of the piecewise-constant function at pt (0 outside I).
  double at(CylinderPoint pt) const;

  /// Marginal densities on [0,1) and on I (normalized-coordinate densities).
  std::vector<double> theta_marginal() const;
  std::vector<double> x_marginal() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Sparse row-stochastic matrix: row i spreads cell i's mass over image cells.
class UlamOperator {
 public:
  struct Entry {
    std::size_t col;
    double weight;
  };

  /// Assembles from per-row entries (sorted, duplicates merged). Throws
  /// ValidationError if a row is not stochastic within 1e-9.
  UlamOperator(Grid grid, std::vector<std::vector<Entry>> rows, int subsamples = 0, std::uint64_t seed = 0);

  const Grid& grid() const { return grid_; }
  int subsamples() const { return subsamples_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return grid_.cells(); }
  std::size_t nonzeros() const { return col_.size(); }

  std::span<const Entry> row(std::size_t i) const;
  double row_sum(std::size_t i) const;

  /// Push-forward of cell values: out_j = sum_i in_i P_ij.
  std::vector<double> apply(std::span<const double> in) const;
  GridDensity apply(const GridDensity& f) const;

  bool operator==(const UlamOperator& other) const;

 private:
  Grid grid_;
  int subsamples_;
  std::uint64_t seed_;
  // rows (source cell -> targets) and the transpose for gather-style products
  std::vector<std::size_t> row_ptr_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> col_weight_;
};

/// Stratified layout of the per-cell samples: theta strata are a multiple of
/// the base expansion factor so theta transitions are exact on aligned grids.
struct Strata {
  int theta = 1;
  int x = 1;
  int total() const { return theta * x; }
};
Strata ulam_strata(const SkewMapParams& params, int subsamples);

/// Ulam matrix by forward sampling: each cell is split into jittered strata,
/// every sample point is mapped once and counted in its image cell. Row i
/// uses the stream derive_seed(seed, i). Throws DomainEscape naming the cell.
UlamOperator build_ulam(const SkewMapParams& params, const Grid& grid, int subsamples, std::uint64_t seed);

struct InvariantDensityResult {
  GridDensity density;
  /// ||L rho - rho||_1 of the returned (normalized) density.
  double residual = 0.0;
  int matvecs = 0;
  /// Integral of each Cesaro stage before the final normalization.
  std::vector<double> stage_integrals;
  /// Discrete variation of each Cesaro stage.
  std::vector<double> stage_variations;
};

/// Fixed point of the Ulam operator by restarted Cesaro averaging: each stage
/// averages L^j u for j < stage_length starting from the previous stage's
/// average (the first stage starts from the uniform density). Stops once
/// ||L f - f||_1 < tol. Throws ConvergenceError after max_iter products.
InvariantDensityResult invariant_density(const UlamOperator& op, double tol = 1e-10,
                                         int max_iter = 100000, int stage_length = 8);

/// sum |v1 - v2| * cell_area. Throws ValidationError on grid mismatch.
double l1_distance(const GridDensity& d1, const GridDensity& d2);
/// (sum |v|^p cell_area)^{1/p}, p >= 1.
double lp_norm(const GridDensity& d, double p);
/// Edge-weighted anisotropic total variation in normalized coordinates:
/// sum over theta-neighbours of |dv| * (1/n_x) plus x-neighbours of |dv| * (1/n_theta).
double discrete_variation(const GridDensity& d);
double discrete_variation(const Grid& grid, std::span<const double> values);

/// Norm exponents for dimension 2: p = dim/(dim-1), q = dim.
struct NormConfig {
  int dim = 2;
  double p() const { return static_cast<double>(dim) / (dim - 1); }
  double q() const { return static_cast<double>(dim); }
};

struct LyDiagnostics {
  double lambda_hat = 0.0;
  double k2_hat = 0.0;
  std::size_t samples = 0;
  /// Least-squares residual norm of the fit.
  double fit_residual = 0.0;
};

/// Fits var(L f) <= lambda var(f) + K2 ||f||_1 by nonnegative least squares
/// over the test densities. Throws ValidationError when fewer than two are
/// given or the design is degenerate (no spread in var(f)).
LyDiagnostics lasota_yorke_diagnostic(const UlamOperator& op, std::span<const GridDensity> tests);

/// |int (L f) g - int f (g o phi)|: the left side through build_ulam(seed),
/// the right side by independent stratified sampling (`samples` per cell).
double duality_check(const SkewMapParams& params, const Grid& grid, const GridDensity& f,
                     const GridDensity& g, int samples, std::uint64_t seed);

/// ||L_1 f - L_0 f||_1 with both operators built from the same seed.
double transfer_perturbation_residual(const SkewMapParams& params0, const SkewMapParams& params1,
                                      const Grid& grid, const GridDensity& f, int subsamples = 64,
                                      std::uint64_t seed = 1);

/// Text format:
///   srb-density v1; <n_theta>; <n_x>; theta in [0,1); x in [<lo>,<hi>]
/// then n_theta * n_x values, theta-major, one per line.
void write_density(std::ostream& os, const GridDensity& d);
GridDensity read_density(std::istream& is);
/// CSV of both marginals: axis,center,density.
void write_marginals_csv(std::ostream& os, const GridDensity& d);

}  // namespace srb
