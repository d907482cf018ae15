#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srb/induced.hpp"
#include "srb/symbolic.hpp"
#include "srb/transfer.hpp"

namespace srb {

// ---------------------------------------------------------------- Birkhoff

struct BirkhoffResult {
  GridDensity density;
  std::size_t samples = 0;
  std::size_t escaped_orbits = 0;
};

/// Occupation histogram of iterates burn_in..length-1 of n_orbits orbits
/// started uniformly on S^1 x I (orbit k from derive_seed(seed, k)).
/// An escaping orbit stops there and is counted.
BirkhoffResult birkhoff_density(const SkewMapParams& params, int n_orbits, int length, int burn_in,
                                const Grid& grid, std::uint64_t seed);

// --------------------------------------------------------------- stability

struct PipelineConfig {
  int n_theta = 256;
  int n_x = 256;
  int subsamples = 256;
  std::uint64_t seed = 7;
  double tol = 1e-10;
  int max_iter = 200000;
  int birkhoff_orbits = 1000;
  int birkhoff_length = 10100;
  int birkhoff_burn_in = 100;
  /// Also rebuild mu* through the induced scheme and compare those.
  bool with_induced = false;
  HyperbolicParams hp{};
  int induced_cap = 10000;
  int truncate_N = 200;
};

struct StabilityEntry {
  double delta = 0.0;
  double l1 = 0.0;
  double birkhoff_crosscheck = 0.0;
  double residual = 0.0;
  /// l1 of the reconstructed mu* densities (with_induced only).
  std::optional<double> induced_l1;
  /// Non-empty when this delta's pipeline failed.
  std::string error;
};

struct StabilityReport {
  std::vector<StabilityEntry> entries;
  Grid grid;
  std::uint64_t seed = 0;
};

/// Direction of the one-parameter sweeps: a(theta) += delta sin(2 pi theta + 1).
Perturbation sweep_direction(double delta);

/// Shared I for the whole family {base + delta direction : delta in deltas}.
DomainInterval sweep_domain(const SkewMapParams& base, std::span<const double> deltas);

/// For each delta: Ulam operator (shared seed), invariant density, L1 distance
/// to the delta = 0 density, and an L1 cross-check against the Birkhoff
/// density. Per-delta failures are recorded and the sweep continues.
StabilityReport stability_sweep(const SkewMapParams& base, std::span<const double> deltas, const PipelineConfig& cfg);

// --------------------------------------------------------- exceptional set

struct DecayEntry {
  int n = 0;
  std::size_t count = 0;
  double fraction = 0.0;
  double isotonic = 0.0;
};

struct DecayReport {
  std::vector<DecayEntry> entries;
  std::size_t samples = 0;
  /// Fit of fraction ~ C exp(-gamma sqrt(n)) over nonzero bins.
  bool fitted = false;
  double c_hat = 0.0;
  double gamma_hat = 0.0;
  double r_squared = 0.0;
  std::size_t fit_bins = 0;
  std::string notice;
};

/// Fraction of `samples` uniform points lying in E_n for each n in n_list.
DecayReport estimate_exceptional_measure(const SkewMapParams& params, std::span<const int> n_list, int samples,
                                         const HyperbolicParams& hp, std::uint64_t seed);

/// Pool-adjacent-violators fit of a nonincreasing sequence (weights optional).
std::vector<double> isotonic_nonincreasing(std::span<const double> values, std::span<const double> weights = {});

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};
/// Weighted least squares y ~ intercept + slope x. Needs two distinct x.
LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w);

// ---------------------------------------------------------- recovery depth

/// Smallest N with |x_j| > sqrt(alpha) for j = 1..N and
/// prod_{j<N} |d_x f(theta_j, x_j)| >= |x| alpha^{-1+eta}; nullopt (censored)
/// when the orbit re-enters the strip first or cap is reached.
std::optional<int> recovery_depth(const SkewMapParams& params, CylinderPoint pt, double eta, int cap,
                                  std::uint64_t seed = 0);

struct RecoverySummary {
  double alpha = 0.0;
  std::size_t samples = 0;
  std::size_t censored = 0;
  double median = 0.0;
  /// median / log(1/alpha)
  double log_ratio = 0.0;
  std::vector<int> depths;
};

/// recovery_depth over samples with theta uniform and x uniform in (-2 sqrt(alpha), 2 sqrt(alpha)).
RecoverySummary estimate_recovery_depth(const SkewMapParams& params, int samples, double eta, std::uint64_t seed,
                                        int cap = 1000);

// ------------------------------------------------------------ fiber growth

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

/// Exact image of [lo,hi] under x -> a - x^2.
Interval fiber_image(double a, Interval j);

/// x-section of phi^2(S^1 x I) over theta: merged union over the d^2 preimages.
std::vector<Interval> lambda_section(const SkewMapParams& params, double theta);

struct GrowthLog {
  /// length of the image after each iteration; lengths[0] = |J|
  std::vector<double> lengths;
  std::vector<double> thresholds;  // alpha^{1-2 eta}, sqrt(alpha), 0.1 |I|
  std::vector<std::optional<int>> crossing;
  /// First iteration n >= 1 whose image contains the Lambda section.
  std::optional<int> cover_time;
  /// Image interval at the final iteration.
  Interval final_image;
};

GrowthLog fiber_growth(const SkewMapParams& params, double theta0, Interval J, double eta, int max_iter,
                       std::uint64_t seed = 0);

// ---------------------------------------------------------- density points

/// Fine-grid set B as a mask over fine cells (theta-major).
struct FineSet {
  int n_theta = 1;
  int n_x = 1;
  std::vector<bool> mask;
};

/// First coarse cell S (theta-major order) with m(B^c cap S) < eps m(S).
/// Fine dimensions must be multiples of the coarse ones; m(B) = 0 throws.
std::optional<std::size_t> density_cell_search(const FineSet& b, int coarse_theta, int coarse_x, double eps);

// --------------------------------------------------------------- Lyapunov

struct LyapunovSummary {
  std::vector<double> exponents;
  double median = 0.0;
  double mean = 0.0;
  double fraction_positive = 0.0;
  std::size_t zero_hits = 0;
};

/// (1/n) sum_{j<n} log |d_x f(theta_j, x_j)| for `samples` uniform starts;
/// exact hits of the critical line are skipped and counted.
LyapunovSummary lyapunov_vertical(const SkewMapParams& params, int samples, int n, std::uint64_t seed);

// ------------------------------------------------------------ induced sweep

struct InducedSweepEntry {
  double delta = 0.0;
  double u1_total = 0.0;
  std::vector<double> u1;
  double tail = 0.0;
  double tail_change = 0.0;
  double h_difference = 0.0;
  double undecided_fraction = 0.0;
  std::string error;
};

struct InducedSweepConfig {
  int n_theta = 256;
  int n_x = 128;
  HyperbolicParams hp{};
  int probes = 1;
  int cap = 10000;
  std::uint64_t seed = 7;
  int u1_levels = 200;
  int tail_N = 40;
  double q = 2.0;
};

struct InducedSweepReport {
  std::vector<InducedSweepEntry> entries;
  /// Spearman correlations across the sweep.
  double spearman_u1_tail = 0.0;
  double spearman_hdiff_tail = 0.0;
  TailReport base_tail;
  double base_undecided = 0.0;
};

InducedSweepReport induced_sweep(const SkewMapParams& base, std::span<const double> deltas,
                                 const InducedSweepConfig& cfg);

/// Spearman rank correlation with average ranks for ties; 0 if either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace srb
