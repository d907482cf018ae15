#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "srb/maps.hpp"

namespace srb {

/// Constants of the hyperbolic-time definition: expansion exponent c,
/// slack 0 < eps < c/2, deep-return margin 0 < eta < 1/4, and the first
/// admissible return time p_start.
struct HyperbolicParams {
  double c = 0.25;
  double eps = 0.0625;
  double eta = 0.1;
  int p_start = 20;

  /// Throws ValidationError when an invariant fails.
  void validate() const;

  /// c = half the median vertical Lyapunov exponent, eps = c/4.
  static HyperbolicParams from_lyapunov(double median_exponent, double eta = 0.1, int p_start = 20);
};

/// Largest return code: the first r with sqrt(alpha) e^{-r} below the
/// smallest positive double. x = 0 maps here.
int r_cap(double alpha);

/// Depth of x in the critical strip: 0 for |x| >= sqrt(alpha), otherwise the
/// r >= 1 with sqrt(alpha) e^{-r} <= |x| < sqrt(alpha) e^{-(r-1)}. Points on a
/// boundary go to the outer (smaller r) interval. Requires alpha > 0.
int return_code(double x, double alpha);

/// (1/2 - 2 eta) log(1/alpha).
double deep_return_threshold(double alpha, double eta);

/// G_n: indices j in [1, n-1] with r_j >= 1 and r_j >= the deep-return threshold.
/// Requires rcodes.size() > n.
std::vector<int> deep_return_indices(std::span<const int> rcodes, double alpha, double eta, int n);
std::vector<int> deep_return_indices(const OrbitTrace& trace, double alpha, double eta, int n);

/// Whether the deep-return weight sum_{j in G_n} r_j exceeds 2n (the point lies in E_n).
bool is_exceptional(std::span<const int> rcodes, double alpha, double eta, int n);
bool is_exceptional(const OrbitTrace& trace, double alpha, double eta, int n);

/// n is a hyperbolic time if for every 0 <= k < n
///   sum_{i in G_n, k <= i < n} r_i < (c + eps)(n - k).
bool is_hyperbolic_time(std::span<const int> rcodes, const HyperbolicParams& hp, double alpha, int n);
bool is_hyperbolic_time(const OrbitTrace& trace, const HyperbolicParams& hp, double alpha, int n);

/// Incremental hyperbolic-time test along a streamed orbit.
///
/// With D_i = r_i for i in G and 0 otherwise, P_n = sum_{i<n} D_i - (c+eps) n,
/// n is a hyperbolic time iff P_n < min_{k<n} P_k. Feed r_0, r_1, ... in order.
class HyperbolicTimeTracker {
 public:
  HyperbolicTimeTracker(const HyperbolicParams& hp, double alpha);

  /// Consumes r_n for the current time n, then reports whether n + 1 is a
  /// hyperbolic time.
  bool push(int r);
  /// Current time n (number of codes consumed).
  int time() const { return n_; }

 private:
  double rate_;
  double threshold_;
  int n_ = 0;
  double potential_ = 0.0;
  double min_potential_ = 0.0;
};

/// Smallest n in [p_start, max_steps] that is both a hyperbolic time and a
/// return (r_n >= 1); nullopt if none. DomainEscape propagates.
std::optional<int> first_hyperbolic_return(const SkewMapParams& params, CylinderPoint pt,
                                           const HyperbolicParams& hp, int max_steps,
                                           std::uint64_t seed = 0);

}  // namespace srb
