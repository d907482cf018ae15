#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "srb/symbolic.hpp"
#include "srb/transfer.hpp"

namespace srb {

/// Cell-level approximation of the hyperbolic-return partition: each cell
/// carries the first hyperbolic return h of its center.
struct InducedScheme {
  Grid grid;
  /// h per cell; nullopt when no hyperbolic return was found within max_steps.
  std::vector<std::optional<int>> h;
  /// Fraction of extra probes in the cell whose h differs from the center's.
  std::vector<double> disagreement;
  double undecided_fraction = 0.0;
  HyperbolicParams hp;
  int max_steps = 0;

  /// h with undecided cells counted at the cap.
  int h_or_cap(std::size_t cell) const { return h[cell] ? *h[cell] : max_steps; }
};

/// Cell centers use a seed-independent digit stream, so `seed` only moves the
/// extra probes (probes_per_cell - 1 per cell).
InducedScheme build_induced(const SkewMapParams& params, const Grid& grid, const HyperbolicParams& hp,
                            int probes_per_cell, int max_steps, std::uint64_t seed);

struct TailReport {
  int N = 1;
  double q = 2.0;
  /// || sum_{j >= N} chi_{h > j} ||_q with undecided cells at the cap.
  double tail_q_norm = 0.0;
  /// h -> number of cells; undecided cells under key -1.
  std::map<int, std::size_t> histogram;
};

TailReport return_time_tail(const InducedScheme& scheme, int N, double q);

struct ReconstructResult {
  GridDensity density;
  /// sum_{j < N} mu({h > j}) before normalization.
  double raw_mass = 0.0;
  /// sum_{j >= N} mu({h > j}); undecided cells contribute at the cap.
  double truncated_mass = 0.0;
};

/// mu* = sum_{j < truncate_N} L^j (mu restricted to {h > j}), normalized.
ReconstructResult reconstruct_srb(const InducedScheme& scheme, const GridDensity& mu, int truncate_N,
                                  const UlamOperator& op);

/// For j = 1..N: mass of cells decided in both schemes where exactly one has h = j.
std::vector<double> u1_check(const InducedScheme& s0, const InducedScheme& s1, int N);
std::vector<double> u1_check(const SkewMapParams& params0, const SkewMapParams& params1, const Grid& grid,
                             const HyperbolicParams& hp, int N, int probes, int cap, std::uint64_t seed);
/// Mass of cells undecided in either scheme (excluded from u1_check).
double u1_excluded_mass(const InducedScheme& s0, const InducedScheme& s1);

/// ||h_1 - h_0||_q over cells decided in both schemes.
double return_time_difference(const InducedScheme& s0, const InducedScheme& s1, double q);

struct DistortionReport {
  /// Max Jacobian ratio per cell; 1 where no pair was accepted.
  std::vector<double> cell_max;
  double global_max = 1.0;
  std::size_t accepted_pairs = 0;
  /// Pairs with a zero Jacobian along the orbit.
  std::size_t critical_discards = 0;
  /// Pairs whose return-code itineraries split before time h.
  std::size_t itinerary_discards = 0;
};

/// Jacobian ratios |J_h(p1) / J_h(p2)| with J_h the product of jacobian_det
/// over the first h steps. p2 shares p1's fiber and circle itinerary and sits
/// at a log-uniform vertical offset; pairs that do not share the signed
/// return-code itinerary up to h (and so lie in different partition pieces)
/// are discarded and counted.
DistortionReport distortion_probe(const SkewMapParams& params, const InducedScheme& scheme, int pairs_per_cell,
                                  std::uint64_t seed);

/// CSV: cell_theta_idx,cell_x_idx,h_or_-1,disagreement
void write_scheme_csv(std::ostream& os, const InducedScheme& scheme);

}  // namespace srb
