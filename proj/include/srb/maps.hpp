#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srb/errors.hpp"

namespace srb {

enum class Variant { viana, test_doubling_product, test_linear };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

/// Extra term amplitude * sin(2 pi (frequency * theta) + phase) added to a(theta).
struct Perturbation {
  double amplitude = 0.0;
  int frequency = 1;
  double phase = 0.0;

  bool operator==(const Perturbation&) const = default;
};

/// The fiber interval I. Closed.
struct DomainInterval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const DomainInterval&) const = default;
};

/// A point of S^1 x I with theta in [0,1).
struct CylinderPoint {
  double theta = 0.0;
  double x = 0.0;

  bool operator==(const CylinderPoint&) const = default;
};

/// Reduces a real to [0,1), fixing the rounding cases where fmod lands on 1.
double wrap_unit(double t);

/// Forward-invariant interval for the fiber maps x -> a - x^2 with a in
/// [a_min, a_max]: hi = a_max + margin, lo = a_min - hi^2 - margin.
DomainInterval invariant_domain(double a_min, double a_max, double margin = 0.01);

/// Parameters of the skew product
///   (theta, x) -> (d theta mod 1, a(theta) - x^2),
///   a(theta) = a0 + alpha sin(2 pi theta) + sum of perturbation terms,
/// plus two analytically solvable test maps on [0,1)x[0,1]:
/// the doubling product (2 theta, 2x) mod 1 and the identity.
///
/// Instances are validated on construction and immutable afterwards.
class SkewMapParams {
 public:
  /// Throws ValidationError if d < 2, a0 is outside (1,2), alpha < 0, or no
  /// forward-invariant I inside (-2,2) exists. With no explicit domain the
  /// default invariant_domain() of the sampled a(theta) range is used.
  static SkewMapParams viana(int degree, double a0, double alpha,
                             std::vector<Perturbation> perturb = {},
                             std::optional<DomainInterval> domain = std::nullopt);

  /// Test maps. `alpha` only sets the width sqrt(alpha) of the critical
  /// strip used for return codes; the dynamics ignore it.
  static SkewMapParams doubling_product(double alpha = 0.0);
  static SkewMapParams linear(double alpha = 0.0);

  Variant variant() const { return variant_; }
  int degree() const { return degree_; }
  double a0() const { return a0_; }
  double alpha() const { return alpha_; }
  const std::vector<Perturbation>& perturb() const { return perturb_; }
  const DomainInterval& domain() const { return domain_; }

  /// Base-circle expansion factor (d, 2 or 1).
  int theta_expansion() const;
  /// Constant fiber expansion factor of the test maps; 1 for viana.
  int x_expansion() const;

  double a(double theta) const;
  /// Range of a(theta) sampled on a fine theta grid.
  std::pair<double, double> a_range() const;

  /// Copy with one more perturbation term and the given domain (default:
  /// keep the current one). Revalidates.
  SkewMapParams with_perturbation(const Perturbation& p,
                                  std::optional<DomainInterval> domain = std::nullopt) const;
  SkewMapParams with_domain(const DomainInterval& domain) const;

  bool operator==(const SkewMapParams&) const = default;

 private:
  SkewMapParams() = default;
  void validate();

  Variant variant_ = Variant::viana;
  int degree_ = 16;
  double a0_ = 1.9;
  double alpha_ = 0.0;
  std::vector<Perturbation> perturb_;
  DomainInterval domain_{};
};

/// One application of the map in plain double arithmetic.
/// Throws DomainEscape if the image leaves I.
CylinderPoint eval(const SkewMapParams& params, CylinderPoint pt);

/// d/dx of the fiber map: -2x for viana, 2 (doubling) or 1 (identity).
double vertical_derivative(const SkewMapParams& params, CylinderPoint pt);

/// |det D phi| = |g'(theta)| |d_x f(theta, x)|; the derivative is triangular.
double jacobian_det(const SkewMapParams& params, CylinderPoint pt);

struct OrbitTrace {
  std::vector<CylinderPoint> points;
  /// log |d_x f| at each point, -inf on the critical line.
  std::vector<double> dlog;
  /// Return codes r_j of each point for the params' alpha.
  std::vector<int> rcodes;

  std::size_t size() const { return points.size(); }
};

/// Orbit aborted by a domain escape; carries the trace up to the last valid point.
class OrbitEscape : public DomainEscape {
 public:
  OrbitEscape(const std::string& what, double value, OrbitTrace partial)
      : DomainEscape(what, value), partial_(std::move(partial)) {}
  const OrbitTrace& partial() const { return partial_; }

 private:
  OrbitTrace partial_;
};

/// Streaming orbit generator.
///
/// Expanding coordinates (theta always, x for the doubling product) are kept
/// as 64-bit binary fractions. Each step multiplies by the expansion factor
/// and shifts in fresh pseudo-random low digits, so the orbit stays a
/// Lebesgue-typical orbit instead of collapsing onto 0 once double precision
/// bits run out. The digit stream is a pure function of the start point and
/// `seed`.
class OrbitCursor {
 public:
  /// Raw digit-stream state; two cursors sharing it and a theta start follow
  /// the same circle orbit.
  struct DigitStream {
    std::uint64_t state;
  };

  OrbitCursor(const SkewMapParams& params, CylinderPoint start, std::uint64_t seed = 0);
  OrbitCursor(const SkewMapParams& params, CylinderPoint start, DigitStream digits);

  CylinderPoint point() const;
  double x() const { return x_; }
  std::size_t steps() const { return steps_; }

  /// Advances one step. Throws DomainEscape if x leaves I.
  void step();

 private:
  const SkewMapParams* params_;
  std::uint64_t theta_q_;
  std::uint64_t x_q_ = 0;
  double x_;
  std::uint64_t digits_;
  std::size_t steps_ = 0;
};

/// Trace of length n+1 starting at pt. Throws ValidationError for n < 1 and
/// OrbitEscape if the orbit leaves I.
OrbitTrace orbit(const SkewMapParams& params, CylinderPoint pt, int n, std::uint64_t seed = 0);

}  // namespace srb
