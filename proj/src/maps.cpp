#include "srb/maps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

#include "srb/random.hpp"
#include "srb/symbolic.hpp"

namespace srb {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kRangeSamples = 1 << 16;

std::uint64_t to_fixed(double t) {
  // t in [0,1); 2^64 t rounds up to 2^64 for t within an ulp of 1
  const double scaled = std::ldexp(t, 64);
  if (scaled >= 0x1.0p64) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(scaled);
}

double from_fixed(std::uint64_t q) { return std::ldexp(static_cast<double>(q >> 11), -53); }

std::uint64_t mix_bits(double a, double b, std::uint64_t seed) {
  std::uint64_t s = seed;
  std::uint64_t ua = 0;
  std::uint64_t ub = 0;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&ua, &a, sizeof ua);
  std::memcpy(&ub, &b, sizeof ub);
  s ^= splitmix64(ua);
  s ^= splitmix64(ub) * 0x9e3779b97f4a7c15ULL;
  return splitmix64(s);
}

std::string format_escape(const char* where, double x, const DomainInterval& d) {
  std::ostringstream os;
  os.precision(17);
  os << where << ": x = " << x << " left I = [" << d.lo << ", " << d.hi << "]";
  return os.str();
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::viana: return "viana";
    case Variant::test_doubling_product: return "test_doubling_product";
    case Variant::test_linear: return "test_linear";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  if (name == "viana") return Variant::viana;
  if (name == "test_doubling_product") return Variant::test_doubling_product;
  if (name == "test_linear") return Variant::test_linear;
  throw ValidationError("variant: unknown map variant '" + std::string(name) + "'");
}

double wrap_unit(double t) {
  double r = t - std::floor(t);
  if (r >= 1.0) r = 0.0;
  if (r < 0.0) r = 0.0;
  return r;
}

DomainInterval invariant_domain(double a_min, double a_max, double margin) {
  const double hi = a_max + margin;
  return {a_min - hi * hi - margin, hi};
}

SkewMapParams SkewMapParams::viana(int degree, double a0, double alpha,
                                   std::vector<Perturbation> perturb,
                                   std::optional<DomainInterval> domain) {
  SkewMapParams p;
  p.variant_ = Variant::viana;
  p.degree_ = degree;
  p.a0_ = a0;
  p.alpha_ = alpha;
  p.perturb_ = std::move(perturb);
  if (degree < 2) throw ValidationError("degree: must be >= 2");
  if (!(a0 > 1.0 && a0 < 2.0)) throw ValidationError("a0: must lie in (1, 2)");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha: must be >= 0");
  for (const auto& t : p.perturb_) {
    if (!std::isfinite(t.amplitude) || !std::isfinite(t.phase))
      throw ValidationError("perturb: amplitude and phase must be finite");
    if (t.frequency < 0) throw ValidationError("perturb: frequency must be >= 0");
  }
  if (domain) {
    p.domain_ = *domain;
  } else {
    const auto [lo, hi] = p.a_range();
    p.domain_ = invariant_domain(lo, hi);
  }
  p.validate();
  return p;
}

SkewMapParams SkewMapParams::doubling_product(double alpha) {
  SkewMapParams p;
  p.variant_ = Variant::test_doubling_product;
  p.degree_ = 2;
  p.a0_ = 0.0;
  p.alpha_ = alpha;
  p.domain_ = {0.0, 1.0};
  if (!(alpha >= 0.0)) throw ValidationError("alpha: must be >= 0");
  return p;
}

SkewMapParams SkewMapParams::linear(double alpha) {
  SkewMapParams p;
  p.variant_ = Variant::test_linear;
  p.degree_ = 1;
  p.a0_ = 0.0;
  p.alpha_ = alpha;
  p.domain_ = {0.0, 1.0};
  if (!(alpha >= 0.0)) throw ValidationError("alpha: must be >= 0");
  return p;
}

int SkewMapParams::theta_expansion() const {
  switch (variant_) {
    case Variant::viana: return degree_;
    case Variant::test_doubling_product: return 2;
    case Variant::test_linear: return 1;
  }
  return 1;
}

int SkewMapParams::x_expansion() const {
  return variant_ == Variant::test_doubling_product ? 2 : 1;
}

double SkewMapParams::a(double theta) const {
  double v = a0_ + alpha_ * std::sin(kTwoPi * theta);
  for (const auto& t : perturb_) v += t.amplitude * std::sin(kTwoPi * t.frequency * theta + t.phase);
  return v;
}

std::pair<double, double> SkewMapParams::a_range() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < kRangeSamples; ++i) {
    const double v = a(static_cast<double>(i) / kRangeSamples);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

void SkewMapParams::validate() {
  if (variant_ != Variant::viana) return;
  const auto& d = domain_;
  if (!(d.lo > -2.0 && d.lo < d.hi && d.hi < 2.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "domain: need -2 < lo < hi < 2, got [" << d.lo << ", " << d.hi << "]";
    throw ValidationError(os.str());
  }
  // x -> a - x^2 maps [lo,hi] onto [a - max(lo^2,hi^2), a - min x^2]
  const auto [a_min, a_max] = a_range();
  const double max_sq = std::max(d.lo * d.lo, d.hi * d.hi);
  const double min_sq = (d.lo <= 0.0 && d.hi >= 0.0) ? 0.0 : std::min(d.lo * d.lo, d.hi * d.hi);
  if (!(a_max - min_sq < d.hi && a_min - max_sq > d.lo)) {
    std::ostringstream os;
    os.precision(17);
    os << "domain: phi(S1 x I) not inside the interior of S1 x I (a in [" << a_min << ", "
       << a_max << "], I = [" << d.lo << ", " << d.hi << "])";
    throw ValidationError(os.str());
  }
  // Sampled check on a theta x x lattice; catches a(theta) peaks between range samples.
  constexpr int kTheta = 4096;
  constexpr int kX = 257;
  for (int i = 0; i < kTheta; ++i) {
    const double th = (i + 0.5) / kTheta;
    const double at = a(th);
    for (int j = 0; j < kX; ++j) {
      const double x = d.lo + d.length() * j / (kX - 1);
      const double y = at - x * x;
      if (!(y > d.lo && y < d.hi))
        throw ValidationError(format_escape("domain: sampled forward-invariance check", y, d));
    }
  }
}

SkewMapParams SkewMapParams::with_perturbation(const Perturbation& p,
                                               std::optional<DomainInterval> domain) const {
  if (variant_ != Variant::viana) throw ValidationError("perturb: only the viana variant takes perturbations");
  auto terms = perturb_;
  terms.push_back(p);
  return viana(degree_, a0_, alpha_, std::move(terms), domain.value_or(domain_));
}

SkewMapParams SkewMapParams::with_domain(const DomainInterval& domain) const {
  if (variant_ != Variant::viana) throw ValidationError("domain: test maps live on [0,1]");
  return viana(degree_, a0_, alpha_, perturb_, domain);
}

CylinderPoint eval(const SkewMapParams& params, CylinderPoint pt) {
  CylinderPoint out;
  switch (params.variant()) {
    case Variant::viana:
      out.theta = wrap_unit(params.degree() * pt.theta);
      out.x = params.a(pt.theta) - pt.x * pt.x;
      break;
    case Variant::test_doubling_product:
      out.theta = wrap_unit(2.0 * pt.theta);
      out.x = wrap_unit(2.0 * pt.x);
      break;
    case Variant::test_linear:
      out = pt;
      break;
  }
  if (!params.domain().contains(out.x)) throw DomainEscape(format_escape("eval", out.x, params.domain()), out.x);
  return out;
}

double vertical_derivative(const SkewMapParams& params, CylinderPoint pt) {
  switch (params.variant()) {
    case Variant::viana: return -2.0 * pt.x;
    case Variant::test_doubling_product: return 2.0;
    case Variant::test_linear: return 1.0;
  }
  return 0.0;
}

double jacobian_det(const SkewMapParams& params, CylinderPoint pt) {
  return params.theta_expansion() * std::abs(vertical_derivative(params, pt));
}

OrbitCursor::OrbitCursor(const SkewMapParams& params, CylinderPoint start, std::uint64_t seed)
    : OrbitCursor(params, start, DigitStream{mix_bits(start.theta, start.x, seed)}) {}

OrbitCursor::OrbitCursor(const SkewMapParams& params, CylinderPoint start, DigitStream digits)
    : params_(&params), theta_q_(to_fixed(wrap_unit(start.theta))), x_(start.x), digits_(digits.state) {
  if (!params.domain().contains(start.x))
    throw DomainEscape(format_escape("orbit start", start.x, params.domain()), start.x);
  if (params.variant() == Variant::test_doubling_product) x_q_ = to_fixed(wrap_unit(start.x));
}

CylinderPoint OrbitCursor::point() const { return {from_fixed(theta_q_), x_}; }

void OrbitCursor::step() {
  const auto& p = *params_;
  switch (p.variant()) {
    case Variant::viana: {
      const double th = from_fixed(theta_q_);
      x_ = p.a(th) - x_ * x_;
      const auto d = static_cast<std::uint64_t>(p.degree());
      // multiplication wraps mod 2^64, i.e. mod 1 on the circle
      theta_q_ = theta_q_ * d + splitmix64(digits_) % d;
      break;
    }
    case Variant::test_doubling_product: {
      const std::uint64_t bits = splitmix64(digits_);
      theta_q_ = (theta_q_ << 1) | (bits & 1u);
      x_q_ = (x_q_ << 1) | ((bits >> 1) & 1u);
      x_ = from_fixed(x_q_);
      break;
    }
    case Variant::test_linear:
      break;
  }
  ++steps_;
  if (!p.domain().contains(x_)) throw DomainEscape(format_escape("orbit", x_, p.domain()), x_);
}

OrbitTrace orbit(const SkewMapParams& params, CylinderPoint pt, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("orbit: n must be >= 1");
  OrbitTrace trace;
  trace.points.reserve(static_cast<std::size_t>(n) + 1);
  trace.dlog.reserve(static_cast<std::size_t>(n) + 1);
  trace.rcodes.reserve(static_cast<std::size_t>(n) + 1);
  const double alpha = params.alpha();
  auto record = [&](CylinderPoint q) {
    trace.points.push_back(q);
    trace.dlog.push_back(std::log(std::abs(vertical_derivative(params, q))));
    trace.rcodes.push_back(alpha > 0.0 ? return_code(q.x, alpha) : 0);
  };
  OrbitCursor cursor(params, pt, seed);
  record(pt);
  for (int j = 0; j < n; ++j) {
    try {
      cursor.step();
    } catch (const DomainEscape& e) {
      throw OrbitEscape(e.what(), e.value(), std::move(trace));
    }
    record(cursor.point());
  }
  return trace;
}

}  // namespace srb
