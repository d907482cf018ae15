#include "srb/symbolic.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace srb {

void HyperbolicParams::validate() const {
  if (!(c > 0.0)) throw ValidationError("hp.c: must be > 0");
  if (!(eps > 0.0 && eps < c / 2.0)) throw ValidationError("hp.eps: need 0 < eps < c/2");
  if (!(eta > 0.0 && eta < 0.25)) throw ValidationError("hp.eta: need 0 < eta < 1/4");
  if (p_start < 1) throw ValidationError("hp.p_start: must be >= 1");
}

HyperbolicParams HyperbolicParams::from_lyapunov(double median_exponent, double eta, int p_start) {
  HyperbolicParams hp;
  hp.c = 0.5 * median_exponent;
  hp.eps = hp.c / 4.0;
  hp.eta = eta;
  hp.p_start = p_start;
  hp.validate();
  return hp;
}

namespace {

// Boundary values sqrt(alpha) e^{-r}. Both the closed form and the cap use these,
// so ties resolve identically everywhere.
double strip_edge(double root_alpha, int r) { return root_alpha * std::exp(-static_cast<double>(r)); }

void require_alpha(double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha: return codes need alpha > 0");
}

void require_length(std::size_t size, int n) {
  if (n < 0 || static_cast<std::size_t>(n) >= size)
    throw ValidationError("n = " + std::to_string(n) + " needs a trace longer than n (length " +
                          std::to_string(size) + ")");
}

}  // namespace

int r_cap(double alpha) {
  require_alpha(alpha);
  const double root = std::sqrt(alpha);
  const double tiny = std::numeric_limits<double>::denorm_min();
  // root / tiny overflows; take the difference of logs
  int r = static_cast<int>(std::floor(std::log(root) - std::log(tiny))) - 2;
  if (r < 1) r = 1;
  while (!(strip_edge(root, r) < tiny)) ++r;
  return r;
}

int return_code(double x, double alpha) {
  require_alpha(alpha);
  const double root = std::sqrt(alpha);
  const double ax = std::abs(x);
  if (ax >= root) return 0;
  if (ax == 0.0) return r_cap(alpha);
  const double depth = std::ceil(std::log(root / ax));
  // the cap sits past 700 for any alpha <= 1; only compute it near there
  const int cap = depth > 700.0 ? r_cap(alpha) : std::numeric_limits<int>::max();
  int r = depth < 1.0 ? 1 : static_cast<int>(depth);
  if (r > cap) r = cap;
  // Settle rounding in the log onto the tabulated edges.
  while (r > 1 && ax >= strip_edge(root, r - 1)) --r;
  while (r < cap && ax < strip_edge(root, r)) ++r;
  return r;
}

double deep_return_threshold(double alpha, double eta) {
  return (0.5 - 2.0 * eta) * std::log(1.0 / alpha);
}

std::vector<int> deep_return_indices(std::span<const int> rcodes, double alpha, double eta, int n) {
  require_length(rcodes.size(), n);
  const double threshold = deep_return_threshold(alpha, eta);
  std::vector<int> out;
  for (int j = 1; j <= n - 1; ++j) {
    const int r = rcodes[static_cast<std::size_t>(j)];
    if (r >= 1 && r >= threshold) out.push_back(j);
  }
  return out;
}

std::vector<int> deep_return_indices(const OrbitTrace& trace, double alpha, double eta, int n) {
  return deep_return_indices(trace.rcodes, alpha, eta, n);
}

bool is_exceptional(std::span<const int> rcodes, double alpha, double eta, int n) {
  long long weight = 0;
  for (int j : deep_return_indices(rcodes, alpha, eta, n)) weight += rcodes[static_cast<std::size_t>(j)];
  return weight > 2LL * n;
}

bool is_exceptional(const OrbitTrace& trace, double alpha, double eta, int n) {
  return is_exceptional(trace.rcodes, alpha, eta, n);
}

bool is_hyperbolic_time(std::span<const int> rcodes, const HyperbolicParams& hp, double alpha, int n) {
  if (n < 1) throw ValidationError("is_hyperbolic_time: n must be >= 1");
  require_length(rcodes.size(), n);
  const auto deep = deep_return_indices(rcodes, alpha, hp.eta, n);
  // suffix sums over G_n, walking k from n-1 down to 0
  const double rate = hp.c + hp.eps;
  double suffix = 0.0;
  auto it = deep.rbegin();
  for (int k = n - 1; k >= 0; --k) {
    while (it != deep.rend() && *it >= k) {
      suffix += rcodes[static_cast<std::size_t>(*it)];
      ++it;
    }
    if (!(suffix < rate * (n - k))) return false;
  }
  return true;
}

bool is_hyperbolic_time(const OrbitTrace& trace, const HyperbolicParams& hp, double alpha, int n) {
  return is_hyperbolic_time(trace.rcodes, hp, alpha, n);
}

HyperbolicTimeTracker::HyperbolicTimeTracker(const HyperbolicParams& hp, double alpha)
    : rate_(hp.c + hp.eps), threshold_(deep_return_threshold(alpha, hp.eta)) {}

bool HyperbolicTimeTracker::push(int r) {
  const bool deep = n_ >= 1 && r >= 1 && r >= threshold_;
  // P_k for k <= n joins the running minimum before P_{n+1} is formed
  if (potential_ < min_potential_) min_potential_ = potential_;
  potential_ += (deep ? r : 0) - rate_;
  ++n_;
  return potential_ < min_potential_;
}

std::optional<int> first_hyperbolic_return(const SkewMapParams& params, CylinderPoint pt,
                                           const HyperbolicParams& hp, int max_steps,
                                           std::uint64_t seed) {
  hp.validate();
  if (max_steps < hp.p_start) throw ValidationError("max_steps: must be >= p_start");
  const double alpha = params.alpha();
  if (!(alpha > 0.0)) return std::nullopt;  // no critical strip, no returns
  HyperbolicTimeTracker tracker(hp, alpha);
  OrbitCursor cursor(params, pt, seed);
  for (int n = 1; n <= max_steps; ++n) {
    const int r_prev = return_code(cursor.x(), alpha);
    const bool hyperbolic = tracker.push(r_prev);
    cursor.step();
    if (n < hp.p_start || !hyperbolic) continue;
    if (return_code(cursor.x(), alpha) >= 1) return n;
  }
  return std::nullopt;
}

}  // namespace srb
