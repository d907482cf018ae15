#include "srb/cli.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "srb/experiments.hpp"
#include "srb/random.hpp"

namespace srb::cli {

namespace {

using nlohmann::json;

const std::set<std::string> kKinds = {"stability", "endecay", "recovery", "growth", "induced", "lyapunov", "ulam"};

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw ValidationError(field + ": " + message);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) parts.push_back(trim(item));
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double parse_double(const std::string& s, const std::string& field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    invalid(field, "cannot parse '" + s + "' as a number");
  return v;
}

int parse_int(const std::string& s, const std::string& field) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    invalid(field, "cannot parse '" + s + "' as an integer");
  return v;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int samples_or_default(const ExperimentConfig& cfg) {
  if (cfg.samples) return *cfg.samples;
  return cfg.kind == "endecay" ? 100000 : 10000;
}

std::vector<int> n_list_or_default(const ExperimentConfig& cfg) {
  if (!cfg.n_list.empty()) return cfg.n_list;
  std::vector<int> ns;
  for (int n = 10; n <= 200; ++n) ns.push_back(n);
  return ns;
}

std::vector<double> deltas_or_default(const ExperimentConfig& cfg) {
  if (!cfg.deltas.empty()) return cfg.deltas;
  if (cfg.kind == "stability") return {0.0, 1e-3, 1e-2, 1e-1};
  return {};
}

std::vector<double> alphas_or_default(const ExperimentConfig& cfg) {
  return cfg.alphas.empty() ? std::vector<double>{cfg.alpha} : cfg.alphas;
}

double a0_or_default(const ExperimentConfig& cfg) {
  if (cfg.a0) return *cfg.a0;
  return cfg.kind == "stability" ? 1.7 : 1.9;
}

void require_positive(int v, const char* field) {
  if (v < 1) invalid(field, "must be >= 1");
}

SkewMapParams params_with_alpha(const ExperimentConfig& cfg, double alpha) {
  const Variant v = variant_from_string(cfg.variant);
  if (v == Variant::viana) return SkewMapParams::viana(cfg.degree, a0_or_default(cfg), alpha, cfg.perturb, cfg.domain);
  if (!cfg.perturb.empty()) invalid("perturb", "test variants take no perturbation");
  if (cfg.domain) invalid("domain", "test variants live on [0,1]");
  return v == Variant::test_doubling_product ? SkewMapParams::doubling_product(alpha) : SkewMapParams::linear(alpha);
}

struct Artifact {
  std::string name;
  std::string content;
};

void write_atomically(const std::filesystem::path& dir, const std::vector<Artifact>& files) {
  std::filesystem::create_directories(dir);
  for (const auto& f : files) {
    const auto target = dir / f.name;
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      os << f.content;
      os.flush();
      if (!os) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
  }
}

json entry_error(const std::string& e) { return e.empty() ? json(nullptr) : json(e); }

json opt_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::string opt_csv(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-1"); }

// Each kind fills the CSV body and the JSON summary and returns a one-line summary.
std::string run_stability(const ExperimentConfig& cfg, std::string& csv, json& j) {
  PipelineConfig pc;
  pc.n_theta = cfg.n_theta;
  pc.n_x = cfg.n_x;
  pc.subsamples = cfg.subsamples;
  pc.seed = *cfg.seed;
  pc.tol = cfg.tol;
  pc.max_iter = cfg.max_iter;
  pc.birkhoff_orbits = cfg.orbits;
  pc.birkhoff_length = cfg.orbit_length;
  pc.birkhoff_burn_in = cfg.burn_in;
  pc.with_induced = cfg.with_induced;
  pc.hp = cfg.hp;
  pc.induced_cap = cfg.cap;
  pc.truncate_N = cfg.truncate_n;
  const auto deltas = deltas_or_default(cfg);
  const auto report = stability_sweep(map_params(cfg), deltas, pc);
  std::ostringstream os;
  os << "delta,l1,birkhoff_crosscheck,residual,induced_l1,error\n";
  json entries = json::array();
  std::size_t failed = 0;
  for (const auto& e : report.entries) {
    os << num(e.delta) << ',' << num(e.l1) << ',' << num(e.birkhoff_crosscheck) << ',' << num(e.residual) << ','
       << (e.induced_l1 ? num(*e.induced_l1) : std::string()) << ',' << '"' << e.error << '"' << '\n';
    entries.push_back({{"delta", e.delta},
                       {"l1", e.l1},
                       {"birkhoff_crosscheck", e.birkhoff_crosscheck},
                       {"residual", e.residual},
                       {"induced_l1", e.induced_l1 ? json(*e.induced_l1) : json(nullptr)},
                       {"error", entry_error(e.error)}});
    failed += e.error.empty() ? 0 : 1;
  }
  csv = os.str();
  j["entries"] = entries;
  j["grid"] = {{"n_theta", report.grid.n_theta}, {"n_x", report.grid.n_x},
               {"domain", {report.grid.domain.lo, report.grid.domain.hi}}};
  j["failed_deltas"] = failed;
  return std::to_string(report.entries.size()) + " deltas, " + std::to_string(failed) + " failed";
}

std::string run_endecay(const ExperimentConfig& cfg, std::string& csv, json& j) {
  const auto ns = n_list_or_default(cfg);
  const auto report = estimate_exceptional_measure(map_params(cfg), ns, samples_or_default(cfg), cfg.hp, *cfg.seed);
  std::ostringstream os;
  os << "n,count,fraction,isotonic\n";
  json entries = json::array();
  for (const auto& e : report.entries) {
    os << e.n << ',' << e.count << ',' << num(e.fraction) << ',' << num(e.isotonic) << '\n';
    entries.push_back({{"n", e.n}, {"count", e.count}, {"fraction", e.fraction}, {"isotonic", e.isotonic}});
  }
  csv = os.str();
  j["entries"] = entries;
  j["samples"] = report.samples;
  j["fitted"] = report.fitted;
  j["fit_bins"] = report.fit_bins;
  j["notice"] = report.notice;
  if (report.fitted) {
    j["c_hat"] = report.c_hat;
    j["gamma_hat"] = report.gamma_hat;
    j["r_squared"] = report.r_squared;
    return "gamma_hat = " + num(report.gamma_hat) + ", R^2 = " + num(report.r_squared);
  }
  return report.notice;
}

std::string run_recovery(const ExperimentConfig& cfg, std::string& csv, json& j) {
  std::ostringstream os;
  os << "alpha,samples,censored,median,log_ratio\n";
  json entries = json::array();
  double lo = INFINITY, hi = 0.0;
  for (double alpha : alphas_or_default(cfg)) {
    const auto s = estimate_recovery_depth(params_with_alpha(cfg, alpha), samples_or_default(cfg), cfg.hp.eta,
                                           *cfg.seed, cfg.cap);
    os << num(alpha) << ',' << s.samples << ',' << s.censored << ',' << num(s.median) << ',' << num(s.log_ratio)
       << '\n';
    entries.push_back({{"alpha", alpha},
                       {"samples", s.samples},
                       {"censored", s.censored},
                       {"median", s.median},
                       {"log_ratio", s.log_ratio}});
    lo = std::min(lo, s.log_ratio);
    hi = std::max(hi, s.log_ratio);
  }
  csv = os.str();
  j["entries"] = entries;
  // one C1 fits all alphas within factor 3 iff max/min of the ratios <= 9
  j["log_ratio_spread"] = hi / lo;
  return "median/log(1/alpha) in [" + num(lo) + ", " + num(hi) + "]";
}

std::string run_growth(const ExperimentConfig& cfg, std::string& csv, json& j) {
  const auto params = map_params(cfg);
  const auto& dom = params.domain();
  const int fibers = cfg.theta0 ? 1 : cfg.fibers;
  std::ostringstream os;
  os << "fiber,theta0,j_lo,j_hi,cross_small,cross_sqrt_alpha,cross_tenth_I,cover_time,final_length\n";
  json entries = json::array();
  int all_crossed = 0;
  for (int k = 0; k < fibers; ++k) {
    Rng rng(derive_seed(*cfg.seed, static_cast<std::uint64_t>(k)));
    const double theta0 = cfg.theta0 ? *cfg.theta0 : rng.uniform();
    const double lo = rng.uniform(dom.lo, dom.hi - cfg.j_length);
    const Interval J{lo, lo + cfg.j_length};
    const auto log = fiber_growth(params, theta0, J, cfg.hp.eta, cfg.growth_iter, rng.next());
    const bool crossed = std::all_of(log.crossing.begin(), log.crossing.end(), [](auto c) { return c.has_value(); });
    all_crossed += crossed ? 1 : 0;
    os << k << ',' << num(theta0) << ',' << num(J.lo) << ',' << num(J.hi) << ',' << opt_csv(log.crossing[0]) << ','
       << opt_csv(log.crossing[1]) << ',' << opt_csv(log.crossing[2]) << ',' << opt_csv(log.cover_time) << ','
       << num(log.final_image.length()) << '\n';
    entries.push_back({{"theta0", theta0},
                       {"crossing", {opt_int(log.crossing[0]), opt_int(log.crossing[1]), opt_int(log.crossing[2])}},
                       {"cover_time", opt_int(log.cover_time)}});
  }
  csv = os.str();
  j["entries"] = entries;
  j["fraction_all_crossed"] = static_cast<double>(all_crossed) / fibers;
  return std::to_string(all_crossed) + "/" + std::to_string(fibers) + " fibers crossed every threshold";
}

std::string run_induced(const ExperimentConfig& cfg, std::string& csv, json& j, std::vector<Artifact>& extra) {
  const auto params = map_params(cfg);
  const Grid grid = Grid::for_map(params, cfg.n_theta, cfg.n_x);
  const auto scheme = build_induced(params, grid, cfg.hp, cfg.probes, cfg.cap, *cfg.seed);
  std::ostringstream os;
  write_scheme_csv(os, scheme);
  csv = os.str();
  const auto tail = return_time_tail(scheme, cfg.tail_n, cfg.q);
  json hist = json::array();
  for (const auto& [h, count] : tail.histogram) hist.push_back({h, count});
  j["undecided_fraction"] = scheme.undecided_fraction;
  j["tail"] = {{"N", tail.N}, {"q", tail.q}, {"norm", tail.tail_q_norm}};
  j["histogram"] = hist;
  const auto deltas = deltas_or_default(cfg);
  if (!deltas.empty()) {
    InducedSweepConfig sc;
    sc.n_theta = cfg.n_theta;
    sc.n_x = cfg.n_x;
    sc.hp = cfg.hp;
    sc.probes = cfg.probes;
    sc.cap = cfg.cap;
    sc.seed = *cfg.seed;
    sc.u1_levels = cfg.u1_levels;
    sc.tail_N = cfg.tail_n;
    sc.q = cfg.q;
    const auto sweep = induced_sweep(params, deltas, sc);
    std::ostringstream ss;
    ss << "delta,u1_total,tail,tail_change,h_difference,undecided_fraction,error\n";
    for (const auto& e : sweep.entries)
      ss << num(e.delta) << ',' << num(e.u1_total) << ',' << num(e.tail) << ',' << num(e.tail_change) << ','
         << num(e.h_difference) << ',' << num(e.undecided_fraction) << ",\"" << e.error << "\"\n";
    extra.push_back({"induced_sweep.csv", ss.str()});
    j["sweep"] = {{"spearman_u1_tail", sweep.spearman_u1_tail}, {"spearman_hdiff_tail", sweep.spearman_hdiff_tail}};
  }
  return "undecided " + num(scheme.undecided_fraction) + ", tail(N=" + std::to_string(cfg.tail_n) +
         ") = " + num(tail.tail_q_norm);
}

std::string run_lyapunov(const ExperimentConfig& cfg, std::string& csv, json& j) {
  const auto s = lyapunov_vertical(map_params(cfg), samples_or_default(cfg), cfg.length, *cfg.seed);
  std::ostringstream os;
  os << "sample,exponent\n";
  for (std::size_t i = 0; i < s.exponents.size(); ++i) os << i << ',' << num(s.exponents[i]) << '\n';
  csv = os.str();
  j["median"] = s.median;
  j["mean"] = s.mean;
  j["fraction_positive"] = s.fraction_positive;
  j["zero_hits"] = s.zero_hits;
  return "median " + num(s.median) + ", fraction positive " + num(s.fraction_positive);
}

std::string run_ulam(const ExperimentConfig& cfg, std::string& csv, json& j) {
  const auto params = map_params(cfg);
  const Grid grid = Grid::for_map(params, cfg.n_theta, cfg.n_x);
  const auto op = build_ulam(params, grid, cfg.subsamples, cfg.seed.value_or(0));
  std::ostringstream os;
  os << "row,col,weight\n";
  for (std::size_t r = 0; r < op.size(); ++r)
    for (const auto& e : op.row(r)) os << r << ',' << e.col << ',' << num(e.weight) << '\n';
  csv = os.str();
  const auto inv = invariant_density(op, cfg.tol, cfg.max_iter);
  j["cells"] = op.size();
  j["nonzeros"] = op.nonzeros();
  j["invariant_residual"] = inv.residual;
  j["matvecs"] = inv.matvecs;
  return std::to_string(op.size()) + " cells, " + std::to_string(op.nonzeros()) + " nonzeros";
}

json config_json(const ExperimentConfig& cfg) {
  json perturb = json::array();
  for (const auto& p : cfg.perturb)
    perturb.push_back({{"amplitude", p.amplitude}, {"frequency", p.frequency}, {"phase", p.phase}});
  return {
      {"kind", cfg.kind},
      {"variant", cfg.variant},
      {"degree", cfg.degree},
      {"a0", cfg.a0 ? json(*cfg.a0) : json(nullptr)},
      {"alpha", cfg.alpha},
      {"perturb", perturb},
      {"domain", cfg.domain ? json{cfg.domain->lo, cfg.domain->hi} : json(nullptr)},
      {"n_theta", cfg.n_theta},
      {"n_x", cfg.n_x},
      {"hp", {{"c", cfg.hp.c}, {"eps", cfg.hp.eps}, {"eta", cfg.hp.eta}, {"p_start", cfg.hp.p_start}}},
      {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
      {"deltas", cfg.deltas},
      {"alphas", cfg.alphas},
      {"n_list", cfg.n_list},
      {"subsamples", cfg.subsamples},
      {"samples", opt_int(cfg.samples)},
      {"length", cfg.length},
      {"tol", cfg.tol},
      {"max_iter", cfg.max_iter},
      {"orbits", cfg.orbits},
      {"orbit_length", cfg.orbit_length},
      {"burn_in", cfg.burn_in},
      {"with_induced", cfg.with_induced},
      {"cap", cfg.cap},
      {"truncate_n", cfg.truncate_n},
      {"probes", cfg.probes},
      {"tail_n", cfg.tail_n},
      {"q", cfg.q},
      {"u1_levels", cfg.u1_levels},
      {"fibers", cfg.fibers},
      {"theta0", cfg.theta0 ? json(*cfg.theta0) : json(nullptr)},
      {"j_length", cfg.j_length},
      {"growth_iter", cfg.growth_iter},
  };
}

template <class T>
T get_field(const json& v, const std::string& field) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    invalid(field, "wrong type");
  }
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  if (trim(text).empty()) invalid(field, "empty list");
  for (const auto& part : split(text, ',')) out.push_back(parse_double(part, field));
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& field) {
  std::vector<int> out;
  if (trim(text).empty()) invalid(field, "empty list");
  for (const auto& part : split(text, ',')) {
    // a..b ranges
    const auto dots = part.find("..");
    if (dots != std::string::npos) {
      const int a = parse_int(part.substr(0, dots), field);
      const int b = parse_int(part.substr(dots + 2), field);
      if (b < a) invalid(field, "empty range " + part);
      for (int n = a; n <= b; ++n) out.push_back(n);
    } else {
      out.push_back(parse_int(part, field));
    }
  }
  return out;
}

std::pair<int, int> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) invalid("grid", "expected <n_theta>x<n_x>, got '" + text + "'");
  const int nt = parse_int(text.substr(0, x), "grid");
  const int nx = parse_int(text.substr(x + 1), "grid");
  if (nt < 1 || nx < 1) invalid("grid", "sizes must be positive, got '" + text + "'");
  return {nt, nx};
}

SkewMapParams map_params(const ExperimentConfig& cfg) { return params_with_alpha(cfg, cfg.alpha); }

void validate(const ExperimentConfig& cfg) {
  if (!kKinds.contains(cfg.kind)) invalid("kind", "unknown experiment '" + cfg.kind + "'");
  try {
    variant_from_string(cfg.variant);
  } catch (const ValidationError&) {
    invalid("variant", "unknown variant '" + cfg.variant + "'");
  }
  if (cfg.kind != "ulam" && !cfg.seed) invalid("seed", "required for experiment runs");
  require_positive(cfg.n_theta, "n_theta");
  require_positive(cfg.n_x, "n_x");
  require_positive(cfg.subsamples, "subsamples");
  require_positive(cfg.max_iter, "max_iter");
  require_positive(cfg.cap, "cap");
  require_positive(cfg.probes, "probes");
  require_positive(cfg.tail_n, "tail_n");
  require_positive(cfg.u1_levels, "u1_levels");
  require_positive(cfg.truncate_n, "truncate_n");
  require_positive(cfg.fibers, "fibers");
  require_positive(cfg.growth_iter, "growth_iter");
  require_positive(cfg.orbits, "orbits");
  if (cfg.samples) require_positive(*cfg.samples, "samples");
  if (!(cfg.tol > 0.0)) invalid("tol", "must be > 0");
  if (!(cfg.q >= 1.0)) invalid("q", "must be >= 1");
  if (cfg.burn_in < 0 || cfg.orbit_length <= cfg.burn_in) invalid("orbit_length", "must exceed burn_in >= 0");
  for (std::size_t i = 0; i < cfg.perturb.size(); ++i)
    if (cfg.perturb[i].frequency < 1) invalid("perturb[" + std::to_string(i) + "].frequency", "must be >= 1");
  try {
    cfg.hp.validate();
  } catch (const ValidationError& e) {
    invalid("hp", e.what());
  }
  const SkewMapParams params = map_params(cfg);
  if (cfg.kind == "ulam" || cfg.kind == "induced" || cfg.kind == "stability") {
    try {
      Grid::for_map(params, cfg.n_theta, cfg.n_x);
    } catch (const ValidationError& e) {
      invalid("grid", e.what());
    }
  }
  if (cfg.kind == "induced" && cfg.cap < cfg.hp.p_start) invalid("cap", "must be >= hp.p_start");
  const auto deltas = deltas_or_default(cfg);
  if (cfg.kind == "stability" && std::find(deltas.begin(), deltas.end(), 0.0) == deltas.end())
    invalid("deltas", "must include 0");
  if ((cfg.kind == "stability" || (cfg.kind == "induced" && !deltas.empty()))) {
    try {
      const auto domain = sweep_domain(params, deltas);
      for (double d : deltas) params.with_domain(domain).with_perturbation(sweep_direction(d), domain);
    } catch (const ValidationError& e) {
      invalid("deltas", e.what());
    }
  }
  if (cfg.kind == "endecay") {
    if (samples_or_default(cfg) < 1000) invalid("samples", "must be >= 1000");
    for (int n : n_list_or_default(cfg))
      if (n < 1) invalid("n_list", "entries must be >= 1");
    if (!(cfg.alpha > 0.0)) invalid("alpha", "must be > 0");
  }
  if (cfg.kind == "recovery")
    for (double a : alphas_or_default(cfg)) {
      if (!(a > 0.0)) invalid("alphas", "entries must be > 0");
      try {
        params_with_alpha(cfg, a);
      } catch (const ValidationError& e) {
        invalid("alphas", e.what());
      }
    }
  if (cfg.kind == "lyapunov" && cfg.length < 1000) invalid("length", "must be >= 1000");
  if (cfg.kind == "growth") {
    if (params.variant() != Variant::viana) invalid("variant", "growth needs the viana map");
    if (!(cfg.j_length > 0.0 && cfg.j_length <= params.domain().length())) invalid("j_length", "must lie in (0, |I|]");
    if (cfg.theta0 && !(*cfg.theta0 >= 0.0 && *cfg.theta0 < 1.0)) invalid("theta0", "must lie in [0,1)");
  }
}

void apply_json(ExperimentConfig& cfg, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    invalid("config", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) invalid("config", "top level must be an object");
  for (const auto& [key, v] : doc.items()) {
    if (key == "kind") cfg.kind = get_field<std::string>(v, key);
    else if (key == "variant") cfg.variant = get_field<std::string>(v, key);
    else if (key == "degree") cfg.degree = get_field<int>(v, key);
    else if (key == "a0") cfg.a0 = get_field<double>(v, key);
    else if (key == "alpha") cfg.alpha = get_field<double>(v, key);
    else if (key == "perturb") {
      if (!v.is_array()) invalid(key, "must be a list");
      cfg.perturb.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string f = "perturb[" + std::to_string(i) + "]";
        const auto& p = v[i];
        if (!p.is_object()) invalid(f, "must be an object");
        Perturbation term;
        for (const auto& [pk, pv] : p.items()) {
          if (pk == "amplitude") term.amplitude = get_field<double>(pv, f + ".amplitude");
          else if (pk == "frequency") term.frequency = get_field<int>(pv, f + ".frequency");
          else if (pk == "phase") term.phase = get_field<double>(pv, f + ".phase");
          else invalid(f + "." + pk, "unknown field");
        }
        cfg.perturb.push_back(term);
      }
    } else if (key == "domain") {
      if (v.is_null()) {
        cfg.domain.reset();
        continue;
      }
      const auto d = get_field<std::vector<double>>(v, key);
      if (d.size() != 2) invalid(key, "expected [lo, hi]");
      cfg.domain = DomainInterval{d[0], d[1]};
    } else if (key == "grid") {
      const auto [nt, nx] = parse_grid(get_field<std::string>(v, key));
      cfg.n_theta = nt;
      cfg.n_x = nx;
    } else if (key == "n_theta") cfg.n_theta = get_field<int>(v, key);
    else if (key == "n_x") cfg.n_x = get_field<int>(v, key);
    else if (key == "hp") {
      if (!v.is_object()) invalid(key, "must be an object");
      for (const auto& [hk, hv] : v.items()) {
        if (hk == "c") cfg.hp.c = get_field<double>(hv, "hp.c");
        else if (hk == "eps") cfg.hp.eps = get_field<double>(hv, "hp.eps");
        else if (hk == "eta") cfg.hp.eta = get_field<double>(hv, "hp.eta");
        else if (hk == "p_start") cfg.hp.p_start = get_field<int>(hv, "hp.p_start");
        else invalid("hp." + hk, "unknown field");
      }
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) invalid(key, "must be a nonnegative integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "out") cfg.out = get_field<std::string>(v, key);
    else if (key == "deltas") cfg.deltas = get_field<std::vector<double>>(v, key);
    else if (key == "alphas") cfg.alphas = get_field<std::vector<double>>(v, key);
    else if (key == "n_list") cfg.n_list = get_field<std::vector<int>>(v, key);
    else if (key == "subsamples") cfg.subsamples = get_field<int>(v, key);
    else if (key == "samples") cfg.samples = get_field<int>(v, key);
    else if (key == "length") cfg.length = get_field<int>(v, key);
    else if (key == "tol") cfg.tol = get_field<double>(v, key);
    else if (key == "max_iter") cfg.max_iter = get_field<int>(v, key);
    else if (key == "orbits") cfg.orbits = get_field<int>(v, key);
    else if (key == "orbit_length") cfg.orbit_length = get_field<int>(v, key);
    else if (key == "burn_in") cfg.burn_in = get_field<int>(v, key);
    else if (key == "with_induced") cfg.with_induced = get_field<bool>(v, key);
    else if (key == "cap") cfg.cap = get_field<int>(v, key);
    else if (key == "truncate_n") cfg.truncate_n = get_field<int>(v, key);
    else if (key == "probes") cfg.probes = get_field<int>(v, key);
    else if (key == "tail_n") cfg.tail_n = get_field<int>(v, key);
    else if (key == "q") cfg.q = get_field<double>(v, key);
    else if (key == "u1_levels") cfg.u1_levels = get_field<int>(v, key);
    else if (key == "fibers") cfg.fibers = get_field<int>(v, key);
    else if (key == "theta0") cfg.theta0 = get_field<double>(v, key);
    else if (key == "j_length") cfg.j_length = get_field<double>(v, key);
    else if (key == "growth_iter") cfg.growth_iter = get_field<int>(v, key);
    else invalid(key, "unknown field");
  }
}

std::string canonical_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

RunOutcome run(const ExperimentConfig& cfg, std::ostream& err) {
  RunOutcome outcome;
  try {
    validate(cfg);
  } catch (const ValidationError& e) {
    err << "invalid config: " << e.what() << '\n';
    outcome.exit_code = 2;
    return outcome;
  }
  const std::string hash = config_hash(cfg);
  std::string csv;
  json summary;
  std::vector<Artifact> extra;
  try {
    std::string line;
    if (cfg.kind == "stability") line = run_stability(cfg, csv, summary);
    else if (cfg.kind == "endecay") line = run_endecay(cfg, csv, summary);
    else if (cfg.kind == "recovery") line = run_recovery(cfg, csv, summary);
    else if (cfg.kind == "growth") line = run_growth(cfg, csv, summary);
    else if (cfg.kind == "induced") line = run_induced(cfg, csv, summary, extra);
    else if (cfg.kind == "lyapunov") line = run_lyapunov(cfg, csv, summary);
    else line = run_ulam(cfg, csv, summary);
    summary["kind"] = cfg.kind;
    summary["config_hash"] = hash;
    summary["config"] = config_json(cfg);
    summary["summary"] = line;
    std::vector<Artifact> files{{cfg.kind + ".csv", csv}, {cfg.kind + ".json", summary.dump(2) + "\n"}};
    for (auto& a : extra) files.push_back(std::move(a));
    const auto dir = std::filesystem::path(cfg.out) / (cfg.kind + "-" + hash);
    write_atomically(dir, files);
    outcome.directory = dir.string();
    outcome.summary = cfg.kind + ": " + line;
  } catch (const std::exception& e) {
    err << cfg.kind << " failed: " << e.what() << '\n';
    outcome.exit_code = 1;
  }
  return outcome;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerics for Viana skew-product maps"};
  app.require_subcommand(1);
  CLI::App* runner = app.add_subcommand("run", "run one experiment and write its artifacts");

  std::string kind, config_file, variant, perturb, domain, grid, out_dir, deltas, alphas, n_list;
  std::optional<int> degree, p_start, subsamples, samples, length, max_iter, orbits, orbit_length, burn_in, cap,
      truncate_n, probes, tail_n, u1_levels, fibers, growth_iter;
  std::optional<double> a0, alpha, c, eps, eta, tol, q, theta0, j_length;
  std::optional<std::uint64_t> seed;
  bool with_induced = false;

  runner->add_option("kind", kind, "stability|endecay|recovery|growth|induced|lyapunov|ulam");
  runner->add_option("--config", config_file, "JSON config; flags override its values");
  runner->add_option("--variant", variant, "viana|test_doubling_product|test_linear");
  runner->add_option("--degree", degree);
  runner->add_option("--a0", a0);
  runner->add_option("--alpha", alpha);
  runner->add_option("--perturb", perturb, "amplitude:frequency:phase,...");
  runner->add_option("--domain", domain, "lo,hi");
  runner->add_option("--grid", grid, "<n_theta>x<n_x>");
  runner->add_option("--c", c);
  runner->add_option("--eps", eps);
  runner->add_option("--eta", eta);
  runner->add_option("--p-start", p_start);
  runner->add_option("--seed", seed);
  runner->add_option("--out", out_dir);
  runner->add_option("--deltas", deltas, "comma-separated perturbation amplitudes");
  runner->add_option("--alphas", alphas);
  runner->add_option("--n-list", n_list, "e.g. 10..200 or 10,20,40");
  runner->add_option("--subsamples", subsamples);
  runner->add_option("--samples", samples);
  runner->add_option("--length", length);
  runner->add_option("--tol", tol);
  runner->add_option("--max-iter", max_iter);
  runner->add_option("--orbits", orbits);
  runner->add_option("--orbit-length", orbit_length);
  runner->add_option("--burn-in", burn_in);
  runner->add_flag("--with-induced", with_induced);
  runner->add_option("--cap", cap);
  runner->add_option("--truncate-n", truncate_n);
  runner->add_option("--probes", probes);
  runner->add_option("--tail-n", tail_n);
  runner->add_option("--q", q);
  runner->add_option("--u1-levels", u1_levels);
  runner->add_option("--fibers", fibers);
  runner->add_option("--theta0", theta0);
  runner->add_option("--j-length", j_length);
  runner->add_option("--growth-iter", growth_iter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  ExperimentConfig cfg;
  try {
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is) invalid("config", "cannot read " + config_file);
      std::stringstream buf;
      buf << is.rdbuf();
      apply_json(cfg, buf.str());
    }
    if (!kind.empty()) cfg.kind = kind;
    if (!variant.empty()) cfg.variant = variant;
    if (degree) cfg.degree = *degree;
    if (a0) cfg.a0 = a0;
    if (alpha) cfg.alpha = *alpha;
    if (!perturb.empty()) {
      cfg.perturb.clear();
      for (const auto& term : split(perturb, ',')) {
        const auto parts = split(term, ':');
        if (parts.size() != 3) invalid("perturb", "expected amplitude:frequency:phase, got '" + term + "'");
        cfg.perturb.push_back({parse_double(parts[0], "perturb"), parse_int(parts[1], "perturb"),
                               parse_double(parts[2], "perturb")});
      }
    }
    if (!domain.empty()) {
      const auto d = parse_double_list(domain, "domain");
      if (d.size() != 2) invalid("domain", "expected lo,hi");
      cfg.domain = DomainInterval{d[0], d[1]};
    }
    if (!grid.empty()) std::tie(cfg.n_theta, cfg.n_x) = parse_grid(grid);
    if (c) cfg.hp.c = *c;
    if (eps) cfg.hp.eps = *eps;
    if (eta) cfg.hp.eta = *eta;
    if (p_start) cfg.hp.p_start = *p_start;
    if (seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!deltas.empty()) cfg.deltas = parse_double_list(deltas, "deltas");
    if (!alphas.empty()) cfg.alphas = parse_double_list(alphas, "alphas");
    if (!n_list.empty()) cfg.n_list = parse_int_list(n_list, "n_list");
    if (subsamples) cfg.subsamples = *subsamples;
    if (samples) cfg.samples = samples;
    if (length) cfg.length = *length;
    if (tol) cfg.tol = *tol;
    if (max_iter) cfg.max_iter = *max_iter;
    if (orbits) cfg.orbits = *orbits;
    if (orbit_length) cfg.orbit_length = *orbit_length;
    if (burn_in) cfg.burn_in = *burn_in;
    if (with_induced) cfg.with_induced = true;
    if (cap) cfg.cap = *cap;
    if (truncate_n) cfg.truncate_n = *truncate_n;
    if (probes) cfg.probes = *probes;
    if (tail_n) cfg.tail_n = *tail_n;
    if (q) cfg.q = *q;
    if (u1_levels) cfg.u1_levels = *u1_levels;
    if (fibers) cfg.fibers = *fibers;
    if (theta0) cfg.theta0 = theta0;
    if (j_length) cfg.j_length = *j_length;
    if (growth_iter) cfg.growth_iter = *growth_iter;
  } catch (const ValidationError& e) {
    err << "invalid config: " << e.what() << '\n';
    return 2;
  }

  const RunOutcome outcome = run(cfg, err);
  if (outcome.exit_code == 0) out << outcome.summary << " -> " << outcome.directory << '\n';
  return outcome.exit_code;
}

}  // namespace srb::cli
