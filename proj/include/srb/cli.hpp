#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srb/maps.hpp"
#include "srb/symbolic.hpp"

namespace srb::cli {

/// Everything one experiment run needs. Defaults apply per field; a config
/// file overrides defaults and command-line flags override the file.
struct ExperimentConfig {
  std::string kind;  // stability|endecay|recovery|growth|induced|lyapunov|ulam

  std::string variant = "viana";
  int degree = 16;
  std::optional<double> a0;  // 1.7 for stability (room for delta = 0.1), else 1.9
  double alpha = 0.01;
  std::vector<Perturbation> perturb;
  std::optional<DomainInterval> domain;

  int n_theta = 256;
  int n_x = 256;
  HyperbolicParams hp{};
  std::optional<std::uint64_t> seed;
  std::string out = "out";

  std::vector<double> deltas;   // stability, induced sweep
  std::vector<double> alphas;   // recovery; empty means {alpha}
  std::vector<int> n_list;      // endecay; empty means 10..200
  int subsamples = 256;
  std::optional<int> samples;  // per kind: endecay 1e5, recovery/lyapunov 1e4
  int length = 10000;           // lyapunov orbit length
  double tol = 1e-10;
  int max_iter = 200000;
  int orbits = 1000;
  int orbit_length = 10100;
  int burn_in = 100;
  bool with_induced = false;
  int cap = 10000;
  int truncate_n = 200;
  int probes = 1;
  int tail_n = 40;
  double q = 2.0;
  int u1_levels = 200;
  int fibers = 100;
  std::optional<double> theta0;
  double j_length = 1e-3;
  int growth_iter = 200;
};

/// Field-level checks; throws ValidationError naming the field.
void validate(const ExperimentConfig& cfg);

/// Map parameters described by the config (validated).
SkewMapParams map_params(const ExperimentConfig& cfg);

/// Reads a JSON config object onto `cfg`. Unknown keys are rejected.
void apply_json(ExperimentConfig& cfg, const std::string& json_text);

/// Canonical JSON of every field except the output directory.
std::string canonical_json(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over canonical_json().
std::string config_hash(const ExperimentConfig& cfg);

/// Parsers for list and grid flags; throw ValidationError on malformed text.
std::vector<double> parse_double_list(const std::string& text, const std::string& field);
std::vector<int> parse_int_list(const std::string& text, const std::string& field);
std::pair<int, int> parse_grid(const std::string& text);

struct RunOutcome {
  int exit_code = 0;
  /// Directory holding the artifacts (empty when nothing was written).
  std::string directory;
  std::string summary;
};

/// Validates, runs and writes <out>/<kind>-<hash>/<kind>.csv and <kind>.json.
/// Exit 2 on invalid config (nothing written), 1 on runtime failure.
RunOutcome run(const ExperimentConfig& cfg, std::ostream& err);

/// Command-line entry: `srb_lab run <kind> [flags]`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srb::cli
