#pragma once
// Experiment orchestration: JSON configuration with exhaustive validation,
// deterministic run directories keyed by a config hash, CSV/JSON emitters
// (every file embeds the run key), a manifest sufficient to reproduce any
// number bit-for-bit, and the acceptance suite behind `checkall`.
//
// Harness-level seed registry (sub-seeds derived as
// derive_seed(root_seed, task, replica) or, for module calls that derive
// internally, a sub-root derive_seed(root_seed, task, 0)):
//   100 + n   minima runs at horizon n (engine task)
//   110 + n   spine marginal sub-root
//   120       series estimate sub-root
//   130 + n   many-to-one sub-root
//   131/132/133  renewal / local / big-jump sub-roots
//   135       renewal deterministic-increment oracle sub-root
//   140 + n   tail bootstrap
//   150       fixed-point sub-root
//   160/161   limit-fit bootstrap noise (low / top horizon)
//   200 + n0  martingale pool at horizon n0 (engine task)
//   210 + n   partition-trace replicas at horizon n
//   220 + n   Gibbs replicas at horizon n
//   300 + n   martingale-mean runs at horizon n (engine task)
// Thread count is a execution knob only: every aggregation reduces
// replica-indexed slots in index order, so outputs are byte-identical at
// any --threads value.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "brw/engine.hpp"
#include "brw/laws.hpp"

namespace brw {

inline constexpr const char* kCodeVersion = "1.0.0";

// Flat experiment configuration (one JSON object, no nesting, no includes).
// Missing keys take these defaults; unknown keys are rejected.
struct ExperimentConfig {
  // Displacement law.
  double alpha = 2.5;
  double gamma_witness = 4.0;
  double x0 = -1.0;
  double p_left = 0.3;
  double b = 2.0;
  // Offspring law: "poisson" (mean s, production mode) or "deterministic"
  // with offspring_k children (test mode).
  std::string offspring_kind = "poisson";
  int offspring_k = 2;
  // Experiment scales.
  std::vector<int> horizons = {10, 18};
  std::uint64_t replicas = 30000;
  std::vector<double> x_grid = {1.5, 2.0, 2.5, 3.0, 3.5};
  std::vector<double> beta_grid = {0.0, 0.25, 0.5, 1.0, 2.0, 3.0};
  std::uint64_t root_seed = 20260819;
  std::uint64_t max_particles = std::uint64_t(1) << 40;
  std::string output_dir = "out";

  DisplacementSpec displacement() const;  // throws on invalid law fields
  OffspringSpec offspring() const;        // throws on invalid offspring
  BrwParams engine_params(int horizon) const;

  // Minified JSON with alphabetically ordered keys and round-trip-exact
  // numbers; the canonical form behind the run key.
  std::string canonical_json() const;
  // FNV-1a over canonical_json() and the code version; names the run
  // directory and is embedded in every output file.
  std::uint64_t config_hash() const;
};

// Collects every constraint violation (empty when valid).
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

// Parses a flat JSON object and validates it; every problem (syntax, type,
// unknown key, constraint) lands in `errors`.  Returns the config only when
// `errors` stays empty.
std::optional<ExperimentConfig> parse_config_text(const std::string& text,
                                                  std::vector<std::string>& errors);
std::optional<ExperimentConfig> load_config_file(const std::string& path,
                                                 std::vector<std::string>& errors);

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 config/usage, 3 acceptance failure,
                      // 4 resource abort
  std::string run_dir;
  std::vector<std::string> messages;
};

// Executes one subcommand, writing outputs plus manifest.json into
// <out>/run-<hash16>/ where <out> is out_override or cfg.output_dir.
// Subcommands: simulate, tail, limit-law, cstar, rw, thermo, manytoone,
// checkall.  Timing lives only in manifest.json; all other files are
// byte-stable across runs and thread counts.
RunResult run_subcommand(const std::string& subcommand,
                         const ExperimentConfig& cfg, unsigned threads,
                         const std::string& out_override = "");

// The acceptance suite behind `checkall`: one line per criterion, PASS or
// FAIL, plus a closing tally.  Criterion sizes scale linearly with
// cfg.replicas relative to the shipped default of 30000, so the shipped
// config runs the stated sizes exactly and smaller configs run a
// proportionally reduced rehearsal.  Artifacts (minima CSVs, fits, the
// report) are written into run_dir.
struct AcceptanceOutcome {
  bool all_pass = false;
  int passed = 0;
  int total = 0;
  std::vector<std::string> lines;
  std::uint64_t aborted_replicas = 0;
  // Per-stage wall clock of the heavy runs, for the manifest only.
  std::map<std::string, double> stage_seconds;
};
AcceptanceOutcome run_acceptance(const ExperimentConfig& cfg, unsigned threads,
                                 const std::string& run_dir);

}  // namespace brw
