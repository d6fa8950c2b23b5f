#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adathresh/oracle.hpp"

namespace adathresh {

enum class GraphKind { cycle, sbm, edge_list };
enum class UnitsRule { all, non_isolated, first_non_isolated };
enum class ClusterSource { none, contiguous, file };
enum class MarginalsEngine { exact, mc, enumeration };
enum class JointsEngine { none, mc, enumeration };

struct RuleSpec {
  Family family = Family::horvitz_thompson;
  ThresholdRule rule = ThresholdRule::adaptive;
  BiasMode bias_mode = BiasMode::global;
};

// The experiment description; every field has a default matching the
// standard simulation protocol (alpha = 10, beta = 10, p = 0.5, noise sd 1).
struct ExperimentConfig {
  // graph
  GraphKind graph_kind = GraphKind::cycle;
  std::int32_t n = 1000;
  int k = 2;
  std::vector<std::int32_t> block_sizes;
  double p_in = 0.5;
  double p_out = 0.01;
  std::uint64_t graph_seed = 1;
  std::string edge_list_path;

  // estimation units
  UnitsRule units_rule = UnitsRule::all;
  std::int32_t units_count = 0;  // first_non_isolated only

  // design
  DesignKind design_kind = DesignKind::unit_bernoulli;
  double p = 0.5;
  ClusterSource cluster_source = ClusterSource::none;
  std::int32_t cluster_size = 0;
  std::string cluster_path;

  // outcome model
  double alpha = 10.0;
  double beta = 10.0;
  ExposureEffect f_kind = ExposureEffect::linear;
  std::vector<double> gamma_over_beta{0.0, 1.0, 2.0, 3.0};
  double noise_sd = 1.0;
  std::uint64_t noise_seed = 1;

  // probability engine
  MarginalsEngine marginals_engine = MarginalsEngine::exact;
  JointsEngine joints_engine = JointsEngine::mc;
  std::int64_t draws = 10000;
  std::uint64_t probs_seed = 1;

  // threshold grid: default denominator is the degree for regular graphs
  // and 10 otherwise
  std::optional<int> grid_den;

  // estimator rules
  std::vector<RuleSpec> rules{
      {Family::horvitz_thompson, ThresholdRule::fixed_zero, BiasMode::global},
      {Family::horvitz_thompson, ThresholdRule::fixed_one, BiasMode::global},
      {Family::horvitz_thompson, ThresholdRule::adaptive, BiasMode::global},
      {Family::horvitz_thompson, ThresholdRule::lepski, BiasMode::global}};

  // run
  std::int64_t replicates = 200;
  std::uint64_t master_seed = 1;
  std::string output_prefix = "experiment";

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  // Canonical serialization of the semantically meaningful fields (output
  // paths excluded); the hash changes iff one of them changes.
  std::string semantic_json() const;
  std::string config_hash() const;
};

// Everything the config resolves to; built once and shared by replicates.
struct ExperimentContext {
  Graph graph;
  std::shared_ptr<const Clustering> clustering;
  Design design;
  EstimationSet set;
  ThresholdGrid grid;
  ExposureProbabilities probs;
  std::vector<double> epsilon;  // frozen noise, shared across gamma cells
};

ExperimentContext build_context(const ExperimentConfig& config, int threads,
                                bool use_cache = true);

struct ResultRow {
  double gamma_over_beta = 0.0;
  RuleSpec rule;
  double rmse_norm = 0.0;   // sqrt(mean((tau_hat - tau)^2)) / |tau|
  double band_2sd = 0.0;    // 2 x sd of per-replicate |normalized error|
  std::int64_t replicates_done = 0;
  std::int64_t failures = 0;
  double mean_h = 0.0;
};

struct ReplicateRow {
  double gamma_over_beta = 0.0;
  std::int64_t replicate = 0;
  RuleSpec rule;
  bool ok = false;
  Rational h;
  double tau_hat = 0.0;
  double err_norm = 0.0;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<ReplicateRow> log;
  std::string results_csv;     // byte-stable given identical inputs
  std::string replicates_csv;
  std::string metadata_json;
};

// For each gamma value and replicate: sample assignment, exposures,
// outcomes, run every configured rule, record the normalized error.
// Deterministic in the master seed for any worker count.
ExperimentOutput run_experiment(const ExperimentConfig& config, int threads = 0);

// Writes <prefix>_results.csv, <prefix>_replicates.csv, <prefix>_meta.json.
void write_outputs(const ExperimentOutput& out, const std::string& prefix);

// Computes (or loads) the probability table for the config and stores it in
// the cache directory ($ADATHRESH_CACHE_DIR, default ".adathresh-cache").
// Returns the cache file path.
std::string precompute_probabilities(const ExperimentConfig& config,
                                     int threads = 0);

// Serializations shared by the estimate/oracle subcommands.
std::string profile_csv(const MseProfile& profile, std::int64_t replicate);
std::string profile_json(const MseProfile& profile);
std::string report_json(const EstimatorReport& report);
std::string oracle_csv(const OracleProfile& profile, Family family);

// Entry point behind the command-line tool; returns the process exit code
// (0 success, 1 usage/config error, 2 data/infeasibility error).
int cli_main(int argc, const char* const* argv);

}  // namespace adathresh
