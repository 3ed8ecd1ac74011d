#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geoworld/analysis.hpp"
#include "geoworld/probe.hpp"
#include "geoworld/train.hpp"

namespace geoworld::runner {

/// Raised for bad user input (flags, config keys, experiment names); maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoints 1k, 5k, 10k, 25k, 50k, 100k cut at `total_steps`, always ending at `total_steps`.
std::vector<int> default_checkpoints(int total_steps);

struct EvalOptions {
  int n_episodes = 200;
  int heldout_episodes = 20;
  std::size_t rsa_states = 500;
  /// Overrides the perturbation the checkpoint was trained under.
  std::optional<env::Perturbation> condition;
  probe::ProbeOptions probe;
};

/// Evaluation data never reuses the training stream: derived from the training seed.
std::uint64_t eval_seed(const wm::TrainConfig& config);

struct EvalRow {
  analysis::MetricRow metrics;
  std::uint64_t seed = 0;
  double beta = 0.0;
  std::string condition;
  std::string env;
  std::string encoder = "trained";  ///< "trained" or "random"
  bool rsa_degenerate = false;      ///< latent similarities constant (collapsed encoder)
};

/// Collect, probe, RSA on a state subsample, pairwise distance and held-out prediction loss.
EvalRow evaluate_checkpoint(const wm::Checkpoint& ckpt, const EvalOptions& options = {});

/// Same pipeline on the untrained weights of `config` (step 0).
EvalRow evaluate_random_encoder(const wm::TrainConfig& config, const EvalOptions& options = {});

extern const std::vector<std::string> kResultColumns;
std::vector<std::string> result_cells(const EvalRow& row);
EvalRow parse_result_row(const std::vector<std::string>& columns, const std::vector<std::string>& cells);

/// Writes config.ini, train_log.csv and one checkpoint file per scheduled step into `dir`.
std::vector<std::filesystem::path> run_training(const wm::TrainConfig& config, const std::filesystem::path& dir);

struct EvalBatch {
  std::vector<EvalRow> rows;
  std::vector<std::string> failures;  ///< "<path>: <reason>"
};

/// Evaluates each path (sorted by checkpoint step); unreadable files are recorded and skipped.
EvalBatch evaluate_paths(const std::vector<std::filesystem::path>& paths, const EvalOptions& options);

void write_results(const std::filesystem::path& csv_path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_results(const std::filesystem::path& csv_path);

struct ReportSummary {
  std::vector<std::filesystem::path> written;
  std::size_t n_rows = 0;
};

/// Reads every results.csv below `results_dir` and writes tables, plot data
/// and SVG charts to `out_dir`. Throws std::runtime_error when no results exist.
ReportSummary write_report(const std::filesystem::path& results_dir, const std::filesystem::path& out_dir);

/// Series of trained-encoder rows grouped per run, steps ascending.
std::vector<analysis::MetricSeries> group_series(const std::vector<EvalRow>& rows);

struct ExperimentSpec {
  std::string name;  ///< h1h2h3 | h6 | knockout | empty16
  std::vector<std::uint64_t> seeds;
  std::vector<double> betas;
  std::vector<env::Perturbation> conditions;
  wm::TrainConfig base;
  bool random_baseline = false;
};

/// Defaults for a named experiment; `total_steps` sets the run length and checkpoint schedule.
ExperimentSpec make_experiment(const std::string& name, int total_steps, std::vector<std::uint64_t> seeds = {});

struct ExperimentOutcome {
  std::size_t runs_completed = 0;
  std::vector<std::string> failures;
};

/// train -> eval -> report for every (condition, beta, seed); each run in its own
/// subdirectory. Failures are written to failures.csv and do not stop later runs.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                 const EvalOptions& eval_options = {});

std::string run_dirname(double beta, const env::Perturbation& condition, std::uint64_t seed);

}  // namespace geoworld::runner
