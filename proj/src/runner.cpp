#include "geoworld/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "geoworld/checkpoint.hpp"
#include "geoworld/collect.hpp"
#include "geoworld/csv.hpp"
#include "geoworld/keyvalue.hpp"
#include "geoworld/rsa.hpp"
#include "geoworld/svg_plot.hpp"

namespace geoworld::runner {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kEvalSalt = 0xd1b54a32d192ed03ULL;
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

double parse_cell(const std::string& text, const std::string& name) {
  if (text == "nan") return std::nan("");
  return parse_double(text, name);
}

}  // namespace

std::vector<int> default_checkpoints(int total_steps) {
  std::vector<int> out;
  for (int s : {1000, 5000, 10000, 25000, 50000, 100000}) {
    if (s < total_steps) out.push_back(s);
  }
  out.push_back(total_steps);
  return out;
}

std::uint64_t eval_seed(const wm::TrainConfig& config) { return config.seed ^ kEvalSalt; }

namespace {

EvalRow evaluate_params(const wm::ModelParams& params, const wm::TrainConfig& config, int step,
                        const EvalOptions& options) {
  const auto perturbation = options.condition.value_or(config.perturbation);
  const std::uint64_t seed = eval_seed(config);

  collect::CollectOptions co;
  co.n_episodes = options.n_episodes;
  co.perturbation = perturbation;
  co.seed = seed;
  auto dataset = collect::collect_pairs(params, config.env, co);
  dataset.source_step = step;
  dataset.config_digest = config.digest();

  EvalRow row;
  row.seed = config.seed;
  row.beta = config.beta;
  row.condition = perturbation.label();
  row.env = config.env.name();
  row.metrics.step = step;

  const auto probes = probe::run_probes(dataset, options.probe);
  row.metrics.dir_acc = probes.direction_accuracy;
  row.metrics.x_r2 = probes.x_r2;
  row.metrics.y_r2 = probes.y_r2;

  // A fresh subsample per checkpoint, fixed by (eval seed, step).
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(step) * kGolden));
  const auto sample =
      collect::subsample_states(dataset.records, std::min(options.rsa_states, dataset.records.size()), rng);
  const auto latent = rsa::cosine_matrix(std::span<const collect::LabeledLatent>(sample));
  try {
    row.metrics.rsa_dir = rsa::rsa_score(latent, rsa::direction_matrix(sample)).r;
    row.metrics.rsa_pos = rsa::rsa_score(latent, rsa::position_matrix(sample)).r;
  } catch (const stats::DegenerateStatistic&) {
    row.metrics.rsa_dir = row.metrics.rsa_pos = 0.0;
    row.rsa_degenerate = true;
  }
  row.metrics.pairwise_dist = rsa::mean_pairwise_distance(std::span<const collect::LabeledLatent>(sample));

  const auto heldout = wm::collect_transitions(config.env, perturbation, options.heldout_episodes, seed + 1);
  row.metrics.prediction_loss = wm::prediction_loss(params, heldout);
  return row;
}

}  // namespace

EvalRow evaluate_checkpoint(const wm::Checkpoint& ckpt, const EvalOptions& options) {
  return evaluate_params(ckpt.params, ckpt.train_config, ckpt.step, options);
}

EvalRow evaluate_random_encoder(const wm::TrainConfig& config, const EvalOptions& options) {
  auto row = evaluate_params(wm::initial_checkpoint(config).params, config, 0, options);
  row.encoder = "random";
  return row;
}

const std::vector<std::string> kResultColumns = {
    "checkpoint_step", "seed",    "beta", "condition", "env",    "encoder",       "pred_loss",
    "dir_acc",         "x_r2",    "y_r2", "rsa_dir",   "rsa_pos", "pairwise_dist", "rsa_degenerate"};

std::vector<std::string> result_cells(const EvalRow& r) {
  const auto& m = r.metrics;
  return {std::to_string(m.step), std::to_string(r.seed), fmt(r.beta),      r.condition,
          r.env,                  r.encoder,              fmt(m.prediction_loss), fmt(m.dir_acc),
          fmt(m.x_r2),            fmt(m.y_r2),            fmt(m.rsa_dir),   fmt(m.rsa_pos),
          fmt(m.pairwise_dist),   r.rsa_degenerate ? "1" : "0"};
}

EvalRow parse_result_row(const std::vector<std::string>& columns, const std::vector<std::string>& cells) {
  if (cells.size() != columns.size()) throw std::runtime_error("results row has wrong number of cells");
  std::map<std::string, std::string> by_name;
  for (std::size_t i = 0; i < columns.size(); ++i) by_name[columns[i]] = cells[i];
  auto get = [&](const std::string& name) -> const std::string& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw csv::MissingColumn("missing required column: " + name);
    return it->second;
  };
  EvalRow r;
  r.metrics.step = static_cast<int>(parse_int(get("checkpoint_step"), "checkpoint_step"));
  r.seed = parse_uint(get("seed"), "seed");
  r.beta = parse_double(get("beta"), "beta");
  r.condition = get("condition");
  r.env = get("env");
  r.encoder = get("encoder");
  r.metrics.prediction_loss = parse_cell(get("pred_loss"), "pred_loss");
  r.metrics.dir_acc = parse_cell(get("dir_acc"), "dir_acc");
  r.metrics.x_r2 = parse_cell(get("x_r2"), "x_r2");
  r.metrics.y_r2 = parse_cell(get("y_r2"), "y_r2");
  r.metrics.rsa_dir = parse_cell(get("rsa_dir"), "rsa_dir");
  r.metrics.rsa_pos = parse_cell(get("rsa_pos"), "rsa_pos");
  r.metrics.pairwise_dist = parse_cell(get("pairwise_dist"), "pairwise_dist");
  r.rsa_degenerate = get("rsa_degenerate") == "1";
  return r;
}

std::vector<fs::path> run_training(const wm::TrainConfig& config, const fs::path& dir) {
  config.validate();
  fs::create_directories(dir);
  plot::write_text(dir / "config.ini", config.to_doc().serialize());
  const auto log = dir / "train_log.csv";
  fs::remove(log);

  std::vector<fs::path> written;
  wm::TrainHooks hooks;
  hooks.metrics_csv = log;
  hooks.keep_checkpoints = false;
  hooks.on_checkpoint = [&](const wm::Checkpoint& ckpt) {
    const auto path = dir / wm::checkpoint_filename(ckpt.step);
    wm::save_checkpoint(ckpt, path);
    written.push_back(path);
  };
  wm::train(config, hooks);
  return written;
}

EvalBatch evaluate_paths(const std::vector<fs::path>& paths, const EvalOptions& options) {
  EvalBatch batch;
  std::vector<wm::Checkpoint> loaded;
  for (const auto& p : paths) {
    try {
      loaded.push_back(wm::load_checkpoint(p));
    } catch (const std::exception& e) {
      batch.failures.push_back(p.string() + ": " + e.what());
    }
  }
  std::stable_sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) {
    return std::tie(a.train_config.seed, a.train_config.beta, a.step) <
           std::tie(b.train_config.seed, b.train_config.beta, b.step);
  });
  for (const auto& ckpt : loaded) {
    try {
      batch.rows.push_back(evaluate_checkpoint(ckpt, options));
    } catch (const std::exception& e) {
      batch.failures.push_back("step " + std::to_string(ckpt.step) + ": " + e.what());
    }
  }
  return batch;
}

void write_results(const fs::path& csv_path, const std::vector<EvalRow>& rows) {
  std::string digests;
  for (const auto& r : rows) digests += r.env + r.condition + fmt(r.beta) + std::to_string(r.seed) + ";";
  csv::Writer out(csv_path, fnv1a_hex(digests), kResultColumns);
  for (const auto& r : rows) out.row(result_cells(r));
}

std::vector<EvalRow> read_results(const fs::path& csv_path) {
  const auto table = csv::read(csv_path);
  table.require_columns(kResultColumns, csv_path.string());
  std::vector<EvalRow> rows;
  for (const auto& cells : table.rows) rows.push_back(parse_result_row(table.columns, cells));
  return rows;
}

namespace {

using RunKey = std::tuple<std::string, std::string, double, std::uint64_t>;  // env, condition, beta, seed
using ArmKey = std::tuple<std::string, std::string, double, std::string>;    // env, condition, beta, encoder

struct StepStats {
  std::vector<EvalRow> rows;
};

double mean_of(const std::vector<double>& v) { return stats::mean(v); }
double std_of(const std::vector<double>& v) { return v.size() < 2 ? std::nan("") : stats::stddev(v); }

std::vector<double> pluck(const std::vector<EvalRow>& rows, analysis::Metric m) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(analysis::metric_value(r.metrics, m));
  return out;
}

std::string curve_name(const std::string& condition, double beta) {
  return condition + " beta=" + format_double(beta);
}

}  // namespace

std::vector<analysis::MetricSeries> group_series(const std::vector<EvalRow>& rows) {
  std::map<RunKey, analysis::MetricSeries> runs;
  for (const auto& r : rows) {
    if (r.encoder != "trained") continue;
    auto& s = runs[{r.env, r.condition, r.beta, r.seed}];
    s.env = r.env;
    s.condition = r.condition;
    s.beta = r.beta;
    s.seed = r.seed;
    s.rows.push_back(r.metrics);
  }
  std::vector<analysis::MetricSeries> out;
  for (auto& [key, s] : runs) {
    std::stable_sort(s.rows.begin(), s.rows.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    out.push_back(std::move(s));
  }
  return out;
}

ReportSummary write_report(const fs::path& results_dir, const fs::path& out_dir) {
  std::vector<fs::path> inputs;
  if (fs::is_directory(results_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "results.csv") inputs.push_back(entry.path());
    }
  }
  std::sort(inputs.begin(), inputs.end());
  std::vector<EvalRow> rows;
  std::string content;
  for (const auto& p : inputs) {
    auto part = read_results(p);
    rows.insert(rows.end(), part.begin(), part.end());
    content += read_file(p);
  }
  if (rows.empty()) throw std::runtime_error("no results found under " + results_dir.string());

  fs::create_directories(out_dir);
  const std::string digest = fnv1a_hex(content);
  ReportSummary summary;
  summary.n_rows = rows.size();

  std::map<ArmKey, std::map<int, StepStats>> arms;
  for (const auto& r : rows) arms[{r.env, r.condition, r.beta, r.encoder}][r.metrics.step].rows.push_back(r);

  using analysis::Metric;
  auto aggregate_table = [&](const std::string& file, const std::vector<Metric>& metrics, bool with_degenerate) {
    std::vector<std::string> cols = {"env", "condition", "beta", "encoder", "checkpoint_step", "n_seeds"};
    for (auto m : metrics) {
      cols.push_back(std::string(analysis::metric_name(m)) + "_mean");
      cols.push_back(std::string(analysis::metric_name(m)) + "_std");
    }
    if (with_degenerate) cols.push_back("rsa_degenerate_count");
    const auto path = out_dir / file;
    {
      csv::Writer w(path, digest, cols);
      for (const auto& [key, steps] : arms) {
        for (const auto& [step, st] : steps) {
          std::vector<std::string> cells = {std::get<0>(key), std::get<1>(key), fmt(std::get<2>(key)),
                                            std::get<3>(key), std::to_string(step), std::to_string(st.rows.size())};
          for (auto m : metrics) {
            const auto v = pluck(st.rows, m);
            cells.push_back(fmt(mean_of(v)));
            cells.push_back(fmt(std_of(v)));
          }
          if (with_degenerate) {
            cells.push_back(std::to_string(
                std::count_if(st.rows.begin(), st.rows.end(), [](const auto& r) { return r.rsa_degenerate; })));
          }
          w.row(cells);
        }
      }
    }
    summary.written.push_back(path);
  };
  aggregate_table("table1.csv", {Metric::DirAcc, Metric::XR2, Metric::YR2, Metric::PredictionLoss}, false);
  aggregate_table("table2.csv", {Metric::RsaDir, Metric::RsaPos, Metric::PairwiseDist}, true);
  {
    std::ofstream note(out_dir / "table2.csv", std::ios::binary | std::ios::app);
    note << "# note: " << rsa::kPairDependenceCaveat << '\n';
  }

  const auto series = group_series(rows);

  // Table 3: co-improvement per run with enough checkpoints.
  {
    const auto path = out_dir / "table3.csv";
    csv::Writer w(path, digest,
                  {"env", "condition", "beta", "seed", "n_checkpoints", "spearman_r", "spearman_p", "partial_r",
                   "partial_p", "degenerate"});
    for (const auto& s : series) {
      if (s.rows.size() < 5) continue;
      analysis::Correlation raw{std::nan(""), std::nan(""), true};
      analysis::Correlation partial{std::nan(""), std::nan(""), true};
      try {
        raw = analysis::h6_correlation(s);
      } catch (const stats::DegenerateStatistic&) {
      }
      try {
        partial = analysis::detrended_partial_correlation(s);
      } catch (const stats::DegenerateStatistic&) {
      }
      w.row({s.env, s.condition, fmt(s.beta), std::to_string(s.seed), std::to_string(s.rows.size()), fmt(raw.r),
             fmt(raw.p), fmt(partial.r), fmt(partial.p), (raw.degenerate || partial.degenerate) ? "1" : "0"});
    }
    summary.written.push_back(path);
  }

  // Knockout: runs sharing (env, condition, seed) across at least two betas.
  {
    std::map<std::tuple<std::string, std::string, std::uint64_t>, std::map<double, analysis::MetricSeries>> groups;
    for (const auto& s : series) groups[{s.env, s.condition, s.seed}][s.beta] = s;
    const auto path = out_dir / "knockout.csv";
    const auto summary_path = out_dir / "knockout_summary.csv";
    csv::Writer w(path, digest,
                  {"env", "condition", "seed", "beta", "checkpoint_step", "dir_acc", "pairwise_dist", "pred_loss",
                   "rsa_pos"});
    csv::Writer ws(summary_path, digest,
                   {"env", "condition", "seed", "beta", "final_step", "final_dir_acc", "final_pairwise_dist",
                    "collapsed", "accuracy_near_chance", "double_knockout"});
    for (const auto& [key, by_beta] : groups) {
      if (by_beta.size() < 2) continue;
      const auto report = analysis::knockout_compare(by_beta);
      const auto& [env, condition, seed] = key;
      for (const auto& arm : report.arms) {
        for (const auto& r : arm.series.rows) {
          w.row({env, condition, std::to_string(seed), fmt(arm.beta), std::to_string(r.step), fmt(r.dir_acc),
                 fmt(r.pairwise_dist), fmt(r.prediction_loss), fmt(r.rsa_pos)});
        }
        ws.row({env, condition, std::to_string(seed), fmt(arm.beta), std::to_string(arm.series.final_row().step),
                fmt(arm.final_dir_acc), fmt(arm.final_pairwise_dist), arm.collapsed ? "1" : "0",
                arm.accuracy_near_chance ? "1" : "0", report.double_knockout ? "1" : "0"});
      }
    }
    summary.written.push_back(path);
    summary.written.push_back(summary_path);
  }

  // Final trained accuracy against the untrained-encoder sample of the same arm.
  {
    const auto path = out_dir / "baseline.csv";
    csv::Writer w(path, digest,
                  {"env", "condition", "beta", "final_step", "n_trained", "trained_mean", "n_random", "random_mean",
                   "t", "p", "df"});
    for (const auto& [key, steps] : arms) {
      const auto& [env, condition, beta, encoder] = key;
      if (encoder != "trained") continue;
      const auto random = arms.find({env, condition, beta, "random"});
      if (random == arms.end() || steps.empty()) continue;
      const auto& [final_step, final_rows] = *steps.rbegin();
      const auto trained = pluck(final_rows.rows, Metric::DirAcc);
      std::vector<double> baseline;
      for (const auto& [step, st] : random->second) {
        for (double v : pluck(st.rows, Metric::DirAcc)) baseline.push_back(v);
      }
      stats::TTestResult t{std::nan(""), std::nan(""), std::nan("")};
      try {
        if (trained.size() >= 2 && baseline.size() >= 2) t = stats::welch_t_test(trained, baseline);
      } catch (const stats::DegenerateStatistic&) {
      }
      w.row({env, condition, fmt(beta), std::to_string(final_step), std::to_string(trained.size()),
             fmt(mean_of(trained)), std::to_string(baseline.size()), fmt(mean_of(baseline)), fmt(t.t), fmt(t.p),
             fmt(t.df)});
    }
    summary.written.push_back(path);
  }

  // One chart per (metric, env): a curve per (condition, beta), seed means.
  std::map<std::string, std::vector<std::pair<ArmKey, const std::map<int, StepStats>*>>> by_env;
  for (const auto& [key, steps] : arms) {
    if (std::get<3>(key) == "trained") by_env[std::get<0>(key)].push_back({key, &steps});
  }
  for (auto m : {Metric::DirAcc, Metric::PredictionLoss, Metric::PairwiseDist, Metric::RsaPos, Metric::YR2}) {
    for (const auto& [env, arm_list] : by_env) {
      std::vector<plot::Curve> curves;
      for (const auto& [key, steps] : arm_list) {
        plot::Curve c;
        c.name = curve_name(std::get<1>(key), std::get<2>(key));
        for (const auto& [step, st] : *steps) {
          c.xs.push_back(step);
          c.ys.push_back(mean_of(pluck(st.rows, m)));
        }
        curves.push_back(std::move(c));
      }
      const std::string stem = std::string(analysis::metric_name(m)) + "_" + env;
      plot::write_text(out_dir / (stem + ".dat"), "# " + csv::provenance_line(digest).substr(2) + "\n" +
                                                      plot::plot_data(curves));
      plot::ChartOptions opts;
      opts.title = std::string(analysis::metric_name(m)) + " (" + env + ")";
      opts.y_label = analysis::metric_name(m);
      plot::write_text(out_dir / (stem + ".svg"), plot::render_line_chart(curves, opts));
      summary.written.push_back(out_dir / (stem + ".dat"));
      summary.written.push_back(out_dir / (stem + ".svg"));
    }
  }
  return summary;
}

std::string run_dirname(double beta, const env::Perturbation& condition, std::uint64_t seed) {
  return "beta" + format_double(beta) + "_" + condition.label() + "_seed" + std::to_string(seed);
}

ExperimentSpec make_experiment(const std::string& name, int total_steps, std::vector<std::uint64_t> seeds) {
  if (total_steps < 1) throw UsageError("steps must be >= 1");
  ExperimentSpec spec;
  spec.name = name;
  spec.base.total_steps = total_steps;
  spec.base.checkpoint_steps = default_checkpoints(total_steps);
  spec.conditions = {env::Perturbation::none()};
  if (name == "h1h2h3") {
    spec.betas = {0.001};
    spec.random_baseline = true;
    if (seeds.empty()) seeds = {0, 1, 2};
  } else if (name == "h6") {
    if (total_steps < 20) throw UsageError("h6 needs at least 20 steps");
    spec.betas = {0.001};
    spec.conditions = {env::Perturbation::none(), env::Perturbation::gaussian(0.3), env::Perturbation::mask(0.5)};
    spec.base.checkpoint_steps.clear();
    for (int i = 1; i <= 20; ++i) {
      spec.base.checkpoint_steps.push_back(static_cast<int>(static_cast<long long>(total_steps) * i / 20));
    }
  } else if (name == "knockout") {
    spec.betas = {0.1, 0.001};
  } else if (name == "empty16") {
    spec.betas = {0.1, 0.001};
    spec.base.env = env::GridConfig::empty16();
  } else {
    throw UsageError("unknown experiment: " + name + " (expected h1h2h3, h6, knockout or empty16)");
  }
  if (seeds.empty()) seeds = {0};
  spec.seeds = std::move(seeds);
  return spec;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const fs::path& out_dir, const EvalOptions& eval_options) {
  fs::create_directories(out_dir);
  ExperimentOutcome outcome;
  for (const auto& condition : spec.conditions) {
    for (double beta : spec.betas) {
      for (auto seed : spec.seeds) {
        auto config = spec.base;
        config.beta = beta;
        config.seed = seed;
        config.perturbation = condition;
        const auto dir = out_dir / run_dirname(beta, condition, seed);
        const auto results = dir / "results.csv";
        const std::string config_text = config.to_doc().serialize();

        // A finished run with the identical config is reused rather than retrained.
        if (fs::exists(results) && fs::exists(dir / "config.ini") && read_file(dir / "config.ini") == config_text) {
          std::cerr << "reusing " << dir.string() << '\n';
          ++outcome.runs_completed;
          continue;
        }
        std::string stage = "train";
        try {
          std::cerr << "training " << dir.string() << '\n';
          fs::remove(results);
          const auto ckpts = run_training(config, dir);
          stage = "eval";
          auto batch = evaluate_paths(ckpts, eval_options);
          if (spec.random_baseline) batch.rows.push_back(evaluate_random_encoder(config, eval_options));
          write_results(results, batch.rows);
          for (const auto& f : batch.failures) outcome.failures.push_back(dir.string() + ",eval," + f);
          ++outcome.runs_completed;
        } catch (const std::exception& e) {
          outcome.failures.push_back(dir.string() + "," + stage + "," + e.what());
        }
      }
    }
  }

  const auto manifest = out_dir / "failures.csv";
  if (outcome.failures.empty()) {
    fs::remove(manifest);
  } else {
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    out << csv::provenance_line(spec.base.digest()) << "\nrun,stage,error\n";
    for (const auto& f : outcome.failures) out << f << '\n';
  }
  if (outcome.runs_completed > 0) {
    try {
      write_report(out_dir, out_dir / "report");
    } catch (const std::exception& e) {
      outcome.failures.push_back(out_dir.string() + ",report," + e.what());
    }
  }
  return outcome;
}

}  // namespace geoworld::runner
