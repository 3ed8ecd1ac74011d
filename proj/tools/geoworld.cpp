// geoworld: train, evaluate and report on the grid-world VAE world model.

#include <glob.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "geoworld/checkpoint.hpp"
#include "geoworld/runner.hpp"

namespace fs = std::filesystem;
using namespace geoworld;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kPartial = 3 };

struct Flags {
  std::string config;
  std::optional<double> beta;
  std::optional<int> steps;
  std::string seeds;
  std::optional<std::uint64_t> seed;
  std::optional<int> checkpoint_every;
  std::string condition;
  std::string env;
  std::string out;
};

// "--seeds 3" means seeds 0,1,2; "--seeds 4,7" lists them explicitly.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  if (text.find(',') == std::string::npos) {
    const auto n = parse_uint(text, "--seeds");
    if (n == 0) throw runner::UsageError("--seeds must be >= 1");
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (!piece.empty()) out.push_back(parse_uint(piece, "--seeds"));
  }
  return out;
}

env::GridConfig parse_env(const std::string& name) {
  if (name == "empty8") return env::GridConfig::empty8();
  if (name == "empty16") return env::GridConfig::empty16();
  throw runner::UsageError("unknown --env " + name + " (expected empty8 or empty16)");
}

env::Perturbation parse_condition(const std::string& text) {
  if (text != "clean" && text != "noise0.3" && text != "mask0.5") {
    throw runner::UsageError("unknown --condition " + text + " (expected clean, noise0.3 or mask0.5)");
  }
  return env::Perturbation::parse(text);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw runner::UsageError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

wm::TrainConfig build_config(const Flags& f) {
  wm::TrainConfig c;
  bool explicit_schedule = false;
  if (!f.config.empty()) {
    const auto doc = KeyValueDoc::parse(slurp(f.config));
    c = wm::TrainConfig::from_doc(doc);
    explicit_schedule = doc.get("train", "checkpoint_steps") || doc.get("train", "checkpoint_every");
  }
  if (f.beta) c.beta = *f.beta;
  if (f.steps) c.total_steps = *f.steps;
  if (f.seed) c.seed = *f.seed;
  if (!f.condition.empty()) c.perturbation = parse_condition(f.condition);
  if (!f.env.empty()) c.env = parse_env(f.env);
  if (f.checkpoint_every) {
    c.checkpoint_steps = wm::every_n_steps(c.total_steps, *f.checkpoint_every);
  } else if (f.steps && !explicit_schedule) {
    c.checkpoint_steps = runner::default_checkpoints(c.total_steps);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw runner::UsageError(std::string("invalid config: ") + e.what());
  }
  return c;
}

std::vector<fs::path> expand(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& p : patterns) {
    glob_t g{};
    if (::glob(p.c_str(), GLOB_NOCHECK, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value config file with [train] and [env] sections");
  cmd->add_option("--beta", f.beta, "KL weight");
  cmd->add_option("--steps", f.steps, "environment steps");
  cmd->add_option("--seeds", f.seeds, "number of seeds (0..N-1) or a comma separated list");
  cmd->add_option("--condition", f.condition, "clean | noise0.3 | mask0.5");
  cmd->add_option("--env", f.env, "empty8 | empty16");
  cmd->add_option("--out", f.out, "output directory");
}

int cmd_train(const Flags& f) {
  if (f.out.empty()) throw runner::UsageError("train: --out is required");
  const auto base = build_config(f);
  auto seeds = parse_seeds(f.seeds);
  if (seeds.empty()) seeds.push_back(base.seed);
  for (auto s : seeds) {
    auto c = base;
    c.seed = s;
    const fs::path dir = seeds.size() > 1 ? fs::path(f.out) / ("seed" + std::to_string(s)) : fs::path(f.out);
    const auto written = runner::run_training(c, dir);
    std::cout << dir.string() << ": " << written.size() << " checkpoints, config " << c.digest() << '\n';
  }
  return kOk;
}

int cmd_eval(const Flags& f, const std::vector<std::string>& patterns, const std::string& baseline, int episodes) {
  if (f.out.empty()) throw runner::UsageError("eval: --out is required");
  if (!baseline.empty() && baseline != "random-encoder") {
    throw runner::UsageError("unknown --baseline " + baseline + " (expected random-encoder)");
  }
  if (patterns.empty() && baseline.empty()) throw runner::UsageError("eval: no checkpoints given");

  runner::EvalOptions opts;
  opts.n_episodes = episodes;
  if (!f.condition.empty()) opts.condition = parse_condition(f.condition);

  const auto paths = expand(patterns);
  auto batch = runner::evaluate_paths(paths, opts);

  if (!baseline.empty()) {
    wm::TrainConfig base = build_config(f);
    if (!batch.rows.empty() && f.config.empty() && f.env.empty()) {
      // Match the evaluated runs when no environment was given explicitly.
      base = wm::load_checkpoint(paths.front()).train_config;
      if (!f.condition.empty()) base.perturbation = parse_condition(f.condition);
    }
    auto seeds = parse_seeds(f.seeds);
    if (seeds.empty()) seeds = {0, 1, 2};
    for (auto s : seeds) {
      auto c = base;
      c.seed = s;
      batch.rows.push_back(runner::evaluate_random_encoder(c, opts));
    }
  }

  fs::create_directories(f.out);
  runner::write_results(fs::path(f.out) / "results.csv", batch.rows);
  for (const auto& r : batch.rows) {
    std::cout << r.encoder << " seed=" << r.seed << " step=" << r.metrics.step << " dir_acc=" << r.metrics.dir_acc
              << " y_r2=" << r.metrics.y_r2 << " rsa_pos=" << r.metrics.rsa_pos
              << " dist=" << r.metrics.pairwise_dist << '\n';
  }
  for (const auto& failure : batch.failures) std::cerr << "skipped " << failure << '\n';
  if (batch.failures.empty()) return kOk;
  return batch.rows.empty() ? kRuntime : kPartial;
}

int cmd_report(const std::string& results_dir, const std::string& out) {
  const auto summary = runner::write_report(results_dir, out.empty() ? fs::path(results_dir) / "report" : fs::path(out));
  std::cout << summary.n_rows << " result rows, " << summary.written.size() << " files written\n";
  return kOk;
}

int cmd_experiment(const Flags& f, const std::string& name, bool full) {
  if (f.out.empty()) throw runner::UsageError("experiment: --out is required");
  const int steps = f.steps.value_or(full ? 100000 : 20000);
  auto spec = runner::make_experiment(name, steps, parse_seeds(f.seeds));
  if (f.beta) spec.betas = {*f.beta};
  if (!f.condition.empty()) spec.conditions = {parse_condition(f.condition)};
  if (!f.env.empty()) spec.base.env = parse_env(f.env);
  if (!f.config.empty()) {
    const auto schedule = spec.base.checkpoint_steps;
    spec.base = wm::TrainConfig::from_doc(KeyValueDoc::parse(slurp(f.config)), spec.base);
    spec.base.total_steps = steps;
    spec.base.checkpoint_steps = schedule;
  }
  const auto outcome = runner::run_experiment(spec, f.out);
  std::cout << outcome.runs_completed << " runs completed, " << outcome.failures.size() << " failures\n";
  for (const auto& failure : outcome.failures) std::cerr << failure << '\n';
  if (outcome.failures.empty()) return kOk;
  return outcome.runs_completed > 0 ? kPartial : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoworld: VAE world model on an egocentric grid world"};
  app.set_version_flag("--version", GEOWORLD_VERSION);
  app.require_subcommand(1);

  Flags f;
  std::vector<std::string> patterns;
  std::string baseline;
  std::string results_dir;
  std::string experiment;
  int episodes = 200;
  bool full = false;

  auto* train = app.add_subcommand("train", "train one world model per seed");
  add_common(train, f);
  train->add_option("--seed", f.seed, "single training seed");
  train->add_option("--checkpoint-every", f.checkpoint_every, "checkpoint interval in steps");

  auto* eval = app.add_subcommand("eval", "probe, RSA and prediction loss per checkpoint");
  add_common(eval, f);
  eval->add_option("checkpoints", patterns, "checkpoint files or glob patterns");
  eval->add_option("--baseline", baseline, "add untrained-encoder rows: random-encoder");
  eval->add_option("--episodes", episodes, "collection episodes per checkpoint")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "tables, plot data and charts from results CSVs");
  report->add_option("results", results_dir, "directory searched for results.csv files")->required();
  report->add_option("--out", f.out, "output directory (default <results>/report)");

  auto* exp = app.add_subcommand("experiment", "train, evaluate and report a named experiment");
  add_common(exp, f);
  exp->add_option("name", experiment, "h1h2h3 | h6 | knockout | empty16")->required();
  exp->add_flag("--full", full, "100k-step runs instead of 20k");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(f);
    if (*eval) return cmd_eval(f, patterns, baseline, episodes);
    if (*report) return cmd_report(results_dir, f.out);
    if (*exp) return cmd_experiment(f, experiment, full);
  } catch (const runner::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
