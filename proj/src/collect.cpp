#include "geoworld/collect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "geoworld/csv.hpp"

namespace geoworld::collect {

ProbeDataset collect_pairs(const wm::Checkpoint& ckpt, const CollectOptions& options) {
  const auto& grid = ckpt.train_config.env;
  if (options.expected_env && !(*options.expected_env == grid)) {
    throw CollectError("environment mismatch: checkpoint was trained on " + grid.name() + ", collector expects " +
                       options.expected_env->name());
  }
  auto ds = collect_pairs(ckpt.params, grid, options);
  ds.source_step = ckpt.step;
  ds.config_digest = ckpt.train_config.digest();
  return ds;
}

ProbeDataset collect_pairs(const wm::ModelParams& params, const env::GridConfig& grid, const CollectOptions& options) {
  if (options.n_episodes < 1) throw CollectError("collect_pairs: n_episodes must be >= 1");
  std::mt19937_64 rng(options.seed);
  const auto transitions = env::rollout_random(grid, options.n_episodes, rng);

  std::vector<env::Observation> inputs;
  inputs.reserve(transitions.size());
  for (const auto& t : transitions) {
    inputs.push_back(t.obs);
    env::perturb(inputs.back(), options.perturbation, rng);
  }
  const nn::Tensor mu = wm::encode_means(params, inputs);

  ProbeDataset ds;
  ds.records.resize(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    auto& r = ds.records[i];
    std::copy_n(mu.data() + i * wm::kLatentDim, wm::kLatentDim, r.mu.begin());
    r.x = transitions[i].state.x;
    r.y = transitions[i].state.y;
    r.dir = transitions[i].state.dir;
  }
  ds.split_seed = options.seed ^ 0x9e3779b97f4a7c15ULL;
  ds.perturbation = options.perturbation;
  ds.collect_seed = options.seed;
  return ds;
}

std::pair<std::vector<LabeledLatent>, std::vector<LabeledLatent>> split(const ProbeDataset& dataset,
                                                                         double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must be in (0,1)");
  const std::size_t n = dataset.records.size();
  if (n < 5) throw std::invalid_argument("split: dataset needs at least 5 records");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(dataset.split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::pair<std::vector<LabeledLatent>, std::vector<LabeledLatent>> out;
  out.first.reserve(n_train);
  out.second.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.first : out.second).push_back(dataset.records[order[i]]);
  }
  return out;
}

std::vector<LabeledLatent> subsample_states(const std::vector<LabeledLatent>& records, std::size_t n,
                                            std::mt19937_64& rng) {
  if (n > records.size()) {
    throw std::invalid_argument("subsample_states: requested " + std::to_string(n) + " of " +
                                std::to_string(records.size()) + " records");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first n slots become a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<LabeledLatent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(records[order[i]]);
  return out;
}

void save_dataset(const ProbeDataset& dataset, const std::filesystem::path& csv_path) {
  std::vector<std::string> columns;
  for (std::size_t i = 0; i < wm::kLatentDim; ++i) columns.push_back("mu_" + std::to_string(i));
  columns.insert(columns.end(), {"x", "y", "dir"});
  {
    csv::Writer w(csv_path, dataset.config_digest, columns);
    std::vector<std::string> cells(columns.size());
    for (const auto& r : dataset.records) {
      for (std::size_t i = 0; i < wm::kLatentDim; ++i) cells[i] = format_double(r.mu[i]);
      cells[wm::kLatentDim] = std::to_string(r.x);
      cells[wm::kLatentDim + 1] = std::to_string(r.y);
      cells[wm::kLatentDim + 2] = std::to_string(r.dir);
      w.row(cells);
    }
  }
  KeyValueDoc meta;
  meta.set("dataset", "records", std::to_string(dataset.records.size()));
  meta.set("dataset", "split_seed", std::to_string(dataset.split_seed));
  meta.set("dataset", "collect_seed", std::to_string(dataset.collect_seed));
  meta.set("dataset", "perturbation", dataset.perturbation.label());
  meta.set("source", "checkpoint_step", std::to_string(dataset.source_step));
  meta.set("source", "config_digest", dataset.config_digest);
  std::ofstream out(csv_path.string() + ".meta", std::ios::binary | std::ios::trunc);
  out << meta.serialize();
}

ProbeDataset load_dataset(const std::filesystem::path& csv_path) {
  const auto table = csv::read(csv_path);
  std::vector<std::string> needed;
  for (std::size_t i = 0; i < wm::kLatentDim; ++i) needed.push_back("mu_" + std::to_string(i));
  needed.insert(needed.end(), {"x", "y", "dir"});
  table.require_columns(needed, csv_path.string());

  ProbeDataset ds;
  ds.records.resize(table.rows.size());
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    auto& r = ds.records[row];
    for (std::size_t i = 0; i < wm::kLatentDim; ++i) r.mu[i] = table.number(row, needed[i]);
    r.x = static_cast<int>(table.number(row, "x"));
    r.y = static_cast<int>(table.number(row, "y"));
    r.dir = static_cast<int>(table.number(row, "dir"));
  }
  std::ifstream meta_in(csv_path.string() + ".meta", std::ios::binary);
  if (meta_in) {
    const std::string text((std::istreambuf_iterator<char>(meta_in)), std::istreambuf_iterator<char>());
    const auto meta = KeyValueDoc::parse(text);
    ds.split_seed = parse_uint(meta.require("dataset", "split_seed"), "split_seed");
    ds.collect_seed = parse_uint(meta.require("dataset", "collect_seed"), "collect_seed");
    ds.perturbation = env::Perturbation::parse(meta.require("dataset", "perturbation"));
    ds.source_step = static_cast<int>(parse_int(meta.require("source", "checkpoint_step"), "checkpoint_step"));
    ds.config_digest = meta.require("source", "config_digest");
  }
  return ds;
}

}  // namespace geoworld::collect
