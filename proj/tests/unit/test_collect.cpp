#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "../support/reference.hpp"
#include "geoworld/collect.hpp"
#include "geoworld/train.hpp"

using namespace geoworld;

namespace {

wm::Checkpoint fresh(std::uint64_t seed = 0) {
  wm::TrainConfig c;
  c.seed = seed;
  return wm::initial_checkpoint(c);
}

}  // namespace

TEST_CASE("records pair the encoder mean with the pose it was rendered from") {
  const auto ck = fresh(1);
  collect::CollectOptions o;
  o.n_episodes = 2;
  o.seed = 5;
  const auto ds = collect::collect_pairs(ck, o);
  REQUIRE(ds.records.size() <= 2 * 256);
  for (std::size_t i = 0; i < ds.records.size(); i += 37) {
    const auto& r = ds.records[i];
    const auto obs = ref::world_frame_view(ck.train_config.env, {r.x, r.y, r.dir});
    const auto e = ref::encode(ck.params, obs);
    for (std::size_t k = 0; k < wm::kLatentDim; ++k) CHECK(r.mu[k] == doctest::Approx(e.mu[k]).epsilon(1e-12));
  }
  CHECK(ds.source_step == 0);
  CHECK(ds.config_digest == ck.train_config.digest());
}

TEST_CASE("collection is seeded") {
  const auto ck = fresh();
  collect::CollectOptions o;
  o.n_episodes = 3;
  o.seed = 9;
  const auto a = collect::collect_pairs(ck, o);
  CHECK(a.records == collect::collect_pairs(ck, o).records);
  o.seed = 10;
  CHECK_FALSE(a.records == collect::collect_pairs(ck, o).records);
}

TEST_CASE("random exploration covers every interior cell and direction") {
  collect::CollectOptions o;
  o.seed = 3;
  const auto ds = collect::collect_pairs(fresh(), o);
  CHECK(ds.records.size() >= 40000);
  CHECK(ds.records.size() <= 52000);
  std::set<std::array<int, 3>> poses;
  for (const auto& r : ds.records) poses.insert({r.x, r.y, r.dir});
  // 36 cells x 4 directions, minus the goal cell which ends the episode before it is recorded.
  CHECK(poses.size() == 35 * 4);
}

TEST_CASE("perturbed collection changes the latents but not the labels") {
  const auto ck = fresh();
  collect::CollectOptions o;
  o.n_episodes = 1;
  const auto clean = collect::collect_pairs(ck, o);
  o.perturbation = env::Perturbation::mask(0.5);
  const auto masked = collect::collect_pairs(ck, o);
  CHECK(masked.perturbation == env::Perturbation::mask(0.5));
  CHECK_FALSE(clean.records == masked.records);
}

TEST_CASE("environment mismatch and bad arguments") {
  collect::CollectOptions o;
  o.expected_env = env::GridConfig::empty16();
  CHECK_THROWS_AS(collect::collect_pairs(fresh(), o), collect::CollectError);
  o = {};
  o.n_episodes = 0;
  CHECK_THROWS_AS(collect::collect_pairs(fresh(), o), collect::CollectError);
}

TEST_CASE("split is a seeded partition") {
  collect::CollectOptions o;
  o.n_episodes = 1;
  auto ds = collect::collect_pairs(fresh(), o);
  for (std::size_t i = 0; i < ds.records.size(); ++i) ds.records[i].mu[0] = static_cast<double>(i);
  const auto [train, test] = collect::split(ds, 0.8);
  CHECK(train.size() == 205);
  CHECK(test.size() == 51);
  std::set<double> ids;
  for (const auto& r : train) ids.insert(r.mu[0]);
  for (const auto& r : test) ids.insert(r.mu[0]);
  CHECK(ids.size() == ds.records.size());
  CHECK(collect::split(ds, 0.8).first == train);
  CHECK_THROWS(collect::split(ds, 1.0));
}

TEST_CASE("subsample draws without replacement") {
  collect::CollectOptions o;
  o.n_episodes = 1;
  auto ds = collect::collect_pairs(fresh(), o);
  for (std::size_t i = 0; i < ds.records.size(); ++i) ds.records[i].mu[0] = static_cast<double>(i);
  std::mt19937_64 rng(2);
  const auto s = collect::subsample_states(ds.records, 100, rng);
  std::set<double> ids;
  for (const auto& r : s) ids.insert(r.mu[0]);
  CHECK(ids.size() == 100);
  CHECK_THROWS(collect::subsample_states(ds.records, ds.records.size() + 1, rng));
}

TEST_CASE("dataset CSV round trip") {
  collect::CollectOptions o;
  o.n_episodes = 1;
  o.perturbation = env::Perturbation::gaussian(0.3);
  o.seed = 4;
  const auto ds = collect::collect_pairs(fresh(), o);
  const auto path = std::filesystem::temp_directory_path() / "geoworld_test_dataset.csv";
  collect::save_dataset(ds, path);
  const auto back = collect::load_dataset(path);
  CHECK(back.records == ds.records);
  CHECK(back.split_seed == ds.split_seed);
  CHECK(back.perturbation == ds.perturbation);
  CHECK(back.config_digest == ds.config_digest);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta");
}
