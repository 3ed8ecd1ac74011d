#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <functional>
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/reference.hpp"
#include "geoworld/checkpoint.hpp"
#include "geoworld/train.hpp"

using namespace geoworld;
using namespace geoworld::wm;

namespace {

std::vector<env::Transition> sample_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto all = env::rollout_random(env::GridConfig::empty8(), 1, rng);
  std::vector<env::Transition> out;
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(all[pick(rng)]);
  return out;
}

nn::Tensor gaussian_noise(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Tensor t({rows, kLatentDim});
  for (auto& v : t.values()) v = n(rng);
  return t;
}

std::vector<ref::Vec> rows_of(const nn::Tensor& t) {
  std::vector<ref::Vec> out;
  for (std::size_t r = 0; r < t.dim(0); ++r)
    out.emplace_back(t.data() + r * t.dim(1), t.data() + (r + 1) * t.dim(1));
  return out;
}

TrainConfig short_config(int steps) {
  TrainConfig c;
  c.total_steps = steps;
  c.checkpoint_steps = {steps / 2, steps};
  c.log_every = steps;
  c.buffer_capacity = 500;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("encoder forward matches the loop reference") {
  const auto p = ModelParams::initialized(std::uint64_t{1});
  for (const auto& t : sample_batch(5, 2)) {
    const auto e = encode(p, t.obs);
    const auto r = ref::encode(p, t.obs);
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      CHECK(e.mu[i] == doctest::Approx(r.mu[i]).epsilon(1e-12));
      CHECK(e.log_var[i] == doctest::Approx(r.log_var[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("transition forward matches the loop reference") {
  const auto p = ModelParams::initialized(std::uint64_t{3});
  ref::Vec z(kLatentDim);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::sin(1.0 + i);
  for (int a = 0; a < env::kNumActions; ++a) {
    const auto got = predict_next(p, z, static_cast<env::Action>(a));
    const auto want = ref::transition(p, z, a);
    for (std::size_t i = 0; i < kLatentDim; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("loss value matches the reference objective") {
  const auto p = ModelParams::initialized(std::uint64_t{4});
  const auto batch = sample_batch(6, 5);
  const auto noise = gaussian_noise(batch.size(), 6);
  std::vector<ref::Vec> targets;
  for (const auto& t : batch) targets.push_back(ref::encode(p, t.next_obs).mu);
  for (double beta : {0.0, 0.001, 0.1, 1.0}) {
    const auto got = compute_loss(p, batch, beta, noise);
    CHECK(got.loss.total == doctest::Approx(ref::loss_with_targets(p, batch, targets, rows_of(noise), beta)).epsilon(1e-10));
    CHECK(got.loss.total == doctest::Approx(got.loss.transition_mse + beta * got.loss.kl).epsilon(1e-12));
  }
  CHECK(compute_loss(p, batch, 0.0, noise).loss.total == compute_loss(p, batch, 0.0, noise).loss.transition_mse);
}

TEST_CASE("composed loss gradient agrees with central differences") {
  auto p = ModelParams::initialized(std::uint64_t{7});
  const auto batch = sample_batch(4, 8);
  const auto noise = gaussian_noise(batch.size(), 9);
  const double beta = 0.1;
  // Stop mode: targets frozen at the unperturbed parameters.
  std::vector<ref::Vec> targets;
  for (const auto& t : batch) targets.push_back(ref::encode(p, t.next_obs).mu);

  for (auto mode : {TargetGradient::Through, TargetGradient::Stop}) {
    const bool through = mode == TargetGradient::Through;
    INFO("through=" << through);
    const auto analytic = compute_loss(p, batch, beta, noise, mode).grads;
    std::function<double()> f;
    if (through) f = [&] { return ref::loss_full(p, batch, rows_of(noise), beta); };
    else f = [&] { return ref::loss_with_targets(p, batch, targets, rows_of(noise), beta); };
    std::mt19937_64 rng(10);
    auto tensors = p.tensors();
    const auto grads = analytic.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      auto& t = *tensors[k].tensor;
      const auto& g = *grads[k].tensor;
      std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
      ref::Vec a, n;
      for (int s = 0; s < 40; ++s) {
        const std::size_t i = pick(rng);
        a.push_back(g[i]);
        n.push_back(ref::numeric_gradient(f, t.data() + i, 1)[0]);
      }
      INFO(tensors[k].name);
      CHECK(ref::max_relative_error(a, n, 1e-6) < 1e-3);
    }
  }
}

TEST_CASE("target gradient only changes encoder gradients") {
  const auto p = ModelParams::initialized(std::uint64_t{17});
  const auto batch = sample_batch(5, 18);
  const auto noise = gaussian_noise(batch.size(), 19);
  const auto a = compute_loss(p, batch, 0.01, noise, TargetGradient::Through);
  const auto b = compute_loss(p, batch, 0.01, noise, TargetGradient::Stop);
  CHECK(a.loss.total == b.loss.total);
  CHECK(a.grads.trans_fc1.weights == b.grads.trans_fc1.weights);
  CHECK(a.grads.trans_fc2.weights == b.grads.trans_fc2.weights);
  CHECK(a.grads.enc_log_var.weights == b.grads.enc_log_var.weights);
  CHECK_FALSE(a.grads.conv1.weights == b.grads.conv1.weights);
}

TEST_CASE("log-variance outside the clamp gets no gradient") {
  auto p = ModelParams::initialized(std::uint64_t{12});
  p.enc_log_var.bias.fill(50.0);
  const auto batch = sample_batch(3, 13);
  const auto g = compute_loss(p, batch, 0.1, gaussian_noise(3, 14)).grads;
  for (double v : g.enc_log_var.weights.values()) CHECK(v == 0.0);
  for (double v : g.enc_log_var.bias.values()) CHECK(v == 0.0);
  for (double v : encode(p, batch[0].obs).log_var) CHECK(v == kLogVarMax);
}

TEST_CASE("duplicating a batch leaves loss and gradients unchanged") {
  const auto p = ModelParams::initialized(std::uint64_t{15});
  const auto batch = sample_batch(3, 16);
  const auto noise = gaussian_noise(3, 17);
  std::vector<env::Transition> twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  nn::Tensor noise2({6, kLatentDim});
  for (std::size_t i = 0; i < noise.size(); ++i) noise2[i] = noise2[i + noise.size()] = noise[i];
  const auto a = compute_loss(p, batch, 0.01, noise);
  const auto b = compute_loss(p, twice, 0.01, noise2);
  CHECK(a.loss.total == doctest::Approx(b.loss.total).epsilon(1e-12));
  const auto ga = a.grads.tensors();
  const auto gb = b.grads.tensors();
  for (std::size_t k = 0; k < ga.size(); ++k)
    for (std::size_t i = 0; i < ga[k].tensor->size(); ++i)
      CHECK((*ga[k].tensor)[i] == doctest::Approx((*gb[k].tensor)[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("prediction loss uses the encoder mean and no KL") {
  const auto p = ModelParams::initialized(std::uint64_t{18});
  const auto batch = sample_batch(5, 19);
  double sq = 0.0;
  for (const auto& t : batch) {
    const auto pred = ref::transition(p, ref::encode(p, t.obs).mu, static_cast<int>(t.action));
    const auto target = ref::encode(p, t.next_obs).mu;
    for (std::size_t i = 0; i < kLatentDim; ++i) sq += (pred[i] - target[i]) * (pred[i] - target[i]);
  }
  CHECK(prediction_loss(p, batch) == doctest::Approx(sq / (batch.size() * kLatentDim)).epsilon(1e-10));
}

TEST_CASE("initialisation is seeded and bounded") {
  CHECK(ModelParams::initialized(std::uint64_t{1}) == ModelParams::initialized(std::uint64_t{1}));
  CHECK_FALSE(ModelParams::initialized(std::uint64_t{1}) == ModelParams::initialized(std::uint64_t{2}));
  const auto p = ModelParams::initialized(std::uint64_t{1});
  CHECK(p.parameter_count() == 448 + 4640 + 36992 + 4128 + 4128 + 5120 + 4128);
}

TEST_CASE("training is deterministic and loss decreases") {
  const auto c = short_config(400);
  const auto a = train(c);
  const auto b = train(c);
  REQUIRE(a.size() == 2);
  CHECK(a == b);
  CHECK(a[0].step == 200);
  CHECK(a[1].step == 400);

  auto other = c;
  other.seed = 12;
  CHECK_FALSE(train(other)[1].params == a[1].params);

  CHECK_FALSE(a[1].params == initial_checkpoint(c).params);
  for (const auto& nt : a[1].params.tensors()) CHECK(nt.tensor->all_finite());
  for (const auto& st : a[1].adam) CHECK(st.t == 400);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto ck = train(short_config(100))[1];
  const auto bytes = serialize_checkpoint(ck);
  CHECK(deserialize_checkpoint(bytes) == ck);
  CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "geoworld_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / checkpoint_filename(ck.step);
  save_checkpoint(ck, path);
  CHECK(load_checkpoint(path) == ck);
  CHECK(checkpoint_filename(5000) == "ckpt_005000.gwck");
  std::filesystem::remove_all(dir);
}

TEST_CASE("damaged checkpoints raise typed errors") {
  const auto bytes = serialize_checkpoint(initial_checkpoint(short_config(100)));
  auto kind_of = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of(bytes.substr(0, bytes.size() - 8)) == static_cast<int>(CheckpointError::Kind::Truncated));
  CHECK(kind_of("not a checkpoint") == static_cast<int>(CheckpointError::Kind::Version));
  auto replace_line = [&](const std::string& key, const std::string& line) {
    auto b = bytes;
    const auto pos = b.find(key);
    REQUIRE(pos != std::string::npos);
    b.replace(pos, b.find('\n', pos) - pos, line);
    return b;
  };
  CHECK(kind_of(replace_line("format_version", "format_version = 999")) ==
        static_cast<int>(CheckpointError::Kind::Version));
  CHECK(kind_of(replace_line("step", "step = twelve")) == static_cast<int>(CheckpointError::Kind::Parse));
  try {
    load_checkpoint("/nonexistent/dir/x.gwck");
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::Io);
  }
}

TEST_CASE("config text round trip and validation") {
  TrainConfig c;
  c.beta = 0.1;
  c.env = env::GridConfig::empty16();
  c.perturbation = env::Perturbation::mask(0.5);
  c.target_gradient = false;
  const auto back = TrainConfig::from_doc(c.to_doc());
  CHECK(back == c);
  CHECK(back.digest() == c.digest());
  auto d = c;
  d.beta = 0.2;
  CHECK(d.digest() != c.digest());
  d = c;
  d.target_gradient = true;
  CHECK(d.digest() != c.digest());

  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = TrainConfig{};
  bad.beta = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(every_n_steps(3000, 1000) == std::vector<int>{1000, 2000, 3000});
}
