#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/reference.hpp"
#include "geoworld/adam.hpp"
#include "geoworld/gaussian.hpp"
#include "geoworld/layers.hpp"

using namespace geoworld::nn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Weighted sum of outputs so every output element gets a distinct upstream gradient.
double weighted(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

}  // namespace

TEST_CASE("conv2d output shape follows valid-convolution arithmetic") {
  std::mt19937_64 rng(1);
  auto p = LayerParams::conv3x3(3, 16);
  p.init_uniform(rng);
  const auto out = conv2d(random_tensor({3, 7, 7}, rng), p);
  CHECK(out.shape() == Shape{16, 5, 5});
  const auto batched = conv2d(random_tensor({4, 3, 7, 7}, rng), p);
  CHECK(batched.shape() == Shape{4, 16, 5, 5});
  const auto strided = conv2d(random_tensor({3, 7, 7}, rng), p, 2);
  CHECK(strided.shape() == Shape{16, 3, 3});
}

TEST_CASE("delta kernel reproduces the centre crop") {
  std::mt19937_64 rng(2);
  const auto input = random_tensor({1, 7, 7}, rng);
  auto p = LayerParams::conv3x3(1, 1);
  p.weights[4] = 1.0;
  const auto out = conv2d(input, p);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x) CHECK(out[y * 5 + x] == input[(y + 1) * 7 + x + 1]);
}

TEST_CASE("conv2d forward matches the loop reference") {
  std::mt19937_64 rng(3);
  auto p = LayerParams::conv3x3(3, 4);
  p.init_uniform(rng);
  const auto input = random_tensor({3, 6, 5}, rng);
  const auto out = conv2d(input, p);
  const auto expect = ref::conv(input.storage(), 3, 6, 5, p.weights.storage(), p.bias.storage(), 4);
  REQUIRE(out.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("conv2d gradients agree with central differences") {
  std::mt19937_64 rng(4);
  for (std::size_t stride : {1u, 2u}) {
    auto p = LayerParams::conv3x3(2, 3);
    p.init_uniform(rng);
    auto input = random_tensor({2, 5, 5}, rng);
    const auto probe = random_tensor(conv2d(input, p, stride).shape(), rng);
    const auto g = conv2d_backward(input, p, stride, probe);
    auto f = [&] { return weighted(conv2d(input, p, stride), probe); };
    CHECK(ref::max_relative_error(g.input.storage(), ref::numeric_gradient(f, input.data(), input.size())) < 1e-4);
    CHECK(ref::max_relative_error(g.weights.storage(), ref::numeric_gradient(f, p.weights.data(), p.weights.size())) <
          1e-4);
    CHECK(ref::max_relative_error(g.bias.storage(), ref::numeric_gradient(f, p.bias.data(), p.bias.size())) < 1e-4);
  }
}

TEST_CASE("linear forward by hand and identity") {
  LayerParams p = LayerParams::dense(2, 2);
  p.weights = Tensor({2, 2}, {1, 2, 3, 4});
  const auto out = linear(Tensor::from({1, 1}), p);
  CHECK(out.storage() == std::vector<double>{3, 7});

  LayerParams id = LayerParams::dense(3, 3);
  id.weights = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(linear(Tensor::from({0.5, -2, 7}), id).storage() == std::vector<double>{0.5, -2, 7});
}

TEST_CASE("linear gradients agree with central differences") {
  std::mt19937_64 rng(5);
  auto p = LayerParams::dense(6, 4);
  p.init_uniform(rng);
  auto input = random_tensor({3, 6}, rng);
  const auto probe = random_tensor({3, 4}, rng);
  const auto g = linear_backward(input, p, probe);
  auto f = [&] { return weighted(linear(input, p), probe); };
  CHECK(ref::max_relative_error(g.input.storage(), ref::numeric_gradient(f, input.data(), input.size())) < 1e-4);
  CHECK(ref::max_relative_error(g.weights.storage(), ref::numeric_gradient(f, p.weights.data(), p.weights.size())) <
        1e-4);
  CHECK(ref::max_relative_error(g.bias.storage(), ref::numeric_gradient(f, p.bias.data(), p.bias.size())) < 1e-4);
}

TEST_CASE("shape mismatch is rejected") {
  auto p = LayerParams::dense(3, 2);
  CHECK_THROWS_AS(linear(Tensor::from({1, 2}), p), std::invalid_argument);
  auto c = LayerParams::conv3x3(3, 2);
  CHECK_THROWS_AS(conv2d(Tensor({2, 7, 7}), c), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(Tensor({3, 2, 7}), c), std::invalid_argument);
}

TEST_CASE("relu forward, all-negative input and gradient") {
  CHECK(relu(Tensor::from({-1, 0, 2})).storage() == std::vector<double>{0, 0, 2});
  CHECK(relu(Tensor::from({-3, -0.5})).storage() == std::vector<double>{0, 0});
  const auto g = relu_backward(Tensor::from({-1, 0, 2}), Tensor::from({5, 5, 5}));
  CHECK(g.storage() == std::vector<double>{0, 0, 5});

  std::mt19937_64 rng(6);
  auto x = random_tensor({20}, rng);
  for (auto& v : x.values()) v += v > 0 ? 0.1 : -0.1;  // stay clear of the kink
  const auto probe = random_tensor({20}, rng);
  auto f = [&] { return weighted(relu(x), probe); };
  CHECK(ref::max_relative_error(relu_backward(x, probe).storage(), ref::numeric_gradient(f, x.data(), x.size())) <
        1e-4);
}

TEST_CASE("init_uniform stays inside +-1/sqrt(fan_in)") {
  std::mt19937_64 rng(7);
  auto p = LayerParams::conv3x3(16, 32);
  p.init_uniform(rng);
  const double bound = 1.0 / std::sqrt(16.0 * 9.0);
  CHECK(p.fan_in() == 144);
  for (double v : p.weights.values()) CHECK(std::abs(v) <= bound);
  for (double v : p.bias.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("gaussian_kl closed-form values") {
  CHECK(gaussian_kl(std::vector<double>{0.0}, std::vector<double>{0.0}) == 0.0);
  CHECK(gaussian_kl(std::vector<double>{1.0}, std::vector<double>{0.0}) == doctest::Approx(0.5));
  CHECK(gaussian_kl(std::vector<double>{0.0, 0.0}, std::vector<double>{std::log(2.0), 0.0}) ==
        doctest::Approx(0.5 * (2.0 - std::log(2.0) - 1.0)));
}

TEST_CASE("gaussian_kl is non-negative and zero only at the prior") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> mu(5), lv(5);
    for (auto& v : mu) v = n(rng);
    for (auto& v : lv) v = n(rng);
    CHECK(gaussian_kl(mu, lv) > 0.0);
  }
}

TEST_CASE("gaussian_kl agrees with a Monte-Carlo estimate") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> mu(32), lv(32);
  for (auto& v : mu) v = u(rng);
  for (auto& v : lv) v = u(rng);

  // E_q[log q(z) - log p(z)] with z ~ q, one million draws.
  std::normal_distribution<double> n(0.0, 1.0);
  double total = 0.0;
  constexpr int kDraws = 1000000;
  for (int s = 0; s < kDraws; ++s) {
    double log_ratio = 0.0;
    for (int i = 0; i < 32; ++i) {
      const double eps = n(rng);
      const double z = mu[i] + std::exp(0.5 * lv[i]) * eps;
      log_ratio += -0.5 * lv[i] - 0.5 * eps * eps + 0.5 * z * z;
    }
    total += log_ratio;
  }
  const double mc = total / kDraws;
  CHECK(std::abs(mc - gaussian_kl(mu, lv)) / gaussian_kl(mu, lv) < 0.01);
}

TEST_CASE("gaussian_kl gradients agree with central differences") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> mu(8), lv(8);
  for (auto& v : mu) v = u(rng);
  for (auto& v : lv) v = u(rng);
  const auto g = gaussian_kl_backward(mu, lv);
  auto f = [&] { return gaussian_kl(mu, lv); };
  CHECK(ref::max_relative_error(g.mu, ref::numeric_gradient(f, mu.data(), mu.size())) < 1e-4);
  CHECK(ref::max_relative_error(g.log_var, ref::numeric_gradient(f, lv.data(), lv.size())) < 1e-4);
}

TEST_CASE("reparameterize: vanishing variance, sample mean, determinism") {
  const std::vector<double> mu{0.3, -1.2, 2.0};
  CHECK(reparameterize(mu, std::vector<double>(3, -1e3), std::vector<double>{1.0, -2.0, 0.5}) == mu);

  std::mt19937_64 rng(11);
  const std::vector<double> lv{0.0, std::log(4.0), -1.0};
  std::vector<double> sum(3, 0.0);
  constexpr int kDraws = 100000;
  for (int s = 0; s < kDraws; ++s) {
    const auto z = reparameterize(mu, lv, rng);
    for (int i = 0; i < 3; ++i) sum[i] += z[i];
  }
  for (int i = 0; i < 3; ++i) {
    const double se = std::exp(0.5 * lv[i]) / std::sqrt(static_cast<double>(kDraws));
    CHECK(std::abs(sum[i] / kDraws - mu[i]) < 3.0 * se);
  }

  std::mt19937_64 a(12), b(12);
  CHECK(reparameterize(mu, lv, a) == reparameterize(mu, lv, b));
}

TEST_CASE("adam: zero gradient leaves params, first step is -lr*sign(g)") {
  Tensor x = Tensor::from({1.0, -2.0, 3.0});
  auto st = AdamState::for_param(x, 0.01);
  adam_step(x, Tensor::from({0, 0, 0}), st);
  CHECK(x.storage() == std::vector<double>{1.0, -2.0, 3.0});
  CHECK(st.t == 1);

  Tensor y = Tensor::from({1.0, -2.0, 3.0});
  auto s2 = AdamState::for_param(y, 0.01);
  adam_step(y, Tensor::from({0.5, -4.0, 1e-3}), s2);
  CHECK(y[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(y[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(y[2] == doctest::Approx(3.0 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam converges on x^2") {
  Tensor x = Tensor::from({1.0});
  auto st = AdamState::for_param(x, 0.1);
  for (int i = 0; i < 200; ++i) adam_step(x, Tensor::from({2.0 * x[0]}), st);
  CHECK(std::abs(x[0]) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients without touching state") {
  Tensor x = Tensor::from({1.0, 2.0});
  auto st = AdamState::for_param(x);
  const auto before = st;
  CHECK_THROWS_AS(adam_step(x, Tensor::from({NAN, 0.0}), st), NonFiniteGradient);
  CHECK(x.storage() == std::vector<double>{1.0, 2.0});
  CHECK(st == before);
}
