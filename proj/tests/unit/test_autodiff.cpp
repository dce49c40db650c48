#include <cmath>

#include "agrn/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace agrn;
using Inputs = std::vector<Tensor>;

namespace {

constexpr double kTol = 1e-6;

double check(const std::function<Tensor(const Inputs&)>& f, Inputs inputs) {
  return oracle::gradient_error(f, std::move(inputs));
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("tensor basics") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rank() == 2);
    CHECK(t.dim(1) == 3);
    CHECK(t.numel() == 6);
    CHECK_FALSE(t.requires_grad());
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(t.item(), std::invalid_argument);
    CHECK(Tensor::scalar(2.5).item() == 2.5);
    CHECK(to_string(Shape{2, 3}) == "[2x3]");
  }

  TEST_CASE("hand-checked gradients of a small expression") {
    // f = sum(tanh(a * b) + 3a); df/da = b (1 - tanh^2(ab)) + 3.
    Tensor a({2}, {0.5, -1.0}, true);
    Tensor b({2}, {2.0, 0.25}, true);
    const Tensor f = sum(add(tanh(mul(a, b)), scalar_mul(a, 3.0)));
    f.backward();
    for (std::size_t i = 0; i < 2; ++i) {
      const double ab = a.values()[i] * b.values()[i];
      const double sech2 = 1.0 - std::tanh(ab) * std::tanh(ab);
      CHECK(a.grad()[i] == doctest::Approx(b.values()[i] * sech2 + 3.0).epsilon(1e-15));
      CHECK(b.grad()[i] == doctest::Approx(a.values()[i] * sech2).epsilon(1e-15));
    }
  }

  TEST_CASE("gradients accumulate over shared inputs") {
    Tensor a({3}, {1, 2, 3}, true);
    sum(add(mul(a, a), a)).backward();  // d/da (a^2 + a) = 2a + 1
    CHECK(std::vector<double>(a.grad().begin(), a.grad().end()) == std::vector<double>{3, 5, 7});
  }

  TEST_CASE("backward consumes the tape") {
    Tensor a({2}, {1, 2}, true);
    const Tensor loss = sum(mul(a, a));
    loss.backward();
    CHECK_THROWS_AS(loss.backward(), std::logic_error);
    CHECK_THROWS_AS(Tensor({2}, {1, 2}).backward(), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::scalar(1.0).backward(), std::logic_error);
  }

  TEST_CASE("NoGradScope records nothing") {
    Tensor a({2}, {1, 2}, true);
    NoGradScope scope;
    CHECK_FALSE(grad_enabled());
    const Tensor y = sum(mul(a, a));
    CHECK_FALSE(y.requires_grad());
  }

  TEST_CASE("f32 mode rounds every op result") {
    Tensor a({1}, {1.0}, true);
    Tensor b({1}, {1e-9}, true);
    CHECK(add(a, b).values()[0] != 1.0);
    PrecisionScope single(Precision::f32);
    CHECK(add(a, b).values()[0] == 1.0);
    CHECK(tanh(Tensor({1}, std::vector<double>{0.1})).values()[0] == static_cast<double>(static_cast<float>(std::tanh(0.1))));
  }

  TEST_CASE("shape errors name both shapes") {
    std::mt19937_64 rng(1);
    const Tensor a = oracle::random_tensor({2, 3}, rng);
    const Tensor b = oracle::random_tensor({2, 2}, rng);
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x3] and [2x2]"), std::invalid_argument);
    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
    CHECK_THROWS_AS(reshape(a, {4}), std::invalid_argument);
    CHECK_THROWS_AS(softmax(a, 2), std::invalid_argument);
  }

  TEST_CASE("finite-difference gradient checks for every op") {
    std::mt19937_64 rng(2024);
    auto r = [&](Shape s) { return oracle::random_tensor(s, rng); };

    SUBCASE("matmul") {
      CHECK(check([](const Inputs& in) { return oracle::project(matmul(in[0], in[1]), 1); },
                  {r({2, 3, 4}), r({4, 5})}) < kTol);
    }
    SUBCASE("add / sub / mul with broadcasting") {
      CHECK(check([](const Inputs& in) { return oracle::project(add(in[0], in[1]), 2); }, {r({2, 3, 4}), r({3, 4})}) <
            kTol);
      CHECK(check([](const Inputs& in) { return oracle::project(sub(in[0], in[1]), 3); }, {r({2, 3, 4}), r({4})}) <
            kTol);
      CHECK(check([](const Inputs& in) { return oracle::project(mul(in[0], in[1]), 4); }, {r({2, 3}), r({2, 3})}) <
            kTol);
    }
    SUBCASE("scale_by and scalar_mul") {
      CHECK(check([](const Inputs& in) { return oracle::project(scale_by(in[0], in[1]), 5); },
                  {r({2, 3, 4}), r({2, 3})}) < kTol);
      CHECK(check([](const Inputs& in) { return oracle::project(scalar_mul(in[0], -1.7), 6); }, {r({5})}) < kTol);
    }
    SUBCASE("tanh and leaky_relu") {
      CHECK(check([](const Inputs& in) { return oracle::project(tanh(in[0]), 7); }, {r({3, 4})}) < kTol);
      CHECK(check([](const Inputs& in) { return oracle::project(leaky_relu(in[0], 0.01), 8); }, {r({3, 4})}) < kTol);
    }
    SUBCASE("softmax along each axis, with and without a mask") {
      for (std::size_t axis = 0; axis < 3; ++axis)
        CHECK(check([axis](const Inputs& in) { return oracle::project(softmax(in[0], axis), 9 + axis); },
                    {r({2, 3, 4})}) < kTol);
      const std::vector<std::uint8_t> mask{0, 1, 0};
      CHECK(check([&](const Inputs& in) { return oracle::project(softmax(in[0], 1, mask), 12); }, {r({2, 3, 2})}) <
            kTol);
    }
    SUBCASE("reductions, reshape and concat") {
      CHECK(check([](const Inputs& in) { return sum(mul(in[0], in[0])); }, {r({3, 2})}) < kTol);
      CHECK(check([](const Inputs& in) { return mean(tanh(in[0])); }, {r({3, 2})}) < kTol);
      CHECK(check([](const Inputs& in) { return oracle::project(reshape(in[0], {6, 2}), 13); }, {r({3, 4})}) < kTol);
      CHECK(check(
                [](const Inputs& in) {
                  const Tensor parts[] = {in[0], in[1]};
                  return oracle::project(concat(parts, 2), 14);
                },
                {r({2, 3, 2}), r({2, 3, 5})}) < kTol);
      CHECK(check(
                [](const Inputs& in) {
                  const Tensor parts[] = {in[0], in[1]};
                  return oracle::project(concat(parts, 0), 15);
                },
                {r({1, 3}), r({2, 3})}) < kTol);
    }
    SUBCASE("node_mix") {
      std::mt19937_64 mrng(3);
      const Matrix m = oracle::random_adjacency(4, mrng, 0.8);
      CHECK(check([&](const Inputs& in) { return oracle::project(node_mix(m, in[0]), 16); }, {r({2, 4, 3})}) < kTol);
    }
    SUBCASE("batch_norm in training mode") {
      auto state = BatchNormState::fresh(6);
      CHECK(check(
                [&](const Inputs& in) {
                  return oracle::project(batch_norm(in[0], in[1], in[2], state, {true, 0.9, 1e-5}), 17);
                },
                {r({5, 3, 2}), r({3, 2}), r({3, 2})}) < kTol);
    }
    SUBCASE("batch_norm in inference mode") {
      auto state = BatchNormState::fresh(4);
      state.running_mean = {0.1, -0.2, 0.3, 0.0};
      state.running_var = {1.5, 0.5, 2.0, 1.0};
      CHECK(check(
                [&](const Inputs& in) {
                  return oracle::project(batch_norm(in[0], in[1], in[2], state, {false, 0.9, 1e-5}), 18);
                },
                {r({3, 4}), r({4}), r({4})}) < kTol);
    }
    SUBCASE("masked_pair_max") {
      const std::vector<std::uint8_t> fake{0, 0, 1, 0, 0, 1};
      CHECK(check([&](const Inputs& in) { return oracle::project(masked_pair_max(in[0], fake), 19); },
                  {r({2, 6, 3})}) < kTol);
    }
    SUBCASE("softmax_cross_entropy") {
      const std::vector<int> labels{0, 3, 1};
      CHECK(check([&](const Inputs& in) { return softmax_cross_entropy(in[0], labels); }, {r({3, 4})}) < kTol);
    }
  }

  TEST_CASE("softmax masking and normalisation") {
    std::mt19937_64 rng(8);
    const Tensor a = oracle::random_tensor({2, 4}, rng, 3.0, false);
    const std::vector<std::uint8_t> mask{0, 1, 0, 0};
    const Tensor p = softmax(a, 1, mask);
    for (std::size_t b = 0; b < 2; ++b) {
      CHECK(p.values()[b * 4 + 1] == 0.0);
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += p.values()[b * 4 + i];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    }
    const std::vector<std::uint8_t> all{1, 1, 1, 1};
    const Tensor none = softmax(a, 1, all);
    for (double v : none.values()) CHECK(v == 0.0);
    // Large logits stay finite.
    const Tensor big({1, 3}, {1000, 999, -1000});
    const Tensor stable = softmax(big, 1);
    for (double v : stable.values()) CHECK(std::isfinite(v));
  }

  TEST_CASE("batch_norm statistics and running update") {
    Tensor x({4, 1}, {1, 2, 3, 6});
    Tensor gamma({1}, std::vector<double>{2.0}), beta({1}, std::vector<double>{0.5});
    auto state = BatchNormState::fresh(1);
    const Tensor y = batch_norm(x, gamma, beta, state, {true, 0.9, 1e-5});
    const double mu = 3.0, var = (4 + 1 + 0 + 9) / 4.0;
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(y.values()[i] == doctest::Approx(2.0 * (x.values()[i] - mu) / std::sqrt(var + 1e-5) + 0.5).epsilon(1e-14));
    CHECK(state.running_mean[0] == doctest::Approx(0.1 * mu).epsilon(1e-15));
    CHECK(state.running_var[0] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-15));
    const Tensor z = batch_norm(x, gamma, beta, state, {false, 0.9, 1e-5});
    CHECK(z.values()[0] ==
          doctest::Approx(2.0 * (1.0 - state.running_mean[0]) / std::sqrt(state.running_var[0] + 1e-5) + 0.5));
  }

  TEST_CASE("pair max routes the gradient to the winner, lower slot on ties") {
    Tensor x({1, 4, 1}, {2.0, 2.0, -1.0, 3.0}, true);
    sum(masked_pair_max(x, std::vector<std::uint8_t>(4, 0))).backward();
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 0, 1});
    Tensor y({1, 2, 1}, {5.0, 7.0}, true);
    const Tensor out = masked_pair_max(y, std::vector<std::uint8_t>{1, 1});
    CHECK(out.values()[0] == 0.0);
  }

  TEST_CASE("cross-entropy values and label validation") {
    const Tensor uniform({2, 4}, std::vector<double>(8, 0.3));
    const std::vector<int> labels{0, 2};
    CHECK(std::abs(softmax_cross_entropy(uniform, labels).item() - std::log(4.0)) < 1e-12);
    const Tensor confident({1, 4}, {1000, 0, 0, 0});
    const std::vector<int> zero{0};
    CHECK(softmax_cross_entropy(confident, zero).item() < 1e-12);
    const std::vector<int> bad{4, 0};
    CHECK_THROWS_AS(softmax_cross_entropy(uniform, bad), std::invalid_argument);
    const std::vector<int> negative{-1, 0};
    CHECK_THROWS_AS(softmax_cross_entropy(uniform, negative), std::invalid_argument);
  }
}
