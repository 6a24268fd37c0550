#include "doctest.h"

#include "dgnet/autodiff.hpp"
#include "dgnet/rng.hpp"
#include "oracles.hpp"

using namespace dgnet;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Keeps values away from the leaky-relu/|.| kinks so finite differences are valid.
Tensor random_tensor_kink_free(std::vector<int> shape, Rng& rng, double margin = 0.05) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double v = rng.uniform(margin, 1.0);
    if (rng.uniform() < 0.5) v = -v;
    t[i] = v;
  }
  return t;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("conv2d shape contract") {
  Rng rng(1);
  Tensor x = random_tensor({3, 16, 16}, rng);
  Tensor w = random_tensor({5, 3, 3, 3}, rng);
  Tensor b = random_tensor({5}, rng);
  Var out = conv2d(Var(x), Var(w), Var(b), 2, 1);
  CHECK(out.value().shape() == std::vector<int>{5, 8, 8});

  Var out2 = conv2d(Var(x), Var(w), Var(b), 1, 1);
  CHECK(out2.value().shape() == std::vector<int>{5, 16, 16});

  CHECK_THROWS_AS(conv2d(Var(random_tensor({2, 8, 8}, rng)), Var(w), Var(b), 1, 1),
                  ShapeMismatchError);
}

TEST_CASE("conv2d forward matches direct definition") {
  Rng rng(2);
  Tensor x = random_tensor({2, 7, 6}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  const int stride = 2, pad = 1;
  Var out = conv2d(Var(x), Var(w), Var(b), stride, pad);

  const int oh = out.value().dim(1), ow = out.value().dim(2);
  for (int oc = 0; oc < 3; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < 2; ++ic)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * stride - pad + ky;
              const int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
              acc += w.at(oc, ic, ky, kx) * x.at(ic, iy, ix);
            }
        CHECK(out.value().at(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("conv2d gradients match finite differences") {
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
    Rng rng(7 + stride * 10 + pad);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);

    auto eval = [&]() {
      return mse_to_const(conv2d(Var(x), Var(w), Var(b), stride, pad), 0.3).value()[0];
    };

    Var vx(x, true), vw(w, true), vb(b, true);
    Var loss = mse_to_const(conv2d(vx, vw, vb, stride, pad), 0.3);
    backward(loss);

    auto check_group = [&](Tensor& theta, const Tensor& grad) {
      auto stats = oracle::gradcheck(eval, theta, grad, 1e-5, 1e-6);
      CHECK(stats.worst < 1e-6);
    };
    check_group(x, vx.grad());
    check_group(w, vw.grad());
    check_group(b, vb.grad());
  }
}

TEST_CASE("activation gradients at kink-free points") {
  Rng rng(11);
  Tensor x = random_tensor_kink_free({2, 4, 4}, rng);

  auto check_unary = [&](auto make) {
    auto eval = [&]() { return mse_to_const(make(Var(x)), 0.2).value()[0]; };
    Var vx(x, true);
    Var loss = mse_to_const(make(vx), 0.2);
    backward(loss);
    auto stats = oracle::gradcheck(eval, x, vx.grad(), 1e-5, 1e-6);
    CHECK(stats.worst < 1e-5);
  };

  check_unary([](const Var& v) { return leaky_relu(v, 0.2); });
  check_unary([](const Var& v) { return relu(v); });
  check_unary([](const Var& v) { return tanh_op(v); });
  check_unary([](const Var& v) { return softplus(v); });
  check_unary([](const Var& v) { return upsample_nearest2(v); });
  check_unary([](const Var& v) { return scale(v, -1.7); });
}

TEST_CASE("upsample_nearest2 layout") {
  Tensor x({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Var out = upsample_nearest2(Var(x));
  CHECK(out.value().shape() == std::vector<int>{1, 4, 4});
  CHECK(out.value().at(0, 0, 0) == 1.0);
  CHECK(out.value().at(0, 0, 1) == 1.0);
  CHECK(out.value().at(0, 1, 1) == 1.0);
  CHECK(out.value().at(0, 0, 2) == 2.0);
  CHECK(out.value().at(0, 3, 3) == 4.0);
}

TEST_CASE("concat_channels splits gradient") {
  Rng rng(13);
  Tensor a = random_tensor({2, 3, 3}, rng);
  Tensor b = random_tensor({3, 3, 3}, rng);
  Var va(a, true), vb(b, true);
  Var out = concat_channels(va, vb);
  CHECK(out.value().shape() == std::vector<int>{5, 3, 3});

  Var loss = mse_to_const(out, 0.0);
  backward(loss);
  auto eval = [&]() { return mse_to_const(concat_channels(Var(a), Var(b)), 0.0).value()[0]; };
  CHECK(oracle::gradcheck(eval, a, va.grad(), 1e-5, 1e-6).worst < 1e-6);
  CHECK(oracle::gradcheck(eval, b, vb.grad(), 1e-5, 1e-6).worst < 1e-6);

  CHECK_THROWS_AS(concat_channels(Var(a), Var(Tensor({1, 2, 3}))), ShapeMismatchError);
}

TEST_CASE("l1 ops match loop oracles and differentiate") {
  Rng rng(17);
  Tensor a = random_tensor({3, 5, 5}, rng);
  Tensor b = random_tensor({3, 5, 5}, rng);

  CHECK(l1_mean(Var(a), Var(b)).value()[0] ==
        doctest::Approx(oracle::l1_mean_loop(a, b)).epsilon(1e-12));

  Var va(a, true), vb(b, true);
  Var loss = l1_mean(va, vb);
  backward(loss);
  auto eval = [&]() { return l1_mean(Var(a), Var(b)).value()[0]; };
  CHECK(oracle::gradcheck(eval, a, va.grad(), 1e-6, 1e-5).worst < 1e-4);

  // Weighted form with an all-ones weight equals the plain mean.
  Tensor ones = Tensor::full({5, 5}, 1.0);
  CHECK(l1_mean_weighted(Var(a), Var(b), ones).value()[0] ==
        doctest::Approx(oracle::l1_mean_loop(a, b)).epsilon(1e-12));

  // Half-support weight: restricted mean recomputed by hand.
  Tensor half({5, 5});
  double acc = 0.0;
  for (int p = 0; p < 25; ++p) half[p] = p < 12 ? 1.0 : 0.0;
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 12; ++p) acc += std::fabs(a[c * 25 + p] - b[c * 25 + p]);
  CHECK(l1_mean_weighted(Var(a), Var(b), half).value()[0] ==
        doctest::Approx(acc / (3.0 * 12.0)).epsilon(1e-12));
}

TEST_CASE("weighted_sum combines scalars and routes gradients") {
  Var p1(Tensor::scalar(0.5), true);
  Var p2(Tensor::scalar(0.1), true);
  Var total = weighted_sum({p1, p2}, {1.0, 10.0});
  CHECK(total.value()[0] == doctest::Approx(1.5));
  backward(total);
  CHECK(p1.grad()[0] == doctest::Approx(1.0));
  CHECK(p2.grad()[0] == doctest::Approx(10.0));
}

TEST_CASE("ops are deterministic") {
  Rng rng(19);
  Tensor x = random_tensor({3, 12, 12}, rng);
  Tensor w = random_tensor({4, 3, 3, 3}, rng);
  Tensor b = random_tensor({4}, rng);
  Var o1 = tanh_op(conv2d(Var(x), Var(w), Var(b), 2, 1));
  Var o2 = tanh_op(conv2d(Var(x), Var(w), Var(b), 2, 1));
  REQUIRE(o1.value().size() == o2.value().size());
  for (std::size_t i = 0; i < o1.value().size(); ++i) CHECK(o1.value()[i] == o2.value()[i]);
}

TEST_CASE("backward requires scalar root and reuses nodes once") {
  Rng rng(23);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Var vx(x, true);
  CHECK_THROWS_AS(backward(leaky_relu(vx, 0.1)), ShapeMismatchError);

  // A node consumed twice must receive both gradient contributions.
  Var shared = scale(vx, 2.0);
  Var loss = add(mean_all(shared), mean_all(shared));
  backward(loss);
  const double expect = 2.0 * 2.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(vx.grad()[i] == doctest::Approx(expect));
}

}  // TEST_SUITE
