// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "gradient_cases.hpp"
#include "svbrdf/checkpoint.hpp"
#include "svbrdf/kernels.hpp"
#include "svbrdf/tensor.hpp"
#include "test_support.hpp"

using namespace svbrdf;
using ad::TensorD;
using ad::TensorF;

TEST_SUITE("tensor_autodiff") {
  TEST_CASE("every operator passes a finite-difference check") {
    Rng rng(100);
    for (const auto& c : testing::tensor_op_cases()) {
      double worst = 0.0;
      for (int t = 0; t < 10; ++t) worst = std::max(worst, c.run(rng));
      INFO(c.name << " worst relative error " << worst);
      CHECK(worst <= 1e-4);
    }
  }

  TEST_CASE("identity 1x1 convolution") {
    Rng rng(1);
    const TensorF x = TensorF::from({2, 3, 5, 5}, testing::random_values<float>(rng, 150));
    std::vector<float> w(9, 0.0f);
    for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0f;
    const TensorF y = ad::conv2d(x, TensorF::from({3, 3, 1, 1}, w), TensorF{}, 1);
    CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
  }

  TEST_CASE("convolution output sizes") {
    const TensorF x = TensorF::zeros({1, 1, 512, 512});
    const TensorF w = TensorF::zeros({1, 1, 3, 3});
    CHECK(ad::conv2d(x, w, TensorF{}, 2, ad::Padding::uniform(1)).shape() == ad::Shape{1, 1, 256, 256});
    const TensorF x2 = TensorF::zeros({1, 1, 256, 256});
    const TensorF up = ad::conv2d_transpose(x2, w, TensorF{}, 2, 1, 1);
    CHECK(up.shape() == ad::Shape{1, 1, 512, 512});
    for (float v : up.data()) CHECK(v == 0.0f);
    CHECK_THROWS_AS(ad::conv2d(x, TensorF::zeros({1, 2, 3, 3}), TensorF{}, 1), ShapeError);
  }

  TEST_CASE("transposed convolution is the adjoint of convolution") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      const int cin = 1 + rng.uniform_int(3), cout = 1 + rng.uniform_int(3), h = 4 + 2 * rng.uniform_int(3);
      const TensorD x = TensorD::from({2, cin, h, h}, testing::random_values<double>(rng, 2 * cin * h * h));
      const TensorD w = TensorD::from({cout, cin, 3, 3}, testing::random_values<double>(rng, cout * cin * 9));
      const TensorD y = ad::conv2d(x, w, TensorD{}, 2, ad::Padding::uniform(1));
      const TensorD z = TensorD::from(y.shape(), testing::random_values<double>(rng, y.numel()));
      const TensorD xt = ad::conv2d_transpose(z, w, TensorD{}, 2, 1, 1);
      REQUIRE(xt.shape() == x.shape());
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < y.numel(); ++i) lhs += y.data()[i] * z.data()[i];
      for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * xt.data()[i];
      CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
    }
  }

  TEST_CASE("instance norm statistics") {
    Rng rng(3);
    const TensorD x = TensorD::from({2, 3, 6, 6}, testing::random_values<double>(rng, 216, -4, 7));
    const TensorD y = ad::instance_norm(x, TensorD::full({3}, 1.0), TensorD::zeros({3}));
    for (int p = 0; p < 6; ++p) {
      double m = 0.0, v = 0.0;
      for (int i = 0; i < 36; ++i) m += y.data()[p * 36 + i];
      m /= 36;
      for (int i = 0; i < 36; ++i) v += (y.data()[p * 36 + i] - m) * (y.data()[p * 36 + i] - m);
      v /= 36;
      CHECK(std::abs(m) < 1e-4);
      CHECK(std::abs(v - 1.0) < 1e-4);
    }
    const TensorD c = ad::instance_norm(TensorD::full({1, 1, 4, 4}, 3.0), TensorD::full({1}, 2.0),
                                        TensorD::full({1}, 0.5));
    for (double v : c.data()) CHECK(v == doctest::Approx(0.5));
  }

  TEST_CASE("activations and pooling") {
    const TensorF x = TensorF::from({4}, {-1.0f, 0.0f, 2.0f, -3.0f});
    const TensorF l = ad::leaky_relu(x, 0.2f);
    CHECK(l.data()[0] == doctest::Approx(-0.2f));
    CHECK(l.data()[2] == 2.0f);
    const TensorF r = ad::relu(x);
    CHECK(r.data()[0] == 0.0f);
    CHECK(r.data()[1] == 0.0f);
    TensorF leaf = TensorF::from({4}, {-1.0f, 0.0f, 2.0f, -3.0f}, true);
    ad::backward(ad::sum(ad::relu(leaf)));
    CHECK(leaf.grad()[1] == 0.0f);
    CHECK(leaf.grad()[2] == 1.0f);
    const TensorF half = ad::resize_half(TensorF::full({1, 2, 4, 6}, 0.7f));
    CHECK(half.shape() == ad::Shape{1, 2, 2, 3});
    for (float v : half.data()) CHECK(v == doctest::Approx(0.7f));
    const TensorF a = ad::acos(TensorF::from({2}, {1.0f, -1.0f}));
    CHECK(std::isfinite(a.data()[0]));
    CHECK(a.data()[1] == doctest::Approx(kPi<float>).epsilon(1e-3));
  }

  TEST_CASE("backward basics") {
    Rng rng(4);
    TensorD x = TensorD::from({3, 4}, testing::random_values<double>(rng, 12), true);
    ad::backward(ad::sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    x.zero_grad();
    ad::backward(ad::sum(ad::square(x)));
    for (std::size_t i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
    // Fan-out: x used twice sums both contributions.
    x.zero_grad();
    ad::backward(ad::sum(ad::add(ad::mul(x, x), x)));
    for (std::size_t i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i] + 1.0));
    // A leaf with no path to the loss keeps a zero gradient.
    TensorD unused = TensorD::zeros({2}, true);
    ad::backward(ad::sum(x));
    for (double g : unused.grad()) CHECK(g == 0.0);
    CHECK_THROWS_AS(ad::backward(x), ShapeError);
  }

  TEST_CASE("shared subgraphs are visited once") {
    TensorD x = TensorD::from({1}, {3.0}, true);
    const TensorD y = ad::square(x);
    const TensorD z = ad::add(y, y);
    ad::backward(ad::sum(ad::add(z, y)));
    CHECK(x.grad()[0] == doctest::Approx(18.0));
  }

  TEST_CASE("cycles are detected") {
    TensorD x = TensorD::from({1}, {1.0}, true);
    TensorD y = ad::square(x);
    TensorD z = ad::add(y, x);
    y.node()->inputs.push_back(z.node());
    CHECK_THROWS_AS(ad::backward(ad::sum(z)), Error);
    y.node()->inputs.pop_back();
  }

  TEST_CASE("no-grad guard builds no graph") {
    TensorF x = TensorF::from({2}, {1.0f, 2.0f}, true);
    {
      ad::NoGradGuard guard;
      const TensorF y = ad::square(x);
      CHECK_FALSE(y.requires_grad());
    }
    CHECK(ad::square(x).requires_grad());
  }

  TEST_CASE("forward and backward are deterministic") {
    Rng rng(5);
    std::vector<std::vector<float>> grads;
    for (int run = 0; run < 2; ++run) {
      Rng r2(77);
      TensorF x = TensorF::from({2, 3, 8, 8}, testing::random_values<float>(r2, 384), true);
      TensorF w = TensorF::from({4, 3, 3, 3}, testing::random_values<float>(r2, 108), true);
      ad::backward(ad::mean(ad::square(ad::conv2d(x, w, TensorF{}, 1, ad::Padding::uniform(1), ad::PadMode::kReflect))));
      grads.emplace_back(w.grad().begin(), w.grad().end());
      grads.emplace_back(x.grad().begin(), x.grad().end());
    }
    CHECK(grads[0] == grads[2]);
    CHECK(grads[1] == grads[3]);
  }

  TEST_CASE("composed float block gradient") {
    Rng rng(6);
    for (int i = 0; i < 3; ++i) {
      const auto e = testing::generator_block_errors(rng);
      MESSAGE("block: 32-bit norm " << e.float_norm << ", 64-bit element " << e.double_element << ", skipped "
                                    << e.kink_crossings);
      CHECK(e.float_norm <= 1e-3);
      CHECK(e.double_element <= 1e-3);
      CHECK(e.compared > 0);
    }
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(7);
    NamedTensors tensors = {
        {"a.weight", TensorF::from({2, 3, 3, 3}, testing::random_values<float>(rng, 54))},
        {"b.bias", TensorF::from({5}, testing::random_values<float>(rng, 5))},
        {"scalar", TensorF::scalar(3.25f)},
    };
    const auto dir = testing::scratch_dir("ckpt");
    save_checkpoint(dir / "x.ckpt", tensors);
    const NamedTensors back = load_checkpoint(dir / "x.ckpt");
    REQUIRE(back.size() == tensors.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].first == tensors[i].first);
      CHECK(back[i].second.shape() == tensors[i].second.shape());
      CHECK(std::memcmp(back[i].second.data().data(), tensors[i].second.data().data(),
                        tensors[i].second.numel() * sizeof(float)) == 0);
    }
    NamedTensors target = {{"b.bias", TensorF::zeros({5})}, {"a.weight", TensorF::zeros({2, 3, 3, 3})}};
    load_checkpoint_into(dir / "x.ckpt", target);
    CHECK(std::equal(target[0].second.data().begin(), target[0].second.data().end(),
                     tensors[1].second.data().begin()));
    NamedTensors wrong = {{"b.bias", TensorF::zeros({4})}};
    CHECK_THROWS(load_checkpoint_into(dir / "x.ckpt", wrong));
    NamedTensors missing = {{"c", TensorF::zeros({1})}};
    CHECK_THROWS(load_checkpoint_into(dir / "x.ckpt", missing));
    CHECK_THROWS_AS(load_checkpoint(dir / "nothing.ckpt"), IoError);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("parallel convolution matches the serial reference") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
      kernels::ConvShape s;
      s.batch = 1 + rng.uniform_int(3);
      s.in_channels = 1 + rng.uniform_int(8);
      s.out_channels = 1 + rng.uniform_int(8);
      s.kernel = 1 + rng.uniform_int(7);
      s.stride = 1 + rng.uniform_int(2);
      s.in_height = s.kernel + rng.uniform_int(12);
      s.in_width = s.kernel + rng.uniform_int(12);
      const auto in = testing::random_values<double>(rng, s.input_size());
      const auto w = testing::random_values<double>(rng, s.weight_size());
      const auto go = testing::random_values<double>(rng, s.output_size());
      std::vector<double> a(s.output_size()), b(s.output_size());
      kernels::conv_forward<double>(s, in, w, a);
      kernels::reference::conv_forward<double>(s, in, w, b);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
      std::vector<double> gi(s.input_size(), 0.5), gi_ref(s.input_size(), 0.5);
      kernels::conv_backward_input<double>(s, go, w, gi);
      kernels::reference::conv_backward_input<double>(s, go, w, gi_ref);
      for (std::size_t i = 0; i < gi.size(); ++i) CHECK(gi[i] == doctest::Approx(gi_ref[i]).epsilon(1e-12));
      std::vector<double> gw(s.weight_size(), 0.25), gw_ref(s.weight_size(), 0.25);
      kernels::conv_backward_weight<double>(s, in, go, gw);
      kernels::reference::conv_backward_weight<double>(s, in, go, gw_ref);
      for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(gw_ref[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("parallel instance norm matches the serial reference") {
    Rng rng(9);
    kernels::NormShape s{2, 5, 37};
    const std::size_t n = 2 * 5 * 37;
    const auto x = testing::random_values<double>(rng, n, -3, 5);
    const auto gamma = testing::random_values<double>(rng, 5), beta = testing::random_values<double>(rng, 5);
    const auto go = testing::random_values<double>(rng, n);
    std::vector<double> y(n), xh(n), inv(10), y2(n), xh2(n), inv2(10);
    kernels::instance_norm_forward<double>(s, x, gamma, beta, 1e-5, y, xh, inv);
    kernels::reference::instance_norm_forward<double>(s, x, gamma, beta, 1e-5, y2, xh2, inv2);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    std::vector<double> gi(n), gg(5), gb(5), gi2(n), gg2(5), gb2(5);
    kernels::instance_norm_backward<double>(s, xh, inv, gamma, go, gi, gg, gb);
    kernels::reference::instance_norm_backward<double>(s, xh2, inv2, gamma, go, gi2, gg2, gb2);
    for (std::size_t i = 0; i < n; ++i) CHECK(gi[i] == doctest::Approx(gi2[i]).epsilon(1e-10));
    for (int c = 0; c < 5; ++c) {
      CHECK(gg[c] == doctest::Approx(gg2[c]).epsilon(1e-10));
      CHECK(gb[c] == doctest::Approx(gb2[c]).epsilon(1e-10));
    }
  }

  TEST_CASE("results do not depend on the thread count") {
    Rng rng(10);
    kernels::ConvShape s{2, 6, 20, 20, 7, 3, 1};
    const auto in = testing::random_values<float>(rng, s.input_size());
    const auto w = testing::random_values<float>(rng, s.weight_size());
    const auto go = testing::random_values<float>(rng, s.output_size());
    const int saved = kernels::max_threads();
    std::vector<std::vector<float>> outs;
    for (int threads : {1, 3, 8}) {
      kernels::set_max_threads(threads);
      std::vector<float> a(s.output_size()), gw(s.weight_size()), gi(s.input_size());
      kernels::conv_forward<float>(s, in, w, a);
      kernels::conv_backward_weight<float>(s, in, go, gw);
      kernels::conv_backward_input<float>(s, go, w, gi);
      a.insert(a.end(), gw.begin(), gw.end());
      a.insert(a.end(), gi.begin(), gi.end());
      outs.push_back(std::move(a));
    }
    kernels::set_max_threads(saved);
    CHECK(outs[0] == outs[1]);
    CHECK(outs[0] == outs[2]);
  }
}
