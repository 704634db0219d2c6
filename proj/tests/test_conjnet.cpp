#include <doctest.h>

#include <cmath>
#include <random>

#include "graft/common.hpp"
#include "graft/conjnet.hpp"
#include "oracles.hpp"

using namespace graft;

TEST_CASE("conj_activation is logical AND at binary weights") {
  const int width = 5;
  for (std::uint64_t wm = 0; wm < (1u << width); ++wm) {
    const auto wb = oracle::bits_of(wm, width);
    std::vector<double> w(wb.begin(), wb.end());
    for (std::uint64_t xm = 0; xm < (1u << width); ++xm) {
      const auto x = oracle::bits_of(xm, width);
      bool expected = true;
      for (int i = 0; i < width; ++i)
        if (wb[i] && !x[i]) expected = false;
      CHECK(conj_activation(w, x) == (expected ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("conj_activation hand values") {
  const std::vector<std::uint8_t> x00 = {0, 0};
  CHECK(conj_activation(std::vector<double>{0.5, 0.0}, x00) == doctest::Approx(0.5));
  CHECK(conj_activation(std::vector<double>{0.25, 0.75}, x00) ==
        doctest::Approx(0.75 * 0.25));
  const std::vector<std::uint8_t> x10 = {1, 0};
  CHECK(conj_activation(std::vector<double>{0.9, 0.4}, x10) == doctest::Approx(0.6));
}

TEST_CASE("conj_plus_activation fixed points and clamping") {
  const std::vector<std::uint8_t> x0 = {0};
  const std::vector<std::uint8_t> x1 = {1};

  // Conj = 1 -> 1 exactly.
  CHECK(conj_plus_activation(std::vector<double>{0.7}, x1) == 1.0);
  CHECK(conj_plus_activation(std::vector<double>{0.0}, x0) == 1.0);
  // Conj = e^-1 -> exactly 1/2.
  const double w_half = 1.0 - std::exp(-1.0);
  CHECK(conj_plus_activation(std::vector<double>{w_half}, x0) == doctest::Approx(0.5));
  // Hard zero clamps at eps: 1 / (1 - log eps).
  const double clamped = 1.0 / (1.0 - std::log(1e-12));
  CHECK(conj_plus_activation(std::vector<double>{1.0}, x0) == doctest::Approx(clamped));
  CHECK(clamped == doctest::Approx(0.034928).epsilon(1e-3));
}

TEST_CASE("conj_plus_activation matches the closed form away from clamps") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> wv(0.05, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(6);
    for (auto& v : w) v = wv(rng);
    const auto x = oracle::bits_of(rng(), 6);
    const double c = conj_activation(w, x);
    const double expected = -1.0 / (-1.0 + std::log(c));
    CHECK(conj_plus_activation(w, x) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(conj_plus_activation(w, x) > 0.0);
    CHECK(conj_plus_activation(w, x) <= 1.0);
  }
}

TEST_CASE("conj_gradient matches central differences") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> wv(0.1, 0.9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(5);
    for (auto& v : w) v = wv(rng);
    const auto x = oracle::bits_of(rng(), 5);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double numeric = oracle::central_diff(
          w, k, 1e-6,
          [&](const std::vector<double>& wp) { return conj_activation(wp, x); });
      CHECK(conj_gradient(w, x, k) == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
}

TEST_CASE("discretize thresholds at one half") {
  const auto d = discretize(std::vector<double>{0.0, 0.49, 0.5, 0.51, 1.0});
  CHECK(d == std::vector<std::uint8_t>{0, 0, 1, 1, 1});
}

TEST_CASE("forward_discrete matches an independent Boolean evaluation") {
  const auto b = oracle::binary_binarizer(4);
  const auto m = oracle::random_model(b, 6, 17);
  const int width = b.width();
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = oracle::bits_of(rng(), width);
    const auto out = forward_discrete(m, x);

    double logit = m.agg_bias;
    for (int s = 0; s < kNumCategories; ++s) {
      const auto& sn = m.subnets[s];
      const auto [off, w] = m.spans[s];
      double g = sn.out_bias;
      for (int j = 0; j < sn.hidden; ++j) {
        bool act = true;
        const auto wj = sn.node(j);
        for (int i = 0; i < w; ++i)
          if (wj[i] >= 0.5 && !x[off + i]) act = false;
        CHECK(out.active[s][j] == (act ? 1 : 0));
        if (act) g += sn.out_weights[j];
      }
      const double p_s = sigmoid(g);
      CHECK(out.subnet_prob[s] == doctest::Approx(p_s).epsilon(1e-12));
      logit += m.agg_weights[s] * p_s;
    }
    CHECK(out.logit == doctest::Approx(logit).epsilon(1e-12));
    CHECK(out.prob == doctest::Approx(sigmoid(logit)).epsilon(1e-12));
  }
}

TEST_CASE("continuous and discrete passes agree when every conjunction holds") {
  const auto b = oracle::binary_binarizer(4);
  auto m = oracle::random_model(b, 4, 5);
  for (auto& sn : m.subnets)
    for (auto& w : sn.weights) w = w >= 0.5 ? 1.0 : 0.0;
  const std::vector<std::uint8_t> ones(b.width(), 1);
  const auto c = forward_continuous(m, ones);
  const auto d = forward_discrete(m, ones);
  CHECK(c.logit == doctest::Approx(d.logit).epsilon(1e-12));
  CHECK(c.prob == doctest::Approx(d.prob).epsilon(1e-12));
}

TEST_CASE("forward_continuous composes subnet heads from conj_plus") {
  const auto b = oracle::binary_binarizer(3);
  const auto m = oracle::random_model(b, 5, 7);
  std::mt19937_64 rng(3);
  const auto x = oracle::bits_of(rng(), b.width());
  const auto out = forward_continuous(m, x);
  double logit = m.agg_bias;
  for (int s = 0; s < kNumCategories; ++s) {
    const auto& sn = m.subnets[s];
    const auto [off, w] = m.spans[s];
    const std::span<const std::uint8_t> xs{x.data() + off, static_cast<std::size_t>(w)};
    double g = sn.out_bias;
    for (int j = 0; j < sn.hidden; ++j) {
      const double a = conj_plus_activation(sn.node(j), xs);
      CHECK(out.hidden[s][j] == doctest::Approx(a).epsilon(1e-12));
      g += sn.out_weights[j] * a;
    }
    logit += m.agg_weights[s] * sigmoid(g);
  }
  CHECK(out.logit == doctest::Approx(logit).epsilon(1e-12));
}

TEST_CASE("init_model is deterministic with weights in the lower half") {
  const auto b = oracle::binary_binarizer(4);
  const auto m1 = init_model(b, 8, 42);
  const auto m2 = init_model(b, 8, 42);
  const auto m3 = init_model(b, 8, 43);
  CHECK(m1.to_json() == m2.to_json());
  CHECK(m1.to_json() != m3.to_json());
  CHECK(m1.layout_hash == b.layout_hash());
  for (const auto& sn : m1.subnets) {
    CHECK(sn.hidden == 8);
    for (double w : sn.weights) {
      CHECK(w >= 0.0);
      CHECK(w < 0.5);
    }
  }
  // all-empty discrete rules: every node fires on every input
  const std::vector<std::uint8_t> zeros(b.width(), 0);
  const auto out = forward_discrete(m1, zeros);
  for (int s = 0; s < kNumCategories; ++s)
    for (auto a : out.active[s]) CHECK(a == 1);
}

TEST_CASE("model serialization round trip") {
  const auto b = oracle::binary_binarizer(4);
  const auto m = oracle::random_model(b, 6, 11);
  const auto back = GraftedModel::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  std::mt19937_64 rng(1);
  const auto x = oracle::bits_of(rng(), b.width());
  CHECK(forward_continuous(back, x).logit == forward_continuous(m, x).logit);
  CHECK(forward_discrete(back, x).logit == forward_discrete(m, x).logit);
  CHECK(back.total_width() == m.total_width());
}
