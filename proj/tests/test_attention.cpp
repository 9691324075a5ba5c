#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mataformer/attention.hpp"
#include "mataformer/errors.hpp"
#include "mataformer/gradcheck.hpp"
#include "mataformer/rng.hpp"

using namespace mata;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Straight-line re-implementation of the biased attention layer with plain
// loops and no tape; the reference the tensor-graph version is checked against.
std::vector<double> attention_oracle(const MataAttentionLayer& layer,
                                     const std::vector<double>& x, size_t s,
                                     const std::vector<int64_t>& t, bool use_bias) {
  size_t d = layer.d_model, nh = layer.n_heads, dh = layer.head_dim();

  auto project = [&](const Tensor& w) {
    std::vector<double> out(s * d, 0.0);
    const auto& wd = w.data();
    for (size_t i = 0; i < s; ++i)
      for (size_t j = 0; j < d; ++j) {
        double acc = 0;
        for (size_t p = 0; p < d; ++p) acc += x[i * d + p] * wd[p * d + j];
        out[i * d + j] = acc;
      }
    return out;
  };
  auto q = project(layer.wq), k = project(layer.wk), v = project(layer.wv);

  std::vector<double> concat(s * d, 0.0);
  for (size_t h = 0; h < nh; ++h) {
    for (size_t i = 0; i < s; ++i) {
      // residuals for query i of head h
      double delta_alpha = 0, delta_mu = 0;
      if (use_bias) {
        std::vector<double> hidden(MataAttentionLayer::kResidualHidden, 0.0);
        for (size_t n = 0; n < hidden.size(); ++n) {
          double acc = layer.fphi_b1.data()[n];
          for (size_t p = 0; p < dh; ++p)
            acc += q[i * d + h * dh + p] * layer.fphi_w1.data()[p * hidden.size() + n];
          hidden[n] = std::tanh(acc);
        }
        delta_alpha = layer.fphi_b2.data()[0];
        delta_mu = layer.fphi_b2.data()[1];
        for (size_t n = 0; n < hidden.size(); ++n) {
          delta_alpha += hidden[n] * layer.fphi_w2.data()[n * 2 + 0];
          delta_mu += hidden[n] * layer.fphi_w2.data()[n * 2 + 1];
        }
        if (!layer.dynamic_alpha) delta_alpha = 0;
        if (!layer.dynamic_mu) delta_mu = 0;
      }
      double alpha = project_alpha(layer.alpha_bar.data()[h], delta_alpha, layer.proj.alpha_floor,
                                   layer.proj.alpha_ceiling);
      double logit = layer.mu_logit.data()[h] + layer.proj.lambda * delta_mu;
      double mu = (1.0 / (1.0 + std::exp(-logit))) * layer.proj.gamma_mu;

      std::vector<double> score(s);
      for (size_t j = 0; j < s; ++j) {
        double acc = 0;
        for (size_t p = 0; p < dh; ++p) acc += q[i * d + h * dh + p] * k[j * d + h * dh + p];
        acc /= std::sqrt(static_cast<double>(dh));
        if (use_bias) {
          double dist = std::log(std::fabs(double(t[i] - t[j])) / layer.proj.tau + 1.0);
          acc += -alpha * std::fabs(dist - mu);
        }
        if (t[j] > t[i]) acc = -kInf;
        score[j] = acc;
      }
      double mx = -kInf;
      for (double sc : score) mx = std::max(mx, sc);
      double z = 0;
      for (auto& sc : score) {
        sc = std::exp(sc - mx);
        z += sc;
      }
      for (auto& sc : score) sc /= z;
      for (size_t p = 0; p < dh; ++p) {
        double acc = 0;
        for (size_t j = 0; j < s; ++j) acc += score[j] * v[j * d + h * dh + p];
        concat[i * d + h * dh + p] = acc;
      }
    }
  }
  std::vector<double> out(s * d, 0.0);
  for (size_t i = 0; i < s; ++i)
    for (size_t j = 0; j < d; ++j) {
      double acc = 0;
      for (size_t p = 0; p < d; ++p) acc += concat[i * d + p] * layer.wo.data()[p * d + j];
      out[i * d + j] = acc;
    }
  return out;
}

Tensor random_input(size_t s, size_t d, Rng& rng) {
  std::vector<double> x(s * d);
  for (auto& v : x) v = rng.uniform(-1, 1);
  return Tensor::from_data({s, d}, std::move(x));
}

}  // namespace

TEST_CASE("log distance matrix hand values") {
  auto d = log_distance_matrix({0, 60, 3600}, 60.0);
  CHECK(d.at({0, 0}) == 0.0);
  CHECK(d.at({1, 1}) == 0.0);
  CHECK(d.at({0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(d.at({0, 1}) == doctest::Approx(0.69315).epsilon(1e-4));
  CHECK(d.at({2, 0}) == doctest::Approx(std::log(61.0)).epsilon(1e-15));
  CHECK(d.at({2, 0}) == doctest::Approx(4.11087).epsilon(1e-4));
  // symmetry + nonnegativity
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j) {
      CHECK(d.at({i, j}) == d.at({j, i}));
      CHECK(d.at({i, j}) >= 0.0);
    }
}

TEST_CASE("causal mask cases") {
  auto m = causal_mask({1, 2, 3});
  CHECK(m.at({0, 0}) == 0.0);
  CHECK(m.at({1, 0}) == 0.0);
  CHECK(m.at({0, 1}) == -kInf);
  CHECK(m.at({0, 2}) == -kInf);
  CHECK(m.at({1, 2}) == -kInf);
  CHECK(m.at({2, 1}) == 0.0);

  // simultaneous events are mutually visible
  auto tie = causal_mask({5, 5});
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j) CHECK(tie.at({i, j}) == 0.0);
}

TEST_CASE("prior initialization") {
  Rng rng(1);
  auto p2 = init_priors(2, 10.0, 1.0, rng);
  CHECK(p2.mu_prob[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(p2.mu_prob[1] == doctest::Approx(0.95).epsilon(1e-15));

  auto p4 = init_priors(4, 10.0, 1.0, rng);
  CHECK(p4.mu_prob[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(p4.mu_prob[1] == doctest::Approx(0.95 / 3.0).epsilon(1e-12));
  CHECK(p4.mu_prob[2] == doctest::Approx(1.9 / 3.0).epsilon(1e-12));
  CHECK(p4.mu_prob[3] == doctest::Approx(0.95).epsilon(1e-12));

  for (int rep = 0; rep < 20; ++rep) {
    auto p = init_priors(8, 10.0, 1.0, rng);
    for (double a : p.alpha_bar) {
      CHECK(a >= 0.95);
      CHECK(a <= 1.05);
    }
  }
  CHECK_THROWS(init_priors(1, 10.0, 1.0, rng));
}

TEST_CASE("residual perceptron") {
  Rng rng(2);
  auto layer = MataAttentionLayer::init(32, 4, BiasProjection{}, 1.0, rng);

  SUBCASE("zero final layer gives exactly zero residuals") {
    for (double v : layer.fphi_w2.data()) CHECK(v == 0.0);
    for (double v : layer.fphi_b2.data()) CHECK(v == 0.0);
    auto q = random_input(5, 8, rng);
    auto r = predict_residuals(q, layer.fphi_w1, layer.fphi_b1, layer.fphi_w2, layer.fphi_b2);
    for (double v : r.data()) CHECK(v == 0.0);
  }

  SUBCASE("dimension mismatch rejected") {
    auto q = random_input(5, 7, rng);
    CHECK_THROWS(predict_residuals(q, layer.fphi_w1, layer.fphi_b1, layer.fphi_w2,
                                   layer.fphi_b2));
  }

  SUBCASE("q = 0 forward and norm bound") {
    // give the final layer nonzero weights
    auto& w2 = layer.fphi_w2.data_mut();
    Rng r2(9);
    for (auto& v : w2) v = r2.uniform(-0.5, 0.5);
    auto q0 = Tensor::zeros({1, 8});
    auto r = predict_residuals(q0, layer.fphi_w1, layer.fphi_b1, layer.fphi_w2, layer.fphi_b2);
    // with zero query and zero b1/b2 the hidden tanh(b1) is zero
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 0.0);

    auto& b1 = layer.fphi_b1.data_mut();
    for (auto& v : b1) v = r2.uniform(-1, 1);
    r = predict_residuals(q0, layer.fphi_w1, layer.fphi_b1, layer.fphi_w2, layer.fphi_b2);
    double expect0 = 0, expect1 = 0;
    for (size_t n = 0; n < b1.size(); ++n) {
      expect0 += std::tanh(b1[n]) * w2[n * 2 + 0];
      expect1 += std::tanh(b1[n]) * w2[n * 2 + 1];
    }
    CHECK(r.data()[0] == doctest::Approx(expect0).epsilon(1e-12));
    CHECK(r.data()[1] == doctest::Approx(expect1).epsilon(1e-12));

    // |tanh| <= 1 bounds each output by the column L1 norm (b2 is zero)
    double bound0 = 0, bound1 = 0;
    for (size_t n = 0; n < b1.size(); ++n) {
      bound0 += std::fabs(w2[n * 2 + 0]);
      bound1 += std::fabs(w2[n * 2 + 1]);
    }
    for (int trial = 0; trial < 50; ++trial) {
      auto q = random_input(1, 8, r2);
      auto rr = predict_residuals(q, layer.fphi_w1, layer.fphi_b1, layer.fphi_w2, layer.fphi_b2);
      CHECK(std::fabs(rr.data()[0]) <= bound0 + 1e-12);
      CHECK(std::fabs(rr.data()[1]) <= bound1 + 1e-12);
    }
  }
}

TEST_CASE("projection hand values") {
  CHECK(project_alpha(1.0, 0.0) == 1.0);
  CHECK(project_alpha(1.0, std::log(3.0)) == 2.5);
  CHECK(project_alpha(1.0, -20.0) == 1e-4);

  CHECK(project_mu(5.0, 0.0, 4.0, 10.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(project_mu(5.0, 0.25, 4.0, 10.0) ==
        doctest::Approx(10.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(project_mu(5.0, 0.25, 4.0, 10.0) == doctest::Approx(7.31059).epsilon(1e-5));
  CHECK(project_mu(5.0, 1e6, 4.0, 10.0) < 10.0);  // asymptote never attained
  CHECK(project_mu(5.0, 1e6, 4.0, 10.0) > 9.999999);
  CHECK_THROWS(project_mu(10.0, 0.0, 4.0, 10.0));
  CHECK_THROWS(project_mu(-1.0, 0.0, 4.0, 10.0));
}

TEST_CASE("projection ranges hold over 1e6 random samples") {
  Rng rng(23);
  for (int i = 0; i < 1000000; ++i) {
    double ab = rng.uniform(1e-3, 3.0);
    double da = rng.uniform(-30, 30);
    double a = project_alpha(ab, da);
    if (!(a >= 1e-4 && a <= 2.5)) {
      REQUIRE(false);
    }
    double mb = rng.uniform(0.05, 9.95);
    double dm = rng.uniform(-50, 50);
    double m = project_mu(mb, dm, 4.0, 10.0);
    if (!(m > 0.0 && m < 10.0)) {
      REQUIRE(false);
    }
  }
  CHECK(true);
}

TEST_CASE("laplace bias values through the scalar route") {
  // B = -alpha |D - mu|
  CHECK(-2.0 * std::fabs(1.0 - 1.0) == 0.0);
  double b1 = -(2.0 * std::fabs(0.0 - 1.0));
  CHECK(b1 == doctest::Approx(-2.0));
  double b2 = -(2.0 * std::fabs(3.5 - 1.0));
  CHECK(b2 == doctest::Approx(-5.0));  // the operational suppression cutoff
}

TEST_CASE("attention forward: length-1 sequence attends to itself") {
  Rng rng(4);
  auto layer = MataAttentionLayer::init(16, 4, BiasProjection{}, 1.0, rng);
  auto x = random_input(1, 16, rng);
  AttnCapture cap;
  auto y = layer.forward(x, {42}, TimeMode::kMata, &cap);
  CHECK(y.dim(0) == 1);
  CHECK(y.dim(1) == 16);
  // single-row attention must be [[1.0]]; check via the value path: output
  // equals Wo applied to v directly
  auto v = matmul(x, layer.wv);
  auto expect = matmul(v, layer.wo);
  for (size_t i = 0; i < y.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("warm start: dynamic bias equals static prior bias bit-exactly") {
  Rng rng(6);
  auto layer = MataAttentionLayer::init(32, 4, BiasProjection{}, 1.0, rng);
  std::vector<int64_t> t = {0, 30, 30, 4000, 90000};
  auto x = random_input(5, 32, rng);
  AttnCapture cap;
  layer.forward(x, t, TimeMode::kMata, &cap);
  auto d = log_distance_matrix(t, layer.proj.tau);
  for (size_t h = 0; h < 4; ++h) {
    double sa = layer.static_alpha(h);
    double sm = layer.static_mu(h);
    for (size_t i = 0; i < 5; ++i) {
      CHECK(cap.heads[h].alpha[i] == sa);  // bitwise
      CHECK(cap.heads[h].mu[i] == sm);
      for (size_t j = 0; j < 5; ++j) {
        double expect = -(sa * std::fabs(d.at({i, j}) - sm));
        CHECK(cap.heads[h].bias[i * 5 + j] == expect);  // bitwise
      }
    }
  }
}

TEST_CASE("attention forward matches the straight-line loop oracle") {
  Rng rng(8);
  BiasProjection proj;
  auto layer = MataAttentionLayer::init(24, 3, proj, 1.0, rng);
  // perturb all residual parameters so the dynamic path is exercised
  for (auto* t : {&layer.fphi_w2, &layer.fphi_b2, &layer.fphi_b1}) {
    for (auto& v : t->data_mut()) v = rng.uniform(-0.4, 0.4);
  }
  std::vector<int64_t> t3 = {0, 500, 500};
  auto x = random_input(3, 24, rng);
  auto y = layer.forward(x, t3, TimeMode::kMata);
  auto expect = attention_oracle(layer, x.data(), 3, t3, true);
  REQUIRE(y.size() == expect.size());
  for (size_t i = 0; i < y.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-10));

  // longer irregular sequence, both time modes
  std::vector<int64_t> t7 = {0, 10, 10, 700, 40000, 40000, 250000};
  auto x7 = random_input(7, 24, rng);
  auto y7 = layer.forward(x7, t7, TimeMode::kMata);
  auto e7 = attention_oracle(layer, x7.data(), 7, t7, true);
  for (size_t i = 0; i < y7.size(); ++i)
    CHECK(y7.data()[i] == doctest::Approx(e7[i]).epsilon(1e-10));

  auto yn = layer.forward(x7, t7, TimeMode::kNone);
  auto en = attention_oracle(layer, x7.data(), 7, t7, false);
  for (size_t i = 0; i < yn.size(); ++i)
    CHECK(yn.data()[i] == doctest::Approx(en[i]).epsilon(1e-10));
}

TEST_CASE("attention rows sum to one and causality holds under ties") {
  Rng rng(10);
  auto layer = MataAttentionLayer::init(16, 2, BiasProjection{}, 1.0, rng);
  for (int trial = 0; trial < 20; ++trial) {
    size_t s = 2 + rng.next_below(8);
    std::vector<int64_t> t;
    int64_t now = 0;
    for (size_t i = 0; i < s; ++i) {
      now += static_cast<int64_t>(rng.next_below(3) == 0 ? 0 : rng.next_below(100000));
      t.push_back(now);
    }
    auto x = random_input(s, 16, rng);

    // recompute the attention matrix for head 0 the slow way
    auto q = matmul(x, layer.wq);
    auto k = matmul(x, layer.wk);
    auto qh = slice_cols(q, 0, 8);
    auto kh = slice_cols(k, 0, 8);
    auto scores = mul(matmul(qh, transpose(kh)), 1.0 / std::sqrt(8.0));
    auto attn = softmax_lastdim(add(scores, causal_mask(t)));
    for (size_t i = 0; i < s; ++i) {
      double row = 0;
      for (size_t j = 0; j < s; ++j) {
        double a = attn.at({i, j});
        row += a;
        if (t[j] > t[i]) CHECK(a == 0.0);
      }
      CHECK(std::fabs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("bias peak sits where |D - mu| is minimal") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int64_t> t;
    int64_t now = 0;
    size_t s = 4 + rng.next_below(6);
    for (size_t i = 0; i < s; ++i) {
      now += static_cast<int64_t>(1 + rng.next_below(200000));
      t.push_back(now);
    }
    auto d = log_distance_matrix(t, 60.0);
    double alpha = rng.uniform(0.2, 2.5), mu = rng.uniform(0.1, 9.9);
    size_t i = rng.next_below(s);
    size_t argmax_bias = 0, argmin_dist = 0;
    double best_bias = -kInf, best_dist = kInf;
    for (size_t j = 0; j < s; ++j) {
      double bias = -alpha * std::fabs(d.at({i, j}) - mu);
      if (bias > best_bias) {
        best_bias = bias;
        argmax_bias = j;
      }
      double dist = std::fabs(d.at({i, j}) - mu);
      if (dist < best_dist) {
        best_dist = dist;
        argmin_dist = j;
      }
    }
    CHECK(argmax_bias == argmin_dist);
  }
}

TEST_CASE("attention gradients match finite differences") {
  Rng rng(14);
  BiasProjection proj;
  auto layer = MataAttentionLayer::init(8, 2, proj, 1.0, rng);
  // small nonzero residual weights, keeping projections far from the clamps
  for (auto* t : {&layer.fphi_w2, &layer.fphi_b2}) {
    for (auto& v : t->data_mut()) v = rng.uniform(-0.05, 0.05);
  }
  std::vector<int64_t> t = {0, 100, 5000, 5000, 240000};
  auto x = random_input(5, 8, rng);

  auto f = [&]() {
    return sum(square(layer.forward(x, t, TimeMode::kMata)));
  };
  for (auto& [name, param] : std::vector<std::pair<const char*, Tensor>>{
           {"wq", layer.wq},
           {"wk", layer.wk},
           {"wv", layer.wv},
           {"wo", layer.wo},
           {"alpha_bar", layer.alpha_bar},
           {"mu_logit", layer.mu_logit},
           {"fphi_w1", layer.fphi_w1},
           {"fphi_b1", layer.fphi_b1},
           {"fphi_w2", layer.fphi_w2},
           {"fphi_b2", layer.fphi_b2}}) {
    auto rep = grad_check(f, param, 1e-5, 1e-4);
    INFO(name << ": " << rep.message);
    CHECK(rep.pass);
  }
}

TEST_CASE("NaN scores are reported with head and query") {
  Rng rng(16);
  auto layer = MataAttentionLayer::init(8, 2, BiasProjection{}, 1.0, rng);
  layer.wq.data_mut()[3] = std::numeric_limits<double>::quiet_NaN();
  auto x = random_input(3, 8, rng);
  try {
    layer.forward(x, {0, 1, 2}, TimeMode::kMata);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("head") != std::string::npos);
    CHECK(std::string(e.what()).find("query") != std::string::npos);
  }
}

TEST_CASE("sinusoidal time encoding") {
  auto phi0 = sinusoidal_time_encoding(0.0, 8, 1209600.0);
  for (size_t j = 0; j < 4; ++j) {
    CHECK(phi0[2 * j] == 0.0);
    CHECK(phi0[2 * j + 1] == 1.0);
  }

  Rng rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    double t = rng.uniform(0, 2e6);
    for (size_t d : {64ul, 256ul}) {
      auto phi = sinusoidal_time_encoding(t, d, 1209600.0);
      double n2 = 0;
      for (double v : phi) n2 += v * v;
      CHECK(n2 == doctest::Approx(static_cast<double>(d) / 2.0).epsilon(1e-12));
    }
  }

  auto big = sinusoidal_time_encoding(12345.0, 4096, 1209600.0);
  double n2 = 0;
  for (double v : big) n2 += v * v;
  CHECK(std::sqrt(n2) == doctest::Approx(45.2548).epsilon(1e-5));

  CHECK_THROWS(sinusoidal_time_encoding(1.0, 7, 1209600.0));
}
