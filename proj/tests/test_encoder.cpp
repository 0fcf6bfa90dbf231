#include <doctest.h>

#include <cmath>

#include "encoder.hpp"
#include "helpers.hpp"

using namespace gp;

namespace {

// Attention evaluated one output position and one head at a time.
Tensor<double> naive_mhsa(const ParamSet<double>& p, const MultiHeadAttention& m, const Tensor<double>& u) {
  const std::size_t t = u.dim(0), d = u.dim(1), dh = d / m.heads;
  auto project = [&](const nn::Linear& l) {
    Tensor<double> y({t, d});
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        double s = l.has_bias ? p.value(l.bias)[c] : 0.0;
        for (std::size_t k = 0; k < d; ++k) s += u.at(r, k) * p.value(l.weight).at(k, c);
        y.at(r, c) = s;
      }
    return y;
  };
  const Tensor<double> q = project(m.query), k = project(m.key), v = project(m.value);
  Tensor<double> concat({t, d});
  for (std::size_t h = 0; h < m.heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> score(t);
      double mx = -1e300;
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += q.at(i, h * dh + c) * k.at(j, h * dh + c);
        score[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, score[j]);
      }
      double z = 0;
      for (auto& s : score) z += (s = std::exp(s - mx));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < t; ++j) acc += score[j] / z * v.at(j, h * dh + c);
        concat.at(i, h * dh + c) = acc;
      }
    }
  }
  Tensor<double> out({t, d});
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double s = p.value(m.output.bias)[c];
      for (std::size_t k2 = 0; k2 < d; ++k2) s += concat.at(r, k2) * p.value(m.output.weight).at(k2, c);
      out.at(r, c) = s;
    }
  return out;
}

void randomize(ParamSet<double>& p, Rng& rng, double scale = 0.5) {
  for (auto& b : p) {
    for (auto& v : b.value.values()) v = scale * rng.normal();
  }
}

}  // namespace

TEST_CASE("mhsa: equal value rows give the projected value everywhere") {
  Rng rng(1);
  ParamSet<double> p;
  const auto m = MultiHeadAttention::create(p, "a", 4, 2);
  randomize(p, rng);
  p.value(m.value.weight).zero();
  const Tensor<double> vrow = testing::random_tensor<double>({4}, rng);
  p.value(m.value.bias) = vrow;
  const Tensor<double> u = testing::random_tensor<double>({5, 4}, rng);
  MultiHeadAttention::Cache<double> cache;
  const Tensor<double> y = m.forward(p, u, &cache);
  for (std::size_t c = 0; c < 4; ++c) {
    double expect = p.value(m.output.bias)[c];
    for (std::size_t k = 0; k < 4; ++k) expect += vrow[k] * p.value(m.output.weight).at(k, c);
    for (std::size_t r = 0; r < 5; ++r) CHECK(y.at(r, c) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("mhsa: single position attends to itself with weight one") {
  Rng rng(2);
  ParamSet<double> p;
  const auto m = MultiHeadAttention::create(p, "a", 4, 2);
  randomize(p, rng);
  MultiHeadAttention::Cache<double> cache;
  m.forward(p, testing::random_tensor<double>({1, 4}, rng), &cache);
  for (double w : cache.weights.values()) CHECK(w == 1.0);
}

TEST_CASE("mhsa: agrees with the per-position reference; rows sum to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParamSet<double> p;
    const auto m = MultiHeadAttention::create(p, "a", 4, 2);
    randomize(p, rng);
    const Tensor<double> u = testing::random_tensor<double>({3, 4}, rng);
    MultiHeadAttention::Cache<double> cache;
    const Tensor<double> y = m.forward(p, u, &cache);
    const Tensor<double> ref = naive_mhsa(p, m, u);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) <= 1e-6);
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) s += cache.weights[(h * 3 + r) * 3 + c];
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
  }
  ParamSet<double> q;
  CHECK_THROWS_AS(MultiHeadAttention::create(q, "bad", 6, 4), ConfigError);
}

TEST_CASE("encoder: zeroed sublayers leave input plus positions") {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 12;
  cfg.layers = 2;
  cfg.layer_norm = false;
  ParamSet<double> p;
  const Encoder enc = Encoder::create(p, cfg);
  for (auto& b : p) b.value.zero();
  Rng rng(3);
  const Tensor<double> e = testing::random_tensor<double>({5, 8}, rng);
  Encoder::Cache<double> cache;
  const Tensor<double> u = enc.forward(p, e, nullptr, &cache);
  const Tensor<double> pos = sinusoidal_table<double>(5, 8);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == doctest::Approx(e[i] + pos[i]).epsilon(1e-14));
}

TEST_CASE("encoder: position sensitivity, length limit and variable lengths") {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 12;
  cfg.layers = 2;
  cfg.max_len = 40;
  ParamSet<double> p;
  const Encoder enc = Encoder::create(p, cfg);
  Rng rng(4);
  enc.init(p, rng);
  const Tensor<double> e = testing::random_tensor<double>({4, 8}, rng);
  Tensor<double> swapped = e;
  for (std::size_t c = 0; c < 8; ++c) std::swap(swapped.at(0, c), swapped.at(3, c));
  Encoder::Cache<double> cache;
  const Tensor<double> a = enc.forward(p, e, nullptr, &cache);
  const Tensor<double> b = enc.forward(p, swapped, nullptr, &cache);
  double diff = 0;
  for (std::size_t c = 0; c < 8; ++c) diff += std::abs(a.at(0, c) - b.at(3, c));
  CHECK(diff > 1e-6);

  for (std::size_t t : {std::size_t{1}, std::size_t{17}, std::size_t{40}}) {
    CHECK(enc.forward(p, testing::random_tensor<double>({t, 8}, rng), nullptr, &cache).shape() == Shape{t, 8});
  }
  CHECK_THROWS_AS(enc.forward(p, Tensor<double>({41, 8}), nullptr, &cache), LengthError);
  CHECK_THROWS_AS(enc.forward(p, Tensor<double>({3, 6}), nullptr, &cache), ShapeError);

  // A prefix sees less context than the full sequence.
  const Tensor<double> full = enc.forward(p, e, nullptr, &cache);
  Tensor<double> prefix({2, 8});
  std::copy(e.data(), e.data() + 16, prefix.data());
  const Tensor<double> head = enc.forward(p, prefix, nullptr, &cache);
  double ctx = 0;
  for (std::size_t i = 0; i < 16; ++i) ctx += std::abs(full[i] - head[i]);
  CHECK(ctx > 1e-9);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  cfg.d_model = 10;
  cfg.heads = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EncoderConfig{};
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EncoderConfig{};
  cfg.max_len = 39;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_positional(to_string(PositionalMode::learned)) == PositionalMode::learned);
  CHECK_THROWS_AS(parse_positional("rotary"), ConfigError);
}

TEST_CASE("sinusoidal table values") {
  const auto t = sinusoidal_table<double>(3, 4);
  CHECK(t.at(0, 0) == 0.0);
  CHECK(t.at(0, 1) == 1.0);
  CHECK(t.at(1, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(t.at(2, 3) == doctest::Approx(std::cos(2.0 / 100.0)));
}

TEST_CASE("head: position-wise, bias-only and local") {
  Rng rng(5);
  ParamSet<double> p;
  const Head head = Head::create(p, 4, 6, 3);
  randomize(p, rng);
  Tensor<double> u = testing::random_tensor<double>({4, 4}, rng);
  for (std::size_t c = 0; c < 4; ++c) u.at(1, c) = u.at(0, c);
  Head::Cache<double> cache;
  const Tensor<double> y = head.forward(p, u, &cache);
  REQUIRE(y.shape() == Shape{4, 3});
  for (std::size_t c = 0; c < 3; ++c) CHECK(y.at(0, c) == y.at(1, c));

  Tensor<double> moved = u;
  moved.at(2, 1) += 0.75;
  const Tensor<double> z = head.forward(p, moved, &cache);
  for (std::size_t r : {std::size_t{0}, std::size_t{1}, std::size_t{3}}) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(z.at(r, c) == y.at(r, c));
  }

  p.value(head.hidden.weight).zero();
  p.value(head.output.weight).zero();
  const Tensor<double> b = p.value(head.output.bias);
  const Tensor<double> w = head.forward(p, u, &cache);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(w.at(r, c) == b[c]);
}

TEST_CASE("ablated encoder is the identity") {
  Rng rng(6);
  const Tensor<double> e = testing::random_tensor<double>({7, 5}, rng);
  CHECK(ablate_encoder(e) == e);
}

TEST_CASE("dropout mask keeps the expected scale") {
  Rng rng(7);
  const auto m = dropout_mask<double>({1000}, 0.25, rng);
  double mean = 0;
  for (double v : m.values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    mean += v;
  }
  CHECK(mean / 1000 == doctest::Approx(1.0).epsilon(0.1));
  const auto keep_all = dropout_mask<double>({10}, 0.0, rng);
  for (double v : keep_all.values()) CHECK(v == 1.0);
}
