#include <doctest.h>

#include <cmath>

#include "crf.hpp"
#include "helpers.hpp"

using namespace gp;

namespace {

CrfParams<double> zero_params(std::size_t labels) { return CrfParams<double>(labels); }

CrfParams<double> random_params(std::size_t labels, Rng& rng) {
  return CrfParams<double>(testing::random_tensor<double>({labels, labels}, rng),
                           testing::random_tensor<double>({labels}, rng), testing::random_tensor<double>({labels}, rng));
}

// Emissions drawn from a small integer grid so exact score ties occur.
Tensor<double> tie_prone(std::size_t t, std::size_t labels, Rng& rng) {
  Tensor<double> em({t, labels});
  for (auto& v : em.values()) v = static_cast<double>(rng.below(3));
  return em;
}

}  // namespace

TEST_CASE("log_partition: closed forms") {
  Tensor<double> row({1, 3}, std::vector<double>{0.5, -1.0, 2.0});
  CHECK(log_partition(row, zero_params(3)) == doctest::Approx(nn::logsumexp<double>(row.values())).epsilon(1e-14));
  CHECK(log_partition(Tensor<double>({3, 4}), zero_params(4)) == doctest::Approx(3 * std::log(4.0)).epsilon(1e-14));
  const Tensor<double> em({2, 2}, std::vector<double>{0, 1, 1, 0});
  CHECK(log_partition(em, zero_params(2)) == doctest::Approx(2 * std::log(1 + std::exp(1.0))).epsilon(1e-14));
  CHECK(log_partition(em, zero_params(2)) == doctest::Approx(2.6265).epsilon(1e-4));
}

TEST_CASE("crf_nll: closed forms and errors") {
  const Tensor<double> em({2, 2}, std::vector<double>{0, 1, 1, 0});
  CHECK(crf_nll(em, {1, 0}, zero_params(2)) == doctest::Approx(2 * std::log(1 + std::exp(1.0)) - 2).epsilon(1e-14));
  CHECK(crf_nll(em, {1, 0}, zero_params(2)) == doctest::Approx(0.6265).epsilon(1e-4));
  Rng rng(1);
  CHECK(crf_nll(testing::random_tensor<double>({5, 1}, rng), {0, 0, 0, 0, 0}, random_params(1, rng)) ==
        doctest::Approx(0.0).scale(1));
  CHECK_THROWS_AS(crf_nll(em, {2, 0}, zero_params(2)), RangeError);
  CHECK_THROWS_AS(crf_nll(em, {1}, zero_params(2)), ShapeError);
  Tensor<double> bad = em;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(crf_nll(bad, {1, 0}, zero_params(2)), DomainError);
  CHECK_THROWS_AS(viterbi(bad, zero_params(2)), DomainError);
  CHECK_THROWS_AS(log_partition(Tensor<double>({2, 3}), zero_params(2)), ShapeError);
}

TEST_CASE("viterbi: decoupled chains and the two-step example") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor<double> em = testing::random_tensor<double>({6, 4}, rng);
    CHECK(viterbi(em, zero_params(4)).labels == argmax_labels(em));
  }
  const Tensor<double> em({2, 2}, std::vector<double>{0, 1, 1, 0});
  const auto path = viterbi(em, zero_params(2));
  CHECK(path.labels == std::vector<std::uint8_t>{1, 0});
  CHECK(path.score == doctest::Approx(2.0));
}

TEST_CASE("viterbi and log_partition agree with exhaustive enumeration") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(6);
    const std::size_t L = trial % 2 ? 4 : 2;
    const auto p = random_params(L, rng);
    const Tensor<double> em = trial % 3 == 0 ? tie_prone(t, L, rng) : testing::random_tensor<double>({t, L}, rng);
    const auto bf = brute_force_reference(em, p);
    CHECK(std::abs(log_partition(em, p) - bf.log_partition) <= 1e-8);
    const auto v = viterbi(em, p);
    CHECK(v.labels == bf.best.labels);
    CHECK(v.score == bf.best.score);
    CHECK(v.score == doctest::Approx(path_score(em, v.labels, p)).epsilon(1e-12));
  }
}

TEST_CASE("viterbi ties resolve to the lowest label code") {
  const auto path = viterbi(Tensor<double>({3, 4}), zero_params(4));
  CHECK(path.labels == std::vector<std::uint8_t>{0, 0, 0});
  const Tensor<double> em({1, 3}, std::vector<double>{1, 2, 2});
  CHECK(viterbi(em, zero_params(3)).labels == std::vector<std::uint8_t>{1});
}

TEST_CASE("brute force: single position and size limit") {
  Rng rng(4);
  const Tensor<double> row = testing::random_tensor<double>({1, 4}, rng);
  const auto bf = brute_force_reference(row, zero_params(4));
  CHECK(bf.log_partition == doctest::Approx(nn::logsumexp<double>(row.values())).epsilon(1e-14));
  CHECK(bf.best.labels == argmax_labels(row));
  CHECK_THROWS_AS(brute_force_reference(Tensor<double>({11, 4}), zero_params(4)), SizeError);
}

TEST_CASE("NLL is non-negative and matches enumeration on random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 1 + rng.below(4);
    const std::size_t L = trial % 2 ? 4 : 2;
    const auto p = random_params(L, rng);
    const Tensor<double> em = testing::random_tensor<double>({t, L}, rng, 2.0);
    std::vector<std::uint8_t> gold(t);
    for (auto& g : gold) g = static_cast<std::uint8_t>(rng.below(L));
    const double nll = crf_nll(em, gold, p);
    CHECK(nll >= 0.0);
    const auto bf = brute_force_reference(em, p);
    CHECK(nll == doctest::Approx(bf.log_partition - path_score(em, gold, p)).epsilon(1e-9).scale(1));
  }
}

TEST_CASE("crf_nll gradients match central differences") {
  Rng rng(6);
  const std::size_t t = 4, L = 3;
  auto p = random_params(L, rng);
  Tensor<double> em = testing::random_tensor<double>({t, L}, rng);
  const std::vector<std::uint8_t> gold{0, 2, 2, 1};
  CrfGrads<double> g;
  crf_nll(em, gold, p, &g);
  const double h = 1e-6;
  auto check_block = [&](Tensor<double>& x, const Tensor<double>& analytic) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = crf_nll(em, gold, p);
      x[i] = keep - h;
      const double down = crf_nll(em, gold, p);
      x[i] = keep;
      CHECK(analytic[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6).scale(1));
    }
  };
  check_block(em, g.emissions);
  check_block(p.transitions, g.transitions);
  check_block(p.start, g.start);
  check_block(p.end, g.end);
}

TEST_CASE("classification loss") {
  CHECK(classification_nll(Tensor<double>({5, 4}), {0, 1, 2, 3, 0}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t t = 1 + rng.below(6), L = trial % 2 ? 4 : 2;
    std::vector<std::uint8_t> gold(t);
    for (auto& g : gold) g = static_cast<std::uint8_t>(rng.below(L));
    CHECK(classification_nll(testing::random_tensor<double>({t, L}, rng, 3.0), gold) >= 0.0);
  }
  Tensor<double> onehot({3, 2});
  onehot.at(0, 1) = onehot.at(1, 0) = onehot.at(2, 1) = 1.0;
  CHECK(argmax_labels(onehot) == std::vector<std::uint8_t>{1, 0, 1});
  CHECK_THROWS_AS(classification_nll(onehot, {0, 2, 0}), RangeError);
}
