#include <doctest.h>

#include <cmath>
#include <limits>

#include "agepost/metrics.hpp"
#include "agepost/ordinal.hpp"
#include "agepost/random.hpp"
#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

using namespace agepost;

namespace {

const AgeGrid kGrid{0, 70};

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

// Head whose responses ignore x: bias +-big on a 1-d feature fed with 0.
OrdinalHead head_with_responses(const std::vector<bool>& fire, double big = 50.0) {
  std::vector<double> w(fire.size() * 2, 0.0);
  for (std::size_t k = 0; k < fire.size(); ++k) w[k * 2 + 1] = fire[k] ? big : -big;
  return OrdinalHead(kGrid, 1, 0.36, fire.size(), w);
}

}  // namespace

TEST_CASE("posterior map equals beta times the age gap") {
  for (double beta : {0.05, 0.36, 1.0, 3.0}) {
    const auto map = build_posterior_map(kGrid, 70, beta);
    double worst = 0.0;
    for (std::size_t a = 0; a < map.ages; ++a) {
      double b = 0.0;
      for (std::size_t k = 0; k < map.ranks; ++k) {
        worst = std::max(worst, std::abs(map.w(a, k) - beta * (double(a) - double(k))));
        b += std::log(oracle::logistic(beta * (double(k) - double(a))));
      }
      CHECK(map.bias[a] == doctest::Approx(b).epsilon(1e-12));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("head shape and validation") {
  const OrdinalHead head(kGrid, 16);
  CHECK(head.ranks() == 70);
  CHECK(head.weights().size() == 70 * 17);
  CHECK(head.threshold_age(0) == 0);
  CHECK_CODE(OrdinalHead(kGrid, 4, 0.36, 3, std::vector<double>(5)), ErrorCode::InvalidArgument);
  CHECK_CODE(forward_ordinal(head, std::vector<double>(3)), ErrorCode::DimensionMismatch);
}

TEST_CASE("responses match a dot-product oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.index(20);
    auto w = random_vector(rng, 70 * (dim + 1), 0.5);
    const OrdinalHead head(kGrid, dim, 0.36, 70, w);
    const auto x = random_vector(rng, dim, 1.0);
    const auto f = forward_ordinal(head, x);
    const auto want = oracle::responses(w, dim, x);
    for (std::size_t k = 0; k < f.size(); ++k) REQUIRE(std::abs(f[k] - want[k]) <= 1e-12);
  }
  const OrdinalHead zero(kGrid, 4);
  for (double v : forward_ordinal(zero, std::vector<double>{1, 2, 3, 4})) CHECK(v == 0.5);
}

TEST_CASE("posterior matches the soft-evidence product") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + rng.index(8);
    auto w = random_vector(rng, 70 * (dim + 1), 1.0);
    const OrdinalHead head(kGrid, dim, 0.36, 70, w);
    const auto x = random_vector(rng, dim, 1.0);
    const auto p = forward_posterior(head, x);
    const auto want = oracle::soft_posterior(0, 70, 0.36, oracle::responses(w, dim, x));
    for (std::size_t a = 0; a < want.size(); ++a) REQUIRE(std::abs(p.mass()[a] - want[a]) <= 1e-9);
  }
}

TEST_CASE("indifferent responses peak at the centre") {
  const OrdinalHead head(kGrid, 2);
  const auto p = forward_posterior(head, std::vector<double>{0.3, -1.0});
  const auto want = oracle::soft_posterior(0, 70, 0.36, std::vector<double>(70, 0.5));
  for (std::size_t a = 0; a < want.size(); ++a) CHECK(std::abs(p.mass()[a] - want[a]) <= 1e-9);
  // Thresholds 0..69 are centred on 34.5, so 34 and 35 tie and the younger wins.
  CHECK(mode(p) == 34);
  CHECK(p.at(34) == doctest::Approx(p.at(35)).epsilon(1e-12));
}

TEST_CASE("step responses") {
  std::vector<bool> fire(70);
  for (int k = 0; k < 70; ++k) fire[k] = k < 30;
  const auto head = head_with_responses(fire);
  const std::vector<double> x{0.0};
  CHECK(predict_ohrank(head, x) == 30);
  // 30 "older" votes against 40 "not older": the surplus far-right votes tip
  // the near-tie between 29 and 30 (log ratio ~2e-5) toward 29.
  const auto p = forward_posterior(head, x);
  CHECK(std::log(p.at(29) / p.at(30)) == doctest::Approx(1.9841905e-05).epsilon(1e-6));
  CHECK(predict_posterior_mode(head, x) == 29);
  CHECK(mode(forward_posterior(head, x)) ==
        oracle::argmax_youngest(oracle::soft_posterior(0, 70, 0.36, forward_ordinal(head, x))));

  for (int t = 1; t < 70; ++t) {
    for (int k = 0; k < 70; ++k) fire[k] = k < t;
    const auto h = head_with_responses(fire);
    CHECK(predict_ohrank(h, x) == t);
    const int m = predict_posterior_mode(h, x);
    CHECK(m == oracle::argmax_youngest(oracle::soft_posterior(0, 70, 0.36, forward_ordinal(h, x))));
    // Next to the grid floor the many "not older" votes drag the mode below t.
    if (t >= 4) CHECK(std::abs(m - t) <= 1);
  }
  CHECK(predict_ohrank(head_with_responses(std::vector<bool>(70, false)), x) == 0);
  CHECK(predict_ohrank(head_with_responses(std::vector<bool>(70, true)), x) == 70);
}

TEST_CASE("single classifier posterior is a rising logistic") {
  const OrdinalHead head(kGrid, 1, 0.36, 1, {0.0, 50.0});
  const auto p = forward_posterior(head, std::vector<double>{0.0});
  double z = 0.0;
  for (int a = 0; a <= 70; ++a) z += oracle::logistic(0.36 * a);
  for (int a = 0; a <= 70; ++a) CHECK(p.at(a) == doctest::Approx(oracle::logistic(0.36 * a) / z).epsilon(1e-12));
  for (int a = 0; a < 70; ++a) CHECK(p.at(a) < p.at(a + 1));
}

TEST_CASE("truncated cost") {
  CHECK(truncated_cost(40, 39) == 0.0);
  CHECK(truncated_cost(40, 38) == 0.0);
  CHECK(truncated_cost(40, 37) == 3.0);
  CHECK(truncated_cost(40, 50) == 10.0);
}

TEST_CASE("cost-sensitive loss examples") {
  const std::vector<double> x{0.0};
  std::vector<bool> truth(70);
  for (int k = 0; k < 70; ++k) truth[k] = 40 > k;
  CHECK(loss_cost_sensitive(head_with_responses(truth), x, 40).value <= 1e-30);

  auto wrong = truth;
  wrong[39] = false;  // inside the free band
  CHECK(loss_cost_sensitive(head_with_responses(wrong), x, 40).value <= 1e-30);
  wrong = truth;
  wrong[50] = true;
  CHECK(loss_cost_sensitive(head_with_responses(wrong), x, 40).value == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_CODE(loss_cost_sensitive(head_with_responses(truth), x, 99), ErrorCode::InvalidArgument);
}

TEST_CASE("KL loss examples") {
  Rng rng(8);
  const OrdinalHead head(kGrid, 3, 0.36, 70, random_vector(rng, 70 * 4, 0.3));
  const std::vector<double> x{0.2, -0.4, 1.0};
  const auto p = forward_posterior(head, x);
  CHECK(loss_kl(head, x, p).value == doctest::Approx(entropy(p)).epsilon(1e-12));

  // Two-bin grid with one threshold at 0: logits are (log s(0), 0.36 f + log s(-0.36)).
  // Choose f so they tie and P = (1/2, 1/2).
  const AgeGrid two(0, 1);
  const double f = (std::log(0.5) - std::log(oracle::logistic(-0.36))) / 0.36;
  const OrdinalHead flat(two, 1, 0.36, 1, {0.0, std::log(f / (1.0 - f))});
  const std::vector<double> x0{0.0};
  const auto p2 = forward_posterior(flat, x0);
  CHECK(p2.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(loss_kl(flat, x0, AgeDistribution::point_mass(two, 1)).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss_kl(flat, x0, AgeDistribution::uniform(two)).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("KL minus entropy is never negative") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const OrdinalHead head(kGrid, 4, 0.36, 70, random_vector(rng, 70 * 5, 0.5));
    const auto x = random_vector(rng, 4, 1.0);
    const auto gt = build_gt_posterior(ExactAge{rng.uniform_int(0, 70)}, kGrid);
    CHECK(loss_kl(head, x, gt).value - entropy(gt) >= -1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + rng.index(6);
    const std::size_t ranks = 1 + rng.index(70);
    const auto w = random_vector(rng, ranks * (dim + 1), 0.5);
    const auto x = random_vector(rng, dim, 1.0);
    const int age = rng.uniform_int(0, 70);
    const auto gt = build_gt_posterior(ExactAge{age}, kGrid);
    const OrdinalHead head(kGrid, dim, 0.36, ranks, w);

    auto hyper = [&](const std::vector<double>& p) {
      return loss_cost_sensitive(OrdinalHead(kGrid, dim, 0.36, ranks, p), x, age).value;
    };
    auto kl = [&](const std::vector<double>& p) {
      return loss_kl(OrdinalHead(kGrid, dim, 0.36, ranks, p), x, gt).value;
    };
    CHECK(oracle::max_relative_error(loss_cost_sensitive(head, x, age).gradient,
                                     oracle::numeric_gradient(hyper, w)) < 1e-4);
    CHECK(oracle::max_relative_error(loss_kl(head, x, gt).gradient, oracle::numeric_gradient(kl, w)) < 1e-4);
  }
}

TEST_CASE("synthetic dataset") {
  CHECK_CODE(synth_dataset(0, 1, kGrid, 16), ErrorCode::InvalidArgument);
  const auto a = synth_dataset(50, 7, kGrid, 16);
  const auto b = synth_dataset(50, 7, kGrid, 16);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features == b[i].features);
    CHECK(std::get<ExactAge>(a[i].label).age == std::get<ExactAge>(b[i].label).age);
    CHECK(a[i].features.size() == 16);
  }
  CHECK(synth_dataset(50, 8, kGrid, 16)[0].features != a[0].features);

  const std::size_t n = 10000;
  std::vector<int> hist(kGrid.size(), 0);
  for (const auto& s : synth_dataset(n, 1, kGrid, 4)) ++hist[std::get<ExactAge>(s.label).age];
  const double p = 1.0 / kGrid.size();
  const double sd = std::sqrt(n * p * (1.0 - p));
  for (int c : hist) CHECK(std::abs(c - n * p) <= 3.0 * sd);
}

TEST_CASE("zero learning rate leaves the head alone") {
  const auto data = synth_dataset(64, 2, kGrid, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  Rng rng(1);
  const OrdinalHead head(kGrid, 4, 0.36, 70, random_vector(rng, 70 * 5, 0.1));
  const auto result = train(head, data, cfg);
  CHECK(std::vector<double>(result.head.weights().begin(), result.head.weights().end()) ==
        std::vector<double>(head.weights().begin(), head.weights().end()));
  REQUIRE(result.trace.size() == 4);
  for (const auto& t : result.trace) CHECK(t.loss_total == result.trace[0].loss_total);
}

TEST_CASE("training validation") {
  auto data = synth_dataset(8, 2, kGrid, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_CODE(train(OrdinalHead(kGrid, 5), data, cfg), ErrorCode::DimensionMismatch);
  CHECK_CODE(train(OrdinalHead(kGrid, 4), std::vector<TrainingSample>{}, cfg), ErrorCode::InvalidArgument);
  data[3].features[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(OrdinalHead(kGrid, 4), data, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
}

TEST_CASE("training beats the untrained head") {
  const auto train_set = synth_dataset(1000, 1, kGrid, 16);
  const auto test_set = synth_dataset(300, 2, kGrid, 16);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 3;
  const OrdinalHead untrained(kGrid, 16);
  const auto result = train(untrained, train_set, cfg);
  for (std::size_t i = 1; i < result.trace.size(); ++i) CHECK(std::isfinite(result.trace[i].loss_total));
  CHECK(result.trace.back().loss_total < result.trace.front().loss_total);

  auto ca3 = [&](const OrdinalHead& h) {
    std::vector<int> pred, truth;
    for (const auto& s : test_set) {
      pred.push_back(predict_age(h, s.features, LossMode::Both));
      truth.push_back(std::get<ExactAge>(s.label).age);
    }
    return evaluate(pred, truth).ca.at(3);
  };
  CHECK(ca3(result.head) >= ca3(untrained) + 30.0);

  const auto again = train(untrained, train_set, cfg);
  CHECK(std::vector<double>(again.head.weights().begin(), again.head.weights().end()) ==
        std::vector<double>(result.head.weights().begin(), result.head.weights().end()));
}
