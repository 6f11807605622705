#include "agepost/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace agepost {

PosteriorMap build_posterior_map(const AgeGrid& grid, std::size_t ranks, double beta) {
  PosteriorMap map;
  map.ages = grid.size();
  map.ranks = ranks;
  map.weight.resize(map.ages * ranks);
  map.bias.assign(map.ages, 0.0);
  for (std::size_t a = 0; a < map.ages; ++a) {
    for (std::size_t k = 0; k < ranks; ++k) {
      const double gap = beta * static_cast<double>(static_cast<int>(a) - static_cast<int>(k));
      const double log_older = log_sigmoid(gap);
      const double log_younger = log_sigmoid(-gap);
      map.weight[a * ranks + k] = log_older - log_younger;
      map.bias[a] += log_younger;
    }
  }
  return map;
}

OrdinalHead::OrdinalHead(AgeGrid grid, std::size_t feature_dim, double beta, std::size_t ranks)
    : OrdinalHead(grid, feature_dim, beta, ranks, {}) {}

OrdinalHead::OrdinalHead(AgeGrid grid, std::size_t feature_dim, double beta, std::size_t ranks,
                         std::vector<double> weights)
    : grid_(grid),
      dim_(feature_dim),
      beta_(beta),
      ranks_(ranks == 0 ? grid.size() - 1 : ranks),
      weights_(std::move(weights)) {
  require(dim_ >= 1, "feature dimension must be >= 1");
  require(std::isfinite(beta_) && beta_ > 0.0, "posterior map beta must be positive");
  require(ranks_ >= 1 && ranks_ <= grid_.size() - 1, "rank count must lie in [1, bins - 1]");
  if (weights_.empty()) weights_.assign(ranks_ * row_stride(), 0.0);
  require(weights_.size() == ranks_ * row_stride(), "weight matrix has the wrong shape");
  for (double w : weights_) require(std::isfinite(w), "head weights must be finite");
  map_ = build_posterior_map(grid_, ranks_, beta_);
}

namespace {

void check_dim(const OrdinalHead& head, std::span<const double> x) {
  if (x.size() != head.feature_dim()) {
    fail(ErrorCode::DimensionMismatch, "feature vector has dimension " + std::to_string(x.size()) +
                                           ", head expects " +
                                           std::to_string(head.feature_dim()));
  }
}

std::vector<double> posterior_logits(const OrdinalHead& head, std::span<const double> f) {
  const auto& map = head.posterior_map();
  std::vector<double> z(map.bias);
  for (std::size_t a = 0; a < map.ages; ++a) {
    const double* row = map.weight.data() + a * map.ranks;
    double acc = 0.0;
    for (std::size_t k = 0; k < map.ranks; ++k) acc += row[k] * f[k];
    z[a] += acc;
  }
  return z;
}

// Returns log-softmax of z in place.
void log_softmax(std::vector<double>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  const double lse = peak + std::log(total);
  for (double& v : z) v -= lse;
}

void accumulate_row_gradient(std::vector<double>& grad, std::size_t k, std::size_t stride,
                             double dz, std::span<const double> x) {
  double* row = grad.data() + k * stride;
  for (std::size_t j = 0; j < x.size(); ++j) row[j] += dz * x[j];
  row[x.size()] += dz;
}

}  // namespace

std::vector<double> forward_ordinal(const OrdinalHead& head, std::span<const double> x) {
  check_dim(head, x);
  const auto w = head.weights();
  const std::size_t stride = head.row_stride();
  std::vector<double> f(head.ranks());
  for (std::size_t k = 0; k < head.ranks(); ++k) {
    const double* row = w.data() + k * stride;
    double z = row[x.size()];
    for (std::size_t j = 0; j < x.size(); ++j) z += row[j] * x[j];
    f[k] = sigmoid(z);
  }
  return f;
}

AgeDistribution posterior_from_responses(const OrdinalHead& head, std::span<const double> f) {
  require(f.size() == head.ranks(), "response vector length must equal the rank count");
  auto z = posterior_logits(head, f);
  log_softmax(z);
  for (double& v : z) v = std::exp(v);
  return AgeDistribution::from_weights(head.grid(), std::move(z));
}

AgeDistribution forward_posterior(const OrdinalHead& head, std::span<const double> x) {
  return posterior_from_responses(head, forward_ordinal(head, x));
}

double truncated_cost(int gt_age, int threshold_age) noexcept {
  const int gap = std::abs(gt_age - threshold_age);
  return gap < kCostFreeBand ? 0.0 : static_cast<double>(gap);
}

LossWithGradient loss_cost_sensitive(const OrdinalHead& head, std::span<const double> x,
                                     int gt_age) {
  require(head.grid().contains(gt_age), "ground-truth age outside grid");
  const auto f = forward_ordinal(head, x);
  LossWithGradient out;
  out.gradient.assign(head.weights().size(), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const int t = head.threshold_age(k);
    const double cost = truncated_cost(gt_age, t);
    if (cost == 0.0) continue;
    const double target = gt_age > t ? 1.0 : 0.0;
    const double r = f[k] - target;
    out.value += cost * r * r;
    const double dz = 2.0 * cost * r * f[k] * (1.0 - f[k]);
    accumulate_row_gradient(out.gradient, k, head.row_stride(), dz, x);
  }
  return out;
}

LossWithGradient loss_kl(const OrdinalHead& head, std::span<const double> x,
                         const AgeDistribution& gt) {
  require(gt.grid() == head.grid(), "ground-truth posterior grid does not match the head");
  const auto f = forward_ordinal(head, x);
  auto log_p = posterior_logits(head, f);
  log_softmax(log_p);

  const auto p_gt = gt.mass();
  const auto& map = head.posterior_map();
  LossWithGradient out;
  std::vector<double> dlogit(map.ages);
  for (std::size_t a = 0; a < map.ages; ++a) {
    if (p_gt[a] > 0.0) out.value -= p_gt[a] * log_p[a];
    dlogit[a] = std::exp(log_p[a]) - p_gt[a];
  }

  out.gradient.assign(head.weights().size(), 0.0);
  for (std::size_t k = 0; k < map.ranks; ++k) {
    double df = 0.0;
    for (std::size_t a = 0; a < map.ages; ++a) df += dlogit[a] * map.w(a, k);
    accumulate_row_gradient(out.gradient, k, head.row_stride(), df * f[k] * (1.0 - f[k]), x);
  }
  return out;
}

double entropy(const AgeDistribution& dist) {
  double h = 0.0;
  for (double p : dist.mass()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

int predict_ohrank(const OrdinalHead& head, std::span<const double> x) {
  const auto f = forward_ordinal(head, x);
  const auto votes = std::count_if(f.begin(), f.end(), [](double v) { return v > 0.5; });
  return head.grid().min_age() + static_cast<int>(votes);
}

int predict_posterior_mode(const OrdinalHead& head, std::span<const double> x) {
  return mode(forward_posterior(head, x));
}

int predict_age(const OrdinalHead& head, std::span<const double> x, LossMode mode) {
  return mode == LossMode::HyperOnly ? predict_ohrank(head, x) : predict_posterior_mode(head, x);
}

namespace {

struct PreparedSample {
  std::span<const double> x;
  AgeDistribution gt;
  int gt_age;
};

struct SampleLoss {
  double hyper = 0.0;
  double kl = 0.0;
};

bool uses_hyper(LossMode m) { return m != LossMode::KlOnly; }
bool uses_kl(LossMode m) { return m != LossMode::HyperOnly; }

LossTracePoint evaluate_epoch(const OrdinalHead& head, const std::vector<PreparedSample>& data,
                              const TrainConfig& config, int epoch) {
  LossTracePoint point{epoch, 0.0, 0.0, 0.0};
  for (const auto& s : data) {
    point.loss_hyper += loss_cost_sensitive(head, s.x, s.gt_age).value;
    point.loss_kl += loss_kl(head, s.x, s.gt).value;
  }
  const double n = static_cast<double>(data.size());
  point.loss_hyper /= n;
  point.loss_kl /= n;
  point.loss_total = (uses_hyper(config.mode) ? config.hyper_weight * point.loss_hyper : 0.0) +
                     (uses_kl(config.mode) ? config.kl_weight * point.loss_kl : 0.0);
  return point;
}

}  // namespace

TrainResult train(OrdinalHead head, std::span<const TrainingSample> dataset,
                  const TrainConfig& config) {
  require(!dataset.empty(), "training set is empty");
  require(config.batch_size >= 1, "batch size must be >= 1");
  require(config.epochs >= 0, "epoch count must be non-negative");
  require(std::isfinite(config.learning_rate) && config.learning_rate >= 0.0,
          "learning rate must be finite and non-negative");

  std::vector<PreparedSample> data;
  data.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (s.features.size() != head.feature_dim()) {
      fail(ErrorCode::DimensionMismatch, "training sample feature dimension mismatch");
    }
    auto gt = build_gt_posterior(s.label, head.grid());
    const int gt_age =
        std::holds_alternative<ExactAge>(s.label) ? std::get<ExactAge>(s.label).age : mode(gt);
    data.push_back({s.features, std::move(gt), gt_age});
  }

  TrainResult result{std::move(head), {}};
  OrdinalHead& h = result.head;
  result.trace.push_back(evaluate_epoch(h, data, config, 0));

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(h.weights().size());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  std::size_t batch_index = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        if (uses_hyper(config.mode)) {
          auto l = loss_cost_sensitive(h, s.x, s.gt_age);
          batch_loss += config.hyper_weight * l.value;
          for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += config.hyper_weight * l.gradient[j];
        }
        if (uses_kl(config.mode)) {
          auto l = loss_kl(h, s.x, s.gt);
          batch_loss += config.kl_weight * l.value;
          for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += config.kl_weight * l.gradient[j];
        }
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::NonFiniteLoss,
             "non-finite loss in batch " + std::to_string(batch_index) + " (epoch " +
                 std::to_string(epoch) + ")");
      }
      const double scale = config.learning_rate / static_cast<double>(end - start);
      auto w = h.mutable_weights();
      for (std::size_t j = 0; j < grad.size(); ++j) w[j] -= scale * grad[j];
    }
    result.trace.push_back(evaluate_epoch(h, data, config, epoch));
  }
  return result;
}

std::vector<TrainingSample> synth_dataset(std::size_t n, std::uint64_t seed, const AgeGrid& grid,
                                          std::size_t dim, std::uint64_t embedding_seed) {
  require(n >= 1, "synthetic dataset size must be >= 1");
  require(dim >= 1, "feature dimension must be >= 1");

  Rng embed_rng(embedding_seed);
  std::vector<double> embedding(dim * 3);
  for (double& e : embedding) e = embed_rng.normal();

  Rng rng(seed);
  const double top = static_cast<double>(grid.max_age());
  std::vector<TrainingSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int age = rng.uniform_int(grid.min_age(), grid.max_age());
    const double t = static_cast<double>(age) / top;
    const double latent[3] = {t, std::sin(std::numbers::pi * t), std::cos(std::numbers::pi * t)};
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const double* row = embedding.data() + j * 3;
      x[j] = row[0] * latent[0] + row[1] * latent[1] + row[2] * latent[2] +
             rng.normal(0.0, kSynthNoiseStddev);
    }
    out.push_back({std::move(x), ExactAge{age}});
  }
  return out;
}

}  // namespace agepost
