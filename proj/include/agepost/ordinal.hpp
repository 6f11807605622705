#pragma once

// Ordinal-hyperplane head: K "older than age k" classifiers feeding a fixed
// linear map and softmax that turns their responses into an age posterior.

#include <cstdint>
#include <span>
#include <vector>

#include "agepost/pipeline.hpp"
#include "agepost/posterior.hpp"

namespace agepost {

// Fixed, untrained map from classifier responses to posterior logits.
// logit[a] = sum_k weight(a, k) * f_k + bias[a].
struct PosteriorMap {
  std::size_t ages = 0;
  std::size_t ranks = 0;
  std::vector<double> weight;  // ages x ranks, row-major
  std::vector<double> bias;

  double w(std::size_t a, std::size_t k) const { return weight[a * ranks + k]; }
};

// weight(a, k) = log sigmoid(beta (a - t_k)) - log sigmoid(beta (t_k - a)),
// bias[a] = sum_k log sigmoid(beta (t_k - a)), with thresholds t_k = min_age + k.
PosteriorMap build_posterior_map(const AgeGrid& grid, std::size_t ranks, double beta);

class OrdinalHead {
 public:
  // Zero-initialized head. ranks defaults to one threshold between each pair of bins.
  OrdinalHead(AgeGrid grid, std::size_t feature_dim, double beta = kDefaultBeta,
              std::size_t ranks = 0);
  OrdinalHead(AgeGrid grid, std::size_t feature_dim, double beta, std::size_t ranks,
              std::vector<double> weights);

  const AgeGrid& grid() const noexcept { return grid_; }
  std::size_t ranks() const noexcept { return ranks_; }
  std::size_t feature_dim() const noexcept { return dim_; }
  std::size_t row_stride() const noexcept { return dim_ + 1; }
  double beta() const noexcept { return beta_; }
  int threshold_age(std::size_t k) const noexcept { return grid_.min_age() + static_cast<int>(k); }

  // Row k holds the classifier weights followed by its bias.
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> mutable_weights() noexcept { return weights_; }
  const PosteriorMap& posterior_map() const noexcept { return map_; }

 private:
  AgeGrid grid_;
  std::size_t dim_;
  double beta_;
  std::size_t ranks_;
  std::vector<double> weights_;
  PosteriorMap map_;
};

// f_k = sigmoid(w_k . x + b_k). Throws DimensionMismatch.
std::vector<double> forward_ordinal(const OrdinalHead& head, std::span<const double> x);

// Softmax of the posterior map applied to classifier responses.
AgeDistribution posterior_from_responses(const OrdinalHead& head, std::span<const double> f);
AgeDistribution forward_posterior(const OrdinalHead& head, std::span<const double> x);

inline constexpr int kCostFreeBand = 3;

// Zero inside the band |a_gt - t_k| < 3, |a_gt - t_k| outside it.
double truncated_cost(int gt_age, int threshold_age) noexcept;

struct LossWithGradient {
  double value = 0.0;
  std::vector<double> gradient;  // same layout as OrdinalHead::weights()
};

// sum_k cost_k * (f_k - [a_gt > t_k])^2.
LossWithGradient loss_cost_sensitive(const OrdinalHead& head, std::span<const double> x,
                                     int gt_age);

// Cross-entropy -sum_a p_gt(a) log P(a | x); equals KL(p_gt || P) + H(p_gt).
LossWithGradient loss_kl(const OrdinalHead& head, std::span<const double> x,
                         const AgeDistribution& gt);

double entropy(const AgeDistribution& dist);

// min_age + number of classifiers answering "older" with f_k > 0.5.
int predict_ohrank(const OrdinalHead& head, std::span<const double> x);
int predict_posterior_mode(const OrdinalHead& head, std::span<const double> x);

struct TrainingSample {
  std::vector<double> features;
  GroundTruthSpec label;
};

enum class LossMode { HyperOnly, KlOnly, Both };

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  int batch_size = 32;
  LossMode mode = LossMode::Both;
  double hyper_weight = 1.0;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
};

struct LossTracePoint {
  int epoch = 0;
  double loss_hyper = 0.0;
  double loss_kl = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  OrdinalHead head;
  std::vector<LossTracePoint> trace;  // epoch 0 is the untrained head
};

// Mini-batch gradient descent with batch-mean gradients. Trace entries are
// dataset means evaluated after each epoch in dataset order.
// Throws NonFiniteLoss naming the batch that produced it.
TrainResult train(OrdinalHead head, std::span<const TrainingSample> dataset,
                  const TrainConfig& config);

// Age an inference path predicts for a head trained with `mode`: threshold
// counting for hyper-only heads, posterior mode otherwise.
int predict_age(const OrdinalHead& head, std::span<const double> x, LossMode mode);

inline constexpr std::uint64_t kDefaultEmbeddingSeed = 0x5eed0fa9e5ULL;
inline constexpr double kSynthNoiseStddev = 0.05;

// Uniform ages on the grid; features are a fixed random linear embedding of
// (a/max, sin(pi a/max), cos(pi a/max)) plus Gaussian noise. Labels are ExactAge.
std::vector<TrainingSample> synth_dataset(std::size_t n, std::uint64_t seed, const AgeGrid& grid,
                                          std::size_t dim,
                                          std::uint64_t embedding_seed = kDefaultEmbeddingSeed);

}  // namespace agepost
