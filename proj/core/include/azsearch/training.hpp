#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/dataset.hpp"
#include "azsearch/predictor.hpp"
#include "azsearch/sampling.hpp"

namespace azsearch {

struct LossWeights {
  double zoom = 1.0;
  double conf = 1.0;
  double bbox = 1.0;
};

struct LossBreakdown {
  double zoom_ce = 0.0;
  double conf_ce = 0.0;
  double bbox_smooth_l1 = 0.0;

  double total() const noexcept { return zoom_ce + conf_ce + bbox_smooth_l1; }

  LossBreakdown& operator+=(const LossBreakdown& o) noexcept {
    zoom_ce += o.zoom_ce;
    conf_ce += o.conf_ce;
    bbox_smooth_l1 += o.bbox_smooth_l1;
    return *this;
  }
  LossBreakdown& operator*=(double s) noexcept {
    zoom_ce *= s;
    conf_ce *= s;
    bbox_smooth_l1 *= s;
    return *this;
  }
};

double smooth_l1(double x) noexcept;
double smooth_l1_grad(double x) noexcept;

/// Cross-entropy of probability p against a {0,1} label.
double binary_ce(double p, int label) noexcept;
/// Same quantity computed from the logit without forming p, so it stays
/// finite for saturated logits.
double binary_ce_from_logit(double logit, int label) noexcept;

/// Sum of the zoom cross-entropy, the 11 element-wise confidence
/// cross-entropies and the smooth-L1 regression loss over positive priors.
/// When `grads` is non-null the parameter gradients are accumulated into it
/// (it must have the model's shape). Throws DataError when a positive prior
/// has no regression target.
LossBreakdown multitask_loss(const ModelParameters& params, const ForwardResult& forward_result,
                             const TrainingSample& sample, ModelParameters* grads = nullptr,
                             const LossWeights& weights = {});

/// Symmetric relative error used by the gradient check.
double relative_error(double analytic, double numeric) noexcept;

struct GradCheckOptions {
  /// 0 checks every parameter; otherwise a seeded subsample of this size.
  std::size_t max_params = 0;
  std::uint64_t seed = 0;
  LossWeights weights{};
  /// Fault injection: multiply the analytic gradient of this block (by
  /// ModelParameters::block_names() index) by `corrupt_factor`.
  std::optional<std::size_t> corrupt_block;
  double corrupt_factor = 2.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Parameters whose probe flipped a ReLU; central differences are
  /// meaningless across the kink, so they are left out of the maximum.
  std::size_t kinks_skipped = 0;
  std::string worst_block;
  std::size_t worst_index = 0;
};

/// Compares backpropagated gradients with central differences. The numeric
/// side re-evaluates the loss through an independent extended-precision
/// forward pass.
GradCheckResult grad_check(const ModelParameters& params, std::span<const double> features,
                           const TrainingSample& sample, double epsilon,
                           const GradCheckOptions& options = {});

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int minibatch = 128;
  int iterations = 5000;
  std::uint64_t seed = 0;
  int grid = 4;
  int hidden = 64;
  double noise_sigma = 0.02;
  LossWeights weights{};

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainingExample {
  std::vector<double> features;
  TrainingSample sample;
};

/// Renders each referenced scene once (flipped ids resolved through
/// resolve_scene) and pools every sample's anchor.
std::vector<TrainingExample> featurize(const std::vector<TrainingSample>& samples,
                                       const std::vector<Scene>& scenes, int grid,
                                       double noise_sigma, std::uint64_t seed, int threads = 1);

struct TrainResult {
  ModelParameters params;
  std::vector<LossBreakdown> log;  // mean minibatch loss per iteration
};

/// Momentum SGD with weight decay on the weight matrices. Minibatches walk a
/// seeded permutation that is redrawn each epoch. Throws NumericError naming
/// the iteration when the loss turns non-finite.
TrainResult sgd_train(const std::vector<TrainingExample>& data, const TrainConfig& config,
                      const ModelParameters* initial = nullptr);

/// Fraction of examples whose thresholded zoom output matches the label.
double zoom_accuracy(const ModelParameters& params, const std::vector<TrainingExample>& data,
                     double threshold = 0.5);

std::string loss_log_csv(const std::vector<LossBreakdown>& log);

}  // namespace azsearch
