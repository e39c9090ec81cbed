#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/dataset.hpp"
#include "azsearch/geometry.hpp"

namespace azsearch {

struct AdjacencyPrediction {
  int prior_index = 0;
  double confidence = 0.0;
  RegressionTarget regression;

  friend bool operator==(const AdjacencyPrediction&, const AdjacencyPrediction&) = default;
};

/// One evaluation of an anchor: zoom indicator plus one adjacency
/// prediction per prior, stored in prior order.
struct ZoomAdjacencyOutput {
  double zoom = 0.0;
  std::array<AdjacencyPrediction, kNumPriors> adjacency{};

  friend bool operator==(const ZoomAdjacencyOutput&, const ZoomAdjacencyOutput&) = default;
};

/// Throws NumericError when zoom/confidences leave [0,1], regression is
/// non-finite or prior indices are not 0..10 in order.
void validate_output(const ZoomAdjacencyOutput& out);

// ---------------------------------------------------------------------------
// Region pooling
//
// The region is split into g x g cells by an even real-valued partition.
// Pixel (px, py) covers [px, px+1) x [py, py+1); a cell takes the max over
// in-frame pixels that overlap it with positive area, and 0 when none do.
// Cells lying outside the frame therefore read as zero background.
// Output order is channel-major, then row-major over cells.

/// Direct scan. Throws DataError when the region misses the frame entirely.
std::vector<double> pool_region(const FeatureGrid& grid, const Box& region, int g);

/// Row-wise sparse tables over a FeatureGrid: each cell costs O(rows)
/// instead of O(rows * cols). Results are bit-identical to pool_region.
class PoolingIndex {
 public:
  explicit PoolingIndex(const FeatureGrid& grid);

  int channels() const noexcept { return channels_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::vector<double> pool(const Box& region, int g) const;
  void pool_into(const Box& region, int g, std::span<double> out) const;

 private:
  float range_max(int c, int y, int x0, int x1) const;  // inclusive x0..x1

  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  int levels_ = 0;
  std::vector<float> table_;  // [level][channel][y][x]
};

// ---------------------------------------------------------------------------
// Trainable model: pooled features -> ReLU hidden layer -> three heads.

inline constexpr int kModelVersion = 1;
inline constexpr int kRegressionOutputs = 4 * static_cast<int>(kNumPriors);

struct ModelParameters {
  int grid = 4;
  int hidden = 64;
  int channels = kRenderChannels;

  std::vector<double> w1;      // hidden x input
  std::vector<double> b1;      // hidden
  std::vector<double> w_zoom;  // 1 x hidden
  std::vector<double> b_zoom;  // 1
  std::vector<double> w_conf;  // 11 x hidden
  std::vector<double> b_conf;  // 11
  std::vector<double> w_reg;   // 44 x hidden
  std::vector<double> b_reg;   // 44

  int input_size() const noexcept { return channels * grid * grid; }

  /// All weights and biases zero.
  static ModelParameters zeros(int grid, int hidden, int channels);
  /// Weights uniform in [-0.05, 0.05], biases zero.
  static ModelParameters initialized(int grid, int hidden, int channels, std::uint64_t seed);

  static constexpr std::size_t kBlocks = 8;
  static const std::array<const char*, kBlocks>& block_names();
  std::array<std::span<double>, kBlocks> blocks();
  std::array<std::span<const double>, kBlocks> blocks() const;
  /// Shape {rows, cols} of each block in block_names() order.
  std::array<std::array<int, 2>, kBlocks> block_shapes() const;
  std::size_t parameter_count() const;

  /// Throws ConfigError on inconsistent shapes, NumericError on non-finite values.
  void validate() const;

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

void to_json(nlohmann::json& j, const ModelParameters& params);
void from_json(const nlohmann::json& j, ModelParameters& params);

/// Intermediates kept for backpropagation.
struct ForwardCache {
  std::vector<double> features;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  double zoom_logit = 0.0;
  std::array<double, kNumPriors> conf_logits{};
  std::array<double, kRegressionOutputs> regression{};
};

struct ForwardResult {
  ZoomAdjacencyOutput output;
  ForwardCache cache;
};

double sigmoid(double x) noexcept;

/// Throws ConfigError when the feature length does not match the model.
ForwardResult forward(const ModelParameters& params, std::span<const double> features);

// ---------------------------------------------------------------------------
// Predictor interface used by the search.

/// Everything a predictor may look at for one scene. `pooling` is only
/// required by feature-based predictors.
struct SceneContext {
  const Scene* scene = nullptr;
  const PoolingIndex* pooling = nullptr;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ZoomAdjacencyOutput predict(const SceneContext& ctx, const Box& anchor) const = 0;
  virtual bool needs_features() const noexcept { return false; }
  virtual std::string name() const = 0;
};

/// Ground-truth labels used as a perfect predictor.
ZoomAdjacencyOutput oracle_predict(const Scene& scene, const Box& anchor,
                                   double iou_threshold = 0.25,
                                   const PriorTable& priors = default_priors());

/// Uniform zoom/confidences, zero regression, deterministic per (seed, anchor).
ZoomAdjacencyOutput random_predict(std::uint64_t seed, const Box& anchor);

class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(double iou_threshold = 0.25, PriorTable priors = default_priors())
      : iou_threshold_(iou_threshold), priors_(priors) {}
  ZoomAdjacencyOutput predict(const SceneContext& ctx, const Box& anchor) const override;
  std::string name() const override { return "oracle"; }

 private:
  double iou_threshold_;
  PriorTable priors_;
};

/// random_predict with the seed keyed by the scene id, so scenes sharing a
/// frame size do not share outputs.
class RandomPredictor final : public Predictor {
 public:
  explicit RandomPredictor(std::uint64_t seed) : seed_(seed) {}
  ZoomAdjacencyOutput predict(const SceneContext& ctx, const Box& anchor) const override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(ModelParameters params);
  ZoomAdjacencyOutput predict(const SceneContext& ctx, const Box& anchor) const override;
  bool needs_features() const noexcept override { return true; }
  std::string name() const override { return "model"; }
  const ModelParameters& parameters() const noexcept { return params_; }

 private:
  ModelParameters params_;
};

}  // namespace azsearch
