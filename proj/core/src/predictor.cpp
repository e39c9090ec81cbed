#include "azsearch/predictor.hpp"

#include <algorithm>
#include <bit>
#include <sstream>
#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/labels.hpp"
#include "azsearch/rng.hpp"

namespace azsearch {

void validate_output(const ZoomAdjacencyOutput& out) {
  if (!(out.zoom >= 0.0 && out.zoom <= 1.0)) {
    throw NumericError("predictor zoom outside [0,1]: " + std::to_string(out.zoom));
  }
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    const auto& a = out.adjacency[p];
    if (a.prior_index != static_cast<int>(p)) {
      throw NumericError("adjacency entry " + std::to_string(p) + " carries prior index " +
                         std::to_string(a.prior_index));
    }
    if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) {
      throw NumericError("confidence of prior " + std::to_string(p) + " outside [0,1]");
    }
    if (!a.regression.finite()) {
      throw NumericError("regression of prior " + std::to_string(p) + " is not finite");
    }
  }
}

// ---------------------------------------------------------------------------
// Pooling

namespace {

struct CellSpan {
  int lo;
  int hi;  // inclusive; lo > hi means empty
};

CellSpan cell_span(double start, double extent, int g, int i, int limit) {
  const double c0 = start + extent * i / g;
  const double c1 = start + extent * (i + 1) / g;
  int lo = static_cast<int>(std::floor(c0));
  int hi = static_cast<int>(std::ceil(c1)) - 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, limit - 1);
  return {lo, hi};
}

void check_pool_args(const Box& region, int g, int width, int height) {
  if (g < 1) throw ConfigError("pooling grid size must be >= 1");
  if (!region.valid()) throw DataError("pooling region is not a valid box");
  if (!clip_to_frame(region, width, height)) {
    std::ostringstream msg;
    msg << "pooling region " << region << " lies outside the " << width << "x" << height
        << " frame";
    throw DataError(msg.str());
  }
}

}  // namespace

std::vector<double> pool_region(const FeatureGrid& grid, const Box& region, int g) {
  check_pool_args(region, g, grid.width(), grid.height());
  std::vector<double> out(static_cast<std::size_t>(grid.channels()) * g * g, 0.0);
  for (int c = 0; c < grid.channels(); ++c) {
    for (int cy = 0; cy < g; ++cy) {
      const CellSpan ys = cell_span(region.y1, region.height(), g, cy, grid.height());
      for (int cx = 0; cx < g; ++cx) {
        const CellSpan xs = cell_span(region.x1, region.width(), g, cx, grid.width());
        if (ys.lo > ys.hi || xs.lo > xs.hi) continue;
        float best = grid.at(c, xs.lo, ys.lo);
        for (int y = ys.lo; y <= ys.hi; ++y) {
          for (int x = xs.lo; x <= xs.hi; ++x) best = std::max(best, grid.at(c, x, y));
        }
        out[(static_cast<std::size_t>(c) * g + cy) * g + cx] = best;
      }
    }
  }
  return out;
}

PoolingIndex::PoolingIndex(const FeatureGrid& grid)
    : channels_(grid.channels()), width_(grid.width()), height_(grid.height()) {
  levels_ = std::bit_width(static_cast<unsigned>(width_));
  const std::size_t plane = static_cast<std::size_t>(channels_) * height_ * width_;
  table_.resize(plane * levels_);
  std::copy(grid.values().begin(), grid.values().end(), table_.begin());
  for (int l = 1; l < levels_; ++l) {
    const int half = 1 << (l - 1);
    const int span = 1 << l;
    float* prev = table_.data() + plane * (l - 1);
    float* cur = table_.data() + plane * l;
    for (std::size_t row = 0; row < static_cast<std::size_t>(channels_) * height_; ++row) {
      const float* p = prev + row * width_;
      float* q = cur + row * width_;
      for (int x = 0; x + span <= width_; ++x) q[x] = std::max(p[x], p[x + half]);
    }
  }
}

float PoolingIndex::range_max(int c, int y, int x0, int x1) const {
  const int len = x1 - x0 + 1;
  const int l = std::bit_width(static_cast<unsigned>(len)) - 1;
  const std::size_t plane = static_cast<std::size_t>(channels_) * height_ * width_;
  const float* row =
      table_.data() + plane * l + (static_cast<std::size_t>(c) * height_ + y) * width_;
  return std::max(row[x0], row[x1 - (1 << l) + 1]);
}

std::vector<double> PoolingIndex::pool(const Box& region, int g) const {
  std::vector<double> out(static_cast<std::size_t>(channels_) * g * g, 0.0);
  pool_into(region, g, out);
  return out;
}

void PoolingIndex::pool_into(const Box& region, int g, std::span<double> out) const {
  check_pool_args(region, g, width_, height_);
  if (out.size() != static_cast<std::size_t>(channels_) * g * g) {
    throw ConfigError("pool_into: output span has the wrong length");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (int cy = 0; cy < g; ++cy) {
    const CellSpan ys = cell_span(region.y1, region.height(), g, cy, height_);
    if (ys.lo > ys.hi) continue;
    for (int cx = 0; cx < g; ++cx) {
      const CellSpan xs = cell_span(region.x1, region.width(), g, cx, width_);
      if (xs.lo > xs.hi) continue;
      for (int c = 0; c < channels_; ++c) {
        float best = range_max(c, ys.lo, xs.lo, xs.hi);
        for (int y = ys.lo + 1; y <= ys.hi; ++y) best = std::max(best, range_max(c, y, xs.lo, xs.hi));
        out[(static_cast<std::size_t>(c) * g + cy) * g + cx] = best;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Model

ModelParameters ModelParameters::zeros(int grid, int hidden, int channels) {
  if (grid < 1 || hidden < 1 || channels < 1) {
    throw ConfigError("model dimensions g, H and channels must be >= 1");
  }
  ModelParameters p;
  p.grid = grid;
  p.hidden = hidden;
  p.channels = channels;
  const auto in = static_cast<std::size_t>(p.input_size());
  const auto h = static_cast<std::size_t>(hidden);
  p.w1.assign(h * in, 0.0);
  p.b1.assign(h, 0.0);
  p.w_zoom.assign(h, 0.0);
  p.b_zoom.assign(1, 0.0);
  p.w_conf.assign(kNumPriors * h, 0.0);
  p.b_conf.assign(kNumPriors, 0.0);
  p.w_reg.assign(kRegressionOutputs * h, 0.0);
  p.b_reg.assign(kRegressionOutputs, 0.0);
  return p;
}

ModelParameters ModelParameters::initialized(int grid, int hidden, int channels,
                                             std::uint64_t seed) {
  ModelParameters p = zeros(grid, hidden, channels);
  Rng rng(derive_seed(seed, streams::init));
  for (auto* block : {&p.w1, &p.w_zoom, &p.w_conf, &p.w_reg}) {
    for (double& w : *block) w = rng.uniform(-0.05, 0.05);
  }
  return p;
}

const std::array<const char*, ModelParameters::kBlocks>& ModelParameters::block_names() {
  static const std::array<const char*, kBlocks> names = {
      "w1", "b1", "w_zoom", "b_zoom", "w_conf", "b_conf", "w_reg", "b_reg"};
  return names;
}

std::array<std::span<double>, ModelParameters::kBlocks> ModelParameters::blocks() {
  return {w1, b1, w_zoom, b_zoom, w_conf, b_conf, w_reg, b_reg};
}

std::array<std::span<const double>, ModelParameters::kBlocks> ModelParameters::blocks() const {
  return {w1, b1, w_zoom, b_zoom, w_conf, b_conf, w_reg, b_reg};
}

std::array<std::array<int, 2>, ModelParameters::kBlocks> ModelParameters::block_shapes() const {
  const int n = static_cast<int>(kNumPriors);
  return {{{hidden, input_size()},
           {hidden, 1},
           {1, hidden},
           {1, 1},
           {n, hidden},
           {n, 1},
           {kRegressionOutputs, hidden},
           {kRegressionOutputs, 1}}};
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.size();
  return n;
}

void ModelParameters::validate() const {
  if (grid < 1 || hidden < 1 || channels < 1) {
    throw ConfigError("model dimensions g, H and channels must be >= 1");
  }
  const auto shapes = block_shapes();
  const auto views = blocks();
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const auto expected = static_cast<std::size_t>(shapes[b][0]) * shapes[b][1];
    if (views[b].size() != expected) {
      throw ConfigError(std::string("model block ") + block_names()[b] + " has " +
                        std::to_string(views[b].size()) + " values, expected " +
                        std::to_string(expected));
    }
    for (double v : views[b]) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("model block ") + block_names()[b] +
                           " contains a non-finite value");
      }
    }
  }
}

void to_json(nlohmann::json& j, const ModelParameters& p) {
  j = {{"version", kModelVersion}, {"g", p.grid}, {"H", p.hidden}, {"channels", p.channels}};
  const auto shapes = p.block_shapes();
  const auto views = p.blocks();
  for (std::size_t b = 0; b < ModelParameters::kBlocks; ++b) {
    j[ModelParameters::block_names()[b]] = {
        {"shape", {shapes[b][0], shapes[b][1]}},
        {"data", std::vector<double>(views[b].begin(), views[b].end())}};
  }
}

void from_json(const nlohmann::json& j, ModelParameters& p) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) {
      throw DataError("unsupported model version " + std::to_string(version));
    }
    p = ModelParameters::zeros(j.at("g").get<int>(), j.at("H").get<int>(),
                               j.at("channels").get<int>());
    const auto shapes = p.block_shapes();
    auto views = p.blocks();
    for (std::size_t b = 0; b < ModelParameters::kBlocks; ++b) {
      const char* name = ModelParameters::block_names()[b];
      const auto& block = j.at(name);
      const auto shape = block.at("shape").get<std::array<int, 2>>();
      if (shape != shapes[b]) {
        throw DataError(std::string("model block ") + name + " has shape [" +
                          std::to_string(shape[0]) + "," + std::to_string(shape[1]) +
                          "], expected [" + std::to_string(shapes[b][0]) + "," +
                          std::to_string(shapes[b][1]) + "]");
      }
      const auto data = block.at("data").get<std::vector<double>>();
      if (data.size() != views[b].size()) {
        throw DataError(std::string("model block ") + name + " data length mismatch");
      }
      std::copy(data.begin(), data.end(), views[b].begin());
    }
    p.validate();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ForwardResult forward(const ModelParameters& params, std::span<const double> features) {
  const int in = params.input_size();
  const int h = params.hidden;
  if (features.size() != static_cast<std::size_t>(in)) {
    throw ConfigError("feature vector has length " + std::to_string(features.size()) +
                      ", model expects " + std::to_string(in));
  }
  ForwardResult r;
  auto& cache = r.cache;
  cache.features.assign(features.begin(), features.end());
  cache.hidden_pre.resize(h);
  cache.hidden.resize(h);
  for (int i = 0; i < h; ++i) {
    const double* w = params.w1.data() + static_cast<std::size_t>(i) * in;
    double acc = params.b1[i];
    for (int k = 0; k < in; ++k) acc += w[k] * features[k];
    cache.hidden_pre[i] = acc;
    cache.hidden[i] = acc > 0.0 ? acc : 0.0;
  }
  auto dot_hidden = [&](const std::vector<double>& w, std::size_t row, double bias) {
    const double* wr = w.data() + row * h;
    double acc = bias;
    for (int k = 0; k < h; ++k) acc += wr[k] * cache.hidden[k];
    return acc;
  };

  cache.zoom_logit = dot_hidden(params.w_zoom, 0, params.b_zoom[0]);
  r.output.zoom = sigmoid(cache.zoom_logit);
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    cache.conf_logits[p] = dot_hidden(params.w_conf, p, params.b_conf[p]);
  }
  for (std::size_t o = 0; o < static_cast<std::size_t>(kRegressionOutputs); ++o) {
    cache.regression[o] = dot_hidden(params.w_reg, o, params.b_reg[o]);
  }
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    auto& a = r.output.adjacency[p];
    a.prior_index = static_cast<int>(p);
    a.confidence = sigmoid(cache.conf_logits[p]);
    a.regression = RegressionTarget{cache.regression[4 * p], cache.regression[4 * p + 1],
                                    cache.regression[4 * p + 2], cache.regression[4 * p + 3]};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Predictors

ZoomAdjacencyOutput oracle_predict(const Scene& scene, const Box& anchor, double iou_threshold,
                                   const PriorTable& priors) {
  ZoomAdjacencyOutput out;
  out.zoom = zoom_label(anchor, scene.objects);
  const auto labels = assign_adjacency(anchor, scene.objects, iou_threshold, priors);
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    auto& a = out.adjacency[p];
    a.prior_index = static_cast<int>(p);
    if (labels[p].confidence == 1) {
      a.confidence = 1.0;
      a.regression = *labels[p].regression;
    }
  }
  return out;
}

ZoomAdjacencyOutput random_predict(std::uint64_t seed, const Box& anchor) {
  std::uint64_t key = derive_seed(seed, streams::random_predictor);
  for (double v : {anchor.x1, anchor.y1, anchor.x2, anchor.y2}) {
    key = derive_seed(key, std::bit_cast<std::uint64_t>(v));
  }
  Rng rng(key);
  ZoomAdjacencyOutput out;
  out.zoom = rng.uniform();
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    out.adjacency[p].prior_index = static_cast<int>(p);
    out.adjacency[p].confidence = rng.uniform();
  }
  return out;
}

ZoomAdjacencyOutput OraclePredictor::predict(const SceneContext& ctx, const Box& anchor) const {
  if (ctx.scene == nullptr) throw ConfigError("oracle predictor needs the scene");
  return oracle_predict(*ctx.scene, anchor, iou_threshold_, priors_);
}

ZoomAdjacencyOutput RandomPredictor::predict(const SceneContext& ctx, const Box& anchor) const {
  const std::uint64_t seed = ctx.scene ? derive_seed(seed_, ctx.scene->id) : seed_;
  return random_predict(seed, anchor);
}

ModelPredictor::ModelPredictor(ModelParameters params) : params_(std::move(params)) {
  params_.validate();
}

ZoomAdjacencyOutput ModelPredictor::predict(const SceneContext& ctx, const Box& anchor) const {
  if (ctx.pooling == nullptr) throw ConfigError("model predictor needs rendered features");
  if (ctx.pooling->channels() != params_.channels) {
    throw ConfigError("feature grid has " + std::to_string(ctx.pooling->channels()) +
                      " channels, model expects " + std::to_string(params_.channels));
  }
  const auto features = ctx.pooling->pool(anchor, params_.grid);
  return forward(params_, features).output;
}

}  // namespace azsearch
