#include "azsearch/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/io.hpp"
#include "azsearch/parallel.hpp"
#include "azsearch/rng.hpp"

namespace azsearch {

double smooth_l1(double x) noexcept {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) noexcept {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

double binary_ce(double p, int label) noexcept {
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

double binary_ce_from_logit(double logit, int label) noexcept {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

namespace {

void require_same_shape(const ModelParameters& a, const ModelParameters& b) {
  if (a.grid != b.grid || a.hidden != b.hidden || a.channels != b.channels ||
      a.parameter_count() != b.parameter_count()) {
    throw ConfigError("gradient buffer does not match the model shape");
  }
}

void check_positive_targets(const TrainingSample& sample) {
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    if (sample.confidence[p] == 1 && !sample.regression[p]) {
      throw DataError("sample of scene '" + sample.scene_id + "': positive prior " +
                      std::to_string(p) + " has no regression target");
    }
  }
}

}  // namespace

LossBreakdown multitask_loss(const ModelParameters& params, const ForwardResult& fr,
                             const TrainingSample& sample, ModelParameters* grads,
                             const LossWeights& weights) {
  check_positive_targets(sample);
  const auto& c = fr.cache;
  const int h = params.hidden;
  const int in = params.input_size();

  LossBreakdown loss;
  loss.zoom_ce = weights.zoom * binary_ce_from_logit(c.zoom_logit, sample.zoom_label);
  const double d_zoom = weights.zoom * (sigmoid(c.zoom_logit) - sample.zoom_label);

  std::array<double, kNumPriors> d_conf{};
  std::array<double, kRegressionOutputs> d_reg{};
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    const int y = sample.confidence[p];
    loss.conf_ce += weights.conf * binary_ce_from_logit(c.conf_logits[p], y);
    d_conf[p] = weights.conf * (sigmoid(c.conf_logits[p]) - y);
    if (y != 1) continue;
    const auto& t = *sample.regression[p];
    const std::array<double, 4> target = {t.tx, t.ty, t.tw, t.th};
    for (std::size_t k = 0; k < 4; ++k) {
      const double diff = c.regression[4 * p + k] - target[k];
      loss.bbox_smooth_l1 += weights.bbox * smooth_l1(diff);
      d_reg[4 * p + k] = weights.bbox * smooth_l1_grad(diff);
    }
  }

  if (grads == nullptr) return loss;
  require_same_shape(params, *grads);

  std::vector<double> d_hidden(h, 0.0);
  auto head = [&](double d, const std::vector<double>& w, std::vector<double>& gw,
                  std::vector<double>& gb, std::size_t row) {
    if (d == 0.0) return;
    const double* wr = w.data() + row * h;
    double* gr = gw.data() + row * h;
    for (int k = 0; k < h; ++k) {
      gr[k] += d * c.hidden[k];
      d_hidden[k] += d * wr[k];
    }
    gb[row] += d;
  };
  head(d_zoom, params.w_zoom, grads->w_zoom, grads->b_zoom, 0);
  for (std::size_t p = 0; p < kNumPriors; ++p) head(d_conf[p], params.w_conf, grads->w_conf, grads->b_conf, p);
  for (std::size_t o = 0; o < d_reg.size(); ++o) head(d_reg[o], params.w_reg, grads->w_reg, grads->b_reg, o);

  for (int i = 0; i < h; ++i) {
    if (c.hidden_pre[i] <= 0.0) continue;
    const double d = d_hidden[i];
    double* gr = grads->w1.data() + static_cast<std::size_t>(i) * in;
    for (int k = 0; k < in; ++k) gr[k] += d * c.features[k];
    grads->b1[i] += d;
  }
  return loss;
}

double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

// Forward pass plus loss written out separately from forward() and
// multitask_loss(), in long double, for the finite-difference side of the
// gradient check. `active` receives the ReLU on/off pattern.
long double reference_loss(const ModelParameters& p, std::span<const double> features,
                           const TrainingSample& s, const LossWeights& w,
                           std::vector<char>& active) {
  using R = long double;
  const int in = p.input_size();
  const int h = p.hidden;
  std::vector<R> hidden(h);
  active.assign(static_cast<std::size_t>(h), 0);
  for (int i = 0; i < h; ++i) {
    R acc = p.b1[i];
    for (int k = 0; k < in; ++k) acc += static_cast<R>(p.w1[static_cast<std::size_t>(i) * in + k]) * features[k];
    hidden[i] = acc > 0 ? acc : 0;
    active[i] = acc > 0;
  }
  auto logit = [&](const std::vector<double>& wm, const std::vector<double>& b, std::size_t row) {
    R acc = b[row];
    for (int k = 0; k < h; ++k) acc += static_cast<R>(wm[row * h + k]) * hidden[k];
    return acc;
  };
  auto bce = [](R z, int y) {
    // -y log(sigma(z)) - (1-y) log(1 - sigma(z))
    const R log_sig = -std::log1p(std::exp(-z));
    const R log_one_minus = -std::log1p(std::exp(z));
    return -(y * log_sig) - (1 - y) * log_one_minus;
  };
  auto sl1 = [](R x) {
    const R a = x < 0 ? -x : x;
    return a < 1 ? R(0.5) * x * x : a - R(0.5);
  };

  R total = w.zoom * bce(logit(p.w_zoom, p.b_zoom, 0), s.zoom_label);
  for (std::size_t q = 0; q < kNumPriors; ++q) {
    total += w.conf * bce(logit(p.w_conf, p.b_conf, q), s.confidence[q]);
    if (s.confidence[q] != 1) continue;
    const auto& t = *s.regression[q];
    const R target[4] = {t.tx, t.ty, t.tw, t.th};
    for (std::size_t k = 0; k < 4; ++k) {
      total += w.bbox * sl1(logit(p.w_reg, p.b_reg, 4 * q + k) - target[k]);
    }
  }
  return total;
}

}  // namespace

GradCheckResult grad_check(const ModelParameters& params, std::span<const double> features,
                           const TrainingSample& sample, double epsilon,
                           const GradCheckOptions& options) {
  if (!(epsilon > 0.0)) throw ConfigError("grad_check: epsilon must be > 0");
  params.validate();
  check_positive_targets(sample);

  ModelParameters analytic =
      ModelParameters::zeros(params.grid, params.hidden, params.channels);
  multitask_loss(params, forward(params, features), sample, &analytic, options.weights);
  if (options.corrupt_block) {
    for (double& g : analytic.blocks().at(*options.corrupt_block)) g *= options.corrupt_factor;
  }

  // (block, index) pairs to check.
  std::vector<std::pair<std::size_t, std::size_t>> targets;
  const auto views = params.blocks();
  for (std::size_t b = 0; b < ModelParameters::kBlocks; ++b) {
    for (std::size_t i = 0; i < views[b].size(); ++i) targets.emplace_back(b, i);
  }
  if (options.max_params > 0 && options.max_params < targets.size()) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_params; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(targets.size() - 1)));
      std::swap(targets[i], targets[j]);
    }
    targets.resize(options.max_params);
  }

  GradCheckResult result;
  ModelParameters probe = params;
  const auto analytic_views = analytic.blocks();
  std::vector<char> base_active, plus_active, minus_active;
  reference_loss(params, features, sample, options.weights, base_active);
  for (const auto& [b, i] : targets) {
    double& theta = probe.blocks()[b][i];
    const double saved = theta;
    theta = saved + epsilon;
    const long double plus = reference_loss(probe, features, sample, options.weights, plus_active);
    theta = saved - epsilon;
    const long double minus = reference_loss(probe, features, sample, options.weights, minus_active);
    theta = saved;
    if (plus_active != base_active || minus_active != base_active) {
      ++result.kinks_skipped;
      continue;
    }
    const double numeric = static_cast<double>((plus - minus) / (2.0L * epsilon));
    const double err = relative_error(analytic_views[b][i], numeric);
    ++result.checked;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_block = ModelParameters::block_names()[b];
      result.worst_index = i;
    }
  }
  return result;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight decay must be >= 0");
  if (minibatch < 1) throw ConfigError("train: minibatch must be >= 1");
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (grid < 1 || hidden < 1) throw ConfigError("train: g and H must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("train: noise_sigma must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"minibatch", c.minibatch},
       {"iterations", c.iterations},
       {"seed", c.seed},
       {"g", c.grid},
       {"H", c.hidden},
       {"noise_sigma", c.noise_sigma},
       {"loss_weights", {c.weights.zoom, c.weights.conf, c.weights.bbox}}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.minibatch = j.value("minibatch", c.minibatch);
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.grid = j.value("g", c.grid);
    c.hidden = j.value("H", c.hidden);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    if (j.contains("loss_weights")) {
      const auto w = j.at("loss_weights").get<std::array<double, 3>>();
      c.weights = LossWeights{w[0], w[1], w[2]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
}

std::vector<TrainingExample> featurize(const std::vector<TrainingSample>& samples,
                                       const std::vector<Scene>& scenes, int grid,
                                       double noise_sigma, std::uint64_t seed, int threads) {
  std::map<std::string, const Scene*> by_id;
  for (const auto& s : scenes) by_id.emplace(s.id, &s);

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].scene_id].push_back(i);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> group_list;
  for (const auto& g : groups) group_list.push_back(&g);

  std::vector<TrainingExample> out(samples.size());
  parallel_for(group_list.size(), threads, [&](std::size_t gi) {
    const auto& [scene_id, members] = *group_list[gi];
    const Scene scene = resolve_scene(by_id, scene_id);
    const PoolingIndex index(render(scene, noise_sigma, render_seed(seed, scene_id)));
    for (std::size_t i : members) {
      out[i].sample = samples[i];
      out[i].features = index.pool(samples[i].anchor, grid);
    }
  });
  return out;
}

TrainResult sgd_train(const std::vector<TrainingExample>& data, const TrainConfig& config,
                      const ModelParameters* initial) {
  config.validate();
  if (data.empty()) throw DataError("sgd_train: the training set is empty");

  TrainResult result;
  result.params = initial ? *initial
                          : ModelParameters::initialized(config.grid, config.hidden,
                                                         kRenderChannels, config.seed);
  auto& params = result.params;
  params.validate();
  for (const auto& ex : data) {
    if (ex.features.size() != static_cast<std::size_t>(params.input_size())) {
      throw ConfigError("training features have length " + std::to_string(ex.features.size()) +
                        ", model expects " + std::to_string(params.input_size()));
    }
  }

  ModelParameters velocity = ModelParameters::zeros(params.grid, params.hidden, params.channels);
  ModelParameters grads = velocity;
  const std::array<bool, ModelParameters::kBlocks> decays = {true, false, true, false,
                                                             true, false, true, false};

  Rng rng(derive_seed(config.seed, streams::minibatch));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle on first use

  const double scale = 1.0 / config.minibatch;
  result.log.reserve(config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    for (auto block : grads.blocks()) std::fill(block.begin(), block.end(), 0.0);
    LossBreakdown batch_loss;
    for (int b = 0; b < config.minibatch; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
          std::swap(order[i - 1], order[j]);
        }
        cursor = 0;
      }
      const auto& ex = data[order[cursor++]];
      batch_loss += multitask_loss(params, forward(params, ex.features), ex.sample, &grads,
                                   config.weights);
    }
    batch_loss *= scale;
    if (!std::isfinite(batch_loss.total())) {
      throw NumericError("training loss became non-finite at iteration " + std::to_string(it));
    }
    result.log.push_back(batch_loss);

    auto p_blocks = params.blocks();
    auto g_blocks = grads.blocks();
    auto v_blocks = velocity.blocks();
    for (std::size_t b = 0; b < ModelParameters::kBlocks; ++b) {
      const double wd = decays[b] ? config.weight_decay : 0.0;
      for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
        const double g = g_blocks[b][i] * scale + wd * p_blocks[b][i];
        v_blocks[b][i] = config.momentum * v_blocks[b][i] - config.learning_rate * g;
        p_blocks[b][i] += v_blocks[b][i];
      }
    }
  }
  return result;
}

double zoom_accuracy(const ModelParameters& params, const std::vector<TrainingExample>& data,
                     double threshold) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const int predicted = forward(params, ex.features).output.zoom >= threshold ? 1 : 0;
    if (predicted == ex.sample.zoom_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string loss_log_csv(const std::vector<LossBreakdown>& log) {
  std::string out = "iteration,zoom_ce,conf_ce,bbox,total\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& l = log[i];
    out += std::to_string(i) + ',' + io::format_double(l.zoom_ce) + ',' +
           io::format_double(l.conf_ce) + ',' + io::format_double(l.bbox_smooth_l1) + ',' +
           io::format_double(l.total()) + '\n';
  }
  return out;
}

}  // namespace azsearch
