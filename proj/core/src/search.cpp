#include "azsearch/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/parallel.hpp"

namespace azsearch {

double SearchParams::resolved_min_side(double frame_width, double frame_height) const {
  return min_region_side.value_or(std::min(frame_width, frame_height) / 16.0);
}

void SearchParams::validate() const {
  if (!(zoom_threshold >= 0.0 && zoom_threshold <= 1.0)) {
    throw ConfigError("search: zoom_threshold must be in [0,1]");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ConfigError("search: confidence_threshold must be in [0,1]");
  }
  if (min_region_side && !(*min_region_side > 0.0)) {
    throw ConfigError("search: min_region_side must be > 0");
  }
  if (max_steps < 1) throw ConfigError("search: max_steps must be >= 1");
  if (top_k < 1) throw ConfigError("search: top_k must be >= 1");
}

void to_json(nlohmann::json& j, const SearchParams& p) {
  j = {{"zoom_threshold", p.zoom_threshold},
       {"confidence_threshold", p.confidence_threshold},
       {"max_steps", p.max_steps},
       {"top_k", p.top_k}};
  if (p.min_region_side) {
    j["min_region_side"] = *p.min_region_side;
  } else {
    j["min_region_side"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, SearchParams& p) {
  p = SearchParams{};
  try {
    p.zoom_threshold = j.value("zoom_threshold", p.zoom_threshold);
    p.confidence_threshold = j.value("confidence_threshold", p.confidence_threshold);
    p.max_steps = j.value("max_steps", p.max_steps);
    p.top_k = j.value("top_k", p.top_k);
    if (j.contains("min_region_side") && !j.at("min_region_side").is_null()) {
      p.min_region_side = j.at("min_region_side").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search params: ") + e.what());
  }
  p.validate();
}

namespace {

ZoomAdjacencyOutput evaluate(const Predictor& predictor, const SceneContext& ctx,
                             const Box& anchor, int anchor_id) {
  auto context = [&] {
    std::ostringstream msg;
    msg << "predictor '" << predictor.name() << "' failed on anchor " << anchor_id << ' '
        << anchor;
    if (ctx.scene) msg << " of scene '" << ctx.scene->id << "'";
    return msg.str();
  };
  try {
    auto out = predictor.predict(ctx, anchor);
    validate_output(out);
    return out;
  } catch (const Error& e) {
    throw_error(e.category(), context() + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericError(context() + ": " + e.what());
  }
}

// Appends the confident adjacency predictions of one anchor; returns how many.
std::size_t emit_proposals(const ZoomAdjacencyOutput& out, const Box& anchor, int anchor_id,
                           const Box& frame, double threshold, const PriorTable& priors,
                           std::vector<Proposal>& sink) {
  std::size_t emitted = 0;
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    const auto& a = out.adjacency[p];
    if (a.confidence < threshold) continue;
    Box decoded;
    try {
      decoded = decode_box(instantiate_prior(anchor, priors[p]), a.regression);
    } catch (const NumericError& e) {
      throw NumericError("anchor " + std::to_string(anchor_id) + ", prior " +
                         std::to_string(p) + ": " + e.what());
    }
    const auto clipped = clip_to_frame(decoded, frame.width(), frame.height());
    if (!clipped) continue;
    sink.push_back(Proposal{*clipped, a.confidence, anchor_id, static_cast<int>(p)});
    ++emitted;
  }
  return emitted;
}

const Scene& require_scene(const SceneContext& ctx) {
  if (ctx.scene == nullptr) throw ConfigError("search needs a scene context");
  return *ctx.scene;
}

}  // namespace

SearchResult adaptive_search(const Predictor& predictor, const SceneContext& ctx,
                             const SearchParams& params, const PriorTable& priors) {
  params.validate();
  const Scene& scene = require_scene(ctx);
  const Box frame = scene.frame();
  const double min_side = params.resolved_min_side(frame.width(), frame.height());

  SearchResult result;
  auto& trace = result.trace;

  std::vector<std::pair<Box, int>> frontier{{frame, -1}};  // (box, parent id)
  for (int k = 0; k < params.max_steps && !frontier.empty(); ++k) {
    SearchStep step;
    std::vector<std::pair<Box, int>> next;
    for (const auto& [box, parent] : frontier) {
      const int id = static_cast<int>(trace.anchors.size());
      trace.anchors.push_back(AnchorRecord{box, k, parent});
      step.anchors.push_back(id);

      const auto out = evaluate(predictor, ctx, box, id);
      step.proposals += emit_proposals(out, box, id, frame, params.confidence_threshold,
                                       priors, result.proposals);

      const bool children_large_enough = 0.5 * std::min(box.width(), box.height()) >= min_side;
      if (out.zoom >= params.zoom_threshold && children_large_enough) {
        step.zoomed.push_back(id);
        for (const auto& child : divide_region(box)) next.emplace_back(child, id);
      }
    }
    trace.steps.push_back(std::move(step));
    frontier = std::move(next);
  }
  return result;
}

std::vector<Proposal> rank_proposals(std::vector<Proposal> proposals, std::size_t k) {
  std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.anchor_id != b.anchor_id) return a.anchor_id < b.anchor_id;
    return a.prior_index < b.prior_index;
  });
  if (proposals.size() > k) proposals.resize(k);
  return proposals;
}

void GridConfig::validate() const {
  if (scales.empty() || ratios.empty()) throw ConfigError("grid: scales and ratios must be non-empty");
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("grid: scales must be > 0");
  }
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("grid: ratios must be > 0");
  }
  if (!(stride > 0.0)) throw ConfigError("grid: stride must be > 0");
}

void to_json(nlohmann::json& j, const GridConfig& g) {
  j = {{"scales", g.scales}, {"ratios", g.ratios}, {"stride", g.stride}};
}

void from_json(const nlohmann::json& j, GridConfig& g) {
  g = GridConfig{};
  try {
    if (j.contains("scales")) g.scales = j.at("scales").get<std::vector<double>>();
    if (j.contains("ratios")) g.ratios = j.at("ratios").get<std::vector<double>>();
    g.stride = j.value("stride", g.stride);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid config: ") + e.what());
  }
  g.validate();
}

std::vector<Box> grid_anchors(double frame_width, double frame_height, const GridConfig& grid) {
  grid.validate();
  const auto nx = static_cast<int>(std::ceil(frame_width / grid.stride));
  const auto ny = static_cast<int>(std::ceil(frame_height / grid.stride));
  std::vector<Box> anchors;
  anchors.reserve(static_cast<std::size_t>(nx) * ny * grid.scales.size() * grid.ratios.size());
  for (int j = 0; j < ny; ++j) {
    const double cy = (j + 0.5) * grid.stride;
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * grid.stride;
      for (double scale : grid.scales) {
        for (double ratio : grid.ratios) {
          const double w = scale / std::sqrt(ratio);
          const double h = scale * std::sqrt(ratio);
          if (auto clipped = clip_to_frame(box_from_center(cx, cy, w, h), frame_width,
                                           frame_height)) {
            anchors.push_back(*clipped);
          }
        }
      }
    }
  }
  return anchors;
}

GridConfig resize_grid(const GridConfig& grid, double frame_width, double frame_height,
                       double target) {
  grid.validate();
  const double per_position = static_cast<double>(grid.scales.size() * grid.ratios.size());
  GridConfig best = grid;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_count = 0.0;
  const auto max_positions = static_cast<int>(std::ceil(std::max(frame_width, frame_height)));
  // Position counts per axis change only at strides side / n.
  for (int n = 1; n <= max_positions; ++n) {
    const double stride = std::max(frame_width, frame_height) / n;
    const double count = std::ceil(frame_width / stride) * std::ceil(frame_height / stride) *
                         per_position;
    const double gap = std::abs(count - target);
    if (gap < best_gap || (gap == best_gap && count < best_count)) {
      best_gap = gap;
      best_count = count;
      best.stride = stride;
    }
    if (count > target) break;
  }
  return best;
}

SearchResult fixed_grid_search(const Predictor& predictor, const SceneContext& ctx,
                               const GridConfig& grid, const SearchParams& params,
                               const PriorTable& priors) {
  params.validate();
  const Scene& scene = require_scene(ctx);
  const Box frame = scene.frame();
  SearchResult result;
  SearchStep step;
  for (const Box& anchor : grid_anchors(frame.width(), frame.height(), grid)) {
    const int id = static_cast<int>(result.trace.anchors.size());
    result.trace.anchors.push_back(AnchorRecord{anchor, 0, -1});
    step.anchors.push_back(id);
    const auto out = evaluate(predictor, ctx, anchor, id);
    step.proposals += emit_proposals(out, anchor, id, frame, params.confidence_threshold, priors,
                                     result.proposals);
  }
  result.trace.steps.push_back(std::move(step));
  return result;
}

nlohmann::json trace_to_json(const SearchTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"B", s.anchors.size()}, {"Z", s.zoomed.size()}, {"Y", s.proposals}});
  }
  return {{"steps", steps}, {"anchors_evaluated", trace.anchors_evaluated()}};
}

std::vector<SceneSearch> search_scenes(const Predictor& predictor, const std::vector<Scene>& scenes,
                                       const SearchRunOptions& options, const PriorTable& priors) {
  options.params.validate();
  if (options.grid) options.grid->validate();
  std::vector<SceneSearch> out(scenes.size());
  parallel_for(scenes.size(), options.threads, [&](std::size_t i) {
    const Scene& scene = scenes[i];
    std::optional<PoolingIndex> pooling;
    if (predictor.needs_features()) {
      pooling.emplace(render(scene, options.noise_sigma, render_seed(options.seed, scene.id)));
    }
    const SceneContext ctx{&scene, pooling ? &*pooling : nullptr};
    SearchResult result = options.grid
                              ? fixed_grid_search(predictor, ctx, *options.grid, options.params, priors)
                              : adaptive_search(predictor, ctx, options.params, priors);
    out[i].scene_id = scene.id;
    out[i].proposals = rank_proposals(std::move(result.proposals),
                                      static_cast<std::size_t>(options.params.top_k));
    out[i].trace = std::move(result.trace);
  });
  return out;
}

}  // namespace azsearch
