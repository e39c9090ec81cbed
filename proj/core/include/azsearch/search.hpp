#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/geometry.hpp"
#include "azsearch/predictor.hpp"

namespace azsearch {

struct SearchParams {
  double zoom_threshold = 0.5;
  double confidence_threshold = 0.05;
  /// Unset means min(frame width, frame height) / 16.
  std::optional<double> min_region_side;
  int max_steps = 8;
  int top_k = 300;

  double resolved_min_side(double frame_width, double frame_height) const;
  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const SearchParams& p);
void from_json(const nlohmann::json& j, SearchParams& p);

struct Proposal {
  Box box;
  double score = 0.0;
  int anchor_id = 0;
  int prior_index = 0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct AnchorRecord {
  Box box;
  int step = 0;
  int parent = -1;
};

struct SearchStep {
  std::vector<int> anchors;  // B_k, as anchor ids
  std::vector<int> zoomed;   // Z_k
  std::size_t proposals = 0; // |Y_k|
};

struct SearchTrace {
  std::vector<AnchorRecord> anchors;  // anchor id == index
  std::vector<SearchStep> steps;

  std::size_t anchors_evaluated() const noexcept { return anchors.size(); }
};

struct SearchResult {
  std::vector<Proposal> proposals;  // Y^K, in emission order
  SearchTrace trace;
};

/// Breadth-wise adaptive search. Starts from the whole frame; every anchor
/// in the frontier is scored, confident adjacency predictions are decoded
/// against their prior boxes and clipped to the frame, and anchors whose
/// zoom passes the threshold are divided into the next frontier, provided
/// the children would not fall below the minimum side. Stops when the
/// frontier empties or after max_steps frontiers.
SearchResult adaptive_search(const Predictor& predictor, const SceneContext& ctx,
                             const SearchParams& params,
                             const PriorTable& priors = default_priors());

/// Sorted by descending score, ties by (anchor id, prior index); at most k.
std::vector<Proposal> rank_proposals(std::vector<Proposal> proposals, std::size_t k);

/// RPN-style sliding-window anchors: at every stride position, one box per
/// (scale, ratio). `scale` is the side of the equal-area square and `ratio`
/// is height / width.
struct GridConfig {
  std::vector<double> scales = {64.0, 128.0, 256.0};
  std::vector<double> ratios = {0.5, 1.0, 2.0};
  double stride = 32.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GridConfig& g);
void from_json(const nlohmann::json& j, GridConfig& g);

/// Centers at ((i + 0.5) * stride, (j + 0.5) * stride) for every position
/// inside the frame; boxes clipped to the frame.
std::vector<Box> grid_anchors(double frame_width, double frame_height, const GridConfig& grid);

/// Same scales and ratios, stride chosen so the anchor count is as close as
/// possible to `target` (ties prefer the smaller count).
GridConfig resize_grid(const GridConfig& grid, double frame_width, double frame_height,
                       double target);

/// Non-adaptive baseline: every grid anchor is evaluated once in a single
/// step; proposals are produced exactly as in adaptive_search.
SearchResult fixed_grid_search(const Predictor& predictor, const SceneContext& ctx,
                               const GridConfig& grid, const SearchParams& params,
                               const PriorTable& priors = default_priors());

nlohmann::json trace_to_json(const SearchTrace& trace);

struct SearchRunOptions {
  SearchParams params;
  /// When set, the fixed grid replaces the adaptive search.
  std::optional<GridConfig> grid;
  /// Rendering of features for predictors that need them.
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SceneSearch {
  std::string scene_id;
  std::vector<Proposal> proposals;  // ranked, at most params.top_k
  SearchTrace trace;
};

/// Runs the search on every scene, in parallel over scenes. Output order
/// follows `scenes` and does not depend on the thread count.
std::vector<SceneSearch> search_scenes(const Predictor& predictor, const std::vector<Scene>& scenes,
                                       const SearchRunOptions& options,
                                       const PriorTable& priors = default_priors());

}  // namespace azsearch
