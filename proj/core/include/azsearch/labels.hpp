#pragma once

#include <array>
#include <optional>
#include <span>

#include "azsearch/dataset.hpp"
#include "azsearch/geometry.hpp"

namespace azsearch {

inline constexpr double kZoomInclusionRatio = 0.5;
inline constexpr double kZoomAreaCap = 0.25;
inline constexpr double kDefaultAssignIou = 0.25;

/// 1 iff some object has at least half of its area inside `region` and its
/// area is at most a quarter of the region's. Both bounds are inclusive.
int zoom_label(const Box& region, std::span<const SceneObject> objects);

struct PriorLabel {
  int confidence = 0;
  /// Set iff confidence == 1; encoded against the instantiated prior box.
  std::optional<RegressionTarget> regression;
  /// Index into the object list of the match, -1 when unmatched.
  int object = -1;
};

using AdjacencyLabels = std::array<PriorLabel, kNumPriors>;

/// An object is a candidate when its IoU with the anchor or with one of the
/// anchor's prior boxes reaches `iou_threshold`. Candidates are matched
/// greedily to prior boxes by descending IoU; every match consumes both the
/// object and the prior. Pairs with zero overlap are never matched.
AdjacencyLabels assign_adjacency(const Box& anchor, std::span<const SceneObject> objects,
                                 double iou_threshold = kDefaultAssignIou,
                                 const PriorTable& priors = default_priors());

/// The anchor for which `prior` instantiates exactly onto `object`.
Box inverse_match(const Box& object, const PriorTemplate& prior) noexcept;

}  // namespace azsearch
