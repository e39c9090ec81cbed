#include "azsearch/labels.hpp"

#include <algorithm>
#include <vector>

namespace azsearch {

int zoom_label(const Box& region, std::span<const SceneObject> objects) {
  const double cap = kZoomAreaCap * region.area();
  for (const auto& obj : objects) {
    const double area = obj.box.area();
    if (area > cap) continue;
    if (intersection_area(obj.box, region) >= kZoomInclusionRatio * area) return 1;
  }
  return 0;
}

AdjacencyLabels assign_adjacency(const Box& anchor, std::span<const SceneObject> objects,
                                 double iou_threshold, const PriorTable& priors) {
  AdjacencyLabels labels{};

  std::array<Box, kNumPriors> prior_boxes;
  for (std::size_t p = 0; p < kNumPriors; ++p) prior_boxes[p] = instantiate_prior(anchor, priors[p]);

  std::vector<int> candidates;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    double best = iou(objects[i].box, anchor);
    for (const auto& pb : prior_boxes) best = std::max(best, iou(objects[i].box, pb));
    if (best >= iou_threshold) candidates.push_back(static_cast<int>(i));
  }

  // IoU table, candidates x priors. Ties go to the lower (object, prior) pair.
  std::vector<std::array<double, kNumPriors>> overlap(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t p = 0; p < kNumPriors; ++p) {
      overlap[c][p] = iou(objects[candidates[c]].box, prior_boxes[p]);
    }
  }

  std::vector<bool> object_used(candidates.size(), false);
  std::array<bool, kNumPriors> prior_used{};
  for (;;) {
    double best = 0.0;
    int best_c = -1;
    int best_p = -1;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (object_used[c]) continue;
      for (std::size_t p = 0; p < kNumPriors; ++p) {
        if (prior_used[p]) continue;
        if (overlap[c][p] > best) {
          best = overlap[c][p];
          best_c = static_cast<int>(c);
          best_p = static_cast<int>(p);
        }
      }
    }
    if (best_c < 0) break;
    object_used[best_c] = true;
    prior_used[best_p] = true;
    const int obj = candidates[best_c];
    auto& label = labels[best_p];
    label.confidence = 1;
    label.object = obj;
    label.regression = encode_box(prior_boxes[best_p], objects[obj].box);
  }
  return labels;
}

Box inverse_match(const Box& object, const PriorTemplate& prior) noexcept {
  const double w = object.width() / prior.rect.width();
  const double h = object.height() / prior.rect.height();
  const double x1 = object.x1 - prior.rect.x1 * w;
  const double y1 = object.y1 - prior.rect.y1 * h;
  return Box{x1, y1, x1 + w, y1 + h};
}

}  // namespace azsearch
