#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/dataset.hpp"
#include "azsearch/geometry.hpp"
#include "azsearch/labels.hpp"

namespace azsearch {

enum class SampleSource { inverse_match, mined };

const char* to_string(SampleSource source) noexcept;

struct TrainingSample {
  std::string scene_id;
  Box anchor;
  int zoom_label = 0;
  std::array<int, kNumPriors> confidence{};
  /// Present exactly where confidence == 1.
  std::array<std::optional<RegressionTarget>, kNumPriors> regression{};
  SampleSource source = SampleSource::inverse_match;

  /// Throws DataError on a broken invariant.
  void validate() const;

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

void to_json(nlohmann::json& j, const TrainingSample& s);
void from_json(const nlohmann::json& j, TrainingSample& s);

/// Labels an arbitrary anchor against a scene's objects.
TrainingSample label_anchor(const Scene& scene, const Box& anchor, SampleSource source,
                            double iou_threshold = kDefaultAssignIou,
                            const PriorTable& priors = default_priors());

/// One sample per (object, prior): the anchor that sees the object as a
/// perfect fit of that prior. Anchors may extend past the frame.
std::vector<TrainingSample> build_inverse_samples(const Scene& scene,
                                                  double iou_threshold = kDefaultAssignIou,
                                                  const PriorTable& priors = default_priors());

struct MiningOptions {
  double flip_prob = 0.3;
  int repeats = 3;
  /// Unset means min(frame width, frame height) / 16, as in the search.
  std::optional<double> min_region_side;
  int max_steps = 8;
  double iou_threshold = kDefaultAssignIou;

  void validate() const;
};

struct MiningStats {
  std::size_t decisions = 0;
  std::size_t flips = 0;
};

/// Label-driven traversal: the search loop with the zoom prediction replaced
/// by the true zoom label, flipped with probability flip_prob. The root
/// frame is stored as a sample and traversal starts from its five children.
/// Each repeat uses its own random substream. Stored labels are always the
/// true labels; an anchor visited by several repeats is stored once.
std::vector<TrainingSample> mine_samples(const Scene& scene, const MiningOptions& options,
                                         std::uint64_t seed, MiningStats* stats = nullptr,
                                         const PriorTable& priors = default_priors());

inline constexpr const char* kFlipSuffix = ":hflip";

struct TrainingSetOptions {
  bool inverse = true;
  bool mining = true;
  bool hflip = true;
  MiningOptions mining_options;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainingSetOptions& o);
void from_json(const nlohmann::json& j, TrainingSetOptions& o);

/// Inverse and mined samples for every scene (and its mirror image, whose
/// id carries kFlipSuffix), then a seeded shuffle.
std::vector<TrainingSample> build_training_set(const std::vector<Scene>& scenes,
                                               const TrainingSetOptions& options,
                                               std::uint64_t seed, int threads = 1,
                                               const PriorTable& priors = default_priors());

/// Looks up a sample's scene id, applying hflip for kFlipSuffix ids.
/// Throws DataError when the base id is unknown.
Scene resolve_scene(const std::map<std::string, const Scene*>& by_id, const std::string& id);

}  // namespace azsearch
