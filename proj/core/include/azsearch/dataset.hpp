#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/geometry.hpp"

namespace azsearch {

struct SceneObject {
  Box box;
  int class_id = 0;
  double intensity = 1.0;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<SceneObject> objects;

  Box frame() const noexcept {
    return Box{0.0, 0.0, static_cast<double>(width), static_cast<double>(height)};
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// One group of objects per scene. Width and height are drawn independently
/// as integers in [min_side, max_side], so areas fall in [min_side², max_side²].
struct SizeBucket {
  std::string name;
  int count = 0;
  double min_side = 0.0;
  double max_side = 0.0;
};

struct SceneConfig {
  int width = 512;
  int height = 512;
  int num_classes = 3;
  double min_intensity = 0.3;
  double max_intensity = 1.0;
  std::vector<SizeBucket> buckets;

  /// Mixed small/medium/large scenes on a 512x512 frame.
  static SceneConfig defaults();

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const SceneConfig& config);
void from_json(const nlohmann::json& j, SceneConfig& config);

std::string scene_id_for(std::size_t index);

/// Deterministic for fixed (config, n, seed). Scene i draws from a substream
/// keyed by its id, so the result does not depend on `threads`.
std::vector<Scene> generate_scenes(const SceneConfig& config, std::size_t n, std::uint64_t seed,
                                   int threads = 1);

/// Channel-major grid of float features.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int channels, int width, int height, float fill = 0.0f);

  int channels() const noexcept { return channels_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  float at(int c, int x, int y) const { return values_[index(c, x, y)]; }
  float& at(int c, int x, int y) { return values_[index(c, x, y)]; }

  const float* row(int c, int y) const { return values_.data() + index(c, 0, y); }
  const std::vector<float>& values() const noexcept { return values_; }

 private:
  std::size_t index(int c, int x, int y) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + static_cast<std::size_t>(y)) * width_ +
           static_cast<std::size_t>(x);
  }

  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

inline constexpr int kRenderChannels = 2;

/// Channel 0 holds the max object intensity at each pixel center plus
/// N(0, noise_sigma) noise; channel 1 is the central-difference gradient
/// magnitude of channel 0.
FeatureGrid render(const Scene& scene, double noise_sigma, std::uint64_t seed);

/// Seed used to render a scene's features under a global seed.
std::uint64_t render_seed(std::uint64_t seed, const std::string& scene_id);

/// Mirror every object about the vertical centerline of the frame.
Scene hflip(const Scene& scene);

/// Throws DataError naming the scene on any invariant violation.
void validate_scene(const Scene& scene);
/// Validates every scene plus id uniqueness.
void validate_scenes(const std::vector<Scene>& scenes);

void to_json(nlohmann::json& j, const Scene& scene);
void from_json(const nlohmann::json& j, Scene& scene);

std::vector<Scene> scenes_from_json(const nlohmann::json& j);
nlohmann::json scenes_to_json(const std::vector<Scene>& scenes);

std::vector<Scene> load_scenes(const std::filesystem::path& path);
void save_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path);

}  // namespace azsearch
