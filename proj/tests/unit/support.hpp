#pragma once

#include <filesystem>
#include <string>

#include "azsearch/dataset.hpp"
#include "azsearch/geometry.hpp"
#include "azsearch/rng.hpp"

namespace azsearch::testing {

inline Box random_box(Rng& rng, double extent = 500.0, double min_side = 0.5) {
  const double w = rng.uniform(min_side, extent / 2);
  const double h = rng.uniform(min_side, extent / 2);
  const double x = rng.uniform(-extent / 4, extent);
  const double y = rng.uniform(-extent / 4, extent);
  return Box{x, y, x + w, y + h};
}

inline SceneObject object_at(double x1, double y1, double x2, double y2) {
  return SceneObject{Box{x1, y1, x2, y2}, 0, 1.0};
}

inline Scene scene_with(std::vector<SceneObject> objects, int w = 512, int h = 512,
                        std::string id = "s") {
  return Scene{std::move(id), w, h, std::move(objects)};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("azsearch_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace azsearch::testing
