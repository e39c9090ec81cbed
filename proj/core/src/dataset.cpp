#include "azsearch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/io.hpp"
#include "azsearch/parallel.hpp"
#include "azsearch/rng.hpp"

namespace azsearch {

SceneConfig SceneConfig::defaults() {
  SceneConfig config;
  config.buckets = {
      {"small", 2, 16.0, 31.0},
      {"medium", 2, 40.0, 90.0},
      {"large", 1, 110.0, 220.0},
  };
  return config;
}

void SceneConfig::validate() const {
  if (width <= 0 || height <= 0) {
    throw ConfigError("scene config: frame must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  if (num_classes < 1) throw ConfigError("scene config: num_classes must be >= 1");
  if (!(min_intensity > 0.0) || !(max_intensity <= 1.0) || min_intensity > max_intensity) {
    throw ConfigError("scene config: intensity range must satisfy 0 < min <= max <= 1");
  }
  const double frame_side = std::min(width, height);
  for (const auto& b : buckets) {
    if (b.count < 0) throw ConfigError("scene config: bucket '" + b.name + "' has negative count");
    if (!(b.min_side >= 1.0) || b.min_side > b.max_side) {
      throw ConfigError("scene config: bucket '" + b.name +
                        "' needs 1 <= min_side <= max_side");
    }
    if (b.max_side > frame_side) {
      throw ConfigError("scene config: bucket '" + b.name + "' max_side " +
                        io::format_double(b.max_side) + " exceeds the frame");
    }
    if (std::ceil(b.min_side) > std::floor(b.max_side)) {
      throw ConfigError("scene config: bucket '" + b.name + "' admits no integer side");
    }
  }
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : c.buckets) {
    buckets.push_back(
        {{"name", b.name}, {"count", b.count}, {"min_side", b.min_side}, {"max_side", b.max_side}});
  }
  j = {{"width", c.width},
       {"height", c.height},
       {"num_classes", c.num_classes},
       {"min_intensity", c.min_intensity},
       {"max_intensity", c.max_intensity},
       {"buckets", buckets}};
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  c = SceneConfig::defaults();
  try {
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.min_intensity = j.value("min_intensity", c.min_intensity);
    c.max_intensity = j.value("max_intensity", c.max_intensity);
    if (j.contains("buckets")) {
      c.buckets.clear();
      for (const auto& b : j.at("buckets")) {
        c.buckets.push_back({b.value("name", std::string{}), b.at("count").get<int>(),
                             b.at("min_side").get<double>(), b.at("max_side").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  c.validate();
}

std::string scene_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", index);
  return buf;
}

namespace {

Scene generate_one(const SceneConfig& config, const std::string& id, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene{id, config.width, config.height, {}};
  for (const auto& bucket : config.buckets) {
    const auto lo = static_cast<std::int64_t>(std::ceil(bucket.min_side));
    const auto hi = static_cast<std::int64_t>(std::floor(bucket.max_side));
    for (int i = 0; i < bucket.count; ++i) {
      const auto w = rng.uniform_int(lo, hi);
      const auto h = rng.uniform_int(lo, hi);
      const auto x = rng.uniform_int(0, config.width - w);
      const auto y = rng.uniform_int(0, config.height - h);
      SceneObject obj;
      obj.box = Box{static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + w),
                    static_cast<double>(y + h)};
      obj.class_id = static_cast<int>(rng.uniform_int(0, config.num_classes - 1));
      obj.intensity = rng.uniform(config.min_intensity, config.max_intensity);
      scene.objects.push_back(obj);
    }
  }
  return scene;
}

}  // namespace

std::vector<Scene> generate_scenes(const SceneConfig& config, std::size_t n, std::uint64_t seed,
                                   int threads) {
  config.validate();
  std::vector<Scene> scenes(n);
  const std::uint64_t base = derive_seed(seed, streams::scene);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::string id = scene_id_for(i);
    scenes[i] = generate_one(config, id, derive_seed(base, hash_string(id)));
  });
  return scenes;
}

FeatureGrid::FeatureGrid(int channels, int width, int height, float fill)
    : channels_(channels), width_(width), height_(height) {
  if (channels <= 0 || width <= 0 || height <= 0) {
    throw DataError("feature grid dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(channels) * width * height, fill);
}

std::uint64_t render_seed(std::uint64_t seed, const std::string& scene_id) {
  return derive_seed(derive_seed(seed, streams::render), hash_string(scene_id));
}

FeatureGrid render(const Scene& scene, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("render: noise_sigma must be >= 0");
  const int w = scene.width;
  const int h = scene.height;
  FeatureGrid grid(kRenderChannels, w, h);

  // A pixel belongs to a box when its center lies in [x1, x2) x [y1, y2).
  for (const auto& obj : scene.objects) {
    const int px0 = std::max(0, static_cast<int>(std::ceil(obj.box.x1 - 0.5)));
    const int px1 = std::min(w, static_cast<int>(std::ceil(obj.box.x2 - 0.5)));
    const int py0 = std::max(0, static_cast<int>(std::ceil(obj.box.y1 - 0.5)));
    const int py1 = std::min(h, static_cast<int>(std::ceil(obj.box.y2 - 0.5)));
    const auto value = static_cast<float>(obj.intensity);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        float& v = grid.at(0, x, y);
        v = std::max(v, value);
      }
    }
  }

  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        grid.at(0, x, y) += static_cast<float>(noise_sigma * rng.normal());
      }
    }
  }

  auto base = [&](int x, int y) {
    return static_cast<double>(grid.at(0, std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (base(x + 1, y) - base(x - 1, y));
      const double gy = 0.5 * (base(x, y + 1) - base(x, y - 1));
      grid.at(1, x, y) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  }
  return grid;
}

Scene hflip(const Scene& scene) {
  Scene out = scene;
  for (auto& obj : out.objects) obj.box = hflip_box(obj.box, scene.width);
  return out;
}

void validate_scene(const Scene& scene) {
  const std::string where = "scene '" + scene.id + "'";
  if (scene.id.empty()) throw DataError("scene with empty id");
  if (scene.width <= 0 || scene.height <= 0) {
    throw DataError(where + ": frame size must be positive");
  }
  const Box frame = scene.frame();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    const std::string what = where + " object " + std::to_string(i);
    if (!obj.box.valid()) throw DataError(what + ": box needs x2 > x1 and y2 > y1");
    if (!frame.contains(obj.box)) throw DataError(what + ": box lies outside the frame");
    if (!(obj.intensity > 0.0 && obj.intensity <= 1.0)) {
      throw DataError(what + ": intensity must be in (0, 1]");
    }
    if (obj.class_id < 0) throw DataError(what + ": class_id must be >= 0");
  }
}

void validate_scenes(const std::vector<Scene>& scenes) {
  std::set<std::string> seen;
  for (const auto& s : scenes) {
    validate_scene(s);
    if (!seen.insert(s.id).second) throw DataError("duplicate scene id '" + s.id + "'");
  }
}

void to_json(nlohmann::json& j, const Scene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& obj : scene.objects) {
    objects.push_back({{"box", obj.box}, {"class_id", obj.class_id}, {"intensity", obj.intensity}});
  }
  j = {{"id", scene.id}, {"width", scene.width}, {"height", scene.height}, {"objects", objects}};
}

void from_json(const nlohmann::json& j, Scene& scene) {
  scene = Scene{};
  if (j.is_object() && j.contains("id") && j.at("id").is_string()) {
    scene.id = j.at("id").get<std::string>();
  }
  const std::string where = "scene '" + scene.id + "'";
  try {
    scene.id = j.at("id").get<std::string>();
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      const auto& b = o.at("box");
      if (!b.is_array() || b.size() != 4) throw DataError("box must be [x1,y1,x2,y2]");
      obj.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                    b[3].get<double>()};
      obj.class_id = o.at("class_id").get<int>();
      obj.intensity = o.at("intensity").get<double>();
      scene.objects.push_back(obj);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  validate_scene(scene);
}

std::vector<Scene> scenes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("a scene dataset must be a JSON array");
  std::vector<Scene> scenes;
  scenes.reserve(j.size());
  for (const auto& e : j) scenes.push_back(e.get<Scene>());
  validate_scenes(scenes);
  return scenes;
}

nlohmann::json scenes_to_json(const std::vector<Scene>& scenes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scenes) arr.push_back(s);
  return arr;
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) {
  return scenes_from_json(io::read_json(path));
}

void save_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
  io::write_text(path, scenes_to_json(scenes).dump() + "\n");
}

}  // namespace azsearch
