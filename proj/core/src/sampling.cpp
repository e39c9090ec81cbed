#include "azsearch/sampling.hpp"

#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/parallel.hpp"
#include "azsearch/rng.hpp"

namespace azsearch {

const char* to_string(SampleSource source) noexcept {
  return source == SampleSource::mined ? "mined" : "inverse-match";
}

void TrainingSample::validate() const {
  const std::string where = "training sample of scene '" + scene_id + "'";
  if (!anchor.valid()) throw DataError(where + ": invalid anchor");
  if (zoom_label != 0 && zoom_label != 1) throw DataError(where + ": zoom label must be 0 or 1");
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    if (confidence[p] != 0 && confidence[p] != 1) {
      throw DataError(where + ": confidence label must be 0 or 1");
    }
    if ((confidence[p] == 1) != regression[p].has_value()) {
      throw DataError(where + ": prior " + std::to_string(p) +
                      " must carry a regression target iff it is positive");
    }
    if (regression[p] && !regression[p]->finite()) {
      throw DataError(where + ": prior " + std::to_string(p) + " has a non-finite target");
    }
  }
}

void to_json(nlohmann::json& j, const TrainingSample& s) {
  nlohmann::json reg = nlohmann::json::array();
  for (const auto& r : s.regression) {
    if (r) {
      reg.push_back(*r);
    } else {
      reg.push_back(nullptr);
    }
  }
  j = {{"scene_id", s.scene_id}, {"anchor", s.anchor},  {"zoom", s.zoom_label},
       {"conf", s.confidence},   {"reg", reg},          {"source", to_string(s.source)}};
}

void from_json(const nlohmann::json& j, TrainingSample& s) {
  s = TrainingSample{};
  try {
    s.scene_id = j.at("scene_id").get<std::string>();
    s.anchor = j.at("anchor").get<Box>();
    s.zoom_label = j.at("zoom").get<int>();
    const auto conf = j.at("conf").get<std::vector<int>>();
    const auto& reg = j.at("reg");
    if (conf.size() != kNumPriors || !reg.is_array() || reg.size() != kNumPriors) {
      throw DataError("conf and reg must each hold " + std::to_string(kNumPriors) + " entries");
    }
    for (std::size_t p = 0; p < kNumPriors; ++p) {
      s.confidence[p] = conf[p];
      if (!reg[p].is_null()) s.regression[p] = reg[p].get<RegressionTarget>();
    }
    const auto source = j.at("source").get<std::string>();
    if (source == "mined") {
      s.source = SampleSource::mined;
    } else if (source == "inverse-match") {
      s.source = SampleSource::inverse_match;
    } else {
      throw DataError("unknown sample source '" + source + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("training sample of scene '" + s.scene_id + "': " + e.what());
  } catch (const DataError& e) {
    throw DataError("training sample of scene '" + s.scene_id + "': " + e.what());
  }
  s.validate();
}

TrainingSample label_anchor(const Scene& scene, const Box& anchor, SampleSource source,
                            double iou_threshold, const PriorTable& priors) {
  TrainingSample s;
  s.scene_id = scene.id;
  s.anchor = anchor;
  s.source = source;
  s.zoom_label = zoom_label(anchor, scene.objects);
  const auto labels = assign_adjacency(anchor, scene.objects, iou_threshold, priors);
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    s.confidence[p] = labels[p].confidence;
    s.regression[p] = labels[p].regression;
  }
  return s;
}

std::vector<TrainingSample> build_inverse_samples(const Scene& scene, double iou_threshold,
                                                  const PriorTable& priors) {
  std::vector<TrainingSample> out;
  out.reserve(scene.objects.size() * kNumPriors);
  for (const auto& obj : scene.objects) {
    for (const auto& prior : priors) {
      out.push_back(label_anchor(scene, inverse_match(obj.box, prior),
                                 SampleSource::inverse_match, iou_threshold, priors));
    }
  }
  return out;
}

void MiningOptions::validate() const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("mining: flip_prob must be in [0,1]");
  if (repeats < 1) throw ConfigError("mining: repeats must be >= 1");
  if (min_region_side && !(*min_region_side > 0.0)) {
    throw ConfigError("mining: min_region_side must be > 0");
  }
  if (max_steps < 1) throw ConfigError("mining: max_steps must be >= 1");
}

std::vector<TrainingSample> mine_samples(const Scene& scene, const MiningOptions& options,
                                         std::uint64_t seed, MiningStats* stats,
                                         const PriorTable& priors) {
  options.validate();
  const Box frame = scene.frame();
  const double min_side =
      options.min_region_side.value_or(std::min(frame.width(), frame.height()) / 16.0);

  std::vector<TrainingSample> out;
  std::set<std::tuple<double, double, double, double>> seen;
  auto store = [&](const Box& anchor) {
    if (seen.emplace(anchor.x1, anchor.y1, anchor.x2, anchor.y2).second) {
      out.push_back(
          label_anchor(scene, anchor, SampleSource::mined, options.iou_threshold, priors));
    }
  };

  store(frame);
  const std::uint64_t scene_seed =
      derive_seed(derive_seed(seed, streams::mining), hash_string(scene.id));
  for (int r = 0; r < options.repeats; ++r) {
    Rng rng(derive_seed(scene_seed, static_cast<std::uint64_t>(r)));
    const auto roots = divide_region(frame);
    std::vector<Box> frontier(roots.begin(), roots.end());
    // Step 0 is the root frame, so the sub-images are step 1.
    for (int k = 1; k < options.max_steps && !frontier.empty(); ++k) {
      std::vector<Box> next;
      for (const Box& anchor : frontier) {
        store(anchor);
        const int label = zoom_label(anchor, scene.objects);
        const bool flip = rng.bernoulli(options.flip_prob);
        if (stats) {
          ++stats->decisions;
          if (flip) ++stats->flips;
        }
        const bool zoom = (label == 1) != flip;
        if (zoom && 0.5 * std::min(anchor.width(), anchor.height()) >= min_side) {
          for (const auto& child : divide_region(anchor)) next.push_back(child);
        }
      }
      frontier = std::move(next);
    }
  }
  return out;
}

void TrainingSetOptions::validate() const { mining_options.validate(); }

void to_json(nlohmann::json& j, const TrainingSetOptions& o) {
  const auto& m = o.mining_options;
  j = {{"inverse", o.inverse},
       {"mining", o.mining},
       {"hflip", o.hflip},
       {"flip_prob", m.flip_prob},
       {"repeats", m.repeats},
       {"max_steps", m.max_steps},
       {"iou_threshold", m.iou_threshold}};
  if (m.min_region_side) {
    j["min_region_side"] = *m.min_region_side;
  } else {
    j["min_region_side"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, TrainingSetOptions& o) {
  o = TrainingSetOptions{};
  auto& m = o.mining_options;
  try {
    o.inverse = j.value("inverse", o.inverse);
    o.mining = j.value("mining", o.mining);
    o.hflip = j.value("hflip", o.hflip);
    m.flip_prob = j.value("flip_prob", m.flip_prob);
    m.repeats = j.value("repeats", m.repeats);
    m.max_steps = j.value("max_steps", m.max_steps);
    m.iou_threshold = j.value("iou_threshold", m.iou_threshold);
    if (j.contains("min_region_side") && !j.at("min_region_side").is_null()) {
      m.min_region_side = j.at("min_region_side").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mining options: ") + e.what());
  }
  o.validate();
}

std::vector<TrainingSample> build_training_set(const std::vector<Scene>& scenes,
                                               const TrainingSetOptions& options,
                                               std::uint64_t seed, int threads,
                                               const PriorTable& priors) {
  options.validate();
  const std::size_t variants = options.hflip ? 2 : 1;
  std::vector<std::vector<TrainingSample>> per_scene(scenes.size() * variants);
  parallel_for(per_scene.size(), threads, [&](std::size_t i) {
    const Scene& base = scenes[i / variants];
    Scene scene = base;
    if (i % variants == 1) {
      scene = hflip(base);
      scene.id = base.id + kFlipSuffix;
    }
    auto& out = per_scene[i];
    if (options.inverse) {
      out = build_inverse_samples(scene, options.mining_options.iou_threshold, priors);
    }
    if (options.mining) {
      auto mined = mine_samples(scene, options.mining_options, seed, nullptr, priors);
      out.insert(out.end(), mined.begin(), mined.end());
    }
  });

  std::vector<TrainingSample> all;
  for (auto& v : per_scene) {
    all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  Rng rng(derive_seed(seed, streams::shuffle));
  for (std::size_t i = all.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(all[i - 1], all[j]);
  }
  return all;
}

Scene resolve_scene(const std::map<std::string, const Scene*>& by_id, const std::string& id) {
  const std::string_view suffix = kFlipSuffix;
  const bool flipped =
      id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0;
  const std::string base_id = flipped ? id.substr(0, id.size() - suffix.size()) : id;
  const auto it = by_id.find(base_id);
  if (it == by_id.end()) throw DataError("unknown scene id '" + base_id + "'");
  if (!flipped) return *it->second;
  Scene scene = hflip(*it->second);
  scene.id = id;
  return scene;
}

}  // namespace azsearch
