#include <map>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/search.hpp"
#include "support.hpp"

namespace azsearch {
namespace {

using testing::object_at;
using testing::scene_with;

class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(double zoom, double confidence) : zoom_(zoom), confidence_(confidence) {}
  ZoomAdjacencyOutput predict(const SceneContext&, const Box&) const override {
    ZoomAdjacencyOutput out;
    out.zoom = zoom_;
    for (std::size_t p = 0; p < kNumPriors; ++p) {
      out.adjacency[p].prior_index = static_cast<int>(p);
      out.adjacency[p].confidence = confidence_;
    }
    return out;
  }
  std::string name() const override { return "constant"; }

 private:
  double zoom_;
  double confidence_;
};

class ThrowingPredictor final : public Predictor {
 public:
  ZoomAdjacencyOutput predict(const SceneContext&, const Box& anchor) const override {
    if (anchor.width() < 300) throw NumericError("boom");
    return ConstantPredictor(1, 0).predict({}, anchor);
  }
  std::string name() const override { return "throwing"; }
};

TEST(AdaptiveSearch, NoZoomNoConfidence) {
  const auto s = scene_with({});
  const auto r = adaptive_search(ConstantPredictor(0, 0), {&s, nullptr}, {});
  EXPECT_EQ(r.trace.anchors_evaluated(), 1u);
  EXPECT_TRUE(r.proposals.empty());
  ASSERT_EQ(r.trace.steps.size(), 1u);
  EXPECT_EQ(r.trace.anchors[0].box, s.frame());
}

TEST(AdaptiveSearch, AlwaysZoomCountsByLevel) {
  const auto s = scene_with({});
  SearchParams params;
  params.min_region_side = 64;
  const auto r = adaptive_search(ConstantPredictor(1, 0), {&s, nullptr}, params);
  ASSERT_EQ(r.trace.steps.size(), 4u);
  std::size_t expected = 1;
  for (const auto& step : r.trace.steps) {
    EXPECT_EQ(step.anchors.size(), expected);
    expected *= 5;
  }
  EXPECT_EQ(r.trace.anchors_evaluated(), 156u);
  EXPECT_TRUE(r.trace.steps.back().zoomed.empty());
}

TEST(AdaptiveSearch, MaxStepsCapsDepth) {
  const auto s = scene_with({});
  SearchParams params;
  params.min_region_side = 1;
  params.max_steps = 3;
  const auto r = adaptive_search(ConstantPredictor(1, 0), {&s, nullptr}, params);
  EXPECT_EQ(r.trace.steps.size(), 3u);
  EXPECT_EQ(r.trace.anchors_evaluated(), 31u);
}

TEST(AdaptiveSearch, OracleFindsSmallObject) {
  const auto s = scene_with({object_at(300, 140, 318, 161)});
  const auto r = adaptive_search(OraclePredictor(), {&s, nullptr}, {});
  double best = 0.0;
  for (const auto& p : r.proposals) best = std::max(best, iou(p.box, s.objects[0].box));
  EXPECT_GE(best, 0.5);
}

TEST(AdaptiveSearch, HugeObjectsEvaluateOneAnchor) {
  const auto s = scene_with({object_at(0, 0, 400, 300), object_at(100, 150, 500, 500)});
  const auto r = adaptive_search(OraclePredictor(), {&s, nullptr}, {});
  EXPECT_EQ(r.trace.anchors_evaluated(), 1u);
}

TEST(AdaptiveSearch, TraceConsistency) {
  const auto scenes = generate_scenes(SceneConfig::defaults(), 10, 31);
  for (const auto& s : scenes) {
    const auto r = adaptive_search(OraclePredictor(), {&s, nullptr}, {});
    const auto& t = r.trace;
    std::size_t total = 0;
    std::size_t emitted = 0;
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      total += t.steps[k].anchors.size();
      emitted += t.steps[k].proposals;
      for (int id : t.steps[k].anchors) EXPECT_EQ(t.anchors[id].step, static_cast<int>(k));
      if (k + 1 < t.steps.size()) {
        // B_{k+1} is exactly the children of Z_k, in order.
        std::vector<Box> expected;
        for (int z : t.steps[k].zoomed) {
          for (const auto& c : divide_region(t.anchors[z].box)) expected.push_back(c);
        }
        std::vector<Box> actual;
        for (int id : t.steps[k + 1].anchors) {
          actual.push_back(t.anchors[id].box);
          const int parent = t.anchors[id].parent;
          EXPECT_NE(std::find(t.steps[k].zoomed.begin(), t.steps[k].zoomed.end(), parent),
                    t.steps[k].zoomed.end());
        }
        EXPECT_EQ(actual, expected);
      }
    }
    EXPECT_EQ(total, t.anchors_evaluated());
    EXPECT_EQ(emitted, r.proposals.size());
    for (const auto& p : r.proposals) {
      ASSERT_GE(p.anchor_id, 0);
      ASSERT_LT(static_cast<std::size_t>(p.anchor_id), t.anchors.size());
      EXPECT_TRUE(s.frame().contains(p.box));
      EXPECT_GE(p.score, 0.0);
      EXPECT_LE(p.score, 1.0);
    }
  }
}

TEST(AdaptiveSearch, RaisingZoomThresholdNeverAddsAnchors) {
  const auto scenes = generate_scenes(SceneConfig::defaults(), 10, 32);
  const RandomPredictor rp(4);
  for (const auto& s : scenes) {
    std::size_t previous = SIZE_MAX;
    for (double thr : {0.0, 0.2, 0.4, 0.5, 0.7, 0.9, 1.0}) {
      SearchParams params;
      params.zoom_threshold = thr;
      const auto n = adaptive_search(rp, {&s, nullptr}, params).trace.anchors_evaluated();
      EXPECT_LE(n, previous) << "threshold " << thr;
      previous = n;
    }
  }
}

TEST(AdaptiveSearch, ConfidenceThresholdFiltersProposals) {
  const auto s = scene_with({});
  SearchParams params;
  params.confidence_threshold = 0.5;
  EXPECT_EQ(adaptive_search(ConstantPredictor(0, 0.49), {&s, nullptr}, params).proposals.size(), 0u);
  // Priors extending past the frame are clipped, none are empty for the root.
  EXPECT_EQ(adaptive_search(ConstantPredictor(0, 0.5), {&s, nullptr}, params).proposals.size(),
            kNumPriors);
}

TEST(AdaptiveSearch, PredictorFailureNamesAnchor) {
  const auto s = scene_with({});
  try {
    adaptive_search(ThrowingPredictor(), {&s, nullptr}, {});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("anchor 1"), std::string::npos) << e.what();
  }
}

TEST(SearchParams, ValidationAndJson) {
  SearchParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.resolved_min_side(512, 384), 24.0);
  p.zoom_threshold = 1.1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.top_k = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.min_region_side = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.min_region_side = 40;
  const nlohmann::json j = p;
  const auto back = j.get<SearchParams>();
  EXPECT_EQ(back.min_region_side, 40);
  EXPECT_THROW(nlohmann::json::parse(R"({"top_k":"many"})").get<SearchParams>(), ConfigError);
}

TEST(RankProposals, Examples) {
  std::vector<Proposal> props = {{{0, 0, 1, 1}, 0.9, 0, 0},
                                 {{0, 0, 1, 1}, 0.1, 0, 1},
                                 {{0, 0, 1, 1}, 0.5, 0, 2}};
  const auto top2 = rank_proposals(props, 2);
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(top2[0].score, 0.9);
  EXPECT_EQ(top2[1].score, 0.5);
  EXPECT_EQ(rank_proposals(props, 10).size(), 3u);
}

TEST(RankProposals, TiesByAnchorThenPrior) {
  std::vector<Proposal> props = {{{0, 0, 1, 1}, 1.0, 3, 2},
                                 {{0, 0, 1, 1}, 1.0, 1, 7},
                                 {{0, 0, 1, 1}, 1.0, 3, 0},
                                 {{0, 0, 1, 1}, 1.0, 1, 2}};
  const auto r = rank_proposals(props, 4);
  EXPECT_EQ(r[0].anchor_id, 1);
  EXPECT_EQ(r[0].prior_index, 2);
  EXPECT_EQ(r[1].prior_index, 7);
  EXPECT_EQ(r[2].anchor_id, 3);
  EXPECT_EQ(r[2].prior_index, 0);
  auto shuffled = props;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(rank_proposals(shuffled, 4), r);
}

TEST(GridAnchors, Counts) {
  GridConfig g;
  g.stride = 100;
  EXPECT_EQ(grid_anchors(600, 600, g).size(), 324u);
  GridConfig one;
  one.scales = {64};
  one.ratios = {1};
  one.stride = 600;
  EXPECT_EQ(grid_anchors(600, 600, one).size(), 1u);
  EXPECT_EQ(grid_anchors(512, 512, GridConfig{}).size(), 2304u);
}

TEST(GridAnchors, ShapesAndClipping) {
  GridConfig g;
  g.scales = {100};
  g.ratios = {4};
  g.stride = 400;
  const auto anchors = grid_anchors(400, 400, g);
  ASSERT_EQ(anchors.size(), 1u);
  // w = 100 / 2, h = 100 * 2, centered at (200, 200).
  EXPECT_EQ(anchors[0], (Box{175, 100, 225, 300}));
  for (const auto& a : grid_anchors(512, 512, GridConfig{})) {
    EXPECT_TRUE((Box{0, 0, 512, 512}).contains(a));
  }
}

TEST(ResizeGrid, ClosestCount) {
  const GridConfig base;
  for (double target : {9.0, 81.0, 300.0, 2304.0, 5000.0}) {
    const auto g = resize_grid(base, 512, 512, target);
    const double got = static_cast<double>(grid_anchors(512, 512, g).size());
    // No integer position count gives a closer total.
    for (int n = 1; n <= 80; ++n) {
      const double count = 9.0 * n * n;
      EXPECT_LE(std::abs(got - target), std::abs(count - target) + 1e-9) << target;
    }
  }
}

TEST(FixedGridSearch, IndependentOfContent) {
  GridConfig g;
  g.stride = 128;
  const auto a = scene_with({});
  const auto b = scene_with({object_at(10, 10, 100, 100), object_at(200, 200, 230, 240)});
  const auto ra = fixed_grid_search(OraclePredictor(), {&a, nullptr}, g, {});
  const auto rb = fixed_grid_search(OraclePredictor(), {&b, nullptr}, g, {});
  EXPECT_EQ(ra.trace.anchors_evaluated(), rb.trace.anchors_evaluated());
  EXPECT_EQ(ra.trace.anchors_evaluated(), 144u);
  EXPECT_EQ(ra.trace.steps.size(), 1u);
  EXPECT_TRUE(ra.proposals.empty());
  EXPECT_FALSE(rb.proposals.empty());
}

TEST(SearchScenes, ThreadIndependentAndRanked) {
  const auto scenes = generate_scenes(SceneConfig::defaults(), 12, 33);
  SearchRunOptions o;
  o.params.top_k = 20;
  const auto one = search_scenes(OraclePredictor(), scenes, o);
  o.threads = 4;
  const auto four = search_scenes(OraclePredictor(), scenes, o);
  ASSERT_EQ(one.size(), scenes.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].scene_id, scenes[i].id);
    EXPECT_EQ(one[i].proposals, four[i].proposals);
    EXPECT_EQ(one[i].trace.anchors_evaluated(), four[i].trace.anchors_evaluated());
    EXPECT_LE(one[i].proposals.size(), 20u);
  }
}

TEST(TraceJson, Shape) {
  const auto s = scene_with({});
  SearchParams params;
  params.min_region_side = 128;
  const auto r = adaptive_search(ConstantPredictor(1, 0), {&s, nullptr}, params);
  const auto j = trace_to_json(r.trace);
  EXPECT_EQ(j["anchors_evaluated"], 31);
  ASSERT_EQ(j["steps"].size(), 3u);
  EXPECT_EQ(j["steps"][1]["B"], 5);
  EXPECT_EQ(j["steps"][1]["Z"], 5);
  EXPECT_EQ(j["steps"][2]["Z"], 0);
}

}  // namespace
}  // namespace azsearch
