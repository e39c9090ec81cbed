#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/labels.hpp"
#include "azsearch/predictor.hpp"
#include "support.hpp"

namespace azsearch {
namespace {

using testing::object_at;
using testing::scene_with;

FeatureGrid random_grid(int channels, int w, int h, std::uint64_t seed) {
  FeatureGrid g(channels, w, h);
  Rng rng(seed);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) g.at(c, x, y) = static_cast<float>(rng.uniform(-1, 1));
    }
  }
  return g;
}

TEST(PoolRegion, ConstantGrid) {
  const FeatureGrid g(2, 40, 30, 0.75f);
  for (const Box& r : {Box{0, 0, 40, 30}, Box{3.5, 2.25, 17, 29}, Box{10, 10, 11, 11}}) {
    for (double v : pool_region(g, r, 4)) EXPECT_DOUBLE_EQ(v, 0.75);
  }
}

TEST(PoolRegion, GlobalMaxWithSingleCell) {
  const auto g = random_grid(1, 20, 20, 3);
  double best = -10;
  for (int y = 2; y < 12; ++y) {
    for (int x = 5; x < 15; ++x) best = std::max(best, double(g.at(0, x, y)));
  }
  const auto out = pool_region(g, {5, 2, 15, 12}, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], best);
}

TEST(PoolRegion, SingleHotPixelLandsInOneCell) {
  FeatureGrid g(1, 64, 64);
  g.at(0, 15, 15) = 1.0f;
  const auto out = pool_region(g, {0, 0, 32, 32}, 2);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_EQ(out[3], 0.0);
}

TEST(PoolRegion, ChannelMajorOrder) {
  FeatureGrid g(2, 8, 8);
  g.at(1, 7, 0) = 5.0f;  // top-right cell of channel 1
  const auto out = pool_region(g, {0, 0, 8, 8}, 2);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_EQ(out[4 + 1], 5.0);
}

TEST(PoolRegion, OutsideFrameCellsAreZero) {
  const FeatureGrid g(1, 10, 10, 1.0f);
  // Left half of the region lies outside the frame.
  const auto out = pool_region(g, {-10, 0, 10, 10}, 2);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 1.0);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_EQ(out[3], 1.0);
  EXPECT_THROW(pool_region(g, {20, 20, 30, 30}, 2), DataError);
}

TEST(PoolingIndex, BitIdenticalToDirectScan) {
  const auto g = random_grid(2, 97, 61, 4);
  const PoolingIndex index(g);
  Rng rng(5);
  for (int i = 0; i < 3000; ++i) {
    const double w = rng.uniform(0.3, 150);
    const double h = rng.uniform(0.3, 100);
    const double x = rng.uniform(-w + 0.1, 96.9);
    const double y = rng.uniform(-h + 0.1, 60.9);
    const Box r{x, y, x + w, y + h};
    const int cells = static_cast<int>(rng.uniform_int(1, 6));
    ASSERT_EQ(index.pool(r, cells), pool_region(g, r, cells)) << r << " g=" << cells;
  }
  // Integer-aligned regions exercise exact cell boundaries.
  for (int i = 0; i < 500; ++i) {
    const auto x = rng.uniform_int(-10, 90);
    const auto y = rng.uniform_int(-10, 55);
    const Box r{double(x), double(y), double(x + rng.uniform_int(1, 64)),
                double(y + rng.uniform_int(1, 64))};
    if (!clip_to_frame(r, 97, 61)) continue;
    ASSERT_EQ(index.pool(r, 4), pool_region(g, r, 4)) << r;
  }
}

TEST(Forward, ZeroModel) {
  const auto params = ModelParameters::zeros(4, 8, 2);
  const std::vector<double> features(params.input_size(), 0.3);
  const auto out = forward(params, features).output;
  EXPECT_DOUBLE_EQ(out.zoom, 0.5);
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    EXPECT_EQ(out.adjacency[p].prior_index, static_cast<int>(p));
    EXPECT_DOUBLE_EQ(out.adjacency[p].confidence, 0.5);
    EXPECT_EQ(out.adjacency[p].regression, (RegressionTarget{0, 0, 0, 0}));
  }
}

TEST(Forward, MatchesHandComputation) {
  auto params = ModelParameters::initialized(2, 5, 1, 6);
  Rng rng(7);
  for (auto block : params.blocks()) {
    for (double& v : block) v = rng.uniform(-0.5, 0.5);
  }
  std::vector<double> f(params.input_size());
  for (double& v : f) v = rng.uniform(-1, 1);

  std::vector<double> hidden(5);
  for (int h = 0; h < 5; ++h) {
    double s = params.b1[h];
    for (int i = 0; i < params.input_size(); ++i) s += params.w1[h * params.input_size() + i] * f[i];
    hidden[h] = std::max(0.0, s);
  }
  auto dot = [&](const std::vector<double>& w, std::size_t row, double b) {
    double s = b;
    for (int h = 0; h < 5; ++h) s += w[row * 5 + h] * hidden[h];
    return s;
  };
  const auto out = forward(params, f).output;
  EXPECT_NEAR(out.zoom, 1 / (1 + std::exp(-dot(params.w_zoom, 0, params.b_zoom[0]))), 1e-12);
  for (std::size_t p = 0; p < kNumPriors; ++p) {
    EXPECT_NEAR(out.adjacency[p].confidence,
                1 / (1 + std::exp(-dot(params.w_conf, p, params.b_conf[p]))), 1e-12);
    EXPECT_NEAR(out.adjacency[p].regression.tx, dot(params.w_reg, 4 * p, params.b_reg[4 * p]), 1e-12);
    EXPECT_NEAR(out.adjacency[p].regression.th,
                dot(params.w_reg, 4 * p + 3, params.b_reg[4 * p + 3]), 1e-12);
  }
}

TEST(Forward, ShapeMismatch) {
  const auto params = ModelParameters::zeros(4, 8, 2);
  EXPECT_THROW(forward(params, std::vector<double>(5, 0.0)), ConfigError);
}

TEST(Forward, SaturatedInputsStayInRange) {
  auto params = ModelParameters::initialized(4, 16, 2, 8);
  const std::vector<double> f(params.input_size(), 1e6);
  const auto out = forward(params, f).output;
  EXPECT_NO_THROW(validate_output(out));
}

TEST(ModelParameters, InitRangeAndBiases) {
  const auto p = ModelParameters::initialized(4, 64, 2, 1);
  EXPECT_EQ(p.w1.size(), 64u * 32u);
  EXPECT_EQ(p.w_reg.size(), 44u * 64u);
  EXPECT_EQ(p.parameter_count(), 64u * 32 + 64 + 64 + 1 + 11 * 64 + 11 + 44 * 64 + 44);
  for (double v : p.w1) {
    ASSERT_GE(v, -0.05);
    ASSERT_LE(v, 0.05);
  }
  for (double v : p.b1) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(p, ModelParameters::initialized(4, 64, 2, 1));
  EXPECT_NE(p, ModelParameters::initialized(4, 64, 2, 2));
}

TEST(ModelParameters, JsonRoundTripAndSchema) {
  const auto p = ModelParameters::initialized(3, 7, 2, 2);
  const nlohmann::json j = p;
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["g"], 3);
  EXPECT_EQ(j["H"], 7);
  EXPECT_EQ(j["w1"]["shape"], nlohmann::json::array({7, 18}));
  EXPECT_EQ(j.get<ModelParameters>(), p);

  auto bad = j;
  bad["version"] = 2;
  EXPECT_THROW(bad.get<ModelParameters>(), DataError);
  bad = j;
  bad["w_conf"]["data"].erase(0);
  EXPECT_THROW(bad.get<ModelParameters>(), DataError);
  bad = j;
  bad.erase("b_reg");
  EXPECT_THROW(bad.get<ModelParameters>(), DataError);
}

TEST(OraclePredict, Examples) {
  const auto empty = oracle_predict(scene_with({}), {0, 0, 512, 512});
  EXPECT_EQ(empty.zoom, 0.0);
  for (const auto& a : empty.adjacency) EXPECT_EQ(a.confidence, 0.0);

  const Box obj{100, 100, 150, 150};
  const auto s = scene_with({SceneObject{obj, 0, 1.0}});
  for (const auto& prior : default_priors()) {
    const auto out = oracle_predict(s, inverse_match(obj, prior));
    EXPECT_EQ(out.adjacency[prior.index].confidence, 1.0);
    EXPECT_EQ(out.adjacency[prior.index].regression, (RegressionTarget{0, 0, 0, 0}));
  }

  // 26% of the anchor, fully inside: too large to zoom.
  const auto big = scene_with({object_at(0, 0, 51, 51)});
  EXPECT_EQ(oracle_predict(big, {0, 0, 100, 100}).zoom, 0.0);
  const auto fits = scene_with({object_at(0, 0, 50, 50)});
  EXPECT_EQ(oracle_predict(fits, {0, 0, 100, 100}).zoom, 1.0);
}

TEST(RandomPredict, DeterministicInRangeAndDistinct) {
  const Box a{1, 2, 30, 40};
  EXPECT_EQ(random_predict(3, a), random_predict(3, a));
  EXPECT_NE(random_predict(3, a), random_predict(4, a));
  std::set<double> zooms;
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto out = random_predict(3, testing::random_box(rng));
    EXPECT_NO_THROW(validate_output(out));
    for (const auto& adj : out.adjacency) EXPECT_EQ(adj.regression, (RegressionTarget{}));
    zooms.insert(out.zoom);
  }
  EXPECT_EQ(zooms.size(), 1000u);
}

TEST(RandomPredictor, KeyedByScene) {
  const RandomPredictor rp(5);
  const auto s1 = scene_with({}, 512, 512, "a");
  const auto s2 = scene_with({}, 512, 512, "b");
  const Box frame = s1.frame();
  EXPECT_EQ(rp.predict({&s1, nullptr}, frame), rp.predict({&s1, nullptr}, frame));
  EXPECT_NE(rp.predict({&s1, nullptr}, frame), rp.predict({&s2, nullptr}, frame));
}

TEST(ModelPredictor, NeedsFeatures) {
  const ModelPredictor mp(ModelParameters::zeros(4, 4, 2));
  const auto s = scene_with({});
  EXPECT_TRUE(mp.needs_features());
  EXPECT_THROW(mp.predict({&s, nullptr}, s.frame()), ConfigError);
  const PoolingIndex index(render(s, 0.0, 0));
  EXPECT_DOUBLE_EQ(mp.predict({&s, &index}, s.frame()).zoom, 0.5);
}

TEST(ValidateOutput, RejectsBadValues) {
  ZoomAdjacencyOutput out;
  for (std::size_t p = 0; p < kNumPriors; ++p) out.adjacency[p].prior_index = static_cast<int>(p);
  EXPECT_NO_THROW(validate_output(out));
  auto bad = out;
  bad.zoom = 1.5;
  EXPECT_THROW(validate_output(bad), NumericError);
  bad = out;
  bad.adjacency[3].regression.tw = INFINITY;
  EXPECT_THROW(validate_output(bad), NumericError);
  bad = out;
  bad.adjacency[4].prior_index = 9;
  EXPECT_THROW(validate_output(bad), NumericError);
}

}  // namespace
}  // namespace azsearch
