#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/eval.hpp"
#include "azsearch/io.hpp"
#include "support.hpp"

namespace azsearch {
namespace {

using testing::object_at;
using testing::scene_with;
using testing::TempDir;

std::vector<SceneProposals> exact_proposals(const std::vector<Scene>& scenes, int copies = 1) {
  std::vector<SceneProposals> out;
  for (const auto& s : scenes) {
    SceneProposals sp{s.id, {}};
    int prior = 0;
    for (int c = 0; c < copies; ++c) {
      for (const auto& o : s.objects) sp.proposals.push_back({o.box, 0.9, 0, prior++});
    }
    out.push_back(sp);
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(RecallAt, Examples) {
  const auto scenes = generate_scenes(SceneConfig::defaults(), 5, 51);
  const auto exact = exact_proposals(scenes);
  for (double t : iou_thresholds()) EXPECT_DOUBLE_EQ(recall_at(exact, scenes, t, 300), 1.0);
  EXPECT_DOUBLE_EQ(recall_at({}, scenes, 0.5, 300), 0.0);

  const std::vector<Scene> one = {scene_with({object_at(0, 0, 10, 10)}, 100, 100, "a")};
  const std::vector<SceneProposals> off = {{"a", {{{5, 5, 15, 15}, 1.0, 0, 0}}}};
  EXPECT_DOUBLE_EQ(recall_at(off, one, 0.5, 300), 0.0);
  EXPECT_DOUBLE_EQ(recall_at(off, one, 0.1, 300), 1.0);
}

TEST(RecallAt, TopNUsesScoreOrder) {
  const std::vector<Scene> s = {scene_with({object_at(0, 0, 10, 10)}, 100, 100, "a")};
  const std::vector<SceneProposals> p = {
      {"a", {{{50, 50, 60, 60}, 0.9, 0, 0}, {{0, 0, 10, 10}, 0.2, 0, 1}}}};
  EXPECT_DOUBLE_EQ(recall_at(p, s, 0.5, 1), 0.0);
  EXPECT_DOUBLE_EQ(recall_at(p, s, 0.5, 2), 1.0);
}

TEST(RecallAt, OneProposalCanRetrieveSeveralObjects) {
  const std::vector<Scene> s = {
      scene_with({object_at(0, 0, 10, 10), object_at(0, 0, 10, 11)}, 100, 100, "a")};
  const std::vector<SceneProposals> p = {{"a", {{{0, 0, 10, 10}, 0.5, 0, 0}}}};
  EXPECT_DOUBLE_EQ(recall_at(p, s, 0.5, 300), 1.0);
}

TEST(RecallAt, UnknownSceneAndBadProtocol) {
  const std::vector<Scene> s = {scene_with({object_at(0, 0, 10, 10)}, 100, 100, "a")};
  const std::vector<SceneProposals> p = {{"zzz", {}}};
  EXPECT_THROW(recall_at(p, s, 0.5, 300), DataError);
  EXPECT_THROW(recall_at({}, s, 0.0, 300), ConfigError);
  EXPECT_THROW(recall_at({}, s, 0.5, 0), ConfigError);
}

TEST(RecallCurves, GridsAndMonotonicity) {
  EXPECT_EQ(iou_thresholds().size(), 10u);
  EXPECT_DOUBLE_EQ(iou_thresholds()[1], 0.55);
  EXPECT_EQ(topn_grid(), (std::vector<std::size_t>{1, 2, 5, 10, 20, 50, 100, 200, 300}));

  // Jittered proposals with random scores give non-trivial curves.
  const auto scenes = generate_scenes(SceneConfig::defaults(), 20, 52);
  Rng rng(3);
  std::vector<SceneProposals> props;
  for (const auto& s : scenes) {
    SceneProposals sp{s.id, {}};
    for (int i = 0; i < 60; ++i) {
      const auto& o = s.objects[static_cast<std::size_t>(rng.uniform_int(0, 4))].box;
      const double j = rng.uniform(0, 0.4) * o.width();
      sp.proposals.push_back({Box{o.x1 + j, o.y1, o.x2 + j, o.y2}, rng.uniform(), i, 0});
    }
    props.push_back(sp);
  }
  const auto by_iou = recall_curve_iou(props, scenes);
  for (std::size_t i = 1; i < by_iou.size(); ++i) EXPECT_LE(by_iou[i].recall, by_iou[i - 1].recall);
  const auto by_n = recall_curve_topn(props, scenes);
  for (std::size_t i = 1; i < by_n.size(); ++i) EXPECT_GE(by_n[i].recall, by_n[i - 1].recall);
  EXPECT_DOUBLE_EQ(by_n.back().recall, recall_at(props, scenes, 0.5, 100000));
  EXPECT_GT(by_iou.front().recall, by_iou.back().recall);
}

TEST(RecallBySize, BoundariesAndNotApplicable) {
  EXPECT_EQ(classify_size(1023.9), ObjectSize::small);
  EXPECT_EQ(classify_size(1024), ObjectSize::medium);
  EXPECT_EQ(classify_size(9215.9), ObjectSize::medium);
  EXPECT_EQ(classify_size(9216), ObjectSize::large);

  const std::vector<Scene> large_only = {scene_with({object_at(0, 0, 200, 200)}, 512, 512, "a")};
  const auto r = recall_by_size(exact_proposals(large_only), large_only);
  EXPECT_FALSE(r[0].recall.has_value());
  EXPECT_FALSE(r[1].recall.has_value());
  EXPECT_EQ(r[2].recall, 1.0);
  EXPECT_EQ(r[2].objects, 1u);
}

TEST(MatchedCounts, DuplicatesAndEmpty) {
  const std::vector<Scene> s = {
      scene_with({object_at(0, 0, 20, 20), object_at(100, 100, 150, 130)}, 200, 200, "a")};
  EXPECT_EQ(matched_counts(exact_proposals(s, 3), s), (std::vector<std::size_t>{3, 3}));
  EXPECT_EQ(matched_counts({}, s), (std::vector<std::size_t>{0, 0}));
  const auto h = histogram(matched_counts(exact_proposals(s, 3), s));
  std::size_t mass = 0;
  for (const auto& b : h) mass += b.count;
  EXPECT_EQ(mass, 2u);
  EXPECT_EQ(h.back().lo, 3u);
  EXPECT_EQ(h.back().count, 2u);
}

TEST(AnchorStats, MeanMedianHistogram) {
  const auto st = anchor_stats({1, 1, 1});
  EXPECT_DOUBLE_EQ(st.mean, 1);
  EXPECT_DOUBLE_EQ(st.median, 1);
  const auto st2 = anchor_stats({5, 12, 31, 70});
  EXPECT_DOUBLE_EQ(st2.mean, 29.5);
  EXPECT_DOUBLE_EQ(st2.median, 21.5);
  ASSERT_EQ(st2.histogram.size(), 8u);
  EXPECT_EQ(st2.histogram[0].count, 1u);
  EXPECT_EQ(st2.histogram[1].count, 1u);
  EXPECT_EQ(st2.histogram[3].count, 1u);
  EXPECT_EQ(st2.histogram[7].lo, 70u);
  EXPECT_EQ(st2.histogram[7].hi, 79u);
}

TEST(ProposalsJsonl, RoundTrip) {
  const std::vector<SceneProposals> p = {
      {"a", {{{1, 2, 3, 4}, 0.25, 3, 7}, {{5, 6, 7, 8.5}, 0.125, 4, 0}}},
      {"b", {{{0, 0, 9, 9}, 1.0, 0, 0}}}};
  const auto text = proposals_to_jsonl(p);
  std::vector<nlohmann::json> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["scene_id"], "a");
  EXPECT_EQ(lines[0]["box"], nlohmann::json::parse("[1.0,2.0,3.0,4.0]"));
  const auto back = proposals_from_jsonl(lines);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].proposals, p[0].proposals);
  EXPECT_EQ(back[1].proposals, p[1].proposals);
  lines[1].erase("score");
  EXPECT_THROW(proposals_from_jsonl(lines), DataError);
}

TEST(Traces, AnchorCounts) {
  const std::vector<Scene> scenes = {scene_with({}, 10, 10, "a"), scene_with({}, 10, 10, "b")};
  SearchTrace t1, t2;
  t1.anchors.resize(3);
  t2.anchors.resize(7);
  const auto j = traces_to_json({{"b", t2}, {"a", t1}});
  EXPECT_EQ(anchor_counts_from_traces(j, scenes), (std::vector<std::size_t>{3, 7}));
  EXPECT_THROW(anchor_counts_from_traces(traces_to_json({{"a", t1}}), scenes), DataError);
  EXPECT_THROW(anchor_counts_from_traces(traces_to_json({{"a", t1}, {"b", t2}, {"c", t1}}), scenes),
               DataError);
}

TEST(WriteReports, FilesAndFormats) {
  TempDir dir("reports");
  const auto scenes = generate_scenes(SceneConfig::defaults(), 4, 53);
  const auto report = evaluate(exact_proposals(scenes), scenes,
                               std::vector<std::size_t>{1, 12, 3, 40});
  EXPECT_EQ(report.total_objects, 20u);
  EXPECT_EQ(report.retrieved, 20u);
  write_reports(report, dir.path(), true);
  for (const char* f : {"recall_iou.csv", "recall_topn.csv", "recall_size.csv", "matched_hist.csv",
                        "anchor_hist.csv", "summary.csv", "recall_iou.svg", "recall_topn.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
  const auto iou_csv = slurp(dir.path() / "recall_iou.csv");
  EXPECT_EQ(iou_csv.substr(0, iou_csv.find('\n')), "threshold,recall");
  EXPECT_NE(iou_csv.find("0.5,1\n"), std::string::npos);
  EXPECT_NE(iou_csv.find("0.95,1\n"), std::string::npos);
  EXPECT_EQ(slurp(dir.path() / "recall_size.csv").substr(0, 24), "bucket,recall,n_objects\n");
  EXPECT_NE(slurp(dir.path() / "recall_topn.svg").find("<polyline"), std::string::npos);
  EXPECT_THROW(evaluate(exact_proposals(scenes), scenes, std::vector<std::size_t>{1}), DataError);
}

}  // namespace
}  // namespace azsearch
