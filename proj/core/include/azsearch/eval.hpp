#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "azsearch/dataset.hpp"
#include "azsearch/search.hpp"

namespace azsearch {

/// Proposals produced for one scene, in any order; evaluation ranks them.
struct SceneProposals {
  std::string scene_id;
  std::vector<Proposal> proposals;
};

/// Fraction of ground-truth objects retrieved by at least one of the top_n
/// proposals of their scene with IoU >= iou_threshold. Retrieval is
/// existential: one proposal may retrieve several objects. Scenes missing
/// from `proposals` count as having none; proposals for unknown scene ids
/// raise DataError. Returns 0 when there are no objects.
double recall_at(const std::vector<SceneProposals>& proposals, const std::vector<Scene>& scenes,
                 double iou_threshold, std::size_t top_n);

struct CurvePoint {
  double x = 0.0;
  double recall = 0.0;
};

/// Thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> iou_thresholds();
/// N in {1, 2, 5, 10, 20, 50, 100, 200, 300}.
std::vector<std::size_t> topn_grid();

std::vector<CurvePoint> recall_curve_iou(const std::vector<SceneProposals>& proposals,
                                         const std::vector<Scene>& scenes,
                                         std::size_t top_n = 300);
std::vector<CurvePoint> recall_curve_topn(const std::vector<SceneProposals>& proposals,
                                          const std::vector<Scene>& scenes,
                                          double iou_threshold = 0.5);

enum class ObjectSize { small, medium, large };

const char* to_string(ObjectSize size) noexcept;

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr double kMediumAreaLimit = 96.0 * 96.0;

/// small: area < 32², medium: 32² <= area < 96², large: area >= 96².
ObjectSize classify_size(double area) noexcept;

struct BucketRecall {
  ObjectSize bucket = ObjectSize::small;
  std::optional<double> recall;  // nullopt when the bucket has no objects
  std::size_t objects = 0;
};

std::array<BucketRecall, 3> recall_by_size(const std::vector<SceneProposals>& proposals,
                                           const std::vector<Scene>& scenes,
                                           double iou_threshold = 0.5, std::size_t top_n = 300);

/// Per object (scene order, then object order), the number of top_n
/// proposals with IoU >= iou_threshold.
std::vector<std::size_t> matched_counts(const std::vector<SceneProposals>& proposals,
                                        const std::vector<Scene>& scenes,
                                        double iou_threshold = 0.5, std::size_t top_n = 300);

struct HistogramBin {
  std::size_t lo = 0;  // inclusive
  std::size_t hi = 0;  // inclusive
  std::size_t count = 0;
};

/// Dense histogram from 0 to the maximum value with the given bin width.
std::vector<HistogramBin> histogram(const std::vector<std::size_t>& values,
                                    std::size_t bin_width = 1);

struct AnchorStats {
  std::vector<std::size_t> per_scene;
  double mean = 0.0;
  double median = 0.0;
  std::vector<HistogramBin> histogram;
};

AnchorStats anchor_stats(const std::vector<std::size_t>& anchors_per_scene,
                         std::size_t bin_width = 10);

struct RecallReport {
  std::vector<CurvePoint> recall_iou;
  std::vector<CurvePoint> recall_topn;
  std::array<BucketRecall, 3> by_size{};
  std::vector<HistogramBin> matched_histogram;
  std::optional<AnchorStats> anchors;
  std::size_t total_objects = 0;
  std::size_t retrieved = 0;  // at IoU 0.5, top 300
};

/// All analyses at the default protocol (top-300, IoU 0.5).
RecallReport evaluate(const std::vector<SceneProposals>& proposals,
                      const std::vector<Scene>& scenes,
                      const std::optional<std::vector<std::size_t>>& anchors_per_scene);

/// Writes recall_iou.csv, recall_topn.csv, recall_size.csv,
/// matched_hist.csv, summary.csv and, when anchor counts are known,
/// anchor_hist.csv; plus an SVG line chart per curve when `plots` is set.
void write_reports(const RecallReport& report, const std::filesystem::path& outdir,
                   bool plots = true);

/// One JSON object per line: {"scene_id","box","score","anchor","prior"}.
std::string proposals_to_jsonl(const std::vector<SceneProposals>& proposals);
/// Groups lines by scene id in order of first appearance.
std::vector<SceneProposals> proposals_from_jsonl(const std::vector<nlohmann::json>& lines);
std::vector<SceneProposals> load_proposals(const std::filesystem::path& path);

struct SceneTrace {
  std::string scene_id;
  SearchTrace trace;
};

/// {"traces":[{"scene_id", "steps":[{"B","Z","Y"}], "anchors_evaluated"}]}
nlohmann::json traces_to_json(const std::vector<SceneTrace>& traces);
/// Anchors evaluated per scene, in `scenes` order. Throws DataError when a
/// scene has no trace or a trace names an unknown scene.
std::vector<std::size_t> anchor_counts_from_traces(const nlohmann::json& traces,
                                                   const std::vector<Scene>& scenes);

/// Minimal SVG line chart.
std::string line_chart_svg(const std::vector<CurvePoint>& points, const std::string& title,
                           const std::string& x_label, bool log_x = false);

}  // namespace azsearch
