#include "azsearch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"
#include "azsearch/io.hpp"

namespace azsearch {

namespace {

using RankedIndex = std::map<std::string, std::vector<Proposal>>;

// Ranked top_n proposals per known scene id.
RankedIndex rank_by_scene(const std::vector<SceneProposals>& proposals,
                          const std::vector<Scene>& scenes, std::size_t top_n) {
  RankedIndex index;
  for (const auto& s : scenes) index.emplace(s.id, std::vector<Proposal>{});
  for (const auto& sp : proposals) {
    const auto it = index.find(sp.scene_id);
    if (it == index.end()) {
      throw DataError("proposals reference scene '" + sp.scene_id +
                      "' which is not in the ground truth");
    }
    it->second.insert(it->second.end(), sp.proposals.begin(), sp.proposals.end());
  }
  for (auto& [id, props] : index) props = rank_proposals(std::move(props), top_n);
  return index;
}

template <typename Fn>
void for_each_object(const std::vector<Scene>& scenes, const RankedIndex& index, Fn&& fn) {
  for (const auto& scene : scenes) {
    const auto& props = index.at(scene.id);
    for (const auto& obj : scene.objects) fn(obj, props);
  }
}

bool retrieved(const SceneObject& obj, const std::vector<Proposal>& props, double threshold) {
  return std::any_of(props.begin(), props.end(),
                     [&](const Proposal& p) { return iou(p.box, obj.box) >= threshold; });
}

void check_protocol(double iou_threshold, std::size_t top_n) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("iou threshold must be in (0,1]");
  }
  if (top_n < 1) throw ConfigError("top_n must be >= 1");
}

}  // namespace

double recall_at(const std::vector<SceneProposals>& proposals, const std::vector<Scene>& scenes,
                 double iou_threshold, std::size_t top_n) {
  check_protocol(iou_threshold, top_n);
  const auto index = rank_by_scene(proposals, scenes, top_n);
  std::size_t total = 0;
  std::size_t hit = 0;
  for_each_object(scenes, index, [&](const SceneObject& obj, const std::vector<Proposal>& props) {
    ++total;
    if (retrieved(obj, props, iou_threshold)) ++hit;
  });
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

std::vector<double> iou_thresholds() {
  std::vector<double> out;
  for (int i = 10; i <= 19; ++i) out.push_back(i / 20.0);
  return out;
}

std::vector<std::size_t> topn_grid() { return {1, 2, 5, 10, 20, 50, 100, 200, 300}; }

std::vector<CurvePoint> recall_curve_iou(const std::vector<SceneProposals>& proposals,
                                         const std::vector<Scene>& scenes, std::size_t top_n) {
  std::vector<CurvePoint> curve;
  for (double t : iou_thresholds()) curve.push_back({t, recall_at(proposals, scenes, t, top_n)});
  return curve;
}

std::vector<CurvePoint> recall_curve_topn(const std::vector<SceneProposals>& proposals,
                                          const std::vector<Scene>& scenes,
                                          double iou_threshold) {
  std::vector<CurvePoint> curve;
  for (std::size_t n : topn_grid()) {
    curve.push_back({static_cast<double>(n), recall_at(proposals, scenes, iou_threshold, n)});
  }
  return curve;
}

const char* to_string(ObjectSize size) noexcept {
  switch (size) {
    case ObjectSize::small:
      return "small";
    case ObjectSize::medium:
      return "medium";
    case ObjectSize::large:
      return "large";
  }
  return "unknown";
}

ObjectSize classify_size(double area) noexcept {
  if (area < kSmallAreaLimit) return ObjectSize::small;
  if (area < kMediumAreaLimit) return ObjectSize::medium;
  return ObjectSize::large;
}

std::array<BucketRecall, 3> recall_by_size(const std::vector<SceneProposals>& proposals,
                                           const std::vector<Scene>& scenes,
                                           double iou_threshold, std::size_t top_n) {
  check_protocol(iou_threshold, top_n);
  const auto index = rank_by_scene(proposals, scenes, top_n);
  std::array<std::size_t, 3> total{};
  std::array<std::size_t, 3> hit{};
  for_each_object(scenes, index, [&](const SceneObject& obj, const std::vector<Proposal>& props) {
    const auto b = static_cast<std::size_t>(classify_size(obj.box.area()));
    ++total[b];
    if (retrieved(obj, props, iou_threshold)) ++hit[b];
  });
  std::array<BucketRecall, 3> out{};
  for (std::size_t b = 0; b < 3; ++b) {
    out[b].bucket = static_cast<ObjectSize>(b);
    out[b].objects = total[b];
    if (total[b] > 0) out[b].recall = static_cast<double>(hit[b]) / static_cast<double>(total[b]);
  }
  return out;
}

std::vector<std::size_t> matched_counts(const std::vector<SceneProposals>& proposals,
                                        const std::vector<Scene>& scenes, double iou_threshold,
                                        std::size_t top_n) {
  check_protocol(iou_threshold, top_n);
  const auto index = rank_by_scene(proposals, scenes, top_n);
  std::vector<std::size_t> counts;
  for_each_object(scenes, index, [&](const SceneObject& obj, const std::vector<Proposal>& props) {
    counts.push_back(static_cast<std::size_t>(
        std::count_if(props.begin(), props.end(),
                      [&](const Proposal& p) { return iou(p.box, obj.box) >= iou_threshold; })));
  });
  return counts;
}

std::vector<HistogramBin> histogram(const std::vector<std::size_t>& values, std::size_t bin_width) {
  if (bin_width < 1) throw ConfigError("histogram bin width must be >= 1");
  if (values.empty()) return {};
  const std::size_t max_value = *std::max_element(values.begin(), values.end());
  std::vector<HistogramBin> bins(max_value / bin_width + 1);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = b * bin_width;
    bins[b].hi = b * bin_width + bin_width - 1;
  }
  for (std::size_t v : values) ++bins[v / bin_width].count;
  return bins;
}

AnchorStats anchor_stats(const std::vector<std::size_t>& anchors_per_scene,
                         std::size_t bin_width) {
  AnchorStats stats;
  stats.per_scene = anchors_per_scene;
  if (anchors_per_scene.empty()) return stats;
  double sum = 0.0;
  for (std::size_t v : anchors_per_scene) sum += static_cast<double>(v);
  stats.mean = sum / static_cast<double>(anchors_per_scene.size());
  auto sorted = anchors_per_scene;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  stats.median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                            : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  stats.histogram = histogram(anchors_per_scene, bin_width);
  return stats;
}

RecallReport evaluate(const std::vector<SceneProposals>& proposals,
                      const std::vector<Scene>& scenes,
                      const std::optional<std::vector<std::size_t>>& anchors_per_scene) {
  RecallReport report;
  report.recall_iou = recall_curve_iou(proposals, scenes, 300);
  report.recall_topn = recall_curve_topn(proposals, scenes, 0.5);
  report.by_size = recall_by_size(proposals, scenes, 0.5, 300);
  const auto counts = matched_counts(proposals, scenes, 0.5, 300);
  report.matched_histogram = histogram(counts, 1);
  report.total_objects = counts.size();
  const double r = report.recall_iou.front().recall;
  report.retrieved = static_cast<std::size_t>(std::llround(r * static_cast<double>(counts.size())));
  if (anchors_per_scene) {
    if (anchors_per_scene->size() != scenes.size()) {
      throw DataError("anchor counts cover " + std::to_string(anchors_per_scene->size()) +
                      " scenes, ground truth has " + std::to_string(scenes.size()));
    }
    report.anchors = anchor_stats(*anchors_per_scene, 10);
  }
  return report;
}

std::string line_chart_svg(const std::vector<CurvePoint>& points, const std::string& title,
                           const std::string& x_label, bool log_x) {
  constexpr double kW = 480, kH = 320, kLeft = 56, kRight = 16, kTop = 32, kBottom = 48;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto xv = [&](double x) { return log_x ? std::log10(std::max(x, 1e-12)) : x; };
  double x_min = 0.0, x_max = 1.0;
  if (!points.empty()) {
    x_min = xv(points.front().x);
    x_max = xv(points.back().x);
    if (x_max <= x_min) x_max = x_min + 1.0;
  }
  auto px = [&](double x) { return kLeft + (xv(x) - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double r) { return kTop + (1.0 - r) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft << "\" y2=\""
      << py(1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double r = i / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(r) + 4 << "\" text-anchor=\"end\">" << r
        << "</text>\n";
  }
  for (const auto& p : points) {
    svg << "<text x=\"" << px(p.x) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\">"
        << p.x << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\">"
      << x_label << "</text>\n";
  svg << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 14 "
      << kTop + ph / 2 << ")\" text-anchor=\"middle\">recall</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (const auto& p : points) svg << px(p.x) << ',' << py(p.recall) << ' ';
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

void write_reports(const RecallReport& report, const std::filesystem::path& outdir, bool plots) {
  using io::format_double;
  std::string iou_csv = "threshold,recall\n";
  for (const auto& p : report.recall_iou) {
    iou_csv += format_double(p.x) + ',' + format_double(p.recall) + '\n';
  }
  io::write_text(outdir / "recall_iou.csv", iou_csv);

  std::string topn_csv = "n,recall\n";
  for (const auto& p : report.recall_topn) {
    topn_csv += std::to_string(static_cast<std::size_t>(p.x)) + ',' + format_double(p.recall) + '\n';
  }
  io::write_text(outdir / "recall_topn.csv", topn_csv);

  std::string size_csv = "bucket,recall,n_objects\n";
  for (const auto& b : report.by_size) {
    size_csv += std::string(to_string(b.bucket)) + ',' +
                (b.recall ? format_double(*b.recall) : std::string("n/a")) + ',' +
                std::to_string(b.objects) + '\n';
  }
  io::write_text(outdir / "recall_size.csv", size_csv);

  std::string matched_csv = "matched_proposals,objects\n";
  for (const auto& bin : report.matched_histogram) {
    matched_csv += std::to_string(bin.lo) + ',' + std::to_string(bin.count) + '\n';
  }
  io::write_text(outdir / "matched_hist.csv", matched_csv);

  std::string summary = "metric,value\n";
  summary += "objects," + std::to_string(report.total_objects) + '\n';
  summary += "retrieved_iou0.5_top300," + std::to_string(report.retrieved) + '\n';
  summary += "recall_iou0.5_top300," +
             format_double(report.recall_iou.empty() ? 0.0 : report.recall_iou.front().recall) +
             '\n';
  if (report.anchors) {
    summary += "mean_anchors," + format_double(report.anchors->mean) + '\n';
    summary += "median_anchors," + format_double(report.anchors->median) + '\n';
    std::string anchor_csv = "anchors_lo,anchors_hi,scenes\n";
    for (const auto& bin : report.anchors->histogram) {
      anchor_csv += std::to_string(bin.lo) + ',' + std::to_string(bin.hi) + ',' +
                    std::to_string(bin.count) + '\n';
    }
    io::write_text(outdir / "anchor_hist.csv", anchor_csv);
  }
  io::write_text(outdir / "summary.csv", summary);

  if (plots) {
    io::write_text(outdir / "recall_iou.svg",
                   line_chart_svg(report.recall_iou, "Recall vs IoU threshold (top 300)",
                                  "IoU threshold"));
    io::write_text(outdir / "recall_topn.svg",
                   line_chart_svg(report.recall_topn, "Recall vs number of proposals (IoU 0.5)",
                                  "proposals", true));
  }
}

std::string proposals_to_jsonl(const std::vector<SceneProposals>& proposals) {
  std::string out;
  for (const auto& sp : proposals) {
    for (const auto& p : sp.proposals) {
      const nlohmann::json line = {{"scene_id", sp.scene_id},
                                   {"box", p.box},
                                   {"score", p.score},
                                   {"anchor", p.anchor_id},
                                   {"prior", p.prior_index}};
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<SceneProposals> proposals_from_jsonl(const std::vector<nlohmann::json>& lines) {
  std::vector<SceneProposals> out;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    Proposal p;
    std::string scene_id;
    try {
      scene_id = j.at("scene_id").get<std::string>();
      p.box = j.at("box").get<Box>();
      p.score = j.at("score").get<double>();
      p.anchor_id = j.value("anchor", 0);
      p.prior_index = j.value("prior", 0);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("proposal line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (!std::isfinite(p.score)) {
      throw DataError("proposal line " + std::to_string(i + 1) + ": non-finite score");
    }
    auto [it, inserted] = slot.emplace(scene_id, out.size());
    if (inserted) out.push_back({scene_id, {}});
    out[it->second].proposals.push_back(p);
  }
  return out;
}

std::vector<SceneProposals> load_proposals(const std::filesystem::path& path) {
  return proposals_from_jsonl(io::read_json_lines(path));
}

nlohmann::json traces_to_json(const std::vector<SceneTrace>& traces) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : traces) {
    nlohmann::json j = trace_to_json(t.trace);
    j["scene_id"] = t.scene_id;
    arr.push_back(std::move(j));
  }
  return {{"traces", arr}};
}

std::vector<std::size_t> anchor_counts_from_traces(const nlohmann::json& traces,
                                                   const std::vector<Scene>& scenes) {
  std::map<std::string, std::size_t> by_id;
  try {
    for (const auto& t : traces.at("traces")) {
      by_id[t.at("scene_id").get<std::string>()] = t.at("anchors_evaluated").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("trace file: ") + e.what());
  }
  std::vector<std::size_t> counts;
  counts.reserve(scenes.size());
  for (const auto& s : scenes) {
    const auto it = by_id.find(s.id);
    if (it == by_id.end()) throw DataError("trace file has no entry for scene '" + s.id + "'");
    counts.push_back(it->second);
    by_id.erase(it);
  }
  if (!by_id.empty()) {
    throw DataError("trace file names unknown scene '" + by_id.begin()->first + "'");
  }
  return counts;
}

}  // namespace azsearch
