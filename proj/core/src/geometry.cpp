#include "azsearch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "azsearch/error.hpp"

namespace azsearch {

bool Box::valid() const noexcept {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x2 > x1 && y2 > y1;
}

std::ostream& operator<<(std::ostream& os, const Box& box) {
  return os << '[' << box.x1 << ',' << box.y1 << ',' << box.x2 << ',' << box.y2 << ']';
}

Box make_box(double x1, double y1, double x2, double y2) {
  Box box{x1, y1, x2, y2};
  if (!box.valid()) {
    std::ostringstream msg;
    msg << "invalid box " << box << " (need finite coordinates with x2 > x1 and y2 > y1)";
    throw DataError(msg.str());
  }
  return box;
}

Box box_from_center(double cx, double cy, double w, double h) noexcept {
  return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

bool RegressionTarget::finite() const noexcept {
  return std::isfinite(tx) && std::isfinite(ty) && std::isfinite(tw) && std::isfinite(th);
}

const char* to_string(PriorKind kind) noexcept {
  switch (kind) {
    case PriorKind::self:
      return "self";
    case PriorKind::vertical_stripe:
      return "vertical-stripe";
    case PriorKind::horizontal_stripe:
      return "horizontal-stripe";
    case PriorKind::neighbor_square:
      return "neighbor-square";
  }
  return "unknown";
}

PriorKind prior_kind_from_string(const std::string& name) {
  for (auto kind : {PriorKind::self, PriorKind::vertical_stripe, PriorKind::horizontal_stripe,
                    PriorKind::neighbor_square}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown prior kind '" + name + "'");
}

const PriorTable& default_priors() {
  using K = PriorKind;
  static const PriorTable table = {{
      {0, {0.0, 0.0, 1.0, 1.0}, K::self},
      {1, {0.0, -0.25, 0.5, 1.25}, K::vertical_stripe},
      {2, {0.25, -0.25, 0.75, 1.25}, K::vertical_stripe},
      {3, {0.5, -0.25, 1.0, 1.25}, K::vertical_stripe},
      {4, {-0.25, 0.0, 1.25, 0.5}, K::horizontal_stripe},
      {5, {-0.25, 0.25, 1.25, 0.75}, K::horizontal_stripe},
      {6, {-0.25, 0.5, 1.25, 1.0}, K::horizontal_stripe},
      {7, {-0.5, 0.0, 0.5, 1.0}, K::neighbor_square},
      {8, {0.5, 0.0, 1.5, 1.0}, K::neighbor_square},
      {9, {0.0, -0.5, 1.0, 0.5}, K::neighbor_square},
      {10, {0.0, 0.5, 1.0, 1.5}, K::neighbor_square},
  }};
  return table;
}

void validate_priors(const PriorTable& priors) {
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const auto& p = priors[i];
    if (p.index != static_cast<int>(i)) {
      throw ConfigError("prior table entry " + std::to_string(i) + " has index " +
                        std::to_string(p.index));
    }
    if (!p.rect.valid()) {
      throw ConfigError("prior " + std::to_string(i) + " has a non-positive extent");
    }
  }
  if (priors[0].rect != Box{0.0, 0.0, 1.0, 1.0}) {
    throw ConfigError("prior 0 must be the identity rect [0,0,1,1]");
  }
}

double intersection_area(const Box& a, const Box& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

RegressionTarget encode_box(const Box& reference, const Box& target) noexcept {
  const double wr = reference.width();
  const double hr = reference.height();
  return RegressionTarget{
      (target.cx() - reference.cx()) / wr,
      (target.cy() - reference.cy()) / hr,
      std::log(target.width() / wr),
      std::log(target.height() / hr),
  };
}

Box decode_box(const Box& reference, const RegressionTarget& t) {
  const double w = reference.width() * std::exp(t.tw);
  const double h = reference.height() * std::exp(t.th);
  const double cx = reference.cx() + t.tx * reference.width();
  const double cy = reference.cy() + t.ty * reference.height();
  const Box out = box_from_center(cx, cy, w, h);
  if (!std::isfinite(w) || !std::isfinite(h) || !out.valid()) {
    std::ostringstream msg;
    msg << "decode_box produced a non-finite or degenerate box from reference " << reference
        << " and target (" << t.tx << ',' << t.ty << ',' << t.tw << ',' << t.th << ')';
    throw NumericError(msg.str());
  }
  return out;
}

std::array<Box, kNumChildren> divide_region(const Box& r) noexcept {
  const double mx = r.cx();
  const double my = r.cy();
  const double qw = 0.25 * r.width();
  const double qh = 0.25 * r.height();
  return {{
      {r.x1, r.y1, mx, my},
      {mx, r.y1, r.x2, my},
      {r.x1, my, mx, r.y2},
      {mx, my, r.x2, r.y2},
      {r.x1 + qw, r.y1 + qh, r.x2 - qw, r.y2 - qh},
  }};
}

Box instantiate_prior(const Box& anchor, const PriorTemplate& prior) noexcept {
  const double w = anchor.width();
  const double h = anchor.height();
  return Box{anchor.x1 + prior.rect.x1 * w, anchor.y1 + prior.rect.y1 * h,
             anchor.x1 + prior.rect.x2 * w, anchor.y1 + prior.rect.y2 * h};
}

std::optional<Box> clip_to_frame(const Box& box, double width, double height) noexcept {
  const Box clipped{std::max(box.x1, 0.0), std::max(box.y1, 0.0), std::min(box.x2, width),
                    std::min(box.y2, height)};
  if (!(clipped.x2 > clipped.x1) || !(clipped.y2 > clipped.y1)) return std::nullopt;
  return clipped;
}

Box hflip_box(const Box& box, double frame_width) noexcept {
  return Box{frame_width - box.x2, box.y1, frame_width - box.x1, box.y2};
}

void to_json(nlohmann::json& j, const Box& box) {
  j = nlohmann::json::array({box.x1, box.y1, box.x2, box.y2});
}

void from_json(const nlohmann::json& j, Box& box) {
  if (!j.is_array() || j.size() != 4) {
    throw DataError("a box must be a JSON array [x1,y1,x2,y2], got " + j.dump());
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError("box coordinates must be numbers, got " + j.dump());
  }
  box = make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

void to_json(nlohmann::json& j, const RegressionTarget& t) {
  j = nlohmann::json::array({t.tx, t.ty, t.tw, t.th});
}

void from_json(const nlohmann::json& j, RegressionTarget& t) {
  if (!j.is_array() || j.size() != 4) {
    throw DataError("a regression target must be an array of 4 numbers, got " + j.dump());
  }
  t = RegressionTarget{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>()};
  if (!t.finite()) throw DataError("regression target must be finite");
}

nlohmann::json priors_to_json(const PriorTable& priors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : priors) {
    arr.push_back({{"index", p.index}, {"kind", to_string(p.kind)}, {"rect", p.rect}});
  }
  return nlohmann::json{{"priors", arr}};
}

PriorTable priors_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("priors") || !j.at("priors").is_array()) {
    throw ConfigError("prior table must be an object with a \"priors\" array");
  }
  const auto& arr = j.at("priors");
  if (arr.size() != kNumPriors) {
    throw ConfigError("prior table must hold exactly " + std::to_string(kNumPriors) +
                      " templates, got " + std::to_string(arr.size()));
  }
  PriorTable table{};
  for (std::size_t i = 0; i < kNumPriors; ++i) {
    const auto& e = arr[i];
    try {
      table[i].index = e.at("index").get<int>();
      table[i].kind = prior_kind_from_string(e.at("kind").get<std::string>());
      table[i].rect = e.at("rect").get<Box>();
    } catch (const DataError& err) {
      throw ConfigError("prior " + std::to_string(i) + ": " + err.what());
    } catch (const nlohmann::json::exception& err) {
      throw ConfigError("prior " + std::to_string(i) + ": " + err.what());
    }
  }
  validate_priors(table);
  return table;
}

}  // namespace azsearch
