#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace azsearch {

/// Axis-aligned rectangle in continuous pixel coordinates, corner based,
/// origin at the top-left. A valid box has x2 > x1 and y2 > y1.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double cx() const noexcept { return 0.5 * (x1 + x2); }
  double cy() const noexcept { return 0.5 * (y1 + y2); }
  bool valid() const noexcept;

  bool contains(const Box& other) const noexcept {
    return other.x1 >= x1 && other.y1 >= y1 && other.x2 <= x2 && other.y2 <= y2;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

std::ostream& operator<<(std::ostream& os, const Box& box);

/// Builds a box and throws DataError when it violates the Box invariant.
Box make_box(double x1, double y1, double x2, double y2);

Box box_from_center(double cx, double cy, double w, double h) noexcept;

/// Offsets and log-scales relative to a reference box (Fast R-CNN form).
struct RegressionTarget {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  bool finite() const noexcept;
  friend bool operator==(const RegressionTarget&, const RegressionTarget&) = default;
};

enum class PriorKind { self, vertical_stripe, horizontal_stripe, neighbor_square };

const char* to_string(PriorKind kind) noexcept;
PriorKind prior_kind_from_string(const std::string& name);

/// A sub-region template. `rect` is expressed with the anchor mapped onto
/// the unit square; it may extend outside [0,1].
struct PriorTemplate {
  int index = 0;
  Box rect;
  PriorKind kind = PriorKind::self;

  friend bool operator==(const PriorTemplate&, const PriorTemplate&) = default;
};

inline constexpr std::size_t kNumPriors = 11;
inline constexpr std::size_t kNumChildren = 5;

using PriorTable = std::array<PriorTemplate, kNumPriors>;

/// Self, three vertical stripes, three horizontal stripes and four
/// half-shifted neighbor squares.
const PriorTable& default_priors();

/// Checks template count, ordering, index 0 identity and positive extents.
void validate_priors(const PriorTable& priors);

double intersection_area(const Box& a, const Box& b) noexcept;
double iou(const Box& a, const Box& b) noexcept;

RegressionTarget encode_box(const Box& reference, const Box& target) noexcept;

/// Inverse of encode_box. Throws NumericError if exp() of the scale terms
/// overflows or the resulting box is degenerate.
Box decode_box(const Box& reference, const RegressionTarget& t);

/// Four half-size corner quadrants (top-left, top-right, bottom-left,
/// bottom-right) followed by a half-size box sharing the parent's center.
std::array<Box, kNumChildren> divide_region(const Box& region) noexcept;

Box instantiate_prior(const Box& anchor, const PriorTemplate& prior) noexcept;

/// Intersection with [0,0,width,height]; nullopt when nothing with positive
/// area remains.
std::optional<Box> clip_to_frame(const Box& box, double width, double height) noexcept;

Box hflip_box(const Box& box, double frame_width) noexcept;

// JSON: a box is [x1,y1,x2,y2]; a prior table is {"priors":[...]}.
void to_json(nlohmann::json& j, const Box& box);
void from_json(const nlohmann::json& j, Box& box);
void to_json(nlohmann::json& j, const RegressionTarget& t);
void from_json(const nlohmann::json& j, RegressionTarget& t);

nlohmann::json priors_to_json(const PriorTable& priors);
PriorTable priors_from_json(const nlohmann::json& j);

}  // namespace azsearch
