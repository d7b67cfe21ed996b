#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace segrefine {

struct PixelCoord {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

enum class Connectivity { Four = 4, Eight = 8 };

// Dense boolean raster. Dimensions are fixed at construction; the set-pixel
// count is maintained incrementally so area() is O(1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int64_t area() const { return area_; }
  bool empty() const { return area_ == 0; }

  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  bool at(int row, int col) const { return bits_[index(row, col)] != 0; }
  void set(int row, int col, bool value);

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  const std::vector<uint8_t>& data() const { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int64_t area_ = 0;
  std::vector<uint8_t> bits_;
};

// Per-pixel instance labeling. Label 0 is background; instance labels are
// positive and need not be contiguous.
class LabelImage {
 public:
  LabelImage() = default;
  LabelImage(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  int32_t at(int row, int col) const { return labels_[index(row, col)]; }
  void set(int row, int col, int32_t label) { labels_[index(row, col)] = label; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  const std::vector<int32_t>& data() const { return labels_; }
  std::vector<int32_t>& data() { return labels_; }

  // Distinct positive labels, ascending.
  std::vector<int32_t> instance_labels() const;

  friend bool operator==(const LabelImage&, const LabelImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int32_t> labels_;
};

// Ordered list of on-mask pixels; consecutive points are 8-adjacent and the
// sequence closes back on its first point for masks away from the image
// border. Multi-component masks contribute one traced loop per component,
// concatenated in component order.
struct Contour {
  std::vector<PixelCoord> points;
};

// Connected components of the set pixels, ordered by decreasing area with
// ties broken by the smallest (row, col) of each component's first pixel.
std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity);

// Set pixels with at least one 4-neighbor outside the mask; the image border
// counts as outside.
BinaryMask boundary(const BinaryMask& mask);

// Minimum Euclidean distance between any pixel of `a` and any pixel of `b`.
// Throws EmptyMaskError if either mask has no set pixels.
double set_distance(const BinaryMask& a, const BinaryMask& b);

// As set_distance, but returns infinity early when the distance is certainly
// greater than `cap` (bounding-box prefilter plus windowed transform).
double set_distance_capped(const BinaryMask& a, const BinaryMask& b, double cap);

// One mask per distinct positive label; ordered by label.
std::map<int32_t, BinaryMask> extract_instances(const LabelImage& labels);

// Inverse of extract_instances. Masks must be pairwise disjoint.
LabelImage compose_instances(int width, int height, const std::map<int32_t, BinaryMask>& instances);

// Pixels within Euclidean distance <= radius of a set pixel.
BinaryMask dilate(const BinaryMask& mask, double radius);

// Exact squared Euclidean distance from every pixel to the nearest set pixel
// (Felzenszwalb-Huttenlocher two-pass transform). Empty mask yields a grid of
// +infinity.
std::vector<double> squared_distance_map(const BinaryMask& mask);

// Moore boundary tracing (8-connectivity).
Contour trace_contour(const BinaryMask& mask);

// Utility set algebra.
BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_complement(const BinaryMask& a);
int64_t intersection_area(const BinaryMask& a, const BinaryMask& b);

// Run-length encoding of the bit grid in row-major order. The string is a
// space-separated list of run lengths, alternating zero-runs and one-runs and
// starting with the zero-run count.
std::string rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(int width, int height, const std::string& rle);

}  // namespace segrefine
