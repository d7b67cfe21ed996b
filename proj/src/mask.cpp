#include "segrefine/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Clockwise 8-neighborhood starting at north.
constexpr int kDr8[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDc8[8] = {0, 1, 1, 1, 0, -1, -1, -1};

constexpr int kDr4[4] = {-1, 0, 1, 0};
constexpr int kDc4[4] = {0, 1, 0, -1};

void check_same_frame(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatchError("mask dimensions differ");
  }
}

// 1D squared distance transform (lower envelope of parabolas).
void transform_1d(const std::vector<double>& f, std::vector<double>& out, int n,
                  std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s;
    while (true) {
      if (f[v[k]] == kInf) {
        // Previous parabola is at infinity: the new one dominates everywhere
        // left of it.
        --k;
        if (k < 0) break;
        continue;
      }
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
        if (k < 0) break;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = (k == 0) ? -kInf : s;
    z[k + 1] = kInf;
  }
  if (f[v[0]] == kInf) {
    std::fill(out.begin(), out.begin() + n, kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

// Squared EDT over an arbitrary window of the mask. `window_*` are inclusive.
std::vector<double> squared_distance_window(const BinaryMask& mask, int row0, int col0,
                                            int rows, int cols) {
  std::vector<double> grid(static_cast<std::size_t>(rows) * cols, kInf);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int mr = row0 + r;
      const int mc = col0 + c;
      if (mask.in_bounds(mr, mc) && mask.at(mr, mc)) grid[static_cast<std::size_t>(r) * cols + c] = 0.0;
    }
  }
  const int n = std::max(rows, cols);
  std::vector<double> f(n), out(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  // Columns first, then rows.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f[r] = grid[static_cast<std::size_t>(r) * cols + c];
    transform_1d(f, out, rows, v, z);
    for (int r = 0; r < rows; ++r) grid[static_cast<std::size_t>(r) * cols + c] = out[r];
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f[c] = grid[static_cast<std::size_t>(r) * cols + c];
    transform_1d(f, out, cols, v, z);
    for (int c = 0; c < cols; ++c) grid[static_cast<std::size_t>(r) * cols + c] = out[c];
  }
  return grid;
}

struct Bbox {
  int min_row = 0, min_col = 0, max_row = -1, max_col = -1;
  bool valid() const { return max_row >= min_row && max_col >= min_col; }
};

Bbox bounding_box(const BinaryMask& m) {
  Bbox b{m.height(), m.width(), -1, -1};
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(r, c)) continue;
      b.min_row = std::min(b.min_row, r);
      b.min_col = std::min(b.min_col, c);
      b.max_row = std::max(b.max_row, r);
      b.max_col = std::max(b.max_col, c);
    }
  }
  return b;
}

}  // namespace

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {
  if (width < 1 || height < 1) throw DimensionMismatchError("mask dimensions must be >= 1");
}

void BinaryMask::set(int row, int col, bool value) {
  uint8_t& cell = bits_[index(row, col)];
  area_ += static_cast<int64_t>(value) - static_cast<int64_t>(cell);
  cell = value ? 1 : 0;
}

LabelImage::LabelImage(int width, int height)
    : width_(width), height_(height), labels_(static_cast<std::size_t>(width) * height, 0) {
  if (width < 1 || height < 1) throw DimensionMismatchError("label image dimensions must be >= 1");
}

std::vector<int32_t> LabelImage::instance_labels() const {
  std::set<int32_t> seen;
  for (int32_t v : labels_) {
    if (v > 0) seen.insert(v);
  }
  return {seen.begin(), seen.end()};
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
  struct Info {
    int64_t area;
    PixelCoord first;
    int id;
  };
  std::vector<Info> infos;
  std::vector<PixelCoord> stack;
  const int n_dirs = connectivity == Connectivity::Four ? 4 : 8;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c) || comp[mask.index(r, c)] >= 0) continue;
      const int id = static_cast<int>(infos.size());
      infos.push_back({0, {r, c}, id});
      stack.push_back({r, c});
      comp[mask.index(r, c)] = id;
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        ++infos[id].area;
        for (int d = 0; d < n_dirs; ++d) {
          const int nr = p.row + (n_dirs == 4 ? kDr4[d] : kDr8[d]);
          const int nc = p.col + (n_dirs == 4 ? kDc4[d] : kDc8[d]);
          if (!mask.in_bounds(nr, nc) || !mask.at(nr, nc)) continue;
          if (comp[mask.index(nr, nc)] >= 0) continue;
          comp[mask.index(nr, nc)] = id;
          stack.push_back({nr, nc});
        }
      }
    }
  }
  std::vector<int> order(infos.size());
  for (std::size_t i = 0; i < infos.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (infos[a].area != infos[b].area) return infos[a].area > infos[b].area;
    return infos[a].first < infos[b].first;
  });
  std::vector<int> rank(infos.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  std::vector<BinaryMask> result(infos.size(), BinaryMask(w, h));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int id = comp[mask.index(r, c)];
      if (id >= 0) result[rank[id]].set(r, c, true);
    }
  }
  return result;
}

BinaryMask boundary(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) continue;
      bool edge = false;
      for (int d = 0; d < 4 && !edge; ++d) {
        const int nr = r + kDr4[d];
        const int nc = c + kDc4[d];
        if (!mask.in_bounds(nr, nc) || !mask.at(nr, nc)) edge = true;
      }
      if (edge) out.set(r, c, true);
    }
  }
  return out;
}

std::vector<double> squared_distance_map(const BinaryMask& mask) {
  return squared_distance_window(mask, 0, 0, mask.height(), mask.width());
}

double set_distance(const BinaryMask& a, const BinaryMask& b) {
  check_same_frame(a, b);
  if (a.empty() || b.empty()) throw EmptyMaskError("set_distance requires non-empty masks");
  const std::vector<double> sq = squared_distance_map(a);
  double best = kInf;
  for (int r = 0; r < b.height(); ++r) {
    for (int c = 0; c < b.width(); ++c) {
      if (b.at(r, c)) best = std::min(best, sq[b.index(r, c)]);
    }
  }
  return std::sqrt(best);
}

double set_distance_capped(const BinaryMask& a, const BinaryMask& b, double cap) {
  check_same_frame(a, b);
  if (a.empty() || b.empty()) throw EmptyMaskError("set_distance requires non-empty masks");
  const Bbox ba = bounding_box(a);
  const Bbox bb = bounding_box(b);
  const double gap_r = std::max({0, ba.min_row - bb.max_row, bb.min_row - ba.max_row});
  const double gap_c = std::max({0, ba.min_col - bb.max_col, bb.min_col - ba.max_col});
  if (gap_r * gap_r + gap_c * gap_c > cap * cap) return kInf;
  const int margin = static_cast<int>(std::ceil(cap)) + 1;
  const int row0 = std::max(0, std::min(ba.min_row, bb.min_row) - margin);
  const int col0 = std::max(0, std::min(ba.min_col, bb.min_col) - margin);
  const int row1 = std::min(a.height() - 1, std::max(ba.max_row, bb.max_row) + margin);
  const int col1 = std::min(a.width() - 1, std::max(ba.max_col, bb.max_col) + margin);
  const int rows = row1 - row0 + 1;
  const int cols = col1 - col0 + 1;
  const std::vector<double> sq = squared_distance_window(a, row0, col0, rows, cols);
  double best = kInf;
  for (int r = bb.min_row; r <= bb.max_row; ++r) {
    for (int c = bb.min_col; c <= bb.max_col; ++c) {
      if (b.at(r, c)) {
        best = std::min(best, sq[static_cast<std::size_t>(r - row0) * cols + (c - col0)]);
      }
    }
  }
  const double d = std::sqrt(best);
  return d <= cap ? d : kInf;
}

std::map<int32_t, BinaryMask> extract_instances(const LabelImage& labels) {
  std::map<int32_t, BinaryMask> out;
  for (int32_t label : labels.instance_labels()) {
    out.emplace(label, BinaryMask(labels.width(), labels.height()));
  }
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      const int32_t v = labels.at(r, c);
      if (v > 0) out.at(v).set(r, c, true);
    }
  }
  return out;
}

LabelImage compose_instances(int width, int height, const std::map<int32_t, BinaryMask>& instances) {
  LabelImage out(width, height);
  for (const auto& [label, mask] : instances) {
    if (label <= 0) throw std::invalid_argument("instance labels must be positive");
    if (mask.width() != width || mask.height() != height) {
      throw DimensionMismatchError("instance mask frame mismatch");
    }
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (!mask.at(r, c)) continue;
        if (out.at(r, c) != 0) throw std::invalid_argument("instance masks overlap");
        out.set(r, c, label);
      }
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, double radius) {
  if (radius < 0) throw std::invalid_argument("dilate radius must be >= 0");
  if (mask.empty() || radius == 0.0) return mask;
  const std::vector<double> sq = squared_distance_map(mask);
  BinaryMask out(mask.width(), mask.height());
  const double r2 = radius * radius;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (sq[mask.index(r, c)] <= r2) out.set(r, c, true);
    }
  }
  return out;
}

namespace {

struct MooreStep {
  PixelCoord next;
  PixelCoord back;
};

// One clockwise Moore-neighborhood scan starting just after the backtrack
// cell. Returns the next contour pixel and the new backtrack (the last empty
// cell checked before it), or nothing for an isolated pixel.
std::optional<MooreStep> moore_step(const BinaryMask& comp, PixelCoord cur, PixelCoord back) {
  int k0 = 0;
  for (int d = 0; d < 8; ++d) {
    if (cur.row + kDr8[d] == back.row && cur.col + kDc8[d] == back.col) {
      k0 = d;
      break;
    }
  }
  for (int i = 1; i <= 8; ++i) {
    const int k = (k0 + i) % 8;
    const int nr = cur.row + kDr8[k];
    const int nc = cur.col + kDc8[k];
    if (comp.in_bounds(nr, nc) && comp.at(nr, nc)) {
      const int kb = (k0 + i - 1) % 8;
      return MooreStep{{nr, nc}, {cur.row + kDr8[kb], cur.col + kDc8[kb]}};
    }
  }
  return std::nullopt;
}

// Moore boundary tracing of a single connected component. The start pixel is
// the row-major-first pixel, whose west neighbor is guaranteed to lie outside
// the component. The trace stops when the very first move (start -> second
// pixel) is about to repeat, which closes the loop even for one-pixel-wide
// spurs where the raw (pixel, backtrack) state never recurs.
std::vector<PixelCoord> trace_single(const BinaryMask& comp) {
  PixelCoord start{-1, -1};
  for (int r = 0; r < comp.height() && start.row < 0; ++r) {
    for (int c = 0; c < comp.width(); ++c) {
      if (comp.at(r, c)) {
        start = {r, c};
        break;
      }
    }
  }
  if (start.row < 0) return {};
  const PixelCoord back0{start.row, start.col - 1};
  const std::optional<MooreStep> first = moore_step(comp, start, back0);
  if (!first) return {start};
  std::vector<PixelCoord> points{start};
  PixelCoord cur = start;
  PixelCoord back = back0;
  const int64_t max_steps = 4 * comp.area() + 8;
  for (int64_t step = 0; step < max_steps; ++step) {
    const std::optional<MooreStep> mv = moore_step(comp, cur, back);
    if (!mv) break;
    if (step > 0 && cur == start && mv->next == first->next) break;
    points.push_back(mv->next);
    cur = mv->next;
    back = mv->back;
  }
  if (points.size() > 1 && points.back() == points.front()) points.pop_back();
  return points;
}

}  // namespace

Contour trace_contour(const BinaryMask& mask) {
  Contour contour;
  if (mask.empty()) return contour;
  for (const BinaryMask& comp : connected_components(mask, Connectivity::Eight)) {
    const std::vector<PixelCoord> pts = trace_single(comp);
    contour.points.insert(contour.points.end(), pts.begin(), pts.end());
  }
  return contour;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  check_same_frame(a, b);
  BinaryMask out(a.width(), a.height());
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (a.at(r, c) || b.at(r, c)) out.set(r, c, true);
    }
  }
  return out;
}

BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  check_same_frame(a, b);
  BinaryMask out(a.width(), a.height());
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (a.at(r, c) && b.at(r, c)) out.set(r, c, true);
    }
  }
  return out;
}

BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
  check_same_frame(a, b);
  BinaryMask out(a.width(), a.height());
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (a.at(r, c) && !b.at(r, c)) out.set(r, c, true);
    }
  }
  return out;
}

BinaryMask mask_complement(const BinaryMask& a) {
  BinaryMask out(a.width(), a.height());
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (!a.at(r, c)) out.set(r, c, true);
    }
  }
  return out;
}

int64_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  check_same_frame(a, b);
  int64_t n = 0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) n += (da[i] & db[i]);
  return n;
}

std::string rle_encode(const BinaryMask& mask) {
  std::ostringstream out;
  const auto& bits = mask.data();
  uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == current) {
      ++run;
    } else {
      if (!first) out << ' ';
      out << run;
      first = false;
      current = bits[i];
      run = 1;
    }
  }
  if (!first) out << ' ';
  out << run;
  return out.str();
}

BinaryMask rle_decode(int width, int height, const std::string& rle) {
  BinaryMask out(width, height);
  std::istringstream in(rle);
  std::size_t pos = 0;
  const std::size_t total = static_cast<std::size_t>(width) * height;
  uint64_t run = 0;
  bool value = false;
  while (in >> run) {
    if (pos + run > total) throw CorruptEncodingError("RLE overruns mask size");
    if (value) {
      for (uint64_t i = 0; i < run; ++i) {
        const std::size_t p = pos + i;
        out.set(static_cast<int>(p / width), static_cast<int>(p % width), true);
      }
    }
    pos += run;
    value = !value;
  }
  if (pos != total) throw CorruptEncodingError("RLE does not cover mask");
  return out;
}

}  // namespace segrefine
