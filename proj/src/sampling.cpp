#include "segrefine/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "segrefine/errors.hpp"
#include "segrefine/scene.hpp"

namespace segrefine {

namespace {

constexpr double kPathEps = 1e-4;
constexpr double kGaussianSigma = 2.0;
constexpr int kGaussianRadius = 5;

// Heuristic delete-score weights on (v_node - v_background), calibrated for
// the synthetic tabletop generator: flat blobs at table depth land above the
// 0.7 deletion threshold while objects >= 1 cm above the table land well
// below it.
constexpr double kHeuristicDeleteBias = 0.8;
constexpr double kHeuristicDeleteAreaWeight = -0.5;
constexpr double kHeuristicDeleteDepthMeanWeight = 150.0;
constexpr double kHeuristicDeleteExtentZWeight = -30.0;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double entry_cost(double p) { return -std::log((p + kPathEps) / (1.0 + kPathEps)); }

// Radius-1 Euclidean dilation = the 4-neighborhood plus the pixel itself.
BinaryMask dilate1(const BinaryMask& mask) {
  BinaryMask out = mask;
  static const int dr[4] = {-1, 0, 1, 0};
  static const int dc[4] = {0, 1, 0, -1};
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) continue;
      for (int d = 0; d < 4; ++d) {
        const int nr = r + dr[d];
        const int nc = c + dc[d];
        if (out.in_bounds(nr, nc)) out.set(nr, nc, true);
      }
    }
  }
  return out;
}

}  // namespace

class BoundaryMapProvider {
 public:
  BoundaryMapProvider(const Scene& scene, const BoundaryProviderConfig& config)
      : scene_(&scene), config_(config) {
    switch (config.kind) {
      case BoundaryProviderKind::GroundTruth: {
        if (!scene.labels) {
          throw ProviderUnavailableError("GroundTruth boundary provider needs scene labels");
        }
        gt_boundaries_ = BinaryMask(scene.width, scene.height);
        for (const auto& [label, mask] : extract_instances(*scene.labels)) {
          gt_boundaries_ = mask_union(gt_boundaries_, boundary(mask));
        }
        break;
      }
      case BoundaryProviderKind::DepthGradient: {
        base_.assign(static_cast<std::size_t>(scene.width) * scene.height, 0.0);
        for (int r = 0; r < scene.height; ++r) {
          for (int c = 0; c < scene.width; ++c) {
            const auto d = [&](int rr, int cc) {
              rr = std::clamp(rr, 0, scene.height - 1);
              cc = std::clamp(cc, 0, scene.width - 1);
              return scene.depth[scene.pixel_index(rr, cc)];
            };
            const double gr = (d(r + 1, c) - d(r - 1, c)) / 2.0;
            const double gc = (d(r, c + 1) - d(r, c - 1)) / 2.0;
            const double mag = std::sqrt(gr * gr + gc * gc);
            base_[scene.pixel_index(r, c)] = std::min(1.0, mag / config.gradient_scale);
          }
        }
        break;
      }
      case BoundaryProviderKind::FromFile: {
        int w = 0, h = 0;
        base_ = load_unit_raster(config.file, w, h);
        if (w != scene.width || h != scene.height) {
          throw DimensionMismatchError("boundary map file frame mismatch: " +
                                       config_.file.string());
        }
        break;
      }
    }
  }

  BoundaryMap map(const BinaryMask& mask) const {
    if (mask.width() != scene_->width || mask.height() != scene_->height) {
      throw DimensionMismatchError("mask frame does not match scene");
    }
    BoundaryMap bmap;
    bmap.width = mask.width();
    bmap.height = mask.height();
    bmap.probs.assign(static_cast<std::size_t>(mask.width()) * mask.height(), 0.0);
    if (config_.kind == BoundaryProviderKind::GroundTruth) {
      // Internal boundaries: ground-truth instance boundaries inside the mask
      // that are not the mask's own outer boundary, dilated by one pixel.
      BinaryMask internal = mask_difference(mask_intersection(gt_boundaries_, mask), boundary(mask));
      if (internal.empty()) return bmap;
      internal = mask_intersection(dilate1(internal), mask);
      const auto& bits = internal.data();
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bmap.probs[i] = 1.0;
      }
    } else {
      const auto& bits = mask.data();
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bmap.probs[i] = base_[i];
      }
    }
    return bmap;
  }

 private:
  const Scene* scene_;
  BoundaryProviderConfig config_;
  BinaryMask gt_boundaries_;
  std::vector<double> base_;
};

BoundaryMap boundary_map(const Scene& scene, const BinaryMask& mask,
                         const BoundaryProviderConfig& provider) {
  return BoundaryMapProvider(scene, provider).map(mask);
}

namespace {

double delete_score_from_features(const FeatureVector& node, const FeatureVector& background) {
  namespace fi = feature_index;
  const double d_area = node[fi::kAreaFraction] - background[fi::kAreaFraction];
  const double d_depth = node[fi::kDepthMean] - background[fi::kDepthMean];
  const double d_extz = node[fi::kExtentZ] - background[fi::kExtentZ];
  return sigmoid(kHeuristicDeleteBias + kHeuristicDeleteAreaWeight * d_area +
                 kHeuristicDeleteDepthMeanWeight * d_depth + kHeuristicDeleteExtentZWeight * d_extz);
}

double gt_delete_score(const Scene& scene, const BinaryMask& mask) {
  if (!scene.labels) {
    throw ProviderUnavailableError("GroundTruth delete provider needs scene labels");
  }
  double best_iou = 0.0;
  for (const auto& [label, gt] : extract_instances(*scene.labels)) {
    const int64_t inter = intersection_area(mask, gt);
    if (inter == 0) continue;
    const int64_t uni = mask.area() + gt.area() - inter;
    best_iou = std::max(best_iou, static_cast<double>(inter) / static_cast<double>(uni));
  }
  return 1.0 - best_iou;
}

}  // namespace

double delete_score(const Scene& scene, const SegGraph& graph, NodeId node,
                    DeleteProviderKind provider) {
  if (node == SegGraph::kBackgroundId) {
    throw std::invalid_argument("delete_score applies to instance nodes only");
  }
  const GraphNode& gn = graph.node(node);
  if (provider == DeleteProviderKind::GroundTruth) return gt_delete_score(scene, gn.mask);
  return delete_score_from_features(gn.features,
                                    graph.node(SegGraph::kBackgroundId).features);
}

double delete_score_mask(const Scene& scene, const SegGraph& graph, const GraphBuilder& builder,
                         const BinaryMask& mask, DeleteProviderKind provider) {
  if (provider == DeleteProviderKind::GroundTruth) return gt_delete_score(scene, mask);
  return delete_score_from_features(builder.encode_node(mask),
                                    graph.node(SegGraph::kBackgroundId).features);
}

namespace {

std::size_t draw_categorical(Rng& rng, const std::vector<double>& weights, double total) {
  double x = rng.next_unit() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    x -= weights[i];
    if (x < 0.0) return i;
  }
  return last_positive;
}

}  // namespace

SplitProposal sample_split(const BinaryMask& mask, const BoundaryMap& bmap, Rng& rng, double nu) {
  if (nu <= 0.0 || nu >= 1.0) throw ConfigInvalidError("nu", "must lie in (0, 1)");
  if (bmap.width != mask.width() || bmap.height != mask.height()) {
    throw DimensionMismatchError("boundary map frame does not match mask");
  }
  const Contour contour = trace_contour(mask);
  // distinct contour pixels, first occurrence kept
  std::vector<PixelCoord> pixels;
  {
    std::set<PixelCoord> seen;
    for (const PixelCoord& p : contour.points) {
      if (seen.insert(p).second) pixels.push_back(p);
    }
  }
  if (pixels.size() < 2) {
    throw NoPositiveWeightError("mask contour has fewer than two distinct pixels");
  }

  // threshold, component sizes
  BinaryMask above(mask.width(), mask.height());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (bmap.at(r, c) >= nu) above.set(r, c, true);
    }
  }
  std::vector<int64_t> comp_size(static_cast<std::size_t>(mask.width()) * mask.height(), 0);
  for (const BinaryMask& comp : connected_components(above, Connectivity::Eight)) {
    const auto& bits = comp.data();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) comp_size[i] = comp.area();
    }
  }

  // Gaussian-weighted local average of component sizes at each contour pixel
  std::vector<double> weights(pixels.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    double acc = 0.0;
    for (int dr = -kGaussianRadius; dr <= kGaussianRadius; ++dr) {
      for (int dc = -kGaussianRadius; dc <= kGaussianRadius; ++dc) {
        const int r = pixels[k].row + dr;
        const int c = pixels[k].col + dc;
        if (!mask.in_bounds(r, c)) continue;
        const int64_t size = comp_size[mask.index(r, c)];
        if (size == 0) continue;
        const double g =
            std::exp(-(dr * dr + dc * dc) / (2.0 * kGaussianSigma * kGaussianSigma));
        acc += g * static_cast<double>(size);
      }
    }
    weights[k] = acc;
    total += acc;
  }
  if (total <= 0.0) throw NoPositiveWeightError("no split-able boundary near the mask contour");

  const std::size_t start_idx = draw_categorical(rng, weights, total);
  const double remaining = total - weights[start_idx];
  if (remaining <= 0.0) {
    throw NoPositiveWeightError("only one contour pixel carries split weight");
  }
  std::vector<double> end_weights = weights;
  end_weights[start_idx] = 0.0;
  const std::size_t end_idx = draw_categorical(rng, end_weights, remaining);
  const PixelCoord start = pixels[start_idx];
  const PixelCoord goal = pixels[end_idx];

  // Dijkstra over mask pixels; cost to enter a pixel is
  // -log((p + eps) / (1 + eps)), diagonal steps scaled by sqrt(2).
  const int w = mask.width();
  const int h = mask.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int32_t> parent(n, -1);
  using QueueItem = std::tuple<double, int, int>;  // (dist, row, col)
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<QueueItem>> queue;
  dist[mask.index(start.row, start.col)] = 0.0;
  queue.emplace(0.0, start.row, start.col);
  static const int dr8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static const int dc8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  const double root2 = std::sqrt(2.0);
  while (!queue.empty()) {
    const auto [d, r, c] = queue.top();
    queue.pop();
    const std::size_t i = mask.index(r, c);
    if (d > dist[i]) continue;
    if (r == goal.row && c == goal.col) break;
    for (int k = 0; k < 8; ++k) {
      const int nr = r + dr8[k];
      const int nc = c + dc8[k];
      if (!mask.in_bounds(nr, nc) || !mask.at(nr, nc)) continue;
      const std::size_t ni = mask.index(nr, nc);
      const double scale = (dr8[k] != 0 && dc8[k] != 0) ? root2 : 1.0;
      const double nd = d + scale * entry_cost(bmap.at(nr, nc));
      if (nd < dist[ni]) {
        dist[ni] = nd;
        parent[ni] = static_cast<int32_t>(i);
        queue.emplace(nd, nr, nc);
      }
    }
  }
  if (!std::isfinite(dist[mask.index(goal.row, goal.col)])) {
    throw PathNotFoundError("split endpoints are not connected through the mask");
  }

  SplitProposal proposal;
  for (std::size_t i = mask.index(goal.row, goal.col);;) {
    proposal.path.push_back({static_cast<int>(i) / w, static_cast<int>(i) % w});
    if (parent[i] < 0) break;
    i = static_cast<std::size_t>(parent[i]);
  }
  std::reverse(proposal.path.begin(), proposal.path.end());
  double mean_prob = 0.0;
  for (const PixelCoord& p : proposal.path) mean_prob += bmap.at(p.row, p.col);
  proposal.score = mean_prob / static_cast<double>(proposal.path.size());
  return proposal;
}

double merge_score(const BoundaryMap& bmap_union, const BinaryMask& mask_i,
                   const BinaryMask& mask_j) {
  const BinaryMask pair_boundary = mask_union(boundary(mask_i), boundary(mask_j));
  double num = 0.0, den = 0.0;
  for (int r = 0; r < bmap_union.height; ++r) {
    for (int c = 0; c < bmap_union.width; ++c) {
      const double p = bmap_union.at(r, c);
      if (p <= 0.0) continue;
      den += p;
      if (pair_boundary.at(r, c)) num += p;
    }
  }
  if (den <= 0.0) return 1.0;  // no split-able boundary anywhere: maximally merge-able
  return 1.0 - num / den;
}

SegGraph apply_split(const GraphBuilder& builder, const SegGraph& graph,
                     const SplitProposal& proposal) {
  const BinaryMask& mask = graph.node(proposal.mask_id).mask;
  // Rasterize the trajectory 4-connectedly: a diagonal step leaves a gap that
  // 8-connected components can cross, so each diagonal move also removes one
  // intermediate pixel. All removed pixels are reassigned below.
  BinaryMask path_mask(mask.width(), mask.height());
  for (std::size_t t = 0; t < proposal.path.size(); ++t) {
    const PixelCoord& p = proposal.path[t];
    if (mask.in_bounds(p.row, p.col) && mask.at(p.row, p.col)) path_mask.set(p.row, p.col, true);
    if (t > 0) {
      const PixelCoord& q = proposal.path[t - 1];
      if (p.row != q.row && p.col != q.col && mask.in_bounds(q.row, p.col) &&
          mask.at(q.row, p.col)) {
        path_mask.set(q.row, p.col, true);
      }
    }
  }
  const BinaryMask removed = mask_difference(mask, path_mask);
  const std::vector<BinaryMask> comps = connected_components(removed, Connectivity::Eight);
  if (comps.size() < 2) {
    throw DegeneratePathError("path does not separate the mask into two components");
  }
  // Route each path pixel to its nearest component; distance ties go to the
  // smallest component so that near-even splits stay balanced within the
  // path's own area.
  std::vector<std::vector<double>> dists;
  for (const BinaryMask& comp : comps) dists.push_back(squared_distance_map(comp));
  std::vector<BinaryMask> pieces = comps;
  for (int r = 0; r < path_mask.height(); ++r) {
    for (int c = 0; c < path_mask.width(); ++c) {
      if (!path_mask.at(r, c)) continue;
      std::size_t best = 0;
      for (std::size_t k = 1; k < comps.size(); ++k) {
        if (dists[k][path_mask.index(r, c)] <= dists[best][path_mask.index(r, c)]) best = k;
      }
      pieces[best].set(r, c, true);
    }
  }
  SegGraph out = graph;
  builder.remove_instance(out, proposal.mask_id);
  for (const BinaryMask& piece : pieces) builder.insert_instance(out, piece);
  // the instance union is unchanged; the background node stays as-is
  return out;
}

SegGraph apply_merge(const GraphBuilder& builder, const SegGraph& graph, NodeId a, NodeId b) {
  if (graph.nodes.count(a) == 0 || graph.nodes.count(b) == 0) {
    throw UnknownNodeError("merge with unknown node");
  }
  if (!graph.has_edge(a, b)) {
    throw NotNeighborsError("merge requires the nodes to be graph neighbors");
  }
  const BinaryMask merged = mask_union(graph.node(a).mask, graph.node(b).mask);
  SegGraph out = graph;
  builder.remove_instance(out, a);
  builder.remove_instance(out, b);
  builder.insert_instance(out, merged);
  return out;
}

SegGraph apply_delete(const GraphBuilder& builder, const SegGraph& graph, NodeId node) {
  SegGraph out = graph;
  builder.remove_instance(out, node);
  builder.refresh_background(out);
  return out;
}

SegGraph apply_add(const GraphBuilder& builder, const SegGraph& graph, const BinaryMask& mask) {
  SegGraph out = graph;
  builder.insert_instance(out, mask);
  builder.refresh_background(out);
  return out;
}

SegGraph apply_perturbation(const GraphBuilder& builder, const SegGraph& graph,
                            const Perturbation& perturbation) {
  switch (perturbation.kind) {
    case OpKind::Split:
      return apply_split(builder, graph, std::get<SplitProposal>(perturbation.payload));
    case OpKind::Merge: {
      const auto& m = std::get<MergeProposal>(perturbation.payload);
      return apply_merge(builder, graph, m.a, m.b);
    }
    case OpKind::Delete:
      return apply_delete(builder, graph, std::get<DeleteProposal>(perturbation.payload).node);
    case OpKind::Add:
      return apply_add(builder, graph, std::get<AddProposal>(perturbation.payload).mask);
  }
  throw std::logic_error("unreachable");
}

std::vector<Perturbation> propose_splits(const Scene& scene, const SegGraph& graph,
                                         const ProposalConfig& config, Rng& rng) {
  const BoundaryMapProvider provider(scene, config.boundary_provider);
  std::vector<Perturbation> out;
  for (const NodeId id : graph.instance_ids()) {
    const BinaryMask& mask = graph.node(id).mask;
    try {
      SplitProposal proposal = sample_split(mask, provider.map(mask), rng, config.nu);
      proposal.mask_id = id;
      Perturbation p;
      p.kind = OpKind::Split;
      p.score = proposal.score;
      p.payload = std::move(proposal);
      out.push_back(std::move(p));
    } catch (const NoPositiveWeightError&) {
    } catch (const PathNotFoundError&) {
    }
  }
  return out;
}

std::vector<Perturbation> propose_merges(const Scene& scene, const SegGraph& graph,
                                         const ProposalConfig& config) {
  const BoundaryMapProvider provider(scene, config.boundary_provider);
  std::vector<Perturbation> out;
  for (const auto& [key, features] : graph.edges) {
    const BinaryMask& mi = graph.node(key.first).mask;
    const BinaryMask& mj = graph.node(key.second).mask;
    const BinaryMask united = mask_union(mi, mj);
    MergeProposal proposal{key.first, key.second, merge_score(provider.map(united), mi, mj)};
    Perturbation p;
    p.kind = OpKind::Merge;
    p.score = proposal.score;
    p.payload = proposal;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Perturbation> propose_deletes(const Scene& scene, const SegGraph& graph,
                                          const ProposalConfig& config) {
  std::vector<Perturbation> out;
  for (const NodeId id : graph.instance_ids()) {
    DeleteProposal proposal{id, delete_score(scene, graph, id, config.delete_provider)};
    Perturbation p;
    p.kind = OpKind::Delete;
    p.score = proposal.score;
    p.payload = proposal;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Perturbation> propose_adds(const Scene& scene, const SegGraph& graph,
                                       const GraphBuilder& builder, const BinaryMask& foreground,
                                       const ProposalConfig& config) {
  BinaryMask residual = foreground;
  for (const NodeId id : graph.instance_ids()) {
    residual = mask_difference(residual, graph.node(id).mask);
  }
  std::vector<Perturbation> out;
  for (const BinaryMask& comp : connected_components(residual, Connectivity::Eight)) {
    if (comp.area() < config.min_add_area) continue;
    const double d = delete_score_mask(scene, graph, builder, comp, config.delete_provider);
    if (d >= config.add_threshold) continue;
    AddProposal proposal{comp, 1.0 - d};
    Perturbation p;
    p.kind = OpKind::Add;
    p.score = proposal.score;
    p.payload = std::move(proposal);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace segrefine
