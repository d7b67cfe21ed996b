#include "segrefine/seg_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segrefine/errors.hpp"

namespace segrefine {

std::vector<NodeId> SegGraph::instance_ids() const {
  std::vector<NodeId> ids;
  for (const auto& [id, node] : nodes) {
    if (id != kBackgroundId) ids.push_back(id);
  }
  return ids;
}

bool SegGraph::has_edge(NodeId a, NodeId b) const {
  return edges.count({std::min(a, b), std::max(a, b)}) > 0;
}

const GraphNode& SegGraph::node(NodeId id) const {
  const auto it = nodes.find(id);
  if (it == nodes.end()) throw UnknownNodeError("unknown node id: " + std::to_string(id));
  return it->second;
}

GraphBuilder::GraphBuilder(const Scene& scene, EncoderConfig encoder, double edge_threshold)
    : scene_(&scene),
      cloud_(backproject(scene)),
      encoder_(encoder),
      edge_threshold_(edge_threshold) {
  if (encoder_.d_v < feature_index::kCount) {
    throw ConfigInvalidError("d_v", "node feature dimension must be >= 22");
  }
  if (encoder_.d_e < 1) throw ConfigInvalidError("d_e", "edge feature dimension must be >= 1");
}

FeatureVector GraphBuilder::encode_impl(const BinaryMask& mask, int dim, bool allow_empty) const {
  FeatureVector out(static_cast<std::size_t>(dim), 0.0);
  if (mask.empty()) {
    if (allow_empty) return out;
    throw EmptyMaskError("cannot encode an empty instance mask");
  }
  if (mask.width() != scene_->width || mask.height() != scene_->height) {
    throw DimensionMismatchError("mask frame does not match scene");
  }
  const int w = mask.width();
  const int h = mask.height();
  const double area = static_cast<double>(mask.area());

  double sum_r = 0.0, sum_c = 0.0;
  int min_r = h, min_c = w, max_r = -1, max_c = -1;
  double rgb_sum[3] = {0, 0, 0}, rgb_sq[3] = {0, 0, 0};
  double depth_sum = 0.0, depth_sq = 0.0;
  double depth_min = std::numeric_limits<double>::infinity();
  double depth_max = -std::numeric_limits<double>::infinity();
  double xyz_min[3], xyz_max[3];
  for (int k = 0; k < 3; ++k) {
    xyz_min[k] = std::numeric_limits<double>::infinity();
    xyz_max[k] = -std::numeric_limits<double>::infinity();
  }
  int64_t valid_depth = 0;
  bool border = false;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      sum_r += r;
      sum_c += c;
      min_r = std::min(min_r, r);
      min_c = std::min(min_c, c);
      max_r = std::max(max_r, r);
      max_c = std::max(max_c, c);
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) border = true;
      const std::size_t px = scene_->pixel_index(r, c);
      for (int k = 0; k < 3; ++k) {
        const double v = scene_->rgb[px * 3 + k] / 255.0;
        rgb_sum[k] += v;
        rgb_sq[k] += v * v;
      }
      const double d = scene_->depth[px];
      if (d > 0.0) {
        ++valid_depth;
        depth_sum += d;
        depth_sq += d * d;
        depth_min = std::min(depth_min, d);
        depth_max = std::max(depth_max, d);
        const std::size_t ci = cloud_.index(r, c);
        for (int k = 0; k < 3; ++k) {
          xyz_min[k] = std::min(xyz_min[k], cloud_.xyz[ci + k]);
          xyz_max[k] = std::max(xyz_max[k], cloud_.xyz[ci + k]);
        }
      }
    }
  }

  namespace fi = feature_index;
  out[fi::kCentroidRow] = (sum_r / area + 0.5) / h;
  out[fi::kCentroidCol] = (sum_c / area + 0.5) / w;
  out[fi::kAreaFraction] = area / (static_cast<double>(w) * h);
  out[fi::kBboxMinRow] = static_cast<double>(min_r) / h;
  out[fi::kBboxMinCol] = static_cast<double>(min_c) / w;
  out[fi::kBboxMaxRow] = static_cast<double>(max_r + 1) / h;
  out[fi::kBboxMaxCol] = static_cast<double>(max_c + 1) / w;
  out[fi::kBoundaryRatio] = static_cast<double>(boundary(mask).area()) / area;
  for (int k = 0; k < 3; ++k) {
    const double mean = rgb_sum[k] / area;
    out[fi::kRgbMean + k] = mean;
    out[fi::kRgbStd + k] = std::sqrt(std::max(0.0, rgb_sq[k] / area - mean * mean));
  }
  if (valid_depth > 0) {
    const double dmean = depth_sum / valid_depth;
    out[fi::kDepthMean] = dmean;
    out[fi::kDepthStd] = std::sqrt(std::max(0.0, depth_sq / valid_depth - dmean * dmean));
    out[fi::kDepthMin] = depth_min;
    out[fi::kDepthMax] = depth_max;
    out[fi::kExtentX] = xyz_max[0] - xyz_min[0];
    out[fi::kExtentY] = xyz_max[1] - xyz_min[1];
    out[fi::kExtentZ] = xyz_max[2] - xyz_min[2];
  }
  out[fi::kBorderContact] = border ? 1.0 : 0.0;
  // entries beyond kCount stay zero
  return out;
}

FeatureVector GraphBuilder::encode_node(const BinaryMask& mask) const {
  return encode_impl(mask, encoder_.d_v, false);
}

FeatureVector GraphBuilder::encode_edge(const BinaryMask& a, const BinaryMask& b) const {
  if (intersection_area(a, b) != 0) {
    throw std::invalid_argument("encode_edge requires disjoint masks");
  }
  return encode_impl(mask_union(a, b), encoder_.d_e, false);
}

SegGraph GraphBuilder::build(const LabelImage& labels) const {
  if (labels.width() != scene_->width || labels.height() != scene_->height) {
    throw DimensionMismatchError("label image frame does not match scene");
  }
  SegGraph graph;
  graph.width = labels.width();
  graph.height = labels.height();

  NodeId id = 1;
  for (const auto& [label, mask] : extract_instances(labels)) {
    graph.nodes.emplace(id, GraphNode{mask, encode_node(mask)});
    ++id;
  }
  graph.next_id = id;

  const std::vector<NodeId> ids = graph.instance_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const BinaryMask& mi = graph.nodes.at(ids[i]).mask;
      const BinaryMask& mj = graph.nodes.at(ids[j]).mask;
      if (set_distance_capped(mi, mj, edge_threshold_) <= edge_threshold_) {
        graph.edges.emplace(std::make_pair(ids[i], ids[j]), encode_edge(mi, mj));
      }
    }
  }
  refresh_background(graph);
  return graph;
}

NodeId GraphBuilder::insert_instance(SegGraph& graph, const BinaryMask& mask) const {
  if (mask.empty()) throw EmptyMaskError("cannot insert an empty instance");
  for (const NodeId other : graph.instance_ids()) {
    if (intersection_area(mask, graph.nodes.at(other).mask) != 0) {
      throw std::invalid_argument("new instance overlaps an existing node");
    }
  }
  const NodeId id = graph.next_id++;
  graph.nodes.emplace(id, GraphNode{mask, encode_node(mask)});
  for (const NodeId other : graph.instance_ids()) {
    if (other == id) continue;
    const BinaryMask& om = graph.nodes.at(other).mask;
    if (set_distance_capped(mask, om, edge_threshold_) <= edge_threshold_) {
      graph.edges.emplace(std::make_pair(std::min(id, other), std::max(id, other)),
                          encode_edge(mask, om));
    }
  }
  return id;
}

void GraphBuilder::remove_instance(SegGraph& graph, NodeId id) const {
  if (id == SegGraph::kBackgroundId || graph.nodes.count(id) == 0) {
    throw UnknownNodeError("cannot remove node id: " + std::to_string(id));
  }
  graph.nodes.erase(id);
  for (auto it = graph.edges.begin(); it != graph.edges.end();) {
    if (it->first.first == id || it->first.second == id) {
      it = graph.edges.erase(it);
    } else {
      ++it;
    }
  }
}

void GraphBuilder::refresh_background(SegGraph& graph) const {
  BinaryMask fg(graph.width, graph.height);
  for (const NodeId id : graph.instance_ids()) {
    fg = mask_union(fg, graph.nodes.at(id).mask);
  }
  const BinaryMask bg = mask_complement(fg);
  // An empty background (fully covered frame) encodes as the zero vector.
  FeatureVector features = encode_impl(bg, encoder_.d_v, true);
  graph.nodes[SegGraph::kBackgroundId] = GraphNode{bg, std::move(features)};
}

LabelImage graph_to_labels(const SegGraph& graph) {
  LabelImage out(graph.width, graph.height);
  int32_t label = 1;
  for (const NodeId id : graph.instance_ids()) {
    const BinaryMask& mask = graph.nodes.at(id).mask;
    for (int r = 0; r < graph.height; ++r) {
      for (int c = 0; c < graph.width; ++c) {
        if (mask.at(r, c)) out.set(r, c, label);
      }
    }
    ++label;
  }
  return out;
}

nlohmann::json graph_to_json(const SegGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, node] : graph.nodes) {
    nodes.push_back({{"id", id}, {"mask", rle_encode(node.mask)}, {"features", node.features}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, features] : graph.edges) {
    edges.push_back({{"a", key.first}, {"b", key.second}, {"features", features}});
  }
  return {{"width", graph.width},
          {"height", graph.height},
          {"background", SegGraph::kBackgroundId},
          {"next_id", graph.next_id},
          {"nodes", nodes},
          {"edges", edges}};
}

SegGraph graph_from_json(const nlohmann::json& j) {
  SegGraph graph;
  try {
    graph.width = j.at("width").get<int>();
    graph.height = j.at("height").get<int>();
    graph.next_id = j.at("next_id").get<NodeId>();
    for (const auto& n : j.at("nodes")) {
      GraphNode node;
      node.mask = rle_decode(graph.width, graph.height, n.at("mask").get<std::string>());
      node.features = n.at("features").get<FeatureVector>();
      graph.nodes.emplace(n.at("id").get<NodeId>(), std::move(node));
    }
    for (const auto& e : j.at("edges")) {
      graph.edges.emplace(std::make_pair(e.at("a").get<NodeId>(), e.at("b").get<NodeId>()),
                          e.at("features").get<FeatureVector>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptEncodingError(std::string("bad graph json: ") + e.what());
  }
  return graph;
}

}  // namespace segrefine
