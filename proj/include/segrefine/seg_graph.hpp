#pragma once

#include <map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "segrefine/mask.hpp"
#include "segrefine/scene.hpp"

namespace segrefine {

using NodeId = int;
using FeatureVector = std::vector<double>;

// Deterministic hand-crafted node features, zero-padded to the configured
// dimension. Index map for the 22 informative entries:
namespace feature_index {
constexpr int kCentroidRow = 0;
constexpr int kCentroidCol = 1;
constexpr int kAreaFraction = 2;
constexpr int kBboxMinRow = 3;
constexpr int kBboxMinCol = 4;
constexpr int kBboxMaxRow = 5;
constexpr int kBboxMaxCol = 6;
constexpr int kBoundaryRatio = 7;
constexpr int kRgbMean = 8;      // 3 entries
constexpr int kRgbStd = 11;      // 3 entries
constexpr int kDepthMean = 14;
constexpr int kDepthStd = 15;
constexpr int kDepthMin = 16;
constexpr int kDepthMax = 17;
constexpr int kExtentX = 18;
constexpr int kExtentY = 19;
constexpr int kExtentZ = 20;
constexpr int kBorderContact = 21;
constexpr int kCount = 22;
}  // namespace feature_index

struct GraphNode {
  BinaryMask mask;
  FeatureVector features;
};

// Segmentation graph: one node per instance plus a background node holding
// the complement mask. Proximity edges exist exactly between instance nodes
// whose masks are within the edge threshold in set distance; the background
// node never carries edges.
struct SegGraph {
  static constexpr NodeId kBackgroundId = 0;

  int width = 0;
  int height = 0;
  std::map<NodeId, GraphNode> nodes;                           // includes background
  std::map<std::pair<NodeId, NodeId>, FeatureVector> edges;    // keys normalized (a < b)
  NodeId next_id = 1;

  std::vector<NodeId> instance_ids() const;
  int64_t num_nodes() const { return static_cast<int64_t>(nodes.size()); }
  int64_t num_edges() const { return static_cast<int64_t>(edges.size()); }
  bool has_edge(NodeId a, NodeId b) const;
  const GraphNode& node(NodeId id) const;
};

struct EncoderConfig {
  int d_v = 32;
  int d_e = 32;
};

// Owns the per-scene context needed to encode features (the backprojected
// point cloud in particular) and the proximity threshold. Graphs built by one
// builder are only meaningful with that builder's scene.
class GraphBuilder {
 public:
  GraphBuilder(const Scene& scene, EncoderConfig encoder = {}, double edge_threshold = 10.0);

  const Scene& scene() const { return *scene_; }
  const PointCloud& cloud() const { return cloud_; }
  double edge_threshold() const { return edge_threshold_; }
  const EncoderConfig& encoder() const { return encoder_; }

  // Feature vector of a non-empty mask. Throws EmptyMaskError.
  FeatureVector encode_node(const BinaryMask& mask) const;

  // Features of the union mask, truncated/padded to d_e. Masks must be
  // disjoint;  symmetric by construction.
  FeatureVector encode_edge(const BinaryMask& a, const BinaryMask& b) const;

  // Node ids are assigned 1..N by ascending original label; background is 0.
  SegGraph build(const LabelImage& labels) const;

  // Graph maintenance used by the perturbation operators. insert_instance
  // encodes the new node and recomputes only its proximity edges;
  // remove_instance drops the node and its edges; refresh_background
  // recomputes the complement mask and its features.
  NodeId insert_instance(SegGraph& graph, const BinaryMask& mask) const;
  void remove_instance(SegGraph& graph, NodeId id) const;
  void refresh_background(SegGraph& graph) const;

 private:
  FeatureVector encode_impl(const BinaryMask& mask, int dim, bool allow_empty) const;

  const Scene* scene_;
  PointCloud cloud_;
  EncoderConfig encoder_;
  double edge_threshold_;
};

// Deterministic inverse of build: instance nodes in ascending id order map to
// labels 1..N.
LabelImage graph_to_labels(const SegGraph& graph);

// Serialization for debugging and golden tests (masks as RLE strings).
nlohmann::json graph_to_json(const SegGraph& graph);
SegGraph graph_from_json(const nlohmann::json& j);

}  // namespace segrefine
