#pragma once

// Shared structural checks for SegGraph invariants, used by the unit tests
// and the acceptance fuzzing suite.

#include <cmath>
#include <string>

#include "segrefine/seg_graph.hpp"

namespace graph_checks {

// Returns an empty string when all invariants hold, else a description of the
// first violation.
inline std::string verify(const segrefine::SegGraph& g, double edge_threshold) {
  using namespace segrefine;
  const auto ids = g.instance_ids();
  // pairwise disjoint instances, all within frame
  BinaryMask acc(g.width, g.height);
  for (const NodeId id : ids) {
    const BinaryMask& m = g.nodes.at(id).mask;
    if (m.width() != g.width || m.height() != g.height) return "mask frame mismatch";
    if (m.empty()) return "empty instance mask in graph";
    if (intersection_area(acc, m) != 0) return "instance masks overlap";
    acc = mask_union(acc, m);
  }
  // background node holds the exact complement
  if (g.nodes.count(SegGraph::kBackgroundId) == 0) return "missing background node";
  if (!(g.nodes.at(SegGraph::kBackgroundId).mask == mask_complement(acc))) {
    return "background is not the complement of the instance union";
  }
  // edges exactly match the threshold predicate, instance nodes only
  for (const auto& [key, features] : g.edges) {
    if (key.first == SegGraph::kBackgroundId || key.second == SegGraph::kBackgroundId) {
      return "background node participates in an edge";
    }
    if (g.nodes.count(key.first) == 0 || g.nodes.count(key.second) == 0) {
      return "edge references a missing node";
    }
    for (double v : features) {
      if (!std::isfinite(v)) return "non-finite edge feature";
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double d = set_distance(g.nodes.at(ids[i]).mask, g.nodes.at(ids[j]).mask);
      if (g.has_edge(ids[i], ids[j]) != (d <= edge_threshold)) {
        return "edge set does not match the set-distance predicate";
      }
    }
  }
  for (const auto& [id, node] : g.nodes) {
    for (double v : node.features) {
      if (!std::isfinite(v)) return "non-finite node feature";
    }
  }
  return {};
}

}  // namespace graph_checks
