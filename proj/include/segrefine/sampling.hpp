#pragma once

#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "segrefine/rng.hpp"
#include "segrefine/seg_graph.hpp"

namespace segrefine {

// Per-pixel probability of a split-able object boundary, frame-aligned and
// zero outside the query mask.
struct BoundaryMap {
  int width = 0;
  int height = 0;
  std::vector<double> probs;

  double at(int row, int col) const { return probs[static_cast<std::size_t>(row) * width + col]; }
};

enum class BoundaryProviderKind { GroundTruth, DepthGradient, FromFile };

struct BoundaryProviderConfig {
  BoundaryProviderKind kind = BoundaryProviderKind::GroundTruth;
  std::filesystem::path file;          // FromFile: 16-bit PNG, value/65535 = probability
  double gradient_scale = 0.01;        // DepthGradient: meters/px mapped to probability 1
};

// GroundTruth: 1.0 on ground-truth internal boundaries inside the mask
// (dilated by 1 px). DepthGradient: clipped normalized depth-gradient
// magnitude. FromFile: loaded raster restricted to the mask.
BoundaryMap boundary_map(const Scene& scene, const BinaryMask& mask,
                         const BoundaryProviderConfig& provider);

enum class DeleteProviderKind { GroundTruth, Heuristic };

// GroundTruth: 1 - max IoU against any ground-truth instance. Heuristic:
// logistic function of a fixed linear functional of (v_node - v_background);
// see kHeuristicDelete* in sampling.cpp for the documented default weights.
double delete_score(const Scene& scene, const SegGraph& graph, NodeId node,
                    DeleteProviderKind provider);
double delete_score_mask(const Scene& scene, const SegGraph& graph, const GraphBuilder& builder,
                         const BinaryMask& mask, DeleteProviderKind provider);

// Sampled split: a pixel path across the mask plus its mean boundary
// probability.
struct SplitProposal {
  std::vector<PixelCoord> path;
  double score = 0.0;
  NodeId mask_id = 0;
};

struct MergeProposal {
  NodeId a = 0;
  NodeId b = 0;
  double score = 0.0;
};

struct DeleteProposal {
  NodeId node = 0;
  double score = 0.0;
};

struct AddProposal {
  BinaryMask mask;
  double score = 0.0;
};

enum class OpKind { Split, Merge, Delete, Add };

struct Perturbation {
  OpKind kind = OpKind::Split;
  double score = 0.0;
  std::variant<SplitProposal, MergeProposal, DeleteProposal, AddProposal> payload;
};

// Endpoint sampling and path search over one mask:
//   1. trace the mask contour;
//   2. threshold the boundary map at `nu`, connected components, per-pixel
//      component size;
//   3. contour weights = Gaussian-weighted local average of component sizes
//      (sigma 2 px, window radius 5 px), normalized;
//   4. draw start/end without replacement;
//   5. minimum-cost 8-connected path through mask pixels under per-pixel cost
//      -log((p + eps) / (1 + eps)), diagonal steps scaled by sqrt(2);
//   6. score = mean probability along the path.
// Throws NoPositiveWeightError when no contour pixel sees any thresholded
// boundary mass, PathNotFoundError when the endpoints are not connected
// through the mask.
SplitProposal sample_split(const BinaryMask& mask, const BoundaryMap& bmap, Rng& rng, double nu);

// Weighted average of the pair's boundary mask under the boundary-map mass;
// 1.0 when the map carries no mass (maximally merge-able).
double merge_score(const BoundaryMap& bmap_union, const BinaryMask& mask_i,
                   const BinaryMask& mask_j);

// Apply operators; each returns a new graph satisfying all SegGraph
// invariants, reusing untouched node and edge features.
SegGraph apply_split(const GraphBuilder& builder, const SegGraph& graph,
                     const SplitProposal& proposal);
SegGraph apply_merge(const GraphBuilder& builder, const SegGraph& graph, NodeId a, NodeId b);
SegGraph apply_delete(const GraphBuilder& builder, const SegGraph& graph, NodeId node);
SegGraph apply_add(const GraphBuilder& builder, const SegGraph& graph, const BinaryMask& mask);
SegGraph apply_perturbation(const GraphBuilder& builder, const SegGraph& graph,
                            const Perturbation& perturbation);

struct ProposalConfig {
  BoundaryProviderConfig boundary_provider;
  DeleteProviderKind delete_provider = DeleteProviderKind::GroundTruth;
  double nu = 0.5;              // boundary-map threshold for endpoint weighting
  double add_threshold = 0.5;   // delete-score ceiling for accepted additions
  int min_add_area = 64;
};

// Proposal generators, one candidate set per operator kind. Candidates are
// ordered deterministically (ascending node id / edge key); scores are not
// yet filtered by the engine's acceptance threshold.
std::vector<Perturbation> propose_splits(const Scene& scene, const SegGraph& graph,
                                         const ProposalConfig& config, Rng& rng);
std::vector<Perturbation> propose_merges(const Scene& scene, const SegGraph& graph,
                                         const ProposalConfig& config);
std::vector<Perturbation> propose_deletes(const Scene& scene, const SegGraph& graph,
                                          const ProposalConfig& config);
std::vector<Perturbation> propose_adds(const Scene& scene, const SegGraph& graph,
                                       const GraphBuilder& builder, const BinaryMask& foreground,
                                       const ProposalConfig& config);

}  // namespace segrefine
