#pragma once

#include <array>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "segrefine/config.hpp"
#include "segrefine/sampling.hpp"
#include "segrefine/sgs_net.hpp"

namespace segrefine {

struct TreeNode {
  SegGraph graph;
  double score = 0.0;
  int parent = -1;
  int depth = 0;
  std::vector<int> children;
  std::optional<Perturbation> op;  // the perturbation that produced this node
};

// Tree of scored segmentation graphs rooted at the initial segmentation.
// Admission keeps scores strictly increasing along every root-to-leaf path;
// cumulative graph-node/edge budgets bound the tree size.
struct SampleTree {
  std::vector<TreeNode> nodes;
  int64_t total_graph_nodes = 0;
  int64_t total_graph_edges = 0;
  bool budget_exhausted = false;

  std::vector<int> leaves() const;  // nodes without children, insertion order
  int best() const;                 // highest score, ties to the earliest node
};

SampleTree build_sample_tree(const Scene& scene, const LabelImage& initial,
                             const EngineConfig& config, Rng& rng, const GraphScorer& scorer);

// Per-pixel contour statistics over the tree's leaves: the population
// standard deviation of contour membership and the set of contour pixels
// present in every leaf.
struct ContourUncertainty {
  int width = 0;
  int height = 0;
  BinaryMask mean_contour;
  std::vector<double> stddev;
};

ContourUncertainty contour_uncertainty(const SampleTree& tree);

struct RefineStats {
  int tree_size = 1;
  int depth = 0;
  std::array<int, 4> ops_applied = {0, 0, 0, 0};  // split, merge, delete, add
  bool budget_exhausted = false;
};

struct RefinementResult {
  LabelImage best_labels;
  double best_score = 0.0;
  RefineStats stats;
  ContourUncertainty uncertainty;
  SampleTree tree;
};

// Full pipeline: build the graph, expand the sample tree, return the highest
// scoring segmentation plus contour uncertainty. Deterministic in
// (seed, scene, config, scorer).
RefinementResult refine(const Scene& scene, const LabelImage& initial, const EngineConfig& config,
                        Rng& rng, const GraphScorer& scorer);

nlohmann::json tree_to_json(const SampleTree& tree);

// Ranking harness (iterative mode: B = 1, unconditional admission). The
// chain of graphs is ranked three ways: worst possible ("minimum"), by
// insertion recency, and by the scorer's scores; each ranking's nDCG is
// computed from ground-truth relevances in {0, ..., chain length - 1}.
struct RankReport {
  int chain_length = 0;
  std::vector<double> gt_quality;      // oracle score per chain node
  std::vector<double> scorer_scores;   // scorer output per chain node
  std::vector<int> relevance;          // by insertion order
  double ndcg_minimum = 0.0;
  double ndcg_insertion = 0.0;
  double ndcg_scorer = 0.0;
};

RankReport rank_harness(const Scene& scene, const LabelImage& initial, const EngineConfig& config,
                        Rng& rng, const GraphScorer& scorer, const LabelImage& gt);
nlohmann::json rank_report_to_json(const RankReport& report);

// Simulated interaction loop: refine, measure per-instance contour
// uncertainty mass, remove the most uncertain object from the scene, repeat
// until the scene is confidently segmented. Object removal stands in for a
// grasp.
struct LoopSimConfig {
  SceneGenConfig scene;
  CorruptionConfig corruption;
  EngineConfig engine;
  double mass_threshold = 10.0;  // uncertainty mass that triggers a removal
  double mask_dilation = 5.0;    // px, region around each mask that collects mass
  int max_steps = 64;
};

struct LoopStep {
  int removed_object = -1;  // generator object index, -1 if none
  double max_mass = 0.0;
  int objects_remaining = 0;
};

struct LoopSimReport {
  int initial_objects = 0;
  int steps_used = 0;  // number of removals
  bool terminated_confident = false;
  std::vector<LoopStep> steps;
};

LoopSimReport uncertainty_loop_sim(uint64_t seed, const LoopSimConfig& config);
nlohmann::json loop_report_to_json(const LoopSimReport& report);

}  // namespace segrefine
