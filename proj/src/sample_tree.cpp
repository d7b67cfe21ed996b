#include "segrefine/sample_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segrefine/errors.hpp"
#include "segrefine/metrics.hpp"

namespace segrefine {

std::vector<int> SampleTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].children.empty()) out.push_back(static_cast<int>(i));
  }
  return out;
}

int SampleTree::best() const {
  int best_idx = 0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].score > nodes[best_idx].score) best_idx = static_cast<int>(i);
  }
  return best_idx;
}

namespace {

std::vector<OpKind> enabled_ops(const EngineConfig& config) {
  std::vector<OpKind> ops;
  if (config.allow_split) ops.push_back(OpKind::Split);
  if (config.allow_merge) ops.push_back(OpKind::Merge);
  if (config.allow_delete) ops.push_back(OpKind::Delete);
  if (config.allow_add) ops.push_back(OpKind::Add);
  return ops;
}

// Draw up to `count` distinct candidates (partial Fisher-Yates), then pick
// one of them uniformly.
const Perturbation& select_candidate(std::vector<Perturbation>& candidates, int count, Rng& rng) {
  const std::size_t n = candidates.size();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(count), n);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(candidates[i], candidates[j]);
  }
  return candidates[rng.index(m)];
}

}  // namespace

SampleTree build_sample_tree(const Scene& scene, const LabelImage& initial,
                             const EngineConfig& config, Rng& rng, const GraphScorer& scorer) {
  config.validate();
  const GraphBuilder builder(scene, EncoderConfig{config.d_v, config.d_e}, config.edge_threshold);
  const ProposalConfig proposal_cfg = config.proposal_config();
  const std::vector<OpKind> ops = enabled_ops(config);

  SampleTree tree;
  {
    TreeNode root;
    root.graph = builder.build(initial);
    root.score = scorer.score(root.graph);
    tree.total_graph_nodes = root.graph.num_nodes();
    tree.total_graph_edges = root.graph.num_edges();
    tree.nodes.push_back(std::move(root));
  }
  // The root is always stored; configured budgets smaller than the initial
  // graph exhaust immediately.
  if (tree.total_graph_nodes > config.max_graph_nodes ||
      tree.total_graph_edges > config.max_graph_edges) {
    tree.budget_exhausted = true;
    return tree;
  }

  for (int k = 0; k < config.expansion_iterations; ++k) {
    const std::vector<int> frontier = tree.leaves();
    for (const int leaf : frontier) {
      for (int b = 0; b < config.branch_factor; ++b) {
        // choose an operation; kinds with no valid proposals are resampled
        std::vector<Perturbation> candidates;
        for (int attempt = 0; attempt < 4 && candidates.empty(); ++attempt) {
          const OpKind kind = ops[rng.index(ops.size())];
          std::vector<Perturbation> all;
          switch (kind) {
            case OpKind::Split:
              all = propose_splits(scene, tree.nodes[leaf].graph, proposal_cfg, rng);
              break;
            case OpKind::Merge:
              all = propose_merges(scene, tree.nodes[leaf].graph, proposal_cfg);
              break;
            case OpKind::Delete:
              all = propose_deletes(scene, tree.nodes[leaf].graph, proposal_cfg);
              break;
            case OpKind::Add:
              if (scene.foreground) {
                all = propose_adds(scene, tree.nodes[leaf].graph, builder, *scene.foreground,
                                   proposal_cfg);
              }
              break;
          }
          for (Perturbation& p : all) {
            if (p.score >= config.proposal_threshold) candidates.push_back(std::move(p));
          }
        }
        if (candidates.empty()) continue;
        const Perturbation& pick = select_candidate(candidates, config.proposals_per_op, rng);

        SegGraph candidate_graph;
        try {
          candidate_graph = apply_perturbation(builder, tree.nodes[leaf].graph, pick);
        } catch (const DegeneratePathError&) {
          continue;  // sampled path did not separate the mask; attempt is spent
        }
        const double candidate_score = scorer.score(candidate_graph);
        if (!config.unconditional_admission && candidate_score <= tree.nodes[leaf].score) {
          continue;
        }
        const int64_t child_nodes = candidate_graph.num_nodes();
        const int64_t child_edges = candidate_graph.num_edges();
        if (tree.total_graph_nodes + child_nodes > config.max_graph_nodes ||
            tree.total_graph_edges + child_edges > config.max_graph_edges) {
          tree.budget_exhausted = true;  // anytime exit before overshooting
          return tree;
        }
        TreeNode child;
        child.graph = std::move(candidate_graph);
        child.score = candidate_score;
        child.parent = leaf;
        child.depth = tree.nodes[leaf].depth + 1;
        child.op = pick;
        tree.total_graph_nodes += child_nodes;
        tree.total_graph_edges += child_edges;
        tree.nodes.push_back(std::move(child));
        tree.nodes[leaf].children.push_back(static_cast<int>(tree.nodes.size()) - 1);
      }
    }
  }
  return tree;
}

ContourUncertainty contour_uncertainty(const SampleTree& tree) {
  const std::vector<int> leaf_ids = tree.leaves();
  const int width = tree.nodes[0].graph.width;
  const int height = tree.nodes[0].graph.height;
  ContourUncertainty out;
  out.width = width;
  out.height = height;
  out.stddev.assign(static_cast<std::size_t>(width) * height, 0.0);

  std::vector<int> counts(static_cast<std::size_t>(width) * height, 0);
  for (const int leaf : leaf_ids) {
    const SegGraph& g = tree.nodes[leaf].graph;
    BinaryMask contour_pixels(width, height);
    for (const NodeId id : g.instance_ids()) {
      for (const PixelCoord& p : trace_contour(g.node(id).mask).points) {
        contour_pixels.set(p.row, p.col, true);
      }
    }
    const auto& bits = contour_pixels.data();
    for (std::size_t i = 0; i < bits.size(); ++i) counts[i] += bits[i];
  }
  const double n = static_cast<double>(leaf_ids.size());
  out.mean_contour = BinaryMask(width, height);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = counts[i] / n;
    // population std of a Bernoulli indicator over the leaves
    out.stddev[i] = std::sqrt(std::max(0.0, p * (1.0 - p)));
    if (counts[i] == static_cast<int>(leaf_ids.size())) {
      out.mean_contour.set(static_cast<int>(i) / width, static_cast<int>(i) % width, true);
    }
  }
  return out;
}

RefinementResult refine(const Scene& scene, const LabelImage& initial, const EngineConfig& config,
                        Rng& rng, const GraphScorer& scorer) {
  RefinementResult result;
  result.tree = build_sample_tree(scene, initial, config, rng, scorer);
  const int best = result.tree.best();
  result.best_labels = graph_to_labels(result.tree.nodes[best].graph);
  result.best_score = result.tree.nodes[best].score;
  result.stats.tree_size = static_cast<int>(result.tree.nodes.size());
  result.stats.budget_exhausted = result.tree.budget_exhausted;
  for (const TreeNode& node : result.tree.nodes) {
    result.stats.depth = std::max(result.stats.depth, node.depth);
    if (node.op) ++result.stats.ops_applied[static_cast<int>(node.op->kind)];
  }
  result.uncertainty = contour_uncertainty(result.tree);
  return result;
}

namespace {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Split:
      return "split";
    case OpKind::Merge:
      return "merge";
    case OpKind::Delete:
      return "delete";
    case OpKind::Add:
      return "add";
  }
  return "?";
}

nlohmann::json op_to_json(const Perturbation& op) {
  nlohmann::json j = {{"kind", op_name(op.kind)}, {"score", op.score}};
  switch (op.kind) {
    case OpKind::Split: {
      const auto& s = std::get<SplitProposal>(op.payload);
      j["mask_id"] = s.mask_id;
      j["path_length"] = s.path.size();
      break;
    }
    case OpKind::Merge: {
      const auto& m = std::get<MergeProposal>(op.payload);
      j["nodes"] = {m.a, m.b};
      break;
    }
    case OpKind::Delete:
      j["node"] = std::get<DeleteProposal>(op.payload).node;
      break;
    case OpKind::Add:
      j["area"] = std::get<AddProposal>(op.payload).mask.area();
      break;
  }
  return j;
}

}  // namespace

nlohmann::json tree_to_json(const SampleTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    nlohmann::json entry = {{"id", i},
                            {"parent", node.parent},
                            {"depth", node.depth},
                            {"score", node.score},
                            {"graph_nodes", node.graph.num_nodes()},
                            {"graph_edges", node.graph.num_edges()},
                            {"children", node.children}};
    if (node.op) entry["op"] = op_to_json(*node.op);
    nodes.push_back(std::move(entry));
  }
  return {{"nodes", nodes},
          {"best", tree.best()},
          {"total_graph_nodes", tree.total_graph_nodes},
          {"total_graph_edges", tree.total_graph_edges},
          {"budget_exhausted", tree.budget_exhausted}};
}

RankReport rank_harness(const Scene& scene, const LabelImage& initial, const EngineConfig& config,
                        Rng& rng, const GraphScorer& scorer, const LabelImage& gt) {
  EngineConfig chain_cfg = config;
  chain_cfg.branch_factor = 1;
  chain_cfg.unconditional_admission = true;
  const SampleTree tree = build_sample_tree(scene, initial, chain_cfg, rng, scorer);

  RankReport report;
  report.chain_length = static_cast<int>(tree.nodes.size());
  for (const TreeNode& node : tree.nodes) {
    report.gt_quality.push_back(oracle_score(graph_to_labels(node.graph), gt));
    report.scorer_scores.push_back(node.score);
  }
  const int n = report.chain_length;

  // dense ground-truth ranks: equal quality shares a relevance value
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (report.gt_quality[a] != report.gt_quality[b]) {
      return report.gt_quality[a] < report.gt_quality[b];
    }
    return a < b;
  });
  report.relevance.assign(n, 0);
  int rank = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && report.gt_quality[order[i]] > report.gt_quality[order[i - 1]]) ++rank;
    report.relevance[order[i]] = rank;
  }

  std::vector<int> ascending;
  for (const int idx : order) ascending.push_back(report.relevance[idx]);
  report.ndcg_minimum = ndcg(ascending);

  std::vector<int> newest_first;
  for (int i = n - 1; i >= 0; --i) newest_first.push_back(report.relevance[i]);
  report.ndcg_insertion = ndcg(newest_first);

  std::vector<int> scorer_order(n);
  std::iota(scorer_order.begin(), scorer_order.end(), 0);
  std::sort(scorer_order.begin(), scorer_order.end(), [&](int a, int b) {
    if (report.scorer_scores[a] != report.scorer_scores[b]) {
      return report.scorer_scores[a] > report.scorer_scores[b];
    }
    return a < b;
  });
  std::vector<int> by_scorer;
  for (const int idx : scorer_order) by_scorer.push_back(report.relevance[idx]);
  report.ndcg_scorer = ndcg(by_scorer);
  return report;
}

nlohmann::json rank_report_to_json(const RankReport& report) {
  return {{"chain_length", report.chain_length},
          {"gt_quality", report.gt_quality},
          {"scorer_scores", report.scorer_scores},
          {"relevance", report.relevance},
          {"ndcg", {{"minimum", report.ndcg_minimum},
                    {"insertion", report.ndcg_insertion},
                    {"scorer", report.ndcg_scorer}}}};
}

LoopSimReport uncertainty_loop_sim(uint64_t seed, const LoopSimConfig& config) {
  LoopSimReport report;
  report.initial_objects = config.scene.num_objects;
  std::vector<int> excluded;

  std::optional<ModelScorer> model_scorer;
  if (config.engine.scorer == ScorerKind::Model) {
    model_scorer.emplace(load_model(config.engine.model_path));
  }

  for (int step = 0; step < config.max_steps; ++step) {
    const Scene scene = generate_scene(seed, config.scene, excluded);
    if (scene.labels->instance_labels().empty()) {
      report.terminated_confident = true;
      break;
    }
    const LabelImage initial =
        corrupt_segmentation(*scene.labels, mix_seed(seed, 1000 + step), config.corruption);
    Rng rng(mix_seed(seed, 2000 + step));
    const OracleScorer oracle(*scene.labels);
    const GraphScorer& scorer =
        model_scorer ? static_cast<const GraphScorer&>(*model_scorer) : oracle;
    const RefinementResult result = refine(scene, initial, config.engine, rng, scorer);

    // uncertainty mass per predicted instance
    const auto instances = extract_instances(result.best_labels);
    double best_mass = 0.0;
    const BinaryMask* best_mask = nullptr;
    for (const auto& [label, mask] : instances) {
      const BinaryMask region = dilate(mask, config.mask_dilation);
      double mass = 0.0;
      const auto& bits = region.data();
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) mass += result.uncertainty.stddev[i];
      }
      if (mass > best_mass) {
        best_mass = mass;
        best_mask = &mask;
      }
    }

    LoopStep lstep;
    lstep.max_mass = best_mass;
    lstep.objects_remaining = static_cast<int>(scene.labels->instance_labels().size());
    if (best_mass <= config.mass_threshold || best_mask == nullptr) {
      report.terminated_confident = true;
      report.steps.push_back(lstep);
      break;
    }
    // remove the ground-truth object overlapping the uncertain mask the most
    int64_t best_overlap = 0;
    int victim = -1;
    for (const auto& [label, gt_mask] : extract_instances(*scene.labels)) {
      const int64_t overlap = intersection_area(*best_mask, gt_mask);
      if (overlap > best_overlap) {
        best_overlap = overlap;
        victim = label - 1;  // generator object index
      }
    }
    if (victim < 0) {
      // the uncertain mask covers no object; nothing can be removed
      report.steps.push_back(lstep);
      break;
    }
    lstep.removed_object = victim;
    excluded.push_back(victim);
    ++report.steps_used;
    report.steps.push_back(lstep);
  }
  return report;
}

nlohmann::json loop_report_to_json(const LoopSimReport& report) {
  nlohmann::json steps = nlohmann::json::array();
  for (const LoopStep& s : report.steps) {
    steps.push_back({{"removed_object", s.removed_object},
                     {"max_mass", s.max_mass},
                     {"objects_remaining", s.objects_remaining}});
  }
  return {{"initial_objects", report.initial_objects},
          {"steps_used", report.steps_used},
          {"terminated_confident", report.terminated_confident},
          {"steps", steps}};
}

}  // namespace segrefine
