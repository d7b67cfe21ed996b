#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "segrefine/sampling.hpp"

namespace segrefine {

enum class ScorerKind { Model, Oracle };

// Engine configuration. Defaults follow the reference operating point:
// K = 3 expansion iterations, branching factor B = 3, budgets of 350 graph
// nodes / 1750 graph edges, 10 px proximity threshold, 0.7 proposal
// acceptance score, 3 sampled proposals per operation.
struct EngineConfig {
  int expansion_iterations = 3;   // K
  int branch_factor = 3;          // B
  int64_t max_graph_nodes = 350;  // m_n
  int64_t max_graph_edges = 1750; // m_e
  double edge_threshold = 10.0;   // px, proximity edges
  double nu = 0.5;                // boundary-map threshold in split sampling
  double add_threshold = 0.5;     // delete-score ceiling for additions
  double proposal_threshold = 0.7;
  int proposals_per_op = 3;
  int min_add_area = 64;
  int d_v = 32;
  int d_e = 32;
  uint64_t seed = 0;

  BoundaryProviderKind boundary_provider = BoundaryProviderKind::GroundTruth;
  std::filesystem::path boundary_file;
  double gradient_scale = 0.01;
  DeleteProviderKind delete_provider = DeleteProviderKind::GroundTruth;
  ScorerKind scorer = ScorerKind::Oracle;
  std::filesystem::path model_path;

  // operator restriction (per-operator ablation mode)
  bool allow_split = true;
  bool allow_merge = true;
  bool allow_delete = true;
  bool allow_add = true;

  // ranking-harness mode: admit every candidate without consulting the scorer
  bool unconditional_admission = false;

  void validate() const;  // throws ConfigInvalidError naming the field
  ProposalConfig proposal_config() const;

  // Strict parsing: unknown keys are rejected. Missing keys keep defaults.
  static EngineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static EngineConfig load(const std::filesystem::path& file);
};

}  // namespace segrefine
