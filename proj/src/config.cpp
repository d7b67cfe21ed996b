#include "segrefine/config.hpp"

#include <fstream>
#include <set>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

BoundaryProviderKind boundary_kind_from_string(const std::string& s) {
  if (s == "ground_truth") return BoundaryProviderKind::GroundTruth;
  if (s == "depth_gradient") return BoundaryProviderKind::DepthGradient;
  if (s == "file") return BoundaryProviderKind::FromFile;
  throw ConfigInvalidError("boundary_provider", "expected ground_truth|depth_gradient|file");
}

std::string boundary_kind_to_string(BoundaryProviderKind k) {
  switch (k) {
    case BoundaryProviderKind::GroundTruth:
      return "ground_truth";
    case BoundaryProviderKind::DepthGradient:
      return "depth_gradient";
    case BoundaryProviderKind::FromFile:
      return "file";
  }
  return "ground_truth";
}

DeleteProviderKind delete_kind_from_string(const std::string& s) {
  if (s == "ground_truth") return DeleteProviderKind::GroundTruth;
  if (s == "heuristic") return DeleteProviderKind::Heuristic;
  throw ConfigInvalidError("delete_provider", "expected ground_truth|heuristic");
}

ScorerKind scorer_kind_from_string(const std::string& s) {
  if (s == "model") return ScorerKind::Model;
  if (s == "oracle") return ScorerKind::Oracle;
  throw ConfigInvalidError("scorer", "expected model|oracle");
}

}  // namespace

void EngineConfig::validate() const {
  if (expansion_iterations < 0) throw ConfigInvalidError("expansion_iterations", "must be >= 0");
  if (branch_factor < 1) throw ConfigInvalidError("branch_factor", "must be >= 1");
  if (max_graph_nodes < 1) throw ConfigInvalidError("max_graph_nodes", "must be >= 1");
  if (max_graph_edges < 1) throw ConfigInvalidError("max_graph_edges", "must be >= 1");
  if (edge_threshold < 0.0) throw ConfigInvalidError("edge_threshold", "must be >= 0");
  if (nu <= 0.0 || nu >= 1.0) throw ConfigInvalidError("nu", "must lie in (0, 1)");
  if (add_threshold <= 0.0 || add_threshold >= 1.0) {
    throw ConfigInvalidError("add_threshold", "must lie in (0, 1)");
  }
  if (proposal_threshold <= 0.0 || proposal_threshold >= 1.0) {
    throw ConfigInvalidError("proposal_threshold", "must lie in (0, 1)");
  }
  if (proposals_per_op < 1) throw ConfigInvalidError("proposals_per_op", "must be >= 1");
  if (min_add_area < 1) throw ConfigInvalidError("min_add_area", "must be >= 1");
  if (d_v < 22) throw ConfigInvalidError("d_v", "must be >= 22");
  if (d_e < 1) throw ConfigInvalidError("d_e", "must be >= 1");
  if (gradient_scale <= 0.0) throw ConfigInvalidError("gradient_scale", "must be > 0");
  if (boundary_provider == BoundaryProviderKind::FromFile && boundary_file.empty()) {
    throw ConfigInvalidError("boundary_file", "required for the file boundary provider");
  }
  if (scorer == ScorerKind::Model && model_path.empty()) {
    throw ConfigInvalidError("model_path", "required for the model scorer");
  }
  if (!allow_split && !allow_merge && !allow_delete && !allow_add) {
    throw ConfigInvalidError("ops", "at least one operation must be enabled");
  }
}

ProposalConfig EngineConfig::proposal_config() const {
  ProposalConfig cfg;
  cfg.boundary_provider.kind = boundary_provider;
  cfg.boundary_provider.file = boundary_file;
  cfg.boundary_provider.gradient_scale = gradient_scale;
  cfg.delete_provider = delete_provider;
  cfg.nu = nu;
  cfg.add_threshold = add_threshold;
  cfg.min_add_area = min_add_area;
  return cfg;
}

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "expansion_iterations", "branch_factor", "max_graph_nodes", "max_graph_edges",
      "edge_threshold",       "nu",            "add_threshold",   "proposal_threshold",
      "proposals_per_op",     "min_add_area",  "d_v",             "d_e",
      "seed",                 "boundary_provider", "boundary_file", "gradient_scale",
      "delete_provider",      "scorer",        "model_path",      "ops",
      "unconditional_admission"};
  if (!j.is_object()) throw ConfigInvalidError("<root>", "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw ConfigInvalidError(key, "unknown field");
  }
  EngineConfig cfg;
  try {
    if (j.contains("expansion_iterations")) cfg.expansion_iterations = j["expansion_iterations"];
    if (j.contains("branch_factor")) cfg.branch_factor = j["branch_factor"];
    if (j.contains("max_graph_nodes")) cfg.max_graph_nodes = j["max_graph_nodes"];
    if (j.contains("max_graph_edges")) cfg.max_graph_edges = j["max_graph_edges"];
    if (j.contains("edge_threshold")) cfg.edge_threshold = j["edge_threshold"];
    if (j.contains("nu")) cfg.nu = j["nu"];
    if (j.contains("add_threshold")) cfg.add_threshold = j["add_threshold"];
    if (j.contains("proposal_threshold")) cfg.proposal_threshold = j["proposal_threshold"];
    if (j.contains("proposals_per_op")) cfg.proposals_per_op = j["proposals_per_op"];
    if (j.contains("min_add_area")) cfg.min_add_area = j["min_add_area"];
    if (j.contains("d_v")) cfg.d_v = j["d_v"];
    if (j.contains("d_e")) cfg.d_e = j["d_e"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("boundary_provider")) {
      cfg.boundary_provider = boundary_kind_from_string(j["boundary_provider"]);
    }
    if (j.contains("boundary_file")) {
      cfg.boundary_file = j["boundary_file"].get<std::string>();
    }
    if (j.contains("gradient_scale")) cfg.gradient_scale = j["gradient_scale"];
    if (j.contains("delete_provider")) {
      cfg.delete_provider = delete_kind_from_string(j["delete_provider"]);
    }
    if (j.contains("scorer")) cfg.scorer = scorer_kind_from_string(j["scorer"]);
    if (j.contains("model_path")) cfg.model_path = j["model_path"].get<std::string>();
    if (j.contains("unconditional_admission")) {
      cfg.unconditional_admission = j["unconditional_admission"];
    }
    if (j.contains("ops")) {
      cfg.allow_split = cfg.allow_merge = cfg.allow_delete = cfg.allow_add = false;
      for (const auto& op : j["ops"]) {
        const std::string name = op.get<std::string>();
        if (name == "split") {
          cfg.allow_split = true;
        } else if (name == "merge") {
          cfg.allow_merge = true;
        } else if (name == "delete") {
          cfg.allow_delete = true;
        } else if (name == "add") {
          cfg.allow_add = true;
        } else {
          throw ConfigInvalidError("ops", "unknown operation: " + name);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalidError("<parse>", e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json EngineConfig::to_json() const {
  nlohmann::json ops = nlohmann::json::array();
  if (allow_split) ops.push_back("split");
  if (allow_merge) ops.push_back("merge");
  if (allow_delete) ops.push_back("delete");
  if (allow_add) ops.push_back("add");
  return {{"expansion_iterations", expansion_iterations},
          {"branch_factor", branch_factor},
          {"max_graph_nodes", max_graph_nodes},
          {"max_graph_edges", max_graph_edges},
          {"edge_threshold", edge_threshold},
          {"nu", nu},
          {"add_threshold", add_threshold},
          {"proposal_threshold", proposal_threshold},
          {"proposals_per_op", proposals_per_op},
          {"min_add_area", min_add_area},
          {"d_v", d_v},
          {"d_e", d_e},
          {"seed", seed},
          {"boundary_provider", boundary_kind_to_string(boundary_provider)},
          {"boundary_file", boundary_file.string()},
          {"gradient_scale", gradient_scale},
          {"delete_provider",
           delete_provider == DeleteProviderKind::GroundTruth ? "ground_truth" : "heuristic"},
          {"scorer", scorer == ScorerKind::Model ? "model" : "oracle"},
          {"model_path", model_path.string()},
          {"ops", ops},
          {"unconditional_admission", unconditional_admission}};
}

EngineConfig EngineConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingFileError("missing config file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalidError("<parse>", e.what());
  }
  return from_json(j);
}

}  // namespace segrefine
