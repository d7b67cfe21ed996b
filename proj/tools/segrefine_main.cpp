#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "segrefine/config.hpp"
#include "segrefine/errors.hpp"
#include "segrefine/metrics.hpp"
#include "segrefine/sample_tree.hpp"
#include "segrefine/scene.hpp"
#include "segrefine/sgs_net.hpp"

namespace {

using namespace segrefine;
namespace fs = std::filesystem;

void write_json(const nlohmann::json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream file(out);
  if (!file) throw Error("cannot write output file: " + out);
  file << j.dump(2) << '\n';
}

struct EngineFlags {
  std::string config_file;
  EngineConfig cfg;
  CLI::App* cmd = nullptr;

  // registered so that explicit flags override the config file
  int iterations = 0, branch = 0, proposals = 0, min_add_area = 0;
  int64_t max_nodes = 0, max_edges = 0;
  double edge_threshold = 0, nu = 0, add_threshold = 0, proposal_threshold = 0, gradient_scale = 0;
  uint64_t seed = 0;
  std::string boundary_provider, delete_provider, scorer, model_path, boundary_file, ops;

  void attach(CLI::App* app) {
    cmd = app;
    app->add_option("--config", config_file, "engine config JSON file");
    app->add_option("--seed", seed, "random seed");
    app->add_option("-K,--iterations", iterations, "sample-tree expansion iterations");
    app->add_option("-B,--branch-factor", branch, "branching factor per leaf");
    app->add_option("--max-nodes", max_nodes, "cumulative graph-node budget");
    app->add_option("--max-edges", max_edges, "cumulative graph-edge budget");
    app->add_option("--edge-threshold", edge_threshold, "proximity edge threshold in pixels");
    app->add_option("--nu", nu, "boundary-map threshold for split endpoint weighting");
    app->add_option("--add-threshold", add_threshold, "delete-score ceiling for additions");
    app->add_option("--proposal-threshold", proposal_threshold, "minimum proposal score");
    app->add_option("--proposals-per-op", proposals, "sampled proposals per operation");
    app->add_option("--min-add-area", min_add_area, "minimum area for added masks");
    app->add_option("--boundary-provider", boundary_provider,
                    "ground_truth|depth_gradient|file");
    app->add_option("--boundary-file", boundary_file, "16-bit PNG for the file provider");
    app->add_option("--gradient-scale", gradient_scale, "depth-gradient normalization (m/px)");
    app->add_option("--delete-provider", delete_provider, "ground_truth|heuristic");
    app->add_option("--scorer", scorer, "oracle|model");
    app->add_option("--model", model_path, "score model file");
    app->add_option("--ops", ops, "comma-separated operation subset (ablation)");
  }

  EngineConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw MissingFileError("missing config file: " + config_file);
      in >> j;
    }
    auto set_if = [&](const char* flag, const char* key, auto value) {
      if (cmd->count(flag) > 0) j[key] = value;
    };
    set_if("--seed", "seed", seed);
    set_if("--iterations", "expansion_iterations", iterations);
    set_if("--branch-factor", "branch_factor", branch);
    set_if("--max-nodes", "max_graph_nodes", max_nodes);
    set_if("--max-edges", "max_graph_edges", max_edges);
    set_if("--edge-threshold", "edge_threshold", edge_threshold);
    set_if("--nu", "nu", nu);
    set_if("--add-threshold", "add_threshold", add_threshold);
    set_if("--proposal-threshold", "proposal_threshold", proposal_threshold);
    set_if("--proposals-per-op", "proposals_per_op", proposals);
    set_if("--min-add-area", "min_add_area", min_add_area);
    set_if("--boundary-provider", "boundary_provider", boundary_provider);
    set_if("--boundary-file", "boundary_file", boundary_file);
    set_if("--gradient-scale", "gradient_scale", gradient_scale);
    set_if("--delete-provider", "delete_provider", delete_provider);
    set_if("--scorer", "scorer", scorer);
    set_if("--model", "model_path", model_path);
    if (cmd->count("--ops") > 0) {
      nlohmann::json list = nlohmann::json::array();
      std::string item;
      std::istringstream stream(ops);
      while (std::getline(stream, item, ',')) {
        if (!item.empty()) list.push_back(item);
      }
      j["ops"] = list;
    }
    return EngineConfig::from_json(j);
  }
};

std::unique_ptr<GraphScorer> make_scorer(const EngineConfig& cfg, const Scene& scene) {
  if (cfg.scorer == ScorerKind::Model) {
    return std::make_unique<ModelScorer>(load_model(cfg.model_path));
  }
  if (!scene.labels) {
    throw ProviderUnavailableError("oracle scorer needs ground-truth labels in the scene");
  }
  return std::make_unique<OracleScorer>(*scene.labels);
}

int run(int argc, char** argv) {
  CLI::App app{"Sampling-based instance segmentation refinement"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "render synthetic tabletop scenes");
  uint64_t gen_seed = 0;
  std::string gen_out;
  int gen_count = 1;
  SceneGenConfig gen_cfg;
  generate->add_option("--seed", gen_seed, "base seed")->required();
  generate->add_option("--out", gen_out, "output scene directory (or dataset root)")->required();
  generate->add_option("--count", gen_count, "number of scenes (dataset mode when > 1)");
  generate->add_option("--objects", gen_cfg.num_objects, "objects per scene");
  generate->add_option("--width", gen_cfg.width, "frame width");
  generate->add_option("--height", gen_cfg.height, "frame height");
  generate->add_option("--noise-sigma", gen_cfg.depth_noise_sigma_m, "depth noise sigma (m)");
  generate->add_option("--min-extent", gen_cfg.min_extent_px, "minimum object extent (px)");
  generate->add_option("--max-extent", gen_cfg.max_extent_px, "maximum object extent (px)");

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "perturb a scene's labels");
  std::string cor_scene, cor_out, cor_kinds = "split,merge,delete,add";
  uint64_t cor_seed = 0;
  CorruptionConfig cor_cfg;
  corrupt->add_option("--scene", cor_scene, "scene directory")->required();
  corrupt->add_option("--seed", cor_seed, "seed")->required();
  corrupt->add_option("--out", cor_out, "output labels PNG")->required();
  corrupt->add_option("--num", cor_cfg.num_corruptions, "number of corruptions");
  corrupt->add_option("--kinds", cor_kinds, "comma-separated corruption kinds");
  corrupt->add_option("--min-piece-area", cor_cfg.min_piece_area, "minimum piece area");

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "refine an initial segmentation");
  std::string ref_scene, ref_labels, ref_out;
  EngineFlags ref_flags;
  refine_cmd->add_option("--scene", ref_scene, "scene directory")->required();
  refine_cmd->add_option("--init-labels", ref_labels, "initial labels PNG")->required();
  refine_cmd->add_option("--out", ref_out, "output directory")->required();
  ref_flags.attach(refine_cmd);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_out;
  double eval_tol = 2.0;
  int eval_jobs = 1;
  evaluate->add_option("--pred-dir", eval_pred, "prediction dataset directory")->required();
  evaluate->add_option("--gt-dir", eval_gt, "ground-truth dataset directory")->required();
  evaluate->add_option("--tol", eval_tol, "boundary tolerance in pixels");
  evaluate->add_option("--out", eval_out, "report JSON ('-' for stdout)");
  evaluate->add_option("--jobs", eval_jobs, "parallel workers");

  // rank
  auto* rank = app.add_subcommand("rank", "iterative-chain ranking harness");
  std::string rank_scene, rank_labels, rank_out;
  EngineFlags rank_flags;
  rank->add_option("--scene", rank_scene, "scene directory (with ground truth)")->required();
  rank->add_option("--init-labels", rank_labels, "initial labels PNG")->required();
  rank->add_option("--out", rank_out, "report JSON ('-' for stdout)");
  rank_flags.attach(rank);

  // score
  auto* score = app.add_subcommand("score", "score one segmentation");
  std::string score_scene, score_labels;
  EngineFlags score_flags;
  score->add_option("--scene", score_scene, "scene directory")->required();
  score->add_option("--labels", score_labels, "labels PNG")->required();
  score_flags.attach(score);

  // loop-sim (the engine --seed drives the whole simulation)
  auto* loop = app.add_subcommand("loop-sim", "uncertainty-guided interaction loop");
  std::string loop_out;
  LoopSimConfig loop_cfg;
  EngineFlags loop_flags;
  loop->add_option("--out", loop_out, "report JSON ('-' for stdout)");
  loop->add_option("--objects", loop_cfg.scene.num_objects, "objects in the scene");
  loop->add_option("--width", loop_cfg.scene.width, "frame width");
  loop->add_option("--height", loop_cfg.scene.height, "frame height");
  loop->add_option("--num-corruptions", loop_cfg.corruption.num_corruptions,
                   "corruptions per step");
  loop->add_option("--mass-threshold", loop_cfg.mass_threshold, "uncertainty mass trigger");
  loop->add_option("--mask-dilation", loop_cfg.mask_dilation, "mass collection radius (px)");
  loop->add_option("--max-steps", loop_cfg.max_steps, "maximum interaction steps");
  loop_flags.attach(loop);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (generate->parsed()) {
    if (gen_count < 1) throw ConfigInvalidError("count", "must be >= 1");
    if (gen_count == 1) {
      save_scene(generate_scene(gen_seed, gen_cfg), gen_out);
      std::cerr << "wrote scene to " << gen_out << '\n';
    } else {
      for (int k = 0; k < gen_count; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%05d", k);
        save_scene(generate_scene(gen_seed + static_cast<uint64_t>(k), gen_cfg),
                   fs::path(gen_out) / name);
      }
      std::cerr << "wrote " << gen_count << " scenes to " << gen_out << '\n';
    }
    return 0;
  }

  if (corrupt->parsed()) {
    cor_cfg.enable_split = cor_kinds.find("split") != std::string::npos;
    cor_cfg.enable_merge = cor_kinds.find("merge") != std::string::npos;
    cor_cfg.enable_delete = cor_kinds.find("delete") != std::string::npos;
    cor_cfg.enable_add = cor_kinds.find("add") != std::string::npos;
    const Scene scene = load_scene(cor_scene);
    if (!scene.labels) throw MissingFileError("scene has no labels.png to corrupt");
    save_label_image(corrupt_segmentation(*scene.labels, cor_seed, cor_cfg), cor_out);
    std::cerr << "wrote corrupted labels to " << cor_out << '\n';
    return 0;
  }

  if (refine_cmd->parsed()) {
    const EngineConfig cfg = ref_flags.resolve();
    const Scene scene = load_scene(ref_scene);
    const LabelImage initial = load_label_image(ref_labels);
    const auto scorer = make_scorer(cfg, scene);
    Rng rng(cfg.seed);
    const RefinementResult result = refine(scene, initial, cfg, rng, *scorer);
    fs::create_directories(ref_out);
    save_label_image(result.best_labels, fs::path(ref_out) / "refined_labels.png");
    save_unit_raster(result.uncertainty.stddev, result.uncertainty.width,
                     result.uncertainty.height, fs::path(ref_out) / "uncertainty.png");
    write_json(tree_to_json(result.tree), (fs::path(ref_out) / "tree.json").string());
    std::cerr << "best score " << result.best_score << ", tree size " << result.stats.tree_size
              << ", depth " << result.stats.depth << '\n';
    return 0;
  }

  if (evaluate->parsed()) {
    const DatasetReport report = evaluate_dataset(eval_pred, eval_gt, eval_tol, eval_jobs);
    write_json(dataset_report_to_json(report), eval_out);
    return 0;
  }

  if (rank->parsed()) {
    EngineConfig cfg = rank_flags.resolve();
    if (rank_flags.cmd->count("--iterations") == 0) {
      cfg.expansion_iterations = 5;  // chain protocol default
    }
    const Scene scene = load_scene(rank_scene);
    if (!scene.labels) throw MissingFileError("rank needs ground-truth labels in the scene");
    const LabelImage initial = load_label_image(rank_labels);
    const auto scorer = make_scorer(cfg, scene);
    Rng rng(cfg.seed);
    const RankReport report = rank_harness(scene, initial, cfg, rng, *scorer, *scene.labels);
    write_json(rank_report_to_json(report), rank_out);
    return 0;
  }

  if (score->parsed()) {
    const EngineConfig cfg = score_flags.resolve();
    const Scene scene = load_scene(score_scene);
    const LabelImage labels = load_label_image(score_labels);
    const auto scorer = make_scorer(cfg, scene);
    const GraphBuilder builder(scene, EncoderConfig{cfg.d_v, cfg.d_e}, cfg.edge_threshold);
    std::cout << scorer->score(builder.build(labels)) << '\n';
    return 0;
  }

  if (loop->parsed()) {
    loop_cfg.engine = loop_flags.resolve();
    const LoopSimReport report = uncertainty_loop_sim(loop_cfg.engine.seed, loop_cfg);
    write_json(loop_report_to_json(report), loop_out);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const segrefine::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
