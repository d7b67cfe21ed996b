#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "segrefine/metrics.hpp"
#include "segrefine/seg_graph.hpp"

namespace segrefine {

// Plain MLP: ReLU between layers, linear output.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // per layer, out x in
  std::vector<Eigen::VectorXd> biases;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
};

// Residual graph scoring network: `num_layers` residual GraphNet layers then
// a sigmoid output head.
//   edge update:   e' = ReLU(e + phi_e(v_i, v_j, e))
//   node message:  E_i = { phi_v1(e'_ij, v_j) : (i,j) directed }
//   node update:   v' = ReLU(v + phi_v2(mean E_i, v))
//   score:         sigmoid(phi_o(mean V, mean E))
struct ScoreModel {
  int d_v = 32;
  int d_e = 32;
  int num_layers = 3;
  std::vector<Mlp> edge_update;  // phi_e,  (2 d_v + d_e) -> d_e
  std::vector<Mlp> message;      // phi_v1, (d_e + d_v)   -> d_v
  std::vector<Mlp> node_update;  // phi_v2, (2 d_v)       -> d_v
  Mlp output;                    // phi_o,  (d_v + d_e)   -> 1

  // Throws CorruptModelError when dimensions do not chain or weights are not
  // finite.
  void validate() const;
};

// Seeded Xavier-uniform initialization (biases zero); deterministic fill
// order, portable RNG.
ScoreModel init_model(uint64_t seed, int d_v = 32, int d_e = 32, int num_layers = 3,
                      const std::vector<int>& hidden = {64, 64});

// Model file: one-line JSON header (dims, layer widths, blob length, FNV-1a
// checksum) followed by the flat little-endian float64 weight blob.
void save_model(const ScoreModel& model, const std::filesystem::path& path);
ScoreModel load_model(const std::filesystem::path& path);

// Dense view of one graph for the forward pass. Undirected graph edges are
// canonically doubled into both (i,j) and (j,i) directed entries.
struct GraphTensors {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<std::pair<int, int>> edges;  // indices into `nodes`
  std::vector<Eigen::VectorXd> edge_features;
};

GraphTensors tensors_from_graph(const SegGraph& graph, const ScoreModel& model);

// One residual GraphNet layer, in place.
void rgl_forward(GraphTensors& tensors, const Mlp& phi_e, const Mlp& phi_v1, const Mlp& phi_v2);

double score_tensors(GraphTensors tensors, const ScoreModel& model);

// Full forward pass; deterministic and invariant to node-id permutation
// (aggregation sums in content-sorted order, so equality is bit-exact).
double score_graph(const SegGraph& graph, const ScoreModel& model);

// Scorer interface used by the sample tree.
class GraphScorer {
 public:
  virtual ~GraphScorer() = default;
  virtual double score(const SegGraph& graph) const = 0;
};

class ModelScorer : public GraphScorer {
 public:
  explicit ModelScorer(ScoreModel model) : model_(std::move(model)) { model_.validate(); }
  double score(const SegGraph& graph) const override { return score_graph(graph, model_); }
  const ScoreModel& model() const { return model_; }

 private:
  ScoreModel model_;
};

// Ground-truth oracle: 0.8 * Overlap F + 0.2 * F@.75 of the graph's labels
// against a fixed reference.
class OracleScorer : public GraphScorer {
 public:
  explicit OracleScorer(const LabelImage& gt) : gt_(&gt) {}
  double score(const SegGraph& graph) const override {
    return oracle_score(graph_to_labels(graph), *gt_);
  }

 private:
  const LabelImage* gt_;
};

}  // namespace segrefine
