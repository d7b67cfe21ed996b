#include "segrefine/sgs_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "segrefine/errors.hpp"
#include "segrefine/rng.hpp"

namespace segrefine {

namespace {

Eigen::VectorXd relu(Eigen::VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::max(0.0, v[i]);
  return v;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

// Mean with a content-defined summation order, so that permuting the input
// list cannot change the result even at the bit level.
Eigen::VectorXd canonical_mean(std::vector<Eigen::VectorXd> items, int dim) {
  if (items.empty()) return Eigen::VectorXd::Zero(dim);
  std::sort(items.begin(), items.end(), lex_less);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& v : items) sum += v;
  return sum / static_cast<double>(items.size());
}

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

Eigen::VectorXd concat3(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& c) {
  Eigen::VectorXd out(a.size() + b.size() + c.size());
  out << a, b, c;
  return out;
}

void check_mlp(const Mlp& mlp, int in, int out, const std::string& name) {
  if (mlp.weights.empty() || mlp.weights.size() != mlp.biases.size()) {
    throw CorruptModelError(name + ": empty or inconsistent layer list");
  }
  int prev = in;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    if (mlp.weights[l].cols() != prev || mlp.weights[l].rows() != mlp.biases[l].size()) {
      throw CorruptModelError(name + ": layer dimensions do not chain");
    }
    prev = static_cast<int>(mlp.weights[l].rows());
    if (!mlp.weights[l].allFinite() || !mlp.biases[l].allFinite()) {
      throw CorruptModelError(name + ": non-finite weights");
    }
  }
  if (prev != out) throw CorruptModelError(name + ": wrong output dimension");
}

}  // namespace

Eigen::VectorXd Mlp::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    v = weights[l] * v + biases[l];
    if (l + 1 < weights.size()) v = relu(std::move(v));
  }
  return v;
}

void ScoreModel::validate() const {
  if (d_v < 1 || d_e < 1 || num_layers < 1) {
    throw CorruptModelError("model dimensions must be positive");
  }
  if (static_cast<int>(edge_update.size()) != num_layers ||
      static_cast<int>(message.size()) != num_layers ||
      static_cast<int>(node_update.size()) != num_layers) {
    throw CorruptModelError("layer count mismatch");
  }
  for (int l = 0; l < num_layers; ++l) {
    check_mlp(edge_update[l], 2 * d_v + d_e, d_e, "phi_e[" + std::to_string(l) + "]");
    check_mlp(message[l], d_e + d_v, d_v, "phi_v1[" + std::to_string(l) + "]");
    check_mlp(node_update[l], 2 * d_v, d_v, "phi_v2[" + std::to_string(l) + "]");
  }
  check_mlp(output, d_v + d_e, 1, "phi_o");
}

namespace {

Mlp init_mlp(Rng& rng, int in, const std::vector<int>& hidden, int out) {
  Mlp mlp;
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int rows = dims[l + 1];
    const int cols = dims[l];
    const double a = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-a, a);
    }
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  return mlp;
}

}  // namespace

ScoreModel init_model(uint64_t seed, int d_v, int d_e, int num_layers,
                      const std::vector<int>& hidden) {
  Rng rng(mix_seed(seed, 0x7363736eULL));
  ScoreModel model;
  model.d_v = d_v;
  model.d_e = d_e;
  model.num_layers = num_layers;
  for (int l = 0; l < num_layers; ++l) {
    model.edge_update.push_back(init_mlp(rng, 2 * d_v + d_e, hidden, d_e));
    model.message.push_back(init_mlp(rng, d_e + d_v, hidden, d_v));
    model.node_update.push_back(init_mlp(rng, 2 * d_v, hidden, d_v));
  }
  model.output = init_mlp(rng, d_v + d_e, hidden, 1);
  model.validate();
  return model;
}

namespace {

uint64_t fnv1a(const std::vector<uint8_t>& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

void append_le_double(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<uint8_t>((bits >> (8 * k)) & 0xff));
}

double read_le_double(const uint8_t* p) {
  uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(p[k]) << (8 * k);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void dump_mlp(std::vector<uint8_t>& blob, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    const auto& w = mlp.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) append_le_double(blob, w(r, c));
    }
    for (Eigen::Index r = 0; r < mlp.biases[l].size(); ++r) {
      append_le_double(blob, mlp.biases[l][r]);
    }
  }
}

std::vector<int> mlp_widths(const Mlp& mlp) {
  std::vector<int> widths{mlp.input_dim()};
  for (const auto& w : mlp.weights) widths.push_back(static_cast<int>(w.rows()));
  return widths;
}

Mlp read_mlp(const std::vector<uint8_t>& blob, std::size_t& pos, const std::vector<int>& widths) {
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int cols = widths[l];
    const int rows = widths[l + 1];
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        w(r, c) = read_le_double(blob.data() + pos);
        pos += 8;
      }
    }
    Eigen::VectorXd b(rows);
    for (int r = 0; r < rows; ++r) {
      b[r] = read_le_double(blob.data() + pos);
      pos += 8;
    }
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

}  // namespace

void save_model(const ScoreModel& model, const std::filesystem::path& path) {
  model.validate();
  std::vector<uint8_t> blob;
  for (int l = 0; l < model.num_layers; ++l) {
    dump_mlp(blob, model.edge_update[l]);
    dump_mlp(blob, model.message[l]);
    dump_mlp(blob, model.node_update[l]);
  }
  dump_mlp(blob, model.output);

  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(fnv1a(blob)));
  const nlohmann::json header = {{"format", "sgs-model"},
                                 {"version", 1},
                                 {"d_v", model.d_v},
                                 {"d_e", model.d_e},
                                 {"num_layers", model.num_layers},
                                 {"widths",
                                  {{"edge", mlp_widths(model.edge_update[0])},
                                   {"message", mlp_widths(model.message[0])},
                                   {"update", mlp_widths(model.node_update[0])},
                                   {"output", mlp_widths(model.output)}}},
                                 {"blob_bytes", blob.size()},
                                 {"checksum", checksum}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorruptModelError("cannot open model file for writing: " + path.string());
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw CorruptModelError("failed to write model file: " + path.string());
}

ScoreModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptModelError("cannot open model file: " + path.string());
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  ScoreModel model;
  std::vector<int> edge_w, msg_w, upd_w, out_w;
  std::size_t blob_bytes = 0;
  std::string checksum;
  try {
    header = nlohmann::json::parse(header_line);
    if (header.at("format").get<std::string>() != "sgs-model") {
      throw CorruptModelError("not a model file: " + path.string());
    }
    model.d_v = header.at("d_v").get<int>();
    model.d_e = header.at("d_e").get<int>();
    model.num_layers = header.at("num_layers").get<int>();
    edge_w = header.at("widths").at("edge").get<std::vector<int>>();
    msg_w = header.at("widths").at("message").get<std::vector<int>>();
    upd_w = header.at("widths").at("update").get<std::vector<int>>();
    out_w = header.at("widths").at("output").get<std::vector<int>>();
    blob_bytes = header.at("blob_bytes").get<std::size_t>();
    checksum = header.at("checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModelError(std::string("bad model header: ") + e.what());
  }
  std::vector<uint8_t> blob(blob_bytes);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (static_cast<std::size_t>(in.gcount()) != blob_bytes) {
    throw CorruptModelError("model blob truncated: " + path.string());
  }
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%016llx", static_cast<unsigned long long>(fnv1a(blob)));
  if (checksum != expect) throw CorruptModelError("model checksum mismatch: " + path.string());

  std::size_t pos = 0;
  for (int l = 0; l < model.num_layers; ++l) {
    model.edge_update.push_back(read_mlp(blob, pos, edge_w));
    model.message.push_back(read_mlp(blob, pos, msg_w));
    model.node_update.push_back(read_mlp(blob, pos, upd_w));
  }
  model.output = read_mlp(blob, pos, out_w);
  if (pos != blob.size()) throw CorruptModelError("model blob size mismatch: " + path.string());
  model.validate();
  return model;
}

GraphTensors tensors_from_graph(const SegGraph& graph, const ScoreModel& model) {
  GraphTensors t;
  std::map<NodeId, int> index;
  for (const auto& [id, node] : graph.nodes) {
    if (static_cast<int>(node.features.size()) != model.d_v) {
      throw DimensionMismatchError("node feature dimension does not match model d_v");
    }
    index[id] = static_cast<int>(t.nodes.size());
    t.nodes.push_back(Eigen::Map<const Eigen::VectorXd>(node.features.data(), model.d_v));
  }
  for (const auto& [key, features] : graph.edges) {
    if (static_cast<int>(features.size()) != model.d_e) {
      throw DimensionMismatchError("edge feature dimension does not match model d_e");
    }
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(features.data(), model.d_e);
    t.edges.emplace_back(index.at(key.first), index.at(key.second));
    t.edge_features.push_back(e);
    t.edges.emplace_back(index.at(key.second), index.at(key.first));
    t.edge_features.push_back(e);
  }
  return t;
}

void rgl_forward(GraphTensors& t, const Mlp& phi_e, const Mlp& phi_v1, const Mlp& phi_v2) {
  const int d_v = t.nodes.empty() ? 0 : static_cast<int>(t.nodes[0].size());
  // edge update (uses pre-update node features)
  std::vector<Eigen::VectorXd> new_edges(t.edge_features.size());
  for (std::size_t k = 0; k < t.edge_features.size(); ++k) {
    const auto& [i, j] = t.edges[k];
    new_edges[k] = relu(t.edge_features[k] +
                        phi_e.apply(concat3(t.nodes[i], t.nodes[j], t.edge_features[k])));
  }
  // node update: mean over outgoing messages, zero vector for isolated nodes
  std::vector<std::vector<Eigen::VectorXd>> inbox(t.nodes.size());
  for (std::size_t k = 0; k < t.edge_features.size(); ++k) {
    const auto& [i, j] = t.edges[k];
    inbox[i].push_back(phi_v1.apply(concat(new_edges[k], t.nodes[j])));
  }
  std::vector<Eigen::VectorXd> new_nodes(t.nodes.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const Eigen::VectorXd agg = canonical_mean(std::move(inbox[i]), d_v);
    new_nodes[i] = relu(t.nodes[i] + phi_v2.apply(concat(agg, t.nodes[i])));
  }
  t.nodes = std::move(new_nodes);
  t.edge_features = std::move(new_edges);
}

double score_tensors(GraphTensors t, const ScoreModel& model) {
  for (int l = 0; l < model.num_layers; ++l) {
    rgl_forward(t, model.edge_update[l], model.message[l], model.node_update[l]);
  }
  const Eigen::VectorXd node_mean = canonical_mean(t.nodes, model.d_v);
  const Eigen::VectorXd edge_mean = canonical_mean(t.edge_features, model.d_e);
  const double logit = model.output.apply(concat(node_mean, edge_mean))[0];
  return 1.0 / (1.0 + std::exp(-logit));
}

double score_graph(const SegGraph& graph, const ScoreModel& model) {
  return score_tensors(tensors_from_graph(graph, model), model);
}

}  // namespace segrefine
