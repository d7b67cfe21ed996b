#include <doctest.h>

#include <cmath>

#include "segrefine/errors.hpp"
#include "segrefine/seg_graph.hpp"

using namespace segrefine;

namespace {

// Flat scene with constant color and depth; geometry features dominate.
Scene flat_scene(int w, int h, double depth = 1.0) {
  Scene s;
  s.width = w;
  s.height = h;
  s.camera = {500.0, 500.0, (w - 1) / 2.0, (h - 1) / 2.0};
  s.rgb.assign(static_cast<std::size_t>(w) * h * 3, 100);
  s.depth.assign(static_cast<std::size_t>(w) * h, depth);
  return s;
}

BinaryMask rect_mask(int w, int h, int r0, int c0, int rows, int cols) {
  BinaryMask m(w, h);
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) m.set(r, c, true);
  return m;
}

LabelImage labels_from(const std::vector<BinaryMask>& masks, int w, int h) {
  LabelImage li(w, h);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (masks[k].at(r, c)) li.set(r, c, static_cast<int32_t>(k + 1));
  }
  return li;
}

}  // namespace

TEST_SUITE("seg_graph") {

TEST_CASE("encode_node on the full frame") {
  const Scene s = flat_scene(40, 20);
  const GraphBuilder builder(s);
  BinaryMask full(40, 20);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 40; ++c) full.set(r, c, true);
  const FeatureVector v = builder.encode_node(full);
  namespace fi = feature_index;
  CHECK(v[fi::kCentroidRow] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v[fi::kCentroidCol] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v[fi::kAreaFraction] == doctest::Approx(1.0));
  CHECK(v[fi::kBboxMinRow] == 0.0);
  CHECK(v[fi::kBboxMaxRow] == 1.0);
  CHECK(v[fi::kBorderContact] == 1.0);
  CHECK(static_cast<int>(v.size()) == 32);
  for (int k = fi::kCount; k < 32; ++k) CHECK(v[k] == 0.0);
}

TEST_CASE("translation moves only centroid and bbox on a flat scene") {
  const Scene s = flat_scene(60, 40);
  const GraphBuilder builder(s);
  const FeatureVector a = builder.encode_node(rect_mask(60, 40, 5, 5, 8, 8));
  const FeatureVector b = builder.encode_node(rect_mask(60, 40, 20, 30, 8, 8));
  namespace fi = feature_index;
  for (int k = 0; k < 32; ++k) {
    const bool positional = k == fi::kCentroidRow || k == fi::kCentroidCol ||
                            (k >= fi::kBboxMinRow && k <= fi::kBboxMaxCol) || k == fi::kExtentX ||
                            k == fi::kExtentY;
    if (positional) continue;  // extent in x/y shifts with the crop under perspective
    CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-9));
  }
  CHECK(a[fi::kCentroidRow] != b[fi::kCentroidRow]);
}

TEST_CASE("encode determinism and error paths") {
  const Scene s = flat_scene(30, 30);
  const GraphBuilder builder(s);
  const BinaryMask m = rect_mask(30, 30, 3, 4, 6, 7);
  CHECK(builder.encode_node(m) == builder.encode_node(m));
  CHECK_THROWS_AS(builder.encode_node(BinaryMask(30, 30)), EmptyMaskError);
}

TEST_CASE("encode_edge symmetry and union equivalence") {
  const Scene s = flat_scene(50, 30);
  const GraphBuilder builder(s);
  const BinaryMask left = rect_mask(50, 30, 10, 10, 10, 5);
  const BinaryMask right = rect_mask(50, 30, 10, 15, 10, 5);
  CHECK(builder.encode_edge(left, right) == builder.encode_edge(right, left));
  CHECK(builder.encode_edge(left, right) == builder.encode_node(mask_union(left, right)));
  CHECK_THROWS_AS(builder.encode_edge(left, left), std::invalid_argument);
}

TEST_CASE("build_graph edge threshold semantics") {
  const Scene s = flat_scene(80, 40);
  const GraphBuilder builder(s, EncoderConfig{}, 10.0);
  // two instances 3 px apart -> one edge
  {
    const auto masks = std::vector<BinaryMask>{rect_mask(80, 40, 10, 10, 10, 10),
                                               rect_mask(80, 40, 10, 23, 10, 10)};
    const SegGraph g = builder.build(labels_from(masks, 80, 40));
    CHECK(g.instance_ids().size() == 2);
    CHECK(g.num_edges() == 1);
    CHECK(g.has_edge(1, 2));
  }
  // 30 px apart -> no edge
  {
    const auto masks = std::vector<BinaryMask>{rect_mask(80, 40, 10, 5, 10, 10),
                                               rect_mask(80, 40, 10, 45, 10, 10)};
    const SegGraph g = builder.build(labels_from(masks, 80, 40));
    CHECK(g.num_edges() == 0);
  }
  // single instance: one instance node + background, no edges
  {
    const auto masks = std::vector<BinaryMask>{rect_mask(80, 40, 10, 10, 10, 10)};
    const SegGraph g = builder.build(labels_from(masks, 80, 40));
    CHECK(g.num_nodes() == 2);
    CHECK(g.num_edges() == 0);
    CHECK(g.nodes.count(SegGraph::kBackgroundId) == 1);
  }
}

TEST_CASE("edge set exactly matches the threshold predicate") {
  const Scene s = flat_scene(64, 48);
  const GraphBuilder builder(s, EncoderConfig{}, 6.0);
  const std::vector<BinaryMask> masks = {
      rect_mask(64, 48, 2, 2, 8, 8), rect_mask(64, 48, 2, 14, 8, 8),
      rect_mask(64, 48, 30, 2, 8, 8), rect_mask(64, 48, 16, 26, 8, 8)};
  const SegGraph g = builder.build(labels_from(masks, 64, 48));
  const auto ids = g.instance_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double d = set_distance(g.nodes.at(ids[i]).mask, g.nodes.at(ids[j]).mask);
      CHECK(g.has_edge(ids[i], ids[j]) == (d <= 6.0));
    }
  }
  // background participates in no edges
  for (const auto& [key, feats] : g.edges) {
    CHECK(key.first != SegGraph::kBackgroundId);
    CHECK(key.second != SegGraph::kBackgroundId);
  }
}

TEST_CASE("graph round trip to labels") {
  const Scene s = generate_scene(19, [] {
    SceneGenConfig c;
    c.width = 120;
    c.height = 90;
    c.num_objects = 5;
    c.min_extent_px = 14;
    c.max_extent_px = 30;
    return c;
  }());
  const GraphBuilder builder(s);
  const SegGraph g = builder.build(*s.labels);
  const LabelImage back = graph_to_labels(g);
  // identical up to relabeling: instance sets must match exactly
  const auto orig = extract_instances(*s.labels);
  const auto round = extract_instances(back);
  REQUIRE(orig.size() == round.size());
  auto it = round.begin();
  for (const auto& [label, mask] : orig) {
    CHECK(it->second == mask);
    ++it;
  }
  // background complement invariant
  BinaryMask fg(g.width, g.height);
  for (const NodeId id : g.instance_ids()) fg = mask_union(fg, g.nodes.at(id).mask);
  CHECK(g.nodes.at(SegGraph::kBackgroundId).mask == mask_complement(fg));

  // empty instance set -> all-zero image
  const SegGraph empty_graph = builder.build(LabelImage(s.width, s.height));
  const LabelImage zeros = graph_to_labels(empty_graph);
  for (int32_t v : zeros.data()) CHECK(v == 0);
}

TEST_CASE("graph json round trip") {
  const Scene s = flat_scene(48, 32);
  const GraphBuilder builder(s);
  const auto masks = std::vector<BinaryMask>{rect_mask(48, 32, 2, 2, 8, 8),
                                             rect_mask(48, 32, 2, 12, 8, 8)};
  const SegGraph g = builder.build(labels_from(masks, 48, 32));
  const SegGraph h = graph_from_json(graph_to_json(g));
  CHECK(h.width == g.width);
  CHECK(h.nodes.size() == g.nodes.size());
  for (const auto& [id, node] : g.nodes) {
    CHECK(h.nodes.at(id).mask == node.mask);
    CHECK(h.nodes.at(id).features == node.features);
  }
  CHECK(h.edges == g.edges);
}

TEST_CASE("insert and remove maintenance helpers") {
  const Scene s = flat_scene(64, 48);
  const GraphBuilder builder(s, EncoderConfig{}, 8.0);
  const auto masks = std::vector<BinaryMask>{rect_mask(64, 48, 4, 4, 10, 10)};
  SegGraph g = builder.build(labels_from(masks, 64, 48));
  const NodeId added = builder.insert_instance(g, rect_mask(64, 48, 4, 18, 10, 10));
  builder.refresh_background(g);
  CHECK(g.instance_ids().size() == 2);
  CHECK(g.has_edge(1, added));
  CHECK_THROWS_AS(builder.insert_instance(g, rect_mask(64, 48, 4, 4, 4, 4)),
                  std::invalid_argument);
  builder.remove_instance(g, added);
  builder.refresh_background(g);
  CHECK(g.instance_ids().size() == 1);
  CHECK(g.num_edges() == 0);
  CHECK_THROWS_AS(builder.remove_instance(g, 99), UnknownNodeError);
}

}  // TEST_SUITE
