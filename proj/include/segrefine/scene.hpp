#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "segrefine/mask.hpp"
#include "segrefine/rng.hpp"

namespace segrefine {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

// One RGB-D frame plus optional ground-truth labels and an optional external
// foreground mask. Depth is metric (meters); 0 marks invalid pixels.
struct Scene {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;    // H*W*3, RGB order
  std::vector<double> depth;   // H*W meters
  CameraIntrinsics camera;
  std::optional<LabelImage> labels;
  std::optional<BinaryMask> foreground;

  std::size_t pixel_index(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
};

// Organized (pixel-aligned) point cloud, H*W*3 in meters.
struct PointCloud {
  int width = 0;
  int height = 0;
  std::vector<double> xyz;

  std::size_t index(int row, int col) const {
    return (static_cast<std::size_t>(row) * width + col) * 3;
  }
};

// xyz = ((u-cx)*d/fx, (v-cy)*d/fy, d) for valid depth d at column u, row v;
// invalid depth maps to (0,0,0).
PointCloud backproject(const std::vector<double>& depth, int width, int height,
                       const CameraIntrinsics& camera);
inline PointCloud backproject(const Scene& scene) {
  return backproject(scene.depth, scene.width, scene.height, scene.camera);
}

// Scene directory layout: rgb.png (8-bit RGB), depth.png (16-bit, millimeters),
// labels.png (16-bit instance ids, optional), foreground.png (8-bit, nonzero =
// foreground, optional), camera.json (fx, fy, cx, cy).
Scene load_scene(const std::filesystem::path& dir);
void save_scene(const Scene& scene, const std::filesystem::path& dir);

// Standalone 16-bit label rasters (same encoding as labels.png).
LabelImage load_label_image(const std::filesystem::path& file);
void save_label_image(const LabelImage& labels, const std::filesystem::path& file);

// 16-bit raster of values in [0, 1] scaled by 65535 (uncertainty maps,
// boundary-probability files).
std::vector<double> load_unit_raster(const std::filesystem::path& file, int& width, int& height);
void save_unit_raster(const std::vector<double>& values, int width, int height,
                      const std::filesystem::path& file);

struct SceneGenConfig {
  int width = 640;
  int height = 480;
  int num_objects = 12;
  double table_depth_m = 1.0;
  double depth_noise_sigma_m = 0.0;
  int min_extent_px = 40;
  int max_extent_px = 110;
  double max_overlap_fraction = 0.3;
};

// Deterministic synthetic tabletop scene: layered flat-colored convex shapes
// at distinct constant depths above a planar table, ground-truth labels from
// the occlusion ordering, foreground = union of visible object pixels. Object
// geometry depends only on (seed, object index), so excluding objects leaves
// the rest bit-identical.
Scene generate_scene(uint64_t seed, const SceneGenConfig& config);
Scene generate_scene(uint64_t seed, const SceneGenConfig& config,
                     const std::vector<int>& excluded_objects);

struct CorruptionConfig {
  int num_corruptions = 3;
  bool enable_split = true;
  bool enable_merge = true;
  bool enable_delete = true;
  bool enable_add = true;
  int min_piece_area = 64;
  int min_adjacency = 3;  // merged pairs must share at least this many 4-adjacent pixel pairs
  int max_attempts = 10;
};

// Applies `num_corruptions` random perturbations (straight-line splits,
// neighbor merges, deletions, additive background blobs). Always returns a
// valid label image; infeasible draws are skipped.
LabelImage corrupt_segmentation(const LabelImage& labels, uint64_t seed,
                                const CorruptionConfig& config);

}  // namespace segrefine
