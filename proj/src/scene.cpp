#include "segrefine/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

using nlohmann::json;

cv::Mat read_png(const std::filesystem::path& path, int flags, const std::string& name) {
  if (!std::filesystem::exists(path)) throw MissingFileError("missing file: " + name);
  cv::Mat img = cv::imread(path.string(), flags);
  if (img.empty()) throw CorruptEncodingError("failed to decode: " + name);
  return img;
}

void check_dims(const cv::Mat& img, int width, int height, const std::string& name) {
  if (img.cols != width || img.rows != height) {
    throw DimensionMismatchError("dimension mismatch in " + name);
  }
}

void write_png(const cv::Mat& img, const std::filesystem::path& path, const std::string& name) {
  if (!cv::imwrite(path.string(), img)) {
    throw CorruptEncodingError("failed to write: " + name);
  }
}

}  // namespace

PointCloud backproject(const std::vector<double>& depth, int width, int height,
                       const CameraIntrinsics& camera) {
  if (camera.fx <= 0.0 || camera.fy <= 0.0) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  PointCloud cloud;
  cloud.width = width;
  cloud.height = height;
  cloud.xyz.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double d = depth[static_cast<std::size_t>(v) * width + u];
      if (d <= 0.0) continue;
      const std::size_t i = cloud.index(v, u);
      cloud.xyz[i + 0] = (u - camera.cx) * d / camera.fx;
      cloud.xyz[i + 1] = (v - camera.cy) * d / camera.fy;
      cloud.xyz[i + 2] = d;
    }
  }
  return cloud;
}

Scene load_scene(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw MissingFileError("missing scene directory: " + dir.string());
  }
  Scene scene;

  const cv::Mat rgb = read_png(dir / "rgb.png", cv::IMREAD_COLOR, "rgb.png");
  scene.width = rgb.cols;
  scene.height = rgb.rows;
  scene.rgb.resize(static_cast<std::size_t>(scene.width) * scene.height * 3);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const cv::Vec3b bgr = rgb.at<cv::Vec3b>(r, c);
      const std::size_t i = scene.pixel_index(r, c) * 3;
      scene.rgb[i + 0] = bgr[2];
      scene.rgb[i + 1] = bgr[1];
      scene.rgb[i + 2] = bgr[0];
    }
  }

  const cv::Mat depth = read_png(dir / "depth.png", cv::IMREAD_UNCHANGED, "depth.png");
  if (depth.type() != CV_16UC1) throw CorruptEncodingError("depth.png must be 16-bit single channel");
  check_dims(depth, scene.width, scene.height, "depth.png");
  scene.depth.resize(static_cast<std::size_t>(scene.width) * scene.height);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      scene.depth[scene.pixel_index(r, c)] = depth.at<uint16_t>(r, c) / 1000.0;
    }
  }

  const std::filesystem::path camera_path = dir / "camera.json";
  if (!std::filesystem::exists(camera_path)) throw MissingFileError("missing file: camera.json");
  std::ifstream in(camera_path);
  json j;
  try {
    in >> j;
    scene.camera.fx = j.at("fx").get<double>();
    scene.camera.fy = j.at("fy").get<double>();
    scene.camera.cx = j.at("cx").get<double>();
    scene.camera.cy = j.at("cy").get<double>();
  } catch (const json::exception& e) {
    throw CorruptEncodingError(std::string("failed to parse camera.json: ") + e.what());
  }
  if (scene.camera.fx <= 0.0 || scene.camera.fy <= 0.0) {
    throw CorruptEncodingError("camera.json: fx and fy must be positive");
  }

  if (std::filesystem::exists(dir / "labels.png")) {
    const cv::Mat labels = read_png(dir / "labels.png", cv::IMREAD_UNCHANGED, "labels.png");
    if (labels.type() != CV_16UC1) {
      throw CorruptEncodingError("labels.png must be 16-bit single channel");
    }
    check_dims(labels, scene.width, scene.height, "labels.png");
    LabelImage li(scene.width, scene.height);
    for (int r = 0; r < scene.height; ++r) {
      for (int c = 0; c < scene.width; ++c) li.set(r, c, labels.at<uint16_t>(r, c));
    }
    scene.labels = std::move(li);
  }

  if (std::filesystem::exists(dir / "foreground.png")) {
    const cv::Mat fg = read_png(dir / "foreground.png", cv::IMREAD_GRAYSCALE, "foreground.png");
    check_dims(fg, scene.width, scene.height, "foreground.png");
    BinaryMask mask(scene.width, scene.height);
    for (int r = 0; r < scene.height; ++r) {
      for (int c = 0; c < scene.width; ++c) {
        if (fg.at<uint8_t>(r, c) != 0) mask.set(r, c, true);
      }
    }
    scene.foreground = std::move(mask);
  }
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  cv::Mat rgb(scene.height, scene.width, CV_8UC3);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const std::size_t i = scene.pixel_index(r, c) * 3;
      rgb.at<cv::Vec3b>(r, c) = cv::Vec3b(scene.rgb[i + 2], scene.rgb[i + 1], scene.rgb[i + 0]);
    }
  }
  write_png(rgb, dir / "rgb.png", "rgb.png");

  cv::Mat depth(scene.height, scene.width, CV_16UC1);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const double mm = std::round(scene.depth[scene.pixel_index(r, c)] * 1000.0);
      depth.at<uint16_t>(r, c) = static_cast<uint16_t>(std::clamp(mm, 0.0, 65535.0));
    }
  }
  write_png(depth, dir / "depth.png", "depth.png");

  json camera = {{"fx", scene.camera.fx},
                 {"fy", scene.camera.fy},
                 {"cx", scene.camera.cx},
                 {"cy", scene.camera.cy}};
  std::ofstream out(dir / "camera.json");
  out << camera.dump(2) << '\n';
  if (!out) throw CorruptEncodingError("failed to write: camera.json");
  out.close();

  if (scene.labels) {
    cv::Mat labels(scene.height, scene.width, CV_16UC1);
    for (int r = 0; r < scene.height; ++r) {
      for (int c = 0; c < scene.width; ++c) {
        const int32_t v = scene.labels->at(r, c);
        if (v < 0 || v > 65535) throw CorruptEncodingError("labels.png: label out of 16-bit range");
        labels.at<uint16_t>(r, c) = static_cast<uint16_t>(v);
      }
    }
    write_png(labels, dir / "labels.png", "labels.png");
  }

  if (scene.foreground) {
    cv::Mat fg(scene.height, scene.width, CV_8UC1);
    for (int r = 0; r < scene.height; ++r) {
      for (int c = 0; c < scene.width; ++c) {
        fg.at<uint8_t>(r, c) = scene.foreground->at(r, c) ? 255 : 0;
      }
    }
    write_png(fg, dir / "foreground.png", "foreground.png");
  }
}

LabelImage load_label_image(const std::filesystem::path& file) {
  const cv::Mat img = read_png(file, cv::IMREAD_UNCHANGED, file.filename().string());
  if (img.type() != CV_16UC1) {
    throw CorruptEncodingError(file.filename().string() + " must be 16-bit single channel");
  }
  LabelImage out(img.cols, img.rows);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) out.set(r, c, img.at<uint16_t>(r, c));
  }
  return out;
}

void save_label_image(const LabelImage& labels, const std::filesystem::path& file) {
  cv::Mat img(labels.height(), labels.width(), CV_16UC1);
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      const int32_t v = labels.at(r, c);
      if (v < 0 || v > 65535) throw CorruptEncodingError("label out of 16-bit range");
      img.at<uint16_t>(r, c) = static_cast<uint16_t>(v);
    }
  }
  write_png(img, file, file.filename().string());
}

std::vector<double> load_unit_raster(const std::filesystem::path& file, int& width, int& height) {
  const cv::Mat img = read_png(file, cv::IMREAD_UNCHANGED, file.filename().string());
  if (img.type() != CV_16UC1) {
    throw CorruptEncodingError(file.filename().string() + " must be 16-bit single channel");
  }
  width = img.cols;
  height = img.rows;
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      out[static_cast<std::size_t>(r) * width + c] = img.at<uint16_t>(r, c) / 65535.0;
    }
  }
  return out;
}

void save_unit_raster(const std::vector<double>& values, int width, int height,
                      const std::filesystem::path& file) {
  cv::Mat img(height, width, CV_16UC1);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = values[static_cast<std::size_t>(r) * width + c];
      img.at<uint16_t>(r, c) =
          static_cast<uint16_t>(std::clamp(std::round(v * 65535.0), 0.0, 65535.0));
    }
  }
  write_png(img, file, file.filename().string());
}

namespace {

struct ObjectSpec {
  BinaryMask shape;      // full shape, ignoring occlusion
  double depth_m = 0.0;  // constant depth of the object surface
  uint8_t color[3] = {0, 0, 0};
};

BinaryMask rasterize_shape(int width, int height, int kind, int row0, int col0, int extent_r,
                           int extent_c) {
  BinaryMask m(width, height);
  auto paint_rect = [&](int r0, int c0, int er, int ec) {
    for (int r = std::max(0, r0); r < std::min(height, r0 + er); ++r) {
      for (int c = std::max(0, c0); c < std::min(width, c0 + ec); ++c) m.set(r, c, true);
    }
  };
  auto paint_ellipse = [&](double cr, double cc, double ar, double ac) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cr - ar)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(cr + ar)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cc - ac)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(cc + ac)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dr = (r - cr) / ar;
        const double dc = (c - cc) / ac;
        if (dr * dr + dc * dc <= 1.0) m.set(r, c, true);
      }
    }
  };
  switch (kind) {
    case 0:
      paint_rect(row0, col0, extent_r, extent_c);
      break;
    case 1:
      paint_ellipse(row0 + extent_r / 2.0, col0 + extent_c / 2.0, extent_r / 2.0, extent_c / 2.0);
      break;
    default:
      // two overlapping lobes
      paint_rect(row0, col0, (extent_r * 2) / 3, (extent_c * 2) / 3);
      paint_ellipse(row0 + extent_r * 0.55, col0 + extent_c * 0.55, extent_r / 3.0,
                    extent_c / 3.0);
      break;
  }
  return m;
}

ObjectSpec draw_object(uint64_t seed, int object_index, const SceneGenConfig& cfg,
                       const BinaryMask& placed_union) {
  Rng rng(mix_seed(seed, static_cast<uint64_t>(object_index)));
  ObjectSpec obj;
  const int kind = static_cast<int>(rng.index(3));
  const int extent_r = rng.int_in(cfg.min_extent_px, cfg.max_extent_px);
  const int extent_c = rng.int_in(cfg.min_extent_px, cfg.max_extent_px);
  const int margin = 4;
  const int max_row0 = std::max(margin, cfg.height - margin - extent_r);
  const int max_col0 = std::max(margin, cfg.width - margin - extent_c);
  BinaryMask shape;
  for (int attempt = 0; attempt < 20; ++attempt) {
    const int row0 = rng.int_in(margin, max_row0);
    const int col0 = rng.int_in(margin, max_col0);
    shape = rasterize_shape(cfg.width, cfg.height, kind, row0, col0, extent_r, extent_c);
    if (shape.empty()) continue;
    const double overlap =
        static_cast<double>(intersection_area(shape, placed_union)) / shape.area();
    if (overlap <= cfg.max_overlap_fraction) break;
  }
  obj.shape = std::move(shape);
  // distinct millimeter-quantized height above the table per object
  const int height_mm = 10 + static_cast<int>(rng.index(80)) + object_index;
  obj.depth_m = cfg.table_depth_m - height_mm / 1000.0;
  for (int ch = 0; ch < 3; ++ch) obj.color[ch] = static_cast<uint8_t>(rng.int_in(30, 230));
  return obj;
}

}  // namespace

Scene generate_scene(uint64_t seed, const SceneGenConfig& config) {
  return generate_scene(seed, config, {});
}

Scene generate_scene(uint64_t seed, const SceneGenConfig& config,
                     const std::vector<int>& excluded_objects) {
  if (config.num_objects < 1) throw ConfigInvalidError("num_objects", "must be >= 1");
  if (config.width < 64 || config.height < 64) {
    throw ConfigInvalidError("width/height", "image dimensions must be >= 64");
  }
  if (config.min_extent_px < 2 || config.max_extent_px < config.min_extent_px) {
    throw ConfigInvalidError("min_extent_px/max_extent_px", "invalid extent range");
  }
  if (config.table_depth_m <= 0.2) throw ConfigInvalidError("table_depth_m", "must be > 0.2");

  Scene scene;
  scene.width = config.width;
  scene.height = config.height;
  scene.camera = {570.0, 570.0, (config.width - 1) / 2.0, (config.height - 1) / 2.0};

  const std::size_t n_px = static_cast<std::size_t>(config.width) * config.height;
  scene.rgb.assign(n_px * 3, 0);
  scene.depth.assign(n_px, config.table_depth_m);
  const uint8_t table_color[3] = {108, 112, 118};
  for (std::size_t i = 0; i < n_px; ++i) {
    scene.rgb[i * 3 + 0] = table_color[0];
    scene.rgb[i * 3 + 1] = table_color[1];
    scene.rgb[i * 3 + 2] = table_color[2];
  }

  // Object geometry is a pure function of (seed, index, previously placed
  // shapes); exclusion only skips rendering.
  std::vector<ObjectSpec> objects;
  BinaryMask placed(config.width, config.height);
  for (int k = 0; k < config.num_objects; ++k) {
    ObjectSpec obj = draw_object(seed, k, config, placed);
    placed = mask_union(placed, obj.shape);
    objects.push_back(std::move(obj));
  }

  std::vector<int> order(objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return objects[a].depth_m > objects[b].depth_m; });

  LabelImage labels(config.width, config.height);
  for (int k : order) {
    if (std::find(excluded_objects.begin(), excluded_objects.end(), k) != excluded_objects.end()) {
      continue;
    }
    const ObjectSpec& obj = objects[k];
    for (int r = 0; r < config.height; ++r) {
      for (int c = 0; c < config.width; ++c) {
        if (!obj.shape.at(r, c)) continue;
        const std::size_t i = scene.pixel_index(r, c);
        labels.set(r, c, k + 1);
        scene.depth[i] = obj.depth_m;
        scene.rgb[i * 3 + 0] = obj.color[0];
        scene.rgb[i * 3 + 1] = obj.color[1];
        scene.rgb[i * 3 + 2] = obj.color[2];
      }
    }
  }

  if (config.depth_noise_sigma_m > 0.0) {
    Rng noise_rng(mix_seed(seed, 0x6e6f697365ULL));
    for (std::size_t i = 0; i < n_px; ++i) {
      const double noised = scene.depth[i] + noise_rng.normal(0.0, config.depth_noise_sigma_m);
      scene.depth[i] = std::max(0.001, std::round(noised * 1000.0) / 1000.0);
    }
  }

  BinaryMask foreground(config.width, config.height);
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      if (labels.at(r, c) > 0) foreground.set(r, c, true);
    }
  }
  scene.labels = std::move(labels);
  scene.foreground = std::move(foreground);
  return scene;
}

namespace {

int32_t max_label(const LabelImage& labels) {
  int32_t best = 0;
  for (int32_t v : labels.data()) best = std::max(best, v);
  return best;
}

bool try_split(LabelImage& labels, Rng& rng, const CorruptionConfig& cfg) {
  const auto instances = extract_instances(labels);
  std::vector<int32_t> eligible;
  for (const auto& [label, mask] : instances) {
    if (mask.area() >= 2 * cfg.min_piece_area) eligible.push_back(label);
  }
  if (eligible.empty()) return false;
  const int32_t target = eligible[rng.index(eligible.size())];
  const BinaryMask& mask = instances.at(target);
  double cr = 0.0, cc = 0.0;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask.at(r, c)) {
        cr += r;
        cc += c;
      }
    }
  }
  cr /= mask.area();
  cc /= mask.area();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double jr = cr + rng.uniform(-6.0, 6.0);
    const double jc = cc + rng.uniform(-6.0, 6.0);
    const double nr = std::cos(theta);
    const double nc = std::sin(theta);
    int64_t pos = 0, neg = 0;
    for (int r = 0; r < mask.height(); ++r) {
      for (int c = 0; c < mask.width(); ++c) {
        if (!mask.at(r, c)) continue;
        ((r - jr) * nr + (c - jc) * nc >= 0.0) ? ++pos : ++neg;
      }
    }
    if (pos < cfg.min_piece_area || neg < cfg.min_piece_area) continue;
    const int32_t fresh = max_label(labels) + 1;
    for (int r = 0; r < mask.height(); ++r) {
      for (int c = 0; c < mask.width(); ++c) {
        if (mask.at(r, c) && (r - jr) * nr + (c - jc) * nc < 0.0) labels.set(r, c, fresh);
      }
    }
    return true;
  }
  return false;
}

bool try_merge(LabelImage& labels, Rng& rng, const CorruptionConfig& cfg) {
  const auto labs = labels.instance_labels();
  if (labs.size() < 2) return false;
  // count 4-adjacent pixel pairs per label pair
  std::map<std::pair<int32_t, int32_t>, int> adjacency;
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      const int32_t a = labels.at(r, c);
      if (a <= 0) continue;
      if (c + 1 < labels.width()) {
        const int32_t b = labels.at(r, c + 1);
        if (b > 0 && b != a) ++adjacency[{std::min(a, b), std::max(a, b)}];
      }
      if (r + 1 < labels.height()) {
        const int32_t b = labels.at(r + 1, c);
        if (b > 0 && b != a) ++adjacency[{std::min(a, b), std::max(a, b)}];
      }
    }
  }
  std::vector<std::pair<int32_t, int32_t>> candidates;
  for (const auto& [pair, count] : adjacency) {
    if (count >= cfg.min_adjacency) candidates.push_back(pair);
  }
  if (candidates.empty()) return false;
  const auto [keep, absorb] = candidates[rng.index(candidates.size())];
  for (auto& v : labels.data()) {
    if (v == absorb) v = keep;
  }
  return true;
}

// Deleted regions stay repairable-by-addition only while they surface as
// standalone foreground-residual components: deleting a neighbor of an
// already-deleted mask would fuse the two gaps, and carving an additive blob
// out of a deleted region would fragment it. Both are avoided so that every
// corruption keeps an inverse perturbation.
bool try_delete(LabelImage& labels, Rng& rng, const BinaryMask& deleted_union) {
  const auto instances = extract_instances(labels);
  std::vector<int32_t> eligible;
  for (const auto& [label, mask] : instances) {
    if (!deleted_union.empty() &&
        set_distance_capped(mask, deleted_union, 1.5) <= 1.5) {
      continue;
    }
    eligible.push_back(label);
  }
  if (eligible.empty()) return false;
  const int32_t target = eligible[rng.index(eligible.size())];
  for (auto& v : labels.data()) {
    if (v == target) v = 0;
  }
  return true;
}

bool try_add(LabelImage& labels, Rng& rng, const CorruptionConfig& cfg,
             const BinaryMask& deleted_union) {
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const int kind = static_cast<int>(rng.index(2));
    const int er = rng.int_in(12, 48);
    const int ec = rng.int_in(12, 48);
    const int row0 = rng.int_in(0, std::max(0, labels.height() - er));
    const int col0 = rng.int_in(0, std::max(0, labels.width() - ec));
    const BinaryMask shape = rasterize_shape(labels.width(), labels.height(), kind, row0, col0, er, ec);
    if (!deleted_union.empty() && intersection_area(shape, deleted_union) > 0) continue;
    int64_t area = 0;
    for (int r = 0; r < labels.height(); ++r) {
      for (int c = 0; c < labels.width(); ++c) {
        if (shape.at(r, c) && labels.at(r, c) == 0) ++area;
      }
    }
    if (area < cfg.min_piece_area) continue;
    const int32_t fresh = max_label(labels) + 1;
    for (int r = 0; r < labels.height(); ++r) {
      for (int c = 0; c < labels.width(); ++c) {
        if (shape.at(r, c) && labels.at(r, c) == 0) labels.set(r, c, fresh);
      }
    }
    return true;
  }
  return false;
}

}  // namespace

LabelImage corrupt_segmentation(const LabelImage& labels, uint64_t seed,
                                const CorruptionConfig& config) {
  LabelImage out = labels;
  Rng rng(seed);
  enum Kind { kSplit, kMerge, kDelete, kAdd };
  std::vector<Kind> kinds;
  if (config.enable_split) kinds.push_back(kSplit);
  if (config.enable_merge) kinds.push_back(kMerge);
  if (config.enable_delete) kinds.push_back(kDelete);
  if (config.enable_add) kinds.push_back(kAdd);
  if (kinds.empty()) return out;
  BinaryMask deleted_union(labels.width(), labels.height());
  for (int i = 0; i < config.num_corruptions; ++i) {
    const std::size_t start = rng.index(kinds.size());
    for (std::size_t attempt = 0; attempt < kinds.size(); ++attempt) {
      const Kind kind = kinds[(start + attempt) % kinds.size()];
      bool done = false;
      switch (kind) {
        case kSplit:
          done = try_split(out, rng, config);
          break;
        case kMerge:
          done = try_merge(out, rng, config);
          break;
        case kDelete: {
          const LabelImage before = out;
          done = try_delete(out, rng, deleted_union);
          if (done) {
            for (std::size_t p = 0; p < before.data().size(); ++p) {
              if (before.data()[p] != 0 && out.data()[p] == 0) {
                deleted_union.set(static_cast<int>(p) / out.width(),
                                  static_cast<int>(p) % out.width(), true);
              }
            }
          }
          break;
        }
        case kAdd:
          done = try_add(out, rng, config, deleted_union);
          break;
      }
      if (done) break;
    }
  }
  return out;
}

}  // namespace segrefine
