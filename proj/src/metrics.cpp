#include "segrefine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "segrefine/errors.hpp"
#include "segrefine/scene.hpp"

namespace segrefine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;

double f_measure(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Standard O(n^3) Hungarian algorithm with potentials, minimizing total cost
// over perfect matchings of an n x n matrix. Returns row -> column.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Maximum achievable total over one-to-one matchings restricted to the given
// index subsets.
double max_total(const std::vector<std::vector<double>>& scores, const std::vector<int>& preds,
                 const std::vector<int>& gts) {
  if (preds.empty() || gts.empty()) return 0.0;
  const int n = static_cast<int>(std::max(preds.size(), gts.size()));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < preds.size(); ++a) {
    for (std::size_t b = 0; b < gts.size(); ++b) {
      cost[a][b] = -std::max(0.0, scores[preds[a]][gts[b]]);
    }
  }
  const std::vector<int> match = hungarian_min_cost(cost);
  double total = 0.0;
  for (std::size_t a = 0; a < preds.size(); ++a) {
    const int b = match[a];
    if (b >= 0 && b < static_cast<int>(gts.size())) {
      total += std::max(0.0, scores[preds[a]][gts[b]]);
    }
  }
  return total;
}

// Shared contingency pass: instance areas on both sides plus intersection
// counts for every co-occurring label pair. One sweep over the frame.
struct LabelPairCounts {
  std::vector<int32_t> pred_labels;  // ascending
  std::vector<int32_t> gt_labels;    // ascending
  std::vector<int64_t> pred_areas;
  std::vector<int64_t> gt_areas;
  std::vector<int64_t> inter;  // dense N x M

  int64_t at(int i, int j) const { return inter[static_cast<std::size_t>(i) * gt_labels.size() + j]; }
};

LabelPairCounts count_label_pairs(const LabelImage& pred, const LabelImage& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw FrameMismatchError("prediction and ground truth frames differ");
  }
  LabelPairCounts out;
  out.pred_labels = pred.instance_labels();
  out.gt_labels = gt.instance_labels();
  std::map<int32_t, int> pred_index, gt_index;
  for (std::size_t i = 0; i < out.pred_labels.size(); ++i) pred_index[out.pred_labels[i]] = static_cast<int>(i);
  for (std::size_t j = 0; j < out.gt_labels.size(); ++j) gt_index[out.gt_labels[j]] = static_cast<int>(j);
  out.pred_areas.assign(out.pred_labels.size(), 0);
  out.gt_areas.assign(out.gt_labels.size(), 0);
  out.inter.assign(out.pred_labels.size() * out.gt_labels.size(), 0);
  const auto& dp = pred.data();
  const auto& dg = gt.data();
  for (std::size_t k = 0; k < dp.size(); ++k) {
    const int32_t a = dp[k];
    const int32_t b = dg[k];
    const int i = a > 0 ? pred_index[a] : -1;
    const int j = b > 0 ? gt_index[b] : -1;
    if (i >= 0) ++out.pred_areas[i];
    if (j >= 0) ++out.gt_areas[j];
    if (i >= 0 && j >= 0) ++out.inter[static_cast<std::size_t>(i) * out.gt_labels.size() + j];
  }
  return out;
}

std::vector<std::vector<double>> f_matrix(const LabelPairCounts& counts) {
  const std::size_t n = counts.pred_labels.size();
  const std::size_t m = counts.gt_labels.size();
  std::vector<std::vector<double>> f(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const int64_t inter = counts.at(static_cast<int>(i), static_cast<int>(j));
      if (inter == 0) continue;
      // F = 2|∩| / (|pred| + |gt|)
      f[i][j] = 2.0 * inter / static_cast<double>(counts.pred_areas[i] + counts.gt_areas[j]);
    }
  }
  return f;
}

struct DegenerateCase {
  bool degenerate;
  double value;
};

DegenerateCase degenerate_counts(std::size_t n, std::size_t m) {
  if (n == 0 && m == 0) return {true, 1.0};
  if (n == 0 || m == 0) return {true, 0.0};
  return {false, 0.0};
}

OsnMetrics osn_from_pairs(const std::vector<PairPrf>& matched, std::size_t n, std::size_t m) {
  const auto degenerate = degenerate_counts(n, m);
  if (degenerate.degenerate) {
    return {degenerate.value, degenerate.value, degenerate.value, degenerate.value};
  }
  OsnMetrics out;
  for (const PairPrf& pair : matched) {
    out.precision += pair.precision;
    out.recall += pair.recall;
    out.f += pair.f;
    if (pair.f >= 0.75) out.f_at_75 += 1.0;
  }
  const double maxnm = static_cast<double>(std::max(n, m));
  out.precision /= static_cast<double>(n);
  out.recall /= static_cast<double>(m);
  out.f /= maxnm;
  out.f_at_75 /= maxnm;
  return out;
}

}  // namespace

PairPrf pairwise_prf(const BinaryMask& pred, const BinaryMask& gt) {
  const int64_t inter = intersection_area(pred, gt);
  PairPrf out;
  out.precision = pred.area() > 0 ? static_cast<double>(inter) / pred.area() : 0.0;
  out.recall = gt.area() > 0 ? static_cast<double>(inter) / gt.area() : 0.0;
  out.f = f_measure(out.precision, out.recall);
  return out;
}

PairPrf boundary_pairwise_prf(const BinaryMask& pred, const BinaryMask& gt, double tol) {
  const BinaryMask bp = boundary(pred);
  const BinaryMask bg = boundary(gt);
  PairPrf out;
  const int64_t p_hit = bp.empty() || bg.empty() ? 0 : intersection_area(bp, dilate(bg, tol));
  const int64_t r_hit = bp.empty() || bg.empty() ? 0 : intersection_area(dilate(bp, tol), bg);
  out.precision = bp.area() > 0 ? static_cast<double>(p_hit) / bp.area() : 0.0;
  out.recall = bg.area() > 0 ? static_cast<double>(r_hit) / bg.area() : 0.0;
  out.f = f_measure(out.precision, out.recall);
  return out;
}

Assignment assign_max_total(const std::vector<std::vector<double>>& scores) {
  Assignment out;
  const int n = static_cast<int>(scores.size());
  const int m = n > 0 ? static_cast<int>(scores[0].size()) : 0;
  if (n == 0 || m == 0) return out;

  std::vector<int> all_preds(n), avail_gts(m);
  std::iota(all_preds.begin(), all_preds.end(), 0);
  std::iota(avail_gts.begin(), avail_gts.end(), 0);
  double target = max_total(scores, all_preds, avail_gts);

  // Fix pairs in lexicographic order: pred i takes the smallest gt that still
  // allows the optimal total; otherwise it stays unmatched.
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_preds;
    for (int k = i + 1; k < n; ++k) rest_preds.push_back(k);
    int chosen = -1;
    for (int j : avail_gts) {
      if (scores[i][j] <= 0.0) continue;
      std::vector<int> rest_gts;
      for (int g : avail_gts) {
        if (g != j) rest_gts.push_back(g);
      }
      if (scores[i][j] + max_total(scores, rest_preds, rest_gts) >= target - kTieEps) {
        chosen = j;
        break;
      }
    }
    if (chosen >= 0) {
      out.pairs.emplace_back(i, chosen);
      target -= scores[i][chosen];
      avail_gts.erase(std::find(avail_gts.begin(), avail_gts.end(), chosen));
    }
  }
  return out;
}

Assignment hungarian_match(const std::vector<BinaryMask>& preds,
                           const std::vector<BinaryMask>& gts) {
  std::vector<std::vector<double>> f(preds.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) f[i][j] = pairwise_prf(preds[i], gts[j]).f;
  }
  return assign_max_total(f);
}

OsnMetrics osn_metrics(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                       const Assignment& assignment) {
  std::vector<PairPrf> matched;
  for (const auto& [i, j] : assignment.pairs) matched.push_back(pairwise_prf(preds[i], gts[j]));
  return osn_from_pairs(matched, preds.size(), gts.size());
}

OsnMetrics boundary_osn_metrics(const std::vector<BinaryMask>& preds,
                                const std::vector<BinaryMask>& gts, const Assignment& assignment,
                                double tol) {
  std::vector<PairPrf> matched;
  for (const auto& [i, j] : assignment.pairs) {
    matched.push_back(boundary_pairwise_prf(preds[i], gts[j], tol));
  }
  // F@.75 from boundary pairs is not used; keep the structural fields.
  return osn_from_pairs(matched, preds.size(), gts.size());
}

ClassicalMetrics overlap_metrics(const std::vector<BinaryMask>& preds,
                                 const std::vector<BinaryMask>& gts,
                                 const Assignment& assignment) {
  const auto degenerate = degenerate_counts(preds.size(), gts.size());
  if (degenerate.degenerate) return {degenerate.value, degenerate.value, degenerate.value};
  int64_t p_num = 0, p_den = 0, r_num = 0, r_den = 0;
  for (const auto& mask : preds) p_den += mask.area();
  for (const auto& mask : gts) r_den += mask.area();
  for (const auto& [i, j] : assignment.pairs) {
    const int64_t inter = intersection_area(preds[i], gts[j]);
    p_num += inter;
    r_num += inter;
  }
  ClassicalMetrics out;
  out.precision = p_den > 0 ? static_cast<double>(p_num) / p_den : 0.0;
  out.recall = r_den > 0 ? static_cast<double>(r_num) / r_den : 0.0;
  out.f = f_measure(out.precision, out.recall);
  return out;
}

ClassicalMetrics boundary_metrics(const std::vector<BinaryMask>& preds,
                                  const std::vector<BinaryMask>& gts,
                                  const Assignment& assignment, double tol) {
  const auto degenerate = degenerate_counts(preds.size(), gts.size());
  if (degenerate.degenerate) return {degenerate.value, degenerate.value, degenerate.value};
  int64_t p_num = 0, p_den = 0, r_num = 0, r_den = 0;
  std::vector<BinaryMask> pred_bounds, gt_bounds;
  for (const auto& mask : preds) {
    pred_bounds.push_back(boundary(mask));
    p_den += pred_bounds.back().area();
  }
  for (const auto& mask : gts) {
    gt_bounds.push_back(boundary(mask));
    r_den += gt_bounds.back().area();
  }
  for (const auto& [i, j] : assignment.pairs) {
    if (pred_bounds[i].empty() || gt_bounds[j].empty()) continue;
    p_num += intersection_area(pred_bounds[i], dilate(gt_bounds[j], tol));
    r_num += intersection_area(dilate(pred_bounds[i], tol), gt_bounds[j]);
  }
  ClassicalMetrics out;
  out.precision = p_den > 0 ? static_cast<double>(p_num) / p_den : 0.0;
  out.recall = r_den > 0 ? static_cast<double>(r_num) / r_den : 0.0;
  out.f = f_measure(out.precision, out.recall);
  return out;
}

double f_at_75(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
               const Assignment& assignment) {
  if (gts.empty()) return preds.empty() ? 1.0 : 0.0;
  double hits = 0.0;
  for (const auto& [i, j] : assignment.pairs) {
    if (pairwise_prf(preds[i], gts[j]).f >= 0.75) hits += 1.0;
  }
  return hits / static_cast<double>(gts.size());
}

double ndcg(const std::vector<int>& relevances) {
  if (relevances.empty()) throw EmptyListError("ndcg requires a non-empty relevance list");
  for (int r : relevances) {
    if (r < 0) throw std::invalid_argument("relevances must be non-negative");
  }
  const bool all_equal =
      std::all_of(relevances.begin(), relevances.end(), [&](int r) { return r == relevances[0]; });
  if (all_equal) return 1.0;
  auto dcg = [](const std::vector<int>& rel) {
    double s = 0.0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      s += (std::pow(2.0, rel[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return s;
  };
  std::vector<int> ideal = relevances;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  return dcg(relevances) / dcg(ideal);
}

EvalReport evaluate_labels(const LabelImage& pred, const LabelImage& gt, double tol) {
  const LabelPairCounts counts = count_label_pairs(pred, gt);
  const std::size_t n = counts.pred_labels.size();
  const std::size_t m = counts.gt_labels.size();
  EvalReport report;
  report.num_pred = static_cast<int>(n);
  report.num_gt = static_cast<int>(m);

  const auto f = f_matrix(counts);
  const Assignment assignment = assign_max_total(f);

  const auto degenerate = degenerate_counts(n, m);
  if (degenerate.degenerate) {
    const double v = degenerate.value;
    report.overlap_p = report.overlap_r = report.overlap_f = v;
    report.boundary_p = report.boundary_r = report.boundary_f = v;
    report.overlap_pn = report.overlap_rn = report.overlap_fn = v;
    report.boundary_pn = report.boundary_rn = report.boundary_fn = v;
    report.fn75 = v;
    report.f75 = m == 0 ? (n == 0 ? 1.0 : 0.0) : 0.0;
    return report;
  }

  // overlap metrics straight from the contingency counts
  std::vector<PairPrf> matched;
  int64_t inter_sum = 0, p_den = 0, r_den = 0;
  for (std::size_t i = 0; i < n; ++i) p_den += counts.pred_areas[i];
  for (std::size_t j = 0; j < m; ++j) r_den += counts.gt_areas[j];
  double f75_hits = 0.0;
  for (const auto& [i, j] : assignment.pairs) {
    const int64_t inter = counts.at(i, j);
    PairPrf pair;
    pair.precision = static_cast<double>(inter) / counts.pred_areas[i];
    pair.recall = static_cast<double>(inter) / counts.gt_areas[j];
    pair.f = f_measure(pair.precision, pair.recall);
    matched.push_back(pair);
    inter_sum += inter;
    if (pair.f >= 0.75) f75_hits += 1.0;
  }
  report.overlap_p = p_den > 0 ? static_cast<double>(inter_sum) / p_den : 0.0;
  report.overlap_r = r_den > 0 ? static_cast<double>(inter_sum) / r_den : 0.0;
  report.overlap_f = f_measure(report.overlap_p, report.overlap_r);
  const OsnMetrics osn = osn_from_pairs(matched, n, m);
  report.overlap_pn = osn.precision;
  report.overlap_rn = osn.recall;
  report.overlap_fn = osn.f;
  report.fn75 = osn.f_at_75;
  report.f75 = f75_hits / static_cast<double>(m);

  // boundary metrics need the rasters
  const auto pred_instances = extract_instances(pred);
  const auto gt_instances = extract_instances(gt);
  std::vector<BinaryMask> preds, gts;
  for (const auto& [label, mask] : pred_instances) preds.push_back(mask);
  for (const auto& [label, mask] : gt_instances) gts.push_back(mask);
  const ClassicalMetrics bm = boundary_metrics(preds, gts, assignment, tol);
  report.boundary_p = bm.precision;
  report.boundary_r = bm.recall;
  report.boundary_f = bm.f;
  const OsnMetrics bosn = boundary_osn_metrics(preds, gts, assignment, tol);
  report.boundary_pn = bosn.precision;
  report.boundary_rn = bosn.recall;
  report.boundary_fn = bosn.f;
  return report;
}

double oracle_score(const LabelImage& pred, const LabelImage& gt) {
  const LabelPairCounts counts = count_label_pairs(pred, gt);
  const std::size_t n = counts.pred_labels.size();
  const std::size_t m = counts.gt_labels.size();
  if (n == 0 && m == 0) return 1.0;
  if (n == 0 || m == 0) return 0.0;
  const auto f = f_matrix(counts);
  const Assignment assignment = assign_max_total(f);
  int64_t inter_sum = 0, p_den = 0, r_den = 0;
  for (std::size_t i = 0; i < n; ++i) p_den += counts.pred_areas[i];
  for (std::size_t j = 0; j < m; ++j) r_den += counts.gt_areas[j];
  double f75_hits = 0.0;
  for (const auto& [i, j] : assignment.pairs) {
    inter_sum += counts.at(i, j);
    if (f[i][j] >= 0.75) f75_hits += 1.0;
  }
  const double p = p_den > 0 ? static_cast<double>(inter_sum) / p_den : 0.0;
  const double r = r_den > 0 ? static_cast<double>(inter_sum) / r_den : 0.0;
  const double overlap_f = f_measure(p, r);
  const double f75 = f75_hits / static_cast<double>(m);
  return 0.8 * overlap_f + 0.2 * f75;
}

namespace {

std::vector<double> report_fields(const EvalReport& r) {
  return {r.overlap_p,    r.overlap_r,  r.overlap_f,  r.boundary_p,  r.boundary_r,
          r.boundary_f,   r.overlap_pn, r.overlap_rn, r.overlap_fn,  r.boundary_pn,
          r.boundary_rn,  r.boundary_fn, r.f75,        r.fn75};
}

EvalReport report_from_fields(const std::vector<double>& f, int num_pred, int num_gt) {
  EvalReport r;
  r.overlap_p = f[0];
  r.overlap_r = f[1];
  r.overlap_f = f[2];
  r.boundary_p = f[3];
  r.boundary_r = f[4];
  r.boundary_f = f[5];
  r.overlap_pn = f[6];
  r.overlap_rn = f[7];
  r.overlap_fn = f[8];
  r.boundary_pn = f[9];
  r.boundary_rn = f[10];
  r.boundary_fn = f[11];
  r.f75 = f[12];
  r.fn75 = f[13];
  r.num_pred = num_pred;
  r.num_gt = num_gt;
  return r;
}

}  // namespace

DatasetReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, double tol, int jobs) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(gt_dir)) throw MissingSceneError("ground truth directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw MissingSceneError("prediction directory not found: " + pred_dir.string());
  DatasetReport report;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "labels.png")) {
      report.scene_ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(report.scene_ids.begin(), report.scene_ids.end());
  if (report.scene_ids.empty()) {
    throw MissingSceneError("no scenes with labels.png under " + gt_dir.string());
  }
  for (const std::string& id : report.scene_ids) {
    if (!fs::exists(pred_dir / id / "labels.png")) {
      throw MissingSceneError("missing prediction for scene: " + id);
    }
  }

  report.per_image.resize(report.scene_ids.size());
  const int workers = std::max(1, jobs);
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= report.scene_ids.size()) break;
      const std::string& id = report.scene_ids[k];
      const LabelImage gt = load_label_image(gt_dir / id / "labels.png");
      const LabelImage pred = load_label_image(pred_dir / id / "labels.png");
      if (pred.width() != gt.width() || pred.height() != gt.height()) {
        throw FrameMismatchError("frame mismatch in scene: " + id);
      }
      report.per_image[k] = evaluate_labels(pred, gt, tol);
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::future<void>> futures;
    for (int w = 0; w < workers; ++w) futures.push_back(std::async(std::launch::async, run));
    for (auto& f : futures) f.get();
  }

  const std::size_t count = report.per_image.size();
  std::vector<double> sum(14, 0.0), sumsq(14, 0.0);
  int total_pred = 0, total_gt = 0;
  for (const EvalReport& r : report.per_image) {
    const auto f = report_fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) {
      sum[i] += f[i];
      sumsq[i] += f[i] * f[i];
    }
    total_pred += r.num_pred;
    total_gt += r.num_gt;
  }
  std::vector<double> mean(14), stddev(14);
  for (std::size_t i = 0; i < 14; ++i) {
    mean[i] = sum[i] / static_cast<double>(count);
    stddev[i] = std::sqrt(std::max(0.0, sumsq[i] / static_cast<double>(count) - mean[i] * mean[i]));
  }
  report.mean = report_from_fields(mean, total_pred, total_gt);
  report.stddev = report_from_fields(stddev, 0, 0);
  return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"overlap", {{"precision", r.overlap_p}, {"recall", r.overlap_r}, {"f", r.overlap_f}}},
          {"boundary", {{"precision", r.boundary_p}, {"recall", r.boundary_r}, {"f", r.boundary_f}}},
          {"overlap_osn",
           {{"precision", r.overlap_pn}, {"recall", r.overlap_rn}, {"f", r.overlap_fn}}},
          {"boundary_osn",
           {{"precision", r.boundary_pn}, {"recall", r.boundary_rn}, {"f", r.boundary_fn}}},
          {"f_at_75", r.f75},
          {"fn_at_75", r.fn75},
          {"num_pred", r.num_pred},
          {"num_gt", r.num_gt}};
}

nlohmann::json dataset_report_to_json(const DatasetReport& report) {
  nlohmann::json scenes = nlohmann::json::object();
  for (std::size_t i = 0; i < report.scene_ids.size(); ++i) {
    scenes[report.scene_ids[i]] = report_to_json(report.per_image[i]);
  }
  return {{"num_images", report.scene_ids.size()},
          {"scenes", scenes},
          {"mean", report_to_json(report.mean)},
          {"stddev", report_to_json(report.stddev)}};
}

}  // namespace segrefine
