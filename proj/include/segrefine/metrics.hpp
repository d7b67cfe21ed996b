#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segrefine/mask.hpp"

namespace segrefine {

struct PairPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// P = |pred∩gt|/|pred|, R = |pred∩gt|/|gt|, F = 2PR/(P+R) with the all-zero
// guard; an empty prediction scores zero precision by convention.
PairPrf pairwise_prf(const BinaryMask& pred, const BinaryMask& gt);

// Boundary variant: a boundary pixel counts as matched when it lies within
// `tol` pixels of the other mask's boundary.
PairPrf boundary_pairwise_prf(const BinaryMask& pred, const BinaryMask& gt, double tol);

// One-to-one matching between prediction and ground-truth indices.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (pred index, gt index), sorted by pred
};

// Maximizes the total score over one-to-one matchings; among maximizers the
// lexicographically smallest pair sequence is returned and zero-score pairs
// are never matched. `scores[i][j]` is the gain of matching pred i to gt j.
Assignment assign_max_total(const std::vector<std::vector<double>>& scores);

// assign_max_total on the pairwise F matrix.
Assignment hungarian_match(const std::vector<BinaryMask>& preds,
                           const std::vector<BinaryMask>& gts);

struct OsnMetrics {
  double precision = 0.0;  // sum P_ij / N
  double recall = 0.0;     // sum R_ij / M
  double f = 0.0;          // sum F_ij / max(M, N)
  double f_at_75 = 0.0;    // sum 1{F_ij >= 0.75} / max(M, N)
};

OsnMetrics osn_metrics(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                       const Assignment& assignment);
OsnMetrics boundary_osn_metrics(const std::vector<BinaryMask>& preds,
                                const std::vector<BinaryMask>& gts, const Assignment& assignment,
                                double tol);

struct ClassicalMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Size-weighted Overlap P/R/F: unmatched predictions contribute their full
// area to the precision denominator and nothing to the numerator.
ClassicalMetrics overlap_metrics(const std::vector<BinaryMask>& preds,
                                 const std::vector<BinaryMask>& gts,
                                 const Assignment& assignment);
ClassicalMetrics boundary_metrics(const std::vector<BinaryMask>& preds,
                                  const std::vector<BinaryMask>& gts,
                                  const Assignment& assignment, double tol);

// sum 1{F_ij >= 0.75} / M. Does not penalize false positives.
double f_at_75(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
               const Assignment& assignment);

// Normalized discounted cumulative gain of relevances listed in predicted
// order. Defined as 1 when all relevances are equal. Throws EmptyListError.
double ndcg(const std::vector<int>& relevances);

struct EvalReport {
  double overlap_p = 0, overlap_r = 0, overlap_f = 0;
  double boundary_p = 0, boundary_r = 0, boundary_f = 0;
  double overlap_pn = 0, overlap_rn = 0, overlap_fn = 0;
  double boundary_pn = 0, boundary_rn = 0, boundary_fn = 0;
  double f75 = 0;    // F@.75
  double fn75 = 0;   // F_n@.75
  int num_pred = 0;  // N
  int num_gt = 0;    // M
};

EvalReport evaluate_labels(const LabelImage& pred, const LabelImage& gt, double tol);

// Fast ground-truth score: 0.8 * Overlap F + 0.2 * F@.75. Single pass over
// the frame plus the assignment; no boundary work.
double oracle_score(const LabelImage& pred, const LabelImage& gt);

struct DatasetReport {
  std::vector<std::string> scene_ids;
  std::vector<EvalReport> per_image;
  EvalReport mean;
  EvalReport stddev;
};

// Both directories contain one subdirectory per scene with a labels.png.
DatasetReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, double tol, int jobs = 1);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json dataset_report_to_json(const DatasetReport& report);

}  // namespace segrefine
