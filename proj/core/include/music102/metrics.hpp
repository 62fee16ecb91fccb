#pragma once
#include <vector>

#include "music102/mat.hpp"

namespace music102 {

// 1 where sigmoid(logit) > 0.5, i.e. where the logit is positive.
Mat threshold(const Mat& logits);

// Mean per-column cosine between binary chord matrices. Columns zero on both
// sides count 1 (silence predicted as silence); zero on exactly one side
// counts 0.
double cosine_similarity(const Mat& pred, const Mat& truth);

// Fraction of columns that match entry-for-entry.
double exact_accuracy(const Mat& pred, const Mat& truth);

// sum_j w_j sum_i bce(logit_ij, C_ij), the optimization objective. Column
// terms are summed in sorted order so the result is exactly invariant under
// row permutations of (logits, C).
double weighted_bce(const Mat& logits, const Mat& truth,
                    const std::vector<double>& weights);

// Metric averages over a piece list. weighted_bce is normalized per step for
// comparability across lengths; the per-entry variant divides by 12 more.
struct EvalReport {
  double weighted_bce = 0.0;
  double weighted_bce_entry = 0.0;
  double cosine_similarity = 0.0;
  double exact_accuracy = 0.0;
  int pieces = 0;
  long steps = 0;
};

}  // namespace music102
