#include "music102/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "music102/autodiff.hpp"
#include "music102/errors.hpp"

namespace music102 {

namespace {
void check_same_shape(const Mat& a, const Mat& b, const char* who) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError(std::string(who) + ": shape mismatch");
}
}  // namespace

Mat threshold(const Mat& logits) {
  Mat out(logits.rows, logits.cols);
  for (size_t i = 0; i < logits.data.size(); ++i)
    out.data[i] = logits.data[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

double cosine_similarity(const Mat& pred, const Mat& truth) {
  check_same_shape(pred, truth, "cosine_similarity");
  double total = 0.0;
  for (int t = 0; t < pred.cols; ++t) {
    double dot = 0.0, np = 0.0, nt = 0.0;
    for (int p = 0; p < pred.rows; ++p) {
      const double a = pred.at(p, t);
      const double b = truth.at(p, t);
      dot += a * b;
      np += a * a;
      nt += b * b;
    }
    if (np == 0.0 && nt == 0.0)
      total += 1.0;
    else if (np == 0.0 || nt == 0.0)
      total += 0.0;
    else
      total += dot / std::sqrt(np * nt);
  }
  return total / pred.cols;
}

double exact_accuracy(const Mat& pred, const Mat& truth) {
  check_same_shape(pred, truth, "exact_accuracy");
  int hits = 0;
  for (int t = 0; t < pred.cols; ++t) {
    bool same = true;
    for (int p = 0; p < pred.rows && same; ++p)
      same = pred.at(p, t) == truth.at(p, t);
    hits += same;
  }
  return static_cast<double>(hits) / pred.cols;
}

double weighted_bce(const Mat& logits, const Mat& truth,
                    const std::vector<double>& weights) {
  check_same_shape(logits, truth, "weighted_bce");
  if (static_cast<int>(weights.size()) != logits.cols)
    throw ShapeError("weighted_bce: weight count != columns");
  double total = 0.0;
  std::vector<double> terms(logits.rows);
  for (int t = 0; t < logits.cols; ++t) {
    for (int p = 0; p < logits.rows; ++p)
      terms[p] = bce_logit_term(logits.at(p, t), truth.at(p, t));
    // Permutation-invariant summation: a transposed piece reorders each
    // column, and sorted accumulation makes the float sum order-free.
    std::sort(terms.begin(), terms.end());
    double col = 0.0;
    for (double x : terms) col += x;
    total += weights[t] * col;
  }
  return total;
}

}  // namespace music102
