#pragma once
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "music102/errors.hpp"

namespace music102 {

// Dense row-major matrix of doubles: the single numeric container used across
// the library. Sequence tensors are stored as stacked row blocks inside one
// Mat, so layers only ever see 2-d data.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
  }
  Mat(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(r) * c)
      throw ShapeError("Mat: initializer size does not match dimensions");
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static Mat ones(int r, int c) {
    Mat m(r, c);
    for (double& x : m.data) x = 1.0;
    return m;
  }
  static Mat filled(int r, int c, double v) {
    Mat m(r, c);
    for (double& x : m.data) x = v;
    return m;
  }
};

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions disagree");
  Mat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Mat transpose(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline Mat operator+(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ShapeError("Mat +: shapes disagree");
  Mat out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Mat operator-(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ShapeError("Mat -: shapes disagree");
  Mat out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Mat hadamard(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ShapeError("Mat hadamard: shapes disagree");
  Mat out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

inline Mat scale(const Mat& a, double c) {
  Mat out = a;
  for (double& x : out.data) x *= c;
  return out;
}

inline void add_in_place(Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ShapeError("Mat add_in_place: shapes disagree");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline double max_abs(const Mat& a) {
  double m = 0.0;
  for (double x : a.data) m = std::max(m, std::fabs(x));
  return m;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shapes disagree");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

inline bool all_finite(const Mat& a) {
  for (double x : a.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace music102
