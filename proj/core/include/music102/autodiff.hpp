#pragma once
#include <functional>
#include <vector>

#include "music102/mat.hpp"

namespace music102 {

enum class Gate { Relu, Sigmoid };

namespace ad {

// Handle into a Tape. Cheap to copy; invalid when default-constructed.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Mat values. One tape per forward pass: build the
// graph with the ops below, call backward(root) on a scalar, then read
// grad(v) for any param leaf. References returned by value()/grad() are
// invalidated by the next op emitted, so copy them if you keep them around.
//
// Sequence tensors live on the tape as (steps*block_rows) x cols matrices:
// every op that needs to know about the time axis takes the block height
// explicitly, and reshapes between (T*B, s) and (T, B*s) are free because the
// storage is row-major either way.
class Tape {
 public:
  // Leaves.
  Var input(Mat value);  // constant: nothing flows back into it
  Var param(Mat value);  // differentiable leaf

  // Elementwise and affine.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, const Mat& k);
  Var bias_ones(Var a, Var s);  // a + s * ones, s is 1x1

  // Linear algebra and layout.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, int rows, int cols);
  Var col_slice(Var a, int c0, int c1);
  Var col_concat(const std::vector<Var>& parts);
  Var col_scale(Var a, Var g);  // g is 1 x cols
  Var col_shift(Var a, Var b);  // b is 1 x cols

  // Per-time-step block ops; `block` is the number of rows per step.
  Var block_left(const Mat& k, Var a, int block);     // K applied to every block
  Var block_mean(Var a, int block);                   // (T*B, s) -> (T, 1)
  Var block_expand(Var m, int block, int cols);       // (T, 1) -> (T*B, cols)
  Var norm_gate(Var a, int block, Gate gate);         // per block-column vector

  // Reductions and nonlinearities.
  Var sum_all(Var a);  // (1,1)
  Var softmax_rows(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var rsqrt_shift(Var a, double eps);  // 1/sqrt(x + eps), x must stay > -eps

  // Weighted binary cross-entropy from logits, summed:
  //   sum_i w_i * (softplus(z_i) - z_i * c_i)
  // computed in the overflow-safe max(z,0) - z*c + log1p(exp(-|z|)) form.
  Var weighted_bce_logits(Var z, const Mat& target, const Mat& weight);

  void backward(Var root);

  const Mat& value(Var v) const;
  const Mat& grad(Var v) const;  // zero-sized until backward touches it
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs = false;
    std::function<void(Tape&, const Mat&)> pull;
  };
  std::vector<Node> nodes_;

  Var emit(Mat value, bool needs, std::function<void(Tape&, const Mat&)> pull);
  void accumulate(Var v, const Mat& delta);
  const Mat& val(Var v) const;
  bool needs(Var v) const;
  void check(Var v) const;
};

}  // namespace ad

// Stable per-entry BCE-with-logits term softplus(z) - z*c; shared by the tape
// op and the tape-free evaluation path so both use the same arithmetic.
double bce_logit_term(double logit, double target);

}  // namespace music102
