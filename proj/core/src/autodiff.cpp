#include "music102/autodiff.hpp"

#include <cmath>
#include <utility>

#include "music102/errors.hpp"

namespace music102 {

double bce_logit_term(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::fabs(logit)));
}

namespace ad {

namespace {
double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Left-multiply every (block x cols) row block of `a` by `k`.
Mat block_left_apply(const Mat& k, const Mat& a, int block) {
  const int t = a.rows / block;
  Mat out(t * k.rows, a.cols);
  for (int s = 0; s < t; ++s)
    for (int i = 0; i < k.rows; ++i)
      for (int b = 0; b < block; ++b) {
        const double kv = k.at(i, b);
        if (kv == 0.0) continue;
        for (int j = 0; j < a.cols; ++j)
          out.at(s * k.rows + i, j) += kv * a.at(s * block + b, j);
      }
  return out;
}
}  // namespace

void Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw Error("Tape: variable does not belong to this tape");
}

const Mat& Tape::val(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

bool Tape::needs(Var v) const {
  check(v);
  return nodes_[v.id].needs;
}

const Mat& Tape::value(Var v) const { return val(v); }

const Mat& Tape::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

Var Tape::emit(Mat value, bool needs, std::function<void(Tape&, const Mat&)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs = needs;
  if (needs) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Mat& delta) {
  Node& n = nodes_[v.id];
  if (!n.needs) return;
  if (n.grad.size() == 0) n.grad = Mat(n.value.rows, n.value.cols);
  add_in_place(n.grad, delta);
}

void Tape::backward(Var root) {
  check(root);
  if (val(root).rows != 1 || val(root).cols != 1)
    throw ShapeError("backward: root must be 1x1");
  for (Node& n : nodes_)
    if (n.grad.size() != 0)
      for (double& g : n.grad.data) g = 0.0;
  if (!nodes_[root.id].needs) return;  // constant graph: all grads stay zero
  accumulate(root, Mat::ones(1, 1));
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs || n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this, n.grad);
  }
}

Var Tape::input(Mat value) { return emit(std::move(value), false, {}); }

Var Tape::param(Mat value) {
  // Leaf: gradient accumulates here, nothing to pull further.
  return emit(std::move(value), true, [](Tape&, const Mat&) {});
}

Var Tape::add(Var a, Var b) {
  Mat out = val(a) + val(b);
  const bool ng = needs(a) || needs(b);
  return emit(std::move(out), ng, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  Mat out = val(a) - val(b);
  const bool ng = needs(a) || needs(b);
  return emit(std::move(out), ng, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, music102::scale(g, -1.0));
  });
}

Var Tape::mul(Var a, Var b) {
  Mat out = hadamard(val(a), val(b));
  const bool ng = needs(a) || needs(b);
  return emit(std::move(out), ng, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, hadamard(g, t.val(b)));
    t.accumulate(b, hadamard(g, t.val(a)));
  });
}

Var Tape::scale(Var a, double c) {
  Mat out = music102::scale(val(a), c);
  return emit(std::move(out), needs(a), [a, c](Tape& t, const Mat& g) {
    t.accumulate(a, music102::scale(g, c));
  });
}

Var Tape::add_const(Var a, const Mat& k) {
  Mat out = val(a) + k;
  return emit(std::move(out), needs(a),
              [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var Tape::bias_ones(Var a, Var s) {
  if (val(s).rows != 1 || val(s).cols != 1)
    throw ShapeError("bias_ones: bias must be 1x1");
  const double sv = val(s).at(0, 0);
  Mat out = val(a);
  for (double& x : out.data) x += sv;
  const bool ng = needs(a) || needs(s);
  return emit(std::move(out), ng, [a, s](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    Mat ds(1, 1);
    for (double x : g.data) ds.at(0, 0) += x;
    t.accumulate(s, ds);
  });
}

Var Tape::matmul(Var a, Var b) {
  Mat out = music102::matmul(val(a), val(b));
  const bool ng = needs(a) || needs(b);
  return emit(std::move(out), ng, [a, b](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, music102::matmul(g, music102::transpose(t.val(b))));
    if (t.needs(b)) t.accumulate(b, music102::matmul(music102::transpose(t.val(a)), g));
  });
}

Var Tape::transpose(Var a) {
  Mat out = music102::transpose(val(a));
  return emit(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    t.accumulate(a, music102::transpose(g));
  });
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Mat& v = val(a);
  if (static_cast<size_t>(rows) * cols != v.size())
    throw ShapeError("reshape: size must be preserved");
  Mat out(rows, cols, v.data);
  const int ar = v.rows, ac = v.cols;
  return emit(std::move(out), needs(a), [a, ar, ac](Tape& t, const Mat& g) {
    t.accumulate(a, Mat(ar, ac, g.data));
  });
}

Var Tape::col_slice(Var a, int c0, int c1) {
  const Mat& v = val(a);
  if (c0 < 0 || c1 > v.cols || c0 >= c1) throw ShapeError("col_slice: bad range");
  Mat out(v.rows, c1 - c0);
  for (int i = 0; i < v.rows; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = v.at(i, j);
  const int rows = v.rows, cols = v.cols;
  return emit(std::move(out), needs(a), [a, c0, rows, cols](Tape& t, const Mat& g) {
    Mat d(rows, cols);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) d.at(i, c0 + j) = g.at(i, j);
    t.accumulate(a, d);
  });
}

Var Tape::col_concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("col_concat: no parts");
  const int rows = val(parts[0]).rows;
  int cols = 0;
  bool ng = false;
  for (Var p : parts) {
    if (val(p).rows != rows) throw ShapeError("col_concat: row counts disagree");
    cols += val(p).cols;
    ng = ng || needs(p);
  }
  Mat out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Mat& v = val(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols; ++j) out.at(i, off + j) = v.at(i, j);
    off += v.cols;
  }
  std::vector<Var> ps = parts;
  return emit(std::move(out), ng, [ps](Tape& t, const Mat& g) {
    int off = 0;
    for (Var p : ps) {
      const Mat& v = t.val(p);
      Mat d(v.rows, v.cols);
      for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) d.at(i, j) = g.at(i, off + j);
      t.accumulate(p, d);
      off += v.cols;
    }
  });
}

Var Tape::col_scale(Var a, Var gvar) {
  const Mat& v = val(a);
  const Mat& s = val(gvar);
  if (s.rows != 1 || s.cols != v.cols) throw ShapeError("col_scale: scale must be 1 x cols");
  Mat out = v;
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) out.at(i, j) *= s.at(0, j);
  const bool ng = needs(a) || needs(gvar);
  return emit(std::move(out), ng, [a, gvar](Tape& t, const Mat& g) {
    const Mat& v = t.val(a);
    const Mat& s = t.val(gvar);
    if (t.needs(a)) {
      Mat da(v.rows, v.cols);
      for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) da.at(i, j) = g.at(i, j) * s.at(0, j);
      t.accumulate(a, da);
    }
    if (t.needs(gvar)) {
      Mat ds(1, v.cols);
      for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) ds.at(0, j) += g.at(i, j) * v.at(i, j);
      t.accumulate(gvar, ds);
    }
  });
}

Var Tape::col_shift(Var a, Var bvar) {
  const Mat& v = val(a);
  const Mat& b = val(bvar);
  if (b.rows != 1 || b.cols != v.cols) throw ShapeError("col_shift: shift must be 1 x cols");
  Mat out = v;
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) out.at(i, j) += b.at(0, j);
  const bool ng = needs(a) || needs(bvar);
  return emit(std::move(out), ng, [a, bvar](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.needs(bvar)) {
      Mat db(1, g.cols);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) db.at(0, j) += g.at(i, j);
      t.accumulate(bvar, db);
    }
  });
}

Var Tape::block_left(const Mat& k, Var a, int block) {
  const Mat& v = val(a);
  if (block <= 0 || v.rows % block != 0 || k.cols != block)
    throw ShapeError("block_left: block height does not divide rows");
  Mat out = block_left_apply(k, v, block);
  const Mat kt = music102::transpose(k);
  const int krows = k.rows;
  return emit(std::move(out), needs(a), [a, kt, krows](Tape& t, const Mat& g) {
    t.accumulate(a, block_left_apply(kt, g, krows));
  });
}

Var Tape::block_mean(Var a, int block) {
  const Mat& v = val(a);
  if (block <= 0 || v.rows % block != 0)
    throw ShapeError("block_mean: block height does not divide rows");
  const int t_steps = v.rows / block;
  const double denom = static_cast<double>(block) * v.cols;
  Mat out(t_steps, 1);
  for (int s = 0; s < t_steps; ++s) {
    double acc = 0.0;
    for (int b = 0; b < block; ++b)
      for (int j = 0; j < v.cols; ++j) acc += v.at(s * block + b, j);
    out.at(s, 0) = acc / denom;
  }
  const int cols = v.cols;
  return emit(std::move(out), needs(a), [a, block, cols, denom](Tape& t, const Mat& g) {
    Mat d(g.rows * block, cols);
    for (int s = 0; s < g.rows; ++s) {
      const double gs = g.at(s, 0) / denom;
      for (int b = 0; b < block; ++b)
        for (int j = 0; j < cols; ++j) d.at(s * block + b, j) = gs;
    }
    t.accumulate(a, d);
  });
}

Var Tape::block_expand(Var m, int block, int cols) {
  const Mat& v = val(m);
  if (v.cols != 1) throw ShapeError("block_expand: input must be a column");
  Mat out(v.rows * block, cols);
  for (int s = 0; s < v.rows; ++s)
    for (int b = 0; b < block; ++b)
      for (int j = 0; j < cols; ++j) out.at(s * block + b, j) = v.at(s, 0);
  return emit(std::move(out), needs(m), [m, block, cols](Tape& t, const Mat& g) {
    Mat d(g.rows / block, 1);
    for (int s = 0; s < d.rows; ++s) {
      double acc = 0.0;
      for (int b = 0; b < block; ++b)
        for (int j = 0; j < cols; ++j) acc += g.at(s * block + b, j);
      d.at(s, 0) = acc;
    }
    t.accumulate(m, d);
  });
}

Var Tape::norm_gate(Var a, int block, Gate gate) {
  const Mat& v = val(a);
  if (block <= 0 || v.rows % block != 0)
    throw ShapeError("norm_gate: block height does not divide rows");
  const int t_steps = v.rows / block;
  Mat out(v.rows, v.cols);
  for (int s = 0; s < t_steps; ++s)
    for (int j = 0; j < v.cols; ++j) {
      double n2 = 0.0;
      for (int b = 0; b < block; ++b) {
        const double x = v.at(s * block + b, j);
        n2 += x * x;
      }
      const double n = std::sqrt(n2);
      if (n == 0.0) continue;  // gate output (and gradient) pinned to zero
      const double gn = (gate == Gate::Relu) ? std::max(n, 0.0) : sigmoid_scalar(n);
      const double f = gn / n;
      for (int b = 0; b < block; ++b)
        out.at(s * block + b, j) = f * v.at(s * block + b, j);
    }
  return emit(std::move(out), needs(a), [a, block, gate](Tape& t, const Mat& g) {
    const Mat& v = t.val(a);
    Mat d(v.rows, v.cols);
    const int t_steps = v.rows / block;
    for (int s = 0; s < t_steps; ++s)
      for (int j = 0; j < v.cols; ++j) {
        double n2 = 0.0, vg = 0.0;
        for (int b = 0; b < block; ++b) {
          const double x = v.at(s * block + b, j);
          n2 += x * x;
          vg += x * g.at(s * block + b, j);
        }
        const double n = std::sqrt(n2);
        if (n == 0.0) continue;
        double gn, dgn;  // sigma(n) and sigma'(n)
        if (gate == Gate::Relu) {
          gn = n;
          dgn = 1.0;
        } else {
          gn = sigmoid_scalar(n);
          dgn = gn * (1.0 - gn);
        }
        // d/dv [sigma(n) v / n] pulled against g:
        //   sigma'(n) (v.g / n) v/n + sigma(n) g / n - sigma(n) (v.g) v / n^3
        for (int b = 0; b < block; ++b) {
          const double x = v.at(s * block + b, j);
          d.at(s * block + b, j) = dgn * (vg / n) * (x / n) +
                                   gn * g.at(s * block + b, j) / n -
                                   gn * vg * x / (n2 * n);
        }
      }
    t.accumulate(a, d);
  });
}

Var Tape::sum_all(Var a) {
  double acc = 0.0;
  for (double x : val(a).data) acc += x;
  Mat out(1, 1);
  out.at(0, 0) = acc;
  const int rows = val(a).rows, cols = val(a).cols;
  return emit(std::move(out), needs(a), [a, rows, cols](Tape& t, const Mat& g) {
    t.accumulate(a, Mat::filled(rows, cols, g.at(0, 0)));
  });
}

Var Tape::softmax_rows(Var a) {
  const Mat& v = val(a);
  Mat out(v.rows, v.cols);
  for (int i = 0; i < v.rows; ++i) {
    double m = v.at(i, 0);
    for (int j = 1; j < v.cols; ++j) m = std::max(m, v.at(i, j));
    double z = 0.0;
    for (int j = 0; j < v.cols; ++j) {
      const double e = std::exp(v.at(i, j) - m);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < v.cols; ++j) out.at(i, j) /= z;
  }
  Var y = emit(std::move(out), needs(a), {});
  if (needs(a)) {
    nodes_[y.id].pull = [a, y](Tape& t, const Mat& g) {
      const Mat& yv = t.val(y);
      Mat d(yv.rows, yv.cols);
      for (int i = 0; i < yv.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < yv.cols; ++j) dot += g.at(i, j) * yv.at(i, j);
        for (int j = 0; j < yv.cols; ++j)
          d.at(i, j) = yv.at(i, j) * (g.at(i, j) - dot);
      }
      t.accumulate(a, d);
    };
  }
  return y;
}

Var Tape::sigmoid(Var a) {
  Mat out = val(a);
  for (double& x : out.data) x = sigmoid_scalar(x);
  Var y = emit(std::move(out), needs(a), {});
  if (needs(a)) {
    nodes_[y.id].pull = [a, y](Tape& t, const Mat& g) {
      const Mat& yv = t.val(y);
      Mat d(yv.rows, yv.cols);
      for (size_t i = 0; i < d.data.size(); ++i)
        d.data[i] = g.data[i] * yv.data[i] * (1.0 - yv.data[i]);
      t.accumulate(a, d);
    };
  }
  return y;
}

Var Tape::relu(Var a) {
  Mat out = val(a);
  for (double& x : out.data) x = std::max(x, 0.0);
  return emit(std::move(out), needs(a), [a](Tape& t, const Mat& g) {
    const Mat& v = t.val(a);
    Mat d(v.rows, v.cols);
    for (size_t i = 0; i < d.data.size(); ++i)
      d.data[i] = v.data[i] > 0.0 ? g.data[i] : 0.0;
    t.accumulate(a, d);
  });
}

Var Tape::rsqrt_shift(Var a, double eps) {
  Mat out = val(a);
  for (double& x : out.data) x = 1.0 / std::sqrt(x + eps);
  Var y = emit(std::move(out), needs(a), {});
  if (needs(a)) {
    nodes_[y.id].pull = [a, y](Tape& t, const Mat& g) {
      const Mat& yv = t.val(y);
      Mat d(yv.rows, yv.cols);
      for (size_t i = 0; i < d.data.size(); ++i)
        d.data[i] = -0.5 * g.data[i] * yv.data[i] * yv.data[i] * yv.data[i];
      t.accumulate(a, d);
    };
  }
  return y;
}

Var Tape::weighted_bce_logits(Var z, const Mat& target, const Mat& weight) {
  const Mat& zv = val(z);
  if (!zv.same_shape(target) || !zv.same_shape(weight))
    throw ShapeError("weighted_bce_logits: logits/target/weight shapes disagree");
  double acc = 0.0;
  for (size_t i = 0; i < zv.data.size(); ++i)
    acc += weight.data[i] * bce_logit_term(zv.data[i], target.data[i]);
  Mat out(1, 1);
  out.at(0, 0) = acc;
  const Mat t_copy = target, w_copy = weight;
  return emit(std::move(out), needs(z), [z, t_copy, w_copy](Tape& t, const Mat& g) {
    const Mat& zv = t.val(z);
    Mat d(zv.rows, zv.cols);
    const double g0 = g.at(0, 0);
    for (size_t i = 0; i < zv.data.size(); ++i)
      d.data[i] = g0 * w_copy.data[i] * (sigmoid_scalar(zv.data[i]) - t_copy.data[i]);
    t.accumulate(z, d);
  });
}

}  // namespace ad
}  // namespace music102
