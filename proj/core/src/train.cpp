#include "music102/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "music102/errors.hpp"
#include "music102/rng.hpp"

namespace music102 {

Adam::Adam(const ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.entries.size());
  v_.reserve(params.entries.size());
  for (const ParamSet::Entry& e : params.entries) {
    m_.emplace_back(e.value.rows, e.value.cols);
    v_.emplace_back(e.value.rows, e.value.cols);
  }
}

void Adam::step(ParamSet& params, const ParamSet& grads) {
  if (params.entries.size() != m_.size() ||
      grads.entries.size() != m_.size())
    throw ShapeError("Adam::step: parameter/gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < m_.size(); ++i) {
    Mat& p = params.entries[i].value;
    const Mat& g = grads.entries[i].value;
    if (g.rows != p.rows || g.cols != p.cols)
      throw ShapeError("Adam::step: gradient shape mismatch at '" +
                       params.entries[i].name + "'");
    for (size_t k = 0; k < p.data.size(); ++k) {
      double& m = m_[i].data[k];
      double& v = v_[i].data[k];
      const double gk = g.data[k];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gk;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gk * gk;
      p.data[k] -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
    }
  }
}

StepStats piece_loss(const ModelConfig& config, const ParamSet& params,
                     const PieceTensor& piece, ParamSet* grads) {
  ad::Tape tape;
  const std::vector<ad::Var> vars = bind_params(tape, params);
  const Forward fwd = model_forward(tape, config, vars, piece.melody,
                                    &piece.chords, &piece.weights);
  StepStats stats;
  stats.loss = tape.value(fwd.loss).at(0, 0);
  if (grads) {
    tape.backward(fwd.loss);
    grads->entries.clear();
    grads->entries.reserve(params.entries.size());
    for (size_t i = 0; i < params.entries.size(); ++i) {
      Mat g = tape.grad(vars[i]);
      if (g.data.empty())  // parameter the loss never touched
        g = Mat(params.entries[i].value.rows, params.entries[i].value.cols);
      stats.grad_max = std::max(stats.grad_max, max_abs(g));
      grads->entries.push_back({params.entries[i].name, std::move(g)});
    }
  }
  return stats;
}

EvalReport evaluate(const ModelConfig& config, const ParamSet& params,
                    const std::vector<PieceTensor>& pieces) {
  if (pieces.empty()) throw Error("evaluate: empty piece list");
  EvalReport r;
  for (const PieceTensor& piece : pieces) {
    const Mat logits = predict_logits(config, params, piece.melody);
    const double bce = weighted_bce(logits, piece.chords, piece.weights);
    const Mat pred = threshold(logits);
    const int T = piece.steps();
    r.weighted_bce += bce / T;
    r.weighted_bce_entry += bce / (12.0 * T);
    r.cosine_similarity += cosine_similarity(pred, piece.chords);
    r.exact_accuracy += exact_accuracy(pred, piece.chords);
    r.steps += T;
  }
  r.pieces = static_cast<int>(pieces.size());
  r.weighted_bce /= r.pieces;
  r.weighted_bce_entry /= r.pieces;
  r.cosine_similarity /= r.pieces;
  r.exact_accuracy /= r.pieces;
  return r;
}

TrainResult train(const ModelConfig& config,
                  const std::vector<PieceTensor>& train_set,
                  const std::vector<PieceTensor>& val_set,
                  const TrainOptions& opts) {
  if (train_set.empty()) throw Error("train: empty training set");
  if (opts.eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  config.validate();

  TrainResult result;
  result.config = config;
  result.params = init_params(config, opts.seed);
  result.best_val_bce = std::numeric_limits<double>::infinity();

  if (opts.epochs <= 0) {  // report the freshly initialized model
    EpochReport report;
    report.train = evaluate(config, result.params, train_set);
    if (!val_set.empty()) {
      report.val = evaluate(config, result.params, val_set);
      result.best_val_bce = report.val.weighted_bce;
      result.best_epoch = 0;
    }
    result.history.push_back(report);
    return result;
  }

  Adam adam(result.params, opts.adam);
  Rng order_rng(opts.seed + 0x9e3779b97f4a7c15ull);  // decoupled from init
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  ParamSet best = result.params;
  ParamSet grads;
  bool stop = false;
  for (int epoch = 0; epoch < opts.epochs && !stop; ++epoch) {
    if (opts.shuffle) order_rng.shuffle(order);
    for (size_t idx : order) {
      const StepStats s =
          piece_loss(config, result.params, train_set[idx], &grads);
      const bool bad_loss = !std::isfinite(s.loss);
      const bool bad_grad =
          !std::isfinite(s.grad_max) ||
          (opts.abort_grad_max > 0.0 && s.grad_max > opts.abort_grad_max);
      if (bad_loss || bad_grad) {
        std::ostringstream msg;
        msg << "training diverged at step " << result.steps << " (loss "
            << s.loss << ", max |grad| " << s.grad_max << ")";
        throw TrainDivergence(msg.str(), static_cast<int>(result.steps),
                              s.loss, s.grad_max);
      }
      adam.step(result.params, grads);
      result.step_losses.push_back(s.loss);
      ++result.steps;
      if (opts.max_steps > 0 && result.steps >= opts.max_steps) {
        stop = true;
        break;
      }
    }

    const bool last = stop || epoch + 1 == opts.epochs;
    if (epoch % opts.eval_every == 0 || last) {
      EpochReport report;
      report.epoch = epoch;
      report.train = evaluate(config, result.params, train_set);
      if (!val_set.empty()) {
        report.val = evaluate(config, result.params, val_set);
        if (report.val.weighted_bce < result.best_val_bce) {
          result.best_val_bce = report.val.weighted_bce;
          result.best_epoch = epoch;
          best = result.params;
        }
      }
      result.history.push_back(report);
      if (opts.stop_at_accuracy > 0.0 &&
          report.train.exact_accuracy >= opts.stop_at_accuracy)
        stop = true;
    }
  }

  if (!val_set.empty()) result.params = std::move(best);
  return result;
}

GradcheckReport gradcheck(const ModelConfig& config, const ParamSet& params,
                          const PieceTensor& piece, double h) {
  ParamSet grads;
  const StepStats base = piece_loss(config, params, piece, &grads);
  // Central differences cannot resolve smaller changes than the roundoff of
  // the loss itself; differences under tau are measurement noise, not error.
  const double tau = 100.0 * std::numeric_limits<double>::epsilon() *
                     std::max(1.0, std::fabs(base.loss)) / h;
  GradcheckReport report;
  ParamSet probe = params;
  for (size_t i = 0; i < probe.entries.size(); ++i) {
    Mat& value = probe.entries[i].value;
    for (size_t k = 0; k < value.data.size(); ++k) {
      const double saved = value.data[k];
      value.data[k] = saved + h;
      const double up = piece_loss(config, probe, piece).loss;
      value.data[k] = saved - h;
      const double dn = piece_loss(config, probe, piece).loss;
      value.data[k] = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double g = grads.entries[i].value.data[k];
      if (std::fabs(fd - g) < tau) continue;
      const double rel = std::fabs(fd - g) / std::max(1e-6, std::fabs(fd) + std::fabs(g));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = probe.entries[i].name;
      }
    }
  }
  return report;
}

double equivariance_residual(const ModelConfig& config, const ParamSet& params,
                             const Mat& melody) {
  const Mat base = predict_logits(config, params, melody);
  double worst = 0.0;
  for (GroupElement g : all_elements()) {
    const Mat perm = perm_matrix(g);
    const Mat lhs = predict_logits(config, params, matmul(perm, melody));
    const Mat rhs = matmul(perm, base);
    worst = std::max(worst, max_abs_diff(lhs, rhs));
  }
  return worst;
}

}  // namespace music102
