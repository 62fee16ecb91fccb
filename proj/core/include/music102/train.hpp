#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "music102/metrics.hpp"
#include "music102/model.hpp"
#include "music102/piece.hpp"

namespace music102 {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a ParamSet; moment buffers follow the declaration order, so the
// update is deterministic given a deterministic gradient.
class Adam {
 public:
  explicit Adam(const ParamSet& params, AdamConfig cfg = {});
  void step(ParamSet& params, const ParamSet& grads);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  int t_ = 0;
};

// Loss and gradients of one embedded piece under the model. When `grads` is
// non-null it is rebuilt with the same entries as `params`, holding d loss /
// d entry. Returns the raw loss sum (the optimization objective).
struct StepStats {
  double loss = 0.0;
  double grad_max = 0.0;  // max |entry| over all gradients; 0 when !grads
};
StepStats piece_loss(const ModelConfig& config, const ParamSet& params,
                     const PieceTensor& piece, ParamSet* grads = nullptr);

// Metric means over a piece list; throws Error when the list is empty.
EvalReport evaluate(const ModelConfig& config, const ParamSet& params,
                    const std::vector<PieceTensor>& pieces);

struct TrainOptions {
  int epochs = 1;
  int max_steps = 0;         // stop after this many optimizer steps; 0 = off
  uint64_t seed = 0;         // drives init and the shuffle order
  bool shuffle = true;
  int eval_every = 1;        // epochs between metric reports (>= 1)
  double stop_at_accuracy = 0.0;  // stop once train accuracy reaches this
  double abort_grad_max = 0.0;    // treat |grad| above this as divergence
  AdamConfig adam;
};

struct EpochReport {
  int epoch = 0;
  EvalReport train;
  EvalReport val;  // pieces == 0 when no validation set was given
};

struct TrainResult {
  ModelConfig config;
  ParamSet params;     // best-validation params; final params without a val set
  long steps = 0;
  int best_epoch = -1; // -1 when no validation set was given
  double best_val_bce = 0.0;
  std::vector<EpochReport> history;
  std::vector<double> step_losses;  // raw per-step loss sums, in order
};

// One optimizer step per piece (batch size 1), pieces reshuffled per epoch.
// Throws Error on an empty training set and TrainDivergence when the loss or
// a gradient stops being finite (or exceeds abort_grad_max).
TrainResult train(const ModelConfig& config,
                  const std::vector<PieceTensor>& train_set,
                  const std::vector<PieceTensor>& val_set,
                  const TrainOptions& opts = {});

// Central-difference check of every parameter gradient on one piece.
// Differences below the measurement floor 100*eps*max(1,|loss|)/h are
// reported as zero error (FD cannot resolve them).
struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
};
GradcheckReport gradcheck(const ModelConfig& config, const ParamSet& params,
                          const PieceTensor& piece, double h = 1e-5);

// Max over all 24 group elements of max |forward(gM) - g forward(M)|.
double equivariance_residual(const ModelConfig& config, const ParamSet& params,
                             const Mat& melody);

}  // namespace music102
