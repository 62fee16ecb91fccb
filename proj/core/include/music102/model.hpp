#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "music102/autodiff.hpp"
#include "music102/irreps.hpp"
#include "music102/mat.hpp"

namespace music102 {

// Music102 is the symmetry-respecting transformer over the seven irrep
// channels; Music101 is the plain transformer baseline on raw pitch-class
// columns. Both read a 12 x T melody and emit 12 x T chord logits.
enum class ModelKind { Music102, Music101 };

enum class ActivationKind { Relu, Sigmoid, NormGatedRelu, NormGatedSigmoid };

struct ModelConfig {
  ModelKind kind = ModelKind::Music102;
  int multiplicity = 16;  // per-channel width (Music102)
  int d_model = 64;       // feature width (Music101)
  int layers = 4;
  int heads = 4;
  int ff_multiplier = 2;
  ActivationKind activation = ActivationKind::Relu;
  double ln_eps = 1e-5;
  double pe_base = 10000.0;

  int width() const { return kind == ModelKind::Music102 ? multiplicity : d_model; }
  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  static ModelConfig music102_default() { return ModelConfig{}; }
  static ModelConfig music101_default() {
    ModelConfig c;
    c.kind = ModelKind::Music101;
    return c;
  }
};

const char* to_string(ModelKind kind);
const char* to_string(ActivationKind kind);

// Named parameter tensors in a fixed declaration order; the checkpoint format
// and the optimizer state both key off that order.
struct ParamSet {
  struct Entry {
    std::string name;
    Mat value;
  };
  std::vector<Entry> entries;

  size_t scalar_count() const;
  const Mat& find(const std::string& name) const;  // throws Error if absent
};

ParamSet init_params(const ModelConfig& config, uint64_t seed);
size_t param_count(const ModelConfig& config);

// One var per ParamSet entry, same order.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamSet& params);

// Pre-softmax scaled attention scores, layer-major then head.
struct AttentionTrace {
  std::vector<Mat> scores;  // each steps x steps
};

struct ForwardOptions {
  int valid_steps = -1;           // < steps means the tail is padding
  AttentionTrace* trace = nullptr;
};

struct Forward {
  ad::Var logits;  // (steps*12) x 1, step-major blocks of 12 pitch classes
  ad::Var loss;    // 1x1 weighted BCE sum; invalid when no target was given
};

// Builds the whole network on the tape. `chords` and `step_weights` are
// optional together; when present the weighted BCE loss node is emitted.
Forward model_forward(ad::Tape& tape, const ModelConfig& config,
                      const std::vector<ad::Var>& params, const Mat& melody,
                      const Mat* chords = nullptr,
                      const std::vector<double>* step_weights = nullptr,
                      const ForwardOptions& opts = {});

// Convenience: run the model tape-free and return 12 x T logits.
Mat predict_logits(const ModelConfig& config, const ParamSet& params,
                   const Mat& melody, AttentionTrace* trace = nullptr);

// (steps*12) x 1 step-major flat layout <-> 12 x steps matrix.
Mat logits_to_matrix(const Mat& flat, int steps);
Mat matrix_to_flat(const Mat& m);

namespace layers {

// One residual stream: an irrep channel (Music102) or the whole feature
// vector (Music101, ch == nullptr, block 1). Tensors are (steps*block) x mult.
struct Stream {
  int block = 1;
  int mult = 0;
  const Channel* ch = nullptr;
};

std::vector<Stream> model_streams(const ModelConfig& config);

// Standard sinusoidal position table, one row per step:
//   row(t)[2i] = sin(t * base^(-2i/width)), row(t)[2i+1] = cos(same angle).
Mat positional_table(int steps, int width, double base);

// Melody columns to per-step pitch blocks: 12 x T -> (T*12) x 1.
ad::Var melody_blocks(ad::Tape& tape, const Mat& melody);

// h_a = U_a (m_t + b_a * ones), then widened by w_a (1 x mult).
ad::Var featurize(ad::Tape& tape, ad::Var m_blocks, const Channel& ch,
                  ad::Var bias, ad::Var w_in);

// The only linear map allowed on a channel: right-multiply the multiplicity
// axis; never mixes the block rows.
ad::Var eq_linear(ad::Tape& tape, ad::Var x, ad::Var w);

// Pointwise nonlinearity conjugated into pitch space (pullback variants) or
// applied to each block-column vector's norm (norm-gated variants).
ad::Var activation(ad::Tape& tape, ad::Var x, const Stream& s, ActivationKind kind);

// Adds the position row, broadcast over pitch space and pulled through U for
// channel streams (every channel but the symmetric one receives zero).
ad::Var positional(ad::Tape& tape, ad::Var x, const Stream& s, int steps, double base);

// Per-step moments over the (pulled-back) block, gain/shift per multiplicity
// column, mapped back.
ad::Var layer_norm(ad::Tape& tape, ad::Var x, const Stream& s, ad::Var gamma,
                   ad::Var beta, double eps);

struct AttentionVars {
  std::vector<ad::Var> wq, wk, wv, wo;  // one per stream
  std::vector<ad::Var> bq, bk, bv, bo;  // Music101 only; empty otherwise
};

// Shared softmax over per-step block inner products summed across streams.
// Scores are scaled by 1/sqrt(total dims per head) before softmax; `mask`
// (1 = keep, 0 = padding, length steps) turns padded keys into -1e30.
std::vector<ad::Var> self_attention(ad::Tape& tape, const std::vector<Stream>& streams,
                                    const std::vector<ad::Var>& x,
                                    const AttentionVars& w, int heads,
                                    const std::vector<double>* mask,
                                    AttentionTrace* trace);

// sum_a U_a^T x_a w_a + bias * ones -> (steps*12) x 1 logits.
ad::Var output_head_eq(ad::Tape& tape, const std::vector<Stream>& streams,
                       const std::vector<ad::Var>& x,
                       const std::vector<ad::Var>& w, ad::Var bias);

// x W + b per step for the plain baseline.
ad::Var output_head_plain(ad::Tape& tape, ad::Var x, ad::Var w, ad::Var bias);

}  // namespace layers

}  // namespace music102
