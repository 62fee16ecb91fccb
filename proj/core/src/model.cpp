#include "music102/model.hpp"

#include <cmath>
#include <unordered_map>

#include "json.hpp"

#include "music102/errors.hpp"
#include "music102/rng.hpp"

namespace music102 {

using nlohmann::json;

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Music102 ? "music102" : "music101";
}

const char* to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::NormGatedRelu: return "norm_gated_relu";
    case ActivationKind::NormGatedSigmoid: return "norm_gated_sigmoid";
  }
  throw Error("to_string: bad activation kind");
}

namespace {
ModelKind parse_kind(const std::string& s) {
  if (s == "music102") return ModelKind::Music102;
  if (s == "music101") return ModelKind::Music101;
  throw ConfigError("unknown model kind '" + s + "'");
}

ActivationKind parse_activation(const std::string& s) {
  for (ActivationKind k : {ActivationKind::Relu, ActivationKind::Sigmoid,
                           ActivationKind::NormGatedRelu,
                           ActivationKind::NormGatedSigmoid})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown activation '" + s + "'");
}
}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) throw ConfigError("layers must be >= 0");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (multiplicity < 1) throw ConfigError("multiplicity must be >= 1");
  if (d_model < 1) throw ConfigError("d_model must be >= 1");
  if (ff_multiplier < 1) throw ConfigError("ff_multiplier must be >= 1");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
  if (!(pe_base > 0.0)) throw ConfigError("pe_base must be positive");
  if (width() % heads != 0)
    throw ConfigError("feature width must be divisible by the head count");
  // Positional encoding pairs sin/cos columns, so feature widths stay even.
  if (kind == ModelKind::Music102 && multiplicity % 2 != 0)
    throw ConfigError("multiplicity must be even");
  if (kind == ModelKind::Music101 && d_model % 2 != 0)
    throw ConfigError("d_model must be even");
}

std::string ModelConfig::to_json() const {
  json j;
  j["kind"] = music102::to_string(kind);
  j["multiplicity"] = multiplicity;
  j["d_model"] = d_model;
  j["layers"] = layers;
  j["heads"] = heads;
  j["ff_multiplier"] = ff_multiplier;
  j["activation"] = music102::to_string(activation);
  j["ln_eps"] = ln_eps;
  j["pe_base"] = pe_base;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const char* known[] = {"kind",       "multiplicity", "d_model",
                                "layers",     "heads",        "ff_multiplier",
                                "activation", "ln_eps",       "pe_base"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "'");
  }
  try {
    ModelConfig c;
    if (j.contains("kind")) c.kind = parse_kind(j["kind"].get<std::string>());
    c.multiplicity = j.value("multiplicity", c.multiplicity);
    c.d_model = j.value("d_model", c.d_model);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
    if (j.contains("activation"))
      c.activation = parse_activation(j["activation"].get<std::string>());
    c.ln_eps = j.value("ln_eps", c.ln_eps);
    c.pe_base = j.value("pe_base", c.pe_base);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameter layout. Everything that needs "the parameters, in order" (init,
// checkpoints, the optimizer, the forward pass) goes through these specs.

namespace {
enum class Init { Uniform, Zero, One };

struct ParamSpec {
  std::string name;
  int rows, cols;
  Init init;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  std::vector<ParamSpec> specs;
  auto push = [&](std::string name, int r, int co, Init in) {
    specs.push_back({std::move(name), r, co, in});
  };
  if (c.kind == ModelKind::Music102) {
    const int s = c.multiplicity;
    std::vector<std::string> chs;
    for (const Channel& ch : irrep_table().channels) chs.push_back(to_string(ch.label));
    for (const auto& n : chs) push("feat.bias." + n, 1, 1, Init::Zero);
    for (const auto& n : chs) push("in.w." + n, 1, s, Init::Uniform);
    for (int l = 0; l < c.layers; ++l) {
      const std::string L = "layer" + std::to_string(l) + ".";
      for (const char* w : {"wq", "wk", "wv", "wo"})
        for (const auto& n : chs) push(L + "attn." + w + "." + n, s, s, Init::Uniform);
      for (const auto& n : chs) {
        push(L + "ln1.gamma." + n, 1, s, Init::One);
        push(L + "ln1.beta." + n, 1, s, Init::Zero);
      }
      for (const auto& n : chs) {
        push(L + "ff.w1." + n, s, c.ff_multiplier * s, Init::Uniform);
        push(L + "ff.w2." + n, c.ff_multiplier * s, s, Init::Uniform);
      }
      for (const auto& n : chs) {
        push(L + "ln2.gamma." + n, 1, s, Init::One);
        push(L + "ln2.beta." + n, 1, s, Init::Zero);
      }
    }
    for (const auto& n : chs) push("head.w." + n, s, 1, Init::Uniform);
    push("head.bias", 1, 1, Init::Zero);
  } else {
    const int d = c.d_model;
    push("in.w", 12, d, Init::Uniform);
    push("in.b", 1, d, Init::Zero);
    for (int l = 0; l < c.layers; ++l) {
      const std::string L = "layer" + std::to_string(l) + ".";
      for (const char* w : {"q", "k", "v", "o"}) {
        push(L + "attn.w" + w, d, d, Init::Uniform);
        push(L + "attn.b" + w, 1, d, Init::Zero);
      }
      push(L + "ln1.gamma", 1, d, Init::One);
      push(L + "ln1.beta", 1, d, Init::Zero);
      push(L + "ff.w1", d, c.ff_multiplier * d, Init::Uniform);
      push(L + "ff.b1", 1, c.ff_multiplier * d, Init::Zero);
      push(L + "ff.w2", c.ff_multiplier * d, d, Init::Uniform);
      push(L + "ff.b2", 1, d, Init::Zero);
      push(L + "ln2.gamma", 1, d, Init::One);
      push(L + "ln2.beta", 1, d, Init::Zero);
    }
    push("head.w", d, 12, Init::Uniform);
    push("head.b", 1, 12, Init::Zero);
  }
  return specs;
}

class ParamIndex {
 public:
  explicit ParamIndex(const ModelConfig& c) {
    const auto specs = param_specs(c);
    for (size_t i = 0; i < specs.size(); ++i) idx_[specs[i].name] = static_cast<int>(i);
  }
  int at(const std::string& name) const {
    auto it = idx_.find(name);
    if (it == idx_.end()) throw Error("parameter '" + name + "' not in layout");
    return it->second;
  }

 private:
  std::unordered_map<std::string, int> idx_;
};
}  // namespace

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  for (const Entry& e : entries) n += e.value.size();
  return n;
}

const Mat& ParamSet::find(const std::string& name) const {
  for (const Entry& e : entries)
    if (e.name == name) return e.value;
  throw Error("parameter '" + name + "' not found");
}

ParamSet init_params(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamSet out;
  for (const ParamSpec& spec : param_specs(config)) {
    Mat m(spec.rows, spec.cols);
    switch (spec.init) {
      case Init::Uniform: {
        const double b = 1.0 / std::sqrt(static_cast<double>(spec.rows));
        for (double& x : m.data) x = rng.uniform(-b, b);
        break;
      }
      case Init::Zero:
        break;
      case Init::One:
        for (double& x : m.data) x = 1.0;
        break;
    }
    out.entries.push_back({spec.name, std::move(m)});
  }
  return out;
}

size_t param_count(const ModelConfig& config) {
  size_t n = 0;
  for (const ParamSpec& spec : param_specs(config))
    n += static_cast<size_t>(spec.rows) * spec.cols;
  return n;
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamSet& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.entries.size());
  for (const ParamSet::Entry& e : params.entries) vars.push_back(tape.param(e.value));
  return vars;
}

// ---------------------------------------------------------------------------
// Layers.

namespace layers {

std::vector<Stream> model_streams(const ModelConfig& config) {
  std::vector<Stream> streams;
  if (config.kind == ModelKind::Music102) {
    for (const Channel& ch : irrep_table().channels)
      streams.push_back({ch.dim, config.multiplicity, &ch});
  } else {
    streams.push_back({1, config.d_model, nullptr});
  }
  return streams;
}

Mat positional_table(int steps, int width, double base) {
  Mat pe(steps, width);
  for (int t = 0; t < steps; ++t)
    for (int i = 0; i < width; ++i) {
      const double angle = t * std::pow(base, -2.0 * (i / 2) / width);
      pe.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

ad::Var melody_blocks(ad::Tape& tape, const Mat& melody) {
  if (melody.rows != 12) throw ShapeError("melody must have 12 rows");
  return tape.reshape(tape.input(transpose(melody)), melody.cols * 12, 1);
}

ad::Var featurize(ad::Tape& tape, ad::Var m_blocks, const Channel& ch,
                  ad::Var bias, ad::Var w_in) {
  ad::Var h = tape.bias_ones(m_blocks, bias);
  h = tape.block_left(ch.U, h, 12);
  return tape.matmul(h, w_in);
}

ad::Var eq_linear(ad::Tape& tape, ad::Var x, ad::Var w) { return tape.matmul(x, w); }

ad::Var activation(ad::Tape& tape, ad::Var x, const Stream& s, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Relu:
    case ActivationKind::Sigmoid: {
      auto apply = [&](ad::Var h) {
        return kind == ActivationKind::Relu ? tape.relu(h) : tape.sigmoid(h);
      };
      if (!s.ch) return apply(x);
      ad::Var h = tape.block_left(s.ch->Ut, x, s.ch->dim);
      return tape.block_left(s.ch->U, apply(h), 12);
    }
    case ActivationKind::NormGatedRelu:
      return tape.norm_gate(x, s.ch ? s.ch->dim : 1, Gate::Relu);
    case ActivationKind::NormGatedSigmoid:
      return tape.norm_gate(x, s.ch ? s.ch->dim : 1, Gate::Sigmoid);
  }
  throw Error("activation: bad kind");
}

ad::Var positional(ad::Tape& tape, ad::Var x, const Stream& s, int steps, double base) {
  const Mat pe = positional_table(steps, s.mult, base);
  if (!s.ch) return tape.add_const(x, pe);
  // Broadcast the row over pitch space and pull through U: only rows of U not
  // orthogonal to the all-ones vector survive (the symmetric channel).
  const Channel& ch = *s.ch;
  std::vector<double> rowsum(ch.dim, 0.0);
  for (int r = 0; r < ch.dim; ++r)
    for (int j = 0; j < 12; ++j) rowsum[r] += ch.U.at(r, j);
  Mat add(steps * ch.dim, s.mult);
  for (int t = 0; t < steps; ++t)
    for (int r = 0; r < ch.dim; ++r)
      for (int i = 0; i < s.mult; ++i)
        add.at(t * ch.dim + r, i) = rowsum[r] * pe.at(t, i);
  return tape.add_const(x, add);
}

ad::Var layer_norm(ad::Tape& tape, ad::Var x, const Stream& s, ad::Var gamma,
                   ad::Var beta, double eps) {
  const int cols = tape.value(x).cols;
  const int block = s.ch ? 12 : 1;
  ad::Var v = s.ch ? tape.block_left(s.ch->Ut, x, s.ch->dim) : x;
  ad::Var m = tape.block_mean(v, block);
  ad::Var d = tape.sub(v, tape.block_expand(m, block, cols));
  ad::Var var = tape.block_mean(tape.mul(d, d), block);
  ad::Var r = tape.rsqrt_shift(var, eps);
  ad::Var dn = tape.mul(d, tape.block_expand(r, block, cols));
  ad::Var sc = tape.col_shift(tape.col_scale(dn, gamma), beta);
  return s.ch ? tape.block_left(s.ch->U, sc, 12) : sc;
}

std::vector<ad::Var> self_attention(ad::Tape& tape, const std::vector<Stream>& streams,
                                    const std::vector<ad::Var>& x,
                                    const AttentionVars& w, int heads,
                                    const std::vector<double>* mask,
                                    AttentionTrace* trace) {
  const size_t n = streams.size();
  if (x.size() != n || w.wq.size() != n || w.wk.size() != n || w.wv.size() != n ||
      w.wo.size() != n)
    throw ShapeError("self_attention: stream/var counts disagree");
  const int steps = tape.value(x[0]).rows / streams[0].block;

  int total = 0;
  for (const Stream& s : streams) {
    if (s.mult % heads != 0)
      throw ConfigError("self_attention: width not divisible by heads");
    total += s.block * s.mult;
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(total / heads));

  const bool biased = !w.bq.empty();
  std::vector<ad::Var> q(n), k(n), v(n);
  for (size_t i = 0; i < n; ++i) {
    q[i] = tape.matmul(x[i], w.wq[i]);
    k[i] = tape.matmul(x[i], w.wk[i]);
    v[i] = tape.matmul(x[i], w.wv[i]);
    if (biased) {
      q[i] = tape.col_shift(q[i], w.bq[i]);
      k[i] = tape.col_shift(k[i], w.bk[i]);
      v[i] = tape.col_shift(v[i], w.bv[i]);
    }
  }

  Mat mask_mat;
  if (mask) {
    if (static_cast<int>(mask->size()) != steps)
      throw ShapeError("self_attention: mask length != steps");
    mask_mat = Mat(steps, steps);
    for (int i = 0; i < steps; ++i)
      for (int j = 0; j < steps; ++j)
        if ((*mask)[j] == 0.0) mask_mat.at(i, j) = -1e30;
  }

  std::vector<std::vector<ad::Var>> head_out(n);
  for (int h = 0; h < heads; ++h) {
    ad::Var score;
    std::vector<ad::Var> vf(n);
    for (size_t i = 0; i < n; ++i) {
      const int sh = streams[i].mult / heads;
      const int flat = streams[i].block * sh;
      ad::Var qf = tape.reshape(tape.col_slice(q[i], h * sh, (h + 1) * sh), steps, flat);
      ad::Var kf = tape.reshape(tape.col_slice(k[i], h * sh, (h + 1) * sh), steps, flat);
      vf[i] = tape.reshape(tape.col_slice(v[i], h * sh, (h + 1) * sh), steps, flat);
      ad::Var part = tape.matmul(qf, tape.transpose(kf));
      score = (i == 0) ? part : tape.add(score, part);
    }
    score = tape.scale(score, inv_scale);
    if (trace) trace->scores.push_back(tape.value(score));
    if (mask) score = tape.add_const(score, mask_mat);
    ad::Var attn = tape.softmax_rows(score);
    for (size_t i = 0; i < n; ++i) {
      const int sh = streams[i].mult / heads;
      ad::Var mixed = tape.matmul(attn, vf[i]);  // steps x (block*sh)
      head_out[i].push_back(tape.reshape(mixed, steps * streams[i].block, sh));
    }
  }

  std::vector<ad::Var> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = tape.matmul(tape.col_concat(head_out[i]), w.wo[i]);
    if (biased) out[i] = tape.col_shift(out[i], w.bo[i]);
  }
  return out;
}

ad::Var output_head_eq(ad::Tape& tape, const std::vector<Stream>& streams,
                       const std::vector<ad::Var>& x,
                       const std::vector<ad::Var>& w, ad::Var bias) {
  ad::Var acc;
  for (size_t i = 0; i < streams.size(); ++i) {
    ad::Var y = tape.matmul(x[i], w[i]);  // (steps*dim) x 1
    y = tape.block_left(streams[i].ch->Ut, y, streams[i].ch->dim);
    acc = (i == 0) ? y : tape.add(acc, y);
  }
  return tape.bias_ones(acc, bias);
}

ad::Var output_head_plain(ad::Tape& tape, ad::Var x, ad::Var w, ad::Var bias) {
  ad::Var y = tape.col_shift(tape.matmul(x, w), bias);  // steps x 12
  const Mat& yv = tape.value(y);
  return tape.reshape(y, yv.rows * 12, 1);
}

}  // namespace layers

// ---------------------------------------------------------------------------
// Whole-model forward.

Mat matrix_to_flat(const Mat& m) {
  const Mat t = transpose(m);
  return Mat(m.cols * m.rows, 1, t.data);
}

Mat logits_to_matrix(const Mat& flat, int steps) {
  if (flat.cols != 1 || flat.rows != steps * 12)
    throw ShapeError("logits_to_matrix: bad flat shape");
  return transpose(Mat(steps, 12, flat.data));
}

Forward model_forward(ad::Tape& tape, const ModelConfig& config,
                      const std::vector<ad::Var>& params, const Mat& melody,
                      const Mat* chords, const std::vector<double>* step_weights,
                      const ForwardOptions& opts) {
  config.validate();
  if (melody.rows != 12) throw ShapeError("model_forward: melody must be 12 x T");
  const int steps = melody.cols;
  if (steps < 1) throw ShapeError("model_forward: empty melody");

  const ParamIndex index(config);
  if (params.size() != param_specs(config).size())
    throw ShapeError("model_forward: wrong number of parameters for config");
  auto p = [&](const std::string& name) { return params[index.at(name)]; };

  const auto streams = layers::model_streams(config);
  const bool eq = config.kind == ModelKind::Music102;
  const size_t n = streams.size();

  std::vector<ad::Var> x(n);
  if (eq) {
    ad::Var mb = layers::melody_blocks(tape, melody);
    for (size_t i = 0; i < n; ++i) {
      const std::string ch = to_string(streams[i].ch->label);
      x[i] = layers::featurize(tape, mb, *streams[i].ch, p("feat.bias." + ch),
                               p("in.w." + ch));
    }
  } else {
    x[0] = tape.col_shift(tape.matmul(tape.input(transpose(melody)), p("in.w")),
                          p("in.b"));
  }
  for (size_t i = 0; i < n; ++i)
    x[i] = layers::positional(tape, x[i], streams[i], steps, config.pe_base);

  std::vector<double> mask_vec;
  const std::vector<double>* mask = nullptr;
  const int valid = (opts.valid_steps >= 0 && opts.valid_steps < steps)
                        ? opts.valid_steps
                        : steps;
  if (valid < steps) {
    mask_vec.assign(steps, 1.0);
    for (int t = valid; t < steps; ++t) mask_vec[t] = 0.0;
    mask = &mask_vec;
  }

  for (int l = 0; l < config.layers; ++l) {
    const std::string L = "layer" + std::to_string(l) + ".";
    layers::AttentionVars av;
    for (size_t i = 0; i < n; ++i) {
      const std::string suffix = eq ? "." + std::string(to_string(streams[i].ch->label)) : "";
      av.wq.push_back(p(L + "attn.wq" + suffix));
      av.wk.push_back(p(L + "attn.wk" + suffix));
      av.wv.push_back(p(L + "attn.wv" + suffix));
      av.wo.push_back(p(L + "attn.wo" + suffix));
      if (!eq) {
        av.bq.push_back(p(L + "attn.bq"));
        av.bk.push_back(p(L + "attn.bk"));
        av.bv.push_back(p(L + "attn.bv"));
        av.bo.push_back(p(L + "attn.bo"));
      }
    }
    const auto attn = layers::self_attention(tape, streams, x, av, config.heads,
                                             mask, opts.trace);
    for (size_t i = 0; i < n; ++i) {
      const std::string suffix = eq ? "." + std::string(to_string(streams[i].ch->label)) : "";
      x[i] = layers::layer_norm(tape, tape.add(x[i], attn[i]), streams[i],
                                p(L + "ln1.gamma" + suffix), p(L + "ln1.beta" + suffix),
                                config.ln_eps);
      ad::Var h = tape.matmul(x[i], p(L + "ff.w1" + suffix));
      if (!eq) h = tape.col_shift(h, p(L + "ff.b1"));
      h = layers::activation(tape, h, streams[i], config.activation);
      h = tape.matmul(h, p(L + "ff.w2" + suffix));
      if (!eq) h = tape.col_shift(h, p(L + "ff.b2"));
      x[i] = layers::layer_norm(tape, tape.add(x[i], h), streams[i],
                                p(L + "ln2.gamma" + suffix), p(L + "ln2.beta" + suffix),
                                config.ln_eps);
    }
  }

  Forward out;
  if (eq) {
    std::vector<ad::Var> hw;
    for (size_t i = 0; i < n; ++i)
      hw.push_back(p("head.w." + std::string(to_string(streams[i].ch->label))));
    out.logits = layers::output_head_eq(tape, streams, x, hw, p("head.bias"));
  } else {
    out.logits = layers::output_head_plain(tape, x[0], p("head.w"), p("head.b"));
  }

  if (chords) {
    if (chords->rows != 12 || chords->cols != steps)
      throw ShapeError("model_forward: chord target must be 12 x T");
    if (step_weights && static_cast<int>(step_weights->size()) < steps)
      throw ShapeError("model_forward: step_weights shorter than melody");
    const Mat target = matrix_to_flat(*chords);
    Mat weight(steps * 12, 1);
    for (int t = 0; t < steps; ++t) {
      const double wt = (t >= valid) ? 0.0
                        : (step_weights ? (*step_weights)[t] : 1.0);
      for (int pc = 0; pc < 12; ++pc) weight.at(t * 12 + pc, 0) = wt;
    }
    out.loss = tape.weighted_bce_logits(out.logits, target, weight);
  }
  return out;
}

Mat predict_logits(const ModelConfig& config, const ParamSet& params,
                   const Mat& melody, AttentionTrace* trace) {
  ad::Tape tape;
  ForwardOptions opts;
  opts.trace = trace;
  const auto vars = bind_params(tape, params);
  const Forward f = model_forward(tape, config, vars, melody, nullptr, nullptr, opts);
  return logits_to_matrix(tape.value(f.logits), melody.cols);
}

}  // namespace music102
