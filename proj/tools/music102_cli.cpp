// music102: command-line front end for the D12-equivariant chord
// accompaniment model. Every command prints one JSON report to stdout;
// human-readable progress and per-piece warnings go to stderr. Exit codes:
// 0 success, 1 validation failure (bad inputs, bad config, missing files),
// 2 runtime failure (diverged training, internal errors).
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "music102/align.hpp"
#include "music102/annotations.hpp"
#include "music102/checkpoint.hpp"
#include "music102/dataset.hpp"
#include "music102/errors.hpp"
#include "music102/group.hpp"
#include "music102/irreps.hpp"
#include "music102/metrics.hpp"
#include "music102/model.hpp"
#include "music102/piece.hpp"
#include "music102/rng.hpp"
#include "music102/smf.hpp"
#include "music102/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace music102;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
  std::string config_path;
  std::string out_path;
  bool quiet = false;
  bool no_timestamp = false;
};

void log_line(const GlobalOpts& g, const std::string& msg) {
  if (!g.quiet) std::cerr << "[music102] " << msg << "\n";
}

void warn_json(const std::string& piece, const std::string& kind,
               const std::string& detail) {
  json w;
  w["piece"] = piece;
  w["kind"] = kind;
  w["detail"] = detail;
  std::cerr << w.dump() << "\n";
}

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void emit_report(const GlobalOpts& g, json report) {
  if (!g.no_timestamp) report["timestamp"] = iso_utc_now();
  std::cout << report.dump(2) << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  const std::string s = read_file(path);
  return std::vector<uint8_t>(s.begin(), s.end());
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

json int_mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols; ++j)
      row.push_back(static_cast<int>(m.at(i, j)));
    rows.push_back(row);
  }
  return rows;
}

// The config file is either a bare model-config object or a two-section
// document {"model": {...}, "train": {...}}; the train section feeds
// TrainOptions and the optimizer.
struct FileConfig {
  ModelConfig model;
  TrainOptions train;
  bool has_train = false;
};

TrainOptions parse_train_section(const json& j) {
  static const char* known[] = {"epochs",   "max_steps",       "eval_every",
                                "shuffle",  "stop_at_accuracy", "abort_grad_max",
                                "lr",       "beta1",            "beta2",
                                "eps"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config: unknown train key '" + it.key() + "'");
  }
  TrainOptions t;
  try {
    t.epochs = j.value("epochs", t.epochs);
    t.max_steps = j.value("max_steps", t.max_steps);
    t.eval_every = j.value("eval_every", t.eval_every);
    t.shuffle = j.value("shuffle", t.shuffle);
    t.stop_at_accuracy = j.value("stop_at_accuracy", t.stop_at_accuracy);
    t.abort_grad_max = j.value("abort_grad_max", t.abort_grad_max);
    t.adam.lr = j.value("lr", t.adam.lr);
    t.adam.beta1 = j.value("beta1", t.adam.beta1);
    t.adam.beta2 = j.value("beta2", t.adam.beta2);
    t.adam.eps = j.value("eps", t.adam.eps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (t.epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (t.eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
  if (!(t.adam.lr > 0.0)) throw ConfigError("config: lr must be positive");
  return t;
}

FileConfig load_file_config(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  FileConfig fc;
  if (j.is_object() && j.contains("model")) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "model" && it.key() != "train")
        throw ConfigError("config: unknown section '" + it.key() + "'");
    fc.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("train")) {
      fc.train = parse_train_section(j["train"]);
      fc.has_train = true;
    }
  } else {
    fc.model = ModelConfig::from_json(text);
  }
  return fc;
}

json eval_to_json(const EvalReport& r) {
  json j;
  j["weighted_bce"] = r.weighted_bce;
  j["cosine_similarity"] = r.cosine_similarity;
  j["exact_accuracy"] = r.exact_accuracy;
  j["pieces"] = r.pieces;
  j["steps"] = r.steps;
  return j;
}

// A valid piece drawn from the seed: one random pitch per step and a cover
// of random triad spans. Used when an audit is run without a piece file.
Piece random_piece(uint64_t seed, int steps, double u) {
  Rng rng(seed);
  Piece p;
  p.id = "random-" + std::to_string(seed);
  p.u_beats = u;
  for (int t = 0; t < steps; ++t)
    p.melody.push_back({48 + rng.range(0, 24), t * u, u});
  int t = 0;
  while (t < steps) {
    const int len = 1 + rng.range(0, std::min(4, steps - t));
    const int root = rng.range(0, 12);
    std::vector<int> pcs = {root, (root + 4) % 12, (root + 7) % 12};
    std::sort(pcs.begin(), pcs.end());
    p.chords.push_back({pcs, t * u, len * u});
    t += len;
  }
  return p;
}

// ---------------------------------------------------------------------- irreps

int cmd_irreps(const GlobalOpts& g) {
  const IrrepTable& table = irrep_table();

  json classes = json::array();
  for (const ConjClass& c : conjugacy_classes()) {
    json jc;
    jc["rep"] = to_string(c.rep);
    jc["size"] = c.members.size();
    classes.push_back(jc);
  }

  json characters;
  for (IrrepLabel label : kAllIrreps) {
    json row = json::array();
    for (const ConjClass& c : conjugacy_classes())
      row.push_back(character(label, c.rep));
    characters[to_string(label)] = row;
  }

  json mult;
  for (IrrepLabel label : kAllIrreps)
    mult[to_string(label)] = table.multiplicity[static_cast<int>(label)];

  double intertwiner = 0.0;
  double orthogonality = 0.0;
  json channels = json::array();
  Mat stacked(12, 12);
  int next_row = 0;
  for (const Channel& ch : table.channels) {
    for (GroupElement el : all_elements()) {
      const Mat lhs = matmul(ch.U, perm_matrix(el));
      const Mat rhs = matmul(irrep_matrix(ch.label, el), ch.U);
      intertwiner = std::max(intertwiner, max_abs_diff(lhs, rhs));
    }
    orthogonality = std::max(
        orthogonality, max_abs_diff(matmul(ch.U, ch.Ut), Mat::identity(ch.dim)));
    for (int i = 0; i < ch.dim; ++i, ++next_row)
      for (int j = 0; j < 12; ++j) stacked.at(next_row, j) = ch.U.at(i, j);
    json jc;
    jc["irrep"] = to_string(ch.label);
    jc["dim"] = ch.dim;
    jc["U"] = mat_to_json(ch.U);
    channels.push_back(jc);
  }
  // The seven surviving channels stack to a full orthogonal change of basis.
  orthogonality = std::max(
      orthogonality,
      max_abs_diff(matmul(stacked, transpose(stacked)), Mat::identity(12)));

  json report;
  report["command"] = "irreps";
  report["group_order"] = all_elements().size();
  report["conjugacy_classes"] = classes;
  report["characters"] = characters;
  report["multiplicities"] = mult;
  report["channels"] = channels;
  report["max_intertwiner_residual"] = intertwiner;
  report["max_orthogonality_residual"] = orthogonality;
  emit_report(g, report);
  return 0;
}

// ---------------------------------------------------------------------- ingest

struct IngestOpts {
  std::string midi_dir, chord_dir, beat_dir;
  double u = kDefaultStep;
  std::string unknown_chords = "skip";
};

std::string find_annotation(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".txt", ".lab"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

int cmd_ingest(const GlobalOpts& g, const IngestOpts& opt) {
  AlignOptions align_opts;
  align_opts.u = opt.u;
  if (opt.unknown_chords == "skip")
    align_opts.unknown_chords = UnknownChordPolicy::Skip;
  else if (opt.unknown_chords == "fail")
    align_opts.unknown_chords = UnknownChordPolicy::Fail;
  else if (opt.unknown_chords == "root-triad")
    align_opts.unknown_chords = UnknownChordPolicy::RootTriad;
  else
    throw ConfigError("unknown --unknown-chords value '" + opt.unknown_chords +
                      "'");
  if (!(opt.u > 0.0)) throw ConfigError("--u must be positive");
  if (!fs::is_directory(opt.midi_dir))
    throw Error("--midi-dir '" + opt.midi_dir + "' is not a directory");
  if (!fs::is_directory(opt.chord_dir))
    throw Error("--chord-dir '" + opt.chord_dir + "' is not a directory");
  if (!fs::is_directory(opt.beat_dir))
    throw Error("--beat-dir '" + opt.beat_dir + "' is not a directory");

  std::vector<std::pair<std::string, fs::path>> stems;
  for (const auto& entry : fs::directory_iterator(opt.midi_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".mid" || ext == ".midi")
      stems.emplace_back(entry.path().stem().string(), entry.path());
  }
  std::sort(stems.begin(), stems.end());

  std::vector<Piece> pieces;
  json skipped = json::array();
  size_t warning_count = 0;
  for (const auto& [stem, midi_path] : stems) {
    const std::string chord_path = find_annotation(opt.chord_dir, stem);
    const std::string beat_path = find_annotation(opt.beat_dir, stem);
    if (chord_path.empty() || beat_path.empty()) {
      warn_json(stem, "missing_annotation",
                chord_path.empty() ? "no chord file" : "no beat file");
      ++warning_count;
      skipped.push_back(stem);
      continue;
    }
    try {
      const SmfFile midi = parse_smf(read_bytes(midi_path.string()));
      const auto chords = parse_chord_annotation(read_file(chord_path));
      const BeatGrid grid = parse_beat_grid(read_file(beat_path));
      AlignResult aligned = align_to_grid(stem, midi, chords, grid, align_opts);
      for (const AlignWarning& w : aligned.warnings) {
        warn_json(stem, w.kind, w.detail);
        ++warning_count;
      }
      pieces.push_back(std::move(aligned.piece));
    } catch (const Error& e) {
      warn_json(stem, "parse_error", e.what());
      ++warning_count;
      skipped.push_back(stem);
    }
  }
  if (pieces.empty()) throw Error("no pieces could be ingested");

  const std::string out =
      g.out_path.empty() ? std::string("corpus.jsonl") : g.out_path;
  save_corpus(out, pieces);
  log_line(g, "wrote " + std::to_string(pieces.size()) + " pieces to " + out);

  json report;
  report["command"] = "ingest";
  report["out"] = out;
  report["u_beats"] = opt.u;
  report["pieces"] = pieces.size();
  report["skipped"] = skipped;
  report["warnings"] = warning_count;
  emit_report(g, report);
  return 0;
}

// ----------------------------------------------------------------------- train

struct TrainFlags {
  std::string corpus;
  std::string metrics_path;
  int epochs = -1;       // -1 = take from config
  int max_steps = -1;
  double lr = 0.0;       // 0 = take from config
  double stop_at_accuracy = -1.0;
  double abort_grad_max = -1.0;
  int eval_every = -1;
  bool no_shuffle = false;
};

struct SplitTensors {
  std::vector<PieceTensor> train, val, test;
};

SplitTensors embed_split(const std::vector<Piece>& corpus,
                         const DatasetSplit& split) {
  std::map<std::string, const Piece*> by_id;
  for (const Piece& p : corpus) by_id[p.id] = &p;
  SplitTensors out;
  const auto take = [&](const std::vector<std::string>& ids,
                        std::vector<PieceTensor>& dst) {
    dst.reserve(ids.size());
    for (const std::string& id : ids) dst.push_back(embed_piece(*by_id.at(id)));
  };
  take(split.train, out.train);
  take(split.val, out.val);
  take(split.test, out.test);
  return out;
}

void write_metrics_line(std::ofstream& out, int epoch, const char* split,
                        const EvalReport& r) {
  json line;
  line["epoch"] = epoch;
  line["split"] = split;
  line["wbce"] = r.weighted_bce;
  line["cossim"] = r.cosine_similarity;
  line["acc"] = r.exact_accuracy;
  out << line.dump() << "\n";
}

int cmd_train(const GlobalOpts& g, const TrainFlags& fl) {
  FileConfig fc;
  if (!g.config_path.empty()) fc = load_file_config(g.config_path);
  TrainOptions opts = fc.train;
  opts.seed = g.seed;
  if (fl.epochs >= 0) opts.epochs = fl.epochs;
  if (fl.max_steps >= 0) opts.max_steps = fl.max_steps;
  if (fl.lr > 0.0) opts.adam.lr = fl.lr;
  if (fl.stop_at_accuracy >= 0.0) opts.stop_at_accuracy = fl.stop_at_accuracy;
  if (fl.abort_grad_max >= 0.0) opts.abort_grad_max = fl.abort_grad_max;
  if (fl.eval_every >= 1) opts.eval_every = fl.eval_every;
  if (fl.no_shuffle) opts.shuffle = false;
  fc.model.validate();

  const std::vector<Piece> corpus = load_corpus(fl.corpus);
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const Piece& p : corpus) ids.push_back(p.id);
  const DatasetSplit split = split_dataset(ids, g.seed);
  const SplitTensors data = embed_split(corpus, split);
  log_line(g, "split " + std::to_string(data.train.size()) + "/" +
                  std::to_string(data.val.size()) + "/" +
                  std::to_string(data.test.size()) + " train/val/test");

  const TrainResult result = train(fc.model, data.train, data.val, opts);

  const std::string out =
      g.out_path.empty() ? std::string("model.ckpt") : g.out_path;
  save_checkpoint(out, result.config, result.params);

  const std::string metrics_path =
      fl.metrics_path.empty() ? out + ".metrics.jsonl" : fl.metrics_path;
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw Error("cannot write '" + metrics_path + "'");
  for (const EpochReport& ep : result.history) {
    write_metrics_line(metrics, ep.epoch, "train", ep.train);
    if (ep.val.pieces > 0) write_metrics_line(metrics, ep.epoch, "val", ep.val);
  }
  const int last_epoch =
      result.history.empty() ? 0 : result.history.back().epoch;
  EvalReport test_report;
  if (!data.test.empty()) {
    test_report = evaluate(result.config, result.params, data.test);
    write_metrics_line(metrics, last_epoch, "test", test_report);
  }
  metrics.close();
  log_line(g, "checkpoint " + out + ", metrics " + metrics_path);

  json report;
  report["command"] = "train";
  report["checkpoint"] = out;
  report["metrics"] = metrics_path;
  report["model"] = json::parse(result.config.to_json());
  report["param_count"] = param_count(result.config);
  report["pieces"] = {{"train", data.train.size()},
                      {"val", data.val.size()},
                      {"test", data.test.size()}};
  report["epochs_run"] = result.steps > 0 ? last_epoch + 1 : 0;
  report["steps"] = result.steps;
  report["best_epoch"] = result.best_epoch;
  report["best_val_wbce"] = result.best_val_bce;
  if (!result.history.empty()) {
    report["final"] = {{"train", eval_to_json(result.history.back().train)}};
    if (result.history.back().val.pieces > 0)
      report["final"]["val"] = eval_to_json(result.history.back().val);
  }
  if (!data.test.empty()) report["test"] = eval_to_json(test_report);
  emit_report(g, report);
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalFlags {
  std::string checkpoint;
  std::string corpus;
  std::string split = "test";
};

int cmd_eval(const GlobalOpts& g, const EvalFlags& fl) {
  const CheckpointData ckpt = load_checkpoint(fl.checkpoint);
  const std::vector<Piece> corpus = load_corpus(fl.corpus);

  std::vector<PieceTensor> subset;
  if (fl.split == "all") {
    for (const Piece& p : corpus) subset.push_back(embed_piece(p));
  } else if (fl.split == "train" || fl.split == "val" || fl.split == "test") {
    std::vector<std::string> ids;
    for (const Piece& p : corpus) ids.push_back(p.id);
    SplitTensors data = embed_split(corpus, split_dataset(ids, g.seed));
    subset = fl.split == "train"  ? std::move(data.train)
             : fl.split == "val" ? std::move(data.val)
                                 : std::move(data.test);
  } else {
    throw ConfigError("unknown --split value '" + fl.split + "'");
  }
  const EvalReport r = evaluate(ckpt.config, ckpt.params, subset);

  json report;
  report["command"] = "eval";
  report["checkpoint"] = fl.checkpoint;
  report["split"] = fl.split;
  report["model"] = json::parse(ckpt.config.to_json());
  report["weighted_bce"] = r.weighted_bce;
  report["cosine_similarity"] = r.cosine_similarity;
  report["exact_accuracy"] = r.exact_accuracy;
  report["pieces"] = r.pieces;
  report["steps"] = r.steps;
  emit_report(g, report);
  return 0;
}

// --------------------------------------------------------------- predict

// Collapse equal consecutive chord columns back into (C, b, v) spans;
// all-zero columns are silence and produce no span.
std::vector<ChordSpan> columns_to_spans(const Mat& chords, double u) {
  std::vector<ChordSpan> spans;
  const auto column = [&](int t) {
    std::vector<int> pcs;
    for (int p = 0; p < 12; ++p)
      if (chords.at(p, t) > 0.5) pcs.push_back(p);
    return pcs;
  };
  int t = 0;
  while (t < chords.cols) {
    const std::vector<int> pcs = column(t);
    int end = t + 1;
    while (end < chords.cols && column(end) == pcs) ++end;
    if (!pcs.empty()) spans.push_back({pcs, t * u, (end - t) * u});
    t = end;
  }
  return spans;
}

struct PredictFlags {
  std::string checkpoint;
  std::string piece;
};

int cmd_predict(const GlobalOpts& g, const PredictFlags& fl) {
  const CheckpointData ckpt = load_checkpoint(fl.checkpoint);
  const Piece piece = piece_from_json(read_file(fl.piece));
  const PieceTensor tensor = embed_piece(piece);

  const Mat logits = predict_logits(ckpt.config, ckpt.params, tensor.melody);
  const Mat predicted = threshold(logits);

  Piece out_piece = piece;
  out_piece.chords = columns_to_spans(predicted, piece.u_beats);
  const std::string piece_json = piece_to_json(out_piece);
  if (!g.out_path.empty()) {
    write_file(g.out_path, piece_json + "\n");
    log_line(g, "wrote predicted piece to " + g.out_path);
  }

  json report;
  report["command"] = "predict";
  report["checkpoint"] = fl.checkpoint;
  report["id"] = piece.id;
  report["steps"] = tensor.steps();
  report["u_beats"] = piece.u_beats;
  report["chord_matrix"] = int_mat_to_json(predicted);
  report["piece"] = json::parse(piece_json);
  if (!tensor.chords.data.empty() && max_abs(tensor.chords) > 0.0) {
    report["reference"] = {
        {"cosine_similarity", cosine_similarity(predicted, tensor.chords)},
        {"exact_accuracy", exact_accuracy(predicted, tensor.chords)}};
  }
  emit_report(g, report);
  return 0;
}

// ------------------------------------------------------------- transform

struct TransformFlags {
  std::string piece;
  std::string g_name;
};

int cmd_transform(const GlobalOpts& g, const TransformFlags& fl) {
  const GroupElement el = parse_element(fl.g_name);
  const Piece piece = piece_from_json(read_file(fl.piece));
  const Piece transformed = transform_piece(piece, el);
  const std::string piece_json = piece_to_json(transformed);
  if (!g.out_path.empty()) {
    write_file(g.out_path, piece_json + "\n");
    log_line(g, "wrote transformed piece to " + g.out_path);
  }

  json report;
  report["command"] = "transform";
  report["g"] = to_string(el);
  report["id"] = piece.id;
  report["piece"] = json::parse(piece_json);
  emit_report(g, report);
  return 0;
}

// ----------------------------------------------------------------- audit

struct AuditFlags {
  std::string mode;
  std::string checkpoint;
  std::string piece;
  std::string kind = "music102";
  bool random_model = false;
  int steps = 16;
};

ModelConfig audit_config(const GlobalOpts& g, const AuditFlags& fl) {
  if (!g.config_path.empty()) return load_file_config(g.config_path).model;
  ModelConfig c = fl.kind == "music101" ? ModelConfig::music101_default()
                                        : ModelConfig::music102_default();
  if (fl.kind != "music101" && fl.kind != "music102")
    throw ConfigError("unknown --kind value '" + fl.kind + "'");
  if (fl.mode == "gradcheck") {
    // Finite differences visit every scalar twice; keep the default tiny.
    c.layers = 2;
    c.heads = 2;
    c.multiplicity = 4;
    c.d_model = 8;
  }
  return c;
}

int cmd_audit(const GlobalOpts& g, const AuditFlags& fl) {
  ModelConfig config;
  ParamSet params;
  bool random_model = fl.random_model || fl.checkpoint.empty();
  if (!fl.checkpoint.empty() && !fl.random_model) {
    CheckpointData ckpt = load_checkpoint(fl.checkpoint);
    config = ckpt.config;
    params = std::move(ckpt.params);
  } else {
    config = audit_config(g, fl);
    params = init_params(config, g.seed);
  }

  Piece piece;
  if (!fl.piece.empty())
    piece = piece_from_json(read_file(fl.piece));
  else
    piece = random_piece(g.seed + 1, fl.mode == "gradcheck" ? 6 : fl.steps,
                         kDefaultStep);
  const PieceTensor tensor = embed_piece(piece);

  json report;
  report["command"] = "audit";
  report["mode"] = fl.mode;
  report["model"] = json::parse(config.to_json());
  report["param_count"] = param_count(config);
  report["random_model"] = random_model;
  report["piece"] = piece.id;
  report["steps"] = tensor.steps();
  if (fl.mode == "equivariance") {
    const double residual = equivariance_residual(config, params, tensor.melody);
    report["max_residual"] = residual;
    report["equivariant"] = residual <= 1e-8;
  } else if (fl.mode == "gradcheck") {
    const GradcheckReport r = gradcheck(config, params, tensor);
    report["max_rel_err"] = r.max_rel_err;
    report["worst_param"] = r.worst_param;
    report["passes"] = r.max_rel_err <= 1e-4;
  } else {
    throw ConfigError("unknown --mode value '" + fl.mode + "'");
  }
  emit_report(g, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D12-equivariant chord accompaniment model"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed for init, shuffles, and splits");
  app.add_option("--config", g.config_path, "model/training config JSON file");
  app.add_option("--out", g.out_path, "output path (meaning depends on command)");
  app.add_flag("--quiet", g.quiet, "suppress progress logs on stderr");
  app.add_flag("--no-timestamp", g.no_timestamp,
               "omit the timestamp from the JSON report");

  CLI::App* irreps = app.add_subcommand(
      "irreps", "dump characters, multiplicities, and change-of-basis blocks");

  IngestOpts ingest_opts;
  CLI::App* ingest =
      app.add_subcommand("ingest", "align MIDI + annotations into corpus JSONL");
  ingest->add_option("--midi-dir", ingest_opts.midi_dir, "directory of .mid files")
      ->required();
  ingest->add_option("--chord-dir", ingest_opts.chord_dir,
                     "directory of chord annotation files")
      ->required();
  ingest->add_option("--beat-dir", ingest_opts.beat_dir,
                     "directory of beat grid files")
      ->required();
  ingest->add_option("--u", ingest_opts.u, "grid step in beats");
  ingest->add_option("--unknown-chords", ingest_opts.unknown_chords,
                     "skip | fail | root-triad");

  TrainFlags train_flags;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train on a corpus and write a checkpoint");
  train_cmd->add_option("--corpus", train_flags.corpus, "corpus JSONL file")
      ->required();
  train_cmd->add_option("--metrics", train_flags.metrics_path,
                        "metrics JSONL path (default: <out>.metrics.jsonl)");
  train_cmd->add_option("--epochs", train_flags.epochs, "training epochs");
  train_cmd->add_option("--max-steps", train_flags.max_steps,
                        "cap on optimizer steps");
  train_cmd->add_option("--lr", train_flags.lr, "Adam learning rate");
  train_cmd->add_option("--stop-at-accuracy", train_flags.stop_at_accuracy,
                        "stop once train accuracy reaches this");
  train_cmd->add_option("--abort-grad-max", train_flags.abort_grad_max,
                        "treat gradients above this as divergence");
  train_cmd->add_option("--eval-every", train_flags.eval_every,
                        "epochs between metric reports");
  train_cmd->add_flag("--no-shuffle", train_flags.no_shuffle,
                      "keep corpus order every epoch");

  EvalFlags eval_flags;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint file")
      ->required();
  eval_cmd->add_option("--corpus", eval_flags.corpus, "corpus JSONL file")
      ->required();
  eval_cmd->add_option("--split", eval_flags.split, "train | val | test | all");

  PredictFlags predict_flags;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "predict chord spans for one piece");
  predict_cmd
      ->add_option("--checkpoint", predict_flags.checkpoint, "checkpoint file")
      ->required();
  predict_cmd->add_option("--piece", predict_flags.piece, "piece JSON file")
      ->required();

  TransformFlags transform_flags;
  CLI::App* transform_cmd = app.add_subcommand(
      "transform", "apply a pitch-class symmetry to a piece");
  transform_cmd->add_option("--piece", transform_flags.piece, "piece JSON file")
      ->required();
  transform_cmd
      ->add_option("--g", transform_flags.g_name, "group element, e.g. T2 or T7R")
      ->required();

  AuditFlags audit_flags;
  CLI::App* audit_cmd = app.add_subcommand(
      "audit", "equivariance / gradient checks on a model");
  audit_cmd->add_option("--mode", audit_flags.mode, "equivariance | gradcheck")
      ->required();
  audit_cmd->add_option("--checkpoint", audit_flags.checkpoint,
                        "checkpoint file (omit for a random model)");
  audit_cmd->add_option("--piece", audit_flags.piece,
                        "piece JSON file (omit for a random piece)");
  audit_cmd->add_option("--kind", audit_flags.kind,
                        "music102 | music101 (random model only)");
  audit_cmd->add_flag("--random", audit_flags.random_model,
                      "force a random model even if --checkpoint is set");
  audit_cmd->add_option("--steps", audit_flags.steps,
                        "random piece length in grid steps");

  for (CLI::App* sub : {irreps, ingest, train_cmd, eval_cmd, predict_cmd,
                        transform_cmd, audit_cmd})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (irreps->parsed()) return cmd_irreps(g);
    if (ingest->parsed()) return cmd_ingest(g, ingest_opts);
    if (train_cmd->parsed()) return cmd_train(g, train_flags);
    if (eval_cmd->parsed()) return cmd_eval(g, eval_flags);
    if (predict_cmd->parsed()) return cmd_predict(g, predict_flags);
    if (transform_cmd->parsed()) return cmd_transform(g, transform_flags);
    if (audit_cmd->parsed()) return cmd_audit(g, audit_flags);
  } catch (const TrainDivergence& e) {
    json err;
    err["command"] = command;
    err["error"] = e.what();
    err["kind"] = "divergence";
    err["step"] = e.step;
    err["grad_max"] = e.grad_max;
    std::cout << err.dump(2) << "\n";
    return 2;
  } catch (const Error& e) {
    json err;
    err["command"] = command;
    err["error"] = e.what();
    err["kind"] = "validation";
    std::cout << err.dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["command"] = command;
    err["error"] = e.what();
    err["kind"] = "runtime";
    std::cout << err.dump(2) << "\n";
    return 2;
  }
  return 0;
}
