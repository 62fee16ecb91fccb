#include "music102/piece.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "music102/errors.hpp"

namespace music102 {

using nlohmann::json;

namespace {

std::string span_text(const ChordSpan& span) {
  std::string s = "[" + std::to_string(span.onset_beats) + ", " +
                  std::to_string(span.offset_beats()) + ") {";
  for (size_t i = 0; i < span.pitch_classes.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(span.pitch_classes[i]);
  }
  return s + "}";
}

bool on_grid(double beats, double u) {
  const double k = beats / u;
  return std::fabs(k - std::round(k)) <= 1e-6;
}

}  // namespace

void validate_piece(const Piece& piece) {
  if (piece.u_beats <= 0.0)
    throw Error("piece '" + piece.id + "': non-positive grid step");
  for (const Note& n : piece.melody) {
    if (n.value_beats <= 0.0)
      throw Error("piece '" + piece.id + "': note with non-positive value");
    if (n.onset_beats < 0.0)
      throw Error("piece '" + piece.id + "': note with negative onset");
    if (n.pitch < 0 || n.pitch > 127)
      throw Error("piece '" + piece.id + "': midi pitch out of range");
  }
  for (const ChordSpan& c : piece.chords) {
    if (c.value_beats <= 0.0)
      throw Error("piece '" + piece.id + "': chord span with non-positive value");
    if (c.onset_beats < 0.0)
      throw Error("piece '" + piece.id + "': chord span with negative onset");
    for (int pc : c.pitch_classes)
      if (pc < 0 || pc > 11)
        throw Error("piece '" + piece.id + "': chord pitch class out of range");
  }
}

int step_count(const Piece& piece, double u) {
  double end = 0.0;
  for (const Note& n : piece.melody)
    end = std::max(end, n.onset_beats + n.value_beats);
  for (const ChordSpan& c : piece.chords) end = std::max(end, c.offset_beats());
  // Tiny overhangs from float snapping should not spawn an extra step.
  const int steps = static_cast<int>(std::ceil(end / u - 1e-9));
  return std::max(steps, 1);
}

Mat embed_melody(const Piece& piece, int steps, double u) {
  Mat m(12, steps);
  for (const Note& n : piece.melody) {
    const int pc = ((n.pitch % 12) + 12) % 12;
    const double a = n.onset_beats;
    const double b = n.onset_beats + n.value_beats;
    if (b <= a) continue;
    const int t0 = std::max(0, static_cast<int>(std::floor(a / u)));
    const int t1 = std::min(steps - 1, static_cast<int>(std::ceil(b / u)) - 1);
    for (int t = t0; t <= t1; ++t) {
      const double lo = std::max(a, t * u);
      const double hi = std::min(b, (t + 1) * u);
      if (hi > lo) m.at(pc, t) += (hi - lo) / u;
    }
  }
  // Concurrent notes in one pitch class can push a cell past 1; clip back
  // into the documented codomain.
  for (double& x : m.data) x = std::min(x, 1.0);
  return m;
}

Mat embed_chords(const Piece& piece, int steps, double u) {
  Mat c(12, steps);
  std::vector<int> owner(steps, -1);
  for (size_t s = 0; s < piece.chords.size(); ++s) {
    const ChordSpan& span = piece.chords[s];
    if (!on_grid(span.onset_beats, u) || !on_grid(span.offset_beats(), u))
      throw AlignmentError("piece '" + piece.id + "': chord span " +
                               span_text(span) + " is off the " +
                               std::to_string(u) + "-beat grid",
                           span.onset_beats, span.value_beats);
    for (int t = 0; t < steps; ++t) {
      const double mid = (t + 0.5) * u;
      if (mid < span.onset_beats || mid >= span.offset_beats()) continue;
      if (owner[t] >= 0)
        throw AlignmentError("piece '" + piece.id + "': chord spans " +
                                 span_text(piece.chords[owner[t]]) + " and " +
                                 span_text(span) + " both cover step " +
                                 std::to_string(t),
                             span.onset_beats, span.value_beats);
      owner[t] = static_cast<int>(s);
      for (int pc : span.pitch_classes) c.at(pc, t) = 1.0;
    }
  }
  return c;
}

std::vector<double> loss_weights(const Mat& chords) {
  const int steps = chords.cols;
  std::vector<double> w(steps, 1.0);
  for (int t = 0; t < steps; ++t) {
    bool change = (t == 0);
    if (t > 0)
      for (int p = 0; p < 12 && !change; ++p)
        change = chords.at(p, t) != chords.at(p, t - 1);
    if (change) w[t] = 2.0;
  }
  return w;
}

PieceTensor embed_piece(const Piece& piece) {
  validate_piece(piece);
  const double u = piece.u_beats;
  const int steps = step_count(piece, u);
  PieceTensor out;
  out.id = piece.id;
  out.melody = embed_melody(piece, steps, u);
  out.chords = embed_chords(piece, steps, u);
  out.weights = loss_weights(out.chords);
  return out;
}

Piece transform_piece(const Piece& piece, GroupElement g) {
  Piece out = piece;
  for (Note& n : out.melody) {
    const int pc = ((n.pitch % 12) + 12) % 12;
    const int octave = (n.pitch - pc) / 12;
    int p = octave * 12 + act_pitch_class(g, pc);
    // Reflection can push extreme registers past the MIDI range; fold back.
    while (p > 127) p -= 12;
    while (p < 0) p += 12;
    n.pitch = p;
  }
  for (ChordSpan& c : out.chords) {
    for (int& pc : c.pitch_classes) pc = act_pitch_class(g, pc);
    std::sort(c.pitch_classes.begin(), c.pitch_classes.end());
  }
  return out;
}

PieceTensor transform_tensor(const PieceTensor& tensor, GroupElement g) {
  PieceTensor out;
  out.id = tensor.id;
  const Mat p = perm_matrix(g);
  out.melody = matmul(p, tensor.melody);
  out.chords = matmul(p, tensor.chords);
  out.weights = tensor.weights;
  return out;
}

std::string piece_to_json(const Piece& piece) {
  json j;
  j["id"] = piece.id;
  j["u_beats"] = piece.u_beats;
  j["melody_notes"] = json::array();
  for (const Note& n : piece.melody)
    j["melody_notes"].push_back({{"pitch", n.pitch},
                                 {"onset_beats", n.onset_beats},
                                 {"value_beats", n.value_beats}});
  j["chords"] = json::array();
  for (const ChordSpan& c : piece.chords)
    j["chords"].push_back({{"pitch_classes", c.pitch_classes},
                           {"onset_beats", c.onset_beats},
                           {"value_beats", c.value_beats}});
  return j.dump();
}

Piece piece_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("piece_from_json: ") + e.what());
  }
  try {
    Piece p;
    p.id = j.value("id", "");
    p.u_beats = j.value("u_beats", kDefaultStep);
    for (const json& jn : j.value("melody_notes", json::array()))
      p.melody.push_back(Note{jn.at("pitch").get<int>(),
                              jn.at("onset_beats").get<double>(),
                              jn.at("value_beats").get<double>()});
    for (const json& jc : j.value("chords", json::array())) {
      ChordSpan c;
      c.pitch_classes = jc.at("pitch_classes").get<std::vector<int>>();
      c.onset_beats = jc.at("onset_beats").get<double>();
      c.value_beats = jc.at("value_beats").get<double>();
      p.chords.push_back(std::move(c));
    }
    validate_piece(p);
    return p;
  } catch (const json::exception& e) {
    throw Error(std::string("piece_from_json: ") + e.what());
  }
}

}  // namespace music102
