#pragma once
#include <string>
#include <vector>

#include "music102/group.hpp"
#include "music102/mat.hpp"

namespace music102 {

// Beats-per-step of the analysis grid: two steps per quarter-note beat.
inline constexpr double kDefaultStep = 0.5;

struct Note {
  int pitch = 0;             // MIDI number 0..127; only pitch % 12 matters
  double onset_beats = 0.0;  // b
  double value_beats = 0.0;  // v, the duration

  bool operator==(const Note&) const = default;
};

struct ChordSpan {
  std::vector<int> pitch_classes;  // sorted, unique, 0..11; empty = silence
  double onset_beats = 0.0;
  double value_beats = 0.0;

  double offset_beats() const { return onset_beats + value_beats; }
  bool operator==(const ChordSpan&) const = default;
};

// A piece in symbolic beat time: the melody line plus chord annotations,
// tagged with the grid resolution it was aligned to.
struct Piece {
  std::string id;
  double u_beats = kDefaultStep;
  std::vector<Note> melody;
  std::vector<ChordSpan> chords;
};

// Fixed-grid embedding of one piece. Column t covers beats [t*u, (t+1)*u).
struct PieceTensor {
  std::string id;
  Mat melody;                    // 12 x T in [0,1], per-step sounding fraction
  Mat chords;                    // 12 x T, chord membership indicators
  std::vector<double> weights;   // per-step loss weights (2 on chord changes)

  int steps() const { return melody.cols; }
};

// Throws Error on malformed data (non-positive values, bad pitch classes,
// non-positive grid).
void validate_piece(const Piece& piece);

int step_count(const Piece& piece, double u = kDefaultStep);

// Entry (p, t) is the fraction of step t during which pitch class p sounds;
// simultaneous notes in one class sum, then clip at 1.
Mat embed_melody(const Piece& piece, int steps, double u = kDefaultStep);

// One chord per step. Span boundaries must sit on the u grid and spans must
// not overlap; violations raise AlignmentError carrying the offending span.
// Steps no span covers stay all-zero.
Mat embed_chords(const Piece& piece, int steps, double u = kDefaultStep);

// Weight 2 on steps where the chord column differs from its predecessor
// (and on step 0), weight 1 elsewhere.
std::vector<double> loss_weights(const Mat& chords);

// Embeds on the piece's own grid (u_beats).
PieceTensor embed_piece(const Piece& piece);

// Apply a pitch-class symmetry to the symbolic piece (octaves preserved).
Piece transform_piece(const Piece& piece, GroupElement g);

// Same action on an embedded tensor: left-multiply both 12 x T matrices by
// the permutation matrix of g. Weights are untouched (chord-change steps are
// preserved by any permutation).
PieceTensor transform_tensor(const PieceTensor& tensor, GroupElement g);

std::string piece_to_json(const Piece& piece);
Piece piece_from_json(const std::string& text);

}  // namespace music102
