#pragma once
#include <string>
#include <vector>

#include "music102/annotations.hpp"
#include "music102/piece.hpp"
#include "music102/smf.hpp"

namespace music102 {

// Piecewise-linear map through (beat_times[i] -> beat i); the edge segments'
// tempo extends beyond the grid, so early/late events keep a defined beat.
double seconds_to_beats(double seconds, const BeatGrid& grid);

// Nearest multiple of u, ties rounding up.
double snap_to_grid(double beats, double u);

enum class UnknownChordPolicy { Skip, Fail, RootTriad };

struct AlignOptions {
  double u = kDefaultStep;
  UnknownChordPolicy unknown_chords = UnknownChordPolicy::Skip;
};

struct AlignWarning {
  std::string kind;  // "dropped_note", "unknown_chord", "chord_overlap", ...
  std::string detail;
};

struct AlignResult {
  Piece piece;
  std::vector<AlignWarning> warnings;
};

// Melody from the track named MELODY (track 0 when absent), chords from
// annotation rows. Notes keep fractional beats; chord boundaries snap to the
// u grid, and snap-induced overlaps truncate the earlier span. Unusable
// events are dropped with a warning instead of failing the piece.
AlignResult align_to_grid(const std::string& id, const SmfFile& midi,
                          const std::vector<AnnotationRow>& chords,
                          const BeatGrid& grid, const AlignOptions& opts = {});

}  // namespace music102
