#pragma once
#include <string>
#include <vector>

namespace music102 {

struct AnnotationRow {
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  std::string symbol;  // e.g. "C:maj", "A:min7", "N"

  bool operator==(const AnnotationRow&) const = default;
};

// Parses whitespace-separated "start end symbol" lines (blank lines allowed).
// Rows must be well-formed (start < end), sorted, and non-overlapping;
// violations and unparseable numbers throw ParseError with the byte offset
// of the offending line.
std::vector<AnnotationRow> parse_chord_annotation(const std::string& text);

// Chord symbol -> sorted pitch-class set. "N" means no chord (empty set);
// a "/bass" suffix is ignored. Returns false when the quality is unknown
// (callers pick a policy); when `root_triad_fallback` is set an unknown
// quality degrades to the root major triad instead.
bool chord_pitch_classes(const std::string& symbol, std::vector<int>& out,
                         bool root_triad_fallback = false);

struct BeatGrid {
  std::vector<double> beat_times_seconds;  // strictly increasing, >= 2 entries
};

// One beat time per line (first field; extra fields ignored). Throws
// ParseError when times are not strictly increasing or fewer than two.
BeatGrid parse_beat_grid(const std::string& text);

}  // namespace music102
