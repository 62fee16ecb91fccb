#include "music102/align.hpp"

#include <algorithm>
#include <cmath>

#include "music102/errors.hpp"

namespace music102 {

double seconds_to_beats(double seconds, const BeatGrid& grid) {
  const std::vector<double>& t = grid.beat_times_seconds;
  if (t.size() < 2) throw AlignmentError("beat grid needs at least two beats");
  size_t hi = std::upper_bound(t.begin(), t.end(), seconds) - t.begin();
  // Clamp to the edge segments; they also serve as extrapolation tempo.
  hi = std::min(std::max(hi, size_t{1}), t.size() - 1);
  const size_t lo = hi - 1;
  return lo + (seconds - t[lo]) / (t[hi] - t[lo]);
}

double snap_to_grid(double beats, double u) {
  return std::floor(beats / u + 0.5) * u;
}

AlignResult align_to_grid(const std::string& id, const SmfFile& midi,
                          const std::vector<AnnotationRow>& chords,
                          const BeatGrid& grid, const AlignOptions& opts) {
  if (midi.tracks.empty()) throw AlignmentError("midi file has no tracks");
  if (!(opts.u > 0.0)) throw AlignmentError("non-positive grid step");

  AlignResult result;
  result.piece.id = id;
  result.piece.u_beats = opts.u;

  const SmfTrack* melody = &midi.tracks[0];
  bool named = false;
  for (const SmfTrack& track : midi.tracks)
    if (track.name == "MELODY") {
      melody = &track;
      named = true;
      break;
    }
  if (!named && midi.tracks.size() > 1)
    result.warnings.push_back(
        {"melody_track_fallback", "no track named MELODY; using track 0"});

  const std::vector<TempoChange> tempo = collect_tempo(midi);
  for (const TickNote& note : collect_notes(*melody)) {
    const double on =
        seconds_to_beats(tick_to_seconds(note.onset_tick, tempo, midi.division), grid);
    const double off = seconds_to_beats(
        tick_to_seconds(note.onset_tick + note.duration_ticks, tempo, midi.division),
        grid);
    if (off <= 0.0 || off <= on) {
      result.warnings.push_back(
          {"dropped_note", "key " + std::to_string(note.key) +
                               " has no positive extent on the beat grid"});
      continue;
    }
    const double start = std::max(on, 0.0);
    if (on < -1e-9)
      result.warnings.push_back(
          {"clipped_note", "key " + std::to_string(note.key) +
                               " begins before the first beat; clipped"});
    result.piece.melody.push_back(Note{note.key, start, off - start});
  }
  std::sort(result.piece.melody.begin(), result.piece.melody.end(),
            [](const Note& a, const Note& b) {
              return a.onset_beats != b.onset_beats ? a.onset_beats < b.onset_beats
                                                    : a.pitch < b.pitch;
            });

  for (const AnnotationRow& row : chords) {
    std::vector<int> pcs;
    const bool known = chord_pitch_classes(
        row.symbol, pcs, opts.unknown_chords == UnknownChordPolicy::RootTriad);
    if (!known) {
      if (opts.unknown_chords == UnknownChordPolicy::Fail)
        throw ParseError("unknown chord symbol '" + row.symbol + "'");
      result.warnings.push_back({"unknown_chord", row.symbol});
      continue;
    }
    if (pcs.empty()) continue;  // "N": silence is the absence of a span

    double start = snap_to_grid(seconds_to_beats(row.start_seconds, grid), opts.u);
    double end = snap_to_grid(seconds_to_beats(row.end_seconds, grid), opts.u);
    start = std::max(start, 0.0);
    if (end <= start) {
      result.warnings.push_back(
          {"dropped_chord", row.symbol + " shorter than one grid step"});
      continue;
    }
    while (!result.piece.chords.empty()) {  // repair overlaps, earlier loses
      ChordSpan& prev = result.piece.chords.back();
      if (start >= prev.offset_beats()) break;
      result.warnings.push_back(
          {"chord_overlap", "truncating the span before " + row.symbol});
      prev.value_beats = start - prev.onset_beats;
      if (prev.value_beats > 0.0) break;
      result.piece.chords.pop_back();
    }
    result.piece.chords.push_back(ChordSpan{std::move(pcs), start, end - start});
  }

  validate_piece(result.piece);
  return result;
}

}  // namespace music102
