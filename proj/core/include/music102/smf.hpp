#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace music102 {

// Variable-length quantity codec (MIDI delta times). decode advances `pos`
// and throws ParseError on truncation or quantities longer than four bytes.
uint32_t decode_vlq(const std::vector<uint8_t>& bytes, size_t& pos);
void encode_vlq(uint32_t value, std::vector<uint8_t>& out);

enum class SmfEventKind { NoteOn, NoteOff, Tempo, TimeSignature, EndOfTrack };

struct SmfEvent {
  uint32_t tick = 0;  // absolute, deltas already accumulated
  SmfEventKind kind = SmfEventKind::EndOfTrack;
  uint8_t channel = 0;        // note events only
  std::vector<uint8_t> data;  // notes: {key, velocity}; tempo: 3 bytes big
                              // endian us/quarter; time signature: 4 bytes

  bool operator==(const SmfEvent&) const = default;
};

struct SmfTrack {
  std::string name;  // meta 0x03, empty when absent
  std::vector<SmfEvent> events;

  bool operator==(const SmfTrack&) const = default;
};

struct SmfFile {
  int format = 0;      // 0 or 1
  int division = 480;  // ticks per quarter note
  std::vector<SmfTrack> tracks;

  bool operator==(const SmfFile&) const = default;
};

// Standard MIDI file reader: formats 0/1, running status, note-on velocity 0
// normalized to note-off. Unknown channel messages and sysex are consumed and
// dropped; unknown chunks are skipped. Throws ParseError (with byte offset)
// on malformed input. SMPTE divisions and format 2 are out of scope.
SmfFile parse_smf(const std::vector<uint8_t>& bytes);

// Writer for fixtures and round-trip checks: explicit status bytes, a track
// name meta when set, and a closing end-of-track if the events lack one.
std::vector<uint8_t> serialize_smf(const SmfFile& file);

struct TickNote {
  uint32_t onset_tick = 0;
  uint32_t duration_ticks = 0;
  int key = 0;

  bool operator==(const TickNote&) const = default;
};

// Pairs note-ons with note-offs (oldest first per channel/key). Notes still
// sounding at the end of the track are closed at its last event tick.
std::vector<TickNote> collect_notes(const SmfTrack& track);

struct TempoChange {
  uint32_t tick = 0;
  uint32_t us_per_quarter = 500000;
};

// Tempo events from all tracks, sorted, guaranteed to start at tick 0 (the
// SMF default 500000 us per quarter fills in when the file says nothing).
std::vector<TempoChange> collect_tempo(const SmfFile& file);

double tick_to_seconds(uint32_t tick, const std::vector<TempoChange>& tempo,
                       int division);

}  // namespace music102
