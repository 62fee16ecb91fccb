#include <cstdint>
#include <initializer_list>
#include <vector>

#include "doctest.h"
#include "music102/errors.hpp"
#include "music102/smf.hpp"

using namespace music102;

namespace {
std::vector<uint8_t> bytes(std::initializer_list<int> xs) {
  std::vector<uint8_t> v;
  for (int x : xs) v.push_back(static_cast<uint8_t>(x));
  return v;
}

std::vector<uint8_t> cat(std::vector<uint8_t> a, const std::vector<uint8_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// MThd with the given format/track-count and 480 ticks per quarter.
std::vector<uint8_t> header(int format, int ntrks) {
  return bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, format, 0, ntrks, 0x01, 0xE0});
}

std::vector<uint8_t> track_chunk(const std::vector<uint8_t>& body) {
  std::vector<uint8_t> out = bytes({'M', 'T', 'r', 'k'});
  out.push_back(static_cast<uint8_t>(body.size() >> 24));
  out.push_back(static_cast<uint8_t>(body.size() >> 16));
  out.push_back(static_cast<uint8_t>(body.size() >> 8));
  out.push_back(static_cast<uint8_t>(body.size()));
  return cat(out, body);
}
}  // namespace

TEST_CASE("variable-length quantities decode and round-trip") {
  const std::vector<uint8_t> two = bytes({0x81, 0x48});
  size_t pos = 0;
  CHECK(decode_vlq(two, pos) == 200);  // (0x01 << 7) | 0x48
  CHECK(pos == 2);

  for (uint32_t v : {0u, 1u, 127u, 128u, 16383u, 16384u, 0x0fffffffu}) {
    std::vector<uint8_t> enc;
    encode_vlq(v, enc);
    CHECK(enc.size() <= 4);
    size_t p = 0;
    CHECK(decode_vlq(enc, p) == v);
    CHECK(p == enc.size());
  }

  pos = 0;
  const std::vector<uint8_t> cut = bytes({0x81});
  CHECK_THROWS_AS(decode_vlq(cut, pos), ParseError);
  pos = 0;
  const std::vector<uint8_t> runaway = bytes({0x81, 0x81, 0x81, 0x81, 0x01});
  CHECK_THROWS_AS(decode_vlq(runaway, pos), ParseError);
}

TEST_CASE("a minimal format-0 file parses into one note pair") {
  const std::vector<uint8_t> body = bytes({
      0x00, 0x90, 0x3C, 0x64,        // tick 0: note-on C4 velocity 100
      0x83, 0x60, 0x80, 0x3C, 0x00,  // tick 480: note-off C4
      0x00, 0xFF, 0x2F, 0x00,        // end of track
  });
  const SmfFile f = parse_smf(cat(header(0, 1), track_chunk(body)));
  CHECK(f.format == 0);
  CHECK(f.division == 480);
  REQUIRE(f.tracks.size() == 1);
  REQUIRE(f.tracks[0].events.size() == 3);
  CHECK(f.tracks[0].events[0].kind == SmfEventKind::NoteOn);
  CHECK(f.tracks[0].events[0].tick == 0);
  CHECK(f.tracks[0].events[0].data[0] == 0x3C);
  CHECK(f.tracks[0].events[1].kind == SmfEventKind::NoteOff);
  CHECK(f.tracks[0].events[1].tick == 480);
  CHECK(f.tracks[0].events[2].kind == SmfEventKind::EndOfTrack);

  const std::vector<TickNote> notes = collect_notes(f.tracks[0]);
  REQUIRE(notes.size() == 1);
  CHECK(notes[0] == TickNote{0, 480, 60});
}

TEST_CASE("running status and velocity-zero note-offs") {
  const std::vector<uint8_t> body = bytes({
      0x00, 0x90, 0x3C, 0x64,  // note-on C4
      0x00, 0x3E, 0x64,        // running status: note-on D4
      0x83, 0x60, 0x3C, 0x00,  // tick 480, velocity 0 -> note-off C4
      0x00, 0x3E, 0x00,        // note-off D4
      0x00, 0xFF, 0x2F, 0x00,
  });
  const SmfFile f = parse_smf(cat(header(0, 1), track_chunk(body)));
  REQUIRE(f.tracks.size() == 1);
  const std::vector<SmfEvent>& ev = f.tracks[0].events;
  REQUIRE(ev.size() == 5);
  CHECK(ev[0].kind == SmfEventKind::NoteOn);
  CHECK(ev[1].kind == SmfEventKind::NoteOn);
  CHECK(ev[1].data[0] == 0x3E);
  CHECK(ev[2].kind == SmfEventKind::NoteOff);  // velocity 0 is an off
  CHECK(ev[3].kind == SmfEventKind::NoteOff);

  const std::vector<TickNote> notes = collect_notes(f.tracks[0]);
  REQUIRE(notes.size() == 2);
  CHECK(notes[0] == TickNote{0, 480, 60});
  CHECK(notes[1] == TickNote{0, 480, 62});
}

TEST_CASE("malformed files raise ParseError with a byte offset") {
  const auto garbage = bytes({'X', 'T', 'h', 'd', 0, 0, 0, 6});
  try {
    parse_smf(garbage);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset == 0);
  }

  CHECK_THROWS_AS(parse_smf(bytes({'M', 'T', 'h'})), ParseError);       // cut header
  CHECK_THROWS_AS(parse_smf(header(2, 1)), ParseError);                 // format 2
  CHECK_THROWS_AS(parse_smf(header(0, 2)), ParseError);                 // bad count
  CHECK_THROWS_AS(
      parse_smf(bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0xE7, 0x28})),
      ParseError);  // SMPTE division

  // Declared track length shorter than its events.
  const auto short_track =
      cat(header(0, 1), bytes({'M', 'T', 'r', 'k', 0, 0, 0, 2,  //
                               0x00, 0x90, 0x3C, 0x64}));
  CHECK_THROWS_AS(parse_smf(short_track), ParseError);

  // A truncated VLQ delta inside a track.
  const auto cut_vlq = cat(header(0, 1), bytes({'M', 'T', 'r', 'k', 0, 0, 0, 1, 0x81}));
  CHECK_THROWS_AS(parse_smf(cut_vlq), ParseError);

  // A data byte with nothing to run on.
  const auto orphan = cat(header(0, 1), bytes({'M', 'T', 'r', 'k', 0, 0, 0, 3,  //
                                               0x00, 0x3C, 0x64}));
  CHECK_THROWS_AS(parse_smf(orphan), ParseError);
}

TEST_CASE("unknown chunks are skipped, unknown metas ignored") {
  const std::vector<uint8_t> body = bytes({
      0x00, 0xFF, 0x7F, 0x02, 0xAB, 0xCD,  // sequencer-specific meta: ignored
      0x00, 0xF0, 0x02, 0x01, 0x02,        // sysex: ignored, cancels running
      0x00, 0x90, 0x3C, 0x64,              //
      0x60, 0x80, 0x3C, 0x00,              //
      0x00, 0xFF, 0x2F, 0x00,
  });
  const auto alien = bytes({'X', 'F', 'I', 't', 0, 0, 0, 2, 0x55, 0xAA});
  const SmfFile f = parse_smf(cat(cat(header(0, 1), alien), track_chunk(body)));
  REQUIRE(f.tracks.size() == 1);
  CHECK(collect_notes(f.tracks[0]).size() == 1);
}

TEST_CASE("serializer round-trips through the parser") {
  SmfFile f;
  f.format = 1;
  f.division = 240;
  SmfTrack meta;
  meta.name = "CONTROL";
  meta.events = {
      {0, SmfEventKind::Tempo, 0, {0x07, 0xA1, 0x20}},           // 500000
      {0, SmfEventKind::TimeSignature, 0, {4, 2, 24, 8}},        //
      {960, SmfEventKind::Tempo, 0, {0x03, 0xD0, 0x90}},         // 250000
      {960, SmfEventKind::EndOfTrack, 0, {}},
  };
  SmfTrack melody;
  melody.name = "MELODY";
  melody.events = {
      {0, SmfEventKind::NoteOn, 0, {60, 100}},
      {240, SmfEventKind::NoteOff, 0, {60, 0}},
      {240, SmfEventKind::NoteOn, 1, {64, 90}},
      {720, SmfEventKind::NoteOff, 1, {64, 0}},
      {720, SmfEventKind::EndOfTrack, 0, {}},
  };
  f.tracks = {meta, melody};

  const SmfFile g = parse_smf(serialize_smf(f));
  CHECK(g == f);
}

TEST_CASE("tempo map converts ticks to seconds piecewise") {
  SmfFile f;
  f.division = 480;
  f.tracks.emplace_back();

  // No tempo events: the 500000 us/quarter default applies from tick 0.
  std::vector<TempoChange> tempo = collect_tempo(f);
  REQUIRE(tempo.size() == 1);
  CHECK(tempo[0].tick == 0);
  CHECK(tempo[0].us_per_quarter == 500000);
  CHECK(tick_to_seconds(480, tempo, 480) == doctest::Approx(0.5));

  // A change to 250000 at tick 480 halves the tail's length.
  f.tracks[0].events = {
      {480, SmfEventKind::Tempo, 0, {0x03, 0xD0, 0x90}},
  };
  tempo = collect_tempo(f);
  REQUIRE(tempo.size() == 2);  // implicit default precedes the change
  CHECK(tick_to_seconds(960, tempo, 480) == doctest::Approx(0.75));
  CHECK(tick_to_seconds(240, tempo, 480) == doctest::Approx(0.25));
}

TEST_CASE("note pairing is oldest-first and closes dangling notes") {
  SmfTrack t;
  t.events = {
      {0, SmfEventKind::NoteOn, 0, {60, 80}},
      {10, SmfEventKind::NoteOn, 0, {60, 80}},
      {20, SmfEventKind::NoteOff, 0, {60, 0}},
      {30, SmfEventKind::NoteOff, 0, {60, 0}},
      {40, SmfEventKind::NoteOn, 0, {72, 80}},  // never released
      {200, SmfEventKind::EndOfTrack, 0, {}},
  };
  const std::vector<TickNote> notes = collect_notes(t);
  REQUIRE(notes.size() == 3);
  CHECK(notes[0] == TickNote{0, 20, 60});
  CHECK(notes[1] == TickNote{10, 20, 60});
  CHECK(notes[2] == TickNote{40, 160, 72});  // closed at the last tick
}
