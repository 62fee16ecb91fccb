#include "music102/smf.hpp"

#include <algorithm>

#include "music102/errors.hpp"

namespace music102 {

uint32_t decode_vlq(const std::vector<uint8_t>& bytes, size_t& pos) {
  uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= bytes.size())
      throw ParseError("truncated variable-length quantity", pos);
    const uint8_t b = bytes[pos++];
    value = (value << 7) | (b & 0x7f);
    if (!(b & 0x80)) return value;
  }
  throw ParseError("variable-length quantity longer than 4 bytes", pos);
}

void encode_vlq(uint32_t value, std::vector<uint8_t>& out) {
  uint8_t stack[4];
  int n = 0;
  do {
    stack[n++] = value & 0x7f;
    value >>= 7;
  } while (value);
  while (n--) out.push_back(static_cast<uint8_t>(stack[n] | (n ? 0x80 : 0)));
}

namespace {

struct Cursor {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  uint8_t u8() {
    if (pos >= bytes.size()) throw ParseError("unexpected end of file", pos);
    return bytes[pos++];
  }
  uint16_t u16() { return static_cast<uint16_t>(u8() << 8 | u8()); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | u8();
    return v;
  }
  bool tag_is(const char* tag) {
    if (pos + 4 > bytes.size())
      throw ParseError("unexpected end of file in chunk tag", pos);
    for (int i = 0; i < 4; ++i)
      if (bytes[pos + i] != static_cast<uint8_t>(tag[i])) return false;
    pos += 4;
    return true;
  }
  void skip(size_t n) {
    if (pos + n > bytes.size())
      throw ParseError("chunk runs past the end of the file", pos);
    pos += n;
  }
};

// How many data bytes each channel-message status expects.
int channel_data_bytes(uint8_t status) {
  switch (status & 0xf0) {
    case 0x80:
    case 0x90:
    case 0xa0:
    case 0xb0:
    case 0xe0:
      return 2;
    case 0xc0:
    case 0xd0:
      return 1;
    default:
      return -1;
  }
}

SmfTrack parse_track(Cursor& c, size_t length) {
  const size_t end = c.pos + length;
  if (end > c.bytes.size())
    throw ParseError("track chunk runs past the end of the file", c.pos);
  SmfTrack track;
  uint32_t tick = 0;
  int running = -1;
  while (c.pos < end) {
    tick += decode_vlq(c.bytes, c.pos);
    const size_t at = c.pos;
    uint8_t status = c.u8();
    if (status < 0x80) {  // running status reuses the previous status byte
      if (running < 0)
        throw ParseError("data byte with no status to run on", at);
      status = static_cast<uint8_t>(running);
      --c.pos;
    }
    if (status == 0xff) {
      running = -1;
      const uint8_t type = c.u8();
      const uint32_t len = decode_vlq(c.bytes, c.pos);
      const size_t payload = c.pos;
      c.skip(len);
      SmfEvent e;
      e.tick = tick;
      switch (type) {
        case 0x51:
          if (len != 3) throw ParseError("tempo meta with bad length", payload);
          e.kind = SmfEventKind::Tempo;
          e.data.assign(c.bytes.begin() + payload, c.bytes.begin() + payload + 3);
          track.events.push_back(std::move(e));
          break;
        case 0x58:
          if (len != 4)
            throw ParseError("time-signature meta with bad length", payload);
          e.kind = SmfEventKind::TimeSignature;
          e.data.assign(c.bytes.begin() + payload, c.bytes.begin() + payload + 4);
          track.events.push_back(std::move(e));
          break;
        case 0x2f:
          if (len != 0)
            throw ParseError("end-of-track meta with payload", payload);
          e.kind = SmfEventKind::EndOfTrack;
          track.events.push_back(std::move(e));
          break;
        case 0x03:
          track.name.assign(c.bytes.begin() + payload,
                            c.bytes.begin() + payload + len);
          break;
        default:
          break;  // other metas are legal and ignored
      }
    } else if (status == 0xf0 || status == 0xf7) {
      running = -1;
      const uint32_t len = decode_vlq(c.bytes, c.pos);
      c.skip(len);
    } else {
      const int need = channel_data_bytes(status);
      if (need < 0) throw ParseError("unknown status byte", at);
      running = status;
      uint8_t d[2] = {0, 0};
      for (int i = 0; i < need; ++i) {
        const size_t dp = c.pos;
        d[i] = c.u8();
        if (d[i] & 0x80)
          throw ParseError("data byte with the high bit set", dp);
      }
      const uint8_t kind = status & 0xf0;
      if (kind == 0x90 || kind == 0x80) {
        SmfEvent e;
        e.tick = tick;
        e.channel = status & 0x0f;
        e.kind = (kind == 0x80 || d[1] == 0) ? SmfEventKind::NoteOff
                                             : SmfEventKind::NoteOn;
        e.data = {d[0], d[1]};
        track.events.push_back(std::move(e));
      }
      // other channel messages are consumed and dropped
    }
  }
  if (c.pos != end)
    throw ParseError("event data overruns the declared track length", c.pos);
  return track;
}

}  // namespace

SmfFile parse_smf(const std::vector<uint8_t>& bytes) {
  Cursor c{bytes};
  if (!c.tag_is("MThd")) throw ParseError("missing MThd header", 0);
  const uint32_t header_len = c.u32();
  if (header_len < 6) throw ParseError("header chunk too short", c.pos);
  SmfFile file;
  file.format = c.u16();
  const int declared_tracks = c.u16();
  const uint16_t division = c.u16();
  c.skip(header_len - 6);
  if (file.format != 0 && file.format != 1)
    throw ParseError("unsupported format " + std::to_string(file.format), 8);
  if (division & 0x8000)
    throw ParseError("SMPTE divisions are unsupported", 12);
  if (division == 0) throw ParseError("zero ticks per quarter", 12);
  file.division = division;
  if (file.format == 0 && declared_tracks != 1)
    throw ParseError("format 0 must declare exactly one track", 10);

  while (static_cast<int>(file.tracks.size()) < declared_tracks) {
    const size_t at = c.pos;
    if (c.tag_is("MTrk")) {
      const uint32_t len = c.u32();
      file.tracks.push_back(parse_track(c, len));
    } else {
      c.pos = at + 4;  // alien chunk: skip tag, length, payload
      c.skip(c.u32());
    }
  }
  return file;
}

std::vector<uint8_t> serialize_smf(const SmfFile& file) {
  std::vector<uint8_t> out;
  auto u16 = [&out](uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
  };
  auto u32 = [&out, &u16](uint32_t v) {
    u16(v >> 16);
    u16(v & 0xffff);
  };
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  u32(6);
  u16(static_cast<uint16_t>(file.format));
  u16(static_cast<uint16_t>(file.tracks.size()));
  u16(static_cast<uint16_t>(file.division));

  for (const SmfTrack& track : file.tracks) {
    std::vector<uint8_t> body;
    uint32_t last = 0;
    auto delta = [&body, &last](uint32_t tick) {
      encode_vlq(tick - last, body);
      last = tick;
    };
    if (!track.name.empty()) {
      delta(0);
      body.push_back(0xff);
      body.push_back(0x03);
      encode_vlq(static_cast<uint32_t>(track.name.size()), body);
      body.insert(body.end(), track.name.begin(), track.name.end());
    }
    bool closed = false;
    for (const SmfEvent& e : track.events) {
      delta(e.tick);
      switch (e.kind) {
        case SmfEventKind::NoteOn:
        case SmfEventKind::NoteOff: {
          const uint8_t status = (e.kind == SmfEventKind::NoteOn ? 0x90 : 0x80);
          body.push_back(static_cast<uint8_t>(status | (e.channel & 0x0f)));
          body.push_back(e.data.size() > 0 ? e.data[0] : 0);
          body.push_back(e.data.size() > 1 ? e.data[1] : 0);
          break;
        }
        case SmfEventKind::Tempo:
          body.push_back(0xff);
          body.push_back(0x51);
          body.push_back(3);
          for (int i = 0; i < 3; ++i)
            body.push_back(i < static_cast<int>(e.data.size()) ? e.data[i] : 0);
          break;
        case SmfEventKind::TimeSignature:
          body.push_back(0xff);
          body.push_back(0x58);
          body.push_back(4);
          for (int i = 0; i < 4; ++i)
            body.push_back(i < static_cast<int>(e.data.size()) ? e.data[i] : 0);
          break;
        case SmfEventKind::EndOfTrack:
          body.push_back(0xff);
          body.push_back(0x2f);
          body.push_back(0);
          closed = true;
          break;
      }
    }
    if (!closed) {
      delta(last);
      body.push_back(0xff);
      body.push_back(0x2f);
      body.push_back(0);
    }
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    u32(static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

std::vector<TickNote> collect_notes(const SmfTrack& track) {
  struct Active {
    uint8_t channel;
    uint8_t key;
    uint32_t onset;
  };
  std::vector<TickNote> notes;
  std::vector<Active> sounding;
  uint32_t last_tick = 0;
  for (const SmfEvent& e : track.events) {
    last_tick = std::max(last_tick, e.tick);
    if (e.kind == SmfEventKind::NoteOn) {
      sounding.push_back({e.channel, e.data[0], e.tick});
    } else if (e.kind == SmfEventKind::NoteOff) {
      for (size_t i = 0; i < sounding.size(); ++i) {  // oldest match first
        if (sounding[i].channel != e.channel || sounding[i].key != e.data[0])
          continue;
        notes.push_back({sounding[i].onset, e.tick - sounding[i].onset,
                         sounding[i].key});
        sounding.erase(sounding.begin() + i);
        break;
      }
      // a note-off with nothing sounding is silently ignored
    }
  }
  for (const Active& a : sounding)
    notes.push_back({a.onset, last_tick - a.onset, a.key});
  std::sort(notes.begin(), notes.end(), [](const TickNote& a, const TickNote& b) {
    return a.onset_tick != b.onset_tick ? a.onset_tick < b.onset_tick
                                        : a.key < b.key;
  });
  return notes;
}

std::vector<TempoChange> collect_tempo(const SmfFile& file) {
  std::vector<TempoChange> tempo;
  for (const SmfTrack& track : file.tracks)
    for (const SmfEvent& e : track.events)
      if (e.kind == SmfEventKind::Tempo)
        tempo.push_back(
            {e.tick, static_cast<uint32_t>(e.data[0] << 16 | e.data[1] << 8 |
                                           e.data[2])});
  std::stable_sort(tempo.begin(), tempo.end(),
                   [](const TempoChange& a, const TempoChange& b) {
                     return a.tick < b.tick;
                   });
  if (tempo.empty() || tempo.front().tick > 0)
    tempo.insert(tempo.begin(), TempoChange{0, 500000});
  return tempo;
}

double tick_to_seconds(uint32_t tick, const std::vector<TempoChange>& tempo,
                       int division) {
  if (division <= 0) throw Error("tick_to_seconds: bad division");
  double seconds = 0.0;
  for (size_t i = 0; i < tempo.size(); ++i) {
    const uint32_t seg_start = tempo[i].tick;
    if (tick <= seg_start) break;
    const uint32_t seg_end =
        i + 1 < tempo.size() ? std::min(tempo[i + 1].tick, tick) : tick;
    seconds += static_cast<double>(seg_end - seg_start) *
               tempo[i].us_per_quarter * 1e-6 / division;
  }
  return seconds;
}

}  // namespace music102
