#include "music102/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include "music102/errors.hpp"

namespace music102 {

namespace {

// Consumes one whitespace-delimited token; returns false at end of line.
bool next_token(const std::string& line, size_t& pos, std::string& out) {
  while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
    ++pos;
  if (pos >= line.size()) return false;
  const size_t start = pos;
  while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos])))
    ++pos;
  out = line.substr(start, pos - start);
  return true;
}

double parse_number(const std::string& token, size_t offset) {
  double v = 0.0;
  const auto [end, ec] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || end != token.data() + token.size())
    throw ParseError("expected a number, got '" + token + "'", offset);
  return v;
}

}  // namespace

std::vector<AnnotationRow> parse_chord_annotation(const std::string& text) {
  std::vector<AnnotationRow> rows;
  size_t line_start = 0;
  while (line_start < text.size()) {
    size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string line = text.substr(line_start, line_end - line_start);

    size_t pos = 0;
    std::string a, b, sym, extra;
    const bool any = next_token(line, pos, a);
    if (any) {
      if (!next_token(line, pos, b) || !next_token(line, pos, sym))
        throw ParseError("chord row needs 'start end symbol'", line_start);
      if (next_token(line, pos, extra))
        throw ParseError("trailing text after chord symbol", line_start);
      AnnotationRow row;
      row.start_seconds = parse_number(a, line_start);
      row.end_seconds = parse_number(b, line_start);
      row.symbol = sym;
      if (!(row.start_seconds < row.end_seconds))
        throw ParseError("chord row with start >= end", line_start);
      if (!rows.empty() && row.start_seconds < rows.back().end_seconds)
        throw ParseError(
            rows.back().start_seconds <= row.start_seconds
                ? "overlapping chord rows"
                : "chord rows out of order",
            line_start);
      rows.push_back(std::move(row));
    }
    line_start = line_end + 1;
  }
  return rows;
}

bool chord_pitch_classes(const std::string& symbol, std::vector<int>& out,
                         bool root_triad_fallback) {
  if (symbol == "N") {
    out.clear();
    return true;
  }
  std::string body = symbol.substr(0, symbol.find('/'));  // drop the slash bass

  static const std::map<char, int> letters = {{'C', 0}, {'D', 2}, {'E', 4},
                                              {'F', 5}, {'G', 7}, {'A', 9},
                                              {'B', 11}};
  if (body.empty()) return false;
  const auto letter = letters.find(body[0]);
  if (letter == letters.end()) return false;
  int root = letter->second;
  size_t pos = 1;
  while (pos < body.size() && (body[pos] == '#' || body[pos] == 'b')) {
    root += body[pos] == '#' ? 1 : -1;
    ++pos;
  }
  root = ((root % 12) + 12) % 12;

  std::string quality;
  if (pos < body.size()) {
    if (body[pos] != ':') return false;
    quality = body.substr(pos + 1);
  }
  if (quality.empty()) quality = "maj";

  static const std::map<std::string, std::vector<int>> table = {
      {"maj", {0, 4, 7}},      {"min", {0, 3, 7}},     {"7", {0, 4, 7, 10}},
      {"maj7", {0, 4, 7, 11}}, {"min7", {0, 3, 7, 10}}, {"dim", {0, 3, 6}},
      {"aug", {0, 4, 8}},      {"sus2", {0, 2, 7}},    {"sus4", {0, 5, 7}},
  };
  auto entry = table.find(quality);
  if (entry == table.end()) {
    if (!root_triad_fallback) return false;
    entry = table.find("maj");
  }
  out.clear();
  for (int interval : entry->second) out.push_back((root + interval) % 12);
  std::sort(out.begin(), out.end());
  return true;
}

BeatGrid parse_beat_grid(const std::string& text) {
  BeatGrid grid;
  size_t line_start = 0;
  while (line_start < text.size()) {
    size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string line = text.substr(line_start, line_end - line_start);
    size_t pos = 0;
    std::string token;
    if (next_token(line, pos, token)) {
      const double t = parse_number(token, line_start);
      if (!grid.beat_times_seconds.empty() && t <= grid.beat_times_seconds.back())
        throw ParseError("beat times must be strictly increasing", line_start);
      grid.beat_times_seconds.push_back(t);
    }
    line_start = line_end + 1;
  }
  if (grid.beat_times_seconds.size() < 2)
    throw ParseError("beat grid needs at least two beats", 0);
  return grid;
}

}  // namespace music102
