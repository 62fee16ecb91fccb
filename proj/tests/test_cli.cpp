// End-to-end checks of the command-line binary: every command is exercised
// through a real process, reports are parsed back as JSON, and exit codes
// are asserted against the 0/1/2 contract.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "music102/dataset.hpp"
#include "music102/piece.hpp"
#include "music102/smf.hpp"

#ifndef MUSIC102_CLI
#error "MUSIC102_CLI must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace music102;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("music102_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const fs::path out = dir.path / "run_stdout.txt";
  const fs::path err = dir.path / "run_stderr.txt";
  const std::string cmd = std::string(MUSIC102_CLI) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Six transposed copies of one two-chord pattern: a tiny but valid corpus.
std::vector<Piece> small_corpus() {
  std::vector<Piece> pieces;
  for (int i = 0; i < 6; ++i) {
    Piece p;
    p.id = "p" + std::to_string(100 + i);
    p.u_beats = 0.5;
    for (int t = 0; t < 8; ++t)
      p.melody.push_back({60 + (i + t) % 12, t * 0.5, 0.5});
    const int r = i;
    std::vector<int> one = {r % 12, (r + 4) % 12, (r + 7) % 12};
    std::vector<int> two = {r % 12, (r + 5) % 12, (r + 9) % 12};
    std::sort(one.begin(), one.end());
    std::sort(two.begin(), two.end());
    p.chords.push_back({one, 0.0, 2.0});
    p.chords.push_back({two, 2.0, 2.0});
    pieces.push_back(std::move(p));
  }
  return pieces;
}

std::string toy_config_json() {
  return R"({"model": {"kind": "music102", "multiplicity": 4, "layers": 1, "heads": 2},)"
         R"( "train": {"epochs": 2, "lr": 0.01}})";
}

// One MELODY-track file on the default tempo: quarter notes C4 then E4.
std::vector<uint8_t> fixture_midi() {
  SmfFile f;
  f.format = 1;
  f.division = 480;
  SmfTrack track;
  track.name = "MELODY";
  track.events.push_back({0, SmfEventKind::NoteOn, 0, {60, 100}});
  track.events.push_back({480, SmfEventKind::NoteOff, 0, {60, 0}});
  track.events.push_back({480, SmfEventKind::NoteOn, 0, {64, 100}});
  track.events.push_back({960, SmfEventKind::NoteOff, 0, {64, 0}});
  f.tracks.push_back(track);
  return serialize_smf(f);
}

}  // namespace

TEST_CASE("irreps command dumps the channel table deterministically") {
  TempDir dir;
  RunResult r = run_cli(dir, "irreps --no-timestamp --quiet");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["command"] == "irreps");
  CHECK(report["multiplicities"]["A1"] == 1);
  CHECK(report["multiplicities"]["A2"] == 0);
  CHECK(report["multiplicities"]["B1"] == 0);
  CHECK(report["multiplicities"]["B2"] == 1);
  for (const char* e : {"E1", "E2", "E3", "E4", "E5"})
    CHECK(report["multiplicities"][e] == 1);
  CHECK(report["channels"].size() == 7);
  CHECK(report["max_intertwiner_residual"].get<double>() <= 1e-12);
  CHECK(report["max_orthogonality_residual"].get<double>() <= 1e-12);

  RunResult again = run_cli(dir, "irreps --no-timestamp --quiet");
  CHECK(again.exit_code == 0);
  CHECK(again.out == r.out);  // byte-identical reports
}

TEST_CASE("ingest builds a corpus from matched stems and skips orphans") {
  TempDir dir;
  const fs::path midi = dir.path / "midi";
  const fs::path chord = dir.path / "chord";
  const fs::path beat = dir.path / "beat";
  fs::create_directories(midi);
  fs::create_directories(chord);
  fs::create_directories(beat);

  const std::vector<uint8_t> smf = fixture_midi();
  for (const char* stem : {"alpha", "beta", "orphan"}) {
    std::ofstream out(midi / (std::string(stem) + ".mid"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(smf.data()),
              static_cast<std::streamsize>(smf.size()));
  }
  // Default tempo is half a second per beat; annotate two beats of chords.
  for (const char* stem : {"alpha", "beta"}) {
    spit(chord / (std::string(stem) + ".txt"), "0.0 0.5 C:maj\n0.5 1.0 A:min\n");
    spit(beat / (std::string(stem) + ".txt"), "0.0\n0.5\n1.0\n1.5\n");
  }

  const std::string corpus = dir.file("corpus.jsonl");
  RunResult r = run_cli(dir, "ingest --midi-dir " + midi.string() +
                                 " --chord-dir " + chord.string() +
                                 " --beat-dir " + beat.string() + " --out " +
                                 corpus + " --no-timestamp --quiet");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["command"] == "ingest");
  CHECK(report["pieces"] == 2);
  CHECK(report["skipped"] == json::array({"orphan"}));

  // Warnings are JSON lines on stderr.
  std::istringstream err(r.err);
  std::string line;
  bool saw_orphan = false;
  while (std::getline(err, line)) {
    if (line.empty()) continue;
    const json w = json::parse(line);
    if (w["piece"] == "orphan" && w["kind"] == "missing_annotation")
      saw_orphan = true;
  }
  CHECK(saw_orphan);

  const std::vector<Piece> pieces = load_corpus(corpus);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].id == "alpha");
  CHECK(pieces[1].id == "beta");
  CHECK(pieces[0].melody.size() == 2);
  CHECK(pieces[0].melody[0].pitch == 60);
  CHECK(pieces[0].melody[0].value_beats == doctest::Approx(1.0));
  REQUIRE(pieces[0].chords.size() == 2);
  CHECK(pieces[0].chords[0].pitch_classes == std::vector<int>{0, 4, 7});
  CHECK(pieces[0].chords[1].pitch_classes == std::vector<int>{0, 4, 9});
}

TEST_CASE("train, eval, predict, and audit run as one pipeline") {
  TempDir dir;
  const std::string corpus = dir.file("corpus.jsonl");
  save_corpus(corpus, small_corpus());
  const std::string config = dir.file("toy.json");
  spit(config, toy_config_json());
  const std::string ckpt = dir.file("model.ckpt");

  RunResult tr = run_cli(dir, "train --corpus " + corpus + " --config " +
                                  config + " --seed 7 --out " + ckpt +
                                  " --no-timestamp --quiet");
  REQUIRE(tr.exit_code == 0);
  const json trained = json::parse(tr.out);
  CHECK(trained["epochs_run"] == 2);
  CHECK(trained["steps"] == 8);  // 4 train pieces, 2 epochs
  CHECK(trained["pieces"]["train"] == 4);
  CHECK(trained["pieces"]["val"] == 1);
  CHECK(trained["pieces"]["test"] == 1);
  CHECK(fs::exists(ckpt));

  // Metrics lines carry exactly the epoch/split/wbce/cossim/acc keys.
  std::istringstream metrics(slurp(ckpt + ".metrics.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    if (line.empty()) continue;
    const json m = json::parse(line);
    ++lines;
    CHECK(m.size() == 5);
    for (const char* k : {"epoch", "split", "wbce", "cossim", "acc"})
      CHECK(m.contains(k));
  }
  CHECK(lines == 5);  // 2 epochs x train+val, one test row

  // Same seed, same split: eval reproduces the train report's test block.
  RunResult ev = run_cli(dir, "eval --checkpoint " + ckpt + " --corpus " +
                                  corpus + " --seed 7 --split test" +
                                  " --no-timestamp --quiet");
  REQUIRE(ev.exit_code == 0);
  const json evaled = json::parse(ev.out);
  CHECK(evaled["weighted_bce"].get<double>() ==
        trained["test"]["weighted_bce"].get<double>());
  CHECK(evaled["exact_accuracy"].get<double>() ==
        trained["test"]["exact_accuracy"].get<double>());
  CHECK(evaled["pieces"] == 1);

  RunResult tr2 = run_cli(dir, "train --corpus " + corpus + " --config " +
                                   config + " --seed 7 --out " + ckpt +
                                   " --no-timestamp --quiet");
  CHECK(tr2.out == tr.out);  // byte-identical rerun

  const std::string piece_path = dir.file("piece.json");
  spit(piece_path, piece_to_json(small_corpus()[0]));
  RunResult pr = run_cli(dir, "predict --checkpoint " + ckpt + " --piece " +
                                  piece_path + " --out " + dir.file("pred.json") +
                                  " --no-timestamp --quiet");
  REQUIRE(pr.exit_code == 0);
  const json predicted = json::parse(pr.out);
  CHECK(predicted["steps"] == 8);
  REQUIRE(predicted["chord_matrix"].size() == 12);
  for (const auto& row : predicted["chord_matrix"]) {
    REQUIRE(row.size() == 8);
    for (const auto& cell : row) CHECK((cell == 0 || cell == 1));
  }
  const Piece out_piece =
      piece_from_json(json::parse(slurp(dir.file("pred.json"))).dump());
  CHECK(out_piece.id == "p100");
  for (size_t i = 0; i < out_piece.chords.size(); ++i) {
    CHECK(!out_piece.chords[i].pitch_classes.empty());  // silence never spans
    if (i > 0) {
      const bool adjacent = out_piece.chords[i - 1].offset_beats() ==
                            out_piece.chords[i].onset_beats;
      const bool same = out_piece.chords[i - 1].pitch_classes ==
                        out_piece.chords[i].pitch_classes;
      CHECK(!(adjacent && same));  // equal neighbours were merged
    }
  }

  RunResult audit = run_cli(dir, "audit --mode equivariance --checkpoint " +
                                     ckpt + " --no-timestamp --quiet");
  REQUIRE(audit.exit_code == 0);
  const json audited = json::parse(audit.out);
  CHECK(audited["max_residual"].get<double>() <= 1e-8);
  CHECK(audited["equivariant"] == true);

  RunResult grad = run_cli(
      dir, "audit --mode gradcheck --seed 5 --no-timestamp --quiet");
  REQUIRE(grad.exit_code == 0);
  const json gradded = json::parse(grad.out);
  CHECK(gradded["max_rel_err"].get<double>() <= 1e-4);
  CHECK(gradded["passes"] == true);
}

TEST_CASE("transform shifts pitch classes and round-trips") {
  TempDir dir;
  const std::string piece_path = dir.file("piece.json");
  spit(piece_path, piece_to_json(small_corpus()[0]));

  RunResult fwd = run_cli(dir, "transform --piece " + piece_path +
                                   " --g T2 --out " + dir.file("t2.json") +
                                   " --no-timestamp --quiet");
  REQUIRE(fwd.exit_code == 0);
  const json moved = json::parse(fwd.out);
  CHECK(moved["g"] == "T2");
  CHECK(moved["piece"]["melody_notes"][0]["pitch"] == 62);
  CHECK(moved["piece"]["chords"][0]["pitch_classes"] ==
        json::array({2, 6, 9}));

  RunResult back = run_cli(dir, "transform --piece " + dir.file("t2.json") +
                                    " --g T10 --out " + dir.file("back.json") +
                                    " --no-timestamp --quiet");
  REQUIRE(back.exit_code == 0);
  CHECK(slurp(dir.file("back.json")) == piece_to_json(small_corpus()[0]) + "\n");

  RunResult idty = run_cli(dir, "transform --piece " + piece_path +
                                    " --g T0 --no-timestamp --quiet");
  REQUIRE(idty.exit_code == 0);
  CHECK(json::parse(idty.out)["piece"] ==
        json::parse(piece_to_json(small_corpus()[0])));
}

TEST_CASE("validation failures exit one and divergence exits two") {
  TempDir dir;
  const std::string corpus = dir.file("corpus.jsonl");
  save_corpus(corpus, small_corpus());
  const std::string piece_path = dir.file("piece.json");
  spit(piece_path, piece_to_json(small_corpus()[0]));

  RunResult missing = run_cli(dir, "eval --checkpoint " + dir.file("no.ckpt") +
                                       " --corpus " + corpus +
                                       " --no-timestamp --quiet");
  CHECK(missing.exit_code == 1);
  CHECK(json::parse(missing.out)["kind"] == "validation");

  RunResult bad_g = run_cli(dir, "transform --piece " + piece_path +
                                     " --g Q5 --no-timestamp --quiet");
  CHECK(bad_g.exit_code == 1);
  CHECK(json::parse(bad_g.out)["kind"] == "validation");

  const std::string bad_config = dir.file("bad.json");
  spit(bad_config, R"({"model": {"kind": "music102", "multiplicity": 5}})");
  RunResult odd = run_cli(dir, "train --corpus " + corpus + " --config " +
                                   bad_config + " --out " + dir.file("x.ckpt") +
                                   " --no-timestamp --quiet");
  CHECK(odd.exit_code == 1);
  CHECK(json::parse(odd.out)["kind"] == "validation");

  RunResult bad_split = run_cli(dir, "eval --checkpoint " + dir.file("no.ckpt") +
                                         " --corpus " + corpus +
                                         " --split weird --no-timestamp --quiet");
  CHECK(bad_split.exit_code == 1);

  RunResult diverged = run_cli(
      dir, "train --corpus " + corpus +
               " --epochs 1 --lr 1e12 --abort-grad-max 1e6 --seed 1 --out " +
               dir.file("div.ckpt") + " --no-timestamp --quiet");
  CHECK(diverged.exit_code == 2);
  const json report = json::parse(diverged.out);
  CHECK(report["kind"] == "divergence");
  CHECK(report["step"].get<int>() >= 0);
}
