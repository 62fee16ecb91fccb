// Microbenchmarks for the hot paths: representation tables, file parsing,
// grid embedding, the forward pass, and a full optimizer step.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "music102/group.hpp"
#include "music102/irreps.hpp"
#include "music102/model.hpp"
#include "music102/piece.hpp"
#include "music102/rng.hpp"
#include "music102/smf.hpp"
#include "music102/train.hpp"

namespace {

using namespace music102;

// A scale-walking piece with one chord span per bar, `bars` bars long.
Piece make_piece(int bars) {
  static const int kScale[8] = {60, 62, 64, 65, 67, 69, 71, 72};
  static const int kTriads[4][3] = {{0, 4, 7}, {0, 5, 9}, {2, 7, 11}, {0, 4, 7}};
  Piece p;
  p.id = "bench";
  p.u_beats = kDefaultStep;
  for (int bar = 0; bar < bars; ++bar) {
    for (int i = 0; i < 8; ++i)
      p.melody.push_back({kScale[(bar + i) % 8], bar * 4.0 + i * 0.5, 0.5});
    const int(&t)[3] = kTriads[bar % 4];
    p.chords.push_back({{t[0], t[1], t[2]}, bar * 4.0, 4.0});
  }
  return p;
}

Mat random_melody(int steps, uint64_t seed) {
  Rng rng(seed);
  Mat m(12, steps);
  for (int s = 0; s < steps; ++s) m.at(rng.below(12), s) = 1.0;
  return m;
}

void bm_irrep_matrices(benchmark::State& state) {
  const IrrepLabel labels[] = {IrrepLabel::A1, IrrepLabel::A2, IrrepLabel::B1,
                               IrrepLabel::B2, IrrepLabel::E1, IrrepLabel::E2,
                               IrrepLabel::E3, IrrepLabel::E4, IrrepLabel::E5};
  for (auto _ : state) {
    double sum = 0.0;
    for (IrrepLabel label : labels)
      for (int r = 0; r < 12; ++r)
        for (bool refl : {false, true}) {
          const Mat d = irrep_matrix(label, group_element(r, refl));
          sum += d.at(0, 0);
        }
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 9 * 24);
}
BENCHMARK(bm_irrep_matrices);

void bm_smf_parse(benchmark::State& state) {
  const Piece p = make_piece(64);
  SmfFile f;
  f.format = 1;
  f.division = 480;
  SmfTrack melody;
  melody.name = "MELODY";
  for (const Note& n : p.melody) {
    const auto tick = [](double beats) { return static_cast<uint32_t>(beats * 480.0); };
    melody.events.push_back({tick(n.onset_beats), SmfEventKind::NoteOn, 0,
                             {static_cast<uint8_t>(n.pitch), 90}});
    melody.events.push_back({tick(n.onset_beats + n.value_beats),
                             SmfEventKind::NoteOff, 0,
                             {static_cast<uint8_t>(n.pitch), 0}});
  }
  f.tracks.push_back(melody);
  const std::vector<uint8_t> bytes = serialize_smf(f);
  for (auto _ : state) {
    SmfFile parsed = parse_smf(bytes);
    benchmark::DoNotOptimize(parsed);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(bytes.size()));
}
BENCHMARK(bm_smf_parse);

void bm_embed_piece(benchmark::State& state) {
  const Piece p = make_piece(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    PieceTensor t = embed_piece(p);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(bm_embed_piece)->Arg(16)->Arg(64);

void bm_transform_tensor(benchmark::State& state) {
  const PieceTensor t = embed_piece(make_piece(16));
  for (auto _ : state) {
    for (int r = 0; r < 12; ++r)
      for (bool refl : {false, true}) {
        PieceTensor moved = transform_tensor(t, group_element(r, refl));
        benchmark::DoNotOptimize(moved);
      }
  }
  state.SetItemsProcessed(state.iterations() * 24);
}
BENCHMARK(bm_transform_tensor);

void bm_forward(benchmark::State& state) {
  const ModelConfig cfg = ModelConfig::music102_default();
  const ParamSet params = init_params(cfg, 7);
  const Mat melody = random_melody(static_cast<int>(state.range(0)), 11);
  for (auto _ : state) {
    Mat logits = predict_logits(cfg, params, melody);
    benchmark::DoNotOptimize(logits);
  }
}
BENCHMARK(bm_forward)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_train_step(benchmark::State& state) {
  const ModelConfig cfg = ModelConfig::music102_default();
  ParamSet params = init_params(cfg, 7);
  Adam adam(params);
  PieceTensor t = embed_piece(make_piece(8));
  for (auto _ : state) {
    ParamSet grads;
    StepStats s = piece_loss(cfg, params, t, &grads);
    adam.step(params, grads);
    benchmark::DoNotOptimize(s);
  }
  state.SetLabel("T=" + std::to_string(t.steps()));
}
BENCHMARK(bm_train_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
