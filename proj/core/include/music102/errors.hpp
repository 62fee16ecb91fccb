#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace music102 {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched matrix/tensor dimensions.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad model or training configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Requested an irrep channel that does not appear in the pitch-class
// representation (multiplicity zero) or does not exist at all.
struct NoSuchChannel : Error {
  explicit NoSuchChannel(const std::string& msg) : Error(msg) {}
};

// Chord annotations that cannot be reconciled with the beat grid. Carries
// the offending span's extent so callers can report it.
struct AlignmentError : Error {
  double onset_beats = 0.0;
  double value_beats = 0.0;
  explicit AlignmentError(const std::string& msg, double onset = 0.0,
                          double value = 0.0)
      : Error(msg), onset_beats(onset), value_beats(value) {}
};

// Malformed input bytes (MIDI files, annotation text). Carries the offset of
// the first byte that could not be consumed.
struct ParseError : Error {
  size_t offset = 0;
  explicit ParseError(const std::string& msg, size_t offset_ = 0)
      : Error(msg), offset(offset_) {}
};

// Checkpoint file rejected (magic, version, or payload size).
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

// Training aborted because the loss or a gradient stopped being finite.
struct TrainDivergence : Error {
  int step = -1;
  double loss = 0.0;
  double grad_max = 0.0;
  TrainDivergence(const std::string& msg, int step_, double loss_, double grad_max_)
      : Error(msg), step(step_), loss(loss_), grad_max(grad_max_) {}
};

}  // namespace music102
