// Error taxonomy for the cascade library.
//
// Every failure the library can signal derives from cascade::Error, so callers
// can catch one type at the CLI boundary.  The subclasses distinguish the
// handful of conditions that callers are expected to branch on (usage mistakes
// vs. bad data vs. structural breakdowns that are part of the algorithm's
// contract).

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cascade {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments that can never work (bad order,
/// alpha outside [0,1], guard limits exceeded, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (parse failures carry a line number
/// in the message, label-out-of-range, length mismatches between files, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Structural mismatch between otherwise valid objects (output length vs.
/// input length, lattice order vs. model order, dimension mismatches).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required (diverged training,
/// non-finite potentials or thresholds).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File and serialization failures: I/O errors, wrong magic, unsupported
/// version, checksum mismatch, truncation.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A threshold at or above the global max would prune every complete output.
class PruneAllError : public Error {
 public:
  using Error::Error;
};

/// A lattice operation emptied a position: no valid assignment remains there.
/// `position` is the anchor index that became empty.
class BrokenLatticeError : public Error {
 public:
  BrokenLatticeError(const std::string& what, std::uint32_t position)
      : Error(what), position_(position) {}
  std::uint32_t position() const { return position_; }

 private:
  std::uint32_t position_;
};

/// Ensemble cascade breakdown: joint filtering emptied a grid node.
/// `node` is the row-major node index that lost all of its states.
class BreakdownError : public Error {
 public:
  BreakdownError(const std::string& what, std::uint32_t node)
      : Error(what), node_(node) {}
  std::uint32_t node() const { return node_; }

 private:
  std::uint32_t node_;
};

}  // namespace cascade
