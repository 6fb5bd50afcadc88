// Dataset text format, synthetic task generators, and binary checkpoints.
//
// Datasets are plain text for diffability: a "#K=<labels>" header, then one
// example per line, tokens separated by tabs, each token written as
// "<label>:<key>,<key>,...".  Checkpoints and lattice snapshots are binary
// containers (magic, version, little-endian payload, trailing FNV-1a64
// checksum) so weights round-trip with exact float bits.  All generators are
// pure functions of their seed.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cascade/ensemble.hpp"
#include "cascade/errors.hpp"
#include "cascade/lattice.hpp"
#include "cascade/model.hpp"
#include "cascade/training.hpp"

namespace cascade {

/// Parses the text dataset format.  Throws IoError if the file cannot be
/// read, DataError (with a line number) on malformed lines or labels >= K.
/// A file holding only the header is a valid empty dataset.
SequenceDataset read_sequence_dataset(const std::string& path);

/// Writes the text dataset format; read_sequence_dataset inverts it exactly.
/// Feature keys must be nonempty and free of tabs, commas, newlines, and
/// carriage returns (DataError otherwise); labels must be < K.
void write_sequence_dataset(const SequenceDataset& data, const std::string& path);

/// The generative tables behind a synthetic chain task: the next state is
/// drawn from softmax(logits[context]) where the context encodes the
/// previous `order` states (positions before the sequence start use the
/// padding symbol num_labels).  Kept so tests can replay the generator.
struct ChainGenerator {
  std::uint32_t order = 1;
  std::uint32_t num_labels = 0;
  std::vector<std::vector<double>> logits;  // [context][next state]

  /// Context id of the previous `order` states, oldest first, encoded in
  /// base num_labels+1.
  std::uint32_t context_index(std::span<const State> prev) const;
};

struct SynthChainConfig {
  std::uint32_t order = 3;         // how many previous states drive the next
  std::uint32_t num_labels = 8;
  std::uint32_t len_min = 8;
  std::uint32_t len_max = 16;
  std::uint32_t count = 100;
  double weight_scale = 1.0;       // logits ~ weight_scale * N(0,1)
  double emit_noise = 0.0;         // P(token names a uniform state instead of the truth)
  std::uint64_t seed = 1;
};

/// Samples a labeled chain dataset from a random generator of the requested
/// order.  Each position carries one key, "s<state>", naming the true state
/// with probability 1-emit_noise and a uniform state otherwise.  Returns the
/// generator tables for oracle checks.  Throws ConfigError on empty
/// alphabets, zero lengths, len_min > len_max, or emit_noise outside [0,1].
std::pair<SequenceDataset, ChainGenerator> synth_hmm(const SynthChainConfig& config);

/// One synthetic grid MRF instance.  The model holds log-domain potentials:
/// unary log(u) with u drawn uniformly on [0,1] (u kept in unary_potential),
/// pairwise -v with v drawn uniformly on [-25,25].  When the joint space is
/// small enough to enumerate, `truth` holds one exact sample from the Gibbs
/// distribution P(y) proportional to exp(score(y)).
struct GridInstance {
  GridModel model;
  std::vector<std::vector<double>> unary_potential;  // raw [0,1] draws, = exp(unary)
  std::optional<Output> truth;
};

GridInstance synth_grid(std::uint32_t rows, std::uint32_t cols, std::uint32_t num_labels,
                        std::uint64_t seed);

/// Exact samples from the Gibbs distribution of a potential-table grid by
/// full enumeration.  Refuses joint spaces beyond 1e6 outputs (ConfigError).
std::vector<Output> sample_grid_truths(const GridModel& model, std::uint32_t count,
                                       std::uint64_t seed);

struct SynthGridConfig {
  std::uint32_t rows = 3;
  std::uint32_t cols = 3;
  std::uint32_t num_labels = 4;
  std::uint32_t count = 100;
  double coupling_scale = 1.0;  // planted pairwise preference logits ~ scale * N(0,1)
  double emit_noise = 0.0;      // P(token names a uniform state instead of the truth)
  std::uint64_t seed = 1;
};

/// Samples a labeled grid dataset for learned ensembles: truths follow a
/// planted Markov-mesh sweep (each node drawn given its left and up
/// neighbors through shared orientation preference tables), tokens are noisy
/// state indicators as in synth_hmm.  Throws ConfigError on degenerate
/// configurations.
GridDataset synth_grid_labels(const SynthGridConfig& config);

enum class CheckpointKind : std::uint8_t { Model = 0, Cascade = 1 };

/// Binary checkpoint writers.  Throws IoError when the file cannot be
/// written.
void save_checkpoint(const LinearModel& model, const std::string& path);
void save_checkpoint(const TrainedCascade& cascade, const std::string& path);

/// Reads just enough of a checkpoint to report what it holds.  Throws
/// IoError on unreadable files, bad magic, bad version, or bad checksum.
CheckpointKind peek_checkpoint(const std::string& path);

/// Checkpoint readers; the file must hold the matching kind.  Throws IoError
/// on magic/version/checksum/kind mismatches or corrupt payloads.
LinearModel load_model(const std::string& path);
TrainedCascade load_cascade(const std::string& path);

/// Lattice snapshots: per-anchor survivor tuples as varints; transitions are
/// rebuilt on load.  Same container discipline as checkpoints.
void save_lattice(const SparseLattice& lattice, const std::string& path);
SparseLattice load_lattice(const std::string& path);

}  // namespace cascade
