// Text datasets, synthetic generators, and binary checkpoints (data_io.hpp).

#include "cascade/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <utility>

#include "cascade/hashing.hpp"
#include "cascade/rng.hpp"

namespace cascade {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'C', 'C', 'K'};
constexpr char kLatticeMagic[4] = {'S', 'C', 'L', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint64_t kEnumGuard = 1000000;

// ---------------------------------------------------------------------------
// Whole-file IO

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading file: " + path);
  return all;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("error while writing file: " + path);
}

// ---------------------------------------------------------------------------
// Little-endian buffer cursors

struct Writer {
  std::string buf;

  void u8(std::uint8_t x) { buf.push_back(static_cast<char>(x)); }
  void u16(std::uint16_t x) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void varint(std::uint64_t x) {
    while (x >= 0x80) {
      u8(static_cast<std::uint8_t>(x) | 0x80);
      x >>= 7;
    }
    u8(static_cast<std::uint8_t>(x));
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("corrupt payload: truncated field");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    std::uint16_t x = 0;
    for (int i = 0; i < 2; ++i) x |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return x;
  }
  std::uint32_t u32() {
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t varint() {
    std::uint64_t x = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      x |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return x;
    }
    throw IoError("corrupt payload: varint overruns 64 bits");
  }
  void done() const {
    if (pos != buf.size()) throw IoError("corrupt payload: trailing bytes");
  }
};

// Container = magic, version, kind byte, payload, FNV-1a64 of all preceding
// bytes.  The checksum is checked before anything else so truncation and
// corruption surface uniformly.
std::string wrap_container(const char magic[4], std::uint8_t kind, const std::string& payload) {
  Writer w;
  w.buf.append(magic, 4);
  w.u32(kFormatVersion);
  w.u8(kind);
  w.buf += payload;
  w.u64(fnv1a64(std::string_view(w.buf)));
  return w.buf;
}

struct Container {
  std::uint8_t kind = 0;
  std::string payload;
};

Container read_container(const std::string& path, const char magic[4]) {
  const std::string all = read_file(path);
  constexpr std::size_t kOverhead = 4 + 4 + 1 + 8;
  if (all.size() < kOverhead)
    throw IoError("checksum failure: file shorter than the container overhead: " + path);
  Reader tail{all, all.size() - 8};
  const std::uint64_t expect = tail.u64();
  const std::uint64_t got = fnv1a64(std::string_view(all.data(), all.size() - 8));
  if (got != expect) throw IoError("checksum failure (truncated or corrupted file): " + path);
  if (std::memcmp(all.data(), magic, 4) != 0)
    throw IoError("bad magic; not the expected container format: " + path);
  Reader head{all, 4};
  const std::uint32_t version = head.u32();
  if (version != kFormatVersion)
    throw IoError("unsupported container version " + std::to_string(version) + ": " + path);
  Container c;
  c.kind = head.u8();
  c.payload = all.substr(9, all.size() - 9 - 8);
  return c;
}

// ---------------------------------------------------------------------------
// Model / cascade payloads

void put_model(Writer& w, const LinearModel& model) {
  w.u32(model.dimension());
  w.u32(model.num_labels());
  w.u32(model.order());
  w.u32(static_cast<std::uint32_t>(model.templates().size()));
  for (const FeatureTemplate& t : model.templates()) {
    w.u8(static_cast<std::uint8_t>(t.kind));
    w.u32(t.ngram_order);
    w.u32(t.id);
  }
  w.u64(model.weights().size());
  for (double x : model.weights()) w.f64(x);
}

LinearModel get_model(Reader& r) {
  const std::uint32_t dimension = r.u32();
  const std::uint32_t num_labels = r.u32();
  const std::uint32_t order = r.u32();
  const std::uint32_t ntemplates = r.u32();
  std::vector<FeatureTemplate> templates;
  templates.reserve(ntemplates);
  for (std::uint32_t i = 0; i < ntemplates; ++i) {
    FeatureTemplate t;
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(TemplateKind::GridPairwise))
      throw IoError("corrupt payload: unknown template kind");
    t.kind = static_cast<TemplateKind>(kind);
    t.ngram_order = r.u32();
    t.id = r.u32();
    templates.push_back(t);
  }
  LinearModel model;
  try {
    model = LinearModel(dimension, num_labels, std::move(templates));
  } catch (const Error& e) {
    throw IoError(std::string("corrupt payload: ") + e.what());
  }
  if (model.order() != order)
    throw IoError("corrupt payload: stored order disagrees with the templates");
  const std::uint64_t nweights = r.u64();
  if (nweights != model.weights().size())
    throw IoError("corrupt payload: weight count disagrees with the dimension");
  for (double& x : model.weights()) x = r.f64();
  return model;
}

void put_hierarchy(Writer& w, const StateHierarchy& h) {
  w.u32(h.coarse_labels);
  w.u32(h.fine_labels);
  for (const auto& kids : h.children) {
    w.varint(kids.size());
    for (State s : kids) w.u16(s);
  }
}

StateHierarchy get_hierarchy(Reader& r) {
  StateHierarchy h;
  h.coarse_labels = r.u32();
  h.fine_labels = r.u32();
  h.children.resize(h.coarse_labels);
  for (auto& kids : h.children) {
    const std::uint64_t n = r.varint();
    kids.resize(n);
    for (auto& s : kids) s = r.u16();
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw IoError(std::string("corrupt payload: ") + e.what());
  }
  return h;
}

void put_report(Writer& w, const LevelReport& rep) {
  w.f64(rep.train_alpha);
  w.f64(rep.alpha);
  w.u8(rep.feasible ? 1 : 0);
  w.f64(rep.dev_filter_loss);
  w.f64(rep.dev_efficiency_loss);
  w.f64(rep.dev_density);
  w.f64(rep.dev_token_accuracy);
  w.f64(rep.dev_sequence_accuracy);
  w.u32(rep.truth_pruned_train);
  w.u32(rep.truth_pruned_dev);
  w.u32(rep.degenerate_kept_all);
}

LevelReport get_report(Reader& r) {
  LevelReport rep;
  rep.train_alpha = r.f64();
  rep.alpha = r.f64();
  rep.feasible = r.u8() != 0;
  rep.dev_filter_loss = r.f64();
  rep.dev_efficiency_loss = r.f64();
  rep.dev_density = r.f64();
  rep.dev_token_accuracy = r.f64();
  rep.dev_sequence_accuracy = r.f64();
  rep.truth_pruned_train = r.u32();
  rep.truth_pruned_dev = r.u32();
  rep.degenerate_kept_all = r.u32();
  return rep;
}

// ---------------------------------------------------------------------------
// Synthetic-generator internals

State sample_softmax(const std::vector<double>& logits, Rng& rng) {
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  const double target = rng.u01() * total;
  double cum = 0.0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    cum += std::exp(logits[s] - mx);
    if (cum > target) return static_cast<State>(s);
  }
  return static_cast<State>(logits.size() - 1);
}

Token noisy_indicator(State truth, std::uint32_t num_labels, double noise, Rng& rng) {
  State named = truth;
  if (noise > 0.0 && rng.u01() < noise)
    named = static_cast<State>(rng.uniform_int(num_labels));
  return {"s" + std::to_string(named)};
}

// Enumerates every full-space output of a potential-table grid and collects
// its joint score (odometer order: last node fastest, ascending states).
std::vector<double> enumerate_grid_scores(const GridModel& model) {
  const std::uint32_t nodes = model.rows * model.cols;
  std::uint64_t total = 1;
  for (std::uint32_t v = 0; v < nodes; ++v) {
    if (model.num_labels == 0) throw ConfigError("grid alphabet is empty");
    if (total > kEnumGuard / model.num_labels) return {};
    total *= model.num_labels;
  }
  std::vector<double> scores;
  scores.reserve(total);
  Output y(nodes, 0);
  while (true) {
    scores.push_back(grid_score(model, y));
    std::uint32_t v = nodes;
    while (v-- > 0) {
      if (++y[v] < model.num_labels) break;
      y[v] = 0;
      if (v == 0) return scores;
    }
  }
}

// Decodes enumeration index k back into an output (same odometer order).
Output decode_enumeration_index(std::uint64_t k, std::uint32_t nodes, std::uint32_t K) {
  Output y(nodes);
  for (std::uint32_t v = nodes; v-- > 0;) {
    y[v] = static_cast<State>(k % K);
    k /= K;
  }
  return y;
}

Output sample_grid_truth(const std::vector<double>& scores, std::uint32_t nodes,
                         std::uint32_t K, Rng& rng) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double total = 0.0;
  for (double s : scores) total += std::exp(s - mx);
  const double target = rng.u01() * total;
  double cum = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    cum += std::exp(scores[k] - mx);
    if (cum > target) return decode_enumeration_index(k, nodes, K);
  }
  return decode_enumeration_index(scores.size() - 1, nodes, K);
}

}  // namespace

// ---------------------------------------------------------------------------
// Text dataset format

SequenceDataset read_sequence_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);

  auto fail = [](std::size_t lineno, const std::string& what) {
    throw DataError("line " + std::to_string(lineno) + ": " + what);
  };
  auto parse_u32 = [&](std::string_view text, std::size_t lineno,
                       const char* what) -> std::uint32_t {
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      fail(lineno, std::string("malformed ") + what + " '" + std::string(text) + "'");
    return value;
  };

  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) fail(1, "missing '#K=<labels>' header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#K=", 0) != 0) fail(1, "header must start with '#K='");
  SequenceDataset data;
  data.num_labels = parse_u32(std::string_view(line).substr(3), 1, "alphabet size");
  if (data.num_labels == 0) fail(1, "alphabet size must be >= 1");

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) fail(lineno, "empty line");

    SequenceExample ex;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t tab = std::min(line.find('\t', start), line.size());
      const std::string_view token(line.data() + start, tab - start);
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos) fail(lineno, "token missing ':' separator");
      const std::uint32_t label = parse_u32(token.substr(0, colon), lineno, "label");
      if (label >= data.num_labels)
        fail(lineno, "label " + std::to_string(label) + " outside alphabet of size " +
                         std::to_string(data.num_labels));
      ex.truth.push_back(static_cast<State>(label));

      Token keys;
      const std::string_view rest = token.substr(colon + 1);
      if (!rest.empty()) {
        std::size_t k = 0;
        while (k <= rest.size()) {
          const std::size_t comma = std::min(rest.find(',', k), rest.size());
          if (comma == k) fail(lineno, "empty feature key");
          keys.emplace_back(rest.substr(k, comma - k));
          k = comma + 1;
        }
      }
      ex.input.tokens.push_back(std::move(keys));
      start = tab + 1;
    }
    data.examples.push_back(std::move(ex));
  }
  if (in.bad()) throw IoError("error while reading dataset file: " + path);
  return data;
}

void write_sequence_dataset(const SequenceDataset& data, const std::string& path) {
  if (data.num_labels == 0) throw DataError("alphabet size must be >= 1");
  std::string out = "#K=" + std::to_string(data.num_labels) + "\n";
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const SequenceExample& ex = data.examples[i];
    if (ex.input.tokens.empty())
      throw DataError("example " + std::to_string(i) + " is empty");
    if (ex.truth.size() != ex.input.tokens.size())
      throw DataError("example " + std::to_string(i) + ": labels do not cover the tokens");
    for (std::size_t t = 0; t < ex.input.tokens.size(); ++t) {
      if (ex.truth[t] >= data.num_labels)
        throw DataError("example " + std::to_string(i) + ": label outside the alphabet");
      if (t) out += '\t';
      out += std::to_string(ex.truth[t]);
      out += ':';
      const Token& keys = ex.input.tokens[t];
      for (std::size_t k = 0; k < keys.size(); ++k) {
        if (keys[k].empty())
          throw DataError("example " + std::to_string(i) + ": empty feature key");
        if (keys[k].find_first_of("\t\n\r,") != std::string::npos)
          throw DataError("example " + std::to_string(i) +
                          ": feature key contains a reserved character: " + keys[k]);
        if (k) out += ',';
        out += keys[k];
      }
    }
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Synthetic chain tasks

std::uint32_t ChainGenerator::context_index(std::span<const State> prev) const {
  if (prev.size() != order)
    throw ShapeError("context needs exactly " + std::to_string(order) + " previous states");
  const std::uint32_t base = num_labels + 1;
  std::uint32_t idx = 0;
  for (State s : prev) {
    if (s > num_labels) throw ShapeError("context state outside the padded alphabet");
    idx = idx * base + s;
  }
  return idx;
}

std::pair<SequenceDataset, ChainGenerator> synth_hmm(const SynthChainConfig& config) {
  if (config.num_labels == 0) throw ConfigError("alphabet size must be >= 1");
  if (config.order == 0) throw ConfigError("generator order must be >= 1");
  if (config.len_min == 0 || config.len_min > config.len_max)
    throw ConfigError("length range must satisfy 1 <= len_min <= len_max");
  if (!(config.emit_noise >= 0.0 && config.emit_noise <= 1.0))
    throw ConfigError("emit_noise must lie in [0,1]");
  if (!(config.weight_scale >= 0.0) || !std::isfinite(config.weight_scale))
    throw ConfigError("weight_scale must be finite and >= 0");

  const std::uint32_t base = config.num_labels + 1;
  std::uint64_t contexts = 1;
  for (std::uint32_t i = 0; i < config.order; ++i) {
    contexts *= base;
    if (contexts > kEnumGuard)
      throw ConfigError("generator context table too large (order/alphabet)");
  }

  ChainGenerator gen;
  gen.order = config.order;
  gen.num_labels = config.num_labels;
  gen.logits.assign(contexts, std::vector<double>(config.num_labels));

  Rng rng(config.seed);
  for (auto& row : gen.logits)
    for (double& l : row) l = config.weight_scale * rng.normal();

  SequenceDataset data;
  data.num_labels = config.num_labels;
  data.examples.reserve(config.count);
  std::vector<State> context(config.order);
  for (std::uint32_t n = 0; n < config.count; ++n) {
    const std::uint32_t length =
        config.len_min +
        static_cast<std::uint32_t>(rng.uniform_int(config.len_max - config.len_min + 1));
    SequenceExample ex;
    ex.truth.reserve(length);
    ex.input.tokens.reserve(length);
    std::fill(context.begin(), context.end(), static_cast<State>(config.num_labels));
    for (std::uint32_t t = 0; t < length; ++t) {
      const State s = sample_softmax(gen.logits[gen.context_index(context)], rng);
      ex.truth.push_back(s);
      std::copy(context.begin() + 1, context.end(), context.begin());
      context.back() = s;
    }
    for (State s : ex.truth)
      ex.input.tokens.push_back(
          noisy_indicator(s, config.num_labels, config.emit_noise, rng));
    data.examples.push_back(std::move(ex));
  }
  return {std::move(data), std::move(gen)};
}

// ---------------------------------------------------------------------------
// Synthetic grid tasks

GridInstance synth_grid(std::uint32_t rows, std::uint32_t cols, std::uint32_t num_labels,
                        std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ConfigError("grid dimensions must be positive");
  if (num_labels == 0) throw ConfigError("alphabet size must be >= 1");

  GridInstance inst;
  inst.model.rows = rows;
  inst.model.cols = cols;
  inst.model.num_labels = num_labels;
  const std::uint32_t nodes = rows * cols;
  const std::vector<GridEdge> edges = grid_edges(rows, cols);

  Rng rng(seed);
  inst.unary_potential.assign(nodes, std::vector<double>(num_labels));
  inst.model.unary.assign(nodes, std::vector<double>(num_labels));
  for (std::uint32_t v = 0; v < nodes; ++v)
    for (std::uint32_t k = 0; k < num_labels; ++k) {
      double u = rng.u01();
      while (u == 0.0) u = rng.u01();  // keep log(u) finite
      inst.unary_potential[v][k] = u;
      inst.model.unary[v][k] = std::log(u);
    }
  inst.model.pairwise.assign(edges.size(),
                             std::vector<double>(static_cast<std::size_t>(num_labels) *
                                                 num_labels));
  for (std::size_t e = 0; e < edges.size(); ++e)
    for (std::uint32_t ka = 0; ka < num_labels; ++ka)
      for (std::uint32_t kb = 0; kb < num_labels; ++kb)
        inst.model.pairwise[e][static_cast<std::size_t>(ka) * num_labels + kb] =
            -rng.uniform(-25.0, 25.0);

  const std::vector<double> scores = enumerate_grid_scores(inst.model);
  if (!scores.empty())
    inst.truth = sample_grid_truth(scores, nodes, num_labels, rng);
  return inst;
}

std::vector<Output> sample_grid_truths(const GridModel& model, std::uint32_t count,
                                       std::uint64_t seed) {
  const std::vector<double> scores = enumerate_grid_scores(model);
  if (scores.empty())
    throw ConfigError("grid admits more than 1e6 outputs; refusing to enumerate");
  Rng rng(seed);
  std::vector<Output> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i)
    out.push_back(sample_grid_truth(scores, model.rows * model.cols, model.num_labels, rng));
  return out;
}

GridDataset synth_grid_labels(const SynthGridConfig& config) {
  if (config.rows == 0 || config.cols == 0)
    throw ConfigError("grid dimensions must be positive");
  if (config.num_labels == 0) throw ConfigError("alphabet size must be >= 1");
  if (!(config.emit_noise >= 0.0 && config.emit_noise <= 1.0))
    throw ConfigError("emit_noise must lie in [0,1]");
  if (!(config.coupling_scale >= 0.0) || !std::isfinite(config.coupling_scale))
    throw ConfigError("coupling_scale must be finite and >= 0");

  const std::uint32_t K = config.num_labels;
  Rng rng(config.seed);
  // Planted preference tables shared across the dataset: a base state
  // preference plus one table per edge orientation.
  std::vector<double> bias(K);
  std::vector<std::vector<double>> horiz(K, std::vector<double>(K));
  std::vector<std::vector<double>> vert(K, std::vector<double>(K));
  for (double& b : bias) b = config.coupling_scale * rng.normal();
  for (auto& row : horiz)
    for (double& l : row) l = config.coupling_scale * rng.normal();
  for (auto& row : vert)
    for (double& l : row) l = config.coupling_scale * rng.normal();

  GridDataset data;
  data.num_labels = K;
  data.examples.reserve(config.count);
  const std::uint32_t nodes = config.rows * config.cols;
  std::vector<double> logits(K);
  for (std::uint32_t n = 0; n < config.count; ++n) {
    GridExample ex;
    ex.input.rows = config.rows;
    ex.input.cols = config.cols;
    ex.truth.resize(nodes);
    // Markov-mesh sweep: each node conditioned on its left and up neighbors.
    for (std::uint32_t r = 0; r < config.rows; ++r)
      for (std::uint32_t c = 0; c < config.cols; ++c) {
        logits = bias;
        if (c > 0) {
          const State left = ex.truth[r * config.cols + c - 1];
          for (std::uint32_t s = 0; s < K; ++s) logits[s] += horiz[left][s];
        }
        if (r > 0) {
          const State up = ex.truth[(r - 1) * config.cols + c];
          for (std::uint32_t s = 0; s < K; ++s) logits[s] += vert[up][s];
        }
        ex.truth[r * config.cols + c] = sample_softmax(logits, rng);
      }
    ex.input.tokens.reserve(nodes);
    for (std::uint32_t v = 0; v < nodes; ++v)
      ex.input.tokens.push_back(
          noisy_indicator(ex.truth[v], K, config.emit_noise, rng));
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const LinearModel& model, const std::string& path) {
  Writer w;
  put_model(w, model);
  write_file(path, wrap_container(kCheckpointMagic,
                                  static_cast<std::uint8_t>(CheckpointKind::Model), w.buf));
}

void save_checkpoint(const TrainedCascade& cascade, const std::string& path) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(cascade.levels.size()));
  for (const CascadeLevel& level : cascade.levels) {
    w.f64(level.alpha);
    w.u8(level.filter_subcliques ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(level.expansion));
    w.u8(level.hierarchy ? 1 : 0);
    if (level.hierarchy) put_hierarchy(w, *level.hierarchy);
    put_report(w, level.report);
    put_model(w, level.model);
  }
  put_model(w, cascade.final_model);
  write_file(path, wrap_container(kCheckpointMagic,
                                  static_cast<std::uint8_t>(CheckpointKind::Cascade), w.buf));
}

CheckpointKind peek_checkpoint(const std::string& path) {
  const Container c = read_container(path, kCheckpointMagic);
  if (c.kind > static_cast<std::uint8_t>(CheckpointKind::Cascade))
    throw IoError("corrupt payload: unknown checkpoint kind");
  return static_cast<CheckpointKind>(c.kind);
}

LinearModel load_model(const std::string& path) {
  const Container c = read_container(path, kCheckpointMagic);
  if (c.kind != static_cast<std::uint8_t>(CheckpointKind::Model))
    throw IoError("checkpoint does not hold a single model: " + path);
  Reader r{c.payload};
  LinearModel model = get_model(r);
  r.done();
  return model;
}

TrainedCascade load_cascade(const std::string& path) {
  const Container c = read_container(path, kCheckpointMagic);
  if (c.kind != static_cast<std::uint8_t>(CheckpointKind::Cascade))
    throw IoError("checkpoint does not hold a cascade: " + path);
  Reader r{c.payload};
  TrainedCascade cascade;
  const std::uint32_t nlevels = r.u32();
  cascade.levels.reserve(nlevels);
  for (std::uint32_t i = 0; i < nlevels; ++i) {
    CascadeLevel level;
    level.alpha = r.f64();
    level.filter_subcliques = r.u8() != 0;
    const std::uint8_t expansion = r.u8();
    if (expansion > static_cast<std::uint8_t>(Expansion::Refine))
      throw IoError("corrupt payload: unknown expansion kind");
    level.expansion = static_cast<Expansion>(expansion);
    if (r.u8() != 0) level.hierarchy = get_hierarchy(r);
    level.report = get_report(r);
    level.model = get_model(r);
    cascade.levels.push_back(std::move(level));
  }
  cascade.final_model = get_model(r);
  r.done();
  return cascade;
}

// ---------------------------------------------------------------------------
// Lattice snapshots

void save_lattice(const SparseLattice& lattice, const std::string& path) {
  Writer w;
  w.u32(lattice.length());
  w.u32(lattice.num_labels());
  w.u32(lattice.order());
  for (std::uint32_t a = 0; a < lattice.anchors(); ++a) {
    w.varint(lattice.count(a));
    for (std::uint32_t i = 0; i < lattice.count(a); ++i)
      for (State s : lattice.tuple(a, i)) w.varint(s);
  }
  write_file(path, wrap_container(kLatticeMagic, 0, w.buf));
}

SparseLattice load_lattice(const std::string& path) {
  const Container c = read_container(path, kLatticeMagic);
  if (c.kind != 0) throw IoError("corrupt payload: unknown lattice snapshot kind");
  Reader r{c.payload};
  const std::uint32_t length = r.u32();
  const std::uint32_t num_labels = r.u32();
  const std::uint32_t order = r.u32();
  if (order == 0 || order > length)
    throw IoError("corrupt payload: lattice order outside [1, length]");
  const std::uint32_t anchors = length - order + 1;
  std::vector<std::vector<State>> flat(anchors);
  for (std::uint32_t a = 0; a < anchors; ++a) {
    const std::uint64_t count = r.varint();
    flat[a].reserve(count * order);
    for (std::uint64_t i = 0; i < count * order; ++i) {
      const std::uint64_t s = r.varint();
      if (s > std::numeric_limits<State>::max())
        throw IoError("corrupt payload: state id overflows");
      flat[a].push_back(static_cast<State>(s));
    }
  }
  r.done();
  try {
    return SparseLattice::from_survivors(length, num_labels, order, std::move(flat));
  } catch (const Error& e) {
    throw IoError(std::string("corrupt payload: ") + e.what());
  }
}

}  // namespace cascade
