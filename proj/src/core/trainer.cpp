// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "irn/error.hpp"
#include "irn/evalkbc.hpp"

namespace irn::train {

using num::Parameter;
using num::Tensor;

void validate(const TrainConfig& c) {
  IRN_EXPECTS(c.learning_rate >= 0.0 && std::isfinite(c.learning_rate),
              "train: learning rate must be finite and non-negative");
  IRN_EXPECTS(c.batch_size >= 1, "train: batch size must be positive");
  IRN_EXPECTS(c.threads >= 1, "train: thread count must be positive");
}

void check_finite_gradients(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NumericError("non-finite gradient in parameter '" + p->name + "' at element " +
                           std::to_string(i));
      }
    }
  }
}

double gradient_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) total += p->grad[i] * p->grad[i];
  }
  return std::sqrt(total);
}

double clip_gradients(std::span<Parameter* const> params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Parameter* p : params) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= f;
    }
  }
  return norm;
}

void sgd_step(std::span<Parameter* const> params, double lr,
              std::span<Parameter* const> unit_norm_tables) {
  check_finite_gradients(params);
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
  }
  for (Parameter* table : unit_norm_tables) {
    for (std::size_t r = 0; r < table->touched.size(); ++r) {
      if (!table->touched[r]) continue;
      auto row = table->value.row(r);
      double n2 = 0.0;
      for (double v : row) n2 += v * v;
      if (n2 == 0.0) continue;
      const double n = std::sqrt(n2);
      for (double& v : row) v /= n;
    }
  }
}

// --- Checkpoints ----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'I', 'R', 'N', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t bits = le(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& Checkpoint::config_value(const std::string& key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return v;
  }
  throw FormatError("checkpoint has no config entry '" + key + "'");
}

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(c.version);
  w.str(c.kind);
  w.u32(static_cast<std::uint32_t>(c.config.size()));
  for (const auto& [k, v] : c.config) {
    w.str(k);
    w.str(v);
  }
  w.u64(c.epoch);
  w.str(c.rng_state);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const NamedTensor& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) w.u64(d);
  }
  for (const NamedTensor& t : c.tensors) {
    for (std::size_t i = 0; i < t.value.size(); ++i) w.f64(t.value[i]);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  r.raw(4);
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(c.version) +
                      " is not supported (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  c.kind = r.str();
  const std::uint32_t n_config = r.u32();
  for (std::uint32_t i = 0; i < n_config; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    c.config.emplace_back(std::move(k), std::move(v));
  }
  c.epoch = r.u64();
  c.rng_state = r.str();
  const std::uint32_t n_tensors = r.u32();
  std::vector<std::pair<std::string, num::Shape>> manifest;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint tensor '" + name + "' has implausible rank");
    num::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u64());
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : manifest) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n > bytes.size() / 8) throw FormatError("checkpoint truncated in tensor '" + name + "'");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = r.f64();
    c.tensors.push_back({name, Tensor(shape, std::move(data))});
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void export_parameters(std::span<Parameter* const> params, Checkpoint& ckpt) {
  for (const Parameter* p : params) ckpt.tensors.push_back({p->name, p->value});
}

void import_parameters(std::span<Parameter* const> params, const Checkpoint& ckpt) {
  for (Parameter* p : params) {
    const NamedTensor* found = nullptr;
    for (const NamedTensor& t : ckpt.tensors) {
      if (t.name == p->name) found = &t;
    }
    if (!found) throw FormatError("checkpoint lacks tensor '" + p->name + "'");
    if (found->value.shape() != p->value.shape()) {
      throw ShapeError("table '" + p->name + "': checkpoint holds " +
                       num::shape_string(found->value.shape()) + ", model expects " +
                       num::shape_string(p->value.shape()));
    }
    p->value = found->value;
    p->zero_grad();
  }
}

namespace {

std::string repr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t to_size(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint config '" + key + "' is not an integer: " + s);
  }
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("checkpoint config '" + key + "' is not a number: " + s);
  }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> kbc_config_entries(const kbc::KbcConfig& m,
                                                                    const TrainConfig& t) {
  return {
      {"num_entities", std::to_string(m.num_entities)},
      {"num_relations", std::to_string(m.num_relations)},
      {"entity_dim", std::to_string(m.entity_dim)},
      {"relation_dim", std::to_string(m.relation_dim)},
      {"memory_size", std::to_string(m.memory_size)},
      {"memory_dim", std::to_string(m.memory_dim)},
      {"t_max", std::to_string(m.t_max)},
      {"lambda", repr(m.lambda)},
      {"gamma", repr(m.gamma)},
      {"negatives", std::to_string(m.negatives)},
      {"normalize_output_entities", m.normalize_output_entities ? "1" : "0"},
      {"init_scale", repr(m.init_scale)},
      {"learning_rate", repr(t.learning_rate)},
      {"batch_size", std::to_string(t.batch_size)},
      {"epochs", std::to_string(t.epochs)},
      {"patience", std::to_string(t.patience)},
      {"seed", std::to_string(t.seed)},
      {"clip_norm", repr(t.clip_norm)},
  };
}

kbc::KbcConfig kbc_config_from(const Checkpoint& c) {
  if (c.kind != "kbc") throw FormatError("checkpoint holds a '" + c.kind + "' model, not kbc");
  auto sz = [&c](const char* k) { return to_size(c.config_value(k), k); };
  auto dbl = [&c](const char* k) { return to_double(c.config_value(k), k); };
  kbc::KbcConfig m;
  m.num_entities = sz("num_entities");
  m.num_relations = sz("num_relations");
  m.entity_dim = sz("entity_dim");
  m.relation_dim = sz("relation_dim");
  m.memory_size = sz("memory_size");
  m.memory_dim = sz("memory_dim");
  m.t_max = sz("t_max");
  m.lambda = dbl("lambda");
  m.gamma = dbl("gamma");
  m.negatives = sz("negatives");
  m.normalize_output_entities = c.config_value("normalize_output_entities") == "1";
  m.init_scale = dbl("init_scale");
  return m;
}

TrainConfig train_config_from(const Checkpoint& c) {
  auto sz = [&c](const char* k) { return to_size(c.config_value(k), k); };
  auto dbl = [&c](const char* k) { return to_double(c.config_value(k), k); };
  TrainConfig t;
  t.learning_rate = dbl("learning_rate");
  t.batch_size = sz("batch_size");
  t.epochs = sz("epochs");
  t.patience = sz("patience");
  t.seed = sz("seed");
  t.clip_norm = dbl("clip_norm");
  return t;
}

Checkpoint kbc_snapshot(kbc::KbcModel& model, const TrainConfig& train, std::uint64_t epoch,
                        const Rng& rng) {
  Checkpoint c;
  c.kind = "kbc";
  c.config = kbc_config_entries(model.config, train);
  c.epoch = epoch;
  c.rng_state = rng.state();
  export_parameters(model.parameters(), c);
  return c;
}

kbc::KbcModel kbc_from_checkpoint(const Checkpoint& ckpt) {
  kbc::KbcModel model = kbc::KbcModel::zeros(kbc_config_from(ckpt));
  import_parameters(model.parameters(), ckpt);
  return model;
}

void check_compatible(const kbc::KbcModel& model, const kg::Vocab& vocab) {
  if (model.entity_in.value.dim(0) != vocab.num_entities()) {
    throw ShapeError("table 'entity_in' has " + std::to_string(model.entity_in.value.dim(0)) +
                     " rows but the dataset has " + std::to_string(vocab.num_entities()) +
                     " entities");
  }
  if (model.entity_out.value.dim(0) != vocab.num_entities()) {
    throw ShapeError("table 'entity_out' has " + std::to_string(model.entity_out.value.dim(0)) +
                     " rows but the dataset has " + std::to_string(vocab.num_entities()) +
                     " entities");
  }
  if (model.relation.value.dim(0) != vocab.num_relations()) {
    throw ShapeError("table 'relation' has " + std::to_string(model.relation.value.dim(0)) +
                     " rows but the dataset has " + std::to_string(vocab.num_relations()) +
                     " relations");
  }
}

// --- KBC training -----------------------------------------------------------------

double batch_loss(kbc::KbcModel& model, std::span<const kg::Query> batch, Rng& rng) {
  num::Tape tape;
  tape.set_inference(true);
  const num::Var keys = core::memory_keys(tape, model.controller);
  double total = 0.0;
  for (const kg::Query& q : batch) {
    const auto cands = kbc::sample_candidates(model, q.gold, rng);
    total += kbc::query_loss(tape, model, q, cands, keys).scalar();
  }
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

TrainResult train_kbc(kbc::KbcModel& model, const kg::KbcData& data, const TrainConfig& config,
                      Rng& rng, const EpochCallback& on_epoch) {
  validate(config);
  check_compatible(model, data.vocab);
  IRN_EXPECTS(!data.train.empty(), "train: no training queries");
  const auto params = model.parameters();
  const auto unit_tables = model.unit_norm_tables();

  std::span<const kg::Query> valid(data.valid);
  if (config.valid_limit > 0 && valid.size() > config.valid_limit) {
    valid = valid.first(config.valid_limit);
  }

  kg::BatchIterator batches(data.train, config.batch_size, rng);
  TrainResult result;
  std::vector<Tensor> best;
  std::size_t since_best = 0;
  num::Tape tape;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    batches.start_epoch();
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (auto batch = batches.next(); !batch.empty(); batch = batches.next(), ++batch_index) {
      for (Parameter* p : params) p->zero_grad();
      tape.clear();
      const num::Var keys = core::memory_keys(tape, model.controller);
      num::Var total;
      for (const kg::Query& q : batch) {
        const auto cands = kbc::sample_candidates(model, q.gold, rng);
        const num::Var loss = kbc::query_loss(tape, model, q, cands, keys);
        total = total.valid() ? num::add(total, loss) : loss;
      }
      const double value = total.scalar();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (seed " +
                           std::to_string(config.seed) + ")");
      }
      tape.backward(total);
      clip_gradients(params, config.clip_norm);
      sgd_step(params, config.learning_rate, unit_tables);
      loss_sum += value;
      seen += batch.size();
    }
    tape.clear();

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(seen);
    if (!valid.empty()) {
      const auto ranking = eval::evaluate(model, valid, data.filter, config.threads);
      log.valid_mean_rank = ranking.mean_rank;
      log.valid_hits_at_10 = ranking.hits_at_10;
      log.improved = result.epochs.empty() || ranking.hits_at_10 > result.best_valid_hits_at_10;
    } else {
      log.improved = true;
    }
    if (log.improved) {
      result.best_epoch = epoch;
      result.best_valid_hits_at_10 = log.valid_hits_at_10;
      best.clear();
      for (const Parameter* p : params) best.push_back(p->value);
      since_best = 0;
    } else {
      ++since_best;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (config.patience > 0 && since_best >= config.patience) break;
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

}  // namespace irn::train
