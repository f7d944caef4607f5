// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/kgdata.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "irn/error.hpp"

namespace irn::kg {

// --- SymbolTable ----------------------------------------------------------------

std::size_t SymbolTable::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const std::size_t id = names_.size();
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::size_t> SymbolTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

RelationId Vocab::reverse_of(RelationId r) const {
  IRN_EXPECTS(augmented, "Vocab::reverse_of: vocabulary has no reverse relations");
  IRN_EXPECTS(r < num_relations(), "Vocab::reverse_of: relation id out of range");
  return static_cast<RelationId>(r < base_relations ? r + base_relations : r - base_relations);
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw ContractViolation("unknown split '" + std::string(name) + "'");
}

const std::vector<Triple>& TripleStore::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return train;
}

std::vector<Triple>& TripleStore::split(Split s) {
  return const_cast<std::vector<Triple>&>(std::as_const(*this).split(s));
}

// --- Loading --------------------------------------------------------------------

namespace {

struct RawTriple {
  std::string head, relation, tail;
  std::size_t line = 0;
};

std::vector<RawTriple> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open triple file " + path.string());
  std::vector<RawTriple> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 3 non-empty " +
                       "tab-separated fields, found " + std::to_string(fields.size()));
    }
    rows.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2]), line_no});
  }
  if (rows.empty()) throw ParseError(path.string() + ": no triples");
  return rows;
}

void ingest(const std::vector<RawTriple>& rows, const std::filesystem::path& path, bool is_train,
            LoadResult& result, std::vector<Triple>& out) {
  std::set<Triple> seen;
  for (const RawTriple& raw : rows) {
    Triple t;
    t.head = static_cast<EntityId>(result.vocab.entities.intern(raw.head));
    t.relation = static_cast<RelationId>(result.vocab.relations.intern(raw.relation));
    t.tail = static_cast<EntityId>(result.vocab.entities.intern(raw.tail));
    result.vocab.entity_in_train.resize(result.vocab.entities.size(), false);
    result.vocab.relation_in_train.resize(result.vocab.relations.size(), false);
    if (is_train) {
      result.vocab.entity_in_train[t.head] = true;
      result.vocab.entity_in_train[t.tail] = true;
      result.vocab.relation_in_train[t.relation] = true;
    }
    if (!seen.insert(t).second) {
      result.warnings.push_back(path.string() + ":" + std::to_string(raw.line) +
                                ": duplicate triple dropped");
      continue;
    }
    out.push_back(t);
  }
}

}  // namespace

LoadResult load_triples(const std::filesystem::path& path) {
  LoadResult result;
  ingest(read_tsv(path), path, true, result, result.store.train);
  result.vocab.base_relations = result.vocab.num_relations();
  return result;
}

LoadResult load_dataset(const std::filesystem::path& dir) {
  LoadResult result;
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto path = dir / (std::string(split_name(s)) + ".txt");
    if (!std::filesystem::exists(path)) {
      throw IoError("dataset file missing: " + path.string());
    }
    ingest(read_tsv(path), path, s == Split::kTrain, result, result.store.split(s));
  }
  result.vocab.base_relations = result.vocab.num_relations();
  return result;
}

void augment_reverse(TripleStore& store, Vocab& vocab) {
  IRN_EXPECTS(!vocab.augmented, "augment_reverse: vocabulary already augmented");
  const std::size_t base = vocab.num_relations();
  for (std::size_t r = 0; r < base; ++r) {
    const std::string name = vocab.relations.name(r) + "^-1";
    vocab.relations.intern(name);
  }
  vocab.relation_in_train.resize(2 * base, false);
  for (std::size_t r = 0; r < base; ++r) vocab.relation_in_train[base + r] = vocab.relation_in_train[r];
  vocab.base_relations = base;
  vocab.augmented = true;

  std::set<Triple> present(store.train.begin(), store.train.end());
  const std::size_t original = store.train.size();
  for (std::size_t i = 0; i < original; ++i) {
    const Triple& t = store.train[i];
    const Triple rev{t.tail, static_cast<RelationId>(t.relation + base), t.head};
    if (present.insert(rev).second) store.train.push_back(rev);
  }
}

// --- FilterIndex ----------------------------------------------------------------

FilterIndex::FilterIndex(const TripleStore& store, const Vocab& vocab) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    for (const Triple& t : store.split(s)) {
      insert(t.head, t.relation, t.tail);
      // Train is already augmented; valid/test hold only original triples.
      if (vocab.augmented && s != Split::kTrain && !vocab.is_reverse(t.relation)) {
        insert(t.tail, vocab.reverse_of(t.relation), t.head);
      }
    }
  }
  finalize();
}

void FilterIndex::insert(EntityId subject, RelationId relation, EntityId object) {
  index_[key(subject, relation)].push_back(object);
}

void FilterIndex::finalize() {
  for (auto& [k, objects] : index_) {
    std::sort(objects.begin(), objects.end());
    objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
  }
}

std::span<const EntityId> FilterIndex::objects(EntityId subject, RelationId relation) const {
  auto it = index_.find(key(subject, relation));
  if (it == index_.end()) return {};
  return it->second;
}

bool FilterIndex::contains(EntityId subject, RelationId relation, EntityId object) const {
  const auto objs = objects(subject, relation);
  return std::binary_search(objs.begin(), objs.end(), object);
}

// --- Queries --------------------------------------------------------------------

std::vector<Query> train_queries(const TripleStore& store, const Vocab& vocab) {
  std::vector<Query> out;
  out.reserve(store.train.size());
  for (const Triple& t : store.train) {
    out.push_back({t.head, t.relation, t.tail, vocab.is_reverse(t.relation)});
  }
  return out;
}

std::vector<Query> eval_queries(const std::vector<Triple>& triples, const Vocab& vocab) {
  std::vector<Query> out;
  out.reserve(triples.size() * (vocab.augmented ? 2 : 1));
  for (const Triple& t : triples) {
    out.push_back({t.head, t.relation, t.tail, false});
    if (vocab.augmented) out.push_back({t.tail, vocab.reverse_of(t.relation), t.head, true});
  }
  return out;
}

const std::vector<Query>& KbcData::queries(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return train;
}

KbcData prepare(LoadResult loaded, bool add_reverse) {
  KbcData data;
  data.vocab = std::move(loaded.vocab);
  data.store = std::move(loaded.store);
  data.warnings = std::move(loaded.warnings);
  if (add_reverse) augment_reverse(data.store, data.vocab);
  data.filter = FilterIndex(data.store, data.vocab);
  data.train = train_queries(data.store, data.vocab);
  data.valid = eval_queries(data.store.valid, data.vocab);
  data.test = eval_queries(data.store.test, data.vocab);
  return data;
}

// --- Sampling -------------------------------------------------------------------

std::vector<EntityId> sample_negatives(Rng& rng, EntityId gold, std::size_t n,
                                       std::size_t num_entities) {
  IRN_EXPECTS(num_entities > 0 && n < num_entities,
              "sample_negatives: need n < entity count (n=" + std::to_string(n) +
                  ", entities=" + std::to_string(num_entities) + ")");
  IRN_EXPECTS(gold < num_entities, "sample_negatives: gold id out of range");
  // Floyd's subset sampling over the num_entities - 1 non-gold ids, with
  // index k >= gold mapped to k + 1.
  const std::size_t pool = num_entities - 1;
  std::vector<EntityId> picked;
  picked.reserve(n);
  for (std::size_t j = pool - n; j < pool; ++j) {
    const std::size_t r = rng.index(j + 1);
    const auto as_entity = [gold](std::size_t k) {
      return static_cast<EntityId>(k >= gold ? k + 1 : k);
    };
    const EntityId candidate = as_entity(r);
    if (std::find(picked.begin(), picked.end(), candidate) == picked.end()) {
      picked.push_back(candidate);
    } else {
      picked.push_back(as_entity(j));
    }
  }
  return picked;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);
  return order;
}

BatchIterator::BatchIterator(std::vector<Query> items, std::size_t batch_size, Rng& rng)
    : items_(std::move(items)), batch_size_(batch_size), rng_(&rng) {
  IRN_EXPECTS(batch_size >= 1, "BatchIterator: batch size must be >= 1");
}

void BatchIterator::start_epoch() {
  const auto order = shuffled_order(items_.size(), *rng_);
  order_.clear();
  order_.reserve(items_.size());
  for (std::size_t i : order) order_.push_back(items_[i]);
  cursor_ = 0;
}

std::span<const Query> BatchIterator::next() {
  if (cursor_ >= order_.size()) return {};
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
  std::span<const Query> batch(order_.data() + cursor_, count);
  cursor_ += count;
  return batch;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (items_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace irn::kg
