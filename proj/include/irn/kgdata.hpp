// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Knowledge-graph triples: parsing, vocabularies, reverse-relation
// augmentation, the filtered-ranking index, batching and negative sampling.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "irn/rng.hpp"

namespace irn::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Dense, contiguous ids for a set of surface strings.
class SymbolTable {
 public:
  // Returns the id of `name`, registering it if new.
  std::size_t intern(std::string_view name);
  std::optional<std::size_t> find(std::string_view name) const;
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct Vocab {
  SymbolTable entities;
  SymbolTable relations;
  // Whether each id occurs in the training split. Symbols first seen in
  // valid/test keep their randomly initialized embeddings.
  std::vector<bool> entity_in_train;
  std::vector<bool> relation_in_train;
  // Relation count before reverse augmentation; reverse of r is r + base.
  std::size_t base_relations = 0;
  bool augmented = false;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  RelationId reverse_of(RelationId r) const;
  bool is_reverse(RelationId r) const { return augmented && r >= base_relations; }
};

enum class Split { kTrain, kValid, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct TripleStore {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  const std::vector<Triple>& split(Split s) const;
  std::vector<Triple>& split(Split s);
};

struct LoadResult {
  Vocab vocab;
  TripleStore store;
  std::vector<std::string> warnings;
};

// One tab-separated "head<TAB>relation<TAB>tail" file, loaded as the train
// split. Duplicates are dropped with a warning; a malformed line throws
// ParseError naming the line; a file without triples throws ParseError.
LoadResult load_triples(const std::filesystem::path& path);

// Directory with train.txt, valid.txt and test.txt.
LoadResult load_dataset(const std::filesystem::path& dir);

// Adds r^-1 for every relation and (t, r^-1, h) for every train triple.
void augment_reverse(TripleStore& store, Vocab& vocab);

// (subject, relation) -> every object seen with it in train, valid or test.
// When the vocab is augmented, reversed valid/test triples are indexed too so
// head-direction queries are filtered like tail-direction ones.
class FilterIndex {
 public:
  FilterIndex() = default;
  FilterIndex(const TripleStore& store, const Vocab& vocab);

  void insert(EntityId subject, RelationId relation, EntityId object);
  void finalize();

  std::span<const EntityId> objects(EntityId subject, RelationId relation) const;
  bool contains(EntityId subject, RelationId relation, EntityId object) const;
  std::size_t keys() const { return index_.size(); }

 private:
  static std::uint64_t key(EntityId s, RelationId r) {
    return (static_cast<std::uint64_t>(s) << 32) | r;
  }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> index_;
};

struct Query {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId gold = 0;
  bool reversed = false;

  friend bool operator==(const Query&, const Query&) = default;
};

// Training queries: one per (already augmented) train triple.
std::vector<Query> train_queries(const TripleStore& store, const Vocab& vocab);
// Evaluation queries for a split: (h, r, ?) and, when augmented, (t, r^-1, ?)
// for every triple.
std::vector<Query> eval_queries(const std::vector<Triple>& triples, const Vocab& vocab);

// A loaded, reverse-augmented dataset with its filter index and queries.
struct KbcData {
  Vocab vocab;
  TripleStore store;
  FilterIndex filter;
  std::vector<Query> train;
  std::vector<Query> valid;
  std::vector<Query> test;
  std::vector<std::string> warnings;

  const std::vector<Query>& queries(Split s) const;
};

KbcData prepare(LoadResult loaded, bool add_reverse = true);

// `n` distinct entity ids drawn uniformly from all entities except `gold`.
std::vector<EntityId> sample_negatives(Rng& rng, EntityId gold, std::size_t n,
                                       std::size_t num_entities);

// Fisher-Yates: for i = n-1 .. 1, swap(i, rng.index(i + 1)).
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

// Epoch-wise shuffled mini-batches over a fixed item list. Each epoch
// visits every item once; the final batch may be short.
class BatchIterator {
 public:
  BatchIterator(std::vector<Query> items, std::size_t batch_size, Rng& rng);

  // Draws a fresh shuffle and rewinds to the first batch.
  void start_epoch();
  // Next batch of the current epoch, or an empty span when exhausted.
  std::span<const Query> next();
  std::size_t batches_per_epoch() const;
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<Query> items_;
  std::vector<Query> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  Rng* rng_;
};

}  // namespace irn::kg
