// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Knowledge-base completion head: [h; r] encoder, tanh decoder, the
// L1-distance candidate softmax and the expected-reward objective.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "irn/irncore.hpp"
#include "irn/kgdata.hpp"
#include "irn/numcore.hpp"
#include "irn/rng.hpp"

namespace irn::kbc {

struct KbcConfig {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t entity_dim = 100;
  std::size_t relation_dim = 100;
  std::size_t memory_size = 64;
  std::size_t memory_dim = 200;
  std::size_t t_max = 5;
  double lambda = 10.0;
  double gamma = 5.0;
  std::size_t negatives = 20;
  // Also project output entity embeddings onto the unit sphere.
  bool normalize_output_entities = false;
  double init_scale = 0.08;

  std::size_t state_dim() const { return entity_dim + relation_dim; }
  core::ControllerConfig controller() const;
};

struct KbcModel {
  KbcConfig config;
  num::Parameter entity_in;   // [E x entity_dim]
  num::Parameter entity_out;  // [E x entity_dim]
  num::Parameter relation;    // [R x relation_dim]
  num::Parameter w_out;       // Wo: [entity_dim x state_dim]
  num::Parameter b_out;       // bo: [entity_dim]
  core::Controller controller;

  static KbcModel zeros(const KbcConfig& config);
  static KbcModel random(const KbcConfig& config, Rng& rng);

  std::vector<num::Parameter*> parameters();
  // Tables kept at unit row norm by the optimizer.
  std::vector<num::Parameter*> unit_norm_tables();
};

struct CandidateSet {
  std::vector<kg::EntityId> ids;
  std::size_t gold_index = 0;

  kg::EntityId gold() const { return ids.at(gold_index); }
};

// Gold first, then the negatives. Throws on duplicates or a negative equal
// to gold.
CandidateSet make_candidates(kg::EntityId gold, std::span<const kg::EntityId> negatives);
// Gold plus config.negatives fresh uniform negatives.
CandidateSet sample_candidates(const KbcModel& model, kg::EntityId gold, Rng& rng);

num::Var encode(num::Tape& tape, KbcModel& model, const kg::Query& query);
num::Var decode(KbcModel& model, num::Var state);
// p(y | o) over the candidates, proportional to exp(-gamma * |o - y|_1).
num::Var candidate_distribution(KbcModel& model, num::Var o, std::span<const kg::EntityId> ids);
// -sum_t w_t p(gold | o_t).
num::Var objective(KbcModel& model, const core::StepTrace& trace, const CandidateSet& candidates);

// Encoder, unroll and objective for one query.
num::Var query_loss(num::Tape& tape, KbcModel& model, const kg::Query& query,
                    const CandidateSet& candidates, num::Var keys = {});

// Full per-step detail of scoring one query against every entity.
struct QueryScores {
  std::vector<double> scores;                   // sum_t w_t p(y | o_t)
  std::vector<std::vector<double>> step_probs;  // p(y | o_t) per step
  std::vector<double> stop_probs;
  std::vector<double> mix_weights;
  std::vector<num::Tensor> states;
};

// Reusable read-only scorer. Memory keys and output tables are bound once;
// each query rewinds the tape to that point. One scorer per thread.
class Scorer {
 public:
  explicit Scorer(const KbcModel& model);

  std::vector<double> score(const kg::Query& query);
  QueryScores score_detailed(const kg::Query& query);

 private:
  QueryScores run(const kg::Query& query, bool detailed);

  KbcModel* model_;
  num::Tape tape_;
  num::Var keys_;
  num::Var out_table_;
  std::size_t mark_ = 0;
};

std::vector<double> score_all_entities(const KbcModel& model, const kg::Query& query);

}  // namespace irn::kbc
