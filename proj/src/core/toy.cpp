// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/toy.hpp"

#include <vector>

namespace irn::toy {

kbc::KbcConfig gradcheck_kbc_config() {
  kbc::KbcConfig c;
  c.num_entities = 5;
  c.num_relations = 2;
  c.entity_dim = 8;
  c.relation_dim = 8;
  c.memory_size = 4;
  c.memory_dim = 16;
  c.t_max = 3;
  c.negatives = 2;
  // Wider than training init so gates and attention are far from trivial.
  c.init_scale = 0.5;
  return c;
}

num::GradCheckReport kbc_gradient_check(std::uint64_t seed, double tolerance, double step) {
  Rng rng(seed);
  kbc::KbcModel model = kbc::KbcModel::random(gradcheck_kbc_config(), rng);
  // Unit-norm rows from init are fine; also perturb the output biases and
  // the stop bias so no parameter sits at exactly zero.
  core::fill_uniform(model.b_out.value, rng, 0.5);
  core::fill_uniform(model.controller.b_stop.value, rng, 0.5);
  for (num::Parameter* p : model.controller.gru.parameters()) {
    if (p->value.rank() == 1) core::fill_uniform(p->value, rng, 0.5);
  }
  const std::vector<kg::Query> queries{{0, 0, 1, false}, {2, 1, 3, false}, {4, 0, 0, false}};
  std::vector<kbc::CandidateSet> candidates;
  for (const kg::Query& q : queries) candidates.push_back(kbc::sample_candidates(model, q.gold, rng));
  auto closure = [&](num::Tape& tape) {
    num::Var total;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const num::Var l = kbc::query_loss(tape, model, queries[i], candidates[i]);
      total = total.valid() ? num::add(total, l) : l;
    }
    return total;
  };
  return num::grad_check(closure, model.parameters(), tolerance, step);
}

num::GradCheckReport path_gradient_check(std::uint64_t seed, paths::PathObjective objective,
                                         double tolerance, double step) {
  Rng rng(seed);
  paths::PathModelConfig cfg;
  cfg.num_nodes = 6;
  cfg.embed_dim = 4;
  cfg.memory_size = 3;
  cfg.memory_dim = 5;
  cfg.t_max = 2;
  cfg.objective = objective;
  cfg.init_scale = 0.5;
  paths::PathModel model = paths::PathModel::random(cfg, rng);
  core::fill_uniform(model.b_token.value, rng, 0.5);
  core::fill_uniform(model.controller.b_stop.value, rng, 0.5);
  // Two hops plus end-of-sequence: three target tokens.
  const paths::PathInstance inst{1, 4, {1, 3, 4}, 0.0};
  auto closure = [&](num::Tape& tape) { return paths::path_loss(tape, model, inst); };
  return num::grad_check(closure, model.parameters(), tolerance, step);
}

}  // namespace irn::toy
