// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/kbchead.hpp"

#include <algorithm>

#include "irn/error.hpp"

namespace irn::kbc {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

core::ControllerConfig KbcConfig::controller() const {
  core::ControllerConfig c;
  c.state_dim = state_dim();
  c.memory_size = memory_size;
  c.memory_dim = memory_dim;
  c.attention_dim = memory_dim;
  c.lambda = lambda;
  return c;
}

KbcModel KbcModel::zeros(const KbcConfig& cfg) {
  IRN_EXPECTS(cfg.num_entities > 0 && cfg.num_relations > 0,
              "KbcModel: entity and relation counts must be positive");
  IRN_EXPECTS(cfg.entity_dim > 0 && cfg.relation_dim > 0, "KbcModel: dims must be positive");
  IRN_EXPECTS(cfg.t_max >= 1, "KbcModel: T_max must be at least 1");
  KbcModel m;
  m.config = cfg;
  m.entity_in = Parameter("entity_in", Tensor({cfg.num_entities, cfg.entity_dim}));
  m.entity_out = Parameter("entity_out", Tensor({cfg.num_entities, cfg.entity_dim}));
  m.relation = Parameter("relation", Tensor({cfg.num_relations, cfg.relation_dim}));
  m.w_out = Parameter("decoder_w", Tensor({cfg.entity_dim, cfg.state_dim()}));
  m.b_out = Parameter("decoder_b", Tensor({cfg.entity_dim}));
  m.controller = core::Controller::zeros(cfg.controller());
  return m;
}

KbcModel KbcModel::random(const KbcConfig& cfg, Rng& rng) {
  KbcModel m = zeros(cfg);
  const double s = cfg.init_scale;
  core::fill_uniform(m.entity_in.value, rng, s);
  core::normalize_rows(m.entity_in.value);
  core::fill_uniform(m.entity_out.value, rng, s);
  core::normalize_rows(m.entity_out.value);
  core::fill_uniform(m.relation.value, rng, s);
  core::fill_uniform(m.w_out.value, rng, s);
  m.controller = core::Controller::random(cfg.controller(), rng, s);
  return m;
}

std::vector<Parameter*> KbcModel::parameters() {
  std::vector<Parameter*> out{&entity_in, &entity_out, &relation, &w_out, &b_out};
  for (Parameter* p : controller.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> KbcModel::unit_norm_tables() {
  std::vector<Parameter*> out{&entity_in};
  if (config.normalize_output_entities) out.push_back(&entity_out);
  return out;
}

CandidateSet make_candidates(kg::EntityId gold, std::span<const kg::EntityId> negatives) {
  CandidateSet set;
  set.ids.reserve(negatives.size() + 1);
  set.ids.push_back(gold);
  set.ids.insert(set.ids.end(), negatives.begin(), negatives.end());
  std::vector<kg::EntityId> sorted = set.ids;
  std::sort(sorted.begin(), sorted.end());
  IRN_EXPECTS(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
              "make_candidates: duplicate candidate or negative equal to gold");
  return set;
}

CandidateSet sample_candidates(const KbcModel& model, kg::EntityId gold, Rng& rng) {
  const auto neg =
      kg::sample_negatives(rng, gold, model.config.negatives, model.config.num_entities);
  return make_candidates(gold, neg);
}

Var encode(Tape& tape, KbcModel& model, const kg::Query& query) {
  IRN_EXPECTS(query.subject < model.config.num_entities,
              "encode: entity id " + std::to_string(query.subject) + " out of range");
  IRN_EXPECTS(query.relation < model.config.num_relations,
              "encode: relation id " + std::to_string(query.relation) + " out of range");
  return num::concat(num::row(tape, model.entity_in, query.subject),
                     num::row(tape, model.relation, query.relation));
}

Var decode(KbcModel& model, Var state) {
  Tape& tape = state.tape();
  return num::tanh(num::add(num::matvec(tape.param(model.w_out), state), tape.param(model.b_out)));
}

Var candidate_distribution(KbcModel& model, Var o, std::span<const kg::EntityId> ids) {
  IRN_EXPECTS(!ids.empty(), "candidate_distribution: empty candidate set");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (std::size_t r : rows) {
    IRN_EXPECTS(r < model.config.num_entities, "candidate_distribution: entity id out of range");
  }
  const Var table = num::gather_rows(o.tape(), model.entity_out, rows);
  return num::softmax(num::scale(num::l1_rows(table, o), -model.config.gamma));
}

Var objective(KbcModel& model, const core::StepTrace& trace, const CandidateSet& candidates) {
  IRN_EXPECTS(candidates.gold_index < candidates.ids.size(),
              "objective: gold missing from candidate set");
  IRN_EXPECTS(trace.steps() >= 1, "objective: empty trace");
  Var total;
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    const Var o = decode(model, trace.states[t]);
    const Var p = candidate_distribution(model, o, candidates.ids);
    const Var term = num::mul(trace.mix_weights[t], num::pick(p, candidates.gold_index));
    total = total.valid() ? num::add(total, term) : term;
  }
  return num::scale(total, -1.0);
}

Var query_loss(Tape& tape, KbcModel& model, const kg::Query& query,
               const CandidateSet& candidates, Var keys) {
  IRN_EXPECTS(candidates.gold() == query.gold, "query_loss: candidate gold differs from query");
  const Var s1 = encode(tape, model, query);
  const core::StepTrace trace = core::unroll(model.controller, s1, model.config.t_max, keys);
  return objective(model, trace, candidates);
}

// --- Scorer ---------------------------------------------------------------------

Scorer::Scorer(const KbcModel& model)
    // Inference tapes never write through the parameter handles.
    : model_(const_cast<KbcModel*>(&model)) {
  tape_.set_inference(true);
  keys_ = core::memory_keys(tape_, model_->controller);
  out_table_ = tape_.param(model_->entity_out);
  mark_ = tape_.mark();
}

QueryScores Scorer::run(const kg::Query& query, bool detailed) {
  tape_.rewind(mark_);
  KbcModel& m = *model_;
  const Var s1 = encode(tape_, m, query);
  const core::StepTrace trace = core::unroll(m.controller, s1, m.config.t_max, keys_);
  QueryScores out;
  out.scores.assign(m.config.num_entities, 0.0);
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    const Var o = decode(m, trace.states[t]);
    const Var p = num::softmax(num::scale(num::l1_rows(out_table_, o), -m.config.gamma));
    const double w = trace.mix_weights[t].scalar();
    const Tensor& pv = p.value();
    for (std::size_t e = 0; e < out.scores.size(); ++e) out.scores[e] += w * pv[e];
    if (!detailed) continue;
    out.step_probs.emplace_back(pv.data().begin(), pv.data().end());
    out.stop_probs.push_back(trace.stop_probs[t].scalar());
    out.mix_weights.push_back(w);
    out.states.push_back(trace.states[t].value());
  }
  tape_.rewind(mark_);
  return out;
}

QueryScores Scorer::score_detailed(const kg::Query& query) { return run(query, true); }

std::vector<double> Scorer::score(const kg::Query& query) { return run(query, false).scores; }

std::vector<double> score_all_entities(const KbcModel& model, const kg::Query& query) {
  Scorer scorer(model);
  return scorer.score(query);
}

}  // namespace irn::kbc
