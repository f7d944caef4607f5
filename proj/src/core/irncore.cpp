// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/irncore.hpp"

#include <cmath>

#include "irn/error.hpp"

namespace irn::core {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

void fill_uniform(Tensor& t, Rng& rng, double scale) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
}

void normalize_rows(Tensor& t) {
  IRN_EXPECTS(t.rank() == 2, "normalize_rows: expects a matrix");
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    auto row = t.row(r);
    double n2 = 0.0;
    for (double v : row) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n == 0.0) continue;
    for (double& v : row) v /= n;
  }
}

Controller Controller::zeros(const ControllerConfig& cfg) {
  IRN_EXPECTS(cfg.state_dim > 0 && cfg.memory_size > 0 && cfg.memory_dim > 0 &&
                  cfg.attention_dim > 0,
              "Controller: dimensions must be positive");
  Controller c;
  c.config = cfg;
  c.memory = Parameter("memory", Tensor({cfg.memory_size, cfg.memory_dim}));
  c.w_mem_key = Parameter("attn_w_memory", Tensor({cfg.attention_dim, cfg.memory_dim}));
  c.w_state_key = Parameter("attn_w_state", Tensor({cfg.attention_dim, cfg.state_dim}));
  c.w_stop = Parameter("stop_w", Tensor({cfg.state_dim}));
  c.b_stop = Parameter("stop_b", Tensor({1}));
  c.gru = num::GruWeights::zeros("controller", cfg.memory_dim, cfg.state_dim);
  return c;
}

Controller Controller::random(const ControllerConfig& cfg, Rng& rng, double scale) {
  Controller c = zeros(cfg);
  for (std::size_t i = 0; i < c.memory.value.size(); ++i) c.memory.value[i] = rng.normal();
  normalize_rows(c.memory.value);
  fill_uniform(c.w_mem_key.value, rng, scale);
  fill_uniform(c.w_state_key.value, rng, scale);
  fill_uniform(c.w_stop.value, rng, scale);
  fill_uniform(c.gru.w_update.value, rng, scale);
  fill_uniform(c.gru.w_reset.value, rng, scale);
  fill_uniform(c.gru.w_candidate.value, rng, scale);
  return c;
}

std::vector<Parameter*> Controller::parameters() {
  std::vector<Parameter*> out{&memory, &w_mem_key, &w_state_key, &w_stop, &b_stop};
  for (Parameter* p : gru.parameters()) out.push_back(p);
  return out;
}

Var memory_keys(Tape& tape, Controller& c) {
  return num::matmul_nt(tape.param(c.memory), tape.param(c.w_mem_key));
}

Attention attend(Controller& c, Var keys, Var state) {
  Tape& tape = state.tape();
  if (state.value().size() != c.config.state_dim) {
    throw ShapeError("attend: state has " + std::to_string(state.value().size()) +
                     " components, controller expects " + std::to_string(c.config.state_dim));
  }
  const Var query = num::matvec(tape.param(c.w_state_key), state);
  const Var sims = num::cosine_rows(keys, query);
  const Var weights = num::softmax(num::scale(sims, c.config.lambda));
  const Var readout = num::vecmat(weights, tape.param(c.memory));
  return {weights, readout};
}

Attention attend(Controller& c, Var state) {
  return attend(c, memory_keys(state.tape(), c), state);
}

Var termination_prob(Controller& c, Var state) {
  Tape& tape = state.tape();
  const Var logit = num::add(num::dot(tape.param(c.w_stop), state), tape.param(c.b_stop));
  return num::sigmoid(logit);
}

StepTrace unroll(Controller& c, Var s1, std::size_t t_max, Var keys) {
  IRN_EXPECTS(t_max >= 1, "unroll: T_max must be at least 1");
  Tape& tape = s1.tape();
  StepTrace trace;
  Var state = s1;
  // remaining = prod_{i<t} (1 - v_i)
  Var remaining;
  for (std::size_t t = 1; t <= t_max; ++t) {
    trace.states.push_back(state);
    Var v;
    if (t == t_max) {
      v = tape.constant(Tensor::vector({1.0}));
    } else {
      v = termination_prob(c, state);
    }
    trace.stop_probs.push_back(v);
    trace.mix_weights.push_back(remaining.valid() ? num::mul(remaining, v) : v);
    if (t == t_max) break;
    const Var keep = num::affine(v, -1.0, 1.0);
    remaining = remaining.valid() ? num::mul(remaining, keep) : keep;
    if (!keys.valid()) keys = memory_keys(tape, c);
    const Attention read = attend(c, keys, state);
    trace.attention.push_back(read.weights);
    trace.readouts.push_back(read.readout);
    state = num::gru_step(c.gru, state, read.readout);
  }
  return trace;
}

SampledInference sample_inference(Controller& c, const Tensor& s1, std::size_t t_max, Rng& rng) {
  IRN_EXPECTS(t_max >= 1, "sample_inference: T_max must be at least 1");
  Tape tape;
  tape.set_inference(true);
  SampledInference out;
  Var state = tape.constant(s1);
  Var keys;
  for (std::size_t t = 1; t <= t_max; ++t) {
    out.states.push_back(state.value());
    if (t == t_max) {
      out.stop_probs.push_back(1.0);
      out.stop_step = t;
      break;
    }
    const double v = termination_prob(c, state).scalar();
    out.stop_probs.push_back(v);
    if (rng.uniform() <= v) {
      out.stop_step = t;
      break;
    }
    if (!keys.valid()) keys = memory_keys(tape, c);
    state = num::gru_step(c.gru, state, attend(c, keys, state).readout);
  }
  return out;
}

std::vector<double> stop_values(const StepTrace& trace) {
  std::vector<double> out;
  for (const Var& v : trace.stop_probs) out.push_back(v.scalar());
  return out;
}

std::vector<double> mix_values(const StepTrace& trace) {
  std::vector<double> out;
  for (const Var& w : trace.mix_weights) out.push_back(w.scalar());
  return out;
}

}  // namespace irn::core
