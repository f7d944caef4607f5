// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// The task-independent reasoning machine: a shared memory read by cosine
// attention, a GRU controller that rewrites its state from each readout, and
// a logistic termination gate.

#pragma once

#include <cstddef>
#include <vector>

#include "irn/numcore.hpp"
#include "irn/rng.hpp"

namespace irn::core {

struct ControllerConfig {
  std::size_t state_dim = 200;
  std::size_t memory_size = 64;
  std::size_t memory_dim = 200;
  std::size_t attention_dim = 200;
  double lambda = 10.0;
};

struct Controller {
  ControllerConfig config;
  num::Parameter memory;      // [memory_size x memory_dim]
  num::Parameter w_mem_key;   // W1: [attention_dim x memory_dim]
  num::Parameter w_state_key; // W2: [attention_dim x state_dim]
  num::Parameter w_stop;      // Wc: [state_dim]
  num::Parameter b_stop;      // bc: [1]
  num::GruWeights gru;        // input memory_dim, hidden state_dim

  // All-zero parameters of the configured shapes.
  static Controller zeros(const ControllerConfig& config);
  // Matrices and GRU weights uniform in [-scale, scale], biases zero, memory
  // rows Gaussian then unit-normalized.
  static Controller random(const ControllerConfig& config, Rng& rng, double scale = 0.08);

  std::vector<num::Parameter*> parameters();
};

// Per-step quantities of one unroll. attention/readouts hold T_max - 1
// entries: the last state is never followed by a memory read.
struct StepTrace {
  std::vector<num::Var> states;       // s_1 .. s_T
  std::vector<num::Var> attention;    // a_1 .. a_{T-1}
  std::vector<num::Var> readouts;     // x_1 .. x_{T-1}
  std::vector<num::Var> stop_probs;   // v_1 .. v_T, v_T a constant 1
  std::vector<num::Var> mix_weights;  // w_1 .. w_T

  std::size_t steps() const { return states.size(); }
};

// Rows W1 m_i, shared by every query on a tape.
num::Var memory_keys(num::Tape& tape, Controller& c);

struct Attention {
  num::Var weights;  // [memory_size]
  num::Var readout;  // [memory_dim]
};

// softmax_i(lambda * cos(W1 m_i, W2 s)) and x = sum_i a_i m_i.
Attention attend(Controller& c, num::Var keys, num::Var state);
Attention attend(Controller& c, num::Var state);

// sigmoid(Wc . s + bc), shape [1].
num::Var termination_prob(Controller& c, num::Var state);

// Deterministic unroll with the stop probability at t_max forced to 1.
// `keys` may be an invalid Var, in which case they are computed on demand.
StepTrace unroll(Controller& c, num::Var s1, std::size_t t_max, num::Var keys = {});

struct SampledInference {
  std::size_t stop_step = 0;  // 1-based
  std::vector<num::Tensor> states;
  std::vector<double> stop_probs;
};

// Stochastic inference: at each step draw u ~ U[0,1) and stop when
// u <= v_t, or unconditionally at t_max.
SampledInference sample_inference(Controller& c, const num::Tensor& s1, std::size_t t_max,
                                  Rng& rng);

// Scalar views of a trace.
std::vector<double> stop_values(const StepTrace& trace);
std::vector<double> mix_values(const StepTrace& trace);

// Uniform fill and row normalization helpers used by initializers.
void fill_uniform(num::Tensor& t, Rng& rng, double scale);
void normalize_rows(num::Tensor& t);

}  // namespace irn::core
