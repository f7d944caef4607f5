// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Dense tensors and a reverse-mode tape covering exactly the primitives the
// reasoning network needs. All arithmetic is in double precision and every
// reduction runs in a fixed order, so forward and backward passes are
// bit-reproducible.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace irn::num {

using Shape = std::vector<std::size_t>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Row access for rank-2 tensors.
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Shape& shape);

// A trainable tensor with its gradient accumulator. Row-gather primitives
// mark the rows they read so an optimizer can restrict per-row projections
// to rows touched by the current batch.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;
  std::vector<std::uint8_t> touched;

  void zero_grad();
  void mark_row(std::size_t r);
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
// has not been rewound past it.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  double scalar() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of primitive applications. Nodes are appended in creation
// order and every input precedes its consumers, so walking the indices
// downward is an exact reverse topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; no copy is made and gradients flow straight
  // into parameter.grad.
  Var param(Parameter& parameter);
  // Appends a primitive. `backward` reads grad(self) and accumulates into the
  // gradients of its inputs.
  Var record(Tensor value, std::string_view kind, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const;
  std::string_view kind(std::size_t id) const { return nodes_.at(id).kind; }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Parameter
  // gradients accumulate (they are not cleared first).
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  std::size_t mark() const { return nodes_.size(); }

  // Inference tapes never write to parameters: row lookups skip touch
  // tracking and backward() is refused. Frozen models may then be read from
  // several threads, each with its own tape.
  void set_inference(bool on) { inference_ = on; }
  bool inference() const { return inference_; }
  // Drops every node created after `mark`.
  void rewind(std::size_t mark);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Parameter* parameter = nullptr;
    Tensor grad;
    bool grad_live = false;
    BackwardFn backward;
    std::string_view kind;
  };

  std::vector<Node> nodes_;
  bool inference_ = false;
};

// --- Plain tensor functions -------------------------------------------------

// Max-subtracted softmax of a rank-1 tensor.
Tensor stable_softmax(const Tensor& logits);
// cos(a, b) with denominator max(|a||b|, 1e-12).
double cosine_sim(const Tensor& a, const Tensor& b);

inline constexpr double kCosineEpsilon = 1e-12;

// --- Tape primitives ----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// factor * a + offset, elementwise.
Var affine(Var a, double factor, double offset);
Var sigmoid(Var a);
Var tanh(Var a);

// W [m x n] times x [n].
Var matvec(Var w, Var x);
// A [p x n] times B^T for B [m x n]; result [p x m].
Var matmul_nt(Var a, Var b);
// sum_i a_i * X_i for a [p], X [p x d]; result [d].
Var vecmat(Var a, Var x);

Var concat(Var a, Var b);
Var slice(Var a, std::size_t offset, std::size_t length);
Var dot(Var a, Var b);
Var sum(Var a);
Var pick(Var a, std::size_t index);

Var softmax(Var logits);
Var log_softmax(Var logits);
Var exp(Var a);

Var cosine(Var a, Var b);
// Cosine of every row of K [p x d] against q [d]; result [p].
Var cosine_rows(Var k, Var q);
// L1 distance of every row of Y [k x d] to o [d]; result [k]. The
// subgradient of |x| at x == 0 is taken as 0.
Var l1_rows(Var y, Var o);
Var l1_distance(Var a, Var b);

// Row lookups into a parameter table; gradients scatter back into the rows.
Var row(Tape& tape, Parameter& table, std::size_t index);
Var gather_rows(Tape& tape, Parameter& table, std::span<const std::size_t> ids);

// --- GRU cell -------------------------------------------------------------------

// Standard gated recurrent unit acting on x (input) and h (state):
//   z  = sigmoid(Wz [x; h] + bz)
//   r  = sigmoid(Wr [x; h] + br)
//   c  = tanh(Wc [x; r * h] + bc)
//   h' = (1 - z) * h + z * c
struct GruWeights {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Parameter w_update, w_reset, w_candidate;
  Parameter b_update, b_reset, b_candidate;

  static GruWeights zeros(const std::string& prefix, std::size_t input_size,
                          std::size_t hidden_size);
  std::vector<Parameter*> parameters();
};

Var gru_step(GruWeights& weights, Var state, Var input);

}  // namespace irn::num
