// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "irn/error.hpp"

namespace irn::num {

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_or_zero(double x) { return (x > 0.0) - (x < 0.0); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(a.shape()));
  }
}

void require_same_tape(Var a, Var b, const char* op) {
  IRN_EXPECTS(&a.tape() == &b.tape(), std::string(op) + ": operands on different tapes");
}

}  // namespace

// --- Tensor -------------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("Tensor: shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t cols = shape_.at(1);
  return {data_.data() + r * cols, cols};
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t cols = shape_.at(1);
  return {data_.data() + r * cols, cols};
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

// --- Parameter ------------------------------------------------------------------

Parameter::Parameter(std::string name_in, Tensor value_in)
    : name(std::move(name_in)), value(std::move(value_in)), grad(value.shape()) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  grad.fill(0.0);
  std::fill(touched.begin(), touched.end(), std::uint8_t{0});
}

void Parameter::mark_row(std::size_t r) {
  if (touched.size() != value.dim(0)) touched.assign(value.dim(0), 0);
  touched[r] = 1;
}

// --- Var / Tape -----------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  IRN_EXPECTS(v.size() == 1, "Var::scalar: node holds " + shape_string(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) { return record(std::move(value), "constant", nullptr); }

Var Tape::param(Parameter& parameter) {
  if (!inference_ && parameter.grad.shape() != parameter.value.shape()) {
    parameter.grad = Tensor(parameter.value.shape());
  }
  Node node;
  node.parameter = &parameter;
  node.kind = "param";
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::string_view kind, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  node.kind = kind;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.parameter ? node.parameter->value : node.value;
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.parameter) return node.parameter->grad;
  if (!node.grad_live) {
    node.grad = Tensor(node.value.shape());
    node.grad_live = true;
  }
  return node.grad;
}

bool Tape::has_grad(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.parameter != nullptr || node.grad_live;
}

void Tape::backward(Var loss) {
  IRN_EXPECTS(&loss.tape() == this, "Tape::backward: loss belongs to another tape");
  IRN_EXPECTS(!inference_, "Tape::backward: called on an inference tape");
  IRN_EXPECTS(value(loss.id()).size() == 1,
              "Tape::backward: loss must be scalar, got " +
                  shape_string(value(loss.id()).shape()));
  grad(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.parameter || !node.grad_live || !node.backward) continue;
    node.backward(*this, i);
  }
}

void Tape::rewind(std::size_t mark) {
  IRN_EXPECTS(mark <= nodes_.size(), "Tape::rewind: mark beyond tape end");
  nodes_.resize(mark);
}

// --- Plain functions ------------------------------------------------------------

Tensor stable_softmax(const Tensor& logits) {
  IRN_EXPECTS(logits.rank() == 1 && logits.size() > 0,
              "stable_softmax: expects a non-empty rank-1 tensor");
  const auto x = logits.data();
  const double top = *std::max_element(x.begin(), x.end());
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
  return out;
}

double cosine_sim(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ContractViolation("cosine_sim: length mismatch " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::max(std::sqrt(aa) * std::sqrt(bb), kCosineEpsilon);
}

// --- Elementwise ------------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), "add", [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = t.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), "sub", [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = t.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), "mul", [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    const Tensor& av = t.value(ia);
    Tensor& gb = t.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scale(Var a, double factor) { return affine(a, factor, 0.0); }

Var affine(Var a, double factor, double offset) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * out[i] + offset;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), "affine", [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), "sigmoid", [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), "tanh", [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

// --- Linear algebra -------------------------------------------------------------

Var matvec(Var w, Var x) {
  require_same_tape(w, x, "matvec");
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  require_rank(wv, 2, "matvec");
  require_rank(xv, 1, "matvec");
  const std::size_t m = wv.dim(0), n = wv.dim(1);
  if (xv.size() != n) {
    throw ShapeError("matvec: " + shape_string(wv.shape()) + " times " +
                     shape_string(xv.shape()));
  }
  Tensor out({m});
  for (std::size_t r = 0; r < m; ++r) {
    const double* wr = wv.raw() + r * n;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * xv[c];
    out[r] = acc;
  }
  const std::size_t iw = w.id(), ix = x.id();
  return w.tape().record(std::move(out), "matvec", [iw, ix, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    {
      const Tensor& xv = t.value(ix);
      Tensor& gw = t.grad(iw);
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* row = gw.raw() + r * n;
        for (std::size_t c = 0; c < n; ++c) row[c] += gr * xv[c];
      }
    }
    const Tensor& wv = t.value(iw);
    Tensor& gx = t.grad(ix);
    for (std::size_t r = 0; r < m; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      const double* row = wv.raw() + r * n;
      for (std::size_t c = 0; c < n; ++c) gx[c] += gr * row[c];
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul_nt");
  require_rank(bv, 2, "matmul_nt");
  const std::size_t p = av.dim(0), n = av.dim(1), m = bv.dim(0);
  if (bv.dim(1) != n) {
    throw ShapeError("matmul_nt: " + shape_string(av.shape()) + " times transpose of " +
                     shape_string(bv.shape()));
  }
  Tensor out({p, m});
  for (std::size_t i = 0; i < p; ++i) {
    const double* ar = av.raw() + i * n;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = bv.raw() + j * n;
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += ar[k] * br[k];
      out.at(i, j) = acc;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), "matmul_nt",
                         [ia, ib, p, n, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           {
                             const Tensor& bv = t.value(ib);
                             Tensor& ga = t.grad(ia);
                             for (std::size_t i = 0; i < p; ++i) {
                               double* gar = ga.raw() + i * n;
                               for (std::size_t j = 0; j < m; ++j) {
                                 const double gij = g.at(i, j);
                                 if (gij == 0.0) continue;
                                 const double* br = bv.raw() + j * n;
                                 for (std::size_t k = 0; k < n; ++k) gar[k] += gij * br[k];
                               }
                             }
                           }
                           const Tensor& av = t.value(ia);
                           Tensor& gb = t.grad(ib);
                           for (std::size_t i = 0; i < p; ++i) {
                             const double* ar = av.raw() + i * n;
                             for (std::size_t j = 0; j < m; ++j) {
                               const double gij = g.at(i, j);
                               if (gij == 0.0) continue;
                               double* gbr = gb.raw() + j * n;
                               for (std::size_t k = 0; k < n; ++k) gbr[k] += gij * ar[k];
                             }
                           }
                         });
}

Var vecmat(Var a, Var x) {
  require_same_tape(a, x, "vecmat");
  const Tensor& av = a.value();
  const Tensor& xv = x.value();
  require_rank(av, 1, "vecmat");
  require_rank(xv, 2, "vecmat");
  const std::size_t p = xv.dim(0), d = xv.dim(1);
  if (av.size() != p) {
    throw ShapeError("vecmat: " + shape_string(av.shape()) + " times " +
                     shape_string(xv.shape()));
  }
  Tensor out({d});
  for (std::size_t i = 0; i < p; ++i) {
    const double ai = av[i];
    const double* xr = xv.raw() + i * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += ai * xr[c];
  }
  const std::size_t ia = a.id(), ix = x.id();
  return a.tape().record(std::move(out), "vecmat", [ia, ix, p, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    {
      const Tensor& xv = t.value(ix);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < p; ++i) {
        const double* xr = xv.raw() + i * d;
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += g[c] * xr[c];
        ga[i] += acc;
      }
    }
    const Tensor& av = t.value(ia);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < p; ++i) {
      const double ai = av[i];
      double* gr = gx.raw() + i * d;
      for (std::size_t c = 0; c < d; ++c) gr[c] += ai * g[c];
    }
  });
}

// --- Structural -----------------------------------------------------------------

Var concat(Var a, Var b) {
  require_same_tape(a, b, "concat");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 1, "concat");
  require_rank(bv, 1, "concat");
  const std::size_t na = av.size(), nb = bv.size();
  std::vector<double> data;
  data.reserve(na + nb);
  data.insert(data.end(), av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::vector(std::move(data)), "concat",
                         [ia, ib, na, nb](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           {
                             Tensor& ga = t.grad(ia);
                             for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                           }
                           Tensor& gb = t.grad(ib);
                           for (std::size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
                         });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& av = a.value();
  require_rank(av, 1, "slice");
  IRN_EXPECTS(offset + length <= av.size(), "slice: range outside tensor");
  std::vector<double> data(av.data().begin() + offset, av.data().begin() + offset + length);
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::vector(std::move(data)), "slice",
                         [ia, offset, length](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t i = 0; i < length; ++i) ga[offset + i] += g[i];
                         });
}

Var dot(Var a, Var b) {
  require_same_tape(a, b, "dot");
  require_same_shape(a.value(), b.value(), "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::vector({acc}), "dot", [ia, ib](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    const Tensor& av = t.value(ia);
    Tensor& gb = t.grad(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double acc = 0.0;
  for (double v : av.data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::vector({acc}), "sum", [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var pick(Var a, std::size_t index) {
  const Tensor& av = a.value();
  IRN_EXPECTS(index < av.size(), "pick: index " + std::to_string(index) + " outside " +
                                     shape_string(av.shape()));
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::vector({av[index]}), "pick",
                         [ia, index](Tape& t, std::size_t self) {
                           t.grad(ia)[index] += t.grad(self)[0];
                         });
}

// --- Normalizers ------------------------------------------------------------------

Var softmax(Var logits) {
  const std::size_t ia = logits.id();
  return logits.tape().record(stable_softmax(logits.value()), "softmax",
                              [ia](Tape& t, std::size_t self) {
                                const Tensor& g = t.grad(self);
                                const Tensor& y = t.value(self);
                                double gy = 0.0;
                                for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
                                Tensor& ga = t.grad(ia);
                                for (std::size_t i = 0; i < y.size(); ++i) {
                                  ga[i] += y[i] * (g[i] - gy);
                                }
                              });
}

Var log_softmax(Var logits) {
  const Tensor& x = logits.value();
  IRN_EXPECTS(x.rank() == 1 && x.size() > 0, "log_softmax: expects a non-empty rank-1 tensor");
  const double top = *std::max_element(x.data().begin(), x.data().end());
  double total = 0.0;
  for (double v : x.data()) total += std::exp(v - top);
  const double lse = top + std::log(total);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  const std::size_t ia = logits.id();
  return logits.tape().record(std::move(out), "log_softmax", [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double gsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gsum += g[i];
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * gsum;
  });
}

Var exp(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), "exp", [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
}

// --- Similarities and distances -------------------------------------------------

namespace {

// Shared kernel for cosine and cosine_rows. Returns the similarity and adds
// g * d(cos)/d(a) into ga and g * d(cos)/d(b) into gb when they are non-null.
struct CosineParts {
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0, denom = 0.0, value = 0.0;
};

CosineParts cosine_parts(const double* a, const double* b, std::size_t n) {
  CosineParts p;
  double aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p.dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  p.norm_a = std::sqrt(aa);
  p.norm_b = std::sqrt(bb);
  p.denom = std::max(p.norm_a * p.norm_b, kCosineEpsilon);
  p.value = p.dot / p.denom;
  return p;
}

void cosine_backward(const CosineParts& p, double g, const double* a, const double* b,
                     double* ga, double* gb, std::size_t n) {
  if (g == 0.0) return;
  const bool guarded = p.norm_a * p.norm_b <= kCosineEpsilon;
  for (std::size_t i = 0; i < n; ++i) {
    double da = b[i] / p.denom;
    double db = a[i] / p.denom;
    if (!guarded) {
      da -= p.value * a[i] / (p.norm_a * p.norm_a);
      db -= p.value * b[i] / (p.norm_b * p.norm_b);
    }
    if (ga) ga[i] += g * da;
    if (gb) gb[i] += g * db;
  }
}

}  // namespace

Var cosine(Var a, Var b) {
  require_same_tape(a, b, "cosine");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() != bv.size()) {
    throw ContractViolation("cosine: length mismatch " + std::to_string(av.size()) + " vs " +
                            std::to_string(bv.size()));
  }
  const CosineParts parts = cosine_parts(av.raw(), bv.raw(), av.size());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::vector({parts.value}), "cosine",
                         [ia, ib, parts](Tape& t, std::size_t self) {
                           const double g = t.grad(self)[0];
                           const Tensor& av = t.value(ia);
                           const Tensor& bv = t.value(ib);
                           Tensor& ga = t.grad(ia);
                           Tensor& gb = t.grad(ib);
                           cosine_backward(parts, g, av.raw(), bv.raw(), ga.raw(), gb.raw(),
                                           av.size());
                         });
}

Var cosine_rows(Var k, Var q) {
  require_same_tape(k, q, "cosine_rows");
  const Tensor& kv = k.value();
  const Tensor& qv = q.value();
  require_rank(kv, 2, "cosine_rows");
  require_rank(qv, 1, "cosine_rows");
  const std::size_t p = kv.dim(0), d = kv.dim(1);
  if (qv.size() != d) {
    throw ShapeError("cosine_rows: rows " + shape_string(kv.shape()) + " vs query " +
                     shape_string(qv.shape()));
  }
  std::vector<CosineParts> parts(p);
  Tensor out({p});
  for (std::size_t i = 0; i < p; ++i) {
    parts[i] = cosine_parts(kv.raw() + i * d, qv.raw(), d);
    out[i] = parts[i].value;
  }
  const std::size_t ik = k.id(), iq = q.id();
  return k.tape().record(std::move(out), "cosine_rows",
                         [ik, iq, p, d, parts = std::move(parts)](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& kv = t.value(ik);
                           const Tensor& qv = t.value(iq);
                           Tensor& gk = t.grad(ik);
                           Tensor& gq = t.grad(iq);
                           for (std::size_t i = 0; i < p; ++i) {
                             cosine_backward(parts[i], g[i], kv.raw() + i * d, qv.raw(),
                                             gk.raw() + i * d, gq.raw(), d);
                           }
                         });
}

Var l1_rows(Var y, Var o) {
  require_same_tape(y, o, "l1_rows");
  const Tensor& yv = y.value();
  const Tensor& ov = o.value();
  require_rank(yv, 2, "l1_rows");
  require_rank(ov, 1, "l1_rows");
  const std::size_t k = yv.dim(0), d = yv.dim(1);
  if (ov.size() != d) {
    throw ShapeError("l1_rows: rows " + shape_string(yv.shape()) + " vs " +
                     shape_string(ov.shape()));
  }
  Tensor out({k});
  for (std::size_t i = 0; i < k; ++i) {
    const double* yr = yv.raw() + i * d;
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += std::abs(yr[c] - ov[c]);
    out[i] = acc;
  }
  const std::size_t iy = y.id(), io = o.id();
  return y.tape().record(std::move(out), "l1_rows", [iy, io, k, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& yv = t.value(iy);
    const Tensor& ov = t.value(io);
    Tensor& gy = t.grad(iy);
    Tensor& go = t.grad(io);
    for (std::size_t i = 0; i < k; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      const double* yr = yv.raw() + i * d;
      double* gyr = gy.raw() + i * d;
      for (std::size_t c = 0; c < d; ++c) {
        const double s = sign_or_zero(yr[c] - ov[c]);
        gyr[c] += gi * s;
        go[c] -= gi * s;
      }
    }
  });
}

Var l1_distance(Var a, Var b) {
  require_same_tape(a, b, "l1_distance");
  require_same_shape(a.value(), b.value(), "l1_distance");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::vector({acc}), "l1_distance",
                         [ia, ib](Tape& t, std::size_t self) {
                           const double g = t.grad(self)[0];
                           const Tensor& av = t.value(ia);
                           const Tensor& bv = t.value(ib);
                           Tensor& ga = t.grad(ia);
                           Tensor& gb = t.grad(ib);
                           for (std::size_t i = 0; i < av.size(); ++i) {
                             const double s = sign_or_zero(av[i] - bv[i]);
                             ga[i] += g * s;
                             gb[i] -= g * s;
                           }
                         });
}

// --- Table lookups ----------------------------------------------------------------

Var row(Tape& tape, Parameter& table, std::size_t index) {
  const Tensor& tv = table.value;
  require_rank(tv, 2, "row");
  IRN_EXPECTS(index < tv.dim(0), "row: index " + std::to_string(index) + " outside table '" +
                                     table.name + "' with " + std::to_string(tv.dim(0)) +
                                     " rows");
  if (!tape.inference()) table.mark_row(index);
  const auto r = tv.row(index);
  Parameter* source = &table;
  return tape.record(Tensor::vector(std::vector<double>(r.begin(), r.end())), "row",
                     [source, index](Tape& t, std::size_t self) {
                       const Tensor& g = t.grad(self);
                       if (source->grad.shape() != source->value.shape()) {
                         source->grad = Tensor(source->value.shape());
                       }
                       auto dst = source->grad.row(index);
                       for (std::size_t c = 0; c < g.size(); ++c) dst[c] += g[c];
                     });
}

Var gather_rows(Tape& tape, Parameter& table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value;
  require_rank(tv, 2, "gather_rows");
  const std::size_t d = tv.dim(1);
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    IRN_EXPECTS(ids[i] < tv.dim(0), "gather_rows: index " + std::to_string(ids[i]) +
                                        " outside table '" + table.name + "'");
    if (!tape.inference()) table.mark_row(ids[i]);
    const auto r = tv.row(ids[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  Parameter* source = &table;
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return tape.record(std::move(out), "gather_rows",
                     [source, rows = std::move(rows), d](Tape& t, std::size_t self) {
                       const Tensor& g = t.grad(self);
                       if (source->grad.shape() != source->value.shape()) {
                         source->grad = Tensor(source->value.shape());
                       }
                       for (std::size_t i = 0; i < rows.size(); ++i) {
                         auto dst = source->grad.row(rows[i]);
                         const double* src = g.raw() + i * d;
                         for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                       }
                     });
}

// --- GRU ------------------------------------------------------------------------

GruWeights GruWeights::zeros(const std::string& prefix, std::size_t input_size,
                             std::size_t hidden_size) {
  GruWeights w;
  w.input_size = input_size;
  w.hidden_size = hidden_size;
  const std::size_t fan_in = input_size + hidden_size;
  w.w_update = Parameter(prefix + ".w_update", Tensor({hidden_size, fan_in}));
  w.w_reset = Parameter(prefix + ".w_reset", Tensor({hidden_size, fan_in}));
  w.w_candidate = Parameter(prefix + ".w_candidate", Tensor({hidden_size, fan_in}));
  w.b_update = Parameter(prefix + ".b_update", Tensor({hidden_size}));
  w.b_reset = Parameter(prefix + ".b_reset", Tensor({hidden_size}));
  w.b_candidate = Parameter(prefix + ".b_candidate", Tensor({hidden_size}));
  return w;
}

std::vector<Parameter*> GruWeights::parameters() {
  return {&w_update, &w_reset, &w_candidate, &b_update, &b_reset, &b_candidate};
}

Var gru_step(GruWeights& weights, Var state, Var input) {
  const Tensor& hv = state.value();
  const Tensor& xv = input.value();
  if (hv.rank() != 1 || hv.size() != weights.hidden_size) {
    throw ContractViolation("gru_step: state " + shape_string(hv.shape()) +
                            " does not match hidden size " +
                            std::to_string(weights.hidden_size));
  }
  if (xv.rank() != 1 || xv.size() != weights.input_size) {
    throw ContractViolation("gru_step: input " + shape_string(xv.shape()) +
                            " does not match input size " + std::to_string(weights.input_size));
  }
  Tape& tape = state.tape();
  const Var xh = concat(input, state);
  const Var z = sigmoid(add(matvec(tape.param(weights.w_update), xh), tape.param(weights.b_update)));
  const Var r = sigmoid(add(matvec(tape.param(weights.w_reset), xh), tape.param(weights.b_reset)));
  const Var xrh = concat(input, mul(r, state));
  const Var candidate =
      tanh(add(matvec(tape.param(weights.w_candidate), xrh), tape.param(weights.b_candidate)));
  // (1 - z) * h + z * c
  return add(mul(affine(z, -1.0, 1.0), state), mul(z, candidate));
}

}  // namespace irn::num
