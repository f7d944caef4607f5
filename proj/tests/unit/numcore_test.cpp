// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/numcore.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "irn/error.hpp"
#include "irn/grad_check.hpp"
#include "irn/rng.hpp"

namespace irn::num {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

TEST(StableSoftmax, EqualLogitsAreUniform) {
  Tensor p = stable_softmax(Tensor::vector({0.0, 0.0, 0.0}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], 1.0 / 3.0, 1e-15);
}

TEST(StableSoftmax, LargeLogitsDoNotOverflow) {
  Tensor p = stable_softmax(Tensor::vector({1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(StableSoftmax, MatchesLongDoubleOracle) {
  Tensor p = stable_softmax(Tensor::vector({1.0, 2.0, 3.0}));
  long double z = expl(1.0L) + expl(2.0L) + expl(3.0L);
  EXPECT_NEAR(p[0], static_cast<double>(expl(1.0L) / z), 1e-15);
  EXPECT_NEAR(p[1], static_cast<double>(expl(2.0L) / z), 1e-15);
  EXPECT_NEAR(p[2], static_cast<double>(expl(3.0L) / z), 1e-15);
}

TEST(StableSoftmax, EmptyInputIsRejected) {
  EXPECT_THROW(stable_softmax(Tensor(Shape{0})), ContractViolation);
}

TEST(StableSoftmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor({1 + rng.index(30)}, rng, 50.0);
    Tensor p = stable_softmax(x);
    double total = 0.0;
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);

    Tensor shifted = x;
    const double c = rng.uniform(-500.0, 500.0);
    for (double& v : shifted.data()) v += c;
    Tensor q = stable_softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(CosineSim, Examples) {
  EXPECT_DOUBLE_EQ(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine_sim(Tensor::vector({0, 0}), Tensor::vector({1, 0})), 0.0);
  EXPECT_THROW(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({1, 0, 0})), ContractViolation);
}

TEST(CosineSim, SymmetricAndScaleInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    Tensor a = random_tensor({n}, rng);
    Tensor b = random_tensor({n}, rng);
    const double c = cosine_sim(a, b);
    EXPECT_LE(std::abs(c), 1.0 + 1e-15);
    EXPECT_EQ(c, cosine_sim(b, a));
    Tensor scaled = a;
    const double alpha = rng.uniform(0.01, 100.0);
    for (double& v : scaled.data()) v *= alpha;
    EXPECT_NEAR(cosine_sim(scaled, b), c, 1e-12);
  }
}

TEST(Gru, ZeroWeightsHalveTheState) {
  GruWeights w = GruWeights::zeros("g", 3, 4);
  Tape tape;
  Var h = tape.constant(Tensor::vector({0.8, -0.4, 2.0, 0.0}));
  Var x = tape.constant(Tensor::vector({1.0, 2.0, 3.0}));
  Tensor out = gru_step(w, h, x).value();
  EXPECT_EQ(out, Tensor::vector({0.4, -0.2, 1.0, 0.0}));
}

// Scalar-by-scalar GRU in long double, columns ordered [x; h].
std::vector<long double> gru_oracle(GruWeights& w, const Tensor& h, const Tensor& x) {
  const std::size_t n = w.hidden_size, m = w.input_size;
  auto pre = [&](const Tensor& wt, const Tensor& b, std::size_t row,
                 const std::vector<long double>& hh) {
    long double acc = b[row];
    for (std::size_t j = 0; j < m; ++j) acc += (long double)wt.at(row, j) * x[j];
    for (std::size_t j = 0; j < n; ++j) acc += (long double)wt.at(row, m + j) * hh[j];
    return acc;
  };
  std::vector<long double> hv(h.data().begin(), h.data().end());
  std::vector<long double> z(n), r(n), rh(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = 1.0L / (1.0L + expl(-pre(w.w_update.value, w.b_update.value, i, hv)));
    r[i] = 1.0L / (1.0L + expl(-pre(w.w_reset.value, w.b_reset.value, i, hv)));
    rh[i] = r[i] * hv[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const long double c = tanhl(pre(w.w_candidate.value, w.b_candidate.value, i, rh));
    out[i] = (1.0L - z[i]) * hv[i] + z[i] * c;
  }
  return out;
}

TEST(Gru, MatchesScalarOracle) {
  Rng rng(2026);
  GruWeights w = GruWeights::zeros("g", 3, 4);
  for (Parameter* p : w.parameters()) p->value = random_tensor(p->value.shape(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor h = random_tensor({4}, rng);
    Tensor x = random_tensor({3}, rng);
    Tape tape;
    Tensor out = gru_step(w, tape.constant(h), tape.constant(x)).value();
    std::vector<long double> want = gru_oracle(w, h, x);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], static_cast<double>(want[i]), 1e-14);
  }
}

TEST(Gru, DimensionMismatchIsRejected) {
  GruWeights w = GruWeights::zeros("g", 3, 4);
  Tape tape;
  EXPECT_THROW(gru_step(w, tape.constant(Tensor({3})), tape.constant(Tensor({3}))),
               ContractViolation);
  EXPECT_THROW(gru_step(w, tape.constant(Tensor({4})), tape.constant(Tensor({4}))),
               ContractViolation);
}

TEST(Backward, SumGivesOnes) {
  Parameter p("p", Tensor::vector({1.0, -2.0, 3.0}));
  Tape tape;
  tape.backward(sum(tape.param(p)));
  EXPECT_EQ(p.grad, Tensor::vector({1.0, 1.0, 1.0}));
}

TEST(Backward, L1DistanceGivesSigns) {
  Parameter o("o", Tensor::vector({0.5, -1.0, 2.0}));
  Tape tape;
  Var y = tape.constant(Tensor::vector({0.0, 1.0, 2.0}));
  tape.backward(l1_distance(tape.param(o), y));
  EXPECT_EQ(o.grad, Tensor::vector({1.0, -1.0, 0.0}));
}

TEST(Backward, NonScalarLossIsRejected) {
  Parameter p("p", Tensor::vector({1.0, 2.0}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(p)), ContractViolation);
}

TEST(Backward, UnreachableParameterKeepsZeroGrad) {
  Parameter used("used", Tensor::vector({1.0, 2.0}));
  Parameter unused("unused", Tensor::vector({3.0, 4.0}));
  Tape tape;
  tape.param(unused);
  tape.backward(sum(tape.param(used)));
  EXPECT_EQ(unused.grad, Tensor(Shape{2}));
}

TEST(Backward, InferenceTapeRefusesBackward) {
  Parameter p("p", Tensor({2, 2}, 1.0));
  Tape tape;
  tape.set_inference(true);
  Var r = row(tape, p, 1);
  EXPECT_EQ(std::count(p.touched.begin(), p.touched.end(), 1), 0);
  EXPECT_THROW(tape.backward(sum(r)), ContractViolation);
}

TEST(Backward, RowLookupsMarkRows) {
  Parameter p("p", Tensor({4, 2}, 1.0));
  Tape tape;
  const std::size_t ids[] = {3, 1};
  tape.backward(sum(gather_rows(tape, p, ids)));
  EXPECT_EQ(p.touched, (std::vector<std::uint8_t>{0, 1, 0, 1}));
  EXPECT_EQ(p.grad.at(0, 0), 0.0);
  EXPECT_EQ(p.grad.at(3, 1), 1.0);
}

TEST(GradCheck, QuadraticIsExact) {
  Rng rng(3);
  Parameter w("w", random_tensor({6}, rng));
  Parameter* params[] = {&w};
  auto closure = [&](Tape& t) {
    Var v = t.param(w);
    return scale(dot(v, v), 0.5);
  };
  GradCheckReport report = grad_check(closure, params, 1e-8);
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.max_error(), 1e-8);
}

TEST(GradCheck, FlagsOnlyTheBrokenOperation) {
  Rng rng(4);
  Parameter a("a", random_tensor({3}, rng));
  Parameter b("b", random_tensor({3}, rng));
  Parameter* params[] = {&a, &b};
  // d/da of sum(a * a) reported as a instead of 2a.
  auto broken_square = [](Var v) {
    Tape& tape = v.tape();
    Tensor out = v.value();
    for (double& x : out.data()) x *= x;
    const std::size_t in = v.id();
    return tape.record(out, "broken_square", [in](Tape& t, std::size_t self) {
      const Tensor g = t.grad(self);
      const Tensor& x = t.value(in);
      Tensor& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * x[i];
    });
  };
  auto closure = [&](Tape& t) {
    return add(sum(broken_square(t.param(a))), sum(tanh(t.param(b))));
  };
  GradCheckReport report = grad_check(closure, params, 1e-4);
  EXPECT_EQ(report.failing(), std::vector<std::string>{"a"});
}

TEST(GradCheck, NonFiniteLossNamesTheParameter) {
  Parameter a("weights", Tensor::vector({0.0}));
  Parameter* params[] = {&a};
  auto closure = [&](Tape& t) {
    Var v = t.param(a);
    // Finite at the base point, overflows once perturbed upward by the step.
    Tensor big({1}, 709.782705);
    return sum(exp(add(v, t.constant(big))));
  };
  try {
    grad_check(closure, params, 1e-4);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

// Every primitive against central differences on random inputs.
TEST(GradCheck, EveryPrimitive) {
  Rng rng(99);
  Parameter a("a", random_tensor({4}, rng));
  Parameter b("b", random_tensor({4}, rng));
  Parameter m("m", random_tensor({3, 4}, rng));
  Parameter k("k", random_tensor({5, 4}, rng));
  Parameter table("table", random_tensor({6, 4}, rng));
  GruWeights gru = GruWeights::zeros("gru", 4, 3);
  for (Parameter* p : gru.parameters()) p->value = random_tensor(p->value.shape(), rng);
  // Keep l1 terms away from ties.
  for (std::size_t i = 0; i < 4; ++i) b.value[i] = a.value[i] + (i % 2 ? 0.3 : -0.4);

  std::vector<Parameter*> params = {&a, &b, &m, &k, &table};
  for (Parameter* p : gru.parameters()) params.push_back(p);

  auto closure = [&](Tape& t) {
    Var va = t.param(a), vb = t.param(b), vm = t.param(m), vk = t.param(k);
    const std::size_t ids[] = {2, 5, 2, 0, 1};
    Var terms[] = {
        sum(mul(sigmoid(va), sub(vb, affine(va, 0.5, 0.1)))),
        dot(matvec(vm, va), slice(concat(vb, va), 2, 3)),
        sum(mul(softmax(matvec(vk, vb)), log_softmax(matvec(vk, va)))),
        sum(vecmat(softmax(cosine_rows(vk, va)), vk)),
        cosine(va, vb),
        sum(l1_rows(vk, vb)),
        l1_distance(va, vb),
        pick(exp(scale(va, 0.7)), 3),
        sum(matmul_nt(vm, vk)),
        sum(mul(gather_rows(t, table, ids), vk)),
        dot(row(t, table, 4), va),
        sum(tanh(gru_step(gru, slice(va, 0, 3), vb))),
    };
    Var total = terms[0];
    for (std::size_t i = 1; i < std::size(terms); ++i) total = add(total, terms[i]);
    return total;
  };
  GradCheckReport report = grad_check(closure, params, 1e-4);
  EXPECT_TRUE(report.passed()) << report.to_text();
}

TEST(Determinism, TwoPassesAreBitIdentical) {
  auto run = [] {
    Rng rng(17);
    Parameter k("k", random_tensor({8, 5}, rng));
    Parameter q("q", random_tensor({5}, rng));
    Tape tape;
    Var s = sum(mul(softmax(scale(cosine_rows(tape.param(k), tape.param(q)), 10.0)),
                    tape.constant(random_tensor({8}, rng))));
    tape.backward(s);
    return std::make_tuple(s.scalar(), k.grad, q.grad);
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, RewindDropsLaterNodes) {
  Tape tape;
  tape.constant(Tensor::vector({1.0}));
  const std::size_t mark = tape.mark();
  tape.constant(Tensor::vector({2.0}));
  tape.rewind(mark);
  EXPECT_EQ(tape.size(), 1u);
  EXPECT_THROW(tape.rewind(5), ContractViolation);
}

TEST(Tensor, ShapeMismatchesAreShapeErrors) {
  Tape tape;
  Var w = tape.constant(Tensor({2, 3}));
  EXPECT_THROW(matvec(w, tape.constant(Tensor({2}))), ShapeError);
  EXPECT_THROW(add(tape.constant(Tensor({2})), tape.constant(Tensor({3}))), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), ShapeError);
}

}  // namespace
}  // namespace irn::num
