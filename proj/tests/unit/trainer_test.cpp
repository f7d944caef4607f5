// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include <unistd.h>

#include "irn/error.hpp"

namespace irn::train {
namespace {

using num::Parameter;
using num::Tensor;

// A chain e0 -r-> e1 -r-> ... -r-> e(n-1); valid and test take two links each.
kg::KbcData chain_kb(std::size_t n) {
  kg::LoadResult r;
  for (std::size_t i = 0; i < n; ++i) r.vocab.entities.intern("e" + std::to_string(i));
  r.vocab.relations.intern("next");
  r.vocab.entity_in_train.assign(n, true);
  r.vocab.relation_in_train.assign(1, true);
  for (kg::EntityId i = 0; i + 1 < n; ++i) {
    kg::Triple t{i, 0, i + 1};
    if (i == 3 || i == 8) {
      r.store.valid.push_back(t);
    } else if (i == 5 || i == 11) {
      r.store.test.push_back(t);
    } else {
      r.store.train.push_back(t);
    }
  }
  return kg::prepare(std::move(r));
}

kbc::KbcConfig tiny_model(const kg::KbcData& data) {
  kbc::KbcConfig c;
  c.num_entities = data.vocab.num_entities();
  c.num_relations = data.vocab.num_relations();
  c.entity_dim = 4;
  c.relation_dim = 4;
  c.memory_size = 4;
  c.memory_dim = 8;
  c.t_max = 3;
  c.negatives = 5;
  return c;
}

TEST(SgdStep, PlainUpdate) {
  Parameter p("w", Tensor::vector({1.0}));
  p.grad = Tensor::vector({2.0});
  Parameter* params[] = {&p};
  sgd_step(params, 0.01);
  EXPECT_DOUBLE_EQ(p.value[0], 0.98);
}

TEST(SgdStep, TouchedRowsAreRenormalized) {
  Parameter table("entity_in", Tensor({3, 2}, {0.6, 0.8, 1.0, 0.0, 0.0, 1.0}));
  table.zero_grad();
  table.grad.at(0, 0) = -10.0;
  table.grad.at(2, 1) = 3.0;
  table.mark_row(0);
  Parameter* params[] = {&table};
  sgd_step(params, 0.1, params);
  const double n0 = std::hypot(table.value.at(0, 0), table.value.at(0, 1));
  EXPECT_NEAR(n0, 1.0, 1e-12);
  // Row 2 was not touched by a lookup, so it keeps its updated norm.
  EXPECT_DOUBLE_EQ(table.value.at(2, 1), 0.7);
  EXPECT_EQ(table.value.at(1, 0), 1.0);
}

TEST(SgdStep, ZeroGradientLeavesUnitRowsUnchanged) {
  Parameter table("entity_in", Tensor({2, 2}, {0.6, 0.8, 0.0, 1.0}));
  const Tensor before = table.value;
  table.zero_grad();
  table.mark_row(0);
  table.mark_row(1);
  Parameter* params[] = {&table};
  sgd_step(params, 0.5, params);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(table.value[i], before[i], 1e-15);
}

TEST(SgdStep, NonFiniteGradientNamesTheParameter) {
  Parameter ok("fine", Tensor::vector({1.0}));
  Parameter bad("decoder_w", Tensor::vector({1.0}));
  ok.grad = Tensor::vector({0.5});
  bad.grad = Tensor::vector({std::numeric_limits<double>::quiet_NaN()});
  Parameter* params[] = {&ok, &bad};
  try {
    sgd_step(params, 0.1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder_w"), std::string::npos);
  }
  EXPECT_EQ(ok.value[0], 1.0);
}

TEST(ClipGradients, RescalesToGlobalNorm) {
  Parameter a("a", Tensor::vector({0.0, 0.0}));
  Parameter b("b", Tensor::vector({0.0}));
  a.grad = Tensor::vector({3.0, 0.0});
  b.grad = Tensor::vector({4.0});
  Parameter* params[] = {&a, &b};
  EXPECT_DOUBLE_EQ(clip_gradients(params, 1.0), 5.0);
  EXPECT_NEAR(gradient_norm(params), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(clip_gradients(params, 10.0), gradient_norm(params));
}

TEST(TrainKbc, LossFallsOverTraining) {
  kg::KbcData data = chain_kb(16);
  Rng init(1);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), init);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 4;
  cfg.epochs = 50;
  Rng rng(2);
  TrainResult r = train_kbc(model, data, cfg, rng);
  ASSERT_EQ(r.epochs.size(), 50u);
  // Fresh negatives each epoch make single epochs noisy; compare windows.
  auto window = [&r](std::size_t from) {
    double s = 0.0;
    for (std::size_t e = from; e < from + 5; ++e) s += r.epochs[e].mean_loss;
    return s / 5.0;
  };
  EXPECT_LT(window(45), window(0) - 0.2);
  EXPECT_LT(window(20), window(0));
}

TEST(TrainKbc, ZeroLearningRateFreezesParameters) {
  kg::KbcData data = chain_kb(10);
  Rng init(3);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), init);
  std::vector<Tensor> before;
  for (Parameter* p : model.parameters()) before.push_back(p->value);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 3;
  cfg.epochs = 3;
  Rng rng(4);
  train_kbc(model, data, cfg, rng);
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < before[i].size(); ++j) {
      EXPECT_NEAR(params[i]->value[j], before[i][j], 1e-15) << params[i]->name;
    }
  }
}

TEST(TrainKbc, EntityRowsStayUnitNorm) {
  kg::KbcData data = chain_kb(12);
  Rng init(5);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), init);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 2;
  cfg.epochs = 4;
  Rng rng(6);
  train_kbc(model, data, cfg, rng, [&](const EpochLog&) {
    for (std::size_t e = 0; e < model.config.num_entities; ++e) {
      double n = 0.0;
      for (double v : model.entity_in.value.row(e)) n += v * v;
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
    }
  });
}

TEST(TrainKbc, SameSeedSameTrajectory) {
  auto run = [] {
    kg::KbcData data = chain_kb(14);
    Rng init(7);
    kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), init);
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.batch_size = 4;
    cfg.epochs = 4;
    Rng rng(8);
    TrainResult r = train_kbc(model, data, cfg, rng);
    std::vector<double> trajectory;
    for (const EpochLog& e : r.epochs) {
      trajectory.push_back(e.mean_loss);
      trajectory.push_back(e.valid_hits_at_10);
    }
    return std::make_pair(trajectory, serialize_checkpoint(kbc_snapshot(model, cfg, 4, rng)));
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainKbc, KeepsBestValidationEpoch) {
  kg::KbcData data = chain_kb(16);
  Rng init(9);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), init);
  TrainConfig cfg;
  cfg.learning_rate = 0.3;
  cfg.batch_size = 4;
  cfg.epochs = 6;
  Rng rng(10);
  TrainResult r = train_kbc(model, data, cfg, rng);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const EpochLog& e : r.epochs) {
    if (e.valid_hits_at_10 > best) {
      best = e.valid_hits_at_10;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_valid_hits_at_10, best);
}

TEST(TrainKbc, InvalidConfigIsRejected) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(validate(cfg), ContractViolation);
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(validate(cfg), ContractViolation);
}

Checkpoint sample_checkpoint() {
  kg::KbcData data = chain_kb(8);
  Rng rng(11);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), rng);
  return kbc_snapshot(model, TrainConfig{}, 3, rng);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 4), "IRN1");
  Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_checkpoint(back), bytes);

  kbc::KbcModel restored = kbc_from_checkpoint(back);
  Checkpoint again = kbc_snapshot(restored, TrainConfig{}, 3, Rng(0));
  EXPECT_EQ(again.tensors, c.tensors);
}

TEST(Checkpoint, FileRoundTrip) {
  Checkpoint c = sample_checkpoint();
  const auto path = std::filesystem::temp_directory_path() /
                    ("irn_ckpt_" + std::to_string(::getpid()) + ".bin");
  save_checkpoint(path, c);
  EXPECT_EQ(load_checkpoint(path), c);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, CorruptMagic) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, VersionMismatchNamesBothVersions) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes[4] = 7;
  try {
    parse_checkpoint(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('7'), std::string::npos) << msg;
    EXPECT_NE(msg.find('1'), std::string::npos) << msg;
  }
}

TEST(Checkpoint, TruncationAndTrailingBytes) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(parse_checkpoint(bytes.substr(0, cut)), FormatError) << cut;
  }
  EXPECT_THROW(parse_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, WrongEntityCountNamesTheTable) {
  kg::KbcData data = chain_kb(8);
  Rng rng(12);
  kbc::KbcModel model = kbc::KbcModel::random(tiny_model(data), rng);
  kg::KbcData other = chain_kb(9);
  try {
    check_compatible(model, other.vocab);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("entity_in"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(check_compatible(model, data.vocab));
}

TEST(Checkpoint, ImportRejectsShapeMismatch) {
  Checkpoint c = sample_checkpoint();
  Parameter wrong("decoder_w", Tensor({2, 2}));
  Parameter* params[] = {&wrong};
  try {
    import_parameters(params, c);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder_w"), std::string::npos);
  }
  Parameter missing("not_there", Tensor({1}));
  Parameter* absent[] = {&missing};
  EXPECT_THROW(import_parameters(absent, c), FormatError);
}

TEST(Checkpoint, ConfigSurvives) {
  Checkpoint c = sample_checkpoint();
  kbc::KbcConfig cfg = kbc_config_from(c);
  EXPECT_EQ(cfg.num_entities, 8u);
  EXPECT_EQ(cfg.t_max, 3u);
  EXPECT_EQ(cfg.gamma, 5.0);
  EXPECT_EQ(c.kind, "kbc");
  EXPECT_EQ(c.epoch, 3u);
}

}  // namespace
}  // namespace irn::train
