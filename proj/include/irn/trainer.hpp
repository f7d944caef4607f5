// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Plain SGD with global-norm clipping and unit-norm projection, the KBC
// training loop with validation-based model selection, and the binary
// checkpoint format.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "irn/kbchead.hpp"
#include "irn/kgdata.hpp"
#include "irn/numcore.hpp"
#include "irn/rng.hpp"

namespace irn::train {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  // Stop after this many epochs without a validation improvement; 0 = off.
  std::size_t patience = 0;
  std::uint64_t seed = 1;
  // Global L2 gradient clip; <= 0 disables clipping.
  double clip_norm = 5.0;
  std::size_t threads = 1;
  // Evaluate on at most this many validation queries; 0 = all.
  std::size_t valid_limit = 0;
};

void validate(const TrainConfig& config);

// Throws NumericError naming the first parameter holding a non-finite
// gradient.
void check_finite_gradients(std::span<num::Parameter* const> params);
double gradient_norm(std::span<num::Parameter* const> params);
// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(std::span<num::Parameter* const> params, double max_norm);

// p <- p - lr * g, then every touched row of each unit-norm table is
// rescaled to unit L2 norm.
void sgd_step(std::span<num::Parameter* const> params, double learning_rate,
              std::span<num::Parameter* const> unit_norm_tables = {});

// --- Checkpoints ----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  num::Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string kind;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t epoch = 0;
  std::string rng_state;
  std::vector<NamedTensor> tensors;

  const std::string& config_value(const std::string& key) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void export_parameters(std::span<num::Parameter* const> params, Checkpoint& ckpt);
// Copies tensors into matching parameters. A missing tensor is a FormatError;
// a shape mismatch is a ShapeError naming the table.
void import_parameters(std::span<num::Parameter* const> params, const Checkpoint& ckpt);

std::vector<std::pair<std::string, std::string>> kbc_config_entries(const kbc::KbcConfig& model,
                                                                    const TrainConfig& train);
kbc::KbcConfig kbc_config_from(const Checkpoint& ckpt);
// The optimizer settings recorded next to the model config.
TrainConfig train_config_from(const Checkpoint& ckpt);
Checkpoint kbc_snapshot(kbc::KbcModel& model, const TrainConfig& train, std::uint64_t epoch,
                        const Rng& rng);
kbc::KbcModel kbc_from_checkpoint(const Checkpoint& ckpt);
// ShapeError naming the table when the model does not fit the vocabulary.
void check_compatible(const kbc::KbcModel& model, const kg::Vocab& vocab);

// --- KBC training -----------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double valid_mean_rank = 0.0;
  double valid_hits_at_10 = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid_hits_at_10 = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains in place. With validation queries present the model ends holding
// the parameters of the epoch with the best validation Hits@10 (earliest on
// ties); otherwise those of the last epoch.
TrainResult train_kbc(kbc::KbcModel& model, const kg::KbcData& data, const TrainConfig& config,
                      Rng& rng, const EpochCallback& on_epoch = {});

// Mean loss of one pass over the queries without updating anything,
// using candidates drawn from rng.
double batch_loss(kbc::KbcModel& model, std::span<const kg::Query> batch, Rng& rng);

}  // namespace irn::train
