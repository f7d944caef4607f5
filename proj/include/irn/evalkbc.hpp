// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Filtered ranking metrics, per-step inference traces and memory attention
// reports.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "irn/kbchead.hpp"
#include "irn/kgdata.hpp"

namespace irn::eval {

// 1 + number of entities outside `known` (and other than gold) whose score
// is strictly greater than the gold score. `known` must be sorted.
std::size_t filtered_rank(std::span<const double> scores, kg::EntityId gold,
                          std::span<const kg::EntityId> known);
std::size_t filtered_rank(const kg::Query& query, std::span<const double> scores,
                          const kg::FilterIndex& filter);
std::size_t raw_rank(std::span<const double> scores, kg::EntityId gold);

struct RankingResult {
  std::vector<std::size_t> ranks;
  double mean_rank = 0.0;
  double hits_at_10 = 0.0;

  std::size_t count() const { return ranks.size(); }
};

// Throws ContractViolation on an empty rank list.
RankingResult summarize(std::vector<std::size_t> ranks);

// Scores every query against all entities. Queries are split into
// contiguous chunks across `threads` workers; ranks are stored by query
// position, so the result does not depend on the thread count.
RankingResult evaluate(const kbc::KbcModel& model, std::span<const kg::Query> queries,
                       const kg::FilterIndex& filter, std::size_t threads = 1);

// --- Traces ---------------------------------------------------------------------

using InputPair = std::pair<kg::EntityId, kg::RelationId>;

// Distinct (subject, relation) inputs of the training queries, sorted.
std::vector<InputPair> observed_inputs(std::span<const kg::Query> train);

struct Neighbor {
  kg::EntityId subject = 0;
  kg::RelationId relation = 0;
  double distance = 0.0;
};

struct TraceStep {
  std::size_t step = 0;
  double stop_prob = 0.0;
  double mix_weight = 0.0;
  std::size_t gold_rank = 0;  // raw rank under p(. | o_t)
  std::vector<std::pair<kg::EntityId, double>> top;
  std::vector<Neighbor> neighbors;
};

struct InferenceTrace {
  kg::Query query;
  std::vector<TraceStep> steps;
};

// Nearest inputs to `state` by L2 distance against their encoded [h; r]
// vectors; ties go to the earlier pair in `observed`.
std::vector<Neighbor> nearest_inputs(const kbc::KbcModel& model, std::span<const double> state,
                                     std::span<const InputPair> observed, std::size_t count);

InferenceTrace trace_inference(const kbc::KbcModel& model, const kg::Query& query,
                               std::span<const InputPair> observed, std::size_t top_k = 3,
                               std::size_t neighbors = 3);

std::string format_trace(const InferenceTrace& trace, const kg::Vocab& vocab);

// --- Memory report --------------------------------------------------------------

struct MemoryReport {
  std::size_t memory_size = 0;
  // averages.at(r, i): mean attention on cell i over every step of every
  // training query with relation r.
  num::Tensor averages;
  std::vector<std::size_t> counts;  // attention rows per relation
  std::vector<std::vector<std::pair<kg::RelationId, double>>> top;  // per cell
};

MemoryReport memory_report(const kbc::KbcModel& model, std::span<const kg::Query> train,
                           std::size_t k);

std::string format_memory_report(const MemoryReport& report, const kg::Vocab& vocab);

// --- Metric reports -------------------------------------------------------------

struct Metric {
  std::string name;
  std::string split;
  double value = 0.0;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

std::string metrics_text(std::span<const Metric> metrics);
// {"config": {...}, "metrics": [{"name", "split", "value"}, ...]}
std::string metrics_json(std::span<const Metric> metrics, const ConfigEntries& config = {});

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace irn::eval
