// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Shortest-path synthesis: a hidden weighted graph on the unit sphere,
// deduplicated shortest-path instances, an unweighted breadth-first
// baseline, and a reasoning network with a GRU sequence decoder.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "irn/irncore.hpp"
#include "irn/numcore.hpp"
#include "irn/rng.hpp"
#include "irn/trainer.hpp"

namespace irn::paths {

using NodeId = std::uint32_t;
using Path = std::vector<NodeId>;

enum class EdgeMode { kNearest, kRandom };

std::string_view edge_mode_name(EdgeMode mode);
EdgeMode parse_edge_mode(std::string_view name);

struct Graph {
  std::vector<std::array<double, 3>> positions;
  // Outgoing (target, weight) lists, sorted by target.
  std::vector<std::vector<std::pair<NodeId, double>>> adjacency;

  std::size_t size() const { return positions.size(); }
  std::size_t edge_count() const;
  // Weight of u -> v, or a negative value when there is no such edge.
  double edge_weight(NodeId u, NodeId v) const;
  bool has_edge(NodeId u, NodeId v) const { return edge_weight(u, v) >= 0.0; }
};

struct WorldConfig {
  std::size_t nodes = 100;
  std::size_t k = 8;
  EdgeMode mode = EdgeMode::kNearest;
  std::uint64_t seed = 1;
};

// Nodes uniform on the unit sphere (Gaussian draws, normalized; a draw that
// coincides with an earlier node is redrawn). In nearest mode each node links
// to its k nearest other nodes (ties to the lower id); in random mode to k
// distinct uniformly chosen others. Weights are Euclidean distances.
Graph generate_world(const WorldConfig& config);

struct ShortestPaths {
  std::vector<double> dist;  // infinity when unreachable
  std::vector<std::int64_t> prev;

  Path path_to(NodeId source, NodeId target) const;
};

ShortestPaths dijkstra(const Graph& graph, NodeId source);

struct PathInstance {
  NodeId start = 0;
  NodeId end = 0;
  Path path;
  double cost = 0.0;

  friend bool operator==(const PathInstance&, const PathInstance&) = default;
};

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t valid = 500;
  std::size_t test = 500;

  std::size_t total() const { return train + valid + test; }
};

struct PathDataset {
  std::vector<PathInstance> train;
  std::vector<PathInstance> valid;
  std::vector<PathInstance> test;

  friend bool operator==(const PathDataset&, const PathDataset&) = default;
};

// All ordered pairs (s, t), s != t, in lexicographic order, then shuffled by
// Fisher-Yates with rng: the order in which candidate instances are tried.
std::vector<std::pair<NodeId, NodeId>> pair_order(std::size_t nodes, Rng& rng);

// True when `inner` occurs as a contiguous run inside `outer`.
bool is_subpath(std::span<const NodeId> inner, std::span<const NodeId> outer);

// Walks pair_order(seed), taking each reachable pair's shortest path unless it
// is a contiguous sub-path or super-path of an accepted one. Accepted
// instances fill train, then valid, then test. SupplyError reports the
// achieved count when the pairs run out first.
PathDataset build_dataset(const Graph& graph, const SplitSizes& sizes, std::uint64_t seed);

// Every accepted instance when the walk runs to exhaustion.
std::vector<PathInstance> accept_all(const Graph& graph, std::uint64_t seed);

// Breadth-first, hop-minimal paths over edges seen in training paths;
// neighbours are visited in ascending id. Unreachable pairs give an empty
// prediction.
std::vector<Path> dp_baseline(std::span<const PathInstance> train,
                              std::span<const PathInstance> queries, std::size_t nodes);

struct PathScore {
  bool valid = false;
  bool correct = false;
};

struct PathMetrics {
  std::size_t count = 0;
  std::size_t valid = 0;
  std::size_t correct = 0;
  double valid_rate = 0.0;
  double correct_rate = 0.0;
  std::vector<PathScore> per_instance;
};

PathScore score_path(const Graph& graph, const PathInstance& instance, std::span<const NodeId> pred);
PathMetrics evaluate_paths(const Graph& graph, std::span<const PathInstance> instances,
                           std::span<const Path> predictions);

// --- World files ----------------------------------------------------------------

struct PathWorld {
  WorldConfig config;
  Graph graph;
  PathDataset data;
};

std::string format_world(const PathWorld& world);
PathWorld parse_world(const std::string& text);
void save_world(const std::filesystem::path& path, const PathWorld& world);
PathWorld load_world(const std::filesystem::path& path);

// --- Sequence model ---------------------------------------------------------------

enum class PathObjective { kExpectedReward, kLogLikelihood };

std::string_view objective_name(PathObjective objective);
PathObjective parse_objective(std::string_view name);

struct PathModelConfig {
  std::size_t num_nodes = 0;
  std::size_t embed_dim = 64;
  std::size_t memory_size = 64;
  std::size_t memory_dim = 128;
  std::size_t t_max = 5;
  double lambda = 10.0;
  // Decoding stops after this many emitted tokens; 0 = derive from training
  // data as twice the longest hop count.
  std::size_t max_decode = 0;
  PathObjective objective = PathObjective::kExpectedReward;
  double init_scale = 0.08;

  std::size_t state_dim() const { return 2 * embed_dim; }
  std::size_t eos() const { return num_nodes; }
  std::size_t go() const { return num_nodes; }
  core::ControllerConfig controller() const;
};

// Symbol rows 0..n-1 are nodes and row n is the decoder's start symbol.
// Output classes 0..n-1 are nodes and class n is end-of-sequence.
struct PathModel {
  PathModelConfig config;
  num::Parameter symbols;    // [n + 1 x embed_dim]
  core::Controller controller;
  num::GruWeights decoder;   // input embed_dim, hidden state_dim
  num::Parameter w_token;    // [n + 1 x state_dim]
  num::Parameter b_token;    // [n + 1]

  static PathModel zeros(const PathModelConfig& config);
  static PathModel random(const PathModelConfig& config, Rng& rng);
  std::vector<num::Parameter*> parameters();
};

num::Var encode_pair(num::Tape& tape, PathModel& model, NodeId start, NodeId end);
// log P(target tokens | state) under teacher forcing; targets end with EOS.
num::Var sequence_log_prob(PathModel& model, num::Var state, std::span<const std::size_t> tokens);
std::vector<std::size_t> target_tokens(const PathModel& model, const PathInstance& instance);
// Expected reward: -sum_t w_t P_t(gold). Log likelihood: -sum_t w_t log P_t(gold).
num::Var path_loss(num::Tape& tape, PathModel& model, const PathInstance& instance,
                   num::Var keys = {});

struct StepDecode {
  double stop_prob = 0.0;
  double mix_weight = 0.0;
  Path path;
};

// Greedy decode from every step's state.
std::vector<StepDecode> decode_steps(const PathModel& model, NodeId start, NodeId end);
// Greedy decode at the step with the largest mixture weight (earliest on
// ties). The returned path begins with `start`.
Path predict_path(const PathModel& model, NodeId start, NodeId end);
std::vector<Path> predict_paths(const PathModel& model, std::span<const PathInstance> instances,
                                std::size_t threads = 1);

struct PathTrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t patience = 0;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t valid_limit = 0;
};

struct PathEpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t valid_correct = 0;
  std::size_t valid_valid = 0;
  bool improved = false;
};

struct PathTrainResult {
  std::vector<PathEpochLog> epochs;
  std::size_t best_epoch = 0;
};

std::size_t longest_hops(std::span<const PathInstance> instances);

// Selection by validation correct count, then valid count.
PathTrainResult train_path_model(PathModel& model, const PathDataset& data, const Graph& graph,
                                 const PathTrainConfig& config, Rng& rng,
                                 const std::function<void(const PathEpochLog&)>& on_epoch = {});

train::Checkpoint path_snapshot(PathModel& model, const PathTrainConfig& train,
                                std::uint64_t epoch, const Rng& rng);
PathModel path_from_checkpoint(const train::Checkpoint& ckpt);

}  // namespace irn::paths
