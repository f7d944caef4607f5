// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/pathsynth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "irn/error.hpp"
#include "irn/toy.hpp"

namespace irn::paths {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Graph graph_from_edges(std::size_t n, const std::vector<std::tuple<NodeId, NodeId, double>>& edges) {
  Graph g;
  g.positions.assign(n, {1.0, 0.0, 0.0});
  g.adjacency.assign(n, {});
  for (const auto& [u, v, w] : edges) g.adjacency[u].emplace_back(v, w);
  for (auto& out : g.adjacency) std::sort(out.begin(), out.end());
  return g;
}

TEST(GenerateWorld, FourNodesThreeNeighborsIsComplete) {
  Graph g = generate_world({4, 3, EdgeMode::kNearest, 7});
  EXPECT_EQ(g.edge_count(), 12u);
  for (NodeId u = 0; u < 4; ++u) {
    for (NodeId v = 0; v < 4; ++v) EXPECT_EQ(g.has_edge(u, v), u != v);
  }
}

TEST(GenerateWorld, UnitSphereAndSymmetricWeights) {
  Graph g = generate_world({100, 8, EdgeMode::kNearest, 1});
  for (const auto& p : g.positions) {
    EXPECT_NEAR(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]), 1.0, 1e-12);
  }
  for (NodeId u = 0; u < 100; ++u) {
    EXPECT_EQ(g.adjacency[u].size(), 8u);
    for (const auto& [v, w] : g.adjacency[u]) {
      EXPECT_NE(u, v);
      const auto& a = g.positions[u];
      const auto& b = g.positions[v];
      EXPECT_NEAR(w, std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]), 1e-15);
      if (g.has_edge(v, u)) EXPECT_EQ(g.edge_weight(v, u), w);
    }
  }
}

TEST(GenerateWorld, NearestModePicksTheClosest) {
  Graph g = generate_world({30, 4, EdgeMode::kNearest, 3});
  for (NodeId u = 0; u < 30; ++u) {
    double farthest_kept = 0.0;
    for (const auto& [v, w] : g.adjacency[u]) farthest_kept = std::max(farthest_kept, w);
    for (NodeId v = 0; v < 30; ++v) {
      if (v == u || g.has_edge(u, v)) continue;
      const auto& a = g.positions[u];
      const auto& b = g.positions[v];
      EXPECT_GE(std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]), farthest_kept);
    }
  }
}

TEST(GenerateWorld, RandomModeHasDistinctTargets) {
  Graph g = generate_world({20, 5, EdgeMode::kRandom, 4});
  for (NodeId u = 0; u < 20; ++u) {
    std::set<NodeId> targets;
    for (const auto& [v, w] : g.adjacency[u]) targets.insert(v);
    EXPECT_EQ(targets.size(), 5u);
    EXPECT_FALSE(targets.count(u));
  }
}

TEST(GenerateWorld, SameSeedSameGraph) {
  Graph a = generate_world({50, 6, EdgeMode::kNearest, 9});
  Graph b = generate_world({50, 6, EdgeMode::kNearest, 9});
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.adjacency, b.adjacency);
  EXPECT_THROW(generate_world({4, 4, EdgeMode::kNearest, 1}), ContractViolation);
  EXPECT_THROW(generate_world({4, 0, EdgeMode::kNearest, 1}), ContractViolation);
}

// Floyd-Warshall costs with next-hop reconstruction.
struct AllPairs {
  std::vector<std::vector<double>> dist;
  std::vector<std::vector<std::int64_t>> next;

  Path path(NodeId s, NodeId t) const {
    if (!std::isfinite(dist[s][t])) return {};
    Path p{s};
    while (p.back() != t) p.push_back(static_cast<NodeId>(next[p.back()][t]));
    return p;
  }
};

AllPairs floyd_warshall(const Graph& g) {
  const std::size_t n = g.size();
  AllPairs ap{std::vector<std::vector<double>>(n, std::vector<double>(n, kInf)),
              std::vector<std::vector<std::int64_t>>(n, std::vector<std::int64_t>(n, -1))};
  for (NodeId u = 0; u < n; ++u) {
    ap.dist[u][u] = 0.0;
    ap.next[u][u] = u;
    for (const auto& [v, w] : g.adjacency[u]) {
      ap.dist[u][v] = w;
      ap.next[u][v] = v;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (ap.dist[i][k] + ap.dist[k][j] < ap.dist[i][j]) {
          ap.dist[i][j] = ap.dist[i][k] + ap.dist[k][j];
          ap.next[i][j] = ap.next[i][k];
        }
      }
    }
  }
  return ap;
}

TEST(Dijkstra, MatchesFloydWarshall) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (EdgeMode mode : {EdgeMode::kNearest, EdgeMode::kRandom}) {
      Graph g = generate_world({40, 3, mode, seed});
      AllPairs ap = floyd_warshall(g);
      for (NodeId s = 0; s < 40; ++s) {
        ShortestPaths sp = dijkstra(g, s);
        for (NodeId t = 0; t < 40; ++t) {
          if (!std::isfinite(ap.dist[s][t])) {
            EXPECT_FALSE(std::isfinite(sp.dist[t]));
            EXPECT_TRUE(sp.path_to(s, t).empty());
            continue;
          }
          EXPECT_NEAR(sp.dist[t], ap.dist[s][t], 1e-12);
          EXPECT_EQ(sp.path_to(s, t), ap.path(s, t));
        }
      }
    }
  }
}

TEST(Dijkstra, HandGraph) {
  // 0 -> 1 -> 3 costs 2, 0 -> 2 -> 3 costs 3, 0 -> 3 costs 5.
  Graph g = graph_from_edges(4, {{0, 1, 1.0}, {1, 3, 1.0}, {0, 2, 1.0}, {2, 3, 2.0}, {0, 3, 5.0}});
  ShortestPaths sp = dijkstra(g, 0);
  EXPECT_EQ(sp.dist[3], 2.0);
  EXPECT_EQ(sp.path_to(0, 3), (Path{0, 1, 3}));
  EXPECT_EQ(dijkstra(g, 3).path_to(3, 0), Path{});
}

TEST(IsSubpath, Examples) {
  const Path abc{0, 1, 2};
  EXPECT_TRUE(is_subpath(Path{0, 1}, abc));
  EXPECT_TRUE(is_subpath(Path{1, 2}, abc));
  EXPECT_FALSE(is_subpath(Path{0, 2}, abc));
  EXPECT_TRUE(is_subpath(abc, Path{0, 1, 2, 3}));
  EXPECT_FALSE(is_subpath(Path{0, 1, 2, 3}, abc));
}

TEST(PairOrder, FisherYatesOverLexicographicPairs) {
  Rng a(5), b(5);
  auto got = pair_order(4, a);
  std::vector<std::pair<NodeId, NodeId>> want;
  for (NodeId s = 0; s < 4; ++s) {
    for (NodeId t = 0; t < 4; ++t) {
      if (s != t) want.emplace_back(s, t);
    }
  }
  for (std::size_t i = want.size() - 1; i >= 1; --i) std::swap(want[i], want[b.index(i + 1)]);
  EXPECT_EQ(got, want);
}

// The acceptance rule applied by brute force: pairwise contiguous-run
// checks against every accepted path, in the same pair order.
std::vector<PathInstance> enumeration_oracle(const Graph& g, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> order;
  for (NodeId s = 0; s < g.size(); ++s) {
    for (NodeId t = 0; t < g.size(); ++t) {
      if (s != t) order.emplace_back(s, t);
    }
  }
  for (std::size_t i = order.size() - 1; i >= 1; --i) std::swap(order[i], order[rng.index(i + 1)]);
  AllPairs ap = floyd_warshall(g);
  std::vector<PathInstance> out;
  for (const auto& [s, t] : order) {
    Path p = ap.path(s, t);
    if (p.empty()) continue;
    bool clash = false;
    for (const PathInstance& prior : out) {
      clash = clash || is_subpath(p, prior.path) || is_subpath(prior.path, p);
    }
    if (!clash) out.push_back({s, t, p, ap.dist[s][t]});
  }
  return out;
}

TEST(BuildDataset, SixNodeWorldMatchesEnumeration) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (std::size_t k : {1u, 2u, 3u}) {
      Graph g = generate_world({6, k, EdgeMode::kNearest, seed});
      auto got = accept_all(g, seed + 100);
      auto want = enumeration_oracle(g, seed + 100);
      ASSERT_EQ(got.size(), want.size()) << "seed " << seed << " k " << k;
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].start, want[i].start);
        EXPECT_EQ(got[i].path, want[i].path);
        EXPECT_NEAR(got[i].cost, want[i].cost, 1e-12);
      }
    }
  }
}

TEST(BuildDataset, NoInstanceContainsAnother) {
  Graph g = generate_world({100, 8, EdgeMode::kNearest, 1});
  auto all = accept_all(g, 1);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i != j) ASSERT_FALSE(is_subpath(all[i].path, all[j].path)) << i << " in " << j;
    }
  }
}

TEST(BuildDataset, GoldPathsAreOptimalAndScoreCorrect) {
  Graph g = generate_world({60, 5, EdgeMode::kNearest, 2});
  PathDataset d = build_dataset(g, {200, 50, 50}, 3);
  ASSERT_EQ(d.train.size(), 200u);
  ASSERT_EQ(d.valid.size(), 50u);
  ASSERT_EQ(d.test.size(), 50u);
  AllPairs ap = floyd_warshall(g);
  for (const auto* split : {&d.train, &d.valid, &d.test}) {
    std::vector<Path> gold;
    for (const PathInstance& inst : *split) {
      EXPECT_NEAR(inst.cost, ap.dist[inst.start][inst.end], 1e-12);
      gold.push_back(inst.path);
    }
    PathMetrics m = evaluate_paths(g, *split, gold);
    EXPECT_EQ(m.correct, split->size());
  }
  // Splits are consecutive slices of the acceptance sequence.
  auto all = accept_all(g, 3);
  EXPECT_EQ(d.train.front(), all[0]);
  EXPECT_EQ(d.valid.front(), all[200]);
  EXPECT_EQ(d.test.back(), all[299]);
}

TEST(BuildDataset, SupplyErrorReportsCounts) {
  Graph g = generate_world({6, 2, EdgeMode::kNearest, 1});
  const std::size_t supply = accept_all(g, 1).size();
  try {
    build_dataset(g, {supply, 1, 0}, 1);
    FAIL() << "expected SupplyError";
  } catch (const SupplyError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("accepted " + std::to_string(supply)), std::string::npos) << msg;
    EXPECT_NE(msg.find("requested " + std::to_string(supply + 1)), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(build_dataset(g, {supply, 0, 0}, 1));
}

TEST(DpBaseline, Examples) {
  Graph g = graph_from_edges(5, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 3, 3.5}});
  std::vector<PathInstance> train = {{0, 2, {0, 1, 2}, 2.0}, {2, 3, {2, 3}, 1.0}};
  std::vector<PathInstance> queries = {{0, 3, {0, 1, 2, 3}, 3.0}, {1, 3, {1, 2, 3}, 2.0},
                                       {3, 0, {}, kInf}, {0, 4, {}, kInf}};
  auto preds = dp_baseline(train, queries, 5);
  EXPECT_EQ(preds[0], (Path{0, 1, 2, 3}));
  EXPECT_EQ(preds[1], (Path{1, 2, 3}));
  EXPECT_TRUE(preds[2].empty());
  EXPECT_TRUE(preds[3].empty());
  auto m = evaluate_paths(g, std::span(queries).first(2), std::span(preds).first(2));
  EXPECT_EQ(m.correct, 2u);
}

TEST(DpBaseline, HopMinimalIgnoresWeights) {
  // Training saw both 0-1-2-3 and 0-3; BFS prefers the single hop even
  // though it costs more.
  Graph g = graph_from_edges(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 3, 9.0}});
  std::vector<PathInstance> train = {{0, 3, {0, 3}, 9.0}, {0, 2, {0, 1, 2}, 2.0},
                                     {1, 3, {1, 2, 3}, 2.0}};
  std::vector<PathInstance> q = {{0, 3, {0, 1, 2, 3}, 3.0}};
  auto preds = dp_baseline(train, q, 4);
  EXPECT_EQ(preds[0], (Path{0, 3}));
  auto m = evaluate_paths(g, q, preds);
  EXPECT_EQ(m.valid, 1u);
  EXPECT_EQ(m.correct, 0u);
}

TEST(EvaluatePaths, Examples) {
  // Square with two equal-cost routes from 0 to 2.
  Graph g = graph_from_edges(4, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 3, 1.0}, {3, 2, 1.0}});
  const PathInstance inst{0, 2, {0, 1, 2}, 2.0};
  EXPECT_TRUE(score_path(g, inst, Path{0, 1, 2}).correct);
  EXPECT_TRUE(score_path(g, inst, Path{0, 3, 2}).correct);
  PathScore non_edge = score_path(g, inst, Path{0, 2});
  EXPECT_FALSE(non_edge.valid);
  EXPECT_FALSE(non_edge.correct);
  EXPECT_FALSE(score_path(g, inst, Path{0, 1}).valid);
  EXPECT_FALSE(score_path(g, inst, Path{0, 17, 2}).valid);
  EXPECT_FALSE(score_path(g, inst, Path{}).valid);
}

TEST(EvaluatePaths, CountsAreOrdered) {
  Graph g = generate_world({40, 4, EdgeMode::kNearest, 5});
  PathDataset d = build_dataset(g, {100, 0, 60}, 5);
  Rng rng(6);
  std::vector<Path> preds;
  for (const PathInstance& inst : d.test) {
    Path p = inst.path;
    if (rng.index(3) == 0) p.insert(p.begin() + 1, static_cast<NodeId>(rng.index(40)));
    preds.push_back(p);
  }
  PathMetrics m = evaluate_paths(g, d.test, preds);
  EXPECT_LE(m.correct, m.valid);
  EXPECT_LE(m.valid, m.count);
  EXPECT_LT(m.correct, m.count);
  EXPECT_THROW(evaluate_paths(g, d.test, std::span(preds).first(3)), ContractViolation);
}

TEST(WorldFile, RoundTripIsExact) {
  PathWorld w;
  w.config = {30, 4, EdgeMode::kNearest, 11};
  w.graph = generate_world(w.config);
  w.data = build_dataset(w.graph, {40, 10, 10}, 12);
  const std::string text = format_world(w);
  PathWorld back = parse_world(text);
  EXPECT_EQ(back.graph.positions, w.graph.positions);
  EXPECT_EQ(back.graph.adjacency, w.graph.adjacency);
  EXPECT_EQ(back.data, w.data);
  EXPECT_EQ(back.config.k, 4u);
  EXPECT_EQ(back.config.seed, 11u);
  EXPECT_EQ(format_world(back), text);
}

TEST(WorldFile, Malformed) {
  EXPECT_THROW(parse_world(""), ParseError);
  EXPECT_THROW(parse_world("irn-path-world 2\n"), ParseError);
  EXPECT_THROW(parse_world("something else\n"), ParseError);
  EXPECT_THROW(parse_world("irn-path-world 1\nnodes 2\nnode 5 0 0 1\n"), ParseError);
  EXPECT_THROW(parse_world("irn-path-world 1\nnodes 2\nedge 0 1\n"), ParseError);
  EXPECT_THROW(parse_world("irn-path-world 1\nnodes 2\ninstance train 0 1 1.0 1 0\n"),
               ParseError);
  EXPECT_THROW(parse_world("irn-path-world 1\nbogus\n"), ParseError);
}

PathModelConfig tiny_path_config(std::size_t nodes) {
  PathModelConfig c;
  c.num_nodes = nodes;
  c.embed_dim = 3;
  c.memory_size = 3;
  c.memory_dim = 4;
  c.t_max = 3;
  c.init_scale = 0.3;
  return c;
}

TEST(PathModel, ShapesAndTokens) {
  Rng rng(1);
  PathModel m = PathModel::random(tiny_path_config(6), rng);
  EXPECT_EQ(m.symbols.value.shape(), (num::Shape{7, 3}));
  EXPECT_EQ(m.w_token.value.shape(), (num::Shape{7, 6}));
  EXPECT_EQ(m.config.state_dim(), 6u);
  EXPECT_EQ(target_tokens(m, PathInstance{1, 4, {1, 3, 4}, 0.0}),
            (std::vector<std::size_t>{3, 4, 6}));
  num::Tape tape;
  EXPECT_THROW(encode_pair(tape, m, 6, 0), ContractViolation);
}

TEST(PathModel, UniformDecoderClosedForm) {
  PathModel m = PathModel::zeros(tiny_path_config(6));
  const PathInstance inst{1, 4, {1, 3, 4}, 0.0};
  num::Tape tape;
  // Three tokens, seven classes, uniform logits.
  m.config.objective = PathObjective::kLogLikelihood;
  EXPECT_NEAR(path_loss(tape, m, inst).scalar(), 3.0 * std::log(7.0), 1e-12);
  m.config.objective = PathObjective::kExpectedReward;
  EXPECT_NEAR(path_loss(tape, m, inst).scalar(), -std::pow(7.0, -3.0), 1e-15);
}

TEST(PathModel, GradientCheck) {
  for (PathObjective obj : {PathObjective::kExpectedReward, PathObjective::kLogLikelihood}) {
    num::GradCheckReport r = toy::path_gradient_check(3, obj);
    EXPECT_TRUE(r.passed()) << objective_name(obj) << "\n" << r.to_text();
  }
}

TEST(PathModel, GreedyDecodingIsDeterministic) {
  Rng rng(2);
  PathModel m = PathModel::random(tiny_path_config(8), rng);
  m.config.max_decode = 5;
  const Path a = predict_path(m, 2, 5);
  EXPECT_EQ(a, predict_path(m, 2, 5));
  EXPECT_EQ(a.front(), 2u);
  EXPECT_LE(a.size(), 6u);
  auto steps = decode_steps(m, 2, 5);
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(steps.back().stop_prob, 1.0);
}

TEST(PathModel, ParallelPredictionMatchesSerial) {
  Rng rng(3);
  PathModel m = PathModel::random(tiny_path_config(12), rng);
  m.config.max_decode = 6;
  Graph g = generate_world({12, 3, EdgeMode::kNearest, 4});
  auto inst = accept_all(g, 4);
  EXPECT_EQ(predict_paths(m, inst, 1), predict_paths(m, inst, 3));
}

struct TinyWorld {
  Graph graph;
  PathDataset data;
};

TinyWorld tiny_world() {
  TinyWorld w;
  w.graph = generate_world({12, 3, EdgeMode::kNearest, 5});
  const std::size_t n = accept_all(w.graph, 5).size();
  w.data = build_dataset(w.graph, {n - 6, 3, 3}, 5);
  return w;
}

TEST(TrainPaths, ZeroLearningRateFreezesParameters) {
  TinyWorld w = tiny_world();
  Rng rng(6);
  PathModel m = PathModel::random(tiny_path_config(12), rng);
  std::vector<num::Tensor> before;
  for (auto* p : m.parameters()) before.push_back(p->value);
  PathTrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  train_path_model(m, w.data, w.graph, cfg, rng);
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i]->value, before[i]);
}

TEST(TrainPaths, DeterministicAndCheckpointRoundTrip) {
  auto run = [] {
    TinyWorld w = tiny_world();
    Rng init(7);
    PathModel m = PathModel::random(tiny_path_config(12), init);
    m.config.objective = PathObjective::kLogLikelihood;
    PathTrainConfig cfg;
    cfg.learning_rate = 0.3;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    Rng rng(8);
    PathTrainResult r = train_path_model(m, w.data, w.graph, cfg, rng);
    std::vector<double> losses;
    for (const auto& e : r.epochs) losses.push_back(e.mean_loss);
    return std::make_pair(losses, train::serialize_checkpoint(path_snapshot(m, cfg, 3, rng)));
  };
  auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_LT(a.first.back(), a.first.front());

  train::Checkpoint c = train::parse_checkpoint(a.second);
  EXPECT_EQ(c.kind, "path");
  PathModel back = path_from_checkpoint(c);
  EXPECT_EQ(back.config.objective, PathObjective::kLogLikelihood);
  EXPECT_EQ(back.config.num_nodes, 12u);
  Rng unused(0);
  EXPECT_EQ(path_snapshot(back, PathTrainConfig{}, 3, unused).tensors, c.tensors);
}

}  // namespace
}  // namespace irn::paths
