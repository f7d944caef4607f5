// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/pathsynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <thread>

#include "irn/error.hpp"
#include "irn/kgdata.hpp"

namespace irn::paths {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

std::string_view edge_mode_name(EdgeMode mode) {
  return mode == EdgeMode::kNearest ? "knn" : "random";
}

EdgeMode parse_edge_mode(std::string_view name) {
  if (name == "knn") return EdgeMode::kNearest;
  if (name == "random") return EdgeMode::kRandom;
  throw ContractViolation("unknown edge mode '" + std::string(name) + "' (knn|random)");
}

std::size_t Graph::edge_count() const {
  std::size_t n = 0;
  for (const auto& out : adjacency) n += out.size();
  return n;
}

double Graph::edge_weight(NodeId u, NodeId v) const {
  if (u >= adjacency.size()) return -1.0;
  const auto& out = adjacency[u];
  auto it = std::lower_bound(out.begin(), out.end(), v,
                             [](const auto& e, NodeId x) { return e.first < x; });
  if (it == out.end() || it->first != v) return -1.0;
  return it->second;
}

namespace {

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

constexpr double kCollision = 1e-12;

}  // namespace

Graph generate_world(const WorldConfig& cfg) {
  IRN_EXPECTS(cfg.k >= 1 && cfg.nodes > cfg.k,
              "generate_world: need nodes > k >= 1 (nodes=" + std::to_string(cfg.nodes) +
                  ", k=" + std::to_string(cfg.k) + ")");
  Rng rng(cfg.seed);
  Graph g;
  g.positions.reserve(cfg.nodes);
  while (g.positions.size() < cfg.nodes) {
    std::array<double, 3> p{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (n < kCollision) continue;
    for (double& x : p) x /= n;
    bool collides = false;
    for (const auto& q : g.positions) collides = collides || distance(p, q) < kCollision;
    if (!collides) g.positions.push_back(p);
  }
  g.adjacency.assign(cfg.nodes, {});
  for (NodeId u = 0; u < cfg.nodes; ++u) {
    std::vector<NodeId> chosen;
    if (cfg.mode == EdgeMode::kNearest) {
      std::vector<std::pair<double, NodeId>> by_dist;
      for (NodeId v = 0; v < cfg.nodes; ++v) {
        if (v != u) by_dist.emplace_back(distance(g.positions[u], g.positions[v]), v);
      }
      std::partial_sort(by_dist.begin(), by_dist.begin() + static_cast<std::ptrdiff_t>(cfg.k),
                        by_dist.end());
      for (std::size_t i = 0; i < cfg.k; ++i) chosen.push_back(by_dist[i].second);
    } else {
      while (chosen.size() < cfg.k) {
        const auto v = static_cast<NodeId>(rng.index(cfg.nodes));
        if (v != u && std::find(chosen.begin(), chosen.end(), v) == chosen.end()) {
          chosen.push_back(v);
        }
      }
    }
    std::sort(chosen.begin(), chosen.end());
    for (NodeId v : chosen) {
      g.adjacency[u].emplace_back(v, distance(g.positions[u], g.positions[v]));
    }
  }
  return g;
}

Path ShortestPaths::path_to(NodeId source, NodeId target) const {
  if (!std::isfinite(dist.at(target))) return {};
  Path p{target};
  while (p.back() != source) p.push_back(static_cast<NodeId>(prev[p.back()]));
  std::reverse(p.begin(), p.end());
  return p;
}

ShortestPaths dijkstra(const Graph& g, NodeId source) {
  IRN_EXPECTS(source < g.size(), "dijkstra: source out of range");
  ShortestPaths sp;
  sp.dist.assign(g.size(), std::numeric_limits<double>::infinity());
  sp.prev.assign(g.size(), -1);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  sp.dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > sp.dist[u]) continue;
    for (const auto& [v, w] : g.adjacency[u]) {
      if (d + w < sp.dist[v]) {
        sp.dist[v] = d + w;
        sp.prev[v] = u;
        heap.emplace(sp.dist[v], v);
      }
    }
  }
  return sp;
}

std::vector<std::pair<NodeId, NodeId>> pair_order(std::size_t nodes, Rng& rng) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(nodes * (nodes - 1));
  for (NodeId s = 0; s < nodes; ++s) {
    for (NodeId t = 0; t < nodes; ++t) {
      if (s != t) pairs.emplace_back(s, t);
    }
  }
  for (std::size_t i = pairs.size(); i-- > 1;) std::swap(pairs[i], pairs[rng.index(i + 1)]);
  return pairs;
}

bool is_subpath(std::span<const NodeId> inner, std::span<const NodeId> outer) {
  if (inner.size() > outer.size()) return false;
  return std::search(outer.begin(), outer.end(), inner.begin(), inner.end()) != outer.end();
}

namespace {

// Accepts shortest paths in pair order until `limit` instances (0 = no
// limit). Sub-path lookups use the set of all contiguous runs (2+ nodes) of
// accepted paths; super-path lookups enumerate the candidate's runs against
// the accepted set.
std::vector<PathInstance> accept(const Graph& g, std::uint64_t seed, std::size_t limit) {
  Rng rng(seed);
  const auto order = pair_order(g.size(), rng);
  std::vector<ShortestPaths> sp;
  sp.reserve(g.size());
  for (NodeId s = 0; s < g.size(); ++s) sp.push_back(dijkstra(g, s));

  std::set<Path> runs;
  std::set<Path> accepted_set;
  std::vector<PathInstance> accepted;
  for (const auto& [s, t] : order) {
    if (limit > 0 && accepted.size() >= limit) break;
    Path p = sp[s].path_to(s, t);
    if (p.empty()) continue;
    if (runs.count(p)) continue;
    bool super = false;
    for (std::size_t i = 0; i + 1 < p.size() && !super; ++i) {
      for (std::size_t j = i + 2; j <= p.size(); ++j) {
        if (accepted_set.count(Path(p.begin() + static_cast<std::ptrdiff_t>(i),
                                    p.begin() + static_cast<std::ptrdiff_t>(j)))) {
          super = true;
          break;
        }
      }
    }
    if (super) continue;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      for (std::size_t j = i + 2; j <= p.size(); ++j) {
        runs.emplace(p.begin() + static_cast<std::ptrdiff_t>(i),
                     p.begin() + static_cast<std::ptrdiff_t>(j));
      }
    }
    accepted_set.insert(p);
    accepted.push_back({s, t, std::move(p), sp[s].dist[t]});
  }
  return accepted;
}

}  // namespace

std::vector<PathInstance> accept_all(const Graph& graph, std::uint64_t seed) {
  return accept(graph, seed, 0);
}

PathDataset build_dataset(const Graph& graph, const SplitSizes& sizes, std::uint64_t seed) {
  IRN_EXPECTS(sizes.total() > 0, "build_dataset: requested no instances");
  auto accepted = accept(graph, seed, sizes.total());
  if (accepted.size() < sizes.total()) {
    throw SupplyError("path supply exhausted: accepted " + std::to_string(accepted.size()) +
                      " instances, requested " + std::to_string(sizes.total()) + " (" +
                      std::to_string(sizes.train) + "/" + std::to_string(sizes.valid) + "/" +
                      std::to_string(sizes.test) + ")");
  }
  PathDataset d;
  auto it = accepted.begin();
  d.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
  it += static_cast<std::ptrdiff_t>(sizes.train);
  d.valid.assign(it, it + static_cast<std::ptrdiff_t>(sizes.valid));
  it += static_cast<std::ptrdiff_t>(sizes.valid);
  d.test.assign(it, it + static_cast<std::ptrdiff_t>(sizes.test));
  return d;
}

std::vector<Path> dp_baseline(std::span<const PathInstance> train,
                              std::span<const PathInstance> queries, std::size_t nodes) {
  std::vector<std::vector<NodeId>> adj(nodes);
  for (const PathInstance& inst : train) {
    for (std::size_t i = 0; i + 1 < inst.path.size(); ++i) {
      adj.at(inst.path[i]).push_back(inst.path[i + 1]);
    }
  }
  for (auto& out : adj) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  std::vector<Path> out;
  out.reserve(queries.size());
  std::vector<std::int64_t> prev(nodes);
  for (const PathInstance& q : queries) {
    std::fill(prev.begin(), prev.end(), -1);
    std::deque<NodeId> frontier{q.start};
    prev[q.start] = q.start;
    while (!frontier.empty() && prev[q.end] < 0) {
      const NodeId u = frontier.front();
      frontier.pop_front();
      for (NodeId v : adj[u]) {
        if (prev[v] >= 0) continue;
        prev[v] = u;
        frontier.push_back(v);
      }
    }
    Path p;
    if (prev[q.end] >= 0) {
      p.push_back(q.end);
      while (p.back() != q.start) p.push_back(static_cast<NodeId>(prev[p.back()]));
      std::reverse(p.begin(), p.end());
    }
    out.push_back(std::move(p));
  }
  return out;
}

PathScore score_path(const Graph& g, const PathInstance& inst, std::span<const NodeId> pred) {
  PathScore s;
  if (pred.size() < 2 || pred.front() != inst.start || pred.back() != inst.end) return s;
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < pred.size(); ++i) {
    const double w = g.edge_weight(pred[i], pred[i + 1]);
    if (w < 0.0) return s;
    cost += w;
  }
  s.valid = true;
  s.correct = std::abs(cost - inst.cost) <= 1e-9;
  return s;
}

PathMetrics evaluate_paths(const Graph& g, std::span<const PathInstance> instances,
                           std::span<const Path> predictions) {
  IRN_EXPECTS(instances.size() == predictions.size(),
              "evaluate_paths: prediction count differs from instance count");
  PathMetrics m;
  m.count = instances.size();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const PathScore s = score_path(g, instances[i], predictions[i]);
    m.valid += s.valid;
    m.correct += s.correct;
    m.per_instance.push_back(s);
  }
  if (m.count > 0) {
    m.valid_rate = static_cast<double>(m.valid) / static_cast<double>(m.count);
    m.correct_rate = static_cast<double>(m.correct) / static_cast<double>(m.count);
  }
  return m;
}

// --- World files ----------------------------------------------------------------

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_instances(std::ostringstream& out, const char* split,
                     const std::vector<PathInstance>& list) {
  for (const PathInstance& inst : list) {
    out << "instance " << split << " " << inst.start << " " << inst.end << " " << g17(inst.cost);
    for (NodeId n : inst.path) out << " " << n;
    out << "\n";
  }
}

}  // namespace

std::string format_world(const PathWorld& w) {
  std::ostringstream out;
  out << "irn-path-world 1\n";
  out << "mode " << edge_mode_name(w.config.mode) << "\n";
  out << "k " << w.config.k << "\n";
  out << "seed " << w.config.seed << "\n";
  out << "nodes " << w.graph.size() << "\n";
  for (std::size_t i = 0; i < w.graph.size(); ++i) {
    const auto& p = w.graph.positions[i];
    out << "node " << i << " " << g17(p[0]) << " " << g17(p[1]) << " " << g17(p[2]) << "\n";
  }
  out << "edges " << w.graph.edge_count() << "\n";
  for (std::size_t u = 0; u < w.graph.size(); ++u) {
    for (const auto& [v, wt] : w.graph.adjacency[u]) {
      out << "edge " << u << " " << v << " " << g17(wt) << "\n";
    }
  }
  out << "instances " << w.data.train.size() + w.data.valid.size() + w.data.test.size() << "\n";
  write_instances(out, "train", w.data.train);
  write_instances(out, "valid", w.data.valid);
  write_instances(out, "test", w.data.test);
  return out.str();
}

PathWorld parse_world(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  PathWorld w;
  auto fail = [&line_no](const std::string& what) {
    throw ParseError("world file line " + std::to_string(line_no) + ": " + what);
  };
  bool header = false;
  std::size_t declared_nodes = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (!header) {
      int version = 0;
      if (tag != "irn-path-world" || !(ls >> version)) fail("missing irn-path-world header");
      if (version != 1) fail("unsupported world file version " + std::to_string(version));
      header = true;
      continue;
    }
    if (tag == "mode") {
      std::string m;
      ls >> m;
      w.config.mode = parse_edge_mode(m);
    } else if (tag == "k") {
      ls >> w.config.k;
    } else if (tag == "seed") {
      ls >> w.config.seed;
    } else if (tag == "nodes") {
      ls >> declared_nodes;
      w.graph.positions.assign(declared_nodes, {});
      w.graph.adjacency.assign(declared_nodes, {});
      w.config.nodes = declared_nodes;
    } else if (tag == "node") {
      std::size_t id;
      std::array<double, 3> p;
      if (!(ls >> id >> p[0] >> p[1] >> p[2]) || id >= declared_nodes) fail("bad node row");
      w.graph.positions[id] = p;
    } else if (tag == "edges" || tag == "instances") {
      continue;
    } else if (tag == "edge") {
      std::size_t u, v;
      double wt;
      if (!(ls >> u >> v >> wt) || u >= declared_nodes || v >= declared_nodes) fail("bad edge row");
      w.graph.adjacency[u].emplace_back(static_cast<NodeId>(v), wt);
    } else if (tag == "instance") {
      std::string split;
      PathInstance inst;
      if (!(ls >> split >> inst.start >> inst.end >> inst.cost)) fail("bad instance row");
      NodeId n;
      while (ls >> n) inst.path.push_back(n);
      if (inst.path.size() < 2 || inst.path.front() != inst.start || inst.path.back() != inst.end) {
        fail("instance path does not connect its endpoints");
      }
      if (split == "train") {
        w.data.train.push_back(std::move(inst));
      } else if (split == "valid") {
        w.data.valid.push_back(std::move(inst));
      } else if (split == "test") {
        w.data.test.push_back(std::move(inst));
      } else {
        fail("unknown split '" + split + "'");
      }
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!header) throw ParseError("world file is empty");
  for (auto& out : w.graph.adjacency) std::sort(out.begin(), out.end());
  return w;
}

void save_world(const std::filesystem::path& path, const PathWorld& world) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write world file " + path.string());
  out << format_world(world);
  if (!out) throw IoError("write failed for world file " + path.string());
}

PathWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open world file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_world(buf.str());
}

// --- Sequence model ---------------------------------------------------------------

std::string_view objective_name(PathObjective objective) {
  return objective == PathObjective::kExpectedReward ? "expected-reward" : "log-likelihood";
}

PathObjective parse_objective(std::string_view name) {
  if (name == "expected-reward") return PathObjective::kExpectedReward;
  if (name == "log-likelihood") return PathObjective::kLogLikelihood;
  throw ContractViolation("unknown path objective '" + std::string(name) +
                          "' (expected-reward|log-likelihood)");
}

core::ControllerConfig PathModelConfig::controller() const {
  core::ControllerConfig c;
  c.state_dim = state_dim();
  c.memory_size = memory_size;
  c.memory_dim = memory_dim;
  c.attention_dim = memory_dim;
  c.lambda = lambda;
  return c;
}

PathModel PathModel::zeros(const PathModelConfig& cfg) {
  IRN_EXPECTS(cfg.num_nodes >= 2, "PathModel: need at least two nodes");
  IRN_EXPECTS(cfg.embed_dim > 0 && cfg.t_max >= 1, "PathModel: bad dimensions");
  PathModel m;
  m.config = cfg;
  const std::size_t n = cfg.num_nodes;
  m.symbols = Parameter("symbols", Tensor({n + 1, cfg.embed_dim}));
  m.controller = core::Controller::zeros(cfg.controller());
  m.decoder = num::GruWeights::zeros("decoder", cfg.embed_dim, cfg.state_dim());
  m.w_token = Parameter("token_w", Tensor({n + 1, cfg.state_dim()}));
  m.b_token = Parameter("token_b", Tensor({n + 1}));
  return m;
}

PathModel PathModel::random(const PathModelConfig& cfg, Rng& rng) {
  PathModel m = zeros(cfg);
  const double s = cfg.init_scale;
  core::fill_uniform(m.symbols.value, rng, s);
  m.controller = core::Controller::random(cfg.controller(), rng, s);
  core::fill_uniform(m.decoder.w_update.value, rng, s);
  core::fill_uniform(m.decoder.w_reset.value, rng, s);
  core::fill_uniform(m.decoder.w_candidate.value, rng, s);
  core::fill_uniform(m.w_token.value, rng, s);
  return m;
}

std::vector<Parameter*> PathModel::parameters() {
  std::vector<Parameter*> out{&symbols};
  for (Parameter* p : controller.parameters()) out.push_back(p);
  for (Parameter* p : decoder.parameters()) out.push_back(p);
  out.push_back(&w_token);
  out.push_back(&b_token);
  return out;
}

Var encode_pair(Tape& tape, PathModel& model, NodeId start, NodeId end) {
  IRN_EXPECTS(start < model.config.num_nodes && end < model.config.num_nodes,
              "encode_pair: node id out of range");
  return num::concat(num::row(tape, model.symbols, start), num::row(tape, model.symbols, end));
}

namespace {

Var token_logits(PathModel& m, Var h) {
  Tape& tape = h.tape();
  return num::add(num::matvec(tape.param(m.w_token), h), tape.param(m.b_token));
}

}  // namespace

std::vector<std::size_t> target_tokens(const PathModel& model, const PathInstance& inst) {
  std::vector<std::size_t> tokens(inst.path.begin() + 1, inst.path.end());
  tokens.push_back(model.config.eos());
  return tokens;
}

Var sequence_log_prob(PathModel& m, Var state, std::span<const std::size_t> tokens) {
  IRN_EXPECTS(!tokens.empty(), "sequence_log_prob: empty target");
  Tape& tape = state.tape();
  Var h = state;
  std::size_t prev = m.config.go();
  Var total;
  for (std::size_t tok : tokens) {
    IRN_EXPECTS(tok <= m.config.eos(), "sequence_log_prob: token out of range");
    h = num::gru_step(m.decoder, h, num::row(tape, m.symbols, prev));
    const Var lp = num::pick(num::log_softmax(token_logits(m, h)), tok);
    total = total.valid() ? num::add(total, lp) : lp;
    prev = tok;
  }
  return total;
}

Var path_loss(Tape& tape, PathModel& m, const PathInstance& inst, Var keys) {
  const Var s1 = encode_pair(tape, m, inst.start, inst.end);
  const core::StepTrace trace = core::unroll(m.controller, s1, m.config.t_max, keys);
  const auto tokens = target_tokens(m, inst);
  Var total;
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    Var term = sequence_log_prob(m, trace.states[t], tokens);
    if (m.config.objective == PathObjective::kExpectedReward) term = num::exp(term);
    term = num::mul(trace.mix_weights[t], term);
    total = total.valid() ? num::add(total, term) : term;
  }
  return num::scale(total, -1.0);
}

namespace {

Path greedy(PathModel& m, Var state, NodeId start) {
  Tape& tape = state.tape();
  const std::size_t limit = m.config.max_decode > 0 ? m.config.max_decode : 2 * m.config.num_nodes;
  Path out{start};
  Var h = state;
  std::size_t prev = m.config.go();
  for (std::size_t i = 0; i < limit; ++i) {
    h = num::gru_step(m.decoder, h, num::row(tape, m.symbols, prev));
    const Tensor& logits = token_logits(m, h).value();
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    if (best == m.config.eos()) break;
    out.push_back(static_cast<NodeId>(best));
    prev = best;
  }
  return out;
}

PathModel& mutable_model(const PathModel& model) {
  // Inference tapes never write through the parameter handles.
  return const_cast<PathModel&>(model);
}

}  // namespace

std::vector<StepDecode> decode_steps(const PathModel& model, NodeId start, NodeId end) {
  PathModel& m = mutable_model(model);
  Tape tape;
  tape.set_inference(true);
  const Var s1 = encode_pair(tape, m, start, end);
  const core::StepTrace trace = core::unroll(m.controller, s1, m.config.t_max);
  std::vector<StepDecode> out;
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    out.push_back({trace.stop_probs[t].scalar(), trace.mix_weights[t].scalar(),
                   greedy(m, trace.states[t], start)});
  }
  return out;
}

Path predict_path(const PathModel& model, NodeId start, NodeId end) {
  PathModel& m = mutable_model(model);
  Tape tape;
  tape.set_inference(true);
  const Var s1 = encode_pair(tape, m, start, end);
  const core::StepTrace trace = core::unroll(m.controller, s1, m.config.t_max);
  std::size_t best = 0;
  for (std::size_t t = 1; t < trace.steps(); ++t) {
    if (trace.mix_weights[t].scalar() > trace.mix_weights[best].scalar()) best = t;
  }
  return greedy(m, trace.states[best], start);
}

std::vector<Path> predict_paths(const PathModel& model, std::span<const PathInstance> instances,
                                std::size_t threads) {
  std::vector<Path> out(instances.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, instances.size()));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = predict_path(model, instances[i].start, instances[i].end);
    }
  };
  if (workers <= 1) {
    run(0, instances.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (instances.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(instances.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(run, begin, end);
  }
  for (auto& t : pool) t.join();
  return out;
}

std::size_t longest_hops(std::span<const PathInstance> instances) {
  std::size_t best = 0;
  for (const PathInstance& inst : instances) best = std::max(best, inst.path.size() - 1);
  return best;
}

PathTrainResult train_path_model(PathModel& model, const PathDataset& data, const Graph& graph,
                                 const PathTrainConfig& cfg, Rng& rng,
                                 const std::function<void(const PathEpochLog&)>& on_epoch) {
  IRN_EXPECTS(!data.train.empty(), "train_path_model: empty training split");
  IRN_EXPECTS(cfg.batch_size >= 1, "train_path_model: batch size must be positive");
  IRN_EXPECTS(cfg.learning_rate >= 0.0, "train_path_model: negative learning rate");
  if (model.config.max_decode == 0) model.config.max_decode = 2 * longest_hops(data.train);
  const auto params = model.parameters();

  std::span<const PathInstance> valid(data.valid);
  if (cfg.valid_limit > 0 && valid.size() > cfg.valid_limit) valid = valid.first(cfg.valid_limit);

  PathTrainResult result;
  std::vector<Tensor> best;
  std::size_t best_correct = 0, best_valid = 0, since_best = 0;
  Tape tape;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = kg::shuffled_order(data.train.size(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      for (Parameter* p : params) p->zero_grad();
      tape.clear();
      const Var keys = core::memory_keys(tape, model.controller);
      Var total;
      for (std::size_t i = begin; i < end; ++i) {
        const Var loss = path_loss(tape, model, data.train[order[i]], keys);
        total = total.valid() ? num::add(total, loss) : loss;
      }
      const double value = total.scalar();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(begin / cfg.batch_size) + " (seed " +
                           std::to_string(cfg.seed) + ")");
      }
      tape.backward(total);
      train::clip_gradients(params, cfg.clip_norm);
      train::sgd_step(params, cfg.learning_rate);
      loss_sum += value;
    }
    tape.clear();

    PathEpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(order.size());
    if (!valid.empty()) {
      const auto preds = predict_paths(model, valid, cfg.threads);
      const auto metrics = evaluate_paths(graph, valid, preds);
      log.valid_correct = metrics.correct;
      log.valid_valid = metrics.valid;
      log.improved = result.epochs.empty() || metrics.correct > best_correct ||
                     (metrics.correct == best_correct && metrics.valid > best_valid);
    } else {
      log.improved = true;
    }
    if (log.improved) {
      best_correct = log.valid_correct;
      best_valid = log.valid_valid;
      result.best_epoch = epoch;
      best.clear();
      for (const Parameter* p : params) best.push_back(p->value);
      since_best = 0;
    } else {
      ++since_best;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  for (Parameter* p : params) p->zero_grad();
  return result;
}

namespace {

std::string repr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t config_size(const train::Checkpoint& c, const char* key) {
  const std::string& v = c.config_value(key);
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw FormatError("checkpoint config '" + std::string(key) + "' is not an integer: " + v);
  }
  return static_cast<std::size_t>(out);
}

double config_double(const train::Checkpoint& c, const char* key) {
  const std::string& v = c.config_value(key);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw FormatError("checkpoint config '" + std::string(key) + "' is not a number: " + v);
  }
  return out;
}

}  // namespace

train::Checkpoint path_snapshot(PathModel& model, const PathTrainConfig& t, std::uint64_t epoch,
                                const Rng& rng) {
  const PathModelConfig& m = model.config;
  train::Checkpoint c;
  c.kind = "path";
  c.config = {
      {"num_nodes", std::to_string(m.num_nodes)},
      {"embed_dim", std::to_string(m.embed_dim)},
      {"memory_size", std::to_string(m.memory_size)},
      {"memory_dim", std::to_string(m.memory_dim)},
      {"t_max", std::to_string(m.t_max)},
      {"lambda", repr(m.lambda)},
      {"max_decode", std::to_string(m.max_decode)},
      {"objective", std::string(objective_name(m.objective))},
      {"init_scale", repr(m.init_scale)},
      {"learning_rate", repr(t.learning_rate)},
      {"batch_size", std::to_string(t.batch_size)},
      {"epochs", std::to_string(t.epochs)},
      {"patience", std::to_string(t.patience)},
      {"clip_norm", repr(t.clip_norm)},
      {"seed", std::to_string(t.seed)},
  };
  c.epoch = epoch;
  c.rng_state = rng.state();
  train::export_parameters(model.parameters(), c);
  return c;
}

PathModel path_from_checkpoint(const train::Checkpoint& c) {
  if (c.kind != "path") throw FormatError("checkpoint holds a '" + c.kind + "' model, not path");
  PathModelConfig m;
  m.num_nodes = config_size(c, "num_nodes");
  m.embed_dim = config_size(c, "embed_dim");
  m.memory_size = config_size(c, "memory_size");
  m.memory_dim = config_size(c, "memory_dim");
  m.t_max = config_size(c, "t_max");
  m.lambda = config_double(c, "lambda");
  m.max_decode = config_size(c, "max_decode");
  m.objective = parse_objective(c.config_value("objective"));
  m.init_scale = config_double(c, "init_scale");
  PathModel model = PathModel::zeros(m);
  train::import_parameters(model.parameters(), c);
  return model;
}

}  // namespace irn::paths
