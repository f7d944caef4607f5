// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/evalkbc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "irn/error.hpp"

namespace irn::eval {

using kg::EntityId;
using kg::Query;

std::size_t filtered_rank(std::span<const double> scores, EntityId gold,
                          std::span<const EntityId> known) {
  IRN_EXPECTS(gold < scores.size(), "filtered_rank: gold id " + std::to_string(gold) +
                                        " out of range for " + std::to_string(scores.size()) +
                                        " scores");
  const double g = scores[gold];
  std::size_t rank = 1;
  auto k = known.begin();
  for (std::size_t e = 0; e < scores.size(); ++e) {
    while (k != known.end() && *k < e) ++k;
    if (e == gold || (k != known.end() && *k == e)) continue;
    if (scores[e] > g) ++rank;
  }
  return rank;
}

std::size_t filtered_rank(const Query& query, std::span<const double> scores,
                          const kg::FilterIndex& filter) {
  return filtered_rank(scores, query.gold, filter.objects(query.subject, query.relation));
}

std::size_t raw_rank(std::span<const double> scores, EntityId gold) {
  return filtered_rank(scores, gold, {});
}

RankingResult summarize(std::vector<std::size_t> ranks) {
  IRN_EXPECTS(!ranks.empty(), "evaluate: empty split");
  RankingResult r;
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t k : ranks) {
    total += static_cast<double>(k);
    hits += k <= 10 ? 1 : 0;
  }
  r.mean_rank = total / static_cast<double>(ranks.size());
  r.hits_at_10 = static_cast<double>(hits) / static_cast<double>(ranks.size());
  r.ranks = std::move(ranks);
  return r;
}

RankingResult evaluate(const kbc::KbcModel& model, std::span<const Query> queries,
                       const kg::FilterIndex& filter, std::size_t threads) {
  IRN_EXPECTS(!queries.empty(), "evaluate: empty split");
  std::vector<std::size_t> ranks(queries.size(), 0);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, queries.size()));
  auto run = [&](std::size_t begin, std::size_t end) {
    kbc::Scorer scorer(model);
    for (std::size_t i = begin; i < end; ++i) {
      const auto scores = scorer.score(queries[i]);
      ranks[i] = filtered_rank(queries[i], scores, filter);
    }
  };
  if (workers == 1) {
    run(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(queries.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return summarize(std::move(ranks));
}

// --- Traces ---------------------------------------------------------------------

std::vector<InputPair> observed_inputs(std::span<const Query> train) {
  std::vector<InputPair> out;
  out.reserve(train.size());
  for (const Query& q : train) out.emplace_back(q.subject, q.relation);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Neighbor> nearest_inputs(const kbc::KbcModel& model, std::span<const double> state,
                                     std::span<const InputPair> observed, std::size_t count) {
  const std::size_t de = model.config.entity_dim;
  IRN_EXPECTS(state.size() == model.config.state_dim(), "nearest_inputs: state size mismatch");
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const auto e = model.entity_in.value.row(observed[i].first);
    const auto r = model.relation.value.row(observed[i].second);
    double d2 = 0.0;
    for (std::size_t j = 0; j < de; ++j) d2 += (state[j] - e[j]) * (state[j] - e[j]);
    for (std::size_t j = 0; j < r.size(); ++j) {
      d2 += (state[de + j] - r[j]) * (state[de + j] - r[j]);
    }
    dist.emplace_back(std::sqrt(d2), i);
  }
  const std::size_t n = std::min(count, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n), dist.end());
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < n; ++i) {
    const InputPair& p = observed[dist[i].second];
    out.push_back({p.first, p.second, dist[i].first});
  }
  return out;
}

InferenceTrace trace_inference(const kbc::KbcModel& model, const Query& query,
                               std::span<const InputPair> observed, std::size_t top_k,
                               std::size_t neighbors) {
  kbc::Scorer scorer(model);
  const kbc::QueryScores detail = scorer.score_detailed(query);
  InferenceTrace trace;
  trace.query = query;
  for (std::size_t t = 0; t < detail.step_probs.size(); ++t) {
    const auto& p = detail.step_probs[t];
    TraceStep step;
    step.step = t + 1;
    step.stop_prob = detail.stop_probs[t];
    step.mix_weight = detail.mix_weights[t];
    step.gold_rank = raw_rank(p, query.gold);
    std::vector<EntityId> order(p.size());
    for (std::size_t e = 0; e < p.size(); ++e) order[e] = static_cast<EntityId>(e);
    const std::size_t n = std::min(top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&p](EntityId a, EntityId b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
    for (std::size_t i = 0; i < n; ++i) step.top.emplace_back(order[i], p[order[i]]);
    step.neighbors = nearest_inputs(model, detail.states[t].data(), observed, neighbors);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

namespace {

std::string fmt_double(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string format_trace(const InferenceTrace& trace, const kg::Vocab& vocab) {
  std::ostringstream out;
  const Query& q = trace.query;
  out << "query\t" << vocab.entities.name(q.subject) << "\t" << vocab.relations.name(q.relation)
      << "\t" << vocab.entities.name(q.gold) << "\n";
  out << "step\tstop_prob\tmix_weight\tgold_rank\ttop_predictions\tnearest_inputs\n";
  for (const TraceStep& s : trace.steps) {
    out << s.step << "\t" << fmt_double("%.6f", s.stop_prob) << "\t"
        << fmt_double("%.6f", s.mix_weight) << "\t" << s.gold_rank << "\t";
    for (std::size_t i = 0; i < s.top.size(); ++i) {
      out << (i ? ", " : "") << vocab.entities.name(s.top[i].first) << " ("
          << fmt_double("%.4f", s.top[i].second) << ")";
    }
    out << "\t";
    for (std::size_t i = 0; i < s.neighbors.size(); ++i) {
      const Neighbor& n = s.neighbors[i];
      out << (i ? ", " : "") << "[" << vocab.entities.name(n.subject) << ", "
          << vocab.relations.name(n.relation) << "] (" << fmt_double("%.4f", n.distance) << ")";
    }
    out << "\n";
  }
  return out.str();
}

// --- Memory report --------------------------------------------------------------

MemoryReport memory_report(const kbc::KbcModel& model, std::span<const Query> train,
                           std::size_t k) {
  auto& m = const_cast<kbc::KbcModel&>(model);
  const std::size_t cells = m.config.memory_size;
  const std::size_t rels = m.config.num_relations;
  MemoryReport report;
  report.memory_size = cells;
  report.averages = num::Tensor({rels, cells});
  report.counts.assign(rels, 0);

  num::Tape tape;
  tape.set_inference(true);
  const num::Var keys = core::memory_keys(tape, m.controller);
  const std::size_t mark = tape.mark();
  for (const Query& q : train) {
    tape.rewind(mark);
    const num::Var s1 = kbc::encode(tape, m, q);
    const core::StepTrace trace = core::unroll(m.controller, s1, m.config.t_max, keys);
    for (const num::Var& a : trace.attention) {
      const num::Tensor& av = a.value();
      for (std::size_t i = 0; i < cells; ++i) report.averages.at(q.relation, i) += av[i];
      ++report.counts[q.relation];
    }
  }
  for (std::size_t r = 0; r < rels; ++r) {
    if (report.counts[r] == 0) continue;
    for (std::size_t i = 0; i < cells; ++i) {
      report.averages.at(r, i) /= static_cast<double>(report.counts[r]);
    }
  }
  report.top.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    std::vector<kg::RelationId> present;
    for (std::size_t r = 0; r < rels; ++r) {
      if (report.counts[r] > 0) present.push_back(static_cast<kg::RelationId>(r));
    }
    const auto& avg = report.averages;
    std::stable_sort(present.begin(), present.end(), [&](kg::RelationId a, kg::RelationId b) {
      return avg.at(a, i) > avg.at(b, i);
    });
    for (std::size_t j = 0; j < std::min(k, present.size()); ++j) {
      report.top[i].emplace_back(present[j], avg.at(present[j], i));
    }
  }
  return report;
}

std::string format_memory_report(const MemoryReport& report, const kg::Vocab& vocab) {
  std::ostringstream out;
  out << "cell\trank\trelation\tavg_attention\n";
  for (std::size_t i = 0; i < report.top.size(); ++i) {
    for (std::size_t j = 0; j < report.top[i].size(); ++j) {
      out << i << "\t" << j + 1 << "\t" << vocab.relations.name(report.top[i][j].first) << "\t"
          << fmt_double("%.6f", report.top[i][j].second) << "\n";
    }
  }
  return out.str();
}

// --- Metric reports -------------------------------------------------------------

std::string metrics_text(std::span<const Metric> metrics) {
  std::ostringstream out;
  for (const Metric& m : metrics) {
    out << m.split << "\t" << m.name << "\t" << fmt_double("%.6f", m.value) << "\n";
  }
  return out.str();
}

std::string metrics_json(std::span<const Metric> metrics, const ConfigEntries& config) {
  nlohmann::ordered_json doc;
  doc["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) doc["config"][k] = v;
  doc["metrics"] = nlohmann::ordered_json::array();
  for (const Metric& m : metrics) {
    doc["metrics"].push_back({{"name", m.name}, {"split", m.split}, {"value", m.value}});
  }
  return doc.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace irn::eval
