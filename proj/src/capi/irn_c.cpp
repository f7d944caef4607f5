// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "irn/error.hpp"
#include "irn/evalkbc.hpp"
#include "irn/kbchead.hpp"
#include "irn/kgdata.hpp"
#include "irn/pathsynth.hpp"
#include "irn/toy.hpp"
#include "irn/trainer.hpp"

using namespace irn;

struct irn_dataset {
  kg::KbcData data;
};

struct irn_kbc_model {
  kbc::KbcModel model;
  train::TrainConfig train;
  std::uint64_t epoch = 0;
  std::string rng_state;
};

struct irn_path_world {
  paths::PathWorld world;
};

struct irn_path_model {
  paths::PathModel model;
  paths::PathTrainConfig train;
  std::uint64_t epoch = 0;
  std::string rng_state;
};

struct irn_report {
  std::vector<eval::Metric> metrics;
  eval::ConfigEntries config;
};

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;

thread_local std::string g_last_error;

irn_status fail(irn_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

struct ArgumentError {
  std::string message;
};

template <typename F>
irn_status checked(F&& body) {
  try {
    g_last_error.clear();
    body();
    return IRN_OK;
  } catch (const ArgumentError& e) {
    return fail(IRN_ERR_INVALID_ARGUMENT, e.message);
  } catch (const ContractViolation& e) {
    return fail(IRN_ERR_CONTRACT, e.what());
  } catch (const ShapeError& e) {
    return fail(IRN_ERR_SHAPE, e.what());
  } catch (const NumericError& e) {
    return fail(IRN_ERR_NUMERIC, e.what());
  } catch (const IoError& e) {
    return fail(IRN_ERR_IO, e.what());
  } catch (const ParseError& e) {
    return fail(IRN_ERR_PARSE, e.what());
  } catch (const FormatError& e) {
    return fail(IRN_ERR_FORMAT, e.what());
  } catch (const SupplyError& e) {
    return fail(IRN_ERR_SUPPLY, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IRN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IRN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(IRN_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError{what};
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

kg::Split to_split(irn_split s) {
  switch (s) {
    case IRN_SPLIT_TRAIN: return kg::Split::kTrain;
    case IRN_SPLIT_VALID: return kg::Split::kValid;
    case IRN_SPLIT_TEST: return kg::Split::kTest;
  }
  throw ArgumentError{"unknown split"};
}

kbc::KbcConfig to_core(const irn_kbc_config& c) {
  kbc::KbcConfig k;
  k.entity_dim = c.entity_dim;
  k.relation_dim = c.relation_dim;
  k.memory_size = c.memory_size;
  k.memory_dim = c.memory_dim;
  k.t_max = c.t_max;
  k.lambda = c.lambda;
  k.gamma = c.gamma;
  k.negatives = c.negatives;
  k.normalize_output_entities = c.normalize_output_entities != 0;
  k.init_scale = c.init_scale;
  return k;
}

irn_kbc_config from_core(const kbc::KbcConfig& k) {
  irn_kbc_config c;
  c.entity_dim = k.entity_dim;
  c.relation_dim = k.relation_dim;
  c.memory_size = k.memory_size;
  c.memory_dim = k.memory_dim;
  c.t_max = k.t_max;
  c.lambda = k.lambda;
  c.gamma = k.gamma;
  c.negatives = k.negatives;
  c.normalize_output_entities = k.normalize_output_entities ? 1 : 0;
  c.init_scale = k.init_scale;
  return c;
}

train::TrainConfig to_core(const irn_train_config& c) {
  train::TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.patience = c.patience;
  t.seed = c.seed;
  t.clip_norm = c.clip_norm;
  t.threads = c.threads;
  t.valid_limit = c.valid_limit;
  return t;
}

kg::EntityId entity_id(const kg::Vocab& vocab, const char* name) {
  require(name != nullptr, "entity name is null");
  const auto id = vocab.entities.find(name);
  if (!id) throw ArgumentError{"unknown entity '" + std::string(name) + "'"};
  return static_cast<kg::EntityId>(*id);
}

kg::RelationId relation_id(const kg::Vocab& vocab, const char* name) {
  require(name != nullptr, "relation name is null");
  const auto id = vocab.relations.find(name);
  if (!id) throw ArgumentError{"unknown relation '" + std::string(name) + "'"};
  return static_cast<kg::RelationId>(*id);
}

const std::vector<paths::PathInstance>& world_split(const paths::PathWorld& w, irn_split s) {
  switch (to_split(s)) {
    case kg::Split::kTrain: return w.data.train;
    case kg::Split::kValid: return w.data.valid;
    case kg::Split::kTest: return w.data.test;
  }
  return w.data.train;
}

irn_path_metrics to_c(const paths::PathMetrics& m) {
  return {m.count, m.valid, m.correct, m.valid_rate, m.correct_rate};
}

}  // namespace

extern "C" {

const char* irn_version(void) { return "1.0.0"; }

const char* irn_status_name(irn_status status) {
  switch (status) {
    case IRN_OK: return "ok";
    case IRN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case IRN_ERR_CONTRACT: return "contract violation";
    case IRN_ERR_SHAPE: return "shape mismatch";
    case IRN_ERR_NUMERIC: return "numeric failure";
    case IRN_ERR_IO: return "i/o error";
    case IRN_ERR_PARSE: return "parse error";
    case IRN_ERR_FORMAT: return "format error";
    case IRN_ERR_SUPPLY: return "supply exhausted";
    case IRN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* irn_last_error(void) { return g_last_error.c_str(); }

void irn_string_free(char* s) { std::free(s); }

// ---- datasets

irn_status irn_dataset_load(const char* dir, int add_reverse, irn_dataset** out) {
  return checked([&] {
    require(dir && out, "null argument");
    auto ds = std::make_unique<irn_dataset>();
    ds->data = kg::prepare(kg::load_dataset(dir), add_reverse != 0);
    *out = ds.release();
  });
}

void irn_dataset_free(irn_dataset* dataset) { delete dataset; }

irn_status irn_dataset_get_info(const irn_dataset* ds, irn_dataset_info* out) {
  return checked([&] {
    require(ds && out, "null argument");
    const auto& d = ds->data;
    out->num_entities = d.vocab.num_entities();
    out->num_relations = d.vocab.num_relations();
    out->base_relations = d.vocab.base_relations;
    out->train_triples = d.store.train.size();
    out->valid_triples = d.store.valid.size();
    out->test_triples = d.store.test.size();
    out->train_queries = d.train.size();
    out->valid_queries = d.valid.size();
    out->test_queries = d.test.size();
    out->warnings = d.warnings.size();
  });
}

irn_status irn_dataset_warnings(const irn_dataset* ds, char** out) {
  return checked([&] {
    require(ds && out, "null argument");
    std::string text;
    for (const auto& w : ds->data.warnings) text += w + "\n";
    *out = copy_string(text);
  });
}

// ---- configuration

void irn_kbc_config_default(irn_kbc_config* config) {
  if (config) *config = from_core(kbc::KbcConfig{});
}

void irn_train_config_default(irn_train_config* c) {
  if (!c) return;
  const train::TrainConfig t;
  c->learning_rate = t.learning_rate;
  c->batch_size = t.batch_size;
  c->epochs = t.epochs;
  c->patience = t.patience;
  c->seed = t.seed;
  c->clip_norm = t.clip_norm;
  c->threads = t.threads;
  c->valid_limit = t.valid_limit;
}

// ---- kbc models

irn_status irn_kbc_model_create(const irn_dataset* ds, const irn_kbc_config* config,
                                uint64_t seed, irn_kbc_model** out) {
  return checked([&] {
    require(ds && config && out, "null argument");
    kbc::KbcConfig cfg = to_core(*config);
    cfg.num_entities = ds->data.vocab.num_entities();
    cfg.num_relations = ds->data.vocab.num_relations();
    Rng rng(derive_seed(seed, kInitStream));
    auto m = std::make_unique<irn_kbc_model>();
    m->model = kbc::KbcModel::random(cfg, rng);
    m->train.seed = seed;
    m->rng_state = rng.state();
    *out = m.release();
  });
}

irn_status irn_kbc_model_load(const char* path, irn_kbc_model** out) {
  return checked([&] {
    require(path && out, "null argument");
    const train::Checkpoint ckpt = train::load_checkpoint(path);
    auto m = std::make_unique<irn_kbc_model>();
    m->model = train::kbc_from_checkpoint(ckpt);
    m->train = train::train_config_from(ckpt);
    m->epoch = ckpt.epoch;
    m->rng_state = ckpt.rng_state;
    *out = m.release();
  });
}

irn_status irn_kbc_model_save(const irn_kbc_model* m, const char* path) {
  return checked([&] {
    require(m && path, "null argument");
    auto& model = const_cast<kbc::KbcModel&>(m->model);
    train::Checkpoint ckpt;
    ckpt.kind = "kbc";
    ckpt.config = train::kbc_config_entries(model.config, m->train);
    ckpt.epoch = m->epoch;
    ckpt.rng_state = m->rng_state;
    train::export_parameters(model.parameters(), ckpt);
    train::save_checkpoint(path, ckpt);
  });
}

void irn_kbc_model_free(irn_kbc_model* model) { delete model; }

irn_status irn_kbc_model_get_config(const irn_kbc_model* m, irn_kbc_config* out) {
  return checked([&] {
    require(m && out, "null argument");
    *out = from_core(m->model.config);
  });
}

irn_status irn_kbc_model_check(const irn_kbc_model* m, const irn_dataset* ds) {
  return checked([&] {
    require(m && ds, "null argument");
    train::check_compatible(m->model, ds->data.vocab);
  });
}

irn_status irn_kbc_train(irn_kbc_model* m, const irn_dataset* ds, const irn_train_config* config,
                         irn_epoch_callback callback, void* user, irn_train_summary* out) {
  return checked([&] {
    require(m && ds && config, "null argument");
    const train::TrainConfig cfg = to_core(*config);
    Rng rng(derive_seed(cfg.seed, kTrainStream));
    auto on_epoch = [&](const train::EpochLog& log) {
      if (!callback) return;
      const irn_epoch_log c{log.epoch, log.mean_loss, log.valid_mean_rank, log.valid_hits_at_10,
                            log.improved ? 1 : 0};
      callback(&c, user);
    };
    const auto result = train::train_kbc(m->model, ds->data, cfg, rng, on_epoch);
    m->train = cfg;
    m->epoch = result.best_epoch;
    m->rng_state = rng.state();
    if (out) {
      out->epochs_run = result.epochs.size();
      out->best_epoch = result.best_epoch;
      out->best_valid_hits_at_10 = result.best_valid_hits_at_10;
    }
  });
}

irn_status irn_kbc_evaluate(const irn_kbc_model* m, const irn_dataset* ds, irn_split split,
                            size_t threads, size_t limit, irn_ranking* out) {
  return checked([&] {
    require(m && ds && out, "null argument");
    train::check_compatible(m->model, ds->data.vocab);
    std::span<const kg::Query> queries(ds->data.queries(to_split(split)));
    if (limit > 0 && queries.size() > limit) queries = queries.first(limit);
    const auto r = eval::evaluate(m->model, queries, ds->data.filter, threads == 0 ? 1 : threads);
    *out = {r.count(), r.mean_rank, r.hits_at_10};
  });
}

irn_status irn_kbc_scores(const irn_kbc_model* m, const irn_dataset* ds, const char* subject,
                          const char* relation, double* scores, size_t length) {
  return checked([&] {
    require(m && ds && scores, "null argument");
    train::check_compatible(m->model, ds->data.vocab);
    require(length == m->model.config.num_entities, "score buffer length differs from entity count");
    const kg::Query q{entity_id(ds->data.vocab, subject), relation_id(ds->data.vocab, relation), 0,
                      false};
    const auto s = kbc::score_all_entities(m->model, q);
    std::copy(s.begin(), s.end(), scores);
  });
}

irn_status irn_kbc_trace(const irn_kbc_model* m, const irn_dataset* ds, const char* head,
                         const char* relation, const char* tail, char** out) {
  return checked([&] {
    require(m && ds && out, "null argument");
    train::check_compatible(m->model, ds->data.vocab);
    const auto& vocab = ds->data.vocab;
    const kg::Query q{entity_id(vocab, head), relation_id(vocab, relation), entity_id(vocab, tail),
                      vocab.is_reverse(relation_id(vocab, relation))};
    const auto observed = eval::observed_inputs(ds->data.train);
    *out = copy_string(eval::format_trace(eval::trace_inference(m->model, q, observed), vocab));
  });
}

irn_status irn_kbc_memory_report(const irn_kbc_model* m, const irn_dataset* ds, size_t top_k,
                                 char** out) {
  return checked([&] {
    require(m && ds && out, "null argument");
    train::check_compatible(m->model, ds->data.vocab);
    const auto report = eval::memory_report(m->model, ds->data.train, top_k);
    *out = copy_string(eval::format_memory_report(report, ds->data.vocab));
  });
}

irn_status irn_gradcheck_toy(uint64_t seed, double tolerance, char** out, double* max_error,
                             int* passed) {
  return checked([&] {
    require(tolerance > 0.0, "tolerance must be positive");
    const auto report = toy::kbc_gradient_check(seed, tolerance);
    if (out) *out = copy_string(report.to_text());
    if (max_error) *max_error = report.max_error();
    if (passed) *passed = report.passed() ? 1 : 0;
  });
}

// ---- path worlds

void irn_world_config_default(irn_world_config* c) {
  if (!c) return;
  const paths::WorldConfig w;
  const paths::SplitSizes s;
  c->nodes = w.nodes;
  c->k = w.k;
  c->random_edges = 0;
  c->seed = w.seed;
  c->train = s.train;
  c->valid = s.valid;
  c->test = s.test;
}

irn_status irn_path_world_generate(const irn_world_config* c, irn_path_world** out) {
  return checked([&] {
    require(c && out, "null argument");
    auto w = std::make_unique<irn_path_world>();
    w->world.config = {c->nodes, c->k, c->random_edges ? paths::EdgeMode::kRandom
                                                       : paths::EdgeMode::kNearest,
                       c->seed};
    w->world.graph = paths::generate_world(w->world.config);
    w->world.data = paths::build_dataset(w->world.graph, {c->train, c->valid, c->test},
                                         derive_seed(c->seed, kTrainStream));
    *out = w.release();
  });
}

irn_status irn_path_world_load(const char* path, irn_path_world** out) {
  return checked([&] {
    require(path && out, "null argument");
    auto w = std::make_unique<irn_path_world>();
    w->world = paths::load_world(path);
    *out = w.release();
  });
}

irn_status irn_path_world_save(const irn_path_world* w, const char* path) {
  return checked([&] {
    require(w && path, "null argument");
    paths::save_world(path, w->world);
  });
}

void irn_path_world_free(irn_path_world* world) { delete world; }

irn_status irn_path_world_get_info(const irn_path_world* w, irn_path_world_info* out) {
  return checked([&] {
    require(w && out, "null argument");
    out->nodes = w->world.graph.size();
    out->edges = w->world.graph.edge_count();
    out->train = w->world.data.train.size();
    out->valid = w->world.data.valid.size();
    out->test = w->world.data.test.size();
    out->longest_train_hops = paths::longest_hops(w->world.data.train);
  });
}

// ---- path models

void irn_path_model_config_default(irn_path_model_config* c) {
  if (!c) return;
  const paths::PathModelConfig p;
  c->embed_dim = p.embed_dim;
  c->memory_size = p.memory_size;
  c->memory_dim = p.memory_dim;
  c->t_max = p.t_max;
  c->lambda = p.lambda;
  c->max_decode = p.max_decode;
  c->objective = p.objective == paths::PathObjective::kExpectedReward ? IRN_PATH_EXPECTED_REWARD
                                                                       : IRN_PATH_LOG_LIKELIHOOD;
  c->init_scale = p.init_scale;
}

irn_status irn_path_model_create(const irn_path_world* w, const irn_path_model_config* c,
                                 uint64_t seed, irn_path_model** out) {
  return checked([&] {
    require(w && c && out, "null argument");
    paths::PathModelConfig p;
    p.num_nodes = w->world.graph.size();
    p.embed_dim = c->embed_dim;
    p.memory_size = c->memory_size;
    p.memory_dim = c->memory_dim;
    p.t_max = c->t_max;
    p.lambda = c->lambda;
    p.max_decode = c->max_decode;
    require(c->objective == IRN_PATH_EXPECTED_REWARD || c->objective == IRN_PATH_LOG_LIKELIHOOD,
            "unknown path objective");
    p.objective = c->objective == IRN_PATH_EXPECTED_REWARD ? paths::PathObjective::kExpectedReward
                                                           : paths::PathObjective::kLogLikelihood;
    p.init_scale = c->init_scale;
    Rng rng(derive_seed(seed, kInitStream));
    auto m = std::make_unique<irn_path_model>();
    m->model = paths::PathModel::random(p, rng);
    m->train.seed = seed;
    m->rng_state = rng.state();
    *out = m.release();
  });
}

irn_status irn_path_model_load(const char* path, irn_path_model** out) {
  return checked([&] {
    require(path && out, "null argument");
    const train::Checkpoint ckpt = train::load_checkpoint(path);
    auto m = std::make_unique<irn_path_model>();
    m->model = paths::path_from_checkpoint(ckpt);
    const train::TrainConfig t = train::train_config_from(ckpt);
    m->train.learning_rate = t.learning_rate;
    m->train.batch_size = t.batch_size;
    m->train.epochs = t.epochs;
    m->train.patience = t.patience;
    m->train.seed = t.seed;
    m->train.clip_norm = t.clip_norm;
    m->epoch = ckpt.epoch;
    m->rng_state = ckpt.rng_state;
    *out = m.release();
  });
}

irn_status irn_path_model_save(const irn_path_model* m, const char* path) {
  return checked([&] {
    require(m && path, "null argument");
    Rng rng;
    rng.restore(m->rng_state);
    auto ckpt = paths::path_snapshot(const_cast<paths::PathModel&>(m->model), m->train, m->epoch,
                                     rng);
    train::save_checkpoint(path, ckpt);
  });
}

void irn_path_model_free(irn_path_model* model) { delete model; }

irn_status irn_path_train(irn_path_model* m, const irn_path_world* w,
                          const irn_train_config* config, irn_path_epoch_callback callback,
                          void* user, irn_train_summary* out) {
  return checked([&] {
    require(m && w && config, "null argument");
    if (m->model.config.num_nodes != w->world.graph.size()) {
      throw ShapeError("table 'symbols' covers " + std::to_string(m->model.config.num_nodes) +
                       " nodes but the world has " + std::to_string(w->world.graph.size()));
    }
    paths::PathTrainConfig cfg;
    cfg.learning_rate = config->learning_rate;
    cfg.batch_size = config->batch_size;
    cfg.epochs = config->epochs;
    cfg.patience = config->patience;
    cfg.clip_norm = config->clip_norm;
    cfg.seed = config->seed;
    cfg.threads = config->threads == 0 ? 1 : config->threads;
    cfg.valid_limit = config->valid_limit;
    Rng rng(derive_seed(cfg.seed, kTrainStream));
    auto on_epoch = [&](const paths::PathEpochLog& log) {
      if (!callback) return;
      const irn_path_epoch_log c{log.epoch, log.mean_loss, log.valid_correct, log.valid_valid,
                                 log.improved ? 1 : 0};
      callback(&c, user);
    };
    const auto result =
        paths::train_path_model(m->model, w->world.data, w->world.graph, cfg, rng, on_epoch);
    m->train = cfg;
    m->epoch = result.best_epoch;
    m->rng_state = rng.state();
    if (out) {
      out->epochs_run = result.epochs.size();
      out->best_epoch = result.best_epoch;
      out->best_valid_hits_at_10 = 0.0;
    }
  });
}

irn_status irn_path_evaluate(const irn_path_model* m, const irn_path_world* w, irn_split split,
                             size_t threads, irn_path_metrics* out) {
  return checked([&] {
    require(m && w && out, "null argument");
    const auto& instances = world_split(w->world, split);
    const auto preds = paths::predict_paths(m->model, instances, threads == 0 ? 1 : threads);
    *out = to_c(paths::evaluate_paths(w->world.graph, instances, preds));
  });
}

irn_status irn_path_dp_baseline(const irn_path_world* w, irn_split split, irn_path_metrics* out) {
  return checked([&] {
    require(w && out, "null argument");
    const auto& instances = world_split(w->world, split);
    const auto preds = paths::dp_baseline(w->world.data.train, instances, w->world.graph.size());
    *out = to_c(paths::evaluate_paths(w->world.graph, instances, preds));
  });
}

irn_status irn_path_predictions(const irn_path_model* m, const irn_path_world* w, irn_split split,
                                size_t threads, char** out) {
  return checked([&] {
    require(m && w && out, "null argument");
    const auto& instances = world_split(w->world, split);
    const auto preds = paths::predict_paths(m->model, instances, threads == 0 ? 1 : threads);
    const auto metrics = paths::evaluate_paths(w->world.graph, instances, preds);
    std::ostringstream text;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      text << instances[i].start << " " << instances[i].end << " |";
      for (auto n : preds[i]) text << " " << n;
      text << " | " << (metrics.per_instance[i].valid ? 1 : 0) << " "
           << (metrics.per_instance[i].correct ? 1 : 0) << "\n";
    }
    *out = copy_string(text.str());
  });
}

// ---- reports

irn_status irn_report_create(irn_report** out) {
  return checked([&] {
    require(out, "null argument");
    *out = new irn_report();
  });
}

void irn_report_free(irn_report* report) { delete report; }

irn_status irn_report_add_config(irn_report* r, const char* key, const char* value) {
  return checked([&] {
    require(r && key && value, "null argument");
    r->config.emplace_back(key, value);
  });
}

irn_status irn_report_add_metric(irn_report* r, const char* name, const char* split,
                                 double value) {
  return checked([&] {
    require(r && name && split, "null argument");
    r->metrics.push_back({name, split, value});
  });
}

irn_status irn_report_text(const irn_report* r, char** out) {
  return checked([&] {
    require(r && out, "null argument");
    *out = copy_string(eval::metrics_text(r->metrics));
  });
}

irn_status irn_report_json(const irn_report* r, char** out) {
  return checked([&] {
    require(r && out, "null argument");
    *out = copy_string(eval::metrics_json(r->metrics, r->config));
  });
}

irn_status irn_report_write(const irn_report* r, const char* path) {
  return checked([&] {
    require(r && path, "null argument");
    eval::write_text_file(path, eval::metrics_json(r->metrics, r->config));
  });
}

}  // extern "C"
