// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "irn.h"

namespace {

struct Failure {
  std::string message;
};

void check(irn_status status, const std::string& what) {
  if (status != IRN_OK) {
    throw Failure{what + ": " + irn_status_name(status) + ": " + irn_last_error()};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  irn_string_free(s);
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

irn_split parse_split(const std::string& s) {
  if (s == "train") return IRN_SPLIT_TRAIN;
  if (s == "valid") return IRN_SPLIT_VALID;
  if (s == "test") return IRN_SPLIT_TEST;
  throw Failure{"unknown split '" + s + "'"};
}

// Owns a handle and its release function.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (ptr) Free(ptr);
  }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Dataset = Handle<irn_dataset, irn_dataset_free>;
using KbcModel = Handle<irn_kbc_model, irn_kbc_model_free>;
using World = Handle<irn_path_world, irn_path_world_free>;
using PathModel = Handle<irn_path_model, irn_path_model_free>;
using Report = Handle<irn_report, irn_report_free>;

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string report_path;
  std::string data_dir;
};

struct Config {
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
  void log(const std::string& command) const {
    std::printf("# %s", command.c_str());
    for (const auto& [k, v] : entries) std::printf(" %s=%s", k.c_str(), v.c_str());
    std::printf("\n");
  }
};

class Metrics {
 public:
  explicit Metrics(const Config& config) {
    check(irn_report_create(report_.out()), "report");
    for (const auto& [k, v] : config.entries) {
      check(irn_report_add_config(report_.get(), k.c_str(), v.c_str()), "report");
    }
  }
  void add(const std::string& name, const std::string& split, double value) {
    check(irn_report_add_metric(report_.get(), name.c_str(), split.c_str(), value), "report");
  }
  void finish(const std::string& path) {
    char* text = nullptr;
    check(irn_report_text(report_.get(), &text), "report");
    std::printf("%s", take(text).c_str());
    if (!path.empty()) check(irn_report_write(report_.get(), path.c_str()), "write report");
  }

 private:
  Report report_;
};

std::string resolve_data(const Common& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("IRN_DATA_ROOT")) return env;
  throw Failure{"no dataset directory: pass --data or set IRN_DATA_ROOT"};
}

void add_kbc_flags(CLI::App* app, irn_kbc_config& m) {
  app->add_option("--entity-dim", m.entity_dim, "Entity embedding dimension")->capture_default_str();
  app->add_option("--relation-dim", m.relation_dim, "Relation embedding dimension")->capture_default_str();
  app->add_option("--memory-size", m.memory_size, "Number of memory vectors |M|")->capture_default_str();
  app->add_option("--memory-dim", m.memory_dim, "Memory vector dimension")->capture_default_str();
  app->add_option("--t-max", m.t_max, "Maximum inference steps T_max")->capture_default_str();
  app->add_option("--lambda", m.lambda, "Attention temperature lambda")->capture_default_str();
  app->add_option("--gamma", m.gamma, "Distance softmax scale gamma")->capture_default_str();
  app->add_option("--negatives", m.negatives, "Negative samples per training query")->capture_default_str();
  app->add_flag("--normalize-output", m.normalize_output_entities,
                "Also keep output entity embeddings at unit norm");
}

void add_train_flags(CLI::App* app, irn_train_config& t) {
  app->add_option("--lr", t.learning_rate, "SGD learning rate")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  app->add_option("--patience", t.patience, "Early-stop patience in epochs (0 = off)")->capture_default_str();
  app->add_option("--clip", t.clip_norm, "Global gradient-norm clip (<= 0 = off)")->capture_default_str();
  app->add_option("--valid-limit", t.valid_limit, "Validation queries per epoch (0 = all)")->capture_default_str();
}

void log_kbc(Config& cfg, const irn_kbc_config& m) {
  cfg.add("entity_dim", std::to_string(m.entity_dim));
  cfg.add("relation_dim", std::to_string(m.relation_dim));
  cfg.add("memory_size", std::to_string(m.memory_size));
  cfg.add("memory_dim", std::to_string(m.memory_dim));
  cfg.add("t_max", std::to_string(m.t_max));
  cfg.add("lambda", num(m.lambda));
  cfg.add("gamma", num(m.gamma));
  cfg.add("negatives", std::to_string(m.negatives));
  cfg.add("normalize_output", std::to_string(m.normalize_output_entities));
}

void log_train(Config& cfg, const irn_train_config& t) {
  cfg.add("lr", num(t.learning_rate));
  cfg.add("batch_size", std::to_string(t.batch_size));
  cfg.add("epochs", std::to_string(t.epochs));
  cfg.add("patience", std::to_string(t.patience));
  cfg.add("clip", num(t.clip_norm));
  cfg.add("valid_limit", std::to_string(t.valid_limit));
}

void log_common(Config& cfg, const Common& c) {
  cfg.add("seed", std::to_string(c.seed));
  cfg.add("threads", std::to_string(c.threads));
}

void print_epoch(const irn_epoch_log* log, void*) {
  std::printf("epoch %zu loss %.6f valid_mr %.3f valid_hits10 %.4f%s\n", log->epoch,
              log->mean_loss, log->valid_mean_rank, log->valid_hits_at_10,
              log->improved ? " *" : "");
  std::fflush(stdout);
}

void print_path_epoch(const irn_path_epoch_log* log, void*) {
  std::printf("epoch %zu loss %.6f valid_correct %zu valid_valid %zu%s\n", log->epoch,
              log->mean_loss, log->valid_correct, log->valid_valid, log->improved ? " *" : "");
  std::fflush(stdout);
}

void load_dataset(const Common& c, Dataset& ds, bool reverse = true) {
  const std::string dir = resolve_data(c);
  check(irn_dataset_load(dir.c_str(), reverse ? 1 : 0, ds.out()), "load dataset " + dir);
  irn_dataset_info info;
  check(irn_dataset_get_info(ds.get(), &info), "dataset info");
  std::printf("# dataset %s entities=%zu relations=%zu train=%zu valid=%zu test=%zu\n", dir.c_str(),
              info.num_entities, info.num_relations, info.train_triples, info.valid_triples,
              info.test_triples);
  if (info.warnings > 0) {
    char* w = nullptr;
    check(irn_dataset_warnings(ds.get(), &w), "dataset warnings");
    std::fprintf(stderr, "%s", take(w).c_str());
  }
}

void add_ranking(Metrics& metrics, const std::string& split, const irn_ranking& r) {
  metrics.add("mean_rank", split, r.mean_rank);
  metrics.add("hits_at_10", split, r.hits_at_10);
  metrics.add("queries", split, static_cast<double>(r.count));
}

void add_paths(Metrics& metrics, const std::string& prefix, const std::string& split,
               const irn_path_metrics& m) {
  metrics.add(prefix + "correct", split, static_cast<double>(m.correct));
  metrics.add(prefix + "valid", split, static_cast<double>(m.valid));
  metrics.add(prefix + "correct_rate", split, m.correct_rate);
  metrics.add(prefix + "valid_rate", split, m.valid_rate);
  metrics.add(prefix + "instances", split, static_cast<double>(m.count));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit reasoning networks for knowledge-base completion and path synthesis"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  Common common;
  auto add_common = [&common](CLI::App* sub, bool data) {
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", common.threads, "Evaluation worker threads")->capture_default_str();
    sub->add_option("--report", common.report_path, "Write a JSON metric report here");
    if (data) {
      sub->add_option("--data", common.data_dir,
                      "Dataset directory with train.txt/valid.txt/test.txt "
                      "(default: $IRN_DATA_ROOT)");
    }
  };

  irn_kbc_config kbc;
  irn_kbc_config_default(&kbc);
  irn_train_config tc;
  irn_train_config_default(&tc);
  irn_world_config wc;
  irn_world_config_default(&wc);
  irn_path_model_config pc;
  irn_path_model_config_default(&pc);
  irn_train_config ptc;
  irn_train_config_default(&ptc);
  ptc.learning_rate = 0.5;
  ptc.epochs = 60;

  std::string checkpoint, out_path, split = "test", head, relation, tail, world_path, edges = "knn",
                                     objective = "expected-reward", predictions_path;
  std::size_t limit = 0, top_k = 8;
  double tolerance = 1e-4;
  bool no_reverse = false;

  auto* train_kbc = app.add_subcommand("train-kbc", "Train a knowledge-base completion model");
  add_common(train_kbc, true);
  add_kbc_flags(train_kbc, kbc);
  add_train_flags(train_kbc, tc);
  train_kbc->add_option("--out", out_path, "Checkpoint to write")->required();
  train_kbc->add_flag("--no-reverse", no_reverse, "Do not add reverse relations");

  auto* eval_kbc = app.add_subcommand("eval-kbc", "Filtered MR and Hits@10 on a split");
  add_common(eval_kbc, true);
  add_kbc_flags(eval_kbc, kbc);
  eval_kbc->add_option("--checkpoint", checkpoint, "Model checkpoint (default: fresh random model)");
  eval_kbc->add_option("--split", split, "train, valid or test")->capture_default_str();
  eval_kbc->add_option("--limit", limit, "Evaluate at most this many queries (0 = all)")->capture_default_str();
  eval_kbc->add_flag("--no-reverse", no_reverse, "Do not add reverse relations");

  auto* trace = app.add_subcommand("trace", "Per-step inference trace of one triple");
  add_common(trace, true);
  trace->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  trace->add_option("--head", head, "Head entity")->required();
  trace->add_option("--relation", relation, "Relation")->required();
  trace->add_option("--tail", tail, "Tail entity")->required();

  auto* memory = app.add_subcommand("memory-report", "Top relations attending to each memory cell");
  add_common(memory, true);
  memory->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  memory->add_option("--top-k", top_k, "Relations listed per cell")->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check on a toy problem");
  add_common(gradcheck, false);
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();

  auto* gen_paths = app.add_subcommand("gen-paths", "Generate a shortest-path world");
  add_common(gen_paths, false);
  gen_paths->add_option("--nodes", wc.nodes, "Number of nodes")->capture_default_str();
  gen_paths->add_option("--k", wc.k, "Neighbours per node")->capture_default_str();
  gen_paths->add_option("--edges", edges, "Edge mode: knn or random")->capture_default_str();
  gen_paths->add_option("--train", wc.train, "Training instances")->capture_default_str();
  gen_paths->add_option("--valid", wc.valid, "Validation instances")->capture_default_str();
  gen_paths->add_option("--test", wc.test, "Test instances")->capture_default_str();
  gen_paths->add_option("--out", out_path, "World file to write")->required();

  auto* train_paths = app.add_subcommand("train-paths", "Train the path synthesis model");
  add_common(train_paths, false);
  add_train_flags(train_paths, ptc);
  train_paths->add_option("--world", world_path, "World file")->required();
  train_paths->add_option("--out", out_path, "Checkpoint to write")->required();
  train_paths->add_option("--embed-dim", pc.embed_dim, "Node symbol embedding dimension")->capture_default_str();
  train_paths->add_option("--memory-size", pc.memory_size, "Number of memory vectors |M|")->capture_default_str();
  train_paths->add_option("--memory-dim", pc.memory_dim, "Memory vector dimension")->capture_default_str();
  train_paths->add_option("--t-max", pc.t_max, "Maximum inference steps T_max")->capture_default_str();
  train_paths->add_option("--lambda", pc.lambda, "Attention temperature lambda")->capture_default_str();
  train_paths->add_option("--objective", objective, "expected-reward or log-likelihood")->capture_default_str();

  auto* eval_paths = app.add_subcommand("eval-paths", "Score a path model against the baseline");
  add_common(eval_paths, false);
  eval_paths->add_option("--world", world_path, "World file")->required();
  eval_paths->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval_paths->add_option("--split", split, "train, valid or test")->capture_default_str();
  eval_paths->add_option("--predictions", predictions_path, "Write per-instance predictions here");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg;
    if (*train_kbc) {
      log_common(cfg, common);
      log_kbc(cfg, kbc);
      log_train(cfg, tc);
      cfg.add("reverse", no_reverse ? "0" : "1");
      cfg.log("train-kbc");
      Dataset ds;
      load_dataset(common, ds, !no_reverse);
      KbcModel model;
      check(irn_kbc_model_create(ds.get(), &kbc, common.seed, model.out()), "create model");
      tc.seed = common.seed;
      tc.threads = common.threads;
      irn_train_summary summary;
      check(irn_kbc_train(model.get(), ds.get(), &tc, print_epoch, nullptr, &summary), "train");
      check(irn_kbc_model_save(model.get(), out_path.c_str()), "save checkpoint");
      Metrics metrics(cfg);
      metrics.add("best_epoch", "valid", static_cast<double>(summary.best_epoch));
      irn_dataset_info info;
      check(irn_dataset_get_info(ds.get(), &info), "dataset info");
      for (auto [name, s] : {std::pair{"valid", IRN_SPLIT_VALID}, std::pair{"test", IRN_SPLIT_TEST}}) {
        const std::size_t n = s == IRN_SPLIT_VALID ? info.valid_queries : info.test_queries;
        if (n == 0) continue;
        irn_ranking r;
        check(irn_kbc_evaluate(model.get(), ds.get(), s, common.threads, 0, &r), "evaluate");
        add_ranking(metrics, name, r);
      }
      metrics.finish(common.report_path);
    } else if (*eval_kbc) {
      log_common(cfg, common);
      cfg.add("checkpoint", checkpoint.empty() ? "(random)" : checkpoint);
      cfg.add("split", split);
      cfg.add("limit", std::to_string(limit));
      if (checkpoint.empty()) log_kbc(cfg, kbc);
      cfg.log("eval-kbc");
      Dataset ds;
      load_dataset(common, ds, !no_reverse);
      KbcModel model;
      if (checkpoint.empty()) {
        check(irn_kbc_model_create(ds.get(), &kbc, common.seed, model.out()), "create model");
      } else {
        check(irn_kbc_model_load(checkpoint.c_str(), model.out()), "load checkpoint " + checkpoint);
        check(irn_kbc_model_check(model.get(), ds.get()), "checkpoint vs dataset");
      }
      irn_ranking r;
      check(irn_kbc_evaluate(model.get(), ds.get(), parse_split(split), common.threads, limit, &r),
            "evaluate");
      Metrics metrics(cfg);
      add_ranking(metrics, split, r);
      metrics.finish(common.report_path);
    } else if (*trace) {
      log_common(cfg, common);
      cfg.add("checkpoint", checkpoint);
      cfg.log("trace");
      Dataset ds;
      load_dataset(common, ds);
      KbcModel model;
      check(irn_kbc_model_load(checkpoint.c_str(), model.out()), "load checkpoint " + checkpoint);
      char* text = nullptr;
      check(irn_kbc_trace(model.get(), ds.get(), head.c_str(), relation.c_str(), tail.c_str(), &text),
            "trace");
      std::printf("%s", take(text).c_str());
    } else if (*memory) {
      log_common(cfg, common);
      cfg.add("checkpoint", checkpoint);
      cfg.add("top_k", std::to_string(top_k));
      cfg.log("memory-report");
      Dataset ds;
      load_dataset(common, ds);
      KbcModel model;
      check(irn_kbc_model_load(checkpoint.c_str(), model.out()), "load checkpoint " + checkpoint);
      char* text = nullptr;
      check(irn_kbc_memory_report(model.get(), ds.get(), top_k, &text), "memory report");
      std::printf("%s", take(text).c_str());
    } else if (*gradcheck) {
      log_common(cfg, common);
      cfg.add("tolerance", num(tolerance));
      cfg.log("gradcheck");
      char* text = nullptr;
      double max_error = 0.0;
      int passed = 0;
      check(irn_gradcheck_toy(common.seed, tolerance, &text, &max_error, &passed), "gradcheck");
      std::printf("%s", take(text).c_str());
      Metrics metrics(cfg);
      metrics.add("max_relative_error", "toy", max_error);
      metrics.finish(common.report_path);
      return passed ? 0 : 1;
    } else if (*gen_paths) {
      if (edges != "knn" && edges != "random") throw Failure{"--edges must be knn or random"};
      wc.random_edges = edges == "random";
      wc.seed = common.seed;
      log_common(cfg, common);
      cfg.add("nodes", std::to_string(wc.nodes));
      cfg.add("k", std::to_string(wc.k));
      cfg.add("edges", edges);
      cfg.add("train", std::to_string(wc.train));
      cfg.add("valid", std::to_string(wc.valid));
      cfg.add("test", std::to_string(wc.test));
      cfg.log("gen-paths");
      World world;
      check(irn_path_world_generate(&wc, world.out()), "generate world");
      check(irn_path_world_save(world.get(), out_path.c_str()), "save world");
      irn_path_world_info info;
      check(irn_path_world_get_info(world.get(), &info), "world info");
      irn_path_metrics dp;
      check(irn_path_dp_baseline(world.get(), IRN_SPLIT_TEST, &dp), "dp baseline");
      Metrics metrics(cfg);
      metrics.add("edges", "world", static_cast<double>(info.edges));
      metrics.add("longest_train_hops", "train", static_cast<double>(info.longest_train_hops));
      add_paths(metrics, "dp_", "test", dp);
      metrics.finish(common.report_path);
    } else if (*train_paths) {
      if (objective == "expected-reward") {
        pc.objective = IRN_PATH_EXPECTED_REWARD;
      } else if (objective == "log-likelihood") {
        pc.objective = IRN_PATH_LOG_LIKELIHOOD;
      } else {
        throw Failure{"--objective must be expected-reward or log-likelihood"};
      }
      ptc.seed = common.seed;
      ptc.threads = common.threads;
      log_common(cfg, common);
      cfg.add("world", world_path);
      cfg.add("embed_dim", std::to_string(pc.embed_dim));
      cfg.add("memory_size", std::to_string(pc.memory_size));
      cfg.add("memory_dim", std::to_string(pc.memory_dim));
      cfg.add("t_max", std::to_string(pc.t_max));
      cfg.add("lambda", num(pc.lambda));
      cfg.add("objective", objective);
      log_train(cfg, ptc);
      cfg.log("train-paths");
      World world;
      check(irn_path_world_load(world_path.c_str(), world.out()), "load world " + world_path);
      PathModel model;
      check(irn_path_model_create(world.get(), &pc, common.seed, model.out()), "create model");
      irn_train_summary summary;
      check(irn_path_train(model.get(), world.get(), &ptc, print_path_epoch, nullptr, &summary),
            "train");
      check(irn_path_model_save(model.get(), out_path.c_str()), "save checkpoint");
      irn_path_metrics m;
      check(irn_path_evaluate(model.get(), world.get(), IRN_SPLIT_TEST, common.threads, &m),
            "evaluate");
      Metrics metrics(cfg);
      metrics.add("best_epoch", "valid", static_cast<double>(summary.best_epoch));
      add_paths(metrics, "", "test", m);
      metrics.finish(common.report_path);
    } else if (*eval_paths) {
      log_common(cfg, common);
      cfg.add("world", world_path);
      cfg.add("checkpoint", checkpoint);
      cfg.add("split", split);
      cfg.log("eval-paths");
      World world;
      check(irn_path_world_load(world_path.c_str(), world.out()), "load world " + world_path);
      PathModel model;
      check(irn_path_model_load(checkpoint.c_str(), model.out()), "load checkpoint " + checkpoint);
      const irn_split s = parse_split(split);
      irn_path_metrics m, dp;
      check(irn_path_evaluate(model.get(), world.get(), s, common.threads, &m), "evaluate");
      check(irn_path_dp_baseline(world.get(), s, &dp), "dp baseline");
      if (!predictions_path.empty()) {
        char* text = nullptr;
        check(irn_path_predictions(model.get(), world.get(), s, common.threads, &text),
              "predictions");
        const std::string body = take(text);
        std::FILE* f = std::fopen(predictions_path.c_str(), "wb");
        if (!f) throw Failure{"cannot write " + predictions_path};
        std::fwrite(body.data(), 1, body.size(), f);
        std::fclose(f);
      }
      Metrics metrics(cfg);
      add_paths(metrics, "", split, m);
      add_paths(metrics, "dp_", split, dp);
      metrics.finish(common.report_path);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return 2;
  }
  return 0;
}
