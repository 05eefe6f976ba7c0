#include "vsml/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace vsml {

namespace fs = std::filesystem;

namespace {

void require_known_keys(const Json& obj, const std::string& where,
                        std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

void copy_config_into(const std::string& config_path, const std::string& out_dir) {
  if (config_path.empty()) return;
  std::ifstream in(config_path, std::ios::binary);
  if (!in) return;
  std::ofstream out(out_dir + "/config.json", std::ios::binary);
  out << in.rdbuf();
}

void ensure_out_layout(const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("an output directory is required (--out)");
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/checkpoints");
  fs::create_directories(out_dir + "/traces");
  fs::create_directories(out_dir + "/plots");
}

std::string step_checkpoint_path(const std::string& out_dir, int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06d.json", step);
  return out_dir + "/checkpoints/" + buf;
}

Json vsml_checkpoint_meta(const ExperimentConfig& cfg) {
  return Json{{"hidden", cfg.hidden},
              {"ticks_per_example", cfg.ticks_per_example},
              {"seed", cfg.seed}};
}

}  // namespace

TaskSpec task_spec_from_json(const Json& j) {
  require_known_keys(j, "task",
                     {"source", "dataset", "class_subset", "rescale", "project",
                      "permute", "projection_seed", "permutation_seed", "input_dim",
                      "classes", "points", "episode_length", "weight"});
  TaskSpec t;
  const std::string source = get_or<std::string>(j, "source", "random");
  if (source == "dataset") {
    t.source = TaskSpec::Source::dataset;
  } else if (source == "random") {
    t.source = TaskSpec::Source::random;
  } else if (source == "sum-sign") {
    t.source = TaskSpec::Source::sum_sign;
  } else {
    throw ConfigError("task: unknown source '" + source + "'");
  }
  t.dataset_name = get_or<std::string>(j, "dataset", "");
  t.class_subset = get_or<std::vector<int>>(j, "class_subset", {});
  t.rescale_size = get_or<int>(j, "rescale", 0);
  t.project = get_or<bool>(j, "project", false);
  t.permute = get_or<bool>(j, "permute", false);
  t.projection_seed = get_or<long long>(j, "projection_seed", -1);
  t.permutation_seed = get_or<long long>(j, "permutation_seed", -1);
  t.input_dim = get_or<int>(j, "input_dim", 0);
  t.class_count = get_or<int>(j, "classes", 2);
  t.random_points = get_or<int>(j, "points", 20);
  t.episode_length = get_or<int>(j, "episode_length", 500);
  t.validate();
  return t;
}

ExperimentConfig parse_config(const Json& j) {
  require_known_keys(j, "top level",
                     {"mode", "seed", "workers", "out_dir", "data_root", "learner",
                      "architecture", "es", "cloning", "tasks", "run", "verify"});
  ExperimentConfig cfg;
  cfg.mode = get_or<std::string>(j, "mode", "");
  cfg.seed = get_or<uint64_t>(j, "seed", 0);
  cfg.workers = get_or<int>(j, "workers", 0);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "");
  cfg.data_root = get_or<std::string>(j, "data_root", "");
  cfg.learner = get_or<std::string>(j, "learner", "vsml");
  if (cfg.learner != "vsml" && cfg.learner != "meta-rnn" && cfg.learner != "sgd" &&
      cfg.learner != "adam") {
    throw ConfigError("config: learner must be vsml|meta-rnn|sgd|adam");
  }

  if (j.contains("architecture")) {
    const Json& a = j["architecture"];
    require_known_keys(a, "architecture",
                       {"n_state", "n_fwd", "n_bwd", "hidden", "ticks_per_example",
                        "meta_rnn_hidden", "sgd_hidden", "sgd_lr"});
    cfg.dims.state = get_or<int>(a, "n_state", cfg.dims.state);
    cfg.dims.fwd_msg = get_or<int>(a, "n_fwd", cfg.dims.fwd_msg);
    cfg.dims.bwd_msg = get_or<int>(a, "n_bwd", cfg.dims.bwd_msg);
    cfg.hidden = get_or<std::vector<int>>(a, "hidden", {});
    cfg.ticks_per_example = get_or<int>(a, "ticks_per_example", 2);
    cfg.meta_rnn_hidden = get_or<int>(a, "meta_rnn_hidden", 16);
    cfg.sgd_hidden = get_or<int>(a, "sgd_hidden", 160);
    cfg.sgd_lr = get_or<double>(a, "sgd_lr", 0.0);
    if (cfg.dims.state < 2 || cfg.dims.fwd_msg < 1 || cfg.dims.bwd_msg < 1) {
      throw ConfigError("architecture: n_state >= 2 and message sizes >= 1 required");
    }
  }

  if (j.contains("es")) {
    const Json& e = j["es"];
    require_known_keys(e, "es",
                       {"population_size", "noise_std", "outer_steps", "episode_length",
                        "adam_lr", "antithetic", "rank_shaping", "checkpoint_every",
                        "eval_episodes"});
    cfg.es.population_size = get_or<int>(e, "population_size", cfg.es.population_size);
    cfg.es.noise_std = get_or<double>(e, "noise_std", cfg.es.noise_std);
    cfg.es.outer_steps = get_or<int>(e, "outer_steps", cfg.es.outer_steps);
    cfg.es.episode_length = get_or<int>(e, "episode_length", cfg.es.episode_length);
    cfg.es.adam.lr = get_or<double>(e, "adam_lr", cfg.es.adam.lr);
    cfg.es.antithetic = get_or<bool>(e, "antithetic", true);
    cfg.es.rank_shaping = get_or<bool>(e, "rank_shaping", true);
    cfg.checkpoint_every = get_or<int>(e, "checkpoint_every", 100);
    cfg.eval_episodes = get_or<int>(e, "eval_episodes", 16);
    cfg.es.validate();
  }
  cfg.es.seed = cfg.seed;

  if (j.contains("cloning")) {
    const Json& c = j["cloning"];
    require_known_keys(c, "cloning",
                       {"n_state", "n_fwd", "n_bwd", "alpha", "ticks_per_sweep",
                        "batch_size", "adam_lr", "cosine_decay", "buffer_capacity",
                        "buffer_fraction", "mode", "data", "steps", "stage1_threshold",
                        "stage23_threshold", "deep_hidden"});
    cfg.cloning.dims.state = get_or<int>(c, "n_state", 64);
    cfg.cloning.dims.fwd_msg = get_or<int>(c, "n_fwd", 8);
    cfg.cloning.dims.bwd_msg = get_or<int>(c, "n_bwd", 8);
    cfg.cloning.alpha = get_or<double>(c, "alpha", 0.05);
    cfg.cloning.ticks_per_sweep = get_or<int>(c, "ticks_per_sweep", 2);
    cfg.cloning.batch_size = get_or<int>(c, "batch_size", 128);
    cfg.cloning.adam.lr = get_or<double>(c, "adam_lr", 1e-3);
    cfg.cloning.cosine_decay = get_or<bool>(c, "cosine_decay", true);
    cfg.cloning.buffer_capacity = get_or<int>(c, "buffer_capacity", 1024);
    cfg.cloning.buffer_fraction = get_or<double>(c, "buffer_fraction", 0.5);
    cfg.clone_mode = get_or<std::string>(c, "mode", "shallow");
    cfg.clone_data = get_or<std::string>(c, "data", "random");
    cfg.clone_steps = get_or<int>(c, "steps", 20000);
    cfg.stage1_threshold = get_or<double>(c, "stage1_threshold", 1e-3);
    cfg.stage23_threshold = get_or<double>(c, "stage23_threshold", 5e-3);
    cfg.deep_hidden = get_or<std::vector<int>>(c, "deep_hidden", {32});
    if (cfg.clone_mode != "shallow" && cfg.clone_mode != "deep") {
      throw ConfigError("cloning: mode must be shallow or deep");
    }
    if (cfg.cloning.alpha <= 0.0) throw ConfigError("cloning: alpha must be > 0");
  }
  cfg.cloning.seed = cfg.seed;

  if (j.contains("tasks")) {
    for (const Json& tj : j["tasks"]) {
      TaskSpec t = task_spec_from_json(tj);
      cfg.tasks.specs.push_back(t);
      cfg.tasks.weights.push_back(get_or<double>(tj, "weight", 1.0));
    }
  }

  if (j.contains("run")) {
    const Json& r = j["run"];
    require_known_keys(r, "run",
                       {"checkpoint", "n_seeds", "steps", "batch", "protocol", "n_pairs"});
    cfg.checkpoint_path = get_or<std::string>(r, "checkpoint", "");
    cfg.n_seeds = get_or<int>(r, "n_seeds", 8);
    cfg.run_steps = get_or<int>(r, "steps", 500);
    cfg.run_batch = get_or<int>(r, "batch", 1);
    cfg.protocol = get_or<std::string>(r, "protocol", "repeated-pairs");
    cfg.n_pairs = get_or<int>(r, "n_pairs", 20);
    if (cfg.protocol != "repeated-pairs" && cfg.protocol != "full-stream") {
      throw ConfigError("run: protocol must be repeated-pairs or full-stream");
    }
  }

  if (j.contains("verify")) {
    const Json& v = j["verify"];
    require_known_keys(v, "verify", {"trials", "max_dim", "grad_instances", "grad_tolerance"});
    cfg.trials = get_or<int>(v, "trials", 108);
    cfg.max_dim = get_or<int>(v, "max_dim", 3);
    cfg.grad_instances = get_or<int>(v, "grad_instances", 20);
    cfg.grad_tolerance = get_or<double>(v, "grad_tolerance", 1e-4);
  }

  cfg.cloning.workers = cfg.workers;
  cfg.es.workers = cfg.workers;
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config parse error: ") + ex.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<DatasetStore> make_store(const ExperimentConfig& cfg) {
  if (cfg.data_root.empty()) return nullptr;
  return std::make_unique<DatasetStore>(cfg.data_root);
}

bool tasks_need_store(const TaskDistribution& tasks) {
  for (const auto& t : tasks.specs) {
    if (t.source == TaskSpec::Source::dataset) return true;
  }
  return false;
}

}  // namespace

int cmd_meta_train(const ExperimentConfig& cfg, const std::string& config_path) {
  if (cfg.tasks.specs.empty()) throw ConfigError("meta-train: at least one task required");
  ensure_out_layout(cfg.out_dir);
  copy_config_into(config_path, cfg.out_dir);
  auto store = make_store(cfg);
  if (tasks_need_store(cfg.tasks) && store == nullptr) {
    throw ConfigError("meta-train: dataset tasks require --data-root or DATA_ROOT");
  }

  std::unique_ptr<EsObjective> objective;
  Json ckpt_meta;
  if (cfg.learner == "vsml") {
    objective = std::make_unique<VsmlEsObjective>(cfg.dims, cfg.hidden,
                                                  cfg.ticks_per_example, cfg.tasks,
                                                  store.get(), cfg.es.episode_length);
    ckpt_meta = vsml_checkpoint_meta(cfg);
  } else if (cfg.learner == "meta-rnn") {
    MetaRnnConfig mc;
    mc.hidden = cfg.meta_rnn_hidden;
    int max_in = 0, max_classes = 0;
    for (const auto& t : cfg.tasks.specs) {
      max_in = std::max(max_in, t.resolved_input_dim(store.get()));
      max_classes = std::max(max_classes, t.resolved_class_count(store.get()));
    }
    mc.input_dim = max_in;
    mc.n_classes = max_classes;
    objective = std::make_unique<MetaRnnEsObjective>(mc, cfg.tasks, store.get(),
                                                     cfg.es.episode_length);
    ckpt_meta = Json{{"learner", "meta-rnn"},
                     {"hidden", mc.hidden},
                     {"input_dim", mc.input_dim},
                     {"n_classes", mc.n_classes},
                     {"seed", cfg.seed}};
    std::cout << "meta-rnn parameter count: " << objective->param_count() << "\n";
  } else {
    throw ConfigError("meta-train: learner must be vsml or meta-rnn (sgd has no meta phase)");
  }

  TrainState state;
  if (!cfg.checkpoint_path.empty()) {
    state = load_train_state(cfg.checkpoint_path).state;
    std::cout << "resuming from step " << state.next_step << "\n";
  } else {
    if (cfg.learner == "vsml") {
      state.params = MetaParams::init(cfg.dims, cfg.seed).flatten();
    } else {
      MetaRnnConfig mc;
      mc.hidden = ckpt_meta["hidden"].get<int>();
      mc.input_dim = ckpt_meta["input_dim"].get<int>();
      mc.n_classes = ckpt_meta["n_classes"].get<int>();
      state.params = MetaRnnLearner::init_params(mc, cfg.seed);
    }
    state.adam = AdamState::init(state.params.size());
    state.next_step = 0;
  }

  std::ofstream metrics(cfg.out_dir + "/metrics.csv",
                        state.next_step > 0 ? std::ios::app : std::ios::out);
  std::ofstream timing(cfg.out_dir + "/timing.csv",
                       state.next_step > 0 ? std::ios::app : std::ios::out);
  if (state.next_step == 0) {
    metrics << "step,mean_loss,best_loss,mean_cum_acc\n";
    timing << "step,wall_time_s\n";
  }

  meta_train(cfg.es, *objective, state,
             [&](const OuterStepStats& s, const TrainState& st) {
               metrics << s.step << ',' << format_double(s.mean_loss) << ','
                       << format_double(s.best_loss) << ','
                       << format_double(s.mean_cum_acc) << "\n";
               metrics.flush();
               timing << s.step << ',' << format_double(s.wall_time_s) << "\n";
               timing.flush();
               if ((s.step + 1) % cfg.checkpoint_every == 0 ||
                   s.step + 1 == cfg.es.outer_steps) {
                 save_train_state(step_checkpoint_path(cfg.out_dir, s.step + 1), st,
                                  ckpt_meta);
               }
               if ((s.step + 1) % 10 == 0) {
                 std::cout << "step " << s.step + 1 << "/" << cfg.es.outer_steps
                           << " mean_loss " << format_double(s.mean_loss)
                           << " mean_cum_acc " << format_double(s.mean_cum_acc) << "\n";
               }
             });

  save_train_state(cfg.out_dir + "/train_state.json", state, ckpt_meta);
  if (cfg.learner == "vsml") {
    save_meta_params(cfg.out_dir + "/checkpoint.json",
                     MetaParams::unflatten(cfg.dims, state.params), ckpt_meta);
  } else {
    save_train_state(cfg.out_dir + "/checkpoint.json", state, ckpt_meta);
  }
  std::cout << "wrote " << cfg.out_dir << "/checkpoint.json\n";
  return kExitOk;
}

namespace {

// Mean/std across per-seed cumulative-accuracy curves.
void write_aggregate_curves(const std::string& path,
                            const std::vector<std::vector<double>>& curves) {
  std::ofstream out(path);
  out << "step,mean_cum_acc,std_cum_acc\n";
  if (curves.empty()) return;
  const size_t len = curves.front().size();
  for (size_t t = 0; t < len; ++t) {
    double sum = 0.0, sq = 0.0;
    for (const auto& c : curves) {
      sum += c[t];
      sq += c[t] * c[t];
    }
    const double mean = sum / static_cast<double>(curves.size());
    const double var = sq / static_cast<double>(curves.size()) - mean * mean;
    out << t << ',' << format_double(mean) << ','
        << format_double(std::sqrt(std::max(0.0, var))) << "\n";
  }
}

}  // namespace

int cmd_meta_test(const ExperimentConfig& cfg, const std::string& config_path) {
  if (cfg.tasks.specs.size() != 1) {
    throw ConfigError("meta-test: exactly one task must be given");
  }
  ensure_out_layout(cfg.out_dir);
  copy_config_into(config_path, cfg.out_dir);
  auto store = make_store(cfg);
  const TaskSpec& task = cfg.tasks.specs[0];
  if (task.source == TaskSpec::Source::dataset && store == nullptr) {
    throw ConfigError("meta-test: dataset task requires --data-root or DATA_ROOT");
  }

  std::vector<std::vector<double>> curves;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const uint64_t episode_seed = derive_seed(cfg.seed, {0x74657374, static_cast<uint64_t>(s)});
    MetricTrace trace;
    if (cfg.learner == "vsml") {
      LoadedCheckpoint ck = load_meta_params(cfg.checkpoint_path);
      std::vector<int> hidden;
      int ticks = cfg.ticks_per_example;
      if (ck.meta.contains("meta")) {
        hidden = ck.meta["meta"].value("hidden", std::vector<int>{});
        ticks = ck.meta["meta"].value("ticks_per_example", ticks);
      }
      LayerSpec spec;
      spec.ticks_per_example = ticks;
      int prev = task.resolved_input_dim(store.get());
      for (int hdim : hidden) {
        spec.layers.push_back({prev, hdim});
        prev = hdim;
      }
      spec.layers.push_back({prev, task.resolved_class_count(store.get())});
      run_vsml_episode(ck.params, spec, task, store.get(), episode_seed,
                       task.episode_length, &trace);
    } else if (cfg.learner == "meta-rnn") {
      LoadedTrainState ck = load_train_state(cfg.checkpoint_path);
      MetaRnnConfig mc;
      mc.hidden = ck.meta.at("meta").at("hidden").get<int>();
      mc.input_dim = ck.meta.at("meta").at("input_dim").get<int>();
      mc.n_classes = ck.meta.at("meta").at("n_classes").get<int>();
      const int in_dim = task.resolved_input_dim(store.get());
      const int classes = task.resolved_class_count(store.get());
      if (in_dim > mc.input_dim || classes > mc.n_classes) {
        throw ConfigError("meta-test: task dims exceed the meta-rnn checkpoint sizes (" +
                          std::to_string(in_dim) + ">" + std::to_string(mc.input_dim) +
                          " or " + std::to_string(classes) + ">" +
                          std::to_string(mc.n_classes) + "); only VSML re-shapes");
      }
      MetaRnnLearner learner(mc);
      learner.set_params(ck.state.params);
      learner.reset(derive_seed(episode_seed, {0x696e6974}));
      EpisodeStream stream(task, store.get(), episode_seed);
      trace.class_count = classes;
      Vec x_pad = Vec::Zero(mc.input_dim);
      for (int t = 0; t < task.episode_length; ++t) {
        const Example ex = stream.next();
        x_pad.setZero();
        x_pad.head(ex.x.size()) = ex.x;
        const StepResult step = learner.step(x_pad, ex.label, classes);
        MetricRow row{t, step.loss, step.correct ? 1 : 0, step.predicted, ex.label,
                      step.probs};
        trace.rows.push_back(std::move(row));
      }
    } else {
      SgdConfig sc;
      sc.arch = cfg.sgd_hidden > 0 ? SgdConfig::Arch::deep : SgdConfig::Arch::shallow;
      sc.hidden = cfg.sgd_hidden;
      sc.opt = cfg.learner == "adam" ? SgdConfig::Opt::adam : SgdConfig::Opt::sgd;
      sc.lr = cfg.sgd_lr > 0.0 ? cfg.sgd_lr
                               : (sc.opt == SgdConfig::Opt::adam ? 1e-3 : 1e-2);
      sc.input_dim = task.resolved_input_dim(store.get());
      sc.n_classes = task.resolved_class_count(store.get());
      SgdLearner learner(sc, derive_seed(episode_seed, {0x696e6974}));
      EpisodeStream stream(task, store.get(), episode_seed);
      trace.class_count = sc.n_classes;
      for (int t = 0; t < task.episode_length; ++t) {
        const Example ex = stream.next();
        const StepResult step = learner.step(ex.x, ex.label);
        MetricRow row{t, step.loss, step.correct ? 1 : 0, step.predicted, ex.label,
                      step.probs};
        trace.rows.push_back(std::move(row));
      }
    }

    std::ofstream tf(cfg.out_dir + "/traces/trace_" + std::to_string(s) + ".csv");
    write_metric_csv(tf, trace);
    curves.push_back(cumulative_accuracy(trace.correctness()));
    std::cout << "seed " << s << " final cumulative accuracy "
              << format_double(curves.back().empty() ? 0.0 : curves.back().back()) << "\n";
  }

  write_aggregate_curves(cfg.out_dir + "/metrics.csv", curves);

  PlotSeries mean_series;
  mean_series.label = cfg.learner;
  const size_t len = curves.empty() ? 0 : curves.front().size();
  for (size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c[t];
    mean_series.x.push_back(static_cast<double>(t));
    mean_series.y.push_back(sum / static_cast<double>(curves.size()));
  }
  PlotSpec ps;
  ps.title = "cumulative accuracy";
  ps.y_label = "cumulative accuracy";
  std::ofstream pf(cfg.out_dir + "/plots/learning_curve.svg");
  pf << render_line_plot({mean_series}, ps);
  return kExitOk;
}

int cmd_clone(const ExperimentConfig& cfg, const std::string& config_path) {
  ensure_out_layout(cfg.out_dir);
  copy_config_into(config_path, cfg.out_dir);
  auto store = make_store(cfg);

  CurriculumConfig cur;
  cur.cloning = cfg.cloning;
  cur.store = store.get();

  int in_dim = 16, classes = 2;
  if (!cfg.tasks.specs.empty()) {
    in_dim = cfg.tasks.specs[0].resolved_input_dim(store.get());
    classes = cfg.tasks.specs[0].resolved_class_count(store.get());
  }
  cur.deep_widths.clear();
  cur.deep_widths.push_back(in_dim);
  if (cfg.clone_mode == "deep") {
    for (int hdim : cfg.deep_hidden) cur.deep_widths.push_back(hdim);
  }
  cur.deep_widths.push_back(classes);

  if (cfg.clone_mode == "shallow") {
    if (cfg.clone_data == "random") {
      cur.stages.push_back({CloneStage::shallow_random, cfg.clone_steps,
                            cfg.stage1_threshold, "random"});
    } else {
      cur.stages.push_back({CloneStage::deep_true_errors, cfg.clone_steps,
                            cfg.stage1_threshold, cfg.clone_data});
    }
  } else {
    cur.stages.push_back({CloneStage::shallow_random, cfg.clone_steps,
                          cfg.stage1_threshold, "random"});
    cur.stages.push_back({CloneStage::deep_true_errors, cfg.clone_steps,
                          cfg.stage23_threshold, cfg.clone_data});
    cur.stages.push_back({CloneStage::deep_rnn_errors, cfg.clone_steps,
                          cfg.stage23_threshold, cfg.clone_data});
  }

  std::ofstream log(cfg.out_dir + "/clone_log.csv");
  log << "stage,step,smoothed_loss\n";
  cur.progress = [&](int stage, int step, double loss) {
    log << stage << ',' << step << ',' << format_double(loss) << "\n";
    log.flush();
    std::cout << "stage " << stage << " step " << step << " loss "
              << format_double(loss) << "\n";
  };

  const CurriculumResult result = run_curriculum(cur);
  for (const auto& warning : result.warnings) std::cout << "warning: " << warning << "\n";
  for (const auto& rep : result.reports) {
    std::cout << "stage " << static_cast<int>(rep.stage) << ": steps " << rep.steps_run
              << ", loss " << format_double(rep.initial_loss) << " -> "
              << format_double(rep.final_loss)
              << (rep.reached_threshold ? " (threshold reached)" : " (budget exhausted)")
              << "\n";
  }

  Json meta{{"cloning", {{"alpha", cfg.cloning.alpha},
                         {"ticks_per_sweep", cfg.cloning.ticks_per_sweep},
                         {"mode", cfg.clone_mode},
                         {"deep_hidden", cfg.deep_hidden}}},
            {"seed", cfg.seed}};
  save_meta_params(cfg.out_dir + "/checkpoint.json", result.params, meta);
  std::cout << "wrote " << cfg.out_dir << "/checkpoint.json\n";
  if (!result.completed) {
    std::cout << "curriculum stopped before completing every stage\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_run_cloned(const ExperimentConfig& cfg, const std::string& config_path) {
  if (cfg.tasks.specs.size() != 1) {
    throw ConfigError("run-cloned: exactly one task must be given");
  }
  ensure_out_layout(cfg.out_dir);
  copy_config_into(config_path, cfg.out_dir);
  auto store = make_store(cfg);
  const TaskSpec& task = cfg.tasks.specs[0];

  LoadedCheckpoint ck = load_meta_params(cfg.checkpoint_path);
  ClonedRunConfig rc;
  rc.batch = cfg.run_batch;
  rc.steps = cfg.run_steps;
  rc.seed = derive_seed(cfg.seed, {0x636c72756e});
  if (ck.meta.contains("meta") && ck.meta["meta"].contains("cloning")) {
    rc.ticks_per_sweep = ck.meta["meta"]["cloning"].value("ticks_per_sweep", 2);
  }
  LayerSpec spec;
  spec.ticks_per_example = 1;
  int prev = task.resolved_input_dim(store.get());
  if (ck.meta.contains("meta") && ck.meta["meta"].contains("cloning") &&
      ck.meta["meta"]["cloning"].value("mode", "shallow") == "deep") {
    for (int hdim :
         ck.meta["meta"]["cloning"].value("deep_hidden", std::vector<int>{32})) {
      spec.layers.push_back({prev, hdim});
      prev = hdim;
    }
  }
  spec.layers.push_back({prev, task.resolved_class_count(store.get())});
  rc.spec = spec;

  EpisodeStream stream(task, store.get(), derive_seed(cfg.seed, {0x7374726d}));
  MetricTrace trace = run_cloned_learner(ck.params, rc, [&](int) { return stream.next(); });

  std::ofstream tf(cfg.out_dir + "/metrics.csv");
  write_metric_csv(tf, trace);
  std::cout << "final cumulative accuracy "
            << format_double(trace.final_cumulative_accuracy()) << "\n";
  if (trace.fault) {
    std::cout << "numeric fault at step " << trace.fault_step << "\n";
    return kExitNumericFault;
  }
  return kExitOk;
}

std::vector<Example> repeated_pairs_stream(const TaskSpec& task, const DatasetStore* store,
                                           uint64_t seed, int n_pairs) {
  EpisodeStream stream(task, store, seed);
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(n_pairs) * 2);
  for (int i = 0; i < n_pairs; ++i) {
    const Example ex = stream.next();
    out.push_back(ex);
    out.push_back(ex);
  }
  return out;
}

double second_presentation_accuracy(const MetricTrace& trace) {
  int correct = 0, total = 0;
  for (size_t i = 1; i < trace.rows.size(); i += 2) {
    correct += trace.rows[i].correct;
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

int cmd_introspect(const ExperimentConfig& cfg, const std::string& config_path) {
  if (cfg.tasks.specs.size() != 1) {
    throw ConfigError("introspect: exactly one task must be given");
  }
  ensure_out_layout(cfg.out_dir);
  copy_config_into(config_path, cfg.out_dir);
  auto store = make_store(cfg);
  const TaskSpec& task = cfg.tasks.specs[0];

  LoadedCheckpoint ck = load_meta_params(cfg.checkpoint_path);
  std::vector<int> hidden;
  int ticks = cfg.ticks_per_example;
  if (ck.meta.contains("meta")) {
    hidden = ck.meta["meta"].value("hidden", std::vector<int>{});
    ticks = ck.meta["meta"].value("ticks_per_example", ticks);
  }
  LayerSpec spec;
  spec.ticks_per_example = ticks;
  int prev = task.resolved_input_dim(store.get());
  for (int hdim : hidden) {
    spec.layers.push_back({prev, hdim});
    prev = hdim;
  }
  const int classes = task.resolved_class_count(store.get());
  spec.layers.push_back({prev, classes});

  double vsml_second = 0.0, adam_second = 0.0;
  MetricTrace first_vsml_trace, first_adam_trace;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const uint64_t stream_seed = derive_seed(cfg.seed, {0x696e7472, static_cast<uint64_t>(s)});
    std::vector<Example> examples;
    if (cfg.protocol == "repeated-pairs") {
      examples = repeated_pairs_stream(task, store.get(), stream_seed, cfg.n_pairs);
    } else {
      EpisodeStream stream(task, store.get(), stream_seed);
      for (int t = 0; t < task.episode_length; ++t) examples.push_back(stream.next());
    }

    MetricTrace vsml_trace;
    vsml_trace.class_count = classes;
    VsmlNetwork net(ck.params, spec);
    net.init_states(derive_seed(stream_seed, {0x696e6974}));
    for (size_t t = 0; t < examples.size(); ++t) {
      net.current_step = static_cast<long>(t);
      const StepResult step = net.inner_step(examples[t].x, examples[t].label);
      MetricRow row{static_cast<long>(t), step.loss, step.correct ? 1 : 0,
                    step.predicted, examples[t].label, step.probs};
      vsml_trace.rows.push_back(std::move(row));
    }

    SgdConfig sc;
    sc.arch = SgdConfig::Arch::deep;
    sc.hidden = cfg.sgd_hidden;
    sc.opt = SgdConfig::Opt::adam;
    sc.lr = cfg.sgd_lr > 0.0 ? cfg.sgd_lr : 1e-3;
    sc.input_dim = task.resolved_input_dim(store.get());
    sc.n_classes = classes;
    SgdLearner adam(sc, derive_seed(stream_seed, {0x6164616d}));
    MetricTrace adam_trace;
    adam_trace.class_count = classes;
    for (size_t t = 0; t < examples.size(); ++t) {
      const StepResult step = adam.step(examples[t].x, examples[t].label);
      MetricRow row{static_cast<long>(t), step.loss, step.correct ? 1 : 0,
                    step.predicted, examples[t].label, step.probs};
      adam_trace.rows.push_back(std::move(row));
    }

    vsml_second += second_presentation_accuracy(vsml_trace);
    adam_second += second_presentation_accuracy(adam_trace);
    if (s == 0) {
      first_vsml_trace = vsml_trace;
      first_adam_trace = adam_trace;
    }
    std::ofstream vf(cfg.out_dir + "/traces/vsml_" + std::to_string(s) + ".csv");
    write_metric_csv(vf, vsml_trace);
    std::ofstream af(cfg.out_dir + "/traces/adam_" + std::to_string(s) + ".csv");
    write_metric_csv(af, adam_trace);
  }
  vsml_second /= cfg.n_seeds;
  adam_second /= cfg.n_seeds;

  Json summary{{"protocol", cfg.protocol},
               {"n_seeds", cfg.n_seeds},
               {"vsml_second_presentation_accuracy", vsml_second},
               {"adam_second_presentation_accuracy", adam_second}};
  std::ofstream sf(cfg.out_dir + "/summary.json");
  sf << summary.dump(2) << "\n";
  std::cout << "vsml second-presentation accuracy " << format_double(vsml_second)
            << ", adam " << format_double(adam_second) << "\n";

  PlotSpec ps;
  ps.title = "output probabilities";
  ps.y_label = "probability";
  std::ofstream pv(cfg.out_dir + "/plots/introspection_vsml.svg");
  pv << render_introspection_plot(first_vsml_trace, ps);
  std::ofstream pa(cfg.out_dir + "/plots/introspection_adam.svg");
  pa << render_introspection_plot(first_adam_trace, ps);
  return kExitOk;
}

int cmd_verify_equivalence(int trials, int max_dim, uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const EquivalenceReport report = verify_equivalence(trials, max_dim, seed);
  for (int t = 0; t < report.trials; ++t) {
    std::cout << "trial " << t << " max abs deviation "
              << format_double(report.per_trial[static_cast<size_t>(t)]) << "\n";
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "max deviation over " << report.trials << " trials: "
            << format_double(report.max_deviation) << " (" << format_double(elapsed)
            << " s)\n";
  if (!report.passed(1e-8)) {
    std::cout << "FAIL: deviation exceeds 1e-8\n";
    return kExitCheckFailed;
  }
  std::cout << "PASS\n";
  return kExitOk;
}

int cmd_grad_check(int instances, double tolerance, uint64_t seed) {
  const auto results = run_grad_check_suite(instances, tolerance, seed);
  bool all_ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": worst relative deviation "
              << format_double(r.worst) << " over " << r.instances << " instances\n";
    all_ok &= r.passed;
  }
  return all_ok ? kExitOk : kExitCheckFailed;
}

int cmd_render_plot(const std::string& csv_path, const std::string& kind,
                    const std::string& out_path, const std::string& title) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open " + csv_path);
  PlotSpec ps;
  ps.title = title;

  std::string svg;
  if (kind == "introspection") {
    const MetricTrace trace = read_metric_csv(in);
    ps.y_label = "probability";
    svg = render_introspection_plot(trace, ps);
  } else if (kind == "learning-curve") {
    std::string header;
    if (!std::getline(in, header)) throw ConfigError(csv_path + ": empty csv");
    std::vector<std::string> names;
    std::stringstream hs(header);
    std::string field;
    while (std::getline(hs, field, ',')) names.push_back(field);
    if (names.size() < 2) {
      throw ConfigError(csv_path + ": need an x column and at least one series");
    }
    std::vector<PlotSeries> series(names.size() - 1);
    for (size_t i = 1; i < names.size(); ++i) series[i - 1].label = names[i];
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ls(line);
      double x = 0.0;
      std::getline(ls, field, ',');
      x = std::stod(field);
      for (size_t i = 1; i < names.size(); ++i) {
        if (!std::getline(ls, field, ',')) {
          throw ConfigError(csv_path + ": row with missing column '" + names[i] + "'");
        }
        series[i - 1].x.push_back(x);
        series[i - 1].y.push_back(std::stod(field));
      }
    }
    ps.y_label = names.size() == 2 ? names[1] : "";
    svg = render_line_plot(series, ps);
  } else {
    throw ConfigError("render-plot: kind must be learning-curve or introspection");
  }

  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write " + out_path);
  out << svg;
  return kExitOk;
}

}  // namespace vsml
