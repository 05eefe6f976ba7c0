#pragma once

#include <json.hpp>

#include "vsml/baselines.hpp"
#include "vsml/checkpoint.hpp"
#include "vsml/cloning.hpp"
#include "vsml/equivalence.hpp"
#include "vsml/es.hpp"
#include "vsml/svg_plot.hpp"

namespace vsml {

// Exit codes shared by the CLI and the command implementations.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumericFault = 2;
inline constexpr int kExitCheckFailed = 3;

// Fully validated experiment description. Parsing rejects unknown keys
// anywhere in the document.
struct ExperimentConfig {
  std::string mode;
  uint64_t seed = 0;
  int workers = 0;
  std::string out_dir;
  std::string data_root;
  std::string learner = "vsml";  // vsml | meta-rnn | sgd | adam

  // architecture
  CellDims dims{16, 8, 8};
  std::vector<int> hidden;  // VSML hidden boundary sizes (empty = single layer)
  int ticks_per_example = 2;
  int meta_rnn_hidden = 16;
  int sgd_hidden = 160;
  double sgd_lr = 0.0;  // 0 = tuned default for the chosen optimizer

  EsConfig es;
  int checkpoint_every = 100;
  int eval_episodes = 16;

  CloningConfig cloning;
  std::string clone_mode = "shallow";  // shallow | deep
  std::string clone_data = "random";   // random | dataset name
  int clone_steps = 20000;
  double stage1_threshold = 1e-3;
  double stage23_threshold = 5e-3;
  std::vector<int> deep_hidden{32};

  TaskDistribution tasks;

  std::string checkpoint_path;
  int n_seeds = 8;
  int run_steps = 500;
  int run_batch = 1;
  std::string protocol = "repeated-pairs";  // or "full-stream"
  int n_pairs = 20;

  int trials = 108;
  int max_dim = 3;
  int grad_instances = 20;
  double grad_tolerance = 1e-4;
};

TaskSpec task_spec_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Command entry points; each returns a process exit code and writes its
// outputs under `out_dir` (config copy, metrics.csv, checkpoints/, traces/,
// plots/). `config_path` is copied verbatim when non-empty.
int cmd_meta_train(const ExperimentConfig& cfg, const std::string& config_path);
int cmd_meta_test(const ExperimentConfig& cfg, const std::string& config_path);
int cmd_clone(const ExperimentConfig& cfg, const std::string& config_path);
int cmd_run_cloned(const ExperimentConfig& cfg, const std::string& config_path);
int cmd_introspect(const ExperimentConfig& cfg, const std::string& config_path);
int cmd_verify_equivalence(int trials, int max_dim, uint64_t seed);
int cmd_grad_check(int instances, double tolerance, uint64_t seed);
int cmd_render_plot(const std::string& csv_path, const std::string& kind,
                    const std::string& out_path, const std::string& title);

// Builds the repeated-pairs stream of the introspection protocol: n_pairs
// examples drawn from the task, each presented twice in a row.
std::vector<Example> repeated_pairs_stream(const TaskSpec& task, const DatasetStore* store,
                                           uint64_t seed, int n_pairs);

// Fraction of correct predictions on second presentations (odd positions).
double second_presentation_accuracy(const MetricTrace& trace);

}  // namespace vsml
