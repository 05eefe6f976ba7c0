#pragma once

#include <functional>

#include "vsml/grad.hpp"
#include "vsml/grid.hpp"
#include "vsml/metrics.hpp"
#include "vsml/tasks.hpp"

namespace vsml {

struct EsConfig {
  int population_size = 1024;
  double noise_std = 0.05;
  int outer_steps = 10000;
  AdamConfig adam{0.025, 0.9, 0.999, 1e-8};
  int episode_length = 500;
  bool antithetic = true;
  bool rank_shaping = true;
  uint64_t seed = 0;
  int workers = 0;

  void validate() const;
};

struct FitnessRecord {
  uint64_t noise_seed = 0;   // regenerates this member's perturbation
  uint64_t episode_seed = 0;
  int sign = 1;              // antithetic mirror sign
  double loss = 0.0;         // sum of per-example losses over the episode
  double cum_acc = 0.0;      // final cumulative accuracy of the episode
  bool diverged = false;     // treated as worst finite fitness
};

// Anything ES can optimize. evaluate() must be thread-safe and a pure
// function of (params, episode_seed).
class EsObjective {
 public:
  virtual ~EsObjective() = default;
  virtual int param_count() const = 0;
  virtual FitnessRecord evaluate(const Vec& params, uint64_t episode_seed) const = 0;
};

// Standard-normal perturbation for a member, regenerated from its seed.
Vec regenerate_noise(uint64_t noise_seed, int n);

// Evaluates the whole population for one outer step. Member evaluation is
// embarrassingly parallel; records land in fixed member order regardless of
// scheduling. Antithetic pairs share their episode seed so fitness
// differences isolate the parameter perturbation.
std::vector<FitnessRecord> evaluate_population(const EsConfig& cfg,
                                               const EsObjective& objective,
                                               const Vec& base_params, int outer_step);

// Antithetic search-gradient estimate g = (1/(P sigma)) sum f~_j sign_j eps_j,
// with centered-rank fitness shaping in [-0.5, 0.5] when enabled. Diverged
// episodes take the worst finite loss before shaping; throws if every member
// diverged.
Vec es_gradient(const EsConfig& cfg, const std::vector<FitnessRecord>& records, int n);

struct OuterStepStats {
  int step = 0;
  double mean_loss = 0.0;
  double best_loss = 0.0;
  double mean_cum_acc = 0.0;
  double wall_time_s = 0.0;
};

// Optimizer state that persists across a resumable run.
struct TrainState {
  Vec params;
  AdamState adam;
  int next_step = 0;
};

struct MetaTrainResult {
  std::vector<OuterStepStats> history;
};

// Outer loop: evaluate population -> es_gradient -> adam_step. The callback
// fires after every outer step with the stats and the updated state; seeds
// derive from (cfg.seed, absolute step), so resuming from a checkpointed
// TrainState continues the identical stream.
MetaTrainResult meta_train(
    const EsConfig& cfg, const EsObjective& objective, TrainState& state,
    const std::function<void(const OuterStepStats&, const TrainState&)>& on_step = {});

// ---------------------------------------------------------------------------
// VSML episode objective

// Runs a fresh grid over one online episode; the loss is the sum of
// cross-entropies. Layer input/output sizes adapt to the sampled task; the
// hidden boundary sizes (if any) are fixed.
class VsmlEsObjective : public EsObjective {
 public:
  VsmlEsObjective(CellDims dims, std::vector<int> hidden_sizes, int ticks_per_example,
                  TaskDistribution tasks, const DatasetStore* store, int episode_length);

  int param_count() const override;
  FitnessRecord evaluate(const Vec& flat, uint64_t episode_seed) const override;

  LayerSpec layer_spec_for(const TaskSpec& task) const;

  const TaskDistribution& tasks() const { return tasks_; }
  CellDims dims() const { return dims_; }

 private:
  CellDims dims_;
  std::vector<int> hidden_;
  int ticks_ = 2;
  TaskDistribution tasks_;
  const DatasetStore* store_ = nullptr;
  int episode_length_ = 500;
};

// Runs one episode with the given params and task; shared by the ES
// objective and the meta-test harness. When `trace` is given, every step is
// recorded (prediction made when the example was fed).
struct EpisodeResult {
  double loss_sum = 0.0;
  double final_cum_acc = 0.0;
  bool diverged = false;
  long fault_step = -1;
};
EpisodeResult run_vsml_episode(const MetaParams& params, const LayerSpec& spec,
                               const TaskSpec& task, const DatasetStore* store,
                               uint64_t episode_seed, int episode_length,
                               MetricTrace* trace = nullptr);

}  // namespace vsml
