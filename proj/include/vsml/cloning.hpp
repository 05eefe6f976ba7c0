#pragma once

#include <functional>

#include "vsml/grad.hpp"
#include "vsml/grid.hpp"
#include "vsml/metrics.hpp"
#include "vsml/tasks.hpp"

namespace vsml {

// Per-synapse targets of one online-backprop step on y = tanh(x)w + b.
struct CloningTargets {
  double y = 0.0;
  double dw = 0.0;       // -alpha * e * tanh(x)
  double db = 0.0;       // -alpha * e
  double e_prime = 0.0;  // e * w * (1 - tanh(x)^2)
};

CloningTargets make_targets(double x, double w, double b, double e, double alpha);

// State of a single sub-RNN cell. Slot 0 of z stores w/4, slot 1 stores b/4;
// the scaling keeps weights representable under the +-4 state clip.
struct CellState {
  Vec z;
  Vec h;

  static CellState zeros(int n) { return CellState{Vec::Zero(n), Vec::Zero(n)}; }
  static CellState from_wb(int n, double w, double b) {
    CellState s = zeros(n);
    s.z[0] = w / 4.0;
    s.z[1] = b / 4.0;
    return s;
  }
  double w() const { return 4.0 * z[0]; }
  double b() const { return 4.0 * z[1]; }
};

constexpr double kWbScale = 4.0;

struct CloningConfig {
  CellDims dims{64, 8, 8};
  double alpha = 0.05;      // shadow SGD learning rate used for targets
  int ticks_per_sweep = 2;  // RNN ticks per layer within one sweep
  int batch_size = 128;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  bool cosine_decay = true;
  int buffer_capacity = 1024;
  double buffer_fraction = 0.5;  // share of batch started from buffered states
  uint64_t seed = 0;
  int workers = 0;
};

// Ring buffer of recent cell-state snapshots; sampling is uniform.
class StateBuffer {
 public:
  explicit StateBuffer(int capacity) : capacity_(capacity) {}
  void append(CellState s);
  const CellState& sample(Rng& rng) const;
  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }

 private:
  int capacity_;
  size_t write_ = 0;
  std::vector<CellState> items_;
};

struct CloneSample {
  double x = 0.0;
  double e = 0.0;
  CellState start;  // carries (w, b) in its designated slots
  CloningTargets targets;
};

// Outputs of one cloning iteration of a single cell: forward sweep (state
// frozen) produces y_hat; backward sweep (input x fed back, error e fed)
// produces e_prime_hat and the state update read from the (w, b) slots.
// Only those two slots persist into end_state; everything else is zeroed.
struct CloneOutputs {
  double y_hat = 0.0;
  double dw_hat = 0.0;
  double db_hat = 0.0;
  double e_prime_hat = 0.0;
  CellState end_state;
};

CloneOutputs clone_unroll(const MetaParams& params, const CloningConfig& cfg,
                          const CloneSample& sample,
                          std::vector<CellTape>* fwd_tapes = nullptr,
                          std::vector<CellTape>* bwd_tapes = nullptr);

// Mean of the four squared regression errors. The weight/bias updates enter
// in alpha-normalized form (delta / alpha) so all four terms are O(1).
double clone_regression_loss(const CloneOutputs& out, const CloningTargets& t,
                             double alpha);

// Convenience single-sample objective from canonical (w,b)-only start state;
// used by the finite-difference verifier.
double clone_sample_loss(const MetaParams& params, const CloningConfig& cfg, double x,
                         double w, double b, double e, const CloningTargets& targets);
void clone_sample_backward(const MetaParams& params, const CloningConfig& cfg,
                           double x, double w, double b, double e,
                           const CloningTargets& targets, ParamGrads& acc);

// One regression step over a batch: evaluates the unroll per sample,
// accumulates exact gradients in fixed sample order, applies one Adam step,
// and appends one fresh end state to the buffer.
struct CloneStepResult {
  double loss = 0.0;
};
CloneStepResult clone_step(MetaParams& params, const CloningConfig& cfg,
                           const std::vector<CloneSample>& batch, StateBuffer& buffer,
                           AdamState& adam, double lr_scale = 1.0);

// Draws a batch for stage-1 cloning on random data: x, e, w, b all standard
// normal; a configurable fraction of start states comes from the buffer
// (with w, b overwritten by the sample's draw).
std::vector<CloneSample> draw_random_batch(const CloningConfig& cfg, StateBuffer& buffer,
                                           Rng& rng);

// ---------------------------------------------------------------------------
// Curriculum

// Dense tanh network in the grid-matched form
//   y_b = mean_a( tanh(x_a) * w_ab + b_ab )
// with per-synapse biases. Used to generate deep-cloning targets and kept
// updated with the same per-synapse rule the grid is cloned against.
struct ShadowNet {
  std::vector<Mat> w;  // per layer: in x out
  std::vector<Mat> b;

  static ShadowNet init(const std::vector<int>& widths, uint64_t seed);
  int depth() const { return static_cast<int>(w.size()); }
  // Returns the input to each layer (x^0 = x, x^l = layer outputs), so
  // result.size() == depth()+1 and result.back() is the prediction.
  std::vector<Vec> forward(const Vec& x) const;
  // Per-layer synapse errors e^l (the value each synapse of layer l sees),
  // from the output error; e.back() is the output error itself.
  std::vector<Vec> backward_errors(const std::vector<Vec>& acts, const Vec& e_out) const;
  void apply_updates(const std::vector<Vec>& acts, const std::vector<Vec>& errors,
                     double alpha);
};

enum class CloneStage { shallow_random, deep_true_errors, deep_rnn_errors };

struct CurriculumStageConfig {
  CloneStage stage = CloneStage::shallow_random;
  int max_steps = 20000;
  double loss_threshold = 1e-3;
  std::string data = "random";  // "random" | dataset name for shadow runs
};

struct CurriculumConfig {
  CloningConfig cloning;
  std::vector<CurriculumStageConfig> stages;
  std::vector<int> deep_widths{16, 32, 2};  // shadow architecture for deep stages
  const DatasetStore* store = nullptr;
  // Called after every log_every steps with (stage, step, smoothed loss).
  std::function<void(int, int, double)> progress;
  int log_every = 500;
};

struct StageReport {
  CloneStage stage;
  int steps_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool reached_threshold = false;
};

struct CurriculumResult {
  MetaParams params;
  std::vector<StageReport> reports;
  std::vector<std::string> warnings;
  bool completed = false;
};

CurriculumResult run_curriculum(const CurriculumConfig& cfg);

// ---------------------------------------------------------------------------
// Running a cloned learner

struct ClonedRunConfig {
  LayerSpec spec;        // layer sizes; ticks_per_example is ignored here
  int batch = 1;         // parallel grid replicas whose (w,b) are averaged
  int steps = 500;
  int ticks_per_sweep = 2;
  double clip = 4.0;
  uint64_t seed = 0;
};

// Online learning purely by unrolling the cloned dynamics: per example, a
// frozen forward sweep (layers 1..K) produces the prediction, then the error
// is fed and a backward sweep (layers K..1, forward activations fed back)
// updates the (w,b) slots; all other state is cleared. With batch > 1 the
// (w,b) slots are averaged across replicas after every step.
MetricTrace run_cloned_learner(const MetaParams& params, const ClonedRunConfig& cfg,
                               const std::function<Example(int)>& draw);

}  // namespace vsml
