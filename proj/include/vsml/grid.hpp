#pragma once

#include <optional>
#include <vector>

#include "vsml/meta_params.hpp"

namespace vsml {

// Layer-stacking description: per layer k the grid is A^(k) x B^(k) cells,
// constrained by A^(k) = B^(k-1).
struct LayerSpec {
  struct Size {
    int inputs = 0;   // A^(k)
    int outputs = 0;  // B^(k)
  };
  std::vector<Size> layers;
  int ticks_per_example = 2;

  int depth() const { return static_cast<int>(layers.size()); }
  int input_dim() const { return layers.front().inputs; }
  int output_dim() const { return layers.back().outputs; }
  void validate() const;

  static LayerSpec single(int inputs, int outputs, int ticks = 2) {
    return LayerSpec{{{inputs, outputs}}, ticks};
  }
};

// Per-layer cell states. Rows are cells in row-major (a,b) order, columns
// the N state entries; z is the cell state, h the hidden state.
struct SubRnnGrid {
  std::vector<Mat> z;
  std::vector<Mat> h;

  static SubRnnGrid zeros(const LayerSpec& spec, int n_state);
  // i.i.d. standard normal entries, deterministic per seed.
  static SubRnnGrid random(const LayerSpec& spec, int n_state, uint64_t seed);
};

// Softmax cross-entropy on logits. grad = softmax(logits) - onehot(label).
struct SoftmaxLoss {
  Vec probs;
  double loss = 0.0;
  Vec grad;
};
SoftmaxLoss softmax_cross_entropy(const Vec& logits, int label);

// Output squash: near-identity for small values, saturates at +-100.
inline double squash_logit(double v) { return 100.0 * std::tanh(v / 100.0); }

struct StepResult {
  Vec logits;
  Vec probs;
  double loss = 0.0;
  int predicted = -1;
  bool correct = false;
};

// A grid of parameter-shared sub-RNN cells plus the message buffers between
// layers. All cells in all layers read the one MetaParams object passed at
// construction; the network never copies or mutates it.
class VsmlNetwork {
 public:
  VsmlNetwork(const MetaParams& params, LayerSpec spec);

  void init_states(uint64_t seed);

  // Writes x into slot 0 of each row of the layer-1 forward message,
  // remaining slots zero.
  void feed_input(const Vec& x);

  // Writes the loss gradient into slot 0 of each row of the layer-K
  // backward message.
  void feed_error(const Vec& e);

  // Updates every cell of layer k from the current boundary messages, then
  // emits the averaged outgoing messages.
  void layer_step(int k);

  // One tick: layers 1..K in order.
  void tick();
  // One tick in reverse order K..1 (cloning mode).
  void tick_reverse();

  // Squashed logits read from slot 0 of the layer-K outgoing forward message.
  Vec read_output() const;

  // Full inner-loop body for one example: feed x, run ticks_per_example
  // ticks, read the prediction, and (if a label is given) feed the loss
  // gradient back. The prediction is the one made before the error is fed.
  StepResult inner_step(const Vec& x, std::optional<int> label);

  const LayerSpec& spec() const { return spec_; }
  const MetaParams& params() const { return params_; }
  SubRnnGrid& grid() { return grid_; }
  const SubRnnGrid& grid() const { return grid_; }

  Mat& fwd_message(int k) { return fwd_msg_[static_cast<size_t>(k) - 1]; }
  Mat& bwd_message(int k) { return bwd_msg_[static_cast<size_t>(k) - 1]; }

  // Clip z and h to [-clip_value, clip_value] after every cell update.
  bool clip_states = false;
  double clip_value = 4.0;

  // Cloning mode: zero every produced message slot except the designated
  // slot 0, matching the zeroed input dimensions used during cloning.
  bool designated_slots_only = false;

  // By default the error is fed once, after the example's tick group (the
  // Alg-1 ordering). Setting this refreshes the top backward message after
  // every tick instead, the other defensible reading of running multiple
  // ticks per example.
  bool error_every_tick = false;

  // Zero all backward-message buffers (used before a frozen forward sweep).
  void clear_bwd_messages() {
    for (auto& m : bwd_msg_) m.setZero();
  }

  // Set by episode runners so numeric faults carry the step index.
  long current_step = -1;

 private:
  const MetaParams& params_;
  LayerSpec spec_;
  SubRnnGrid grid_;
  // fwd_msg_[k-1]: incoming forward message of layer k, A^(k) x N'.
  // Index K (one past the last layer) holds the network output message.
  std::vector<Mat> fwd_msg_;
  // bwd_msg_[k-1]: incoming backward message of layer k, B^(k) x N''.
  // Index 0 is the (discarded) message emitted below layer 1; the error is
  // injected at index K.
  std::vector<Mat> bwd_msg_;
};

}  // namespace vsml
