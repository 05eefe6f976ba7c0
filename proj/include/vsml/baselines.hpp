#pragma once

#include <optional>

#include "vsml/es.hpp"
#include "vsml/grid.hpp"

namespace vsml {

// Plain Meta RNN baseline: a single LSTM whose input is the (padded) image
// concatenated with the previous step's output-error vector, plus a linear
// readout. Trained by ES exactly like VSML.
struct MetaRnnConfig {
  int hidden = 16;
  int input_dim = 0;  // padded image size shared across the task distribution
  int n_classes = 0;  // padded error/readout size
};

class MetaRnnLearner {
 public:
  explicit MetaRnnLearner(const MetaRnnConfig& cfg);

  static int param_count(const MetaRnnConfig& cfg);
  static Vec init_params(const MetaRnnConfig& cfg, uint64_t seed);

  int param_count() const { return param_count(cfg_); }
  void set_params(const Vec& flat);

  void reset(uint64_t seed);  // fresh random states, zero previous error
  // One tick plus readout; label drives next step's error input. Logits are
  // sliced to `task_classes` for the loss.
  StepResult step(const Vec& x_padded, std::optional<int> label, int task_classes);

 private:
  MetaRnnConfig cfg_;
  LstmCellParams cell_;
  Mat w_out_;
  Vec b_out_;
  Vec z_, h_, prev_error_;
};

// ES objective over episodes; inputs zero-padded to the distribution-wide
// maximum (the Meta RNN cannot re-shape, unlike the VSML grid).
class MetaRnnEsObjective : public EsObjective {
 public:
  MetaRnnEsObjective(MetaRnnConfig cfg, TaskDistribution tasks, const DatasetStore* store,
                     int episode_length);
  int param_count() const override;
  FitnessRecord evaluate(const Vec& flat, uint64_t episode_seed) const override;
  const MetaRnnConfig& config() const { return cfg_; }

 private:
  MetaRnnConfig cfg_;
  TaskDistribution tasks_;
  const DatasetStore* store_;
  int episode_length_ = 500;
};

// Online gradient-descent baseline on a dense tanh network (batch size 1),
// shallow (input -> classes) or with one hidden layer.
struct SgdConfig {
  enum class Arch { shallow, deep };
  enum class Opt { sgd, adam };
  Arch arch = Arch::shallow;
  Opt opt = Opt::sgd;
  int input_dim = 0;
  int n_classes = 0;
  int hidden = 160;
  double lr = 1e-2;  // tuned defaults: 1e-2 plain, 1e-3 Adam
};

class SgdLearner {
 public:
  SgdLearner(const SgdConfig& cfg, uint64_t seed);

  int param_count() const;
  Vec flatten() const;
  void unflatten(const Vec& flat);

  double forward_loss(const Vec& x, int label) const;
  Vec gradient(const Vec& x, int label) const;  // exact, same layout as flatten

  // Predict (recorded before the update), then one optimizer step.
  StepResult step(const Vec& x, int label);

 private:
  Vec logits_of(const Vec& x) const;

  SgdConfig cfg_;
  Mat w1_;
  Vec b1_;
  Mat w2_;
  Vec b2_;
  AdamState adam_;
};

}  // namespace vsml
