#include "vsml/cloning.hpp"

#include <algorithm>
#include <memory>

#include "vsml/threading.hpp"

namespace vsml {

CloningTargets make_targets(double x, double w, double b, double e, double alpha) {
  const double tx = std::tanh(x);
  CloningTargets t;
  t.y = tx * w + b;
  t.dw = -alpha * e * tx;
  t.db = -alpha * e;
  t.e_prime = e * w * (1.0 - tx * tx);
  return t;
}

void StateBuffer::append(CellState s) {
  if (capacity_ <= 0) return;
  if (static_cast<int>(items_.size()) < capacity_) {
    items_.push_back(std::move(s));
  } else {
    items_[write_] = std::move(s);
    write_ = (write_ + 1) % items_.size();
  }
}

const CellState& StateBuffer::sample(Rng& rng) const {
  if (items_.empty()) throw ConfigError("StateBuffer: sample from empty buffer");
  return items_[static_cast<size_t>(rng.uniform_int(static_cast<int>(items_.size())))];
}

namespace {

Vec fwd_message_of(const CloningConfig& cfg, double x) {
  Vec m = Vec::Zero(cfg.dims.fwd_msg);
  m[0] = x;
  return m;
}

Vec bwd_message_of(const CloningConfig& cfg, double e) {
  Vec m = Vec::Zero(cfg.dims.bwd_msg);
  m[0] = e;
  return m;
}

}  // namespace

CloneOutputs clone_unroll(const MetaParams& params, const CloningConfig& cfg,
                          const CloneSample& sample, std::vector<CellTape>* fwd_tapes,
                          std::vector<CellTape>* bwd_tapes) {
  const int n = cfg.dims.state;
  const Vec fwd_x = fwd_message_of(cfg, sample.x);
  const Vec bwd_zero = bwd_message_of(cfg, 0.0);
  const Vec bwd_e = bwd_message_of(cfg, sample.e);

  CloneOutputs out;

  // Forward evaluation: the cell state (where w and b live) is frozen, i.e.
  // its updates are discarded afterwards; the hidden state is working memory
  // and flows on into the backward sweep.
  Vec z = sample.start.z;
  Vec h = sample.start.h;
  for (int t = 0; t < cfg.ticks_per_sweep; ++t) {
    Vec z_next(n), h_next(n);
    if (fwd_tapes != nullptr) {
      fwd_tapes->emplace_back();
      lstm_cell_step_taped(params.cell, z, h, fwd_x, bwd_zero, fwd_tapes->back(),
                           z_next, h_next);
    } else {
      lstm_cell_step(params.cell, z, h, fwd_x, bwd_zero, z_next, h_next);
    }
    z = std::move(z_next);
    h = std::move(h_next);
  }
  out.y_hat = params.proj.forward.row(0).dot(h);

  // Backward sweep: cell state reverts to the frozen values; the forward
  // input is fed back alongside the error.
  z = sample.start.z;
  for (int t = 0; t < cfg.ticks_per_sweep; ++t) {
    Vec z_next(n), h_next(n);
    if (bwd_tapes != nullptr) {
      bwd_tapes->emplace_back();
      lstm_cell_step_taped(params.cell, z, h, fwd_x, bwd_e, bwd_tapes->back(), z_next,
                           h_next);
    } else {
      lstm_cell_step(params.cell, z, h, fwd_x, bwd_e, z_next, h_next);
    }
    z = std::move(z_next);
    h = std::move(h_next);
  }
  out.e_prime_hat = params.proj.backward.row(0).dot(h);
  out.dw_hat = kWbScale * (z[0] - sample.start.z[0]);
  out.db_hat = kWbScale * (z[1] - sample.start.z[1]);

  out.end_state = CellState::zeros(n);
  out.end_state.z[0] = z[0];
  out.end_state.z[1] = z[1];
  return out;
}

double clone_regression_loss(const CloneOutputs& out, const CloningTargets& t,
                             double alpha) {
  const double dy = out.y_hat - t.y;
  const double ddw = (out.dw_hat - t.dw) / alpha;
  const double ddb = (out.db_hat - t.db) / alpha;
  const double dep = out.e_prime_hat - t.e_prime;
  return 0.25 * (dy * dy + ddw * ddw + ddb * ddb + dep * dep);
}

double clone_sample_loss(const MetaParams& params, const CloningConfig& cfg, double x,
                         double w, double b, double e, const CloningTargets& targets) {
  CloneSample s;
  s.x = x;
  s.e = e;
  s.start = CellState::from_wb(cfg.dims.state, w, b);
  s.targets = targets;
  return clone_regression_loss(clone_unroll(params, cfg, s), targets, cfg.alpha);
}

namespace {

// Backprop through one unroll given its tapes; accumulates into `acc` and
// returns the sample loss.
double clone_backward_impl(const MetaParams& params, const CloningConfig& cfg,
                           const CloneSample& sample, ParamGrads& acc) {
  std::vector<CellTape> fwd_tapes, bwd_tapes;
  const CloneOutputs out = clone_unroll(params, cfg, sample, &fwd_tapes, &bwd_tapes);
  const CloningTargets& t = sample.targets;

  const double d_y = 0.5 * (out.y_hat - t.y);
  const double d_dw = 0.5 * (out.dw_hat - t.dw) / (cfg.alpha * cfg.alpha);
  const double d_db = 0.5 * (out.db_hat - t.db) / (cfg.alpha * cfg.alpha);
  const double d_ep = 0.5 * (out.e_prime_hat - t.e_prime);

  const int n = cfg.dims.state;

  // Backward chain first: loss -> (dw_hat, db_hat, e_prime_hat) -> ticks.
  // Its initial hidden state is the forward chain's final one, so the dh
  // reaching the start joins the readout gradient in the forward sweep.
  Vec dh_into_fwd;
  {
    const Vec& h_last = bwd_tapes.back().gate_o.cwiseProduct(bwd_tapes.back().tanh_z_out);
    acc.d_backward.row(0) += d_ep * h_last.transpose();
    Vec dh = d_ep * params.proj.backward.row(0).transpose();
    Vec dz = Vec::Zero(n);
    dz[0] = kWbScale * d_dw;
    dz[1] = kWbScale * d_db;
    for (int t_i = cfg.ticks_per_sweep - 1; t_i >= 0; --t_i) {
      Vec dz_in(n), dh_in(n), dmsg(cfg.dims.msg_in());
      lstm_cell_backward(params.cell, bwd_tapes[static_cast<size_t>(t_i)], dz, dh,
                         acc.cell, dz_in, dh_in, dmsg);
      dz = std::move(dz_in);
      dh = std::move(dh_in);
    }
    dh_into_fwd = std::move(dh);
  }

  // Forward chain: loss -> y_hat (plus the hidden-state path above) -> ticks.
  {
    const Vec& h_last = fwd_tapes.back().gate_o.cwiseProduct(fwd_tapes.back().tanh_z_out);
    acc.d_forward.row(0) += d_y * h_last.transpose();
    Vec dh = d_y * params.proj.forward.row(0).transpose() + dh_into_fwd;
    Vec dz = Vec::Zero(n);
    for (int t_i = cfg.ticks_per_sweep - 1; t_i >= 0; --t_i) {
      Vec dz_in(n), dh_in(n), dmsg(cfg.dims.msg_in());
      lstm_cell_backward(params.cell, fwd_tapes[static_cast<size_t>(t_i)], dz, dh,
                         acc.cell, dz_in, dh_in, dmsg);
      dz = std::move(dz_in);
      dh = std::move(dh_in);
    }
  }

  return clone_regression_loss(out, t, cfg.alpha);
}

}  // namespace

void clone_sample_backward(const MetaParams& params, const CloningConfig& cfg,
                           double x, double w, double b, double e,
                           const CloningTargets& targets, ParamGrads& acc) {
  CloneSample s;
  s.x = x;
  s.e = e;
  s.start = CellState::from_wb(cfg.dims.state, w, b);
  s.targets = targets;
  clone_backward_impl(params, cfg, s, acc);
}

std::vector<CloneSample> draw_random_batch(const CloningConfig& cfg, StateBuffer& buffer,
                                           Rng& rng) {
  std::vector<CloneSample> batch(static_cast<size_t>(cfg.batch_size));
  for (auto& s : batch) {
    s.x = rng.normal();
    s.e = rng.normal();
    const double w = rng.normal();
    const double b = rng.normal();
    const bool from_buffer = !buffer.empty() && rng.uniform01() < cfg.buffer_fraction;
    if (from_buffer) {
      s.start = buffer.sample(rng);
      s.start.z[0] = w / kWbScale;
      s.start.z[1] = b / kWbScale;
    } else {
      s.start = CellState::from_wb(cfg.dims.state, w, b);
    }
    s.targets = make_targets(s.x, w, b, s.e, cfg.alpha);
  }
  return batch;
}

CloneStepResult clone_step(MetaParams& params, const CloningConfig& cfg,
                           const std::vector<CloneSample>& batch, StateBuffer& buffer,
                           AdamState& adam, double lr_scale) {
  const size_t n_samples = batch.size();
  std::vector<ParamGrads> grads(n_samples, ParamGrads::zeros(cfg.dims));
  std::vector<double> losses(n_samples, 0.0);

  parallel_for(n_samples, cfg.workers, [&](size_t i) {
    losses[i] = clone_backward_impl(params, cfg, batch[i], grads[i]);
  });

  // Deterministic reduction in sample order regardless of worker count.
  ParamGrads total = ParamGrads::zeros(cfg.dims);
  double loss_sum = 0.0;
  for (size_t i = 0; i < n_samples; ++i) {
    total.add(grads[i]);
    loss_sum += losses[i];
  }
  const double inv = 1.0 / static_cast<double>(n_samples);
  Vec g = total.flatten() * inv;
  if (!g.allFinite()) throw NumericFault("clone_step gradient");

  Vec flat = params.flatten();
  AdamConfig adam_cfg = cfg.adam;
  adam_cfg.lr *= lr_scale;
  adam_step(flat, g, adam, adam_cfg);
  params = MetaParams::unflatten(cfg.dims, flat);

  // One new state appended per cloning step.
  const CloneOutputs probe = clone_unroll(params, cfg, batch.front());
  buffer.append(probe.end_state);

  return CloneStepResult{loss_sum * inv};
}

// ---------------------------------------------------------------------------
// Shadow network

ShadowNet ShadowNet::init(const std::vector<int>& widths, uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("ShadowNet: need at least input and output widths");
  ShadowNet net;
  Rng rng(derive_seed(seed, {0x736861646f77}));
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    Mat w(widths[l], widths[l + 1]);
    Mat b(widths[l], widths[l + 1]);
    rng.fill_normal(w);
    rng.fill_normal(b);
    b *= 0.1;
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

std::vector<Vec> ShadowNet::forward(const Vec& x) const {
  std::vector<Vec> acts{x};
  for (int l = 0; l < depth(); ++l) {
    const Vec& in = acts.back();
    const Eigen::Index a_dim = w[static_cast<size_t>(l)].rows();
    const Eigen::Index b_dim = w[static_cast<size_t>(l)].cols();
    if (in.size() != a_dim) throw ConfigError("ShadowNet: input size mismatch");
    Vec out = Vec::Zero(b_dim);
    const Vec tx = in.array().tanh();
    for (Eigen::Index bb = 0; bb < b_dim; ++bb) {
      double acc = 0.0;
      for (Eigen::Index aa = 0; aa < a_dim; ++aa) {
        acc += tx[aa] * w[static_cast<size_t>(l)](aa, bb) + b[static_cast<size_t>(l)](aa, bb);
      }
      out[bb] = acc / static_cast<double>(a_dim);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

std::vector<Vec> ShadowNet::backward_errors(const std::vector<Vec>& acts,
                                            const Vec& e_out) const {
  std::vector<Vec> errors(static_cast<size_t>(depth()) + 1);
  errors.back() = e_out;
  for (int l = depth() - 1; l >= 0; --l) {
    const Vec& in = acts[static_cast<size_t>(l)];
    const Vec& e = errors[static_cast<size_t>(l) + 1];
    const Eigen::Index a_dim = w[static_cast<size_t>(l)].rows();
    const Eigen::Index b_dim = w[static_cast<size_t>(l)].cols();
    Vec e_in = Vec::Zero(a_dim);
    const Vec tx = in.array().tanh();
    for (Eigen::Index aa = 0; aa < a_dim; ++aa) {
      double acc = 0.0;
      for (Eigen::Index bb = 0; bb < b_dim; ++bb) {
        acc += e[bb] * w[static_cast<size_t>(l)](aa, bb) * (1.0 - tx[aa] * tx[aa]);
      }
      e_in[aa] = acc / static_cast<double>(b_dim);
    }
    errors[static_cast<size_t>(l)] = std::move(e_in);
  }
  return errors;
}

void ShadowNet::apply_updates(const std::vector<Vec>& acts,
                              const std::vector<Vec>& errors, double alpha) {
  for (int l = 0; l < depth(); ++l) {
    const Vec& in = acts[static_cast<size_t>(l)];
    const Vec& e = errors[static_cast<size_t>(l) + 1];
    for (Eigen::Index aa = 0; aa < w[static_cast<size_t>(l)].rows(); ++aa) {
      for (Eigen::Index bb = 0; bb < w[static_cast<size_t>(l)].cols(); ++bb) {
        const CloningTargets t = make_targets(in[aa], w[static_cast<size_t>(l)](aa, bb),
                                              b[static_cast<size_t>(l)](aa, bb), e[bb], alpha);
        w[static_cast<size_t>(l)](aa, bb) += t.dw;
        b[static_cast<size_t>(l)](aa, bb) += t.db;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Curriculum

namespace {

// Stage-2/3 batches: run the shadow (or the grid itself) on data and collect
// per-synapse samples, one cloning sample per randomly chosen synapse.
std::vector<CloneSample> draw_deep_batch(const CloningConfig& cfg, ShadowNet& shadow,
                                         StateBuffer& buffer, Rng& rng, bool true_errors,
                                         const MetaParams& params,
                                         const std::function<Example(Rng&)>& draw_input) {
  std::vector<CloneSample> batch;
  batch.reserve(static_cast<size_t>(cfg.batch_size));

  while (static_cast<int>(batch.size()) < cfg.batch_size) {
    const Example input = draw_input(rng);
    const Vec& x = input.x;
    const int label = input.label;
    const std::vector<Vec> acts = shadow.forward(x);
    const SoftmaxLoss sl = softmax_cross_entropy(acts.back(), label);
    std::vector<Vec> errors = shadow.backward_errors(acts, sl.grad);

    if (!true_errors) {
      // Stage 3: intermediate errors come from the cloned RNN's own backward
      // messages instead of the ground-truth network.
      for (int l = shadow.depth() - 1; l >= 1; --l) {
        const Vec& in = acts[static_cast<size_t>(l)];
        const Vec& e = errors[static_cast<size_t>(l) + 1];
        Vec e_hat = Vec::Zero(in.size());
        for (Eigen::Index aa = 0; aa < in.size(); ++aa) {
          double acc = 0.0;
          for (Eigen::Index bb = 0; bb < e.size(); ++bb) {
            CloneSample probe;
            probe.x = in[aa];
            probe.e = e[bb];
            probe.start = CellState::from_wb(cfg.dims.state,
                                             shadow.w[static_cast<size_t>(l)](aa, bb),
                                             shadow.b[static_cast<size_t>(l)](aa, bb));
            acc += clone_unroll(params, cfg, probe).e_prime_hat;
          }
          e_hat[aa] = acc / static_cast<double>(e.size());
        }
        errors[static_cast<size_t>(l)] = std::move(e_hat);
      }
    }

    // A few random synapses per network evaluation keeps batches diverse.
    for (int pick = 0; pick < 8 && static_cast<int>(batch.size()) < cfg.batch_size; ++pick) {
      const int l = rng.uniform_int(shadow.depth());
      const int aa = rng.uniform_int(static_cast<int>(shadow.w[static_cast<size_t>(l)].rows()));
      const int bb = rng.uniform_int(static_cast<int>(shadow.w[static_cast<size_t>(l)].cols()));
      CloneSample s;
      s.x = acts[static_cast<size_t>(l)][aa];
      s.e = errors[static_cast<size_t>(l) + 1][bb];
      const double w_val = shadow.w[static_cast<size_t>(l)](aa, bb);
      const double b_val = shadow.b[static_cast<size_t>(l)](aa, bb);
      const bool from_buffer = !buffer.empty() && rng.uniform01() < cfg.buffer_fraction;
      if (from_buffer) {
        s.start = buffer.sample(rng);
        s.start.z[0] = w_val / kWbScale;
        s.start.z[1] = b_val / kWbScale;
      } else {
        s.start = CellState::from_wb(cfg.dims.state, w_val, b_val);
      }
      s.targets = make_targets(s.x, w_val, b_val, s.e, cfg.alpha);
      batch.push_back(std::move(s));
    }

    shadow.apply_updates(acts, errors, cfg.alpha);
  }
  return batch;
}

}  // namespace

CurriculumResult run_curriculum(const CurriculumConfig& cur) {
  CurriculumResult result;
  const CloningConfig& cfg = cur.cloning;
  result.params = MetaParams::init(cfg.dims, derive_seed(cfg.seed, {0x636c6f6e65}));
  StateBuffer buffer(cfg.buffer_capacity);
  AdamState adam = AdamState::init(result.params.param_count());
  Rng rng(derive_seed(cfg.seed, {0x637572}));

  for (size_t si = 0; si < cur.stages.size(); ++si) {
    const CurriculumStageConfig& stage = cur.stages[si];
    if (stage.stage == CloneStage::deep_rnn_errors) {
      bool saw_stage2 = false;
      for (size_t j = 0; j < si; ++j) {
        saw_stage2 |= cur.stages[j].stage == CloneStage::deep_true_errors;
      }
      if (!saw_stage2) {
        result.warnings.push_back(
            "stage 3 (rnn errors) scheduled without a preceding true-error stage; "
            "expect worse final loss");
      }
    }

    ShadowNet shadow = ShadowNet::init(cur.deep_widths, derive_seed(cfg.seed, {si, 0x6e6574}));
    StageReport report;
    report.stage = stage.stage;
    double smoothed = 0.0;
    bool have_smoothed = false;

    // Shadow-net inputs come from random vectors or from a dataset stream.
    std::function<Example(Rng&)> draw_input;
    if (stage.data == "random") {
      const int in_dim = cur.deep_widths.front();
      const int out_dim = cur.deep_widths.back();
      draw_input = [in_dim, out_dim](Rng& r) {
        Example ex;
        ex.x.resize(in_dim);
        r.fill_normal(ex.x);
        ex.label = r.uniform_int(out_dim);
        return ex;
      };
    } else {
      if (cur.store == nullptr) {
        throw ConfigError("run_curriculum: dataset-backed stage needs a data root");
      }
      TaskSpec data_spec;
      data_spec.source = TaskSpec::Source::dataset;
      data_spec.dataset_name = stage.data;
      auto stream = std::make_shared<EpisodeStream>(data_spec, cur.store,
                                                    derive_seed(cfg.seed, {si, 0x64}));
      draw_input = [stream](Rng&) { return stream->next(); };
    }

    for (int step = 0; step < stage.max_steps; ++step) {
      std::vector<CloneSample> batch;
      if (stage.stage == CloneStage::shallow_random) {
        batch = draw_random_batch(cfg, buffer, rng);
      } else {
        batch = draw_deep_batch(cfg, shadow, buffer, rng,
                                stage.stage == CloneStage::deep_true_errors,
                                result.params, draw_input);
      }
      double lr_scale = 1.0;
      if (cfg.cosine_decay) {
        const double progress = static_cast<double>(step) / stage.max_steps;
        lr_scale = 0.01 + 0.99 * 0.5 * (1.0 + std::cos(M_PI * progress));
      }
      const CloneStepResult res = clone_step(result.params, cfg, batch, buffer, adam, lr_scale);
      smoothed = have_smoothed ? 0.99 * smoothed + 0.01 * res.loss : res.loss;
      have_smoothed = true;
      if (step == 0) report.initial_loss = res.loss;
      report.steps_run = step + 1;
      report.final_loss = smoothed;
      if (cur.progress && (step + 1) % cur.log_every == 0) {
        cur.progress(static_cast<int>(si), step + 1, smoothed);
      }
      // Early advance once the smoothed loss has settled below threshold.
      if (smoothed < stage.loss_threshold && step > 50) {
        report.reached_threshold = true;
        break;
      }
    }
    if (report.final_loss < stage.loss_threshold) report.reached_threshold = true;

    result.reports.push_back(report);
    if (!report.reached_threshold) {
      // Stage failed to reach its threshold within budget: stop with report.
      result.completed = false;
      return result;
    }
  }
  result.completed = true;
  return result;
}

// ---------------------------------------------------------------------------
// Cloned learner

MetricTrace run_cloned_learner(const MetaParams& params, const ClonedRunConfig& cfg,
                               const std::function<Example(int)>& draw) {
  cfg.spec.validate();
  MetricTrace trace;
  trace.class_count = cfg.spec.output_dim();

  std::vector<VsmlNetwork> replicas;
  replicas.reserve(static_cast<size_t>(cfg.batch));
  for (int r = 0; r < cfg.batch; ++r) {
    replicas.emplace_back(params, cfg.spec);
    replicas.back().clip_states = true;
    replicas.back().clip_value = cfg.clip;
    replicas.back().designated_slots_only = true;
    replicas.back().init_states(derive_seed(cfg.seed, {0x72u, static_cast<uint64_t>(r)}));
    // The cloned dynamics assume only the (w,b) slots persist.
    auto& g = replicas.back().grid();
    for (size_t k = 0; k < g.z.size(); ++k) {
      Mat kept = Mat::Zero(g.z[k].rows(), g.z[k].cols());
      kept.col(0) = g.z[k].col(0);
      kept.col(1) = g.z[k].col(1);
      g.z[k] = kept;
      g.h[k].setZero();
    }
  }
  const int depth = cfg.spec.depth();

  int example_index = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Example> examples;
    examples.reserve(static_cast<size_t>(cfg.batch));
    for (int r = 0; r < cfg.batch; ++r) examples.push_back(draw(example_index++));

    try {
      for (int r = 0; r < cfg.batch; ++r) {
        VsmlNetwork& net = replicas[static_cast<size_t>(r)];
        net.current_step = step;
        net.feed_input(examples[static_cast<size_t>(r)].x);
        net.clear_bwd_messages();  // cells were cloned with zero error on forward

        // Forward sweep with the cell states frozen: snapshot z, run 1..K,
        // read, restore z. The hidden states flow on into the backward sweep.
        const std::vector<Mat> z_snapshot = net.grid().z;
        for (int k = 1; k <= depth; ++k) {
          for (int t = 0; t < cfg.ticks_per_sweep; ++t) net.layer_step(k);
        }
        const Vec logits = net.read_output();
        net.grid().z = z_snapshot;

        const SoftmaxLoss sl =
            softmax_cross_entropy(logits, examples[static_cast<size_t>(r)].label);
        if (r == 0) {
          MetricRow row;
          row.step = step;
          row.loss = sl.loss;
          row.label = examples[0].label;
          Eigen::Index arg = 0;
          logits.maxCoeff(&arg);
          row.predicted = static_cast<int>(arg);
          row.correct = row.predicted == row.label ? 1 : 0;
          row.probs = sl.probs;
          trace.rows.push_back(std::move(row));
        }

        // Backward sweep in reverse layer order; stored forward messages are
        // still in the boundary buffers and act as the fed-back activations.
        net.feed_error(sl.grad);
        for (int k = depth; k >= 1; --k) {
          for (int t = 0; t < cfg.ticks_per_sweep; ++t) net.layer_step(k);
        }

        // Retain only the (w,b) slots across the backward pass.
        auto& g = net.grid();
        for (size_t k = 0; k < g.z.size(); ++k) {
          Mat kept = Mat::Zero(g.z[k].rows(), g.z[k].cols());
          kept.col(0) = g.z[k].col(0);
          kept.col(1) = g.z[k].col(1);
          g.z[k] = kept;
          g.h[k].setZero();
        }
      }
    } catch (const NumericFault&) {
      trace.fault = true;
      trace.fault_step = step;
      return trace;
    }

    if (cfg.batch > 1) {
      // Batched analogue of gradient averaging: mean the (w,b) slots.
      for (int k = 0; k < depth; ++k) {
        Vec mean_w = Vec::Zero(replicas[0].grid().z[static_cast<size_t>(k)].rows());
        Vec mean_b = mean_w;
        for (int r = 0; r < cfg.batch; ++r) {
          mean_w += replicas[static_cast<size_t>(r)].grid().z[static_cast<size_t>(k)].col(0);
          mean_b += replicas[static_cast<size_t>(r)].grid().z[static_cast<size_t>(k)].col(1);
        }
        mean_w /= cfg.batch;
        mean_b /= cfg.batch;
        for (int r = 0; r < cfg.batch; ++r) {
          replicas[static_cast<size_t>(r)].grid().z[static_cast<size_t>(k)].col(0) = mean_w;
          replicas[static_cast<size_t>(r)].grid().z[static_cast<size_t>(k)].col(1) = mean_b;
        }
      }
    }
  }
  return trace;
}

}  // namespace vsml
