#include "vsml/es.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "vsml/threading.hpp"

namespace vsml {

void EsConfig::validate() const {
  if (population_size < 2) throw ConfigError("es: population_size must be >= 2");
  if (antithetic && population_size % 2 != 0) {
    throw ConfigError("es: population_size must be even with antithetic sampling");
  }
  if (!(noise_std > 0.0)) throw ConfigError("es: noise_std must be > 0");
  if (outer_steps < 1) throw ConfigError("es: outer_steps must be >= 1");
  if (episode_length < 1) throw ConfigError("es: episode_length must be >= 1");
}

Vec regenerate_noise(uint64_t noise_seed, int n) {
  Rng rng(noise_seed);
  Vec eps(n);
  rng.fill_normal(eps);
  return eps;
}

namespace {

void seeds_for_member(const EsConfig& cfg, int outer_step, int member,
                      uint64_t& noise_seed, uint64_t& episode_seed, int& sign) {
  // One episode per outer step, shared by the whole population: fitness
  // differences then isolate the parameter perturbations, and fresh episodes
  // across outer steps supply the meta-generalization pressure. At small
  // populations, per-member episodes leave the ranking dominated by episode
  // difficulty and meta-training stalls.
  episode_seed = derive_seed(cfg.seed, {0x657069, static_cast<uint64_t>(outer_step)});
  if (cfg.antithetic) {
    const int pair = member / 2;
    sign = member % 2 == 0 ? 1 : -1;
    noise_seed = derive_seed(cfg.seed, {0x6e6f697365, static_cast<uint64_t>(outer_step),
                                        static_cast<uint64_t>(pair)});
  } else {
    sign = 1;
    noise_seed = derive_seed(cfg.seed, {0x6e6f697365, static_cast<uint64_t>(outer_step),
                                        static_cast<uint64_t>(member)});
  }
}

}  // namespace

std::vector<FitnessRecord> evaluate_population(const EsConfig& cfg,
                                               const EsObjective& objective,
                                               const Vec& base_params, int outer_step) {
  const int n = objective.param_count();
  std::vector<FitnessRecord> records(static_cast<size_t>(cfg.population_size));
  parallel_for(static_cast<size_t>(cfg.population_size), cfg.workers, [&](size_t j) {
    uint64_t noise_seed = 0, episode_seed = 0;
    int sign = 1;
    seeds_for_member(cfg, outer_step, static_cast<int>(j), noise_seed, episode_seed, sign);
    const Vec eps = regenerate_noise(noise_seed, n);
    const Vec perturbed = base_params + cfg.noise_std * sign * eps;
    FitnessRecord rec = objective.evaluate(perturbed, episode_seed);
    rec.noise_seed = noise_seed;
    rec.episode_seed = episode_seed;
    rec.sign = sign;
    if (!std::isfinite(rec.loss)) rec.diverged = true;
    records[j] = rec;
  });
  return records;
}

Vec es_gradient(const EsConfig& cfg, const std::vector<FitnessRecord>& records, int n) {
  const int pop = static_cast<int>(records.size());

  // Diverged members take the worst finite loss before shaping.
  double worst_finite = -std::numeric_limits<double>::infinity();
  int finite_count = 0;
  for (const auto& r : records) {
    if (!r.diverged) {
      worst_finite = std::max(worst_finite, r.loss);
      ++finite_count;
    }
  }
  if (finite_count == 0) {
    throw NumericFault("es_gradient: every population member diverged");
  }
  std::vector<double> fitness(records.size());
  for (size_t j = 0; j < records.size(); ++j) {
    fitness[j] = records[j].diverged ? worst_finite : records[j].loss;
  }

  if (cfg.rank_shaping && cfg.antithetic) {
    // Mirrored members share their episode, so the within-pair loss
    // difference isolates the perturbation; centered ranks over those
    // differences drop the episode-difficulty noise that would otherwise
    // dominate the ranking at small populations.
    const int n_pairs = pop / 2;
    std::vector<double> diff(static_cast<size_t>(n_pairs));
    for (int i = 0; i < n_pairs; ++i) {
      diff[static_cast<size_t>(i)] =
          fitness[static_cast<size_t>(2 * i)] - fitness[static_cast<size_t>(2 * i + 1)];
    }
    std::vector<int> idx(static_cast<size_t>(n_pairs));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return diff[static_cast<size_t>(a)] < diff[static_cast<size_t>(b)];
    });
    Vec grad = Vec::Zero(n);
    for (size_t rank = 0; rank < idx.size(); ++rank) {
      const double u =
          n_pairs > 1 ? static_cast<double>(rank) / static_cast<double>(n_pairs - 1) - 0.5
                      : 0.0;
      const int pair = idx[rank];
      const Vec eps = regenerate_noise(records[static_cast<size_t>(2 * pair)].noise_seed, n);
      grad += u * eps;
    }
    grad /= static_cast<double>(n_pairs) * cfg.noise_std;
    return grad;
  }

  if (cfg.rank_shaping) {
    // Centered ranks in [-0.5, 0.5], ascending in loss; ties broken by
    // member index for determinism.
    std::vector<int> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fitness[static_cast<size_t>(a)] <
                                                fitness[static_cast<size_t>(b)]; });
    std::vector<double> shaped(records.size());
    for (size_t rank = 0; rank < idx.size(); ++rank) {
      const double u = pop > 1
                           ? static_cast<double>(rank) / static_cast<double>(pop - 1) - 0.5
                           : 0.0;
      shaped[static_cast<size_t>(idx[rank])] = u;
    }
    fitness = std::move(shaped);
  }

  Vec grad = Vec::Zero(n);
  for (size_t j = 0; j < records.size(); ++j) {
    const Vec eps = regenerate_noise(records[j].noise_seed, n);
    grad += fitness[j] * records[j].sign * eps;
  }
  grad /= static_cast<double>(pop) * cfg.noise_std;
  return grad;
}

MetaTrainResult meta_train(
    const EsConfig& cfg, const EsObjective& objective, TrainState& state,
    const std::function<void(const OuterStepStats&, const TrainState&)>& on_step) {
  cfg.validate();
  if (state.params.size() != objective.param_count()) {
    throw ConfigError("meta_train: parameter size mismatch");
  }
  if (state.adam.m.size() != state.params.size()) {
    state.adam = AdamState::init(state.params.size());
  }

  MetaTrainResult result;
  for (int step = state.next_step; step < cfg.outer_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<FitnessRecord> records =
        evaluate_population(cfg, objective, state.params, step);
    const Vec grad = es_gradient(cfg, records, objective.param_count());
    adam_step(state.params, grad, state.adam, cfg.adam);
    state.next_step = step + 1;

    OuterStepStats stats;
    stats.step = step;
    stats.best_loss = std::numeric_limits<double>::infinity();
    double loss_sum = 0.0, acc_sum = 0.0;
    double worst_finite = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
      if (!r.diverged) worst_finite = std::max(worst_finite, r.loss);
    }
    for (const auto& r : records) {
      const double loss = r.diverged ? worst_finite : r.loss;
      loss_sum += loss;
      acc_sum += r.cum_acc;
      stats.best_loss = std::min(stats.best_loss, loss);
    }
    stats.mean_loss = loss_sum / static_cast<double>(records.size());
    stats.mean_cum_acc = acc_sum / static_cast<double>(records.size());
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    if (on_step) on_step(stats, state);
  }
  return result;
}

// ---------------------------------------------------------------------------

VsmlEsObjective::VsmlEsObjective(CellDims dims, std::vector<int> hidden_sizes,
                                 int ticks_per_example, TaskDistribution tasks,
                                 const DatasetStore* store, int episode_length)
    : dims_(dims),
      hidden_(std::move(hidden_sizes)),
      ticks_(ticks_per_example),
      tasks_(std::move(tasks)),
      store_(store),
      episode_length_(episode_length) {
  tasks_.validate();
  if (episode_length_ < 1) throw ConfigError("es objective: episode length must be >= 1");
}

int VsmlEsObjective::param_count() const {
  return MetaParams::zeros(dims_).param_count();
}

LayerSpec VsmlEsObjective::layer_spec_for(const TaskSpec& task) const {
  const int in = task.resolved_input_dim(store_);
  const int out = task.resolved_class_count(store_);
  LayerSpec spec;
  spec.ticks_per_example = ticks_;
  int prev = in;
  for (int hdim : hidden_) {
    spec.layers.push_back({prev, hdim});
    prev = hdim;
  }
  spec.layers.push_back({prev, out});
  return spec;
}

FitnessRecord VsmlEsObjective::evaluate(const Vec& flat, uint64_t episode_seed) const {
  const MetaParams params = MetaParams::unflatten(dims_, flat);
  const TaskSpec& task = tasks_.sample(episode_seed);
  const LayerSpec spec = layer_spec_for(task);
  FitnessRecord rec;
  const EpisodeResult ep =
      run_vsml_episode(params, spec, task, store_, episode_seed, episode_length_);
  rec.loss = ep.loss_sum;
  rec.cum_acc = ep.final_cum_acc;
  rec.diverged = ep.diverged;
  return rec;
}

EpisodeResult run_vsml_episode(const MetaParams& params, const LayerSpec& spec,
                               const TaskSpec& task, const DatasetStore* store,
                               uint64_t episode_seed, int episode_length,
                               MetricTrace* trace) {
  EpisodeResult result;
  EpisodeStream stream(task, store, episode_seed);
  VsmlNetwork net(params, spec);
  net.init_states(derive_seed(episode_seed, {0x696e6974}));
  if (trace != nullptr) trace->class_count = spec.output_dim();

  int correct_sum = 0;
  for (int t = 0; t < episode_length; ++t) {
    const Example ex = stream.next();
    net.current_step = t;
    try {
      const StepResult step = net.inner_step(ex.x, ex.label);
      result.loss_sum += step.loss;
      correct_sum += step.correct ? 1 : 0;
      if (trace != nullptr) {
        MetricRow row;
        row.step = t;
        row.loss = step.loss;
        row.correct = step.correct ? 1 : 0;
        row.predicted = step.predicted;
        row.label = ex.label;
        row.probs = step.probs;
        trace->rows.push_back(std::move(row));
      }
    } catch (const NumericFault& fault) {
      result.diverged = true;
      result.fault_step = fault.step >= 0 ? fault.step : t;
      result.loss_sum = std::numeric_limits<double>::infinity();
      if (trace != nullptr) {
        trace->fault = true;
        trace->fault_step = result.fault_step;
      }
      break;
    }
  }
  result.final_cum_acc =
      result.diverged ? 0.0 : static_cast<double>(correct_sum) / episode_length;
  return result;
}

}  // namespace vsml
