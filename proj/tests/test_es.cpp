#include <doctest.h>

#include "vsml/es.hpp"

using namespace vsml;

namespace {

struct QuadraticObjective : EsObjective {
  int dim;
  explicit QuadraticObjective(int d) : dim(d) {}
  int param_count() const override { return dim; }
  FitnessRecord evaluate(const Vec& p, uint64_t) const override {
    FitnessRecord r;
    r.loss = p.squaredNorm();
    return r;
  }
};

struct LinearObjective : EsObjective {
  Vec coeff;
  double offset;
  LinearObjective(Vec c, double o) : coeff(std::move(c)), offset(o) {}
  int param_count() const override { return static_cast<int>(coeff.size()); }
  FitnessRecord evaluate(const Vec& p, uint64_t) const override {
    FitnessRecord r;
    r.loss = coeff.dot(p) + offset;
    return r;
  }
};

EsConfig small_config() {
  EsConfig cfg;
  cfg.population_size = 64;
  cfg.noise_std = 0.05;
  cfg.outer_steps = 1;
  cfg.episode_length = 1;
  cfg.seed = 5;
  cfg.workers = 1;
  return cfg;
}

TaskSpec ten_class_task() {
  TaskSpec t;
  t.source = TaskSpec::Source::random;
  t.input_dim = 6;
  t.class_count = 10;
  t.random_points = 20;
  t.episode_length = 500;
  return t;
}

}  // namespace

TEST_CASE("config validation rejects degenerate settings") {
  EsConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.noise_std = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.noise_std = 0.05;
  cfg.population_size = 63;  // odd with antithetic on
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.antithetic = false;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a zero-parameter learner scores the uniform-predictor loss") {
  TaskDistribution tasks;
  tasks.specs = {ten_class_task()};
  VsmlEsObjective objective(CellDims{16, 8, 8}, {}, 2, tasks, nullptr, 500);
  const Vec zero = Vec::Zero(objective.param_count());
  const FitnessRecord rec = objective.evaluate(zero, 99);
  CHECK(std::abs(rec.loss - 500.0 * std::log(10.0)) < 1e-6);
  CHECK(!rec.diverged);
}

TEST_CASE("evaluation is a pure function of (params, episode seed)") {
  TaskDistribution tasks;
  tasks.specs = {ten_class_task()};
  tasks.specs[0].episode_length = 40;
  VsmlEsObjective objective(CellDims{8, 4, 4}, {}, 2, tasks, nullptr, 40);
  Rng rng(4);
  Vec params(objective.param_count());
  rng.fill_normal(params);
  params *= 0.1;
  const FitnessRecord a = objective.evaluate(params, 1234);
  const FitnessRecord b = objective.evaluate(params, 1234);
  const FitnessRecord c = objective.evaluate(params, 1235);
  CHECK(a.loss == b.loss);
  CHECK(a.cum_acc == b.cum_acc);
  CHECK(a.loss != c.loss);
}

TEST_CASE("a length-1 episode equals a single inner step") {
  TaskSpec task = ten_class_task();
  TaskDistribution tasks;
  tasks.specs = {task};
  VsmlEsObjective objective(CellDims{8, 4, 4}, {}, 2, tasks, nullptr, 1);
  Rng rng(6);
  Vec flat(objective.param_count());
  rng.fill_normal(flat);
  flat *= 0.2;
  const uint64_t episode_seed = 777;
  const FitnessRecord rec = objective.evaluate(flat, episode_seed);

  // Reproduce the episode internals directly through vsml-core.
  const MetaParams params = MetaParams::unflatten(CellDims{8, 4, 4}, flat);
  EpisodeStream stream(task, nullptr, episode_seed);
  VsmlNetwork net(params, objective.layer_spec_for(task));
  net.init_states(derive_seed(episode_seed, {0x696e6974}));
  const Example ex = stream.next();
  const StepResult step = net.inner_step(ex.x, ex.label);
  CHECK(rec.loss == step.loss);
}

TEST_CASE("antithetic gradient estimate matches the derivative of theta^2") {
  // f(theta) = theta^2 in 1-D at theta = 1; the pair estimate is exactly
  // 2*eps^2, so the population mean concentrates on f'(1) = 2.
  EsConfig cfg;
  cfg.population_size = 200000;  // 1e5 antithetic pairs
  cfg.noise_std = 1e-3;
  cfg.rank_shaping = false;
  cfg.seed = 31;
  cfg.workers = 2;
  QuadraticObjective objective(1);
  Vec theta(1);
  theta << 1.0;
  const auto records = evaluate_population(cfg, objective, theta, 0);
  const Vec grad = es_gradient(cfg, records, 1);
  CHECK(std::abs(grad[0] - 2.0) / 2.0 < 0.02);
}

TEST_CASE("constant fitness gives an exactly zero gradient with shaping off") {
  EsConfig cfg = small_config();
  cfg.rank_shaping = false;
  LinearObjective objective(Vec::Zero(5), 3.25);  // constant fitness 3.25
  const auto records = evaluate_population(cfg, objective, Vec::Zero(5), 0);
  const Vec grad = es_gradient(cfg, records, 5);
  // Antithetic pairs cancel exactly: f+ = f- for every pair.
  CHECK(grad.isZero(0.0));
}

TEST_CASE("antithetic sampling cuts the estimator variance on an odd objective") {
  Vec coeff(4);
  coeff << 1.0, -2.0, 0.5, 3.0;
  LinearObjective objective(coeff, 5.0);
  Vec base = Vec::Zero(4);

  auto estimate_var = [&](bool antithetic) {
    double sq_sum = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
      EsConfig cfg;
      cfg.population_size = 64;
      cfg.noise_std = 0.05;
      cfg.rank_shaping = false;
      cfg.antithetic = antithetic;
      cfg.seed = 1000 + static_cast<uint64_t>(r);
      cfg.workers = 1;
      const auto records = evaluate_population(cfg, objective, base, 0);
      const Vec grad = es_gradient(cfg, records, 4);
      sq_sum += (grad - coeff).squaredNorm();  // E[estimate] = coeff either way
    }
    return sq_sum / reps;
  };
  CHECK(estimate_var(true) < 0.2 * estimate_var(false));
}

TEST_CASE("diverged members take the worst finite fitness") {
  struct SometimesDiverges : EsObjective {
    int param_count() const override { return 2; }
    FitnessRecord evaluate(const Vec& p, uint64_t) const override {
      FitnessRecord r;
      r.loss = p[0] > 0.0 ? std::numeric_limits<double>::infinity() : p.squaredNorm();
      return r;
    }
  };
  EsConfig cfg = small_config();
  SometimesDiverges objective;
  const auto records = evaluate_population(cfg, objective, Vec::Zero(2), 0);
  int diverged = 0;
  for (const auto& r : records) diverged += r.diverged ? 1 : 0;
  CHECK(diverged > 0);
  CHECK(diverged < cfg.population_size);
  CHECK_NOTHROW(es_gradient(cfg, records, 2));

  struct AlwaysDiverges : EsObjective {
    int param_count() const override { return 2; }
    FitnessRecord evaluate(const Vec&, uint64_t) const override {
      FitnessRecord r;
      r.loss = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
  };
  AlwaysDiverges bad;
  const auto bad_records = evaluate_population(cfg, bad, Vec::Zero(2), 0);
  CHECK_THROWS_AS(es_gradient(cfg, bad_records, 2), NumericFault);
}

TEST_CASE("a 20-dim quadratic is reduced at least 100x in 200 outer steps") {
  EsConfig cfg;
  cfg.population_size = 64;
  cfg.noise_std = 0.05;
  cfg.outer_steps = 200;
  cfg.adam.lr = 0.05;
  cfg.seed = 17;
  cfg.workers = 2;
  QuadraticObjective objective(20);

  TrainState state;
  Rng rng(55);
  state.params.resize(20);
  rng.fill_normal(state.params);
  const double initial = state.params.squaredNorm();
  meta_train(cfg, objective, state);
  const double final_value = state.params.squaredNorm();
  CHECK(final_value * 100.0 <= initial);
}

TEST_CASE("meta-training is deterministic and independent of worker count") {
  TaskDistribution tasks;
  tasks.specs = {ten_class_task()};
  tasks.specs[0].class_count = 2;
  tasks.specs[0].episode_length = 10;

  auto run = [&](int workers) {
    EsConfig cfg;
    cfg.population_size = 8;
    cfg.noise_std = 0.05;
    cfg.outer_steps = 5;
    cfg.episode_length = 10;
    cfg.seed = 3;
    cfg.workers = workers;
    VsmlEsObjective objective(CellDims{6, 3, 3}, {}, 2, tasks, nullptr, 10);
    TrainState state;
    state.params = MetaParams::init(CellDims{6, 3, 3}, 3).flatten();
    const MetaTrainResult res = meta_train(cfg, objective, state);
    return std::make_pair(state.params, res.history.back().mean_loss);
  };
  const auto [params1, loss1] = run(1);
  const auto [params2, loss2] = run(2);
  CHECK(params1 == params2);
  CHECK(loss1 == loss2);
}

TEST_CASE("a zero-parameter checkpoint scores chance accuracy on 10 classes") {
  TaskSpec task = ten_class_task();
  task.episode_length = 2000;
  task.random_points = 2000;  // large pool so the class frequencies concentrate
  const MetaParams params = MetaParams::zeros(CellDims{8, 4, 4});
  const EpisodeResult res = run_vsml_episode(params, LayerSpec::single(6, 10), task,
                                             nullptr, 99, 2000);
  CHECK(std::abs(res.final_cum_acc - 0.1) < 0.02);
}

TEST_CASE("one parameter set runs on tasks of different shapes") {
  // The grid re-shapes per task; the meta variables do not change.
  const CellDims d{8, 4, 4};
  const MetaParams params = MetaParams::init(d, 5);

  TaskSpec small;
  small.source = TaskSpec::Source::random;
  small.input_dim = 6;
  small.class_count = 2;
  TaskSpec large;
  large.source = TaskSpec::Source::random;
  large.input_dim = 40;
  large.class_count = 7;

  const EpisodeResult a =
      run_vsml_episode(params, LayerSpec::single(6, 2), small, nullptr, 1, 20);
  const EpisodeResult b =
      run_vsml_episode(params, LayerSpec::single(40, 7), large, nullptr, 1, 20);
  CHECK(!a.diverged);
  CHECK(!b.diverged);
  CHECK(std::isfinite(a.loss_sum));
  CHECK(std::isfinite(b.loss_sum));
}

TEST_CASE("resuming from a checkpointed state matches an unbroken run") {
  QuadraticObjective objective(6);
  auto fresh_state = [&] {
    TrainState s;
    Rng rng(9);
    s.params.resize(6);
    rng.fill_normal(s.params);
    return s;
  };
  EsConfig cfg;
  cfg.population_size = 16;
  cfg.noise_std = 0.05;
  cfg.outer_steps = 30;
  cfg.seed = 21;
  cfg.workers = 1;

  TrainState unbroken = fresh_state();
  meta_train(cfg, objective, unbroken);

  TrainState resumed = fresh_state();
  EsConfig first_half = cfg;
  first_half.outer_steps = 13;
  meta_train(first_half, objective, resumed);
  CHECK(resumed.next_step == 13);
  meta_train(cfg, objective, resumed);  // continues from step 13

  CHECK(unbroken.params == resumed.params);
  CHECK(unbroken.adam.t == resumed.adam.t);
}
