#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vsml/experiment.hpp"

namespace {

// Shared flags override the corresponding config fields when given.
struct CommonArgs {
  std::string config;
  std::string out;
  std::string data_root;
  std::string checkpoint;
  std::string task;
  std::string learner;
  long long seed = -1;
  int workers = -1;

  void attach(CLI::App* app, bool config_required) {
    auto* opt = app->add_option("--config", config, "experiment config JSON");
    if (config_required) opt->required();
    app->add_option("--out", out, "output directory");
    app->add_option("--data-root", data_root, "dataset root (or env DATA_ROOT)");
    app->add_option("--checkpoint", checkpoint, "checkpoint file");
    app->add_option("--task", task, "inline task JSON");
    app->add_option("--learner", learner, "vsml|meta-rnn|sgd|adam");
    app->add_option("--seed", seed, "seed override");
    app->add_option("--workers", workers, "worker threads (0 = all cores)");
  }

  vsml::ExperimentConfig resolve(const std::string& mode) const {
    vsml::ExperimentConfig cfg;
    if (!config.empty()) cfg = vsml::load_config_file(config);
    cfg.mode = mode;
    if (!out.empty()) cfg.out_dir = out;
    if (!data_root.empty()) cfg.data_root = data_root;
    if (cfg.data_root.empty()) {
      if (const char* env = std::getenv("DATA_ROOT")) cfg.data_root = env;
    }
    if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
    if (!learner.empty()) cfg.learner = learner;
    if (seed >= 0) {
      cfg.seed = static_cast<uint64_t>(seed);
      cfg.es.seed = cfg.seed;
      cfg.cloning.seed = cfg.seed;
    }
    if (workers >= 0) {
      cfg.workers = workers;
      cfg.es.workers = workers;
      cfg.cloning.workers = workers;
    }
    if (!task.empty()) {
      nlohmann::json tj;
      try {
        tj = nlohmann::json::parse(task);
      } catch (const std::exception& ex) {
        throw vsml::ConfigError(std::string("--task parse error: ") + ex.what());
      }
      cfg.tasks.specs.clear();
      cfg.tasks.weights.clear();
      cfg.tasks.specs.push_back(vsml::task_spec_from_json(tj));
      cfg.tasks.weights.push_back(1.0);
    }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vsml: parameter-shared sub-RNN grids, meta-trained by evolution "
               "strategies or cloned from online backpropagation"};
  app.require_subcommand(1);

  CommonArgs train_args, test_args, clone_args, run_args, intro_args;

  auto* train = app.add_subcommand("meta-train", "ES meta-training over episodes");
  train_args.attach(train, true);

  auto* test = app.add_subcommand("meta-test", "run a checkpoint on a task");
  test_args.attach(test, false);
  int test_seeds = 0;
  test->add_option("--n-seeds", test_seeds, "number of evaluation episodes");

  auto* clone = app.add_subcommand("clone", "learning-algorithm cloning curriculum");
  clone_args.attach(clone, false);
  std::string clone_mode, clone_data;
  clone->add_option("--mode", clone_mode, "shallow|deep");
  clone->add_option("--data", clone_data, "random|<dataset:split>");

  auto* run_cloned = app.add_subcommand("run-cloned", "online learning with a cloned checkpoint");
  run_args.attach(run_cloned, false);
  int run_steps = 0, run_batch = 0;
  run_cloned->add_option("--steps", run_steps, "online steps");
  run_cloned->add_option("--batch", run_batch, "grid replicas");

  auto* intro = app.add_subcommand("introspect", "trace output probabilities");
  intro_args.attach(intro, false);
  std::string protocol;
  int n_pairs = 0;
  intro->add_option("--protocol", protocol, "repeated-pairs|full-stream");
  intro->add_option("--n-pairs", n_pairs, "pairs in the repeated-pairs protocol");

  auto* verify = app.add_subcommand("verify-equivalence",
                                    "check the sparse-matrix equivalence theorem");
  int trials = 108, max_dim = 3;
  long long verify_seed = 7;
  verify->add_option("--trials", trials, "random instances");
  verify->add_option("--max-dim", max_dim, "largest grid dimension");
  verify->add_option("--seed", verify_seed, "seed");

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient suite");
  int grad_instances = 20;
  double grad_tol = 1e-4;
  long long grad_seed = 11;
  grad->add_option("--instances", grad_instances, "instances per check");
  grad->add_option("--tolerance", grad_tol, "relative tolerance");
  grad->add_option("--seed", grad_seed, "seed");

  auto* plot = app.add_subcommand("render-plot", "render a CSV as a deterministic SVG");
  std::string plot_csv, plot_kind = "learning-curve", plot_out, plot_title;
  plot->add_option("--csv", plot_csv, "input CSV")->required();
  plot->add_option("--kind", plot_kind, "learning-curve|introspection");
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("--title", plot_title, "plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return vsml::cmd_meta_train(train_args.resolve("meta-train"), train_args.config);
    }
    if (test->parsed()) {
      vsml::ExperimentConfig cfg = test_args.resolve("meta-test");
      if (test_seeds > 0) cfg.n_seeds = test_seeds;
      return vsml::cmd_meta_test(cfg, test_args.config);
    }
    if (clone->parsed()) {
      vsml::ExperimentConfig cfg = clone_args.resolve("clone");
      if (!clone_mode.empty()) cfg.clone_mode = clone_mode;
      if (!clone_data.empty()) cfg.clone_data = clone_data;
      return vsml::cmd_clone(cfg, clone_args.config);
    }
    if (run_cloned->parsed()) {
      vsml::ExperimentConfig cfg = run_args.resolve("run-cloned");
      if (run_steps > 0) cfg.run_steps = run_steps;
      if (run_batch > 0) cfg.run_batch = run_batch;
      return vsml::cmd_run_cloned(cfg, run_args.config);
    }
    if (intro->parsed()) {
      vsml::ExperimentConfig cfg = intro_args.resolve("introspect");
      if (!protocol.empty()) cfg.protocol = protocol;
      if (n_pairs > 0) cfg.n_pairs = n_pairs;
      return vsml::cmd_introspect(cfg, intro_args.config);
    }
    if (verify->parsed()) {
      return vsml::cmd_verify_equivalence(trials, max_dim,
                                          static_cast<uint64_t>(verify_seed));
    }
    if (grad->parsed()) {
      return vsml::cmd_grad_check(grad_instances, grad_tol,
                                  static_cast<uint64_t>(grad_seed));
    }
    if (plot->parsed()) {
      return vsml::cmd_render_plot(plot_csv, plot_kind, plot_out, plot_title);
    }
  } catch (const vsml::ConfigError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return vsml::kExitValidation;
  } catch (const vsml::NumericFault& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return vsml::kExitNumericFault;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return vsml::kExitValidation;
  }
  return vsml::kExitOk;
}
