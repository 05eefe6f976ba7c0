#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vsml/checkpoint.hpp"

using namespace vsml;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("meta params survive a JSON round trip bit-exactly") {
  const CellDims d{16, 8, 8};
  const MetaParams params = MetaParams::init(d, 12345);
  const Json j = meta_params_to_json(params);
  const MetaParams back = meta_params_from_json(j);
  CHECK(back.cell.w_input == params.cell.w_input);
  CHECK(back.cell.w_recurrent == params.cell.w_recurrent);
  CHECK(back.cell.bias == params.cell.bias);
  CHECK(back.proj.forward == params.proj.forward);
  CHECK(back.proj.backward == params.proj.backward);
}

TEST_CASE("save -> load -> save produces identical files") {
  const CellDims d{8, 4, 4};
  const MetaParams params = MetaParams::init(d, 2);
  const std::string p1 = temp_path("vsml_ckpt_a.json");
  const std::string p2 = temp_path("vsml_ckpt_b.json");
  save_meta_params(p1, params, Json{{"hidden", std::vector<int>{}}, {"seed", 2}});
  const LoadedCheckpoint loaded = load_meta_params(p1);
  save_meta_params(p2, loaded.params,
                   loaded.meta.contains("meta") ? loaded.meta["meta"] : Json());
  CHECK(slurp(p1) == slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("malformed checkpoints are rejected with clear errors") {
  const CellDims d{4, 2, 2};
  Json good = meta_params_to_json(MetaParams::init(d, 3));

  Json no_version = good;
  no_version.erase("version");
  CHECK_THROWS_AS(meta_params_from_json(no_version), ConfigError);

  Json bad_version = good;
  bad_version["version"] = 99;
  CHECK_THROWS_AS(meta_params_from_json(bad_version), ConfigError);

  Json short_block = good;
  short_block["blocks"]["cell.bias"] = std::vector<double>{1.0, 2.0};
  CHECK_THROWS_AS(meta_params_from_json(short_block), ConfigError);

  Json missing_block = good;
  missing_block["blocks"].erase("proj.forward");
  CHECK_THROWS_AS(meta_params_from_json(missing_block), ConfigError);
}

TEST_CASE("train state round-trips parameters, moments, and the step counter") {
  TrainState state;
  Rng rng(7);
  state.params.resize(10);
  rng.fill_normal(state.params);
  state.adam = AdamState::init(10);
  rng.fill_normal(state.adam.m);
  rng.fill_normal(state.adam.v);
  state.adam.v = state.adam.v.cwiseAbs();
  state.adam.t = 42;
  state.next_step = 17;

  const std::string path = temp_path("vsml_train_state.json");
  save_train_state(path, state, Json{{"note", "test"}});
  const LoadedTrainState loaded = load_train_state(path);
  CHECK(loaded.state.params == state.params);
  CHECK(loaded.state.adam.m == state.adam.m);
  CHECK(loaded.state.adam.v == state.adam.v);
  CHECK(loaded.state.adam.t == 42);
  CHECK(loaded.state.next_step == 17);
  CHECK(loaded.meta["meta"]["note"] == "test");
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_train_state("/nonexistent/file.json"), ConfigError);
}
