#include "vsml/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace vsml {

namespace {

constexpr int kCheckpointVersion = 1;

std::vector<double> mat_to_vector(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

void mat_from_vector(Mat& m, const std::vector<double>& v, const std::string& name) {
  if (static_cast<Eigen::Index>(v.size()) != m.size()) {
    throw ConfigError("checkpoint: block '" + name + "' has " +
                      std::to_string(v.size()) + " values, expected " +
                      std::to_string(m.size()));
  }
  size_t at = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[at++];
}

std::vector<double> vec_to_vector(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec vec_from_vector(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

Json meta_params_to_json(const MetaParams& params) {
  Json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "vsml";
  j["dims"] = {{"N", params.dims().state},
               {"Nf", params.dims().fwd_msg},
               {"Nb", params.dims().bwd_msg}};
  j["blocks"] = {{"cell.w_input", mat_to_vector(params.cell.w_input)},
                 {"cell.w_recurrent", mat_to_vector(params.cell.w_recurrent)},
                 {"cell.bias", vec_to_vector(params.cell.bias)},
                 {"proj.forward", mat_to_vector(params.proj.forward)},
                 {"proj.backward", mat_to_vector(params.proj.backward)}};
  return j;
}

MetaParams meta_params_from_json(const Json& j) {
  if (!j.contains("version") || j["version"].get<int>() != kCheckpointVersion) {
    throw ConfigError("checkpoint: missing or unsupported version");
  }
  if (!j.contains("dims") || !j.contains("blocks")) {
    throw ConfigError("checkpoint: missing dims or blocks");
  }
  CellDims d;
  d.state = j["dims"].at("N").get<int>();
  d.fwd_msg = j["dims"].at("Nf").get<int>();
  d.bwd_msg = j["dims"].at("Nb").get<int>();
  if (d.state < 2 || d.fwd_msg < 1 || d.bwd_msg < 1) {
    throw ConfigError("checkpoint: invalid dims");
  }
  MetaParams p = MetaParams::zeros(d);
  try {
    const Json& blocks = j["blocks"];
    mat_from_vector(p.cell.w_input, blocks.at("cell.w_input").get<std::vector<double>>(),
                    "cell.w_input");
    mat_from_vector(p.cell.w_recurrent,
                    blocks.at("cell.w_recurrent").get<std::vector<double>>(),
                    "cell.w_recurrent");
    p.cell.bias = vec_from_vector(blocks.at("cell.bias").get<std::vector<double>>());
    if (p.cell.bias.size() != 4 * d.state) {
      throw ConfigError("checkpoint: block 'cell.bias' size mismatch");
    }
    mat_from_vector(p.proj.forward, blocks.at("proj.forward").get<std::vector<double>>(),
                    "proj.forward");
    mat_from_vector(p.proj.backward,
                    blocks.at("proj.backward").get<std::vector<double>>(),
                    "proj.backward");
  } catch (const Json::exception& ex) {
    throw ConfigError(std::string("checkpoint: ") + ex.what());
  }
  return p;
}

void save_meta_params(const std::string& path, const MetaParams& params,
                      const Json& extra_meta) {
  Json j = meta_params_to_json(params);
  if (!extra_meta.is_null()) j["meta"] = extra_meta;
  write_json_file(path, j);
}

LoadedCheckpoint load_meta_params(const std::string& path) {
  const Json j = read_json_file(path);
  return LoadedCheckpoint{meta_params_from_json(j), j};
}

void save_train_state(const std::string& path, const TrainState& state,
                      const Json& extra_meta) {
  Json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "train-state";
  j["params"] = vec_to_vector(state.params);
  j["adam"] = {{"m", vec_to_vector(state.adam.m)},
               {"v", vec_to_vector(state.adam.v)},
               {"t", state.adam.t}};
  j["next_step"] = state.next_step;
  if (!extra_meta.is_null()) j["meta"] = extra_meta;
  write_json_file(path, j);
}

LoadedTrainState load_train_state(const std::string& path) {
  const Json j = read_json_file(path);
  if (!j.contains("kind") || j["kind"] != "train-state") {
    throw ConfigError(path + ": not a train-state checkpoint");
  }
  LoadedTrainState out;
  try {
    out.state.params = vec_from_vector(j.at("params").get<std::vector<double>>());
    out.state.adam.m = vec_from_vector(j.at("adam").at("m").get<std::vector<double>>());
    out.state.adam.v = vec_from_vector(j.at("adam").at("v").get<std::vector<double>>());
    out.state.adam.t = j.at("adam").at("t").get<long>();
    out.state.next_step = j.at("next_step").get<int>();
  } catch (const Json::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  out.meta = j;
  return out;
}

}  // namespace vsml
