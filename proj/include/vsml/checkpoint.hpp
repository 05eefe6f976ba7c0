#pragma once

#include <json.hpp>

#include "vsml/es.hpp"
#include "vsml/meta_params.hpp"

namespace vsml {

using Json = nlohmann::json;

// Versioned JSON checkpoint for MetaParams. Doubles are serialized with
// shortest round-trip decimals, so save -> load -> save is byte-identical.
Json meta_params_to_json(const MetaParams& params);
MetaParams meta_params_from_json(const Json& j);

void save_meta_params(const std::string& path, const MetaParams& params,
                      const Json& extra_meta);
struct LoadedCheckpoint {
  MetaParams params;
  Json meta;  // the full document, including any extra metadata
};
LoadedCheckpoint load_meta_params(const std::string& path);

// Resumable ES training state: parameters plus Adam moments and the next
// outer-step index.
void save_train_state(const std::string& path, const TrainState& state,
                      const Json& extra_meta);
struct LoadedTrainState {
  TrainState state;
  Json meta;
};
LoadedTrainState load_train_state(const std::string& path);

}  // namespace vsml
