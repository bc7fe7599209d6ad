#pragma once

#include <string>

#include "core/channel.hpp"
#include "core/pso.hpp"
#include "core/scene.hpp"
#include "core/train.hpp"

namespace chartloc {

struct SimParams {
  Kinematics kinematics;
  LaserConfig laser;
  ChannelParams channel;
  int c_bar = 49;
};

// Parsers accept missing fields (defaults above apply) and reject unknown
// keys, so a typoed config fails loudly instead of silently running with
// defaults. Empty or null input resolves to pure defaults.
SimParams sim_params_from_json(const std::string& json_text);
std::string sim_params_to_json(const SimParams& params);

TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

PsoConfig pso_config_from_json(const std::string& json_text);
std::string pso_config_to_json(const PsoConfig& cfg);

}  // namespace chartloc
