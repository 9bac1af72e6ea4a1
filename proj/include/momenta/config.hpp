#pragma once

#include <string>

#include <json.hpp>

#include "momenta/train.hpp"

namespace momenta {

// JSON <-> TrainConfig. Unknown keys are rejected so a typo cannot silently
// fall back to a default. focal_alpha_* accept "inverse-frequency" or an
// explicit array.
TrainConfig parse_train_config(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);
nlohmann::ordered_json train_config_json(const TrainConfig& config);

// Resolved-config snapshot written next to a command's outputs; contains no
// timestamps so identical runs produce identical bytes.
void write_run_snapshot(const std::string& path, const std::string& command,
                        const nlohmann::ordered_json& resolved);

}  // namespace momenta
