#ifndef MTPPO_CONFIG_HPP_
#define MTPPO_CONFIG_HPP_

#include <string>

#include "mtppo/trainer.hpp"

namespace mtppo {

// Run-configuration file: flat `key = value` lines, '#' comments. Unknown
// keys are an error. See write_config for the key set.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);

// Echo of the effective configuration; load_config(write_config(c)) is an
// identity.
std::string config_to_text(const TrainConfig& config);
void write_config(const TrainConfig& config, const std::string& path);

}  // namespace mtppo

#endif  // MTPPO_CONFIG_HPP_
