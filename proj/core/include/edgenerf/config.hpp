#pragma once

#include <filesystem>
#include <string>

#include "edgenerf/edgemap.hpp"
#include "edgenerf/eval.hpp"
#include "edgenerf/trainer.hpp"

namespace edgenerf {

// INI file with one section per module: [trainer], [reg], [field], [edges], [eval].
// Missing keys keep their defaults; unknown sections or keys are rejected.
struct Config {
  TrainConfig train;
  EdgeConfig edges;
  EvalConfig eval;
};

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
std::string format_config(const Config& config);

}  // namespace edgenerf
