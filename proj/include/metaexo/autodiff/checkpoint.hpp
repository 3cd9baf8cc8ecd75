#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "metaexo/autodiff/paramset.hpp"

namespace metaexo::autodiff {

struct Checkpoint {
  int version = 1;
  std::map<std::string, std::string> config;
  ParamSet params;
};

// JSON with sorted keys; numbers round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::map<std::string, std::string>& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metaexo::autodiff
