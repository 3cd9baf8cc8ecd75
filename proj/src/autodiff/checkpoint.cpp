#include "metaexo/autodiff/checkpoint.hpp"

#include "json.hpp"
#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"

namespace metaexo::autodiff {

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::map<std::string, std::string>& config) {
  nlohmann::json j;
  j["version"] = 1;
  j["config"] = config;
  nlohmann::json jp = nlohmann::json::object();
  for (const auto& [name, t] : params) {
    nlohmann::json entry;
    entry["shape"] = t.shape;
    entry["data"] = t.data;
    jp[name] = std::move(entry);
  }
  j["params"] = std::move(jp);
  write_text_file(path, j.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": not a valid checkpoint: " + e.what());
  }
  Checkpoint ck;
  try {
    ck.version = j.at("version").get<int>();
    ck.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& [name, entry] : j.at("params").items()) {
      auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      auto data = entry.at("data").get<std::vector<double>>();
      ck.params.add(name, Tensor(std::move(shape), std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed checkpoint field: " + e.what());
  } catch (const ShapeMismatchError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (ck.version != 1)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(ck.version));
  return ck;
}

}  // namespace metaexo::autodiff
