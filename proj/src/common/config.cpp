#include "metaexo/common/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"

namespace metaexo {

namespace {

struct KeyDef {
  const char* name;
  RunConfig::Type type;
  const char* def;
};

// The full key registry. Anything not listed here is rejected.
const KeyDef kKeys[] = {
    {"seed", RunConfig::Type::kInt, "42"},
    {"workers", RunConfig::Type::kInt, "1"},

    // input paths (may also be given as per-command flags)
    {"dataset_dir", RunConfig::Type::kPath, ""},
    {"checkpoint", RunConfig::Type::kPath, ""},
    {"demo", RunConfig::Type::kPath, ""},
    {"motion", RunConfig::Type::kPath, ""},
    {"skeleton_config", RunConfig::Type::kPath, ""},

    // synthetic dataset
    {"synth_train_tasks", RunConfig::Type::kInt, "8"},
    {"synth_heldout_tasks", RunConfig::Type::kInt, "21"},
    {"synth_traj_per_task", RunConfig::Type::kInt, "6"},
    {"synth_heldout_traj_per_task", RunConfig::Type::kInt, "3"},
    {"synth_subjects", RunConfig::Type::kInt, "5"},
    {"synth_noise_sigma", RunConfig::Type::kDouble, "0.005"},
    {"synth_dt", RunConfig::Type::kDouble, "0.01"},

    // network / meta-learning
    {"delta_t", RunConfig::Type::kInt, "9"},
    {"latent_dim", RunConfig::Type::kInt, "128"},
    {"encoder_resample_len", RunConfig::Type::kInt, "64"},
    {"encoder_hidden", RunConfig::Type::kInt, "128"},
    {"conv_channels", RunConfig::Type::kInt, "32"},
    {"conv_kernel", RunConfig::Type::kInt, "3"},
    {"conv_dilation1", RunConfig::Type::kInt, "1"},
    {"conv_dilation2", RunConfig::Type::kInt, "2"},
    {"head_hidden", RunConfig::Type::kInt, "64"},
    {"beta", RunConfig::Type::kDouble, "0.001"},
    {"alpha", RunConfig::Type::kDouble, "0.01"},
    {"gamma", RunConfig::Type::kDouble, "0.001"},
    {"denoise_sigma", RunConfig::Type::kDouble, "0.05"},
    {"inner_steps_train", RunConfig::Type::kInt, "1"},
    {"inner_steps_deploy", RunConfig::Type::kInt, "5"},
    {"meta_iterations", RunConfig::Type::kInt, "800"},
    {"meta_batch", RunConfig::Type::kInt, "4"},
    {"support_fraction", RunConfig::Type::kDouble, "0.5"},
    {"second_order", RunConfig::Type::kBool, "true"},
    {"checkpoint_every", RunConfig::Type::kInt, "200"},

    // plant / controller
    {"plant_a0", RunConfig::Type::kDouble, "0.06"},
    {"plant_a1", RunConfig::Type::kDouble, "0"},
    {"load_mass", RunConfig::Type::kDouble, "0.5"},
    {"load_arm", RunConfig::Type::kDouble, "0.25"},
    {"link_mass", RunConfig::Type::kDouble, "0"},
    {"link_com", RunConfig::Type::kDouble, "0.12"},
    {"gravity_acc", RunConfig::Type::kDouble, "9.81"},
    {"comp_mass", RunConfig::Type::kDouble, "0.5"},
    {"comp_arm", RunConfig::Type::kDouble, "0.25"},
    {"kp", RunConfig::Type::kDouble, "100"},
    {"kd", RunConfig::Type::kDouble, "2"},
    {"tau_max", RunConfig::Type::kDouble, "9"},
    {"sim_dt", RunConfig::Type::kDouble, "0.001"},
    {"reference_velocity_feedforward", RunConfig::Type::kBool, "false"},

    // evaluation
    {"rollout_steps", RunConfig::Type::kInt, "0"},
    {"eval_tracking_tasks", RunConfig::Type::kInt, "5"},
    {"retarget_arm", RunConfig::Type::kString, "right"},
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

void check_typed(const std::string& key, RunConfig::Type type, const std::string& value) {
  switch (type) {
    case RunConfig::Type::kInt: {
      char* end = nullptr;
      (void)std::strtoll(value.c_str(), &end, 10);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
      break;
    }
    case RunConfig::Type::kDouble: {
      char* end = nullptr;
      (void)std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
      break;
    }
    case RunConfig::Type::kBool: {
      if (value != "true" && value != "false" && value != "1" && value != "0" &&
          value != "yes" && value != "no")
        throw ConfigError("config key '" + key + "': expected boolean, got '" + value + "'");
      break;
    }
    case RunConfig::Type::kString:
    case RunConfig::Type::kPath:
      break;
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& def : kKeys) {
    entries_[def.name] = Entry{def.type, def.def};
    order_.push_back(def.name);
  }
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  check_typed(key, it->second.type, value);
  it->second.value = value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::apply_env() {
  for (const auto& key : order_) {
    std::string env_name = "METAEXO_";
    for (char c : key) env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(env_name.c_str())) set(key, v);
  }
}

bool RunConfig::has(const std::string& key) const { return !entry(key).value.empty(); }

RunConfig::Type RunConfig::type(const std::string& key) const { return entry(key).type; }

std::int64_t RunConfig::get_int(const std::string& key) const {
  return std::strtoll(entry(key).value.c_str(), nullptr, 10);
}

double RunConfig::get_double(const std::string& key) const {
  return std::strtod(entry(key).value.c_str(), nullptr);
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = entry(key).value;
  return v == "true" || v == "1" || v == "yes";
}

std::string RunConfig::get_string(const std::string& key) const { return entry(key).value; }

void RunConfig::validate_paths() const {
  for (const auto& [key, e] : entries_) {
    if (e.type == Type::kPath && !e.value.empty() && !std::filesystem::exists(e.value))
      throw ConfigError("config key '" + key + "': path does not exist: " + e.value);
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(order_.size());
  for (const auto& key : order_) out.emplace_back(key, entries_.at(key).value);
  return out;
}

}  // namespace metaexo
