#pragma once

#include <filesystem>

#include "metaexo/common/config.hpp"
#include "metaexo/tasknet/tasknet.hpp"

namespace metaexo::cli {

// Deployment-style reference: the demo is replayed until the movement
// visibly starts, the seed window closes over that onset, and the network
// rolls out the remainder under the demo's latent. override_steps > 0 fixes
// the generated length; 0 matches the demo's.
dataset::Trajectory rollout_reference(const tasknet::TaskNet& net,
                                      const autodiff::ParamSet& params,
                                      const dataset::Trajectory& demo,
                                      int override_steps = 0);

// Each command writes its declared outputs under `out`. Outputs are
// byte-stable for identical inputs and seed; wall-clock timestamps go only
// to the out/run.log sidecar, written by run_cli around each command.

void cmd_retarget(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_adapt(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& out);
void cmd_export_latents(const RunConfig& cfg, const std::filesystem::path& out);

// Parses argv, assembles the configuration in precedence order (defaults,
// --config file, METAEXO_ environment, explicit flags) and dispatches to
// one subcommand. Returns the process exit code; failures are nonzero.
int run_cli(int argc, const char* const* argv);

}  // namespace metaexo::cli
